"""Generate transposable samples X_i = Sigma_R^{1/2} Z_i Sigma_C^{1/2} + M."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidConfig
from .matrix_core import MatrixSample, sym_sqrt

__all__ = [
    "CovKind",
    "CovConfig",
    "LawKind",
    "InnovationLaw",
    "GAUSSIAN",
    "DEFAULT_GAMMA",
    "ModelSpec",
    "build_cov",
    "normalize_trace",
    "replicate_rng",
    "PreparedModel",
    "sample_dataset",
]


class CovKind(str, Enum):
    IDENTITY = "identity"
    SCALED_IDENTITY = "scaled"
    DIAGONAL = "diag8"
    COMPOUND_SYMMETRY = "cs"
    TRIDIAGONAL = "tridiag"
    AR1 = "ar1"


_DEFAULT_PARAMS = {
    CovKind.SCALED_IDENTITY: (1.0,),
    CovKind.COMPOUND_SYMMETRY: (0.9, 0.2),
    CovKind.TRIDIAGONAL: (0.1,),
    CovKind.AR1: (0.0,),
}


@dataclass(frozen=True)
class CovConfig:
    """A structured covariance matrix.

    ``params`` depends on ``kind``: scaled -> (sigma2,), cs -> (v, rho) giving
    v I + rho 11', tridiag -> (rho,), ar1 -> (rho,). The diagonal kind sets the
    first dim // 8 variances to 2 and the rest to 1.
    """

    kind: CovKind
    dim: int
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", CovKind(self.kind))
        if self.dim < 1:
            raise InvalidConfig(f"covariance dimension must be positive, got {self.dim}")
        params = tuple(float(p) for p in self.params) or _DEFAULT_PARAMS.get(self.kind, ())
        expected = len(_DEFAULT_PARAMS.get(self.kind, ()))
        if len(params) != expected:
            raise InvalidConfig(f"{self.kind.value} takes {expected} parameter(s), got {len(params)}")
        object.__setattr__(self, "params", params)
        if self.kind is CovKind.AR1 and not abs(params[0]) < 1.0:
            raise InvalidConfig(f"ar1 needs |rho| < 1, got rho = {params[0]}")
        if self.kind is CovKind.SCALED_IDENTITY and not params[0] > 0.0:
            raise InvalidConfig(f"scaled identity needs sigma2 > 0, got {params[0]}")
        if self.kind is CovKind.TRIDIAGONAL and not abs(params[0]) < 0.5:
            raise InvalidConfig(f"tridiag needs |rho| < 0.5 to stay positive definite, got {params[0]}")
        if self.kind is CovKind.COMPOUND_SYMMETRY:
            v, rho = params
            # eigenvalues v (multiplicity dim-1) and v + dim*rho
            if not (v > 0.0 and v + self.dim * rho > 0.0):
                raise InvalidConfig(f"cs({v}, {rho}) is not positive definite at dim {self.dim}")

    @classmethod
    def parse(cls, text: str, dim: int) -> CovConfig:
        """Parse ``identity``, ``diag8``, ``cs[:v,rho]``, ``tridiag[:rho]``, ``ar1:rho`` or ``scaled:s2``."""
        name, _, rest = text.strip().partition(":")
        try:
            kind = CovKind(name.strip().lower())
        except ValueError:
            raise InvalidConfig(f"unknown covariance kind {name!r}") from None
        try:
            params = tuple(float(p) for p in rest.split(",")) if rest else ()
        except ValueError:
            raise InvalidConfig(f"bad covariance parameters in {text!r}") from None
        if kind is CovKind.AR1 and not params:
            raise InvalidConfig("ar1 needs a correlation, e.g. ar1:0.85")
        return cls(kind, dim, params)

    def label(self) -> str:
        if self.kind in (CovKind.AR1, CovKind.SCALED_IDENTITY):
            return f"{self.kind.value}:{self.params[0]:g}"
        return self.kind.value


def build_cov(cfg: CovConfig) -> NDArray[np.float64]:
    p = cfg.dim
    idx = np.arange(p)
    lag = np.abs(idx[:, None] - idx[None, :])
    if cfg.kind is CovKind.IDENTITY:
        return np.eye(p)
    if cfg.kind is CovKind.SCALED_IDENTITY:
        return cfg.params[0] * np.eye(p)
    if cfg.kind is CovKind.DIAGONAL:
        d = np.ones(p)
        d[: p // 8] = 2.0
        return np.diag(d)
    if cfg.kind is CovKind.COMPOUND_SYMMETRY:
        v, rho = cfg.params
        return v * np.eye(p) + rho * np.ones((p, p))
    if cfg.kind is CovKind.TRIDIAGONAL:
        return np.where(lag == 0, 1.0, np.where(lag == 1, cfg.params[0], 0.0))
    rho = cfg.params[0]
    if rho == 0.0:
        return np.eye(p)
    return rho ** lag.astype(np.float64)


def normalize_trace(a: NDArray[np.float64]) -> NDArray[np.float64]:
    """Rescale so that tr(a) equals its dimension."""
    a = np.asarray(a, dtype=np.float64)
    tr = float(np.trace(a))
    if not tr > 0.0:
        raise InvalidConfig(f"cannot normalise a matrix with trace {tr:.6g}")
    return a * (a.shape[0] / tr)


class LawKind(str, Enum):
    GAUSSIAN = "gaussian"
    GAMMA = "gamma"


@dataclass(frozen=True)
class InnovationLaw:
    """Mean-zero, unit-variance innovation distribution.

    The gamma law draws G ~ Gamma(shape, rate) and returns (G - shape/rate) /
    (sqrt(shape)/rate); for shape 4, rate 0.5 this is (G - 8)/4.
    """

    kind: LawKind = LawKind.GAUSSIAN
    shape: float = 4.0
    rate: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", LawKind(self.kind))
        if self.kind is LawKind.GAMMA and not (self.shape > 0.0 and self.rate > 0.0):
            raise InvalidConfig("gamma shape and rate must be positive")

    @property
    def kurtosis_offset(self) -> float:
        """B = E[Z^4] - 3."""
        return 0.0 if self.kind is LawKind.GAUSSIAN else 6.0 / self.shape

    def draw(self, rng: np.random.Generator, size) -> NDArray[np.float64]:
        if self.kind is LawKind.GAUSSIAN:
            return rng.standard_normal(size)
        # the rate cancels after standardisation, so draw at unit scale
        g = rng.standard_gamma(self.shape, size)
        return (g - self.shape) / math.sqrt(self.shape)

    @classmethod
    def parse(cls, text: str) -> InnovationLaw:
        name = text.strip().lower()
        if name in ("gaussian", "normal", "scenario1"):
            return GAUSSIAN
        if name in ("gamma", "scenario2"):
            return DEFAULT_GAMMA
        raise InvalidConfig(f"unknown innovation law {text!r}")


GAUSSIAN = InnovationLaw(LawKind.GAUSSIAN)
DEFAULT_GAMMA = InnovationLaw(LawKind.GAMMA, 4.0, 0.5)


@dataclass(frozen=True)
class ModelSpec:
    n: int
    row_cov: CovConfig
    col_cov: CovConfig
    law: InnovationLaw = GAUSSIAN
    mean: Optional[NDArray[np.float64]] = field(default=None, compare=False)
    col_trace_normalize: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidConfig(f"n must be positive, got {self.n}")
        if self.mean is not None:
            m = np.asarray(self.mean, dtype=np.float64)
            if m.shape != (self.r, self.c):
                raise InvalidConfig(f"mean has shape {m.shape}, expected {(self.r, self.c)}")
            object.__setattr__(self, "mean", m)
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")

    @property
    def r(self) -> int:
        return self.row_cov.dim

    @property
    def c(self) -> int:
        return self.col_cov.dim

    def sigma_r(self) -> NDArray[np.float64]:
        return build_cov(self.row_cov)

    def sigma_c(self) -> NDArray[np.float64]:
        sc = build_cov(self.col_cov)
        return normalize_trace(sc) if self.col_trace_normalize else sc


def replicate_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by the seed and any replicate indices."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))


class PreparedModel:
    """A ModelSpec with its covariance roots factorised once for repeated draws.

    ``sigma_r`` and ``sigma_c`` replace the structured covariances of ``spec``
    with explicit matrices of the same dimensions (``sigma_c`` is used as given,
    without trace normalisation).
    """

    def __init__(
        self,
        spec: ModelSpec,
        sigma_r: Optional[NDArray[np.float64]] = None,
        sigma_c: Optional[NDArray[np.float64]] = None,
    ) -> None:
        self.spec = spec
        for name, mat, dim in (("sigma_r", sigma_r, spec.r), ("sigma_c", sigma_c, spec.c)):
            if mat is not None and np.shape(mat) != (dim, dim):
                raise InvalidConfig(f"{name} has shape {np.shape(mat)}, expected {(dim, dim)}")
        self._sigma_r = sigma_r
        self._sigma_c = sigma_c

    @cached_property
    def row_root(self) -> Optional[NDArray[np.float64]]:
        if self._sigma_r is not None:
            return sym_sqrt(self._sigma_r)
        if self.spec.row_cov.kind is CovKind.IDENTITY:
            return None
        return sym_sqrt(self.spec.sigma_r())

    @cached_property
    def col_root(self) -> Optional[NDArray[np.float64]]:
        sc = self.spec.sigma_c() if self._sigma_c is None else np.asarray(self._sigma_c, dtype=np.float64)
        if np.array_equal(sc, np.eye(sc.shape[0])):
            return None
        return sym_sqrt(sc)

    def draw(self, replicate: int = 0) -> MatrixSample:
        spec = self.spec
        rng = replicate_rng(spec.seed, replicate)
        x = spec.law.draw(rng, (spec.n, spec.r, spec.c))
        if self.row_root is not None:
            x = np.matmul(self.row_root, x)
        if self.col_root is not None:
            x = np.matmul(x, self.col_root)
        if spec.mean is not None:
            x = x + spec.mean
        return MatrixSample(x)


def sample_dataset(spec: ModelSpec, replicate: int = 0) -> MatrixSample:
    """Draw one sample of ``spec.n`` matrices; deterministic in (seed, replicate)."""
    return PreparedModel(spec).draw(replicate)
