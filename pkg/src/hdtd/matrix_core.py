"""Dense matrix primitives: the sample container, symmetric roots and Gram products."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidSample, NotPositiveSemiDefinite, SingularMatrix

__all__ = [
    "DEFAULT_TOL",
    "MatrixSample",
    "as_symmetric",
    "sym_sqrt",
    "sym_inv_sqrt",
    "transpose_sample",
    "pairwise_gram",
]

DEFAULT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MatrixSample:
    """N real r x c matrices stored as one read-only ``(n, rows, cols)`` array."""

    data: NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3:
            raise InvalidSample(f"expected a stack of matrices with 3 dimensions, got shape {arr.shape}")
        if 0 in arr.shape:
            raise InvalidSample(f"empty dimension in sample shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidSample("sample contains NaN or infinite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_matrices(cls, matrices: Iterable[ArrayLike]) -> MatrixSample:
        mats = [np.asarray(m, dtype=np.float64) for m in matrices]
        if not mats:
            raise InvalidSample("sample must contain at least one matrix")
        shapes = {m.shape for m in mats}
        if len(shapes) != 1 or mats[0].ndim != 2:
            raise InvalidSample(f"matrices must share one 2-d shape, got {sorted(shapes)}")
        return cls(np.stack(mats))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def rows(self) -> int:
        return self.data.shape[1]

    @property
    def cols(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def vectorized(self) -> NDArray[np.float64]:
        """Return the ``(n, rows*cols)`` matrix whose i-th row is vec(X_i) (column-major vec)."""
        return self.data.transpose(0, 2, 1).reshape(self.n, -1)

    def map(self, fn) -> MatrixSample:
        return MatrixSample(fn(self.data))

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MatrixSample):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __repr__(self) -> str:
        return f"MatrixSample(n={self.n}, rows={self.rows}, cols={self.cols})"


def as_symmetric(a: ArrayLike, *, name: str = "matrix", atol: float = 1e-10) -> NDArray[np.float64]:
    """Validate a square, nearly symmetric matrix and return its exact symmetrization."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    scale = max(1.0, float(np.max(np.abs(arr)))) if arr.size else 1.0
    if np.max(np.abs(arr - arr.T), initial=0.0) > atol * scale:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (arr + arr.T)


def _eigh(a: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    sym = as_symmetric(a)
    return np.linalg.eigh(sym)


def sym_sqrt(a: ArrayLike, tol: float = DEFAULT_TOL) -> NDArray[np.float64]:
    """Symmetric positive semidefinite square root via eigendecomposition.

    Eigenvalues within ``tol`` (relative to the largest) of zero are clamped
    to zero before rooting; anything more negative is rejected.
    """
    w, v = _eigh(a)
    top = max(float(w[-1]), 0.0)
    if w[0] < -tol * top:
        raise NotPositiveSemiDefinite(
            f"smallest eigenvalue {w[0]:.3e} is below -tol * largest ({-tol * top:.3e})"
        )
    w = np.where(w < tol * top, 0.0, w)
    root = (v * np.sqrt(w)) @ v.T
    return 0.5 * (root + root.T)


def sym_inv_sqrt(a: ArrayLike, tol: float = DEFAULT_TOL) -> NDArray[np.float64]:
    """Symmetric inverse square root of a positive definite matrix."""
    w, v = _eigh(a)
    top = float(w[-1])
    if top <= 0.0 or w[0] <= tol * top:
        raise SingularMatrix(f"matrix is not positive definite (eigenvalues in [{w[0]:.3e}, {top:.3e}])")
    root = (v / np.sqrt(w)) @ v.T
    return 0.5 * (root + root.T)


def transpose_sample(s: MatrixSample) -> MatrixSample:
    """Swap the roles of rows and columns in every matrix."""
    return MatrixSample(s.data.transpose(0, 2, 1))


def pairwise_gram(s: MatrixSample, centered: bool = False) -> NDArray[np.float64]:
    """N x N matrix of inner products <vec(X_i - m), vec(X_j - m)>.

    ``m`` is the sample mean matrix when ``centered`` and zero otherwise.
    """
    flat = s.data.reshape(s.n, -1)
    if centered:
        flat = flat - flat[0]
        flat = flat - flat.mean(axis=0)
    gram = flat @ flat.T
    return 0.5 * (gram + gram.T)
