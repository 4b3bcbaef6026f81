"""Unbiased U-statistic estimators of tr(Sigma_R), tr(Sigma_R^2) and tr(Omega^2).

Each quartic estimator comes in two flavours:

* ``*_naive`` enumerates every ordered tuple of distinct indices. It costs
  O(N^4) and exists as a reference for small N.
* ``*_fast`` evaluates the same quantity from O(N^2) pairwise products.

All sums run over *ordered* tuples of mutually distinct indices and are
normalised by the falling factorial P(N, t) = N!/(N-t)!.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateSample, SampleTooSmall
from .matrix_core import MatrixSample, pairwise_gram

__all__ = [
    "Products",
    "TraceEstimates",
    "falling_factorial",
    "t1n",
    "t1n_star",
    "t2n_naive",
    "t2n_fast",
    "t2n_star_naive",
    "t2n_star_fast",
    "estimate_all",
    "sample_row_covariance",
]

Products = Literal["auto", "rows", "cols"]


def falling_factorial(s: int, t: int) -> int:
    """P(s, t) = s!/(s-t)!, as an exact integer."""
    if t < 0 or s < 0:
        raise ValueError("falling_factorial needs nonnegative arguments")
    if s < t:
        raise SampleTooSmall(f"P({s}, {t}) needs at least {t} distinct indices")
    out = 1
    for k in range(s - t + 1, s + 1):
        out *= k
    return out


def _require(s: MatrixSample, n_min: int, what: str) -> None:
    if s.n < n_min:
        raise SampleTooSmall(f"{what} needs at least {n_min} matrices, got {s.n}")


def _fsum(values: NDArray[np.float64]) -> float:
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())


def _resolve(products: Products, rows: int, cols: int) -> Literal["rows", "cols"]:
    if products == "auto":
        return "cols" if cols <= rows else "rows"
    if products not in ("rows", "cols"):
        raise ValueError(f"products must be 'auto', 'rows' or 'cols', got {products!r}")
    return products


def _centered(x: NDArray[np.float64]) -> NDArray[np.float64]:
    # shifting by X_1 first makes identical matrices centre to exact zeros
    d = x - x[0]
    return d - d.mean(axis=0)


# ---------------------------------------------------------------------------
# T1N


def _t1n_from_gram(g: NDArray[np.float64], n: int, cols: int) -> float:
    diag = _fsum(np.diag(g))
    off = _fsum(g) - diag
    return diag / (cols * n) - off / (cols * falling_factorial(n, 2))


def t1n(s: MatrixSample) -> float:
    """Unbiased estimator of tr(Sigma_R).

    tr(X_i X_j') = tr(X_j' X_i) = <vec X_i, vec X_j>, so both trace
    orientations reduce to the same Gram entry. The Gram matrix is built from
    mean-centred data, which leaves the estimator unchanged.
    """
    _require(s, 2, "T1N")
    g = pairwise_gram(s, centered=True)
    return _t1n_from_gram(g, s.n, s.cols)


def t1n_star(s: MatrixSample) -> float:
    """Unbiased estimator of tr(Omega) = tr(Sigma_R) tr(Sigma_C) on the raw sample."""
    _require(s, 2, "T1N*")
    g = pairwise_gram(s, centered=False)
    return _t1n_from_gram(g, s.n, 1)


# ---------------------------------------------------------------------------
# T2N


def t2n_naive(s: MatrixSample) -> float:
    """Definitional T2N = Y2N - 2 Y4N + Y5N by explicit tuple enumeration."""
    _require(s, 4, "T2N")
    n, c = s.n, s.cols
    x = s.data
    # a[i, j] = X_i X_j'
    a = np.einsum("iab,jcb->ijac", x, x)

    def tr(p: NDArray[np.float64], q: NDArray[np.float64]) -> float:
        return float(np.sum(p * q.T))

    y2 = math.fsum(tr(a[i, i], a[j, j]) for i, j in permutations(range(n), 2))
    y4 = math.fsum(tr(a[i, i], a[j, k]) for i, j, k in permutations(range(n), 3))
    y5 = math.fsum(tr(a[i, j], a[k, l]) for i, j, k, l in permutations(range(n), 4))
    return (
        y2 / (c**2 * falling_factorial(n, 2))
        - 2.0 * y4 / (c**2 * falling_factorial(n, 3))
        + y5 / (c**2 * falling_factorial(n, 4))
    )


def _pair_sums(x: NDArray[np.float64], orient: str) -> tuple[float, float, float]:
    """Ordered-pair sums (Y*2N, Y*52N, Y*53N) from blockwise pair products."""
    n, r, c = x.shape
    if orient == "cols":
        # blocks X_i' X_j (c x c): left factor X_i', right stack [X_1 ... X_N] (r x Nc)
        left = x.transpose(0, 2, 1)
        stack = x.transpose(1, 0, 2).reshape(r, n * c)
        d = c
    else:
        # blocks X_i X_j' (r x r): right stack [X_1' ... X_N'] (c x Nr)
        left = x
        stack = x.transpose(2, 0, 1).reshape(c, n * r)
        d = r
    frob = np.zeros(n)
    sq = np.zeros(n)
    for i in range(n - 1):
        p = (left[i] @ stack[:, (i + 1) * d :]).reshape(d, n - i - 1, d)
        frob[i] = np.einsum("ajb,ajb->", p, p)
        sq[i] = np.einsum("ajb,bja->", p, p)
    own = np.matmul(left, x if orient == "cols" else x.transpose(0, 2, 1))
    flat = own.reshape(n, -1)
    inner = flat @ flat.T
    diag_pairs = _fsum(inner) - _fsum(np.diag(inner))
    frob_pairs = 2.0 * _fsum(frob)
    sq_pairs = 2.0 * _fsum(sq)
    if orient == "cols":
        # ||X_i'X_j||^2 = tr(X_i X_i' X_j X_j');  <X_i'X_i, X_j'X_j> = tr(X_i X_j' X_j X_i')
        return frob_pairs, diag_pairs, sq_pairs
    return diag_pairs, frob_pairs, sq_pairs


def _single_sums(x: NDArray[np.float64], orient: str) -> dict[str, float]:
    """Single-index sums Y*41N, Y*42N, Y*43N, Y*51N, Y*541N, Y*551N."""
    n = x.shape[0]
    xbar = x.mean(axis=0)
    d = x - xbar
    rest = x.sum(axis=0) - x  # sum over j != i of X_j
    xt = x.transpose(0, 2, 1)
    dt = d.transpose(0, 2, 1)
    if orient == "cols":
        own = np.matmul(xt, x)  # X_i' X_i
        dx = np.matmul(dt, x)  # D_i' X_i
        dd = np.matmul(dt, d)  # D_i' D_i
        cube = np.matmul(x, own)  # X_i X_i' X_i
        y41 = np.sum(dx * dx, axis=(1, 2))
        y541 = np.sum(own * dd, axis=(1, 2))
        y551 = np.sum(dx * dx.transpose(0, 2, 1), axis=(1, 2))
    else:
        own = np.matmul(x, xt)  # X_i X_i'
        xd = np.matmul(x, dt)  # X_i D_i'
        dd = np.matmul(d, dt)  # D_i D_i'
        cube = np.matmul(own, x)
        y41 = np.sum(dd * own, axis=(1, 2))
        y541 = np.sum(xd * xd, axis=(1, 2))
        y551 = np.sum(xd * xd.transpose(0, 2, 1), axis=(1, 2))
    y42 = np.sum(own * own, axis=(1, 2))
    y51 = np.sum(dd * dd, axis=(1, 2))
    y43 = np.sum(cube * rest, axis=(1, 2))
    return {
        "y41": _fsum(y41),
        "y42": _fsum(y42),
        "y43": _fsum(y43),
        "y51": _fsum(y51),
        "y541": _fsum(y541),
        "y551": _fsum(y551),
    }


def _t2n_decomposition(x: NDArray[np.float64], orient: str) -> float:
    """T2N from the single- and pair-index sums; valid on uncentred data.

    Note the N^3 weight on the centred fourth-power term Y*51N.
    """
    n, _, c = x.shape
    y2, y52, y53 = _pair_sums(x, orient)
    t = _single_sums(x, orient)
    y41, y42, y43 = t["y41"], t["y42"], t["y43"]
    n2 = float(n * n)
    m1 = float(n - 1)
    y4 = n2 * y41 - m1**2 * y42 - y2 + 2.0 * m1 * y43
    y54 = n2 * t["y541"] + 2.0 * m1 * y43 - m1**2 * y42 - y52
    y55 = n2 * t["y551"] + 2.0 * m1 * y43 - m1**2 * y42 - y53
    quad = float(n * n - 3 * n + 3)
    y5 = (
        m1 * quad * y42
        + (2 * n - 3) * (y2 + y52 + y53)
        + 2.0 * (n - 3) * (y4 + y54 + y55)
        - 4.0 * quad * y43
        - n2 * n * t["y51"]
    ) / 3.0
    return (
        y2 / (c**2 * falling_factorial(n, 2))
        - 2.0 * y4 / (c**2 * falling_factorial(n, 3))
        + y5 / (c**2 * falling_factorial(n, 4))
    )


def t2n_fast(s: MatrixSample, products: Products = "auto") -> float:
    """O(N^2) evaluation of T2N, the unbiased estimator of tr(Sigma_R^2).

    ``products`` picks r x r (``"rows"``) or c x c (``"cols"``) pair products;
    ``"auto"`` takes the smaller. The data are centred first: T2N is exactly
    location invariant and centring removes cancellation when the mean is large.
    """
    _require(s, 4, "T2N")
    orient = _resolve(products, s.rows, s.cols)
    return _t2n_decomposition(_centered(s.data), orient)


# ---------------------------------------------------------------------------
# T*2N


def t2n_star_naive(s: MatrixSample) -> float:
    _require(s, 4, "T*2N")
    n = s.n
    g = pairwise_gram(s, centered=False)
    a = math.fsum(g[i, j] ** 2 for i, j in permutations(range(n), 2))
    b = math.fsum(g[i, j] * g[i, k] for i, j, k in permutations(range(n), 3))
    d = math.fsum(g[i, j] * g[k, l] for i, j, k, l in permutations(range(n), 4))
    return a / falling_factorial(n, 2) - 2.0 * b / falling_factorial(n, 3) + d / falling_factorial(n, 4)


def t2n_star_fast(s: MatrixSample) -> float:
    """Closed form of T*2N from the centred N x N Gram matrix.

    T*2N = (N-1) / (N(N-2)(N-3)) * [(N-1)(N-2) tr(S^2) + tr(S)^2 - N Q]

    with S the rc x rc sample covariance (divisor N-1), which is never formed:
    tr(S) = tr(G)/(N-1), tr(S^2) = ||G||_F^2/(N-1)^2 and Q = sum_i G_ii^2/(N-1).
    """
    _require(s, 4, "T*2N")
    n = s.n
    g = pairwise_gram(s, centered=True)
    diag = np.diag(g)
    tr_s = _fsum(diag) / (n - 1)
    tr_s2 = _fsum(g * g) / (n - 1) ** 2
    q = _fsum(diag * diag) / (n - 1)
    return (n - 1) / (n * (n - 2) * (n - 3)) * ((n - 1) * (n - 2) * tr_s2 + tr_s**2 - n * q)


# ---------------------------------------------------------------------------
# bundles


@dataclass(frozen=True)
class TraceEstimates:
    t1: float
    t2: float
    t2_star: float
    tr_sigma_c2_hat: float
    n: int
    rows: int
    cols: int
    centered: bool = False


def _leading_terms(s: MatrixSample) -> tuple[float, float, float]:
    """First terms of T1N, T2N and T*2N; unbiased only when the mean is known to be zero."""
    n, c = s.n, s.cols
    g = pairwise_gram(s, centered=False)
    diag = np.diag(g)
    t1 = _fsum(diag) / (c * n)
    orient = _resolve("auto", s.rows, s.cols)
    y2, _, _ = _pair_sums(s.data, orient)
    t2 = y2 / (c**2 * falling_factorial(n, 2))
    t2_star = (_fsum(g * g) - _fsum(diag * diag)) / falling_factorial(n, 2)
    return t1, t2, t2_star


def estimate_all(s: MatrixSample, centered: bool = False) -> TraceEstimates:
    """Compute T1N, T2N, T*2N and the plug-in estimate of tr(Sigma_C^2).

    ``centered=True`` keeps only the leading term of each estimator, which is
    appropriate when the mean matrix is known to be zero (n >= 2 suffices).
    """
    if centered:
        _require(s, 2, "centred estimators")
        t1, t2, t2_star = _leading_terms(s)
    else:
        _require(s, 4, "trace estimators")
        t1 = t1n(s)
        t2 = t2n_fast(s)
        t2_star = t2n_star_fast(s)
    if not t2 > 0.0:
        raise DegenerateSample(f"T2N = {t2:.6g} is not positive", estimator="t2")
    if not t2_star > 0.0:
        raise DegenerateSample(f"T*2N = {t2_star:.6g} is not positive", estimator="t2_star")
    return TraceEstimates(
        t1=t1,
        t2=t2,
        t2_star=t2_star,
        tr_sigma_c2_hat=t2_star / t2,
        n=s.n,
        rows=s.rows,
        cols=s.cols,
        centered=centered,
    )


def sample_row_covariance(s: MatrixSample) -> NDArray[np.float64]:
    """Unbiased r x r row covariance estimate sum_i (X_i - Xbar)(X_i - Xbar)' / ((N-1) c)."""
    _require(s, 2, "sample row covariance")
    d = _centered(s.data)
    cov = np.einsum("iab,icb->ac", d, d) / ((s.n - 1) * s.cols)
    return 0.5 * (cov + cov.T)
