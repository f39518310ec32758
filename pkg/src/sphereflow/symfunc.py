"""Elementary symmetric functions of principal curvatures.

Everything here operates on plain curvature vectors (length n arrays) or
on batches of them stacked along leading axes, so the same routines serve
single-point queries and whole-grid evaluations.  sigma_m denotes the
m-th elementary symmetric polynomial with the conventions sigma_0 = 1 and
sigma_m = 0 for m < 0 or m > n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConeViolation

__all__ = [
    "CurvatureVector",
    "ConeLabel",
    "QuotientInfo",
    "sigma",
    "sigma_table",
    "sigma_excl",
    "cone_label",
    "in_cone",
    "in_cone_closure",
    "quotient",
    "identity_quotient",
    "sigma_two_value",
    "quotient_two_value",
    "newton_maclaurin_gap",
    "quotient_trace_gaps",
    "pinch_deficit_parts",
    "sigma_hessian_offdiag",
]


@dataclass
class CurvatureVector:
    """Principal curvatures at a single point of an n-dimensional surface."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("curvature vector needs at least two entries")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("curvature vector entries must be finite")

    @property
    def n(self) -> int:
        return self.values.size


@dataclass
class ConeLabel:
    """Largest admissible cone index together with a strict membership flag."""

    k: int
    contained: bool


@dataclass
class QuotientInfo:
    """Curvature quotient F = sigma_{k+1}/sigma_k and its diagonal gradient."""

    value: float
    grad_diag: np.ndarray
    trace_grad: float
    weighted_trace: float
    c: float


def _values(lam) -> np.ndarray:
    if isinstance(lam, CurvatureVector):
        return lam.values
    a = np.asarray(lam, dtype=float)
    if a.ndim == 0:
        raise ValueError("expected arrays of curvature vectors along the last axis")
    return a


def sigma_table(lam, mmax: int) -> np.ndarray:
    """All sigma_0 .. sigma_mmax, stacked along a new last axis.

    Built by multiplying out prod_i (1 + t*lam_i) one factor at a time and
    keeping coefficients up to t^mmax, which is a single O(n*mmax) pass.
    """
    vals = _values(lam)
    n = vals.shape[-1]
    if not 0 <= mmax:
        raise ValueError("mmax must be nonnegative")
    out = np.zeros(vals.shape[:-1] + (mmax + 1,), dtype=float)
    out[..., 0] = 1.0
    top = 0
    for j in range(n):
        v = vals[..., j]
        top = min(top + 1, mmax)
        # descending order so each coefficient is updated from the previous pass
        for m in range(top, 0, -1):
            out[..., m] += v * out[..., m - 1]
    return out


def sigma(lam, m: int):
    """sigma_m of a curvature vector, vectorized over leading axes."""
    vals = _values(lam)
    n = vals.shape[-1]
    if not 0 <= m <= n:
        raise ValueError(f"sigma index m={m} out of range for n={n}")
    res = sigma_table(vals, m)[..., m]
    return float(res) if res.ndim == 0 else res


def _sigma_ext(table: np.ndarray, m: int):
    """Table lookup extended by sigma_m = 0 outside 0..n."""
    if m < 0 or m >= table.shape[-1]:
        return np.zeros(table.shape[:-1])
    return table[..., m]


def sigma_excl(lam, m: int, excluded):
    """sigma_m of the vector with one or two entries removed.

    ``excluded`` holds zero-based entry indices.
    """
    vals = _values(lam)
    n = vals.shape[-1]
    idx = sorted(set(int(i) for i in np.atleast_1d(excluded)))
    if not 1 <= len(idx) <= 2:
        raise ValueError("exactly one or two distinct indices may be excluded")
    if idx[0] < 0 or idx[-1] >= n:
        raise ValueError(f"excluded index out of range for n={n}")
    rest = np.delete(vals, idx, axis=-1)
    if not 0 <= m <= rest.shape[-1]:
        raise ValueError(f"sigma index m={m} out of range after exclusion")
    res = sigma_table(rest, m)[..., m]
    return float(res) if res.ndim == 0 else res


def cone_label(lam, k: int) -> ConeLabel:
    """Strict membership of a single vector in the k-th admissible cone."""
    vals = _values(lam)
    if vals.ndim != 1:
        raise ValueError("cone_label takes a single curvature vector")
    n = vals.size
    if not 1 <= k <= n:
        raise ValueError(f"cone index k={k} out of range for n={n}")
    table = sigma_table(vals, k)
    contained = bool(np.all(table[1:] > 0.0))
    return ConeLabel(k=k, contained=contained)


def in_cone(lam, k: int):
    """Boolean strict cone membership, vectorized over leading axes."""
    vals = _values(lam)
    n = vals.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"cone index k={k} out of range for n={n}")
    table = sigma_table(vals, k)
    return np.all(table[..., 1:] > 0.0, axis=-1)


def in_cone_closure(lam, k: int, rel_tol: float = 1e-14):
    """Membership in the closed cone, allowing a tiny scaled negative slack.

    sigma_i may dip to -rel_tol * binom(n,i) * max(1,|lam|_inf)^i, which is
    the roundoff floor for vectors constructed to sit on the boundary.
    """
    vals = _values(lam)
    n = vals.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"cone index k={k} out of range for n={n}")
    table = sigma_table(vals, k)
    amax = np.maximum(1.0, np.max(np.abs(vals), axis=-1))
    ok = np.ones(vals.shape[:-1], dtype=bool)
    for i in range(1, k + 1):
        floor = -rel_tol * math.comb(n, i) * amax**i
        ok &= table[..., i] >= floor
    return ok if ok.ndim else bool(ok)


def identity_quotient(n: int, k: int) -> float:
    """Value of sigma_{k+1}/sigma_k on the all-ones vector: (n-k)/(k+1)."""
    if not 0 <= k <= n - 1:
        raise ValueError(f"quotient order k={k} out of range for n={n}")
    return (n - k) / (k + 1)


def _quotient_arrays(vals: np.ndarray, k: int):
    """Batched quotient value, diagonal gradient, and the two trace sums."""
    n = vals.shape[-1]
    table = sigma_table(vals, min(k + 2, n))
    sk = table[..., k]
    sk1 = table[..., k + 1] if k + 1 <= n else np.zeros(sk.shape)
    grad = np.empty(vals.shape)
    for i in range(n):
        rest = np.delete(vals, i, axis=-1)
        t_i = sigma_table(rest, min(k, n - 1))
        ski = _sigma_ext(t_i, k)
        skm1i = _sigma_ext(t_i, k - 1)
        grad[..., i] = (ski * sk - sk1 * skm1i) / sk**2
    value = sk1 / sk
    trace = np.sum(grad, axis=-1)
    weighted = np.sum(grad * vals**2, axis=-1)
    return value, grad, trace, weighted, sk


def quotient(lam, k: int) -> QuotientInfo:
    """Quotient package for a single curvature vector with sigma_k > 0."""
    vals = _values(lam)
    if vals.ndim != 1:
        raise ValueError("quotient takes a single curvature vector")
    n = vals.size
    if not 0 <= k <= n - 1:
        raise ValueError(f"quotient order k={k} out of range for n={n}")
    sk = sigma_table(vals, k)[k]
    if not sk > 0.0:
        raise ConeViolation(f"sigma_{k} = {sk} is not positive")
    value, grad, trace, weighted, _ = _quotient_arrays(vals, k)
    return QuotientInfo(
        value=float(value),
        grad_diag=grad,
        trace_grad=float(trace),
        weighted_trace=float(weighted),
        c=identity_quotient(n, k),
    )


def _comb_row(n: int, mmax: int) -> np.ndarray:
    return np.array([math.comb(n, m) if 0 <= m <= n else 0 for m in range(mmax + 1)], float)


def sigma_two_value(lam1, lam2, n: int, m: int):
    """sigma_m of the vector (lam1, lam2, ..., lam2) with lam2 repeated n-1 times.

    Closed form used on axisymmetric grids where only two distinct principal
    curvatures occur; vectorized over node arrays lam1, lam2.
    """
    if not 0 <= m <= n:
        raise ValueError(f"sigma index m={m} out of range for n={n}")
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    out = np.zeros(np.broadcast(lam1, lam2).shape)
    if m <= n - 1:
        out = out + math.comb(n - 1, m) * lam2**m
    if m >= 1:
        out = out + lam1 * math.comb(n - 1, m - 1) * lam2 ** (m - 1)
    return out


def quotient_two_value(lam1, lam2, n: int, k: int):
    """Quotient data on two-value curvature vectors, vectorized over nodes.

    Returns (F, F_1, F_2, trace_grad, weighted_trace) where F_1 is the
    gradient entry of the simple curvature and F_2 the entry shared by the
    n-1 repeated ones.  Raises ConeViolation when sigma_k <= 0 anywhere,
    carrying the first offending node index.
    """
    if not 0 <= k <= n - 1:
        raise ValueError(f"quotient order k={k} out of range for n={n}")
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    sk = sigma_two_value(lam1, lam2, n, k)
    bad = ~(sk > 0.0)
    if np.any(bad):
        node = int(np.argmax(bad.ravel()))
        raise ConeViolation(f"sigma_{k} not positive at node {node}", node=node)
    sk1 = sigma_two_value(lam1, lam2, n, k + 1)

    def excl_one(m):
        # vector with lam1 removed: lam2 repeated n-1 times
        return math.comb(n - 1, m) * lam2**m if 0 <= m <= n - 1 else 0.0

    def excl_rep(m):
        # vector with one repeated entry removed: (lam1, lam2 x (n-2))
        if not 0 <= m <= n - 1:
            return 0.0
        out = np.zeros(np.broadcast(lam1, lam2).shape)
        if m <= n - 2:
            out = out + math.comb(n - 2, m) * lam2**m
        if m >= 1:
            out = out + lam1 * math.comb(n - 2, m - 1) * lam2 ** (m - 1)
        return out

    f1 = (excl_one(k) * sk - sk1 * excl_one(k - 1)) / sk**2
    f2 = (excl_rep(k) * sk - sk1 * excl_rep(k - 1)) / sk**2
    value = sk1 / sk
    trace = f1 + (n - 1) * f2
    weighted = f1 * lam1**2 + (n - 1) * f2 * lam2**2
    return value, f1, f2, trace, weighted


def newton_maclaurin_gap(lam, k: int, l: int, r: int, s: int):
    """Gap of the normalized ratio inequality between index pairs.

    With p_m = sigma_m / binom(n,m), returns
    (p_r/p_s)^(1/(r-s)) - (p_k/p_l)^(1/(k-l)), which is nonnegative for
    vectors in the k-th cone whenever k > l >= 0, r > s >= 0, k >= r, l >= s.
    """
    vals = _values(lam)
    n = vals.shape[-1]
    if not (k > l >= 0 and r > s >= 0 and k >= r and l >= s and k <= n):
        raise ValueError(f"invalid index quadruple (k,l,r,s)=({k},{l},{r},{s})")
    if not np.all(in_cone(vals, k)):
        raise ConeViolation(f"vector outside the {k}-th cone")
    table = sigma_table(vals, k)
    combs = _comb_row(n, k)
    p = table / combs
    lhs = (p[..., k] / p[..., l]) ** (1.0 / (k - l))
    rhs = (p[..., r] / p[..., s]) ** (1.0 / (r - s))
    res = rhs - lhs
    return float(res) if res.ndim == 0 else res


def quotient_trace_gaps(lam, k: int):
    """Gaps of the two quotient-gradient trace bounds.

    Returns (weighted_trace - F^2/c, trace_grad - c) with c the quotient's
    value on the all-ones vector; both are nonnegative on the k-th cone and
    trace_grad is additionally bounded above by n - k on the closed
    (k+1)-th cone.
    """
    vals = _values(lam)
    n = vals.shape[-1]
    if not 0 <= k <= n - 1:
        raise ValueError(f"quotient order k={k} out of range for n={n}")
    value, _, trace, weighted, sk = _quotient_arrays(vals, k)
    if not np.all(sk > 0.0):
        raise ConeViolation(f"sigma_{k} not positive on some sample")
    c = identity_quotient(n, k)
    g1 = weighted - value**2 / c
    g2 = trace - c
    if g1.ndim == 0:
        return float(g1), float(g2)
    return g1, g2


def pinch_deficit_parts(lam, m: int):
    """Both closed forms of the spread deficit, plus the pinching ratio.

    Returns (deficit, pair_sum, pinch) where

      deficit  = m(n-m) sigma_m^2 - (m+1)(n-m+1) sigma_{m+1} sigma_{m-1}
      pair_sum = sum over pairs i<j of (lam_i - lam_j)^2 *
                 [sigma_{m-1}(lam|ij)^2 - sigma_{m-2}(lam|ij) sigma_m(lam|ij)]
      pinch    = (lam_max - lam_min)^2 / lam_max^2

    The two deficit forms agree identically; entries must all be positive.
    """
    vals = _values(lam)
    n = vals.shape[-1]
    if not 1 <= m <= n - 1:
        raise ValueError(f"deficit order m={m} out of range for n={n}")
    if not np.all(vals > 0.0):
        raise ConeViolation("pinch_deficit_parts requires positive curvatures")
    table = sigma_table(vals, min(m + 1, n))
    sm = table[..., m]
    sm1 = _sigma_ext(table, m + 1)
    smm1 = _sigma_ext(table, m - 1)
    deficit = m * (n - m) * sm**2 - (m + 1) * (n - m + 1) * sm1 * smm1
    pair_sum = np.zeros(vals.shape[:-1])
    for i in range(n - 1):
        for j in range(i + 1, n):
            rest = np.delete(vals, (i, j), axis=-1)
            t_ij = sigma_table(rest, min(m, n - 2))
            a = _sigma_ext(t_ij, m - 1)
            b = _sigma_ext(t_ij, m - 2)
            c = _sigma_ext(t_ij, m)
            pair_sum = pair_sum + (vals[..., i] - vals[..., j]) ** 2 * (a**2 - b * c)
    hi = np.max(vals, axis=-1)
    lo = np.min(vals, axis=-1)
    pinch = (hi - lo) ** 2 / hi**2
    if deficit.ndim == 0:
        return float(deficit), float(pair_sum), float(pinch)
    return deficit, pair_sum, pinch


def sigma_hessian_offdiag(lam, m: int) -> np.ndarray:
    """Matrix A with A[i,j] = sigma_{m-2}(lam | i,j) for i != j, zero diagonal.

    These are the only nonzero second partials of sigma_m as a function of a
    symmetric matrix evaluated at a diagonal point: the (ii,jj) entry equals
    +A[i,j] and the (ij,ji) entry equals -A[i,j].  Kept for completeness
    checks; the flow itself never needs off-diagonal derivatives.
    """
    vals = _values(lam)
    if vals.ndim != 1:
        raise ValueError("sigma_hessian_offdiag takes a single curvature vector")
    n = vals.size
    if not 0 <= m <= n:
        raise ValueError(f"sigma index m={m} out of range for n={n}")
    out = np.zeros((n, n))
    if m < 2:
        return out
    for i in range(n - 1):
        for j in range(i + 1, n):
            v = sigma_excl(vals, m - 2, (i, j)) if m - 2 <= n - 2 else 0.0
            out[i, j] = out[j, i] = v
    return out
