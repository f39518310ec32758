"""Randomized verification battery for the symmetric-function layer.

Every check evaluates an algebraic identity or inequality of the sigma
calculus on large seeded sample batches and records the worst deviation.
Equalities are held to 1e-12 relative, quantities built from the curvature
quotient to 1e-10; inequalities get the same slack against their natural
scale.  The comparability constants of the pinch deficit are recorded, not
asserted, apart from strict positivity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .symfunc import _quotient_arrays, sigma_table

__all__ = [
    "CheckResult",
    "SuiteReport",
    "sample_spread",
    "sample_cone",
    "cone_boundary_shift",
    "run_identity_suite",
]

_EQ_TOL = 1e-12
_QUOT_TOL = 1e-10


def sample_spread(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """Generic curvature vectors with a decade of scale spread."""
    vals = rng.standard_normal((count, n))
    return vals * 10.0 ** rng.uniform(-1.0, 1.0, size=(count, 1))


def sample_cone(rng: np.random.Generator, count: int, n: int, k: int,
                lo: float = -0.35) -> np.ndarray:
    """Rejection-sample strict members of the k-th cone.

    Draws from a box biased toward positive entries; if acceptance is poor
    the negative edge shrinks, which only concentrates the distribution
    deeper inside the cone.
    """
    out = []
    have = 0
    edge = lo
    for _ in range(60):
        draw = rng.uniform(edge, 1.0, size=(max(count, 4 * (count - have)), n))
        table = sigma_table(draw, k)
        keep = draw[np.all(table[:, 1:] > 0.0, axis=1)]
        if keep.shape[0]:
            out.append(keep)
            have += keep.shape[0]
        if have >= count:
            break
        if keep.shape[0] < 0.05 * draw.shape[0]:
            edge *= 0.5
    else:
        raise RuntimeError(f"cone sampling stalled for n={n}, k={k}")
    vals = np.concatenate(out, axis=0)[:count]
    return vals * 10.0 ** rng.uniform(-1.0, 1.0, size=(count, 1))


def cone_boundary_shift(vals: np.ndarray, k: int) -> np.ndarray:
    """Move the last entry so sigma_{k+1} vanishes exactly.

    sigma_{k+1}(lam) is linear in any single entry, so the root is
    -sigma_{k+1}(lam|n)/sigma_k(lam|n); the result sits on the boundary of
    the (k+1)-cone (rows whose shifted vector leaves the k-th cone are the
    caller's to filter).
    """
    rest = vals[:, :-1]
    table = sigma_table(rest, min(k + 1, rest.shape[1]))
    sk = table[:, k] if k <= rest.shape[1] else np.zeros(vals.shape[0])
    sk1 = table[:, k + 1] if k + 1 <= rest.shape[1] else np.zeros(vals.shape[0])
    shifted = vals.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        shifted[:, -1] = np.where(sk != 0.0, -sk1 / sk, np.nan)
    return shifted


@dataclass
class CheckResult:
    name: str
    n: int
    detail: str
    samples: int
    worst: float
    tolerance: float
    passed: bool
    recorded: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = ""
        if self.recorded:
            pairs = ", ".join(f"{k}={v:.6g}" for k, v in self.recorded.items())
            extra = f" [{pairs}]"
        where = f"n={self.n}" + (f", {self.detail}" if self.detail else "")
        return (f"{self.name} ({where}): worst {self.worst:.3e} "
                f"vs tol {self.tolerance:.1e}{extra} {tag}")


@dataclass
class SuiteReport:
    n_max: int
    samples: int
    seed: int
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list:
        return [c.line() for c in self.checks]

    def to_json(self) -> str:
        payload = {
            "nMax": self.n_max,
            "samples": self.samples,
            "seed": self.seed,
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "n": c.n,
                    "detail": c.detail,
                    "samples": c.samples,
                    "worst": c.worst,
                    "tolerance": c.tolerance,
                    "passed": c.passed,
                    "recorded": c.recorded,
                }
                for c in self.checks
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _rel_worst(lhs: np.ndarray, rhs: np.ndarray, *scales) -> float:
    denom = np.maximum(np.abs(lhs), np.abs(rhs))
    for s in scales:
        denom = np.maximum(denom, np.abs(s))
    denom = np.maximum(denom, 1.0e-300)
    return float(np.max(np.abs(lhs - rhs) / denom))


def _excl_tables(vals: np.ndarray, mmax: int) -> np.ndarray:
    """sigma tables of every single-exclusion vector, stacked on axis 1."""
    count, n = vals.shape
    out = np.empty((count, n, mmax + 1))
    for i in range(n):
        out[:, i, :] = sigma_table(np.delete(vals, i, axis=1), mmax)
    return out


def _check_exclusion_recurrence(rng, samples, n) -> list:
    vals = sample_spread(rng, samples, n)
    table = sigma_table(vals, n)
    excl = _excl_tables(vals, n - 1)
    worst_rec = 0.0
    worst_wsum = 0.0
    worst_sum = 0.0
    for k in range(1, n + 1):
        ek = excl[:, :, k] if k <= n - 1 else np.zeros_like(excl[:, :, 0])
        ekm1 = excl[:, :, k - 1]
        terms = vals * ekm1
        # sigma_k = sigma_k(lam|i) + lam_i sigma_{k-1}(lam|i), every i
        lhs = np.broadcast_to(table[:, k:k + 1], ek.shape)
        worst_rec = max(worst_rec, _rel_worst(lhs, ek + terms, ek, np.abs(terms)))
        # sum_i lam_i sigma_{k-1}(lam|i) = k sigma_k
        worst_wsum = max(
            worst_wsum,
            _rel_worst(terms.sum(axis=1), k * table[:, k],
                       np.abs(terms).sum(axis=1)),
        )
        # sum_i sigma_k(lam|i) = (n-k) sigma_k
        worst_sum = max(
            worst_sum,
            _rel_worst(ek.sum(axis=1), (n - k) * table[:, k],
                       np.abs(ek).sum(axis=1)),
        )
    mk = lambda name, worst: CheckResult(
        name=name, n=n, detail="all k", samples=samples, worst=worst,
        tolerance=_EQ_TOL, passed=worst <= _EQ_TOL,
    )
    return [
        mk("exclusion-recurrence", worst_rec),
        mk("weighted-exclusion-sum", worst_wsum),
        mk("exclusion-sum", worst_sum),
    ]


def _check_homogeneity(rng, samples, n) -> CheckResult:
    vals = sample_spread(rng, samples, n)
    t = 10.0 ** rng.uniform(-1.0, 1.0, size=(samples, 1))
    ta = sigma_table(vals * t, n)
    tb = sigma_table(vals, n)
    # mixed signs cancel inside sigma_m, so measure against the term-sum
    # magnitude (sigma of |lam|), not the possibly tiny result
    cond = sigma_table(np.abs(vals * t), n)
    worst = 0.0
    for m in range(n + 1):
        err = np.abs(ta[:, m] - t[:, 0] ** m * tb[:, m]) / cond[:, m]
        worst = max(worst, float(np.max(err)))
    return CheckResult(
        name="scaling-degree", n=n, detail="all m", samples=samples,
        worst=worst, tolerance=_EQ_TOL, passed=worst <= _EQ_TOL,
    )


def _check_sorted_chain(rng, samples, n, k) -> list:
    vals = sample_cone(rng, samples, n, k)
    vals = -np.sort(-vals, axis=1)
    excl = _excl_tables(vals, max(k - 1, 0))
    ekm1 = excl[:, :, k - 1]
    # excluding a smaller entry keeps more mass: chain increases with index
    diffs = np.diff(ekm1, axis=1)
    scale = np.maximum(np.abs(ekm1[:, 1:]), 1.0)
    worst_chain = float(np.min(diffs / scale))
    chain_ok = worst_chain > -_EQ_TOL and bool(np.all(ekm1[:, 0] > 0.0))
    table = sigma_table(vals, min(k + 1, n))
    lam_k = vals[:, k - 1]
    prod = np.prod(vals[:, :k], axis=1)
    upper = math.comb(n, k) * prod - table[:, k]
    scale_u = np.maximum(math.comb(n, k) * np.abs(prod), 1.0)
    results = [
        CheckResult(
            name="ordered-exclusion-chain", n=n, detail=f"k={k}",
            samples=samples, worst=worst_chain, tolerance=_EQ_TOL,
            passed=chain_ok,
        ),
        CheckResult(
            name="leading-entry-positive", n=n, detail=f"k={k}",
            samples=samples, worst=float(np.min(lam_k)), tolerance=0.0,
            passed=bool(np.all(lam_k > 0.0)),
        ),
        CheckResult(
            name="top-product-upper", n=n, detail=f"k={k}", samples=samples,
            worst=float(np.min(upper / scale_u)), tolerance=_EQ_TOL,
            passed=bool(np.all(upper / scale_u > -_EQ_TOL)),
        ),
    ]
    if k < n:
        inner = vals[np.all(table[:, 1:k + 2] > 0.0, axis=1)]
        if inner.shape[0]:
            ti = sigma_table(inner, k)
            prod_i = np.prod(inner[:, :k], axis=1)
            lower = ti[:, k] - prod_i
            scale_l = np.maximum(np.abs(prod_i), 1.0)
            results.append(CheckResult(
                name="top-product-lower", n=n, detail=f"k={k}",
                samples=int(inner.shape[0]),
                worst=float(np.min(lower / scale_l)), tolerance=_EQ_TOL,
                passed=bool(np.all(lower / scale_l > -_EQ_TOL)),
            ))
    return results


def _check_mean_ratio_gaps(rng, samples, n, k) -> CheckResult:
    vals = sample_cone(rng, samples, n, k)
    table = sigma_table(vals, k)
    norm = table / np.array([math.comb(n, m) for m in range(k + 1)])
    log_norm = np.log(norm[:, 1:])  # all positive in the k-th cone
    log_norm = np.concatenate([np.zeros((vals.shape[0], 1)), log_norm], axis=1)

    def ratio(a, b):
        # normalized mean ((sigma_a/C)/(sigma_b/C))^(1/(a-b)) via logs
        return np.exp((log_norm[:, a] - log_norm[:, b]) / (a - b))

    worst = np.inf
    count = 0
    for l in range(0, k):
        for r in range(1, k + 1):
            for s in range(0, min(l, r - 1) + 1):
                if (k, l) == (r, s):
                    continue
                gap = ratio(r, s) - ratio(k, l)
                rel = gap / np.maximum(ratio(r, s), 1e-300)
                worst = min(worst, float(np.min(rel)))
                count += 1
    return CheckResult(
        name="normalized-mean-ordering", n=n, detail=f"k={k} ({count} index sets)",
        samples=samples, worst=worst, tolerance=_QUOT_TOL,
        passed=worst > -_QUOT_TOL,
    )


def _check_quotient_gaps(rng, samples, n, k) -> list:
    c = (n - k) / (k + 1)
    vals = sample_cone(rng, samples, n, k)
    value, _, trace, weighted, _ = _quotient_arrays(vals, k)
    gap1 = weighted - value**2 / c
    gap2 = trace - c
    rel1 = gap1 / np.maximum(np.abs(weighted), 1.0)
    out = [
        CheckResult(
            name="weighted-trace-lower", n=n, detail=f"k={k}", samples=samples,
            worst=float(np.min(rel1)), tolerance=_QUOT_TOL,
            passed=bool(np.all(rel1 > -_QUOT_TOL)),
        ),
        CheckResult(
            name="trace-lower", n=n, detail=f"k={k}", samples=samples,
            worst=float(np.min(gap2)), tolerance=_QUOT_TOL,
            passed=bool(np.all(gap2 > -_QUOT_TOL)),
        ),
    ]
    if k + 1 <= n:
        closure = cone_boundary_shift(sample_cone(rng, samples, n, k + 1), k)
        tb = sigma_table(closure, k)
        good = np.all(np.isfinite(closure), axis=1) & np.all(tb[:, 1:] > 0.0, axis=1)
        pool = [closure[good]]
        inner = sample_cone(rng, samples, n, k + 1)
        ti = sigma_table(inner, k + 1)
        pool.append(inner[np.all(ti[:, 1:] > 0.0, axis=1)])
        closed = np.concatenate(pool, axis=0)
        _, _, trace_c, _, _ = _quotient_arrays(closed, k)
        upper = (n - k) - trace_c
        out.append(CheckResult(
            name="trace-upper-closure", n=n, detail=f"k={k}",
            samples=int(closed.shape[0]), worst=float(np.min(upper)),
            tolerance=_QUOT_TOL, passed=bool(np.all(upper > -_QUOT_TOL)),
        ))
    return out


def _check_pinch_deficit(rng, samples, n, m) -> list:
    vals = sample_cone(rng, samples, n, n)
    vals = -np.sort(-vals, axis=1)
    table = sigma_table(vals, min(m + 1, n))
    s_m = table[:, m]
    s_mm = table[:, m - 1]
    s_mp = table[:, m + 1] if m + 1 <= n else np.zeros(vals.shape[0])
    deficit = m * (n - m) * s_m**2 - (m + 1) * (n - m + 1) * s_mp * s_mm

    pair_sum = np.zeros(vals.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            rest = np.delete(vals, (i, j), axis=1)
            rt = sigma_table(rest, min(m, n - 2))
            a = rt[:, m - 1] if m - 1 <= n - 2 else np.zeros(vals.shape[0])
            b = rt[:, m - 2] if 0 <= m - 2 <= n - 2 else np.zeros(vals.shape[0])
            d = rt[:, m] if m <= n - 2 else np.zeros(vals.shape[0])
            pair_sum += (vals[:, i] - vals[:, j]) ** 2 * (a**2 - b * d)

    base = m * (n - m) * s_m**2
    scale = np.maximum.reduce([np.abs(deficit), np.abs(pair_sum), base, np.ones_like(base)])
    worst_eq = float(np.max(np.abs(deficit - pair_sum) / scale))
    worst_pos = float(np.min(deficit / scale))

    pinch = (vals[:, 0] - vals[:, -1]) ** 2 / vals[:, 0] ** 2
    mask = (vals[:, 0] / vals[:, -1] <= 1.0e3) & (pinch > 1.0e-4)
    recorded = {}
    ratio_min = float("nan")
    if np.any(mask):
        ratio = deficit[mask] / (base[mask] * pinch[mask])
        ratio_min = float(np.min(ratio))
        recorded = {"ratioMin": ratio_min, "ratioMax": float(np.max(ratio)),
                    "kept": int(mask.sum())}
    return [
        CheckResult(
            name="deficit-pair-equality", n=n, detail=f"m={m}", samples=samples,
            worst=worst_eq, tolerance=_EQ_TOL, passed=worst_eq <= _EQ_TOL,
        ),
        CheckResult(
            name="deficit-nonnegative", n=n, detail=f"m={m}", samples=samples,
            worst=worst_pos, tolerance=_EQ_TOL, passed=worst_pos > -_EQ_TOL,
        ),
        CheckResult(
            name="deficit-pinch-comparability", n=n, detail=f"m={m}",
            samples=int(mask.sum()), worst=ratio_min, tolerance=0.0,
            passed=math.isnan(ratio_min) or ratio_min > 0.0,
            recorded=recorded,
        ),
    ]


def run_identity_suite(n_max: int = 8, samples: int = 10000,
                       seed: int = 7) -> SuiteReport:
    """Run every randomized check for 2 <= n <= n_max."""
    if n_max < 2:
        raise ValueError("need n_max >= 2")
    rng = np.random.default_rng(seed)
    checks: list = []
    for n in range(2, n_max + 1):
        checks.extend(_check_exclusion_recurrence(rng, samples, n))
        checks.append(_check_homogeneity(rng, samples, n))
        for k in range(1, n + 1):
            checks.extend(_check_sorted_chain(rng, samples, n, k))
            checks.append(_check_mean_ratio_gaps(rng, samples, n, k))
        for k in range(0, n):
            checks.extend(_check_quotient_gaps(rng, samples, n, k))
        for m in range(1, n):
            checks.extend(_check_pinch_deficit(rng, samples, n, m))
    return SuiteReport(n_max=n_max, samples=samples, seed=seed, checks=checks)
