"""Optimal mFDR-constrained thresholds and exact mFNR under a known model.

Two families of rejection rules are compared:

* p-value rules reject symmetric tails ``{z : |z - mean|/sd >= q}``; the
  optimal rule takes the largest two-sided cutoff t whose region keeps
  mFDR <= alpha.
* local-fdr rules reject sublevel sets ``{z : lfdr(z) <= lambda}``; the
  optimal rule takes the largest feasible lambda.

mFDR of a region R is (null mass in R)/(total mass in R); mFNR is the
nonnull fraction of the complement.  Because every density involved is a
finite Gaussian mixture, interval masses are computed in closed form from
Gaussian distribution functions (error far below the 1e-8 relative
tolerance the threshold searches assume).  The tests cross-check these
masses against adaptive quadrature and Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtri

from .core_model import GaussianComponent, TwoGroupModel, gaussian_cdf, lfdr
from .errors import EmptyRegion, FullRegion, Infeasible

__all__ = [
    "RejectionRegion",
    "OracleRule",
    "SweepRow",
    "region_from_pvalue_threshold",
    "region_from_lfdr_threshold",
    "mfdr_of_region",
    "mfnr_of_region",
    "oracle_pvalue_rule",
    "oracle_lfdr_rule",
    "oracle_sweep",
]

# Interval masses below this are treated as zero rejected mass.
_MASS_FLOOR = 1e-300
# Threshold searches refine to this absolute tolerance.
_SEARCH_TOL = 1e-9


@dataclass(frozen=True)
class RejectionRegion:
    """A finite union of closed z-intervals, sorted and pairwise disjoint.

    Interval ends may be ``-inf``/``+inf``.  An empty tuple rejects nothing.
    """

    intervals: tuple  # of (lo, hi)

    def __post_init__(self):
        iv = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        object.__setattr__(self, "intervals", iv)
        prev_hi = -math.inf
        for i, (lo, hi) in enumerate(iv):
            if not lo < hi:
                raise ValueError(f"interval {i} must have lo < hi, got ({lo}, {hi})")
            if i > 0 and lo <= prev_hi:
                raise ValueError("intervals must be sorted and pairwise disjoint")
            prev_hi = hi

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def contains(self, z: float) -> bool:
        return any(lo <= z <= hi for lo, hi in self.intervals)

    def complement(self) -> "RejectionRegion":
        """Closure of the complement within the whole line."""
        out = []
        prev = -math.inf
        for lo, hi in self.intervals:
            if lo > prev:
                out.append((prev, lo))
            prev = hi
        if prev < math.inf:
            out.append((prev, math.inf))
        return RejectionRegion(tuple(out))


@dataclass(frozen=True)
class OracleRule:
    """An optimal thresholding rule with its region and exact error rates."""

    kind: str  # "pvalue" or "lfdr"
    threshold: float
    region: RejectionRegion
    mfdr: float
    mfnr: float


@dataclass(frozen=True)
class SweepRow:
    """One grid point of an oracle comparison sweep."""

    sweep: float
    mfnr_pvalue: float
    mfnr_lfdr: float
    error: str | None = None


def _component_mass(c: GaussianComponent, region: RejectionRegion) -> float:
    s = 0.0
    for lo, hi in region.intervals:
        s += gaussian_cdf(hi, c) - gaussian_cdf(lo, c)
    return s


def _null_mass(m: TwoGroupModel, region: RejectionRegion) -> float:
    return m.p0 * _component_mass(m.null, region)


def _total_mass(m: TwoGroupModel, region: RejectionRegion) -> float:
    return sum(w * _component_mass(c, region) for w, c in m.components if w > 0.0)


def mfdr_of_region(m: TwoGroupModel, r: RejectionRegion) -> float:
    """Marginal FDR of region ``r``: E(N10)/E(R) = null mass / total mass."""
    if r.is_empty:
        raise EmptyRegion("mFDR is undefined for an empty rejection region")
    total = _total_mass(m, r)
    if total < _MASS_FLOOR:
        raise EmptyRegion("rejection region carries no probability mass")
    return _null_mass(m, r) / total


def mfnr_of_region(m: TwoGroupModel, r: RejectionRegion) -> float:
    """Marginal FNR of region ``r``: nonnull fraction of the acceptance set."""
    comp = r.complement()
    if comp.is_empty:
        raise FullRegion("mFNR is undefined when everything is rejected")
    total = _total_mass(m, comp)
    if total < _MASS_FLOOR:
        raise FullRegion("acceptance set carries no probability mass")
    nonnull = total - _null_mass(m, comp)
    return max(0.0, nonnull) / total


def region_from_pvalue_threshold(null: GaussianComponent, t: float) -> RejectionRegion:
    """Two symmetric tails {z : |z - mean|/sd >= Phi^-1(1 - t/2)}."""
    if not (0.0 < t < 1.0):
        raise ValueError(f"p-value threshold must be in (0, 1), got {t}")
    q = -float(ndtri(t / 2.0))  # Phi^-1(1 - t/2)
    return RejectionRegion(
        (
            (-math.inf, null.mean - q * null.sd),
            (null.mean + q * null.sd, math.inf),
        )
    )


def _scan_domain(m: TwoGroupModel) -> tuple:
    means = [c.mean for _, c in m.components]
    sds = [c.sd for _, c in m.components]
    pad = 12.0 * max(sds)
    return min(means) - pad, max(means) + pad, min(sds)


def region_from_lfdr_threshold(m: TwoGroupModel, lam: float) -> RejectionRegion:
    """Sublevel set {z : lfdr(m, z) <= lam} as a union of closed intervals.

    Boundaries are located by a sign-change scan on a grid covering all
    component means plus 12 sd, then refined by bisection to |dz| <= 1e-9.
    Grid ends whose lfdr is already below the threshold extend to infinity.
    """
    if not (0.0 < lam < 1.0):
        raise ValueError(f"lfdr threshold must be in (0, 1), got {lam}")
    lo, hi, min_sd = _scan_domain(m)
    step = min(0.01, min_sd / 10.0)
    n = int(math.ceil((hi - lo) / step)) + 1
    zs = np.linspace(lo, hi, n)
    inside = lfdr(m, zs) <= lam
    if not inside.any():
        return RejectionRegion(())

    flips = np.diff(inside.astype(np.int8))
    run_starts = np.nonzero(flips == 1)[0] + 1  # first index inside each run
    run_ends = np.nonzero(flips == -1)[0] + 1  # first index past each run
    starts = ([0] if inside[0] else []) + run_starts.tolist()
    ends = run_ends.tolist() + ([n] if inside[-1] else [])

    # refine every finite boundary at once; each bracket [a, b] has the
    # membership flipping from out to in (entry) or in to out (exit)
    brackets = []  # (a, b, a_is_inside)
    for i0 in starts:
        if i0 > 0:
            brackets.append((zs[i0 - 1], zs[i0], False))
    for i1 in ends:
        if i1 < n:
            brackets.append((zs[i1 - 1], zs[i1], True))
    if brackets:
        lo_end = np.array([br[0] for br in brackets])
        hi_end = np.array([br[1] for br in brackets])
        lo_is_inside = np.array([br[2] for br in brackets])
        while float((hi_end - lo_end).max()) > _SEARCH_TOL:
            mid = 0.5 * (lo_end + hi_end)
            same_side = (lfdr(m, mid) <= lam) == lo_is_inside
            lo_end = np.where(same_side, mid, lo_end)
            hi_end = np.where(same_side, hi_end, mid)
        edges = 0.5 * (lo_end + hi_end)
    n_entry = sum(1 for i0 in starts if i0 > 0)
    entry_iter = iter(edges[:n_entry] if brackets else [])
    exit_iter = iter(edges[n_entry:] if brackets else [])
    intervals = []
    for i0, i1 in zip(starts, ends):
        left = -math.inf if i0 == 0 else float(next(entry_iter))
        right = math.inf if i1 == n else float(next(exit_iter))
        intervals.append((left, right))
    return RejectionRegion(tuple(intervals))


def _pvalue_grid_mfdr(m: TwoGroupModel, ts: np.ndarray) -> np.ndarray:
    """Vectorized mFDR of the symmetric-tail regions for thresholds ``ts``."""
    qs = -ndtri(ts / 2.0)
    lo = m.null.mean - qs * m.null.sd
    hi = m.null.mean + qs * m.null.sd
    num = None
    den = np.zeros_like(ts)
    for w, c in m.components:
        if w == 0.0:
            continue
        mass = w * (gaussian_cdf(lo, c) + 1.0 - gaussian_cdf(hi, c))
        den += mass
        if num is None:  # components() lists the null first
            num = mass
    return num / den


def oracle_pvalue_rule(m: TwoGroupModel, alpha: float) -> OracleRule:
    """Largest two-sided p-value cutoff t with mFDR(region(t)) <= alpha.

    mFDR need not be monotone in t for multimodal alternatives, so the
    search scans a 10^4-point log-spaced grid for the largest feasible t and
    then bisects between that grid point and the next.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    t_lo, t_hi = 1e-10, 1.0 - 1e-12
    ts = np.exp(np.linspace(math.log(t_lo), math.log(t_hi), 10_000))
    feasible = _pvalue_grid_mfdr(m, ts) <= alpha
    if not feasible.any():
        raise Infeasible(
            f"no p-value threshold attains mFDR <= {alpha}; "
            f"tail mFDR is {_pvalue_grid_mfdr(m, ts[:1])[0]:.6g} at t = {ts[0]:.3g}"
        )
    i = int(np.nonzero(feasible)[0][-1])
    if i == len(ts) - 1:
        t_star = ts[-1]
    else:
        a, b = ts[i], ts[i + 1]
        while b - a > _SEARCH_TOL:
            c = 0.5 * (a + b)
            if mfdr_of_region(m, region_from_pvalue_threshold(m.null, c)) <= alpha:
                a = c
            else:
                b = c
        t_star = a
    region = region_from_pvalue_threshold(m.null, t_star)
    return OracleRule(
        kind="pvalue",
        threshold=float(t_star),
        region=region,
        mfdr=mfdr_of_region(m, region),
        mfnr=mfnr_of_region(m, region),
    )


def oracle_lfdr_rule(m: TwoGroupModel, alpha: float) -> OracleRule:
    """Largest lfdr cutoff lambda with mFDR(region(lambda)) <= alpha.

    mFDR is nondecreasing in lambda (it averages lfdr over a growing
    sublevel set), so plain bisection applies; empty regions count as
    trivially feasible so the bracket stays monotone.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")

    def feasible(lam: float) -> bool:
        region = region_from_lfdr_threshold(m, lam)
        if region.is_empty:
            return True
        try:
            return mfdr_of_region(m, region) <= alpha
        except EmptyRegion:
            return True

    lam_hi = 1.0 - 1e-12
    if feasible(lam_hi):
        lam_star = lam_hi
    else:
        a, b = 0.0, lam_hi
        while b - a > _SEARCH_TOL:
            c = 0.5 * (a + b)
            if feasible(c):
                a = c
            else:
                b = c
        lam_star = a
    region = region_from_lfdr_threshold(m, lam_star)
    if region.is_empty:
        raise Infeasible(
            f"even the smallest nonempty lfdr region exceeds mFDR {alpha} "
            f"(minimum lfdr exceeds every feasible cutoff)"
        )
    try:
        rate = mfdr_of_region(m, region)
    except EmptyRegion:
        raise Infeasible(f"no lfdr region with positive mass attains mFDR <= {alpha}")
    if rate > alpha + 1e-6:
        raise Infeasible(f"no lfdr cutoff attains mFDR <= {alpha}; best is {rate:.6g}")
    return OracleRule(
        kind="lfdr",
        threshold=float(lam_star),
        region=region,
        mfdr=rate,
        mfnr=mfnr_of_region(m, region),
    )


def oracle_sweep(
    model_for: Callable[[float], TwoGroupModel],
    sweep: Sequence[float],
    alpha,
) -> list:
    """Compare both oracle rules across a parameter grid.

    ``alpha`` is either a fixed level or a callable mapping the sweep value
    to a level (used when the sweep is over alpha itself).  Infeasible grid
    points are flagged in the row, not dropped.
    """
    if len(sweep) == 0:
        raise ValueError("sweep grid must be nonempty")
    alpha_for = alpha if callable(alpha) else (lambda _: alpha)
    rows = []
    for value in sweep:
        model = model_for(value)
        level = alpha_for(value)
        try:
            p_rule = oracle_pvalue_rule(model, level)
            l_rule = oracle_lfdr_rule(model, level)
        except Infeasible as exc:
            rows.append(SweepRow(float(value), math.nan, math.nan, error=str(exc)))
            continue
        rows.append(SweepRow(float(value), p_rule.mfnr, l_rule.mfnr))
    return rows
