"""Data-driven multiple-testing procedures on observed z-values.

Step-up rules (Benjamini-Hochberg 1995; its adaptive variant; and the
local-fdr step-up that rejects the k hypotheses with the smallest lfdr
values, k being the largest index at which the running mean of sorted lfdr
values stays below alpha), plus truth-known evaluation helpers.

Ties are broken by stable sort on (value, input index), so output is a
deterministic function of the input sequence; a tie block that straddles the
step-up boundary is split with lower input indices rejected first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core_model import GaussianComponent, gaussian_pdf
from .errors import (
    DegenerateMarginal,
    InvalidLfdr,
    InvalidPValue,
    LengthMismatch,
)

__all__ = [
    "DecisionRow",
    "DecisionTable",
    "ConfusionCounts",
    "bh_stepup",
    "adaptive_bh",
    "lfdr_stepup",
    "estimated_lfdr_values",
    "confusion",
    "fdp_fnp",
]


@dataclass
class DecisionRow:
    """Per-hypothesis decision record; nan marks an absent statistic."""

    index: int
    z: float
    pvalue: float
    lfdr_hat: float
    reject: bool


@dataclass
class DecisionTable:
    """Decisions for one procedure run, in input order."""

    rows: list = field(default_factory=list)
    alpha: float = 0.0
    procedure: str = ""

    @property
    def k(self) -> int:
        """Number of rejections R."""
        return sum(1 for r in self.rows if r.reject)

    @property
    def rejected(self) -> np.ndarray:
        return np.array([r.reject for r in self.rows], dtype=bool)

    def attach_z(self, z) -> "DecisionTable":
        """Fill the z column in place (procedures that only see p-values or
        lfdr values leave it as nan); returns self for chaining."""
        z = np.asarray(z, dtype=float)
        if len(z) != len(self.rows):
            raise LengthMismatch(f"{len(z)} z-values for {len(self.rows)} rows")
        for row, zi in zip(self.rows, z):
            row.z = float(zi)
        return self


@dataclass(frozen=True)
class ConfusionCounts:
    """Outcome counts of a procedure against known truth.

    n00/n01 count accepted nulls/nonnulls, n10/n11 rejected nulls/nonnulls.
    """

    n00: int
    n01: int
    n10: int
    n11: int

    @property
    def r(self) -> int:
        """Rejections."""
        return self.n10 + self.n11

    @property
    def s(self) -> int:
        """Acceptances."""
        return self.n00 + self.n01

    @property
    def m(self) -> int:
        return self.r + self.s


def _check_alpha(alpha: float):
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")


def _stepup_reject(values: np.ndarray, cutoffs: np.ndarray) -> np.ndarray:
    """Reject the k smallest values, k = max{i : v_(i) <= cutoff_i} on the
    stable (value, index) order; returns a boolean mask in input order."""
    m = len(values)
    order = np.lexsort((np.arange(m), values))
    ok = np.nonzero(values[order] <= cutoffs)[0]
    k = int(ok[-1]) + 1 if len(ok) else 0
    reject = np.zeros(m, dtype=bool)
    reject[order[:k]] = True
    return reject


def bh_stepup(pvalues, alpha: float) -> DecisionTable:
    """Benjamini-Hochberg step-up at level alpha.

    With sorted p-values p_(1) <= ... <= p_(m), rejects the hypotheses
    carrying the k smallest p-values where k = max{i : p_(i) <= i*alpha/m}.
    """
    _check_alpha(alpha)
    p = np.asarray(pvalues, dtype=float)
    if p.size == 0:
        raise InvalidPValue("empty p-value vector")
    if np.any(~np.isfinite(p)) or np.any(p <= 0.0) or np.any(p > 1.0):
        raise InvalidPValue("p-values must lie in (0, 1]")
    cutoffs = alpha * np.arange(1, p.size + 1) / p.size
    reject = _stepup_reject(p, cutoffs)
    rows = [
        DecisionRow(i, np.nan, float(p[i]), np.nan, bool(reject[i]))
        for i in range(p.size)
    ]
    return DecisionTable(rows=rows, alpha=alpha, procedure="bh")


def adaptive_bh(pvalues, alpha: float, p0_hat: float) -> DecisionTable:
    """BH at the adapted level min(alpha/p0_hat, 1 - 1e-12).

    With p0_hat = 1 this is exactly bh_stepup; smaller p0_hat enlarges the
    rejection set.
    """
    _check_alpha(alpha)
    if not (0.0 < p0_hat <= 1.0):
        raise ValueError(f"p0_hat must be in (0, 1], got {p0_hat}")
    effective = min(alpha / p0_hat, 1.0 - 1e-12)
    table = bh_stepup(pvalues, effective)
    table.alpha = alpha
    table.procedure = "adaptive_bh"
    return table


def lfdr_stepup(lfdr_values, alpha: float) -> DecisionTable:
    """Adaptive step-up on estimated local fdr values.

    Sorts the values ascending and rejects through the largest index k at
    which the running mean (1/k) * sum of the k smallest values is <= alpha;
    that running mean is the estimated false discovery rate of the rejected
    set.
    """
    _check_alpha(alpha)
    v = np.asarray(lfdr_values, dtype=float)
    if v.size == 0:
        raise InvalidLfdr("empty lfdr vector")
    if np.any(~np.isfinite(v)) or np.any(v < 0.0) or np.any(v > 1.0):
        raise InvalidLfdr("lfdr values must lie in [0, 1]")
    order = np.lexsort((np.arange(v.size), v))
    running_means = np.cumsum(v[order]) / np.arange(1, v.size + 1)
    ok = np.nonzero(running_means <= alpha)[0]
    k = int(ok[-1]) + 1 if len(ok) else 0
    reject = np.zeros(v.size, dtype=bool)
    reject[order[:k]] = True
    rows = [
        DecisionRow(i, np.nan, np.nan, float(v[i]), bool(reject[i]))
        for i in range(v.size)
    ]
    return DecisionTable(rows=rows, alpha=alpha, procedure="lfdr")


def estimated_lfdr_values(z, null_est, marginal) -> np.ndarray:
    """Estimated local fdr min(1, p0_hat * f0_hat(z) / f_hat(z)).

    ``null_est`` supplies (p0_hat, u0_hat, sigma0_hat); ``marginal`` is a
    MarginalDensityEstimate.  Raises DegenerateMarginal when the marginal
    estimate vanishes at an evaluation point, which signals a bandwidth or
    grid misconfiguration.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    f0 = gaussian_pdf(z, GaussianComponent(null_est.u0_hat, null_est.sigma0_hat))
    fhat = marginal.evaluate(z)
    if np.any(fhat < 1e-300):
        worst = float(z[np.argmin(fhat)])
        raise DegenerateMarginal(f"marginal estimate vanishes near z = {worst:.6g}")
    return np.minimum(1.0, null_est.p0_hat * np.atleast_1d(f0) / fhat)


def confusion(decisions: DecisionTable, truth) -> ConfusionCounts:
    """Cross-tabulate decisions against nonnull indicator flags."""
    truth = np.asarray(truth, dtype=bool)
    if truth.size != len(decisions.rows):
        raise LengthMismatch(
            f"{truth.size} truth flags for {len(decisions.rows)} decisions"
        )
    reject = decisions.rejected
    return ConfusionCounts(
        n00=int(np.sum(~truth & ~reject)),
        n01=int(np.sum(truth & ~reject)),
        n10=int(np.sum(~truth & reject)),
        n11=int(np.sum(truth & reject)),
    )


def fdp_fnp(c: ConfusionCounts) -> tuple:
    """Per-realization false discovery and false nondiscovery proportions.

    Conventions: fdp = 0 when nothing is rejected, fnp = 0 when everything
    is rejected (matching the conditional definitions of FDR and FNR).
    """
    fdp = c.n10 / c.r if c.r > 0 else 0.0
    fnp = c.n01 / c.s if c.s > 0 else 0.0
    return fdp, fnp
