"""Seeded Monte Carlo generation from two-group models and replicated
procedure evaluation, including the oracle-comparison figure data.

Reproducibility contract: every normal variate is produced by inverse-CDF
transform of uniforms from a PCG64 stream, and per-replication seeds derive
from (master seed, replication index) via the SplitMix64 mixing function, so
results are bit-identical for a given config regardless of how many worker
threads run the replications.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .core_model import TwoGroupModel, lfdr, mixture_model, two_sided_pvalue
from .estimation import estimate_marginal_kde, estimate_null_ecf, estimate_p0_tail
from .oracle import oracle_lfdr_rule, oracle_pvalue_rule, oracle_sweep
from .procedures import (
    adaptive_bh,
    bh_stepup,
    confusion,
    estimated_lfdr_values,
    fdp_fnp,
    lfdr_stepup,
)

__all__ = [
    "PROCEDURES",
    "SimConfig",
    "ProcedureStats",
    "SimResult",
    "rep_seed",
    "sample_model",
    "sample_correlated",
    "run_replicated",
    "figure1_data",
    "figure1_csv",
    "figure2_data",
    "concentrated_alternative_demo",
    "simresult_csv",
    "eq1_default_model",
    "FIGURE1_CSV_HEADER",
    "REPLICATION_CSV_HEADER",
]

PROCEDURES = ("bh", "adaptive_bh", "lfdr_oracle_plugin", "lfdr_estimated")

FIGURE1_CSV_HEADER = "panel,sweep,mfnr_pvalue,mfnr_lfdr"
REPLICATION_CSV_HEADER = "procedure,mfdr,mfdr_se,mfnr,mfnr_se,mean_rejections"

_DEMO_SEED = 20080101


def eq1_default_model() -> TwoGroupModel:
    """The default simulation mixture: p0 = 0.8, nonnulls 0.1 at -3 and 0.1
    at +3, all unit width."""
    return mixture_model(0.8, [(0.1, -3.0, 1.0), (0.1, 3.0, 1.0)])


@dataclass
class SimConfig:
    """Settings for one replicated simulation study."""

    model: TwoGroupModel
    m: int
    reps: int
    alpha: float
    seed: int
    rho: float = 0.0
    procedures: tuple = PROCEDURES

    def __post_init__(self):
        self.procedures = tuple(self.procedures)
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not (0.0 <= self.rho < 1.0):
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")
        unknown = set(self.procedures) - set(PROCEDURES)
        if unknown:
            raise ValueError(f"unknown procedures: {sorted(unknown)}")


@dataclass(frozen=True)
class ProcedureStats:
    """Monte Carlo summary for one procedure."""

    mfdr: float
    mfdr_se: float
    mfnr: float
    mfnr_se: float
    mean_rejections: float


@dataclass
class SimResult:
    """Per-procedure empirical error rates over all replications."""

    per_procedure: dict = field(default_factory=dict)
    reps: int = 0


def _splitmix64(x: int) -> int:
    x &= 0xFFFFFFFFFFFFFFFF
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & 0xFFFFFFFFFFFFFFFF
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & 0xFFFFFFFFFFFFFFFF
    return (x ^ (x >> 31)) & 0xFFFFFFFFFFFFFFFF


def rep_seed(master_seed: int, rep_index: int) -> int:
    """Derive the seed of one replication: SplitMix64 applied to the master
    seed advanced rep_index + 1 times by the SplitMix64 increment."""
    state = (master_seed + (rep_index + 1) * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    return _splitmix64(state)


def _component_arrays(model: TwoGroupModel):
    weights = np.array([w for w, _ in model.components])
    means = np.array([c.mean for _, c in model.components])
    sds = np.array([c.sd for _, c in model.components])
    return np.cumsum(weights), means, sds


def sample_model(model: TwoGroupModel, m: int, seed: int):
    """Draw m independent z-values; returns (z, nonnull flags).

    Each hypothesis picks a component with the mixture probabilities, then
    draws z from it by inverse-CDF transform; a fixed draw order makes the
    output a deterministic function of the seed.
    """
    cum, means, sds = _component_arrays(model)
    rng = np.random.default_rng(seed)
    comp = np.searchsorted(cum, rng.random(m), side="right")
    comp = np.minimum(comp, len(means) - 1)  # guard u == 1.0 edge
    z = means[comp] + sds[comp] * ndtri(rng.random(m))
    return z, comp > 0


def sample_correlated(model: TwoGroupModel, m: int, rho: float, seed: int):
    """Equicorrelated draw: z_i = mean_i + sd_i*(sqrt(1-rho)*e_i + sqrt(rho)*W)
    with one shared factor W per replication.

    At rho = 0 the output equals sample_model's for the same seed (the same
    uniforms feed the component and e draws, and the W term vanishes).
    """
    if not (0.0 <= rho < 1.0):
        raise ValueError(f"rho must be in [0, 1), got {rho}")
    cum, means, sds = _component_arrays(model)
    rng = np.random.default_rng(seed)
    comp = np.searchsorted(cum, rng.random(m), side="right")
    comp = np.minimum(comp, len(means) - 1)
    e = ndtri(rng.random(m))
    shared = ndtri(rng.random(1))[0]
    noise = math.sqrt(1.0 - rho) * e + math.sqrt(rho) * shared
    z = means[comp] + sds[comp] * noise
    return z, comp > 0


def _run_one(config: SimConfig, rep: int) -> dict:
    z, nonnull = sample_correlated(config.model, config.m, config.rho, rep_seed(config.seed, rep))
    pvalues = two_sided_pvalue(z, config.model.null)
    out = {}
    for proc in config.procedures:
        if proc == "bh":
            table = bh_stepup(pvalues, config.alpha)
        elif proc == "adaptive_bh":
            table = adaptive_bh(pvalues, config.alpha, estimate_p0_tail(pvalues))
        elif proc == "lfdr_oracle_plugin":
            table = lfdr_stepup(lfdr(config.model, z), config.alpha)
        else:  # lfdr_estimated
            null_est = estimate_null_ecf(z)
            marginal = estimate_marginal_kde(z)
            values = estimated_lfdr_values(z, null_est, marginal)
            table = lfdr_stepup(values, config.alpha)
        fdp, fnp = fdp_fnp(confusion(table, nonnull))
        out[proc] = (fdp, fnp, table.k)
    return out


def _thread_count() -> int:
    raw = os.environ.get("LFDR_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_replicated(config: SimConfig) -> SimResult:
    """Evaluate the configured procedures over seeded replications.

    A failed replication aborts the whole run with its cause.  Replications
    are independent work units; with LFDR_LAB_THREADS > 1 they run on a
    thread pool, and aggregation by replication index keeps the result
    identical to sequential execution.
    """
    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _run_one(config, r), range(config.reps)))
    else:
        results = [_run_one(config, rep) for rep in range(config.reps)]

    def std_err(x: np.ndarray) -> float:
        if config.reps < 2:
            return 0.0
        return float(np.std(x, ddof=1) / math.sqrt(config.reps))

    per_procedure = {}
    for proc in config.procedures:
        fdps = np.array([res[proc][0] for res in results])
        fnps = np.array([res[proc][1] for res in results])
        ks = np.array([res[proc][2] for res in results], dtype=float)
        per_procedure[proc] = ProcedureStats(
            mfdr=float(fdps.mean()),
            mfdr_se=std_err(fdps),
            mfnr=float(fnps.mean()),
            mfnr_se=std_err(fnps),
            mean_rejections=float(ks.mean()),
        )
    return SimResult(per_procedure=per_procedure, reps=config.reps)


def simresult_csv(result: SimResult) -> str:
    """Render a SimResult as CSV with the documented header."""
    buf = io.StringIO()
    buf.write(REPLICATION_CSV_HEADER + "\n")
    for proc, stats in result.per_procedure.items():
        buf.write(
            f"{proc},{stats.mfdr!r},{stats.mfdr_se!r},{stats.mfnr!r},"
            f"{stats.mfnr_se!r},{stats.mean_rejections!r}\n"
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Oracle comparison figures
# ---------------------------------------------------------------------------

def _p1_grid():
    return [round(0.01 * k, 2) for k in range(1, 20)]


def figure1_data(panel: str) -> list:
    """Oracle mFNR comparison rows for one panel of the four-panel figure.

    Panels: (a) mu = (-3, 3), p1 sweeping 0.01..0.19 with p1 + p2 = 0.2 at
    mFDR 0.10; (b) same with mu2 = 6; (c) p1 = 0.18, p2 = 0.02, mu1 = -3,
    mu2 sweeping 1..6; (d) mu = (-3, 1), p1 = 0.02, p2 = 0.18, alpha
    sweeping 0.02..0.30.  Note panel (d) intentionally places its heavy
    nonnull component at mu2 = 1, inside the null bulk.
    """
    panel = panel.lower()
    if panel == "a":
        sweep = _p1_grid()
        model_for = lambda p1: mixture_model(0.8, [(p1, -3.0, 1.0), (0.2 - p1, 3.0, 1.0)])
        alpha = 0.10
    elif panel == "b":
        sweep = _p1_grid()
        model_for = lambda p1: mixture_model(0.8, [(p1, -3.0, 1.0), (0.2 - p1, 6.0, 1.0)])
        alpha = 0.10
    elif panel == "c":
        sweep = [1.0 + 0.25 * k for k in range(21)]
        model_for = lambda mu2: mixture_model(0.8, [(0.18, -3.0, 1.0), (0.02, mu2, 1.0)])
        alpha = 0.10
    elif panel == "d":
        sweep = [round(0.02 * k, 2) for k in range(1, 16)]
        model_for = lambda _: mixture_model(0.8, [(0.02, -3.0, 1.0), (0.18, 1.0, 1.0)])
        alpha = lambda a: a
    else:
        raise ValueError(f"panel must be one of a, b, c, d; got {panel!r}")
    return oracle_sweep(model_for, sweep, alpha)


def figure1_csv(panel: str) -> str:
    rows = figure1_data(panel)
    buf = io.StringIO()
    buf.write(FIGURE1_CSV_HEADER + "\n")
    for row in rows:
        buf.write(f"{panel.lower()},{row.sweep!r},{row.mfnr_pvalue!r},{row.mfnr_lfdr!r}\n")
    return buf.getvalue()


@dataclass(frozen=True)
class ProbePoint:
    """Decisions and statistics of both oracle rules at one z-value."""

    z: float
    pvalue: float
    lfdr: float
    rejected_by_lfdr: bool
    rejected_by_pvalue: bool


@dataclass
class Figure2Data:
    """mFNR sweep and the rejection-region comparison at p1 = 0.15 for the
    asymmetric mixture with nonnull means -3 and 4."""

    curve: list  # SweepRow per p1
    pvalue_rule: object
    lfdr_rule: object
    probes: list  # ProbePoint at z = -2 and z = 3


def _figure2_model(p1: float) -> TwoGroupModel:
    return mixture_model(0.8, [(p1, -3.0, 1.0), (0.2 - p1, 4.0, 1.0)])


def figure2_data(alpha: float = 0.10) -> Figure2Data:
    """Sweep p1 for the mu = (-3, 4) mixture and report both rules' regions
    and the probe decisions at z = -2 and z = 3 for p1 = 0.15."""
    curve = oracle_sweep(_figure2_model, _p1_grid(), alpha)
    model = _figure2_model(0.15)
    p_rule = oracle_pvalue_rule(model, alpha)
    l_rule = oracle_lfdr_rule(model, alpha)
    probes = []
    for z in (-2.0, 3.0):
        probes.append(
            ProbePoint(
                z=z,
                pvalue=two_sided_pvalue(z, model.null),
                lfdr=lfdr(model, z),
                rejected_by_lfdr=l_rule.region.contains(z),
                rejected_by_pvalue=p_rule.region.contains(z),
            )
        )
    return Figure2Data(curve=curve, pvalue_rule=p_rule, lfdr_rule=l_rule, probes=probes)


@dataclass
class ConcentratedDemo:
    """Nonnull capture among top-ranked hypotheses when the alternative is
    tightly concentrated just outside the null bulk."""

    m: int
    top: int
    capture_by_pvalue: float
    capture_by_lfdr: float
    lfdr_at_mode: float
    lfdr_at_far_tail: float


def concentrated_alternative_demo(p0: float = 0.9, seed: int = _DEMO_SEED) -> ConcentratedDemo:
    """Rank hypotheses by p-value and by exact lfdr under a concentrated
    alternative N(1.5, 0.1^2) and compare the nonnull fraction among the 100
    top-ranked hypotheses of each ordering.

    With the alternative concentrated near 1.5, the most extreme z-values
    (smallest p-values) are mostly nulls, while the smallest lfdr values sit
    where the alternative density dominates.
    """
    m = 10_000
    top = 100
    if p0 >= 1.0:
        model = mixture_model(1.0, [])
    else:
        model = mixture_model(p0, [(1.0 - p0, 1.5, 0.1)])
    z, nonnull = sample_model(model, m, seed)
    pvalues = two_sided_pvalue(z, model.null)
    lfdr_values = lfdr(model, z)
    by_p = np.lexsort((np.arange(m), pvalues))[:top]
    by_l = np.lexsort((np.arange(m), lfdr_values))[:top]
    return ConcentratedDemo(
        m=m,
        top=top,
        capture_by_pvalue=float(nonnull[by_p].mean()),
        capture_by_lfdr=float(nonnull[by_l].mean()),
        lfdr_at_mode=lfdr(model, 1.5),
        lfdr_at_far_tail=lfdr(model, 4.0),
    )
