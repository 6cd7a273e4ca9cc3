"""Estimate the marginal density, the null parameters and the null
proportion from observed z-values.

The null estimator works entirely in the frequency domain.  Write the
empirical characteristic function (ECF) as

    psi_m(t) = (1/m) * sum_j exp(i t z_j).

Under a mixture p0*N(u0, s0^2) + sum_j w_j*N(u_j, s_j^2) whose components
share the null width,

    |psi(t)| = exp(-s0^2 t^2 / 2) * |h(t)|,      h(t) = p0 + sum_j w_j e^{i d_j t},

with d_j = u_j - u0.  The modulating factor h is almost periodic with
|h| <= 1, sup_t |h| = 1 (total mass) and inf_t |h| >= p0 - sum_j w_j, so on a
frequency window where the ECF is still well above sampling noise:

* the upper envelope of |psi_m(t)| * exp(s^2 t^2 / 2) is flat at 1 exactly
  when s^2 equals the null variance -- we estimate s0^2 by the minimum of
  L(t) = -2 log|psi_m(t)| / t^2 over the window (attained where |h| peaks);
* the mid-envelope (min + max)/2 of |psi_m(t)| * exp(s0^2 t^2 / 2) recovers
  p0: the oscillating part cancels at its peak and trough (exactly so for a
  pure null and for any single-frequency or symmetric two-point
  alternative);
* the phase of psi_m(t) grows like u0 * t, estimated by weighted regression
  of the unwrapped phase on t.

Magnitudes are debiased for the sampling term E|psi_m|^2 = |psi|^2 +
(1 - |psi|^2)/m and median-filtered before the envelope extraction.

The marginal density estimator is a plain Gaussian-kernel KDE with
Silverman's rule-of-thumb bandwidth, evaluated by linear interpolation on a
1024-point grid (exact kernel sums off-grid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateCF, DegenerateData, EmptyInput, NotEnoughData

__all__ = [
    "MarginalDensityEstimate",
    "NullEstimate",
    "empirical_cf",
    "estimate_null_ecf",
    "estimate_marginal_kde",
    "estimate_p0_tail",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Frequency grid: t_k = k * _T_STEP, k = 1.._T_COUNT, evaluated lazily in
# blocks because the informative window rarely extends past t ~ 3 for
# unit-width nulls.
_T_STEP = 0.01
_T_COUNT = 3000
_T_BLOCK = 250
_MEDFILT = 9
_MIN_OBS = 100


def _crossing_level(m: int) -> float:
    """|ECF| level whose first crossing defines t*."""
    return max(0.25, m ** (-0.1))


def _floor_level(m: int) -> float:
    """|ECF| floor ending the analysis window (keeps relative noise small)."""
    return max(0.10, 6.0 / math.sqrt(m))


@dataclass(frozen=True)
class NullEstimate:
    """Estimated null parameters with frequency-domain diagnostics."""

    p0_hat: float
    u0_hat: float
    sigma0_hat: float
    t_star: float
    cf_magnitude_at_t_star: float


@dataclass
class MarginalDensityEstimate:
    """Kernel estimate of the marginal z-density.

    ``evaluate`` interpolates linearly on the stored grid and falls back to
    exact kernel sums outside it.  Grid values must be nonnegative and
    integrate (trapezoid) to 1 within 1 percent.
    """

    grid: np.ndarray
    values: np.ndarray
    bandwidth: float
    data: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.data = np.asarray(self.data, dtype=float)
        if self.grid.ndim != 1 or self.grid.size < 2 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be ascending with at least 2 points")
        if self.values.shape != self.grid.shape:
            raise ValueError("values must match the grid")
        if np.any(self.values < 0.0):
            raise ValueError("density values must be nonnegative")
        if not self.bandwidth > 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        total = float(np.trapezoid(self.values, self.grid))
        if not (0.99 <= total <= 1.01):
            raise ValueError(f"grid density integrates to {total:.4f}, not 1")

    def evaluate(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        out = np.interp(z, self.grid, self.values)
        outside = (z < self.grid[0]) | (z > self.grid[-1])
        if np.any(outside) and self.data.size:
            out[outside] = _kernel_sum(self.data, z[outside], self.bandwidth)
        return out


def empirical_cf(z, t):
    """Empirical characteristic function (1/m) * sum_j exp(i t z_j).

    ``t`` may be a scalar or an array; the modulus never exceeds 1.
    """
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise EmptyInput("empirical_cf needs at least one observation")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = _ecf(z, t_arr)
    if np.isscalar(t) or np.ndim(t) == 0:
        return complex(out[0])
    return out


def _ecf(z: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """ECF on a frequency grid, chunked to bound memory; fixed summation
    order keeps results bit-identical across runs."""
    out = np.empty(ts.size, dtype=complex)
    chunk = max(1, int(4_000_000 // max(1, z.size)))
    for i in range(0, ts.size, chunk):
        arg = np.multiply.outer(ts[i : i + chunk], z)
        out[i : i + chunk] = np.cos(arg).mean(axis=1) + 1j * np.sin(arg).mean(axis=1)
    return out


def _median_filter(x: np.ndarray, width: int) -> np.ndarray:
    if x.size < width or width < 3:
        return x
    pad = width // 2
    padded = np.concatenate([np.repeat(x[0], pad), x, np.repeat(x[-1], pad)])
    return np.median(sliding_window_view(padded, width), axis=1)


def estimate_null_ecf(z, t_grid=None) -> NullEstimate:
    """Estimate (p0, u0, sigma0) from z-values via the ECF envelope method.

    ``t_grid`` overrides the default frequency grid 0.01*k, k = 1..3000
    (must be ascending and positive); scaling the grid by 1/a makes the
    estimate exactly equivariant under z -> a*z + b.

    Raises NotEnoughData below 100 observations and DegenerateCF when the
    ECF magnitude never falls below the crossing level on the grid.
    """
    z = np.asarray(z, dtype=float)
    m = z.size
    if m < _MIN_OBS:
        raise NotEnoughData(f"null estimation needs m >= {_MIN_OBS}, got {m}")
    level = _crossing_level(m)
    floor = min(level, _floor_level(m))
    if t_grid is None:
        ts = _T_STEP * np.arange(1, _T_COUNT + 1)
    else:
        ts = np.asarray(t_grid, dtype=float)
        if ts.size == 0 or np.any(np.diff(ts) <= 0) or ts[0] <= 0:
            raise ValueError("t_grid must be ascending and strictly positive")

    # Lazy evaluation: grow the evaluated prefix until the window [k*, k_end)
    # between the level crossing and the noise floor is covered.
    psi = np.empty(0, dtype=complex)
    k_star = None
    k_end = None
    for start in range(0, ts.size, _T_BLOCK):
        psi = np.concatenate([psi, _ecf(z, ts[start : start + _T_BLOCK])])
        mag = np.abs(psi)
        if k_star is None:
            hits = np.nonzero(mag <= level)[0]
            if hits.size:
                k_star = int(hits[0])
        if k_star is not None:
            below = np.nonzero(mag[k_star:] < floor)[0]
            if below.size:
                k_end = k_star + int(below[0])
                break
            k_end = mag.size
    if k_star is None:
        raise DegenerateCF(
            f"|ECF| never fell below {level:.4g} for t <= {ts[-1]:.4g}"
        )
    k_end = max(k_end, k_star + 1)
    t_star = float(ts[k_star])
    mag_at_star = float(np.abs(psi[k_star]))

    # Sampling debias of |psi|^2; E|psi_m|^2 = |psi|^2 + (1 - |psi|^2)/m.
    mag2 = np.abs(psi[:k_end]) ** 2
    mag = np.sqrt(np.maximum(1e-12, (m * mag2 - 1.0) / (m - 1.0)))
    tw = ts[:k_end]

    decay = -2.0 * np.log(mag[k_star:k_end]) / tw[k_star:k_end] ** 2
    sigma0_sq = max(1e-4, float(np.min(_median_filter(decay, _MEDFILT))))

    phases = np.unwrap(np.concatenate([[0.0], np.angle(psi[:k_end])]))[1:]
    weights = (tw * np.abs(psi[:k_end])) ** 2
    u0_hat = float(np.sum(weights * phases * tw) / np.sum(weights * tw * tw))

    envelope = _median_filter(mag * np.exp(0.5 * sigma0_sq * tw * tw), _MEDFILT)
    p0_hat = 0.5 * (float(np.min(envelope)) + min(1.0, float(np.max(envelope))))
    p0_hat = min(1.0, max(1e-6, p0_hat))

    return NullEstimate(
        p0_hat=p0_hat,
        u0_hat=u0_hat,
        sigma0_hat=math.sqrt(sigma0_sq),
        t_star=t_star,
        cf_magnitude_at_t_star=mag_at_star,
    )


def _kernel_sum(data: np.ndarray, at: np.ndarray, bandwidth: float) -> np.ndarray:
    out = np.zeros(at.size)
    chunk = max(1, int(4_000_000 // max(1, at.size)))
    for i in range(0, data.size, chunk):
        u = (at[:, None] - data[None, i : i + chunk]) / bandwidth
        out += np.exp(-0.5 * u * u).sum(axis=1)
    return out / (data.size * bandwidth * _SQRT_2PI)


def silverman_bandwidth(z) -> float:
    """Silverman's rule of thumb 0.9 * min(sd, IQR/1.34) * m^(-1/5)."""
    z = np.asarray(z, dtype=float)
    sd = float(np.std(z, ddof=1))
    q75, q25 = np.percentile(z, [75.0, 25.0])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0.0:
        spread = sd
    return 0.9 * spread * z.size ** (-0.2)


def estimate_marginal_kde(z, bandwidth: float | None = None) -> MarginalDensityEstimate:
    """Gaussian-kernel density estimate on a 1024-point grid.

    The grid spans [min(z) - 4h, max(z) + 4h]; grid values are normalized so
    the trapezoid integral is exactly 1.  ``bandwidth`` overrides the
    Silverman default.
    """
    z = np.asarray(z, dtype=float)
    if z.size < 2:
        raise DegenerateData("kernel density estimation needs at least 2 points")
    if float(np.std(z, ddof=1)) == 0.0:
        raise DegenerateData("sample standard deviation is zero")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(z)
    elif not bandwidth > 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    grid = np.linspace(z.min() - 4.0 * bandwidth, z.max() + 4.0 * bandwidth, 1024)
    values = _kernel_sum(z, grid, bandwidth)
    values /= np.trapezoid(values, grid)
    return MarginalDensityEstimate(
        grid=grid, values=values, bandwidth=float(bandwidth), data=z.copy()
    )


def estimate_p0_tail(pvalues, lam: float = 0.5) -> float:
    """Tail-based null-proportion estimate min(1, #{p > lam}/((1 - lam) m)).

    Follows Storey (2002): under the mixture, p-values above a moderate
    cutoff lam come almost entirely from the null, whose p-values are
    uniform.
    """
    if not (0.0 < lam < 1.0):
        raise ValueError(f"lambda must be in (0, 1), got {lam}")
    p = np.asarray(pvalues, dtype=float)
    if p.size == 0:
        raise EmptyInput("estimate_p0_tail needs at least one p-value")
    return min(1.0, float(np.sum(p > lam)) / ((1.0 - lam) * p.size))
