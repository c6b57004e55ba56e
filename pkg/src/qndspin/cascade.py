"""Cascading binary measurements into one multi-outcome readout.

``n`` repeated binary measurements under the QND condition are equivalent to
a single measurement of the averaged outcome ``u_bar = (N_plus - N_minus) /
n``, which lives on the grid ``-1, -1 + 2/n, ..., +1``.  Conditioned on the
nuclear eigenstate ``|+-alpha>`` the counts are binomial, so

    P(u_bar | a) = C(n, N_plus) P(+|a)^N_plus P(-|a)^N_minus,

evaluated through log-gamma so that ``n`` up to 1e6 stays finite.  For large
``n`` the law is Gaussian with the single-shot mean and a fluctuation shrunk
by ``sqrt(n)``, hence the combined strength grows as ``sqrt(n) D``.

State discrimination thresholds ``u_bar`` at the crossing of the two
conditional laws; the average fidelity then follows the universal error
function of the combined strength,  F_bar ~ 1/2 + erf(sqrt(n) D / sqrt(2))/2.
Reaching the 92% threshold fidelity takes ``n >= 2 / D**2`` measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, gammaln, xlogy

from .measurement import MeasurementSetting, binary_stats, outcome_prob

__all__ = [
    "DN_THRESHOLD",
    "FBAR_THRESHOLD",
    "OutcomeDistribution",
    "FidelityReport",
    "exact_distribution",
    "gaussian_distribution",
    "optimal_threshold",
    "readout_fidelity",
    "critical_n",
]

# combined strength and average fidelity defining a "projective" readout
DN_THRESHOLD = math.sqrt(2.0)
FBAR_THRESHOLD = 0.92


@dataclass
class OutcomeDistribution:
    """Conditional laws of ``u_bar`` for the two nuclear eigenstates."""

    n: int
    probs_plus: np.ndarray
    probs_minus: np.ndarray

    def __post_init__(self):
        self.probs_plus = np.asarray(self.probs_plus, dtype=float)
        self.probs_minus = np.asarray(self.probs_minus, dtype=float)
        for name, probs in (("probs_plus", self.probs_plus), ("probs_minus", self.probs_minus)):
            if probs.shape != (self.n + 1,):
                raise ValueError(f"{name} must have length n + 1")
            if np.any(probs < 0.0):
                raise ValueError(f"{name} has negative entries")
            if abs(float(probs.sum()) - 1.0) > 1e-10:
                raise ValueError(f"{name} does not sum to 1")

    @property
    def u_grid(self) -> np.ndarray:
        """Outcome values ``(2k - n) / n`` for ``k = 0 .. n``."""
        return (2.0 * np.arange(self.n + 1) - self.n) / self.n

    def moments(self, branch: int) -> tuple[float, float]:
        """Mean and standard deviation of ``u_bar`` for branch ``+-1``."""
        probs = self.probs_plus if branch == 1 else self.probs_minus
        grid = self.u_grid
        mean = float(probs @ grid)
        var = float(probs @ (grid - mean) ** 2)
        return mean, math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class FidelityReport:
    n: int
    u_threshold: float
    f_plus: float
    f_minus: float
    f_bar: float
    f_erf: float
    strength_dn: float
    n_critical: int | float


def _binomial_law(n: int, p: float) -> np.ndarray:
    k = np.arange(n + 1)
    log_probs = (
        gammaln(n + 1.0)
        - gammaln(k + 1.0)
        - gammaln(n - k + 1.0)
        + xlogy(k, p)
        + xlogy(n - k, 1.0 - p)
    )
    probs = np.exp(log_probs)
    return probs / probs.sum()


def exact_distribution(setting: MeasurementSetting, n: int) -> OutcomeDistribution:
    """Binomial conditional laws of ``u_bar`` after ``n`` binary measurements."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return OutcomeDistribution(
        n,
        _binomial_law(n, outcome_prob(setting, 1, 1)),
        _binomial_law(n, outcome_prob(setting, -1, 1)),
    )


def _gaussian_law(n: int, mean: float, sigma: float) -> np.ndarray:
    grid = (2.0 * np.arange(n + 1) - n) / n
    if sigma == 0.0:
        probs = np.zeros(n + 1)
        probs[int(np.argmin(np.abs(grid - mean)))] = 1.0
        return probs
    scaled = sigma / math.sqrt(n)
    probs = np.exp(-((grid - mean) ** 2) / (2.0 * scaled**2))
    return probs / probs.sum()


def gaussian_distribution(setting: MeasurementSetting, n: int) -> OutcomeDistribution:
    """Gaussian (large-``n``) approximation of the conditional laws.

    Density times grid spacing, renormalized on the discrete grid so the law
    stays a probability distribution at any ``n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    stats = binary_stats(setting)
    return OutcomeDistribution(
        n,
        _gaussian_law(n, stats.mean_plus, stats.sigma_plus),
        _gaussian_law(n, stats.mean_minus, stats.sigma_minus),
    )


def optimal_threshold(dist: OutcomeDistribution, mode: str = "exact") -> float:
    """Threshold between the conditional means maximizing average fidelity.

    ``exact`` picks the grid point between the two means where the law
    difference changes sign (the crossing); when the two bracketing points
    tie, their midpoint is used.  ``gaussian`` uses the closed form
    ``(m_+/s_+ + m_-/s_-) / (1/s_+ + 1/s_-)`` built from the law moments,
    falling back to the midpoint of the means if a sigma vanishes.
    """
    mean_plus, sigma_plus = dist.moments(1)
    mean_minus, sigma_minus = dist.moments(-1)
    if abs(mean_plus - mean_minus) < 1e-15 and np.max(
        np.abs(dist.probs_plus - dist.probs_minus)
    ) < 1e-15:
        raise ValueError("states indistinguishable: identical conditional laws")

    if mode == "gaussian":
        if sigma_plus == 0.0 or sigma_minus == 0.0:
            return 0.5 * (mean_plus + mean_minus)
        return (mean_plus / sigma_plus + mean_minus / sigma_minus) / (
            1.0 / sigma_plus + 1.0 / sigma_minus
        )
    if mode != "exact":
        raise ValueError("mode must be 'exact' or 'gaussian'")

    grid = dist.u_grid

    def snap(value: float) -> float:
        nearest = float(grid[int(np.argmin(np.abs(grid - value)))])
        return nearest if abs(nearest - value) < 1e-12 else value

    lo, hi = sorted((mean_plus, mean_minus))
    inside = np.nonzero((grid >= lo) & (grid <= hi))[0]
    midpoint = 0.5 * (mean_plus + mean_minus)
    if inside.size == 1:
        return float(grid[inside[0]])
    if inside.size == 0:
        return snap(midpoint)
    diff = dist.probs_plus[inside] - dist.probs_minus[inside]
    candidates = []
    for j in range(inside.size - 1):
        a, b = diff[j], diff[j + 1]
        if a == 0.0:
            candidates.append(float(grid[inside[j]]))
        elif a * b < 0.0:
            if abs(abs(a) - abs(b)) < 1e-15:
                candidates.append(0.5 * float(grid[inside[j]] + grid[inside[j + 1]]))
            elif abs(a) < abs(b):
                candidates.append(float(grid[inside[j]]))
            else:
                candidates.append(float(grid[inside[j + 1]]))
    if diff[-1] == 0.0:
        candidates.append(float(grid[inside[-1]]))
    if not candidates:
        return snap(midpoint)
    return min(candidates, key=lambda t: abs(t - midpoint))


def readout_fidelity(
    dist: OutcomeDistribution, threshold: float, strength_d: float
) -> FidelityReport:
    """Tail-sum fidelities at a threshold, with the erf prediction alongside.

    Grid points exactly at the threshold contribute half their mass to each
    side, which removes even/odd-``n`` parity artifacts.  ``f_erf`` is the
    universal curve ``1/2 + erf(sqrt(n) D / sqrt(2)) / 2`` reported for
    comparison, never substituted for the tail sums.
    """
    grid = dist.u_grid
    at = np.isclose(grid, threshold, rtol=0.0, atol=1e-12)
    above = (grid > threshold) & ~at
    below = (grid < threshold) & ~at
    weights_above = above.astype(float) + 0.5 * at
    weights_below = below.astype(float) + 0.5 * at

    mean_plus, _ = dist.moments(1)
    mean_minus, _ = dist.moments(-1)
    if mean_plus >= mean_minus:
        f_plus = float(dist.probs_plus @ weights_above)
        f_minus = float(dist.probs_minus @ weights_below)
    else:
        f_plus = float(dist.probs_plus @ weights_below)
        f_minus = float(dist.probs_minus @ weights_above)

    strength_dn = math.sqrt(dist.n) * strength_d
    f_erf = 0.5 + 0.5 * float(erf(strength_dn / math.sqrt(2.0)))
    return FidelityReport(
        n=dist.n,
        u_threshold=threshold,
        f_plus=f_plus,
        f_minus=f_minus,
        f_bar=0.5 * (f_plus + f_minus),
        f_erf=f_erf,
        strength_dn=strength_dn,
        n_critical=critical_n(strength_d),
    )


def critical_n(strength_d: float) -> int:
    """Measurements needed to reach the threshold strength, ``ceil(2 / D**2)``.

    A projective single shot (``D = inf``) needs one measurement.
    """
    if strength_d == 0.0:
        raise ValueError("no information per shot: D = 0")
    if math.isinf(strength_d):
        return 1
    return max(1, math.ceil(2.0 / strength_d**2))
