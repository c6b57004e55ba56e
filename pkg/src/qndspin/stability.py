"""Unconditional dynamics when the QND condition is violated.

Averaged over outcomes, one binary measurement maps the nuclear polarization
``n`` to ``M n`` with the dephasing matrix ``M = [R(alpha_vec) +
R(-alpha_vec)] / 2``: the component along the measurement axis survives and
the perpendicular components shrink by ``cos(alpha)``.  A per-cycle rotation
error ``delta_phi_i`` then iterates

    a(N) = R(delta_phi_N) M ... R(delta_phi_1) M a(0),       a(0) = alpha_hat,

and the survival of the measured eigenstate is ``S(N) = alpha_hat . a(N)``.
The lifetime ``N_L`` is the first ``N`` where ``S(N)`` reaches ``1/e``
(``inf`` if it never does within the horizon; oscillatory cases such as the
``alpha = pi`` echo may never cross).

Small-error closed forms, for the worst case of a fixed error axis
perpendicular to the measurement axis:

* systematic ``delta_phi``:  ``S(N) ~ exp(-N dphi^2 / (2 tan^2(alpha/2)))``
* iid random ``delta_phi_i`` of std ``dphi`` (ensemble mean):
  ``S(N) = exp(-N dphi^2 / 2)``, independent of ``alpha``
* exactly, ``cos(alpha) = 0``:  ``S(N) = prod_i cos(dphi_i)``
* exactly, ``cos(alpha) = -1``: ``S(N) = cos(sum_i (-1)^i dphi_i)`` (echo)

Keeping ``N_L`` above the critical count ``2 / D**2`` bounds the tolerable
error: ``dphi <= D |tan(alpha/2)|`` (systematic) or ``dphi <= D`` (random),
which translates into a waiting-time tolerance ``dphi / |omega + A/2|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hyperfine import SpinSystem
from .rotations import rotor_exp, so3_from_rotor

__all__ = [
    "DephasingMap",
    "RotationErrorModel",
    "SurvivalCurve",
    "dephasing_map",
    "survival_curve",
    "survival_ensemble",
    "lifetime",
    "analytic_survival",
    "tolerance",
    "tolerance_time",
]


@dataclass(frozen=True)
class DephasingMap:
    """Outcome-averaged polarization map of one binary measurement."""

    matrix: np.ndarray

    @classmethod
    def from_alpha(cls, alpha_vec) -> "DephasingMap":
        alpha_vec = np.asarray(alpha_vec, dtype=float)
        return cls(
            0.5 * (so3_from_rotor(rotor_exp(alpha_vec)) + so3_from_rotor(rotor_exp(-alpha_vec)))
        )


def dephasing_map(alpha_vec) -> np.ndarray:
    """Matrix ``[R(alpha_vec) + R(-alpha_vec)] / 2``.

    Fixes the measurement axis and scales perpendicular components by
    ``cos(|alpha_vec|)``.
    """
    return DephasingMap.from_alpha(alpha_vec).matrix


@dataclass
class RotationErrorModel:
    """Per-cycle rotation error.

    kinds:
      * ``systematic``: the same ``delta_phi`` vector every cycle.
      * ``random``: ``delta_phi_i = g_i * axis`` with iid Gaussian ``g_i`` of
        standard deviation ``std`` (``axis_policy="fixed"``), or an isotropic
        random direction per cycle (``axis_policy="isotropic"``); ``seed`` is
        mandatory.
      * ``explicit``: a given array of per-cycle vectors, cycled when shorter
        than the horizon.  With ``full_cycle=True`` the entries are the full
        per-cycle rotations applied after the dephasing map instead of small
        deviations (the scan driver uses this with the net cycle rotation).
    """

    kind: str
    delta_phi: np.ndarray | None = None
    std: float = 0.0
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    seed: int | None = None
    axis_policy: str = "fixed"
    rotations: np.ndarray | None = None
    full_cycle: bool = False

    def __post_init__(self):
        if self.kind not in ("systematic", "random", "explicit"):
            raise ValueError(f"unknown error kind {self.kind!r}")
        if self.kind == "systematic":
            if self.delta_phi is None:
                raise ValueError("systematic errors need delta_phi")
            self.delta_phi = np.asarray(self.delta_phi, dtype=float)
        elif self.kind == "random":
            if self.seed is None:
                raise ValueError("random errors need an explicit seed")
            if self.std < 0.0:
                raise ValueError("std must be nonnegative")
            if self.axis_policy not in ("fixed", "isotropic"):
                raise ValueError(f"unknown axis policy {self.axis_policy!r}")
            self.axis = np.asarray(self.axis, dtype=float)
            norm = np.linalg.norm(self.axis)
            if self.axis_policy == "fixed":
                if norm == 0.0:
                    raise ValueError("fixed axis must be nonzero")
                self.axis = self.axis / norm
        else:
            if self.rotations is None:
                raise ValueError("explicit errors need the rotations array")
            self.rotations = np.atleast_2d(np.asarray(self.rotations, dtype=float))

    def rotation_vectors(self, n_max: int) -> np.ndarray:
        """Per-cycle rotation vectors for cycles ``1 .. n_max``."""
        if self.kind == "systematic":
            return np.tile(self.delta_phi, (n_max, 1))
        if self.kind == "random":
            seed = self.seed
            if not isinstance(seed, np.random.SeedSequence):
                seed = np.random.SeedSequence(seed)
            rng = np.random.default_rng(seed)
            magnitudes = rng.normal(0.0, self.std, size=n_max)
            if self.axis_policy == "fixed":
                return magnitudes[:, None] * self.axis[None, :]
            directions = rng.normal(size=(n_max, 3))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
            return magnitudes[:, None] * directions
        reps = -(-n_max // self.rotations.shape[0])
        return np.tile(self.rotations, (reps, 1))[:n_max]


@dataclass
class SurvivalCurve:
    """``S(0 .. n_max)`` and the first ``1/e`` crossing."""

    values: np.ndarray
    lifetime: int | float


def survival_curve(alpha_vec, error: RotationErrorModel, n_max: int) -> SurvivalCurve:
    """Iterate the dephasing-plus-error map and record ``S(N)``."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    alpha_vec = np.asarray(alpha_vec, dtype=float)
    mag = np.linalg.norm(alpha_vec)
    alpha_hat = alpha_vec / mag if mag > 0.0 else np.array([0.0, 0.0, 1.0])
    deph = dephasing_map(alpha_vec)
    vectors = error.rotation_vectors(n_max)
    values = np.empty(n_max + 1)
    values[0] = 1.0
    state = alpha_hat.copy()
    if error.kind == "systematic":
        step = so3_from_rotor(rotor_exp(error.delta_phi)) @ deph
        for i in range(1, n_max + 1):
            state = step @ state
            values[i] = float(alpha_hat @ state)
    else:
        for i in range(1, n_max + 1):
            state = so3_from_rotor(rotor_exp(vectors[i - 1])) @ (deph @ state)
            values[i] = float(alpha_hat @ state)
    return SurvivalCurve(values, lifetime(values))


def survival_ensemble(
    alpha_vec,
    std: float,
    axis,
    n_max: int,
    n_seeds: int,
    master_seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean and standard error of ``S(N)`` for iid random errors.

    Instance ``i`` draws its error angles from the seed
    ``SeedSequence(master_seed).spawn(n_seeds)[i]``, so each row reproduces
    ``survival_curve`` with the corresponding random-kind model; the
    iteration itself is vectorized across instances.
    """
    alpha_vec = np.asarray(alpha_vec, dtype=float)
    mag = float(np.linalg.norm(alpha_vec))
    alpha_hat = alpha_vec / mag if mag > 0.0 else np.array([0.0, 0.0, 1.0])
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    seeds = np.random.SeedSequence(master_seed).spawn(n_seeds)
    angles = np.empty((n_seeds, n_max))
    for i, seq in enumerate(seeds):
        angles[i] = np.random.default_rng(seq).normal(0.0, std, size=n_max)
    deph = dephasing_map(alpha_vec)
    states = np.tile(alpha_hat, (n_seeds, 1))
    survivals = np.empty((n_max + 1, n_seeds))
    survivals[0] = 1.0
    for step in range(1, n_max + 1):
        states = states @ deph.T
        cos_a = np.cos(angles[:, step - 1])[:, None]
        sin_a = np.sin(angles[:, step - 1])[:, None]
        along = (states @ axis)[:, None] * axis[None, :]
        states = states * cos_a + np.cross(axis[None, :], states) * sin_a + along * (1.0 - cos_a)
        survivals[step] = states @ alpha_hat
    mean = survivals.mean(axis=1)
    stderr = survivals.std(axis=1, ddof=1) / math.sqrt(n_seeds)
    return mean, stderr


def lifetime(values) -> int | float:
    """Smallest ``N`` with ``S(N) <= 1/e``; ``inf`` when none in range."""
    values = np.asarray(values, dtype=float)
    crossed = np.nonzero(values <= 1.0 / math.e)[0]
    return int(crossed[0]) if crossed.size else math.inf


def analytic_survival(kind: str, alpha_mag: float, delta_phi: float, n) -> np.ndarray:
    """Closed-form survival laws for a perpendicular error axis.

    ``systematic`` and ``random`` are the small-error exponentials quoted in
    the module docstring; ``dephasing_exact`` (``cos alpha = 0``) and
    ``echo_exact`` (``cos alpha = -1``) are the exact special cases for a
    constant error angle.
    """
    n = np.asarray(n, dtype=float)
    if kind == "systematic":
        return np.exp(-n * delta_phi**2 / (2.0 * math.tan(alpha_mag / 2.0) ** 2))
    if kind == "random":
        return np.exp(-n * delta_phi**2 / 2.0)
    if kind == "dephasing_exact":
        return np.cos(delta_phi) ** n
    if kind == "echo_exact":
        signed = np.where(np.asarray(n).astype(int) % 2 == 0, 0.0, delta_phi)
        return np.cos(signed)
    raise ValueError(f"unknown analytic survival kind {kind!r}")


def tolerance(strength_d: float, alpha_mag: float, kind: str) -> float:
    """Largest per-cycle error keeping ``N_L`` above the critical count."""
    if strength_d <= 0.0:
        raise ValueError("strength must be positive")
    if kind == "systematic":
        return strength_d * abs(math.tan(alpha_mag / 2.0))
    if kind == "random":
        return strength_d
    raise ValueError(f"unknown tolerance kind {kind!r}")


def tolerance_time(delta_phi_tol: float, sys: SpinSystem) -> float:
    """Waiting-time tolerance ``delta_phi / |omega + A/2|`` in seconds."""
    return delta_phi_tol / float(np.linalg.norm(sys.wait_field))
