"""Stochastic measurement records and post-measurement nuclear states.

The nuclear state is a Bloch polarization ``n`` (density operator ``1/2 +
I . n``, ``|n| <= 1``).  One cycle samples the binary outcome ``u`` with
probability ``Tr M_u rho M_u^dag``, collapses the state through the Kraus
operator and applies the net cycle rotation.  In the eigenbasis of the
measurement axis the Kraus operators are diagonal, so the update has a
closed Bloch form: populations reweight by the conditional probabilities,
the transverse component rescales by ``|l_+ l_-| / p`` and rotates about the
axis by ``-arg(l_+ l_-^*)``, with ``l_pm`` the Kraus eigenvalues.

Randomness comes from numpy's PCG64 ``default_rng``.  Trajectory ``i`` of an
ensemble draws from ``SeedSequence(master_seed, spawn_key=(i,))``; a single
``run`` with that seed sequence reproduces the ensemble row bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measurement import MeasurementSetting
from .rotations import Rotor, so3_from_rotor

__all__ = [
    "NuclearState",
    "TrajectoryRecord",
    "kraus_eigenvalues",
    "step",
    "run",
    "run_ensemble",
]


@dataclass
class NuclearState:
    """Bloch polarization of the nuclear spin-1/2."""

    bloch: np.ndarray

    def __post_init__(self):
        self.bloch = np.asarray(self.bloch, dtype=float)
        if float(np.linalg.norm(self.bloch)) > 1.0 + 1e-12:
            raise ValueError("polarization must satisfy |bloch| <= 1")

    @classmethod
    def eigenstate(cls, alpha_hat, branch: int = 1) -> "NuclearState":
        alpha_hat = np.asarray(alpha_hat, dtype=float)
        return cls(branch * alpha_hat / np.linalg.norm(alpha_hat))

    @classmethod
    def mixed(cls) -> "NuclearState":
        return cls(np.zeros(3))


@dataclass
class TrajectoryRecord:
    outcomes: np.ndarray
    u_bar: float
    final_state: NuclearState
    seed: object


def kraus_eigenvalues(setting: MeasurementSetting, u: int) -> tuple[complex, complex]:
    """Eigenvalues of ``M_u`` on the ``|+alpha>`` / ``|-alpha>`` eigenstates."""
    if not setting.readout.is_ideal:
        raise ValueError("trajectory updates are defined for ideal readout only")
    alpha, phi = setting.alpha_mag, setting.phi
    if u == 1:
        return (
            complex(math.cos((alpha - phi) / 2.0)),
            complex(math.cos((alpha + phi) / 2.0)),
        )
    return (
        1j * math.sin((alpha - phi) / 2.0),
        -1j * math.sin((alpha + phi) / 2.0),
    )


def step(
    state: NuclearState,
    setting: MeasurementSetting,
    cycle_rotation: Rotor,
    rng: np.random.Generator,
) -> tuple[int, NuclearState]:
    """Sample one outcome and return it with the post-cycle state."""
    alpha_hat = setting.alpha_hat
    n = state.bloch
    par = float(n @ alpha_hat)
    perp = n - par * alpha_hat

    lam = {u: kraus_eigenvalues(setting, u) for u in (1, -1)}
    weight = {
        u: 0.5 * (abs(lam[u][0]) ** 2 * (1.0 + par) + abs(lam[u][1]) ** 2 * (1.0 - par))
        for u in (1, -1)
    }
    p_plus = weight[1]
    if p_plus < -1e-12 or p_plus > 1.0 + 1e-12:
        raise ValueError(f"invalid outcome probability {p_plus}")
    u = 1 if rng.random() < p_plus else -1

    l_plus, l_minus = lam[u]
    p = weight[u]
    new_par = 0.5 * (
        abs(l_plus) ** 2 * (1.0 + par) - abs(l_minus) ** 2 * (1.0 - par)
    ) / p
    cross = l_plus * l_minus.conjugate() / p
    new_perp = cross.real * perp - cross.imag * np.cross(alpha_hat, perp)
    bloch = so3_from_rotor(cycle_rotation) @ (new_par * alpha_hat + new_perp)
    return u, NuclearState(bloch)


def run(
    setting: MeasurementSetting,
    cycle_rotation: Rotor,
    initial: NuclearState,
    n: int,
    seed,
) -> TrajectoryRecord:
    """Simulate ``n`` cycles; deterministic for a given seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not isinstance(seed, np.random.SeedSequence):
        seed_seq = np.random.SeedSequence(seed)
    else:
        seed_seq = seed
    rng = np.random.default_rng(seed_seq)
    state = initial
    outcomes = np.empty(n, dtype=np.int8)
    for i in range(n):
        outcomes[i], state = step(state, setting, cycle_rotation, rng)
    return TrajectoryRecord(outcomes, float(outcomes.mean()), state, seed)


def run_ensemble(
    setting: MeasurementSetting,
    cycle_rotation: Rotor,
    initial: NuclearState,
    n: int,
    n_traj: int,
    master_seed: int,
    block: int = 8192,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized batch of independent trajectories.

    Returns ``(u_bars, final_blochs)`` with one row per trajectory.
    Trajectory ``i`` consumes the stream ``SeedSequence(master_seed,
    spawn_key=(i,))`` exactly as ``run`` would, so the ensemble is a
    bit-for-bit parallelization of repeated single runs.
    """
    if not setting.readout.is_ideal:
        raise ValueError("trajectory updates are defined for ideal readout only")
    alpha_hat = setting.alpha_hat
    rotation = so3_from_rotor(cycle_rotation)
    lam = {u: kraus_eigenvalues(setting, u) for u in (1, -1)}
    mod_sq = {u: (abs(lam[u][0]) ** 2, abs(lam[u][1]) ** 2) for u in (1, -1)}
    cross = {u: lam[u][0] * lam[u][1].conjugate() for u in (1, -1)}

    u_bars = np.empty(n_traj)
    finals = np.empty((n_traj, 3))
    for start in range(0, n_traj, block):
        count = min(block, n_traj - start)
        uniforms = np.empty((count, n))
        for i in range(count):
            seq = np.random.SeedSequence(master_seed, spawn_key=(start + i,))
            uniforms[i] = np.random.default_rng(seq).random(n)
        states = np.tile(initial.bloch, (count, 1))
        totals = np.zeros(count)
        for cycle in range(n):
            par = states @ alpha_hat
            perp = states - par[:, None] * alpha_hat[None, :]
            p_plus = 0.5 * (mod_sq[1][0] * (1.0 + par) + mod_sq[1][1] * (1.0 - par))
            picked_plus = uniforms[:, cycle] < p_plus
            u = np.where(picked_plus, 1.0, -1.0)
            totals += u

            a2 = np.where(picked_plus, mod_sq[1][0], mod_sq[-1][0])
            b2 = np.where(picked_plus, mod_sq[1][1], mod_sq[-1][1])
            cr = np.where(picked_plus, cross[1], cross[-1])
            p = 0.5 * (a2 * (1.0 + par) + b2 * (1.0 - par))
            new_par = 0.5 * (a2 * (1.0 + par) - b2 * (1.0 - par)) / p
            scale = (cr.real / p)[:, None]
            twist = (cr.imag / p)[:, None]
            new_perp = scale * perp - twist * np.cross(
                np.tile(alpha_hat, (count, 1)), perp
            )
            states = (
                new_par[:, None] * alpha_hat[None, :] + new_perp
            ) @ rotation.T
        u_bars[start : start + count] = totals / n
        finals[start : start + count] = states
    return u_bars, finals
