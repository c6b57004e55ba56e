"""Electron-nuclear hyperfine system and dynamical-decoupling evolution.

The nuclear spin sees the Hamiltonian ``H = omega . I + S_z A . I`` in the
electron interaction picture, where ``omega = omega_n e_z + (a_plus +
a_minus)/2`` is the hyperfine-shifted Larmor frequency and
``A = a_plus - a_minus`` the effective hyperfine vector; ``a_plus`` and
``a_minus`` are the hyperfine fields for the electron states ``|+z>`` and
``|-z>``.  All frequencies are stored in rad/s; a quantity quoted in "MHz"
converts as ``1 MHz = 2*pi*1e6 rad/s``.

A DD sequence of instantaneous pi pulses at times ``t_1 <= ... <= t_N``
inside ``[0, t_dd]`` defines the modulation ``s(t)``, which starts at ``+1``
and flips sign at every pulse.  Between pulses the Hamiltonian is constant,
so the conditional nuclear evolutions for the electron in ``|+z>`` / ``|-z>``
are exact products of rotors with fields ``omega +- s_k A / 2``.

The conditional pair ``(u_plus, u_minus)`` factorizes as
``u_pm = exp(-i phi_dd . I) exp(-+ i alpha . I)``; ``extract_alpha_phi``
recovers the conditional-rotation half-angle vector ``alpha`` and the common
rotation ``phi_dd`` from the pair.  In the weak-coupling regime
(``|A_perp| << |omega|``) both are given in closed form through the sequence
filter function ``f_dd``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .rotations import (
    Rotor,
    rotor_compose,
    rotor_conj,
    rotor_exp,
    rotor_log_full,
    so3_from_rotor,
)

__all__ = [
    "MHZ",
    "SpinSystem",
    "DDSequence",
    "cpmg",
    "exact_dd_evolution",
    "extract_alpha_phi",
    "filter_function",
    "cpmg_filter_closed_form",
    "weak_coupling_alpha",
    "match_alpha_branch",
]

# rad/s per "MHz" in configuration files and tables
MHZ = 2.0 * math.pi * 1e6

_EZ = np.array([0.0, 0.0, 1.0])


@dataclass
class SpinSystem:
    """Nuclear Zeeman plus electron-state-conditioned hyperfine fields.

    ``omega_n`` is the bare (signed) nuclear Zeeman frequency in rad/s along
    ``e_z``; ``a_plus`` / ``a_minus`` are the rad/s hyperfine vectors for the
    electron in ``|+z>`` / ``|-z>``.
    """

    omega_n: float
    a_plus: np.ndarray = field(default_factory=lambda: np.zeros(3))
    a_minus: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.a_plus = np.asarray(self.a_plus, dtype=float)
        self.a_minus = np.asarray(self.a_minus, dtype=float)
        if self.omega_mag == 0.0:
            raise ValueError("effective Larmor frequency omega must be nonzero")

    @classmethod
    def from_vectors(cls, omega, hyperfine) -> "SpinSystem":
        """Build a system with given effective ``omega`` and ``A`` vectors."""
        omega = np.asarray(omega, dtype=float)
        hyperfine = np.asarray(hyperfine, dtype=float)
        transverse = omega - omega[2] * _EZ
        return cls(
            omega_n=float(omega[2]),
            a_plus=transverse + hyperfine / 2.0,
            a_minus=transverse - hyperfine / 2.0,
        )

    @property
    def omega(self) -> np.ndarray:
        """Hyperfine-shifted Larmor frequency vector (rad/s)."""
        return self.omega_n * _EZ + 0.5 * (self.a_plus + self.a_minus)

    @property
    def hyperfine(self) -> np.ndarray:
        """Effective hyperfine vector ``A = a_plus - a_minus`` (rad/s)."""
        return self.a_plus - self.a_minus

    @property
    def omega_mag(self) -> float:
        return float(np.linalg.norm(self.omega))

    @property
    def a_perp(self) -> np.ndarray:
        """Component of ``A`` perpendicular to ``omega``."""
        omega_hat = self.omega / self.omega_mag
        a = self.hyperfine
        return a - float(a @ omega_hat) * omega_hat

    @property
    def wait_field(self) -> np.ndarray:
        """Precession vector ``omega + A/2`` with the electron in ``|+z>``."""
        return self.omega + 0.5 * self.hyperfine

    @property
    def wait_period(self) -> float:
        """One period of the waiting-time precession, ``2*pi/|omega + A/2|``."""
        return 2.0 * math.pi / float(np.linalg.norm(self.wait_field))

    @property
    def dd_period(self) -> float:
        """One period of the in-sequence precession, ``2*pi/|omega|``."""
        return 2.0 * math.pi / self.omega_mag


@dataclass
class DDSequence:
    """Instantaneous pi-pulse timings inside a total duration ``duration``."""

    pulse_times: np.ndarray
    duration: float

    def __post_init__(self):
        self.pulse_times = np.asarray(self.pulse_times, dtype=float)
        if self.duration <= 0.0:
            raise ValueError("sequence duration must be positive")
        if self.pulse_times.size:
            if np.any(np.diff(self.pulse_times) < 0.0):
                raise ValueError("pulse times must be sorted")
            if self.pulse_times[0] < 0.0 or self.pulse_times[-1] > self.duration:
                raise ValueError("pulse times must lie within [0, duration]")

    @property
    def n_pulses(self) -> int:
        return int(self.pulse_times.size)

    def interval_bounds(self) -> np.ndarray:
        return np.concatenate(([0.0], self.pulse_times, [self.duration]))

    def interval_signs(self) -> np.ndarray:
        """Modulation sign per inter-pulse interval, starting at +1."""
        n = self.n_pulses + 1
        return np.where(np.arange(n) % 2 == 0, 1.0, -1.0)

    def modulation_integral(self) -> float:
        """``integral of s(t) dt`` over the sequence (0 for balanced sequences)."""
        widths = np.diff(self.interval_bounds())
        return float(self.interval_signs() @ widths)


def cpmg(n_periods: int, tau: float) -> DDSequence:
    """CPMG sequence of ``n_periods`` repetitions of (tau/4 - pi - tau/2 - pi - tau/4)."""
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    starts = np.arange(n_periods) * tau
    times = np.sort(np.concatenate((starts + tau / 4.0, starts + 3.0 * tau / 4.0)))
    return DDSequence(times, n_periods * tau)


def exact_dd_evolution(sys: SpinSystem, seq: DDSequence) -> tuple[Rotor, Rotor]:
    """Conditional nuclear rotors ``(u_plus, u_minus)`` for a DD sequence.

    Each inter-pulse interval is evolved exactly under the constant field
    ``omega +- s_k A / 2`` for the electron in ``|+z>`` / ``|-z>``.
    """
    omega = sys.omega
    half_a = 0.5 * sys.hyperfine
    bounds = seq.interval_bounds()
    signs = seq.interval_signs()
    u_plus = Rotor(1.0, np.zeros(3))
    u_minus = Rotor(1.0, np.zeros(3))
    for k in range(signs.size):
        dt = bounds[k + 1] - bounds[k]
        if dt == 0.0:
            continue
        u_plus = rotor_compose(rotor_exp((omega + signs[k] * half_a) * dt), u_plus)
        u_minus = rotor_compose(rotor_exp((omega - signs[k] * half_a) * dt), u_minus)
    return u_plus, u_minus


def extract_alpha_phi(u_plus: Rotor, u_minus: Rotor) -> tuple[np.ndarray, np.ndarray]:
    """Split a conditional pair into ``(alpha_vec, phi_dd)``.

    ``alpha_vec`` solves ``exp(2i alpha . I) = u_plus^dag u_minus`` with
    ``|alpha|`` in ``[0, pi]``; ``phi_dd`` solves ``exp(-i phi_dd . I) =
    u_plus exp(i alpha . I)``.  Both use the sign-exact ``[0, 2*pi)`` branch
    of the rotor logarithm so that ``u_pm = rotor_exp(phi_dd) o
    rotor_exp(-+ alpha)`` holds exactly, not only up to a rotor sign.
    """
    w = rotor_compose(rotor_conj(u_plus), u_minus)
    alpha_vec = -0.5 * rotor_log_full(w)
    half = rotor_exp(-alpha_vec)  # exp(+i alpha . I)
    lhs = rotor_compose(u_plus, half)
    rhs = rotor_compose(u_minus, rotor_conj(half))
    err = max(
        abs(lhs.scalar - rhs.scalar), float(np.max(np.abs(lhs.vector - rhs.vector)))
    )
    if err > 1e-10:
        raise RuntimeError(f"conditional-rotation consistency check failed ({err:.2e})")
    phi_dd = rotor_log_full(lhs)
    return alpha_vec, phi_dd


def filter_function(seq: DDSequence, omega_mag: float) -> complex:
    """Normalized Fourier overlap of the modulation with ``exp(i |omega| t)``.

    Evaluated interval-by-interval in closed form:
    ``f = sum_k s_k (exp(i w t_{k+1}) - exp(i w t_k)) / (i w t_dd)``.
    Finite for every sequence and frequency.
    """
    if omega_mag <= 0.0:
        raise ValueError("omega_mag must be positive")
    bounds = seq.interval_bounds()
    signs = seq.interval_signs()
    phases = np.exp(1j * omega_mag * bounds)
    total = complex(np.sum(signs * (phases[1:] - phases[:-1])))
    return total / (1j * omega_mag * seq.duration)


def cpmg_filter_closed_form(n_periods: int, tau: float, omega_mag: float) -> complex:
    """Closed-form CPMG filter function.

    ``f = -exp(i w t_dd / 2) * (4 / (w t_dd)) * sin^2(w tau / 8)
    * sin(w t_dd / 2) / cos(w tau / 4)``.  Near the removable points
    ``cos(w tau / 4) = 0`` the interval-sum evaluation is used instead.
    """
    t_dd = n_periods * tau
    denom = math.cos(omega_mag * tau / 4.0)
    if abs(denom) < 1e-8:
        return filter_function(cpmg(n_periods, tau), omega_mag)
    return (
        -cmath.exp(1j * omega_mag * t_dd / 2.0)
        * (4.0 / (omega_mag * t_dd))
        * math.sin(omega_mag * tau / 8.0) ** 2
        * math.sin(omega_mag * t_dd / 2.0)
        / denom
    )


def match_alpha_branch(alpha_vec, reference) -> np.ndarray:
    """Representative of ``alpha_vec`` (mod pi along its axis) nearest ``reference``.

    The conditional rotation ``exp(2i alpha . I)`` only defines ``alpha``
    modulo ``pi`` along its axis (``2 alpha`` wraps by ``2 pi``), so comparing
    an extracted vector against an unreduced prediction such as the
    weak-coupling formula requires picking the matching winding first.  Every
    candidate generates the identical SO(3) action of ``2 alpha`` (odd
    windings flip the rotor sign, relabeling the two outcomes).
    """
    alpha_vec = np.asarray(alpha_vec, dtype=float)
    reference = np.asarray(reference, dtype=float)
    mag = float(np.linalg.norm(alpha_vec))
    if mag == 0.0:
        return alpha_vec
    axis = alpha_vec / mag
    windings = math.pi * np.arange(-6.0, 7.0)
    candidates = (mag + windings)[:, None] * axis[None, :]
    best = int(np.argmin(np.linalg.norm(candidates - reference, axis=1)))
    return candidates[best]


def weak_coupling_alpha(
    sys: SpinSystem, seq: DDSequence
) -> tuple[np.ndarray, np.ndarray]:
    """First-order (Magnus) approximation ``(alpha_vec, phi_dd)``.

    Valid when ``|A_perp| << |omega|``:  ``phi_dd = omega * t_dd`` and
    ``alpha = |f_dd| R(-arg(f_dd) omega_hat) (A_perp t_dd / 2)``.
    """
    omega_hat = sys.omega / sys.omega_mag
    f_dd = filter_function(seq, sys.omega_mag)
    rot = so3_from_rotor(rotor_exp(-cmath.phase(f_dd) * omega_hat))
    alpha_vec = abs(f_dd) * (rot @ (0.5 * sys.a_perp * seq.duration))
    phi_dd = sys.omega * seq.duration
    return alpha_vec, phi_dd
