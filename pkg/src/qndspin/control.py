"""Engineering the inter-measurement rotation to satisfy the QND condition.

Each measurement cycle leaves the nucleus with a net rotation
``exp(-i phi . I) = exp(-i phi_R . I) exp(-i phi_dd . I)``: the rotation
``phi_dd`` accumulated during the control sequence followed by the
waiting-time rotation ``phi_R``, which is tunable through the waiting
duration and optional electron flips.  The measurement is QND when this net
rotation preserves the measured eigenstates, i.e. when ``R(phi)`` fixes the
measurement axis ``alpha_hat``.  Both textbook branches of the condition
(``|phi| = 0 mod 2 pi`` or ``phi || alpha_hat``) collapse into one scalar
objective, the angle between ``alpha_hat`` and its image under ``R(phi)``.

For sequences built by repeating an even-order concatenation (CPMG is the
order-2 case) the condition is reachable by tuning the waiting time alone;
for odd orders (e.g. the periodic sequence) the residual is generically
bounded away from zero.  ``decompose_joint`` and ``split_conditional``
implement the two product identities behind that classification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hyperfine import DDSequence, SpinSystem, extract_alpha_phi
from .rotations import (
    Rotor,
    rotor_compose,
    rotor_exp,
    rotor_log,
    rotor_log_full,
    so3_from_rotor,
)

__all__ = [
    "FlipSchedule",
    "waiting_rotation",
    "total_cycle_rotation",
    "qnd_residual",
    "solve_waiting_time",
    "concatenated_dd",
    "decompose_joint",
    "split_conditional",
]


@dataclass
class FlipSchedule:
    """Waiting duration plus electron pi-flip times inside ``[0, t_r]``."""

    t_r: float
    flip_times: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.flip_times = np.asarray(self.flip_times, dtype=float)
        if self.flip_times.size:
            if np.any(np.diff(self.flip_times) < 0.0):
                raise ValueError("flip times must be sorted")
            if self.flip_times[0] < 0.0 or self.flip_times[-1] > self.t_r:
                raise ValueError("flip times must lie within [0, t_r]")


def waiting_rotation(sys: SpinSystem, sched: FlipSchedule) -> np.ndarray:
    """Canonical rotation vector generated during the waiting time.

    The electron starts in ``|+z>`` (field ``omega + A/2``) and toggles to
    ``omega - A/2`` at every flip.  With no flips this is the single rotation
    ``(omega + A/2) t_r``, exact as a vector while its angle stays below pi
    (beyond that the canonical representative of the same rotation is
    returned).
    """
    bounds = np.concatenate(([0.0], sched.flip_times, [sched.t_r]))
    half_a = 0.5 * sys.hyperfine
    total = Rotor(1.0, np.zeros(3))
    for k in range(bounds.size - 1):
        dt = bounds[k + 1] - bounds[k]
        if dt == 0.0:
            continue
        sign = 1.0 if k % 2 == 0 else -1.0
        total = rotor_compose(rotor_exp((sys.omega + sign * half_a) * dt), total)
    return rotor_log(total)


def total_cycle_rotation(phi_r, phi_dd) -> Rotor:
    """Rotor of the per-cycle rotation ``exp(-i phi_R . I) exp(-i phi_dd . I)``."""
    return rotor_compose(rotor_exp(phi_r), rotor_exp(phi_dd))


def qnd_residual(total: Rotor, alpha_hat) -> float:
    """Angle between ``alpha_hat`` and its image under the cycle rotation.

    Zero exactly when the cycle rotation commutes with the measured
    observable.  Evaluated through the chord length ``2 asin(|R a - a| / 2)``,
    which equals ``arccos(a . R a)`` but stays accurate down to ~1e-15 rad.
    """
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    moved = so3_from_rotor(total) @ alpha_hat
    chord = 0.5 * float(np.linalg.norm(moved - alpha_hat))
    return 2.0 * math.asin(min(chord, 1.0))


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_minimize(f, a: float, b: float, xatol: float, stop_below: float):
    """Golden-section minimum of ``f`` on ``[a, b]`` to absolute ``xatol``.

    The residual is V-shaped (not parabolic) at a root, so golden section is
    used instead of parabolic-interpolation minimizers, whose practical floor
    of ``sqrt(eps) * |x|`` would limit waiting times near microseconds to
    ~1e-14 s.  Stops early once the interval hits the float spacing of the
    abscissa.
    """
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    floor = 4.0 * np.spacing(max(abs(a), abs(b), 1.0e-30))
    for _ in range(200):
        if (b - a) <= max(xatol, floor) or min(fc, fd) <= stop_below:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def solve_waiting_time(
    sys: SpinSystem,
    phi_dd,
    alpha_hat,
    window: tuple[float, float],
    n_grid: int = 2048,
    residual_tol: float = 1e-9,
) -> list[tuple[float, float]]:
    """Waiting times minimizing the QND residual under free precession.

    Scans ``t_r`` over ``window`` on a dense grid, then refines every local
    minimum of the residual by golden-section search.  The waiting-time
    bracket is shrunk until it resolves residual changes of
    ``0.01 * residual_tol`` (given the precession rate) or until the residual
    drops well below ``residual_tol``.  Returns the refined ``(t_r,
    residual)`` pairs in increasing ``t_r``; residuals need not reach zero
    (odd-order sequences have a nonzero infimum).
    """
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError("search window must be non-empty")
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    alpha_hat = alpha_hat / np.linalg.norm(alpha_hat)
    wait = sys.wait_field
    # time step at which the residual can still change by 0.01 * residual_tol
    xatol = 0.01 * residual_tol / float(np.linalg.norm(wait))
    r_dd = so3_from_rotor(rotor_exp(phi_dd))
    moved0 = r_dd @ alpha_hat

    def residual(t_r: float) -> float:
        moved = so3_from_rotor(rotor_exp(wait * t_r)) @ moved0
        chord = 0.5 * float(np.linalg.norm(moved - alpha_hat))
        return 2.0 * math.asin(min(chord, 1.0))

    grid = np.linspace(lo, hi, n_grid)
    values = np.array([residual(t) for t in grid])
    minima: list[tuple[float, float]] = []
    for i in range(n_grid):
        left = values[i - 1] if i > 0 else math.inf
        right = values[i + 1] if i < n_grid - 1 else math.inf
        if values[i] <= left and values[i] <= right:
            a = grid[max(i - 1, 0)]
            b = grid[min(i + 1, n_grid - 1)]
            if a == b:
                minima.append((grid[i], values[i]))
                continue
            t_best, v_best = _golden_minimize(
                residual, a, b, xatol=xatol, stop_below=0.01 * residual_tol
            )
            if values[i] < v_best:
                t_best, v_best = float(grid[i]), float(values[i])
            minima.append((t_best, v_best))
    # merge duplicates from flat neighborhoods
    minima.sort()
    spacing = (hi - lo) / n_grid
    merged: list[tuple[float, float]] = []
    for t, v in minima:
        if merged and abs(t - merged[-1][0]) < 0.5 * spacing:
            if v < merged[-1][1]:
                merged[-1] = (t, v)
        else:
            merged.append((t, v))
    return merged


def _sign_pattern(order: int) -> np.ndarray:
    pattern = np.array([1.0])
    for _ in range(order):
        pattern = np.concatenate((pattern, -pattern))
    return pattern


def concatenated_dd(order: int, base_tau: float, n_repeats: int = 1) -> DDSequence:
    """Repetitions of the order-``l`` concatenated sequence.

    The recursion doubles the sign pattern, ``P_l = P_{l-1} ++ (-P_{l-1})``,
    starting from a free interval of ``base_tau / 4``.  Order 1 is the
    periodic sequence (tau/4 - pi - tau/4 - pi)^N, order 2 reproduces the
    CPMG pulse pattern.  Odd orders end inverted, so a trailing pi pulse at
    the period boundary restores the modulation for the next repetition.
    """
    if order < 1:
        raise ValueError("concatenation order must be >= 1")
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    pattern = np.tile(_sign_pattern(order), n_repeats)
    dt = base_tau / 4.0
    duration = pattern.size * dt
    boundaries = np.arange(1, pattern.size) * dt
    pulses = boundaries[pattern[1:] != pattern[:-1]]
    if pattern[-1] < 0:
        pulses = np.concatenate((pulses, [duration]))
    return DDSequence(pulses, duration)


def decompose_joint(c0, d0) -> tuple[np.ndarray, np.ndarray]:
    """Combine two conditional rotations into one:  solves

    ``exp(-i(c + S_z d) . I) = exp(-i(c0 - S_z d0) . I) exp(-i(c0 + S_z d0) . I)``

    by forming both conditional products and re-splitting them.  ``c`` lies
    in the plane of ``c0`` and ``d0`` while ``d`` is parallel to
    ``c0 x d0``.
    """
    c0 = np.asarray(c0, dtype=float)
    d0 = np.asarray(d0, dtype=float)
    g = {}
    for s in (1.0, -1.0):
        product = rotor_compose(
            rotor_exp(c0 - s * d0 / 2.0), rotor_exp(c0 + s * d0 / 2.0)
        )
        g[s] = rotor_log_full(product)
    c = 0.5 * (g[1.0] + g[-1.0])
    d = g[1.0] - g[-1.0]
    return c, d


def split_conditional(c, d, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Split a joint rotation into common and conditional parts:  solves

    ``exp(-i c_tilde . I) exp(-i 2 S_z d_tilde . I) = exp(-i(c + S_z d) . I)``

    for orthogonal ``c`` and ``d``.  ``c_tilde`` is parallel to ``c`` and
    ``d_tilde`` to ``R(-c_tilde / 2) d``.
    """
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    nc, nd = np.linalg.norm(c), np.linalg.norm(d)
    if nc > 0.0 and nd > 0.0 and abs(float(c @ d)) > tol * nc * nd:
        raise ValueError("split_conditional requires c perpendicular to d")
    u_plus = rotor_exp(c + d / 2.0)
    u_minus = rotor_exp(c - d / 2.0)
    d_tilde, c_tilde = extract_alpha_phi(u_plus, u_minus)
    return c_tilde, d_tilde
