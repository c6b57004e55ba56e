"""NV-center instantiation: presets, room-temperature readout, 2D scans.

A nitrogen-vacancy electron spin-1 restricted to ``m_S = 0`` (``|+z>``) and
``m_S = -1`` (``|-z>``) couples to a target 13C nuclear spin-1/2.  The
``m_S = 0`` branch carries no hyperfine field, so ``a_plus = 0`` and
``a_minus = -A``, giving the shifted Larmor vector ``omega = omega_n e_z -
A/2`` with ``omega_n = gamma_n B``.  During the waiting time the electron is
re-initialized into ``m_S = 0`` and the nucleus precesses freely about
``e_z`` at the bare ``omega_n`` (equivalently, ``omega + A/2``).

Built-in parameter sets (13C hyperfine vector
``(0.316/sqrt(2), 0.316/sqrt(2), 0.330) MHz``):

    P1:  6 CPMG periods, B = 691 G   (T_R = 1351 ns, T = 1088 ns)
    P2:  6 CPMG periods, B = 305 G   (T_R = 3061 ns, T = 1936 ns)
    P3:  8 CPMG periods, B = 305 G   (T_R = 3061 ns, T = 1936 ns)

Room-temperature fluorescence readout detects zero/nonzero photons with mean
photon numbers ``n_plus`` / ``n_minus`` per shot, giving electron readout
fidelities ``p_plus = n_plus`` and ``p_minus = 1 - n_minus``.

``scan_2d`` maps the lifetime ``N_L`` of the measured eigenstate over the
CPMG duration ``t_dd = N_dd tau`` and the waiting time ``t_r``; together
with the critical count ``N_c = 2 / D**2`` this reproduces the structure of
the stability maps: a ridge of diverging ``N_L`` along the solutions of the
QND condition whose usable width in ``t_r`` is the timing tolerance.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .control import solve_waiting_time
from .hyperfine import MHZ, SpinSystem, cpmg, exact_dd_evolution, extract_alpha_phi
from .measurement import MeasurementSetting, ReadoutModel, binary_stats
from .rotations import rotor_exp, so3_from_rotor
from .stability import dephasing_map

__all__ = [
    "C13_HYPERFINE_MHZ",
    "PRESETS",
    "NvParams",
    "nv_system",
    "room_temp_readout",
    "photon_stats",
    "ScanResult",
    "default_tau_grid",
    "default_tr_grid",
    "scan_2d",
    "tolerance_profile",
]

C13_HYPERFINE_MHZ = (0.316 / math.sqrt(2.0), 0.316 / math.sqrt(2.0), 0.330)


@dataclass(frozen=True)
class NvParams:
    """Field, gyromagnetic ratio, hyperfine vector and CPMG period count."""

    b_gauss: float
    n_dd: int
    gamma_n_mhz_per_t: float = -10.71
    a_mhz: tuple = C13_HYPERFINE_MHZ

    def __post_init__(self):
        if self.b_gauss <= 0.0:
            raise ValueError("magnetic field must be positive")
        if self.n_dd < 1:
            raise ValueError("n_dd must be >= 1")

    @property
    def omega_n(self) -> float:
        """Bare 13C Zeeman frequency (rad/s, signed)."""
        return self.gamma_n_mhz_per_t * (self.b_gauss * 1e-4) * MHZ

    @property
    def larmor_period_wait(self) -> float:
        """T_R = 2 pi / |omega_n| (s)."""
        return 2.0 * math.pi / abs(self.omega_n)

    @property
    def larmor_period_dd(self) -> float:
        """T = 2 pi / |omega| (s)."""
        return nv_system(self).dd_period


PRESETS = {
    "P1": NvParams(b_gauss=691.0, n_dd=6),
    "P2": NvParams(b_gauss=305.0, n_dd=6),
    "P3": NvParams(b_gauss=305.0, n_dd=8),
}


def nv_system(params: NvParams) -> SpinSystem:
    """Electron-nuclear system with ``a_plus = 0`` for the ``m_S = 0`` branch."""
    return SpinSystem(
        omega_n=params.omega_n,
        a_plus=np.zeros(3),
        a_minus=-np.asarray(params.a_mhz, dtype=float) * MHZ,
    )


def room_temp_readout(n_plus: float, n_minus: float) -> ReadoutModel:
    """Readout fidelities of zero/nonzero photon detection.

    ``p_plus = n_plus`` (a photon seen when bright) and ``p_minus = 1 -
    n_minus`` (no photon when dark), for mean photon numbers well below one.
    """
    if not 0.0 <= n_minus <= n_plus <= 1.0:
        raise ValueError("photon numbers must satisfy 0 <= n_minus <= n_plus <= 1")
    return ReadoutModel(p_plus=n_plus, p_minus=1.0 - n_minus)


def photon_stats(readout: ReadoutModel) -> tuple[float, float]:
    """Invert the photon mapping: mean photon number and contrast."""
    n_plus = readout.p_plus
    n_minus = 1.0 - readout.p_minus
    n_bar = 0.5 * (n_plus + n_minus)
    if n_bar == 0.0:
        return 0.0, 0.0
    return n_bar, (n_plus - n_minus) / (n_plus + n_minus)


def default_tau_grid(params: NvParams, n_points: int = 256, rel_span=(0.95, 1.05)):
    """CPMG periods around the resonance ``tau = T``."""
    period = params.larmor_period_dd
    return np.linspace(rel_span[0] * period, rel_span[1] * period, n_points)


def default_tr_grid(params: NvParams, n_points: int = 256):
    """Waiting times over one bare Larmor period ``[-T_R/2, T_R/2]``."""
    half = 0.5 * params.larmor_period_wait
    return np.linspace(-half, half, n_points)


@dataclass
class ScanResult:
    """Grid scan of residual, strength and lifetime over (t_dd, t_r)."""

    params: NvParams
    readout: ReadoutModel
    phi: float
    n_max: int
    tau_grid: np.ndarray
    tr_grid: np.ndarray
    alpha_vecs: np.ndarray  # (n_tau, 3)
    phi_dds: np.ndarray  # (n_tau, 3)
    strengths: np.ndarray  # (n_tau,)
    n_crit: np.ndarray  # (n_tau,), inf where D = 0
    residuals: np.ndarray  # (n_tau, n_tr)
    lifetimes: np.ndarray  # (n_tau, n_tr), inf = no crossing within n_max

    @property
    def t_dd_grid(self) -> np.ndarray:
        return self.params.n_dd * self.tau_grid

    @property
    def alpha_mags(self) -> np.ndarray:
        return np.linalg.norm(self.alpha_vecs, axis=1)

    def rows(self):
        """Yield (t_dd, t_r, alpha_mag, residual, strength, n_c, n_l) in grid order."""
        mags = self.alpha_mags
        for i, t_dd in enumerate(self.t_dd_grid):
            for j, t_r in enumerate(self.tr_grid):
                yield (
                    t_dd,
                    t_r,
                    mags[i],
                    self.residuals[i, j],
                    self.strengths[i],
                    self.n_crit[i],
                    self.lifetimes[i, j],
                )


def _wait_rotation_matrices(omega_n: float, tr_grid: np.ndarray) -> np.ndarray:
    """Stack of rotations about e_z by the signed angles ``omega_n * t_r``."""
    angles = omega_n * tr_grid
    cos_a, sin_a = np.cos(angles), np.sin(angles)
    mats = np.zeros((tr_grid.size, 3, 3))
    mats[:, 0, 0] = cos_a
    mats[:, 0, 1] = -sin_a
    mats[:, 1, 0] = sin_a
    mats[:, 1, 1] = cos_a
    mats[:, 2, 2] = 1.0
    return mats


def _batched_lifetimes(maps: np.ndarray, axes: np.ndarray, n_max: int) -> np.ndarray:
    """First ``1/e`` crossing of ``axis . G^N axis`` per point, ``inf`` if none.

    Iterates all points together, dropping each one at its first crossing, so
    the long tail of the loop only carries the near-QND points.
    """
    threshold = 1.0 / math.e
    n_points = maps.shape[0]
    lifetimes = np.full(n_points, math.inf)
    index = np.arange(n_points)
    states = axes.copy()
    for step in range(1, n_max + 1):
        states = np.einsum("pij,pj->pi", maps, states)
        crossed = np.einsum("pi,pi->p", axes, states) <= threshold
        if crossed.any():
            lifetimes[index[crossed]] = step
            keep = ~crossed
            index, states = index[keep], states[keep]
            maps, axes = maps[keep], axes[keep]
            if index.size == 0:
                break
    return lifetimes


def _row_geometry(sys: SpinSystem, params: NvParams, tau: float):
    alpha_vec, phi_dd = extract_alpha_phi(*exact_dd_evolution(sys, cpmg(params.n_dd, tau)))
    return alpha_vec, phi_dd


def scan_2d(
    params: NvParams,
    tau_grid,
    tr_grid,
    readout: ReadoutModel,
    n_max: int = 1_000_000,
    phi: float = math.pi / 2,
    threads: int = 1,
) -> ScanResult:
    """Map residual, strength and lifetime over the (t_dd, t_r) grid.

    Per CPMG duration: exact conditional evolution, extraction of the
    measurement vector and the sequence rotation, strength from the readout
    model.  Per waiting time: total cycle rotation, QND residual, and the
    lifetime of the measured eigenstate under the full per-cycle map
    ``R(phi_total) M``.  Rows are computed independently (optionally on a
    thread pool) and assembled by index, so the output is deterministic.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    tr_grid = np.asarray(tr_grid, dtype=float)
    if tau_grid.size == 0 or tr_grid.size == 0:
        raise ValueError("scan grids must be non-empty")
    sys = nv_system(params)
    n_tau, n_tr = tau_grid.size, tr_grid.size

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            geom = list(pool.map(lambda t: _row_geometry(sys, params, t), tau_grid))
    else:
        geom = [_row_geometry(sys, params, tau) for tau in tau_grid]
    alpha_vecs = np.array([g[0] for g in geom])
    phi_dds = np.array([g[1] for g in geom])

    strengths = np.empty(n_tau)
    n_crit = np.empty(n_tau)
    for i in range(n_tau):
        stats = binary_stats(MeasurementSetting(alpha_vecs[i], phi, readout))
        strengths[i] = stats.strength_d
        if stats.strength_d == 0.0:
            n_crit[i] = math.inf
        elif stats.projective:
            n_crit[i] = 1.0
        else:
            n_crit[i] = math.ceil(2.0 / stats.strength_d**2)

    wait_mats = _wait_rotation_matrices(params.omega_n, tr_grid)
    residuals = np.empty((n_tau, n_tr))
    all_maps = np.empty((n_tau * n_tr, 3, 3))
    all_axes = np.empty((n_tau * n_tr, 3))
    for i in range(n_tau):
        mag = np.linalg.norm(alpha_vecs[i])
        alpha_hat = alpha_vecs[i] / mag if mag > 0 else np.array([0.0, 0.0, 1.0])
        r_dd = so3_from_rotor(rotor_exp(phi_dds[i]))
        totals = np.einsum("pij,jk->pik", wait_mats, r_dd)
        moved = np.einsum("pij,j->pi", totals, alpha_hat)
        chord = 0.5 * np.linalg.norm(moved - alpha_hat, axis=1)
        residuals[i] = 2.0 * np.arcsin(np.clip(chord, 0.0, 1.0))
        deph = dephasing_map(alpha_vecs[i])
        sl = slice(i * n_tr, (i + 1) * n_tr)
        all_maps[sl] = np.einsum("pij,jk->pik", totals, deph)
        all_axes[sl] = alpha_hat

    lifetimes = _batched_lifetimes(all_maps, all_axes, n_max).reshape(n_tau, n_tr)
    return ScanResult(
        params=params,
        readout=readout,
        phi=phi,
        n_max=n_max,
        tau_grid=tau_grid,
        tr_grid=tr_grid,
        alpha_vecs=alpha_vecs,
        phi_dds=phi_dds,
        strengths=strengths,
        n_crit=n_crit,
        residuals=residuals,
        lifetimes=lifetimes,
    )


def _lifetime_reaches(scan: ScanResult, row: int, t_r: float, target: float) -> bool:
    """Whether ``N_L >= target`` at an off-grid waiting time of one row."""
    if math.isinf(target):
        return False
    sys_omega_n = scan.params.omega_n
    alpha_vec = scan.alpha_vecs[row]
    mag = np.linalg.norm(alpha_vec)
    alpha_hat = alpha_vec / mag if mag > 0 else np.array([0.0, 0.0, 1.0])
    angle = sys_omega_n * t_r
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    wait = np.array([[cos_a, -sin_a, 0.0], [sin_a, cos_a, 0.0], [0.0, 0.0, 1.0]])
    step_map = wait @ so3_from_rotor(rotor_exp(scan.phi_dds[row])) @ dephasing_map(alpha_vec)
    threshold = 1.0 / math.e
    state = alpha_hat.copy()
    horizon = min(int(target) - 1, scan.n_max)
    for _ in range(horizon):
        state = step_map @ state
        if float(alpha_hat @ state) <= threshold:
            return False
    return True


def _refine_edge(scan, row, target, t_inside, t_outside, tol):
    """Bisect the qualifying-region boundary between an inside/outside pair."""
    for _ in range(200):
        if abs(t_outside - t_inside) <= tol:
            break
        mid = 0.5 * (t_inside + t_outside)
        if _lifetime_reaches(scan, row, mid, target):
            t_inside = mid
        else:
            t_outside = mid
    return 0.5 * (t_inside + t_outside)


def tolerance_profile(scan: ScanResult) -> np.ndarray:
    """Per ``t_dd``: measured and worst-case waiting-time tolerances.

    The measured tolerance is the total width of ``{t_r : N_L >= N_c}``:
    qualifying grid runs are merged with intervals grown around the QND-root
    waiting times (which sub-grid-width regions would otherwise miss), and
    every boundary is refined by bisection.  The worst-case estimate is
    ``(T_R / pi) sqrt(n_bar) C sin^2(alpha / 2)`` from the systematic-error
    tolerance and the room-temperature strength.

    Returns an array with columns ``(t_dd, dtr_measured, dtr_worst_case,
    n_c)``.
    """
    n_bar, contrast = photon_stats(scan.readout)
    t_r_period = scan.params.larmor_period_wait
    tr = scan.tr_grid
    spacing = (tr[-1] - tr[0]) / max(tr.size - 1, 1)
    tol = 1e-4 * spacing
    window = (tr[0], tr[-1])
    sys = nv_system(scan.params)
    mags = scan.alpha_mags
    out = np.empty((scan.tau_grid.size, 4))

    for i in range(scan.tau_grid.size):
        target = scan.n_crit[i]
        worst = (
            (t_r_period / math.pi)
            * math.sqrt(n_bar)
            * contrast
            * math.sin(mags[i] / 2.0) ** 2
        )
        seeds: list[tuple[float, float]] = []
        if math.isfinite(target):
            qual = scan.lifetimes[i] >= target
            # maximal runs of qualifying grid points
            j = 0
            while j < tr.size:
                if qual[j]:
                    k = j
                    while k + 1 < tr.size and qual[k + 1]:
                        k += 1
                    seeds.append((tr[j], tr[k]))
                    j = k + 1
                else:
                    j += 1
            # QND roots seed regions narrower than the grid spacing
            roots = solve_waiting_time(
                sys, scan.phi_dds[i], scan.alpha_vecs[i], window, n_grid=1024
            )
            for t_root, _ in roots:
                if any(lo - spacing <= t_root <= hi + spacing for lo, hi in seeds):
                    continue
                if _lifetime_reaches(scan, i, t_root, target):
                    seeds.append((t_root, t_root))
            seeds.sort()

        intervals: list[tuple[float, float]] = []
        for lo, hi in seeds:
            left = _grow_edge(scan, i, target, lo, -spacing, window, tol)
            right = _grow_edge(scan, i, target, hi, +spacing, window, tol)
            intervals.append((left, right))
        merged: list[list[float]] = []
        for lo, hi in sorted(intervals):
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        measured = sum(hi - lo for lo, hi in merged)
        out[i] = (scan.t_dd_grid[i], measured, worst, target)
    return out


def _grow_edge(scan, row, target, start, step, window, tol):
    """Walk outward from a qualifying point until the predicate fails, then bisect."""
    lo, hi = window
    inside = start
    outside = None
    probe = start + step
    for _ in range(64):
        if probe < lo or probe > hi:
            boundary = lo if step < 0 else hi
            if _lifetime_reaches(scan, row, boundary, target):
                return boundary
            outside = boundary
            break
        if _lifetime_reaches(scan, row, probe, target):
            inside = probe
            probe = probe + step
        else:
            outside = probe
            break
    if outside is None:
        return inside
    return _refine_edge(scan, row, target, inside, outside, tol)
