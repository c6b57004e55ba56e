import math

import numpy as np
import pytest

from qndspin.control import (
    FlipSchedule,
    concatenated_dd,
    decompose_joint,
    qnd_residual,
    solve_waiting_time,
    split_conditional,
    total_cycle_rotation,
    waiting_rotation,
)
from qndspin.hyperfine import (
    MHZ,
    DDSequence,
    SpinSystem,
    cpmg,
    exact_dd_evolution,
    extract_alpha_phi,
)
from qndspin.rotations import (
    identity_rotor,
    rotor_compose,
    rotor_exp,
    so3_from_rotor,
    su2_matrix,
)


def p2_system() -> SpinSystem:
    a_mhz = np.array([0.316 / math.sqrt(2), 0.316 / math.sqrt(2), 0.330])
    return SpinSystem(
        omega_n=-10.71 * 0.0305 * MHZ, a_plus=np.zeros(3), a_minus=-a_mhz * MHZ
    )


def rotor_diff(a, b) -> float:
    return max(abs(a.scalar - b.scalar), float(np.max(np.abs(a.vector - b.vector))))


def direction_angle(u, v) -> float:
    """Angle between directions, accurate for near-parallel vectors."""
    u = np.asarray(u) / np.linalg.norm(u)
    v = np.asarray(v) / np.linalg.norm(v)
    return math.atan2(float(np.linalg.norm(np.cross(u, v))), float(u @ v))


# -------------------------------------------------------------- waiting time


def test_waiting_rotation_free_precession():
    sys = SpinSystem.from_vectors([0.1, 0.0, 0.9], [0.2, -0.1, 0.05])
    t_r = 1.3
    out = waiting_rotation(sys, FlipSchedule(t_r))
    np.testing.assert_allclose(out, sys.wait_field * t_r, atol=1e-12)


def test_waiting_rotation_single_flip():
    sys = SpinSystem.from_vectors([0.1, 0.0, 0.9], [0.2, -0.1, 0.05])
    t_r, t_1 = 1.1, 0.4
    out = waiting_rotation(sys, FlipSchedule(t_r, np.array([t_1])))
    expected = rotor_compose(
        rotor_exp((sys.omega - sys.hyperfine / 2) * (t_r - t_1)),
        rotor_exp((sys.omega + sys.hyperfine / 2) * t_1),
    )
    assert rotor_diff(rotor_exp(out), expected) < 1e-12


def test_waiting_rotation_no_hyperfine_ignores_flips():
    sys = SpinSystem.from_vectors([0.0, 0.2, 1.1], [0.0, 0.0, 0.0])
    t_r = 0.9
    free = waiting_rotation(sys, FlipSchedule(t_r))
    flipped = waiting_rotation(sys, FlipSchedule(t_r, np.array([0.2, 0.5, 0.7])))
    np.testing.assert_allclose(free, sys.omega * t_r, atol=1e-12)
    np.testing.assert_allclose(flipped, free, atol=1e-12)


def test_flip_schedule_validation():
    with pytest.raises(ValueError):
        FlipSchedule(1.0, np.array([0.8, 0.2]))
    with pytest.raises(ValueError):
        FlipSchedule(1.0, np.array([1.2]))


# -------------------------------------------------------------- cycle rotation


def test_total_cycle_trivial_wait():
    phi_dd = np.array([0.3, -0.2, 0.4])
    total = total_cycle_rotation(np.zeros(3), phi_dd)
    assert rotor_diff(total, rotor_exp(phi_dd)) < 1e-14


def test_total_cycle_collinear_magnitudes_add():
    total = total_cycle_rotation([0.0, 0.0, 0.5], [0.0, 0.0, 0.8])
    assert rotor_diff(total, rotor_exp([0.0, 0.0, 1.3])) < 1e-14


def test_total_cycle_matches_matrix_oracle():
    rng = np.random.default_rng(77)
    for _ in range(50):
        phi_r, phi_dd = rng.normal(size=3), rng.normal(size=3)
        lhs = su2_matrix(total_cycle_rotation(phi_r, phi_dd))
        rhs = su2_matrix(rotor_exp(phi_r)) @ su2_matrix(rotor_exp(phi_dd))
        assert np.max(np.abs(lhs - rhs)) < 1e-13


# -------------------------------------------------------------- residual


def test_residual_identity_rotation():
    assert qnd_residual(identity_rotor(), [1.0, 0.0, 0.0]) == 0.0


def test_residual_parallel_rotation():
    axis = np.array([0.3, -0.5, 0.8])
    axis /= np.linalg.norm(axis)
    for mag in (0.1, 1.0, 2.9):
        assert qnd_residual(rotor_exp(mag * axis), axis) < 1e-12


def test_residual_quarter_turn():
    total = rotor_exp([0.0, 0.0, math.pi / 2])
    assert qnd_residual(total, [1.0, 0.0, 0.0]) == pytest.approx(math.pi / 2)


def test_residual_frame_invariant():
    rng = np.random.default_rng(3)
    phi = rng.normal(size=3)
    alpha_hat = rng.normal(size=3)
    alpha_hat /= np.linalg.norm(alpha_hat)
    base = qnd_residual(rotor_exp(phi), alpha_hat)
    for _ in range(10):
        frame = so3_from_rotor(rotor_exp(rng.normal(size=3)))
        rotated = qnd_residual(rotor_exp(frame @ phi), frame @ alpha_hat)
        assert rotated == pytest.approx(base, abs=1e-10)


# -------------------------------------------------------------- root search


def test_solve_trivial_dd_rotation():
    sys = SpinSystem.from_vectors([0.0, 0.1, 1.0], [0.05, 0.0, 0.02])
    alpha_hat = np.array([1.0, 0.0, 0.0])
    period = sys.wait_period
    roots = solve_waiting_time(sys, np.zeros(3), alpha_hat, (0.0, period))
    ts = [t for t, _ in roots]
    rs = [r for _, r in roots]
    assert min(rs) < 1e-9
    assert any(abs(t) < 1e-3 * period and r < 1e-9 for t, r in roots)
    assert any(abs(t - period) < 1e-3 * period and r < 1e-9 for t, r in roots)
    assert ts == sorted(ts)


def test_solve_cpmg_reaches_qnd_condition():
    sys = p2_system()
    seq = cpmg(6, sys.dd_period)
    alpha_vec, phi_dd = extract_alpha_phi(*exact_dd_evolution(sys, seq))
    roots = solve_waiting_time(
        sys, phi_dd, alpha_vec / np.linalg.norm(alpha_vec), (0.0, sys.wait_period)
    )
    assert min(r for _, r in roots) < 1e-9


def test_solve_periodic_dd_is_obstructed():
    sys = p2_system()
    seq = concatenated_dd(1, sys.dd_period, 6)
    alpha_vec, phi_dd = extract_alpha_phi(*exact_dd_evolution(sys, seq))
    roots = solve_waiting_time(
        sys, phi_dd, alpha_vec / np.linalg.norm(alpha_vec), (0.0, sys.wait_period)
    )
    best = min(r for _, r in roots)
    assert best > 1e-3  # measured 3.2e-2


def test_solve_rejects_empty_window():
    sys = p2_system()
    with pytest.raises(ValueError):
        solve_waiting_time(sys, np.zeros(3), [1.0, 0.0, 0.0], (1.0, 1.0))


# -------------------------------------------------------------- concatenation


def test_concatenated_order_one_is_periodic_dd():
    seq = concatenated_dd(1, 1.0, 2)
    np.testing.assert_allclose(seq.pulse_times, [0.25, 0.5, 0.75, 1.0])
    assert seq.duration == pytest.approx(1.0)
    assert seq.modulation_integral() == pytest.approx(0.0, abs=1e-12)


def test_concatenated_order_two_is_cpmg():
    for n in (1, 2, 5):
        seq = concatenated_dd(2, 1.3, n)
        ref = cpmg(n, 1.3)
        np.testing.assert_allclose(seq.pulse_times, ref.pulse_times)
        assert seq.duration == pytest.approx(ref.duration)


def test_concatenation_recursion_oracle():
    sys = SpinSystem.from_vectors([0.2, -0.1, 1.0], [0.3, 0.2, -0.25])
    for order in (2, 3, 4):
        u_plus, u_minus = exact_dd_evolution(sys, concatenated_dd(order, 1.3, 1))
        prev_plus, prev_minus = exact_dd_evolution(
            sys, concatenated_dd(order - 1, 1.3, 1)
        )
        # flipping the electron swaps the conditional branches of the half
        assert rotor_diff(u_plus, rotor_compose(prev_minus, prev_plus)) < 1e-13
        assert rotor_diff(u_minus, rotor_compose(prev_plus, prev_minus)) < 1e-13


def test_concatenated_duration_scaling():
    for order in (1, 2, 3, 4):
        seq = concatenated_dd(order, 2.0, 3)
        assert seq.duration == pytest.approx(3 * 2 ** (order - 1) * 1.0)


# -------------------------------------------------------------- decompositions


def test_decompose_trivial():
    c0 = np.array([0.3, -0.2, 0.5])
    c, d = decompose_joint(c0, np.zeros(3))
    np.testing.assert_allclose(c, 2 * c0, atol=1e-12)
    np.testing.assert_allclose(d, np.zeros(3), atol=1e-12)


def test_decompose_orthogonal_keeps_direction():
    c0 = np.array([0.4, 0.0, 0.0])
    d0 = np.array([0.0, 0.3, 0.0])
    c, d = decompose_joint(c0, d0)
    assert direction_angle(c, c0) < 1e-9
    assert direction_angle(d, np.cross(c0, d0)) < 1e-9


def test_decompose_closed_form_oracle():
    def sin_vec(v):
        mag = np.linalg.norm(v)
        return v / mag * math.sin(mag) if mag > 0 else v

    rng = np.random.default_rng(123)
    for _ in range(50):
        c0 = rng.normal(size=3) * 0.4
        d0 = rng.normal(size=3) * 0.4
        c, d = decompose_joint(c0, d0)
        a_plus = (c0 + d0 / 2) / 2
        a_minus = (c0 - d0 / 2) / 2
        c_pred = sin_vec(a_minus) * math.cos(np.linalg.norm(a_plus)) + sin_vec(
            a_plus
        ) * math.cos(np.linalg.norm(a_minus))
        d_pred = np.cross(sin_vec(a_minus), sin_vec(a_plus))
        assert direction_angle(c, c_pred) < 1e-9
        if np.linalg.norm(d_pred) > 1e-12:
            assert direction_angle(d, d_pred) < 1e-9
        # defining operator identity, conditional on both electron states
        for s in (1.0, -1.0):
            lhs = rotor_exp(c + s * d / 2)
            rhs = rotor_compose(rotor_exp(c0 - s * d0 / 2), rotor_exp(c0 + s * d0 / 2))
            assert rotor_diff(lhs, rhs) < 1e-12


def test_split_trivial_cases():
    c = np.array([0.5, -0.1, 0.2])
    c_tilde, d_tilde = split_conditional(c, np.zeros(3))
    np.testing.assert_allclose(c_tilde, c, atol=1e-12)
    np.testing.assert_allclose(d_tilde, np.zeros(3), atol=1e-12)

    d = np.array([0.0, 0.6, 0.0])
    c_tilde, d_tilde = split_conditional(np.zeros(3), d)
    np.testing.assert_allclose(c_tilde, np.zeros(3), atol=1e-12)
    np.testing.assert_allclose(d_tilde, d / 2, atol=1e-12)


def test_split_reconstruction_and_geometry():
    rng = np.random.default_rng(321)
    for _ in range(50):
        c = rng.normal(size=3)
        d = np.cross(c, rng.normal(size=3))
        d *= rng.uniform(0.1, 1.0) / np.linalg.norm(d)
        c_tilde, d_tilde = split_conditional(c, d)
        for s in (1.0, -1.0):
            lhs = rotor_compose(rotor_exp(c_tilde), rotor_exp(s * d_tilde))
            rhs = rotor_exp(c + s * d / 2)
            assert rotor_diff(lhs, rhs) < 1e-10
        assert direction_angle(c_tilde, c) < 1e-9
        rotated = so3_from_rotor(rotor_exp(-c_tilde / 2)) @ d
        assert direction_angle(d_tilde, rotated) < 1e-9


def test_split_rejects_non_orthogonal():
    with pytest.raises(ValueError):
        split_conditional([0.3, 0.0, 0.0], [0.3, 0.1, 0.0])


def test_decompose_then_split_matches_extraction():
    # a balanced two-interval sequence is one joint product; re-splitting it
    # must agree with the conditional-pair extraction
    sys = SpinSystem.from_vectors([0.1, -0.3, 0.9], [0.2, 0.1, -0.15])
    duration = 1.4
    seq = DDSequence(np.array([duration / 2]), duration)
    u_plus, u_minus = exact_dd_evolution(sys, seq)
    alpha_vec, phi_dd = extract_alpha_phi(u_plus, u_minus)

    c0 = sys.omega * duration / 2
    d0 = sys.hyperfine * duration / 2
    c, d = decompose_joint(c0, d0)
    c_tilde, d_tilde = split_conditional(c, d)
    np.testing.assert_allclose(c_tilde, phi_dd, atol=1e-10)
    np.testing.assert_allclose(d_tilde, alpha_vec, atol=1e-10)
