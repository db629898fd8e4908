import json
import math

import numpy as np
import pytest

from conftest import ALL_PROFILES
from rotator_lab.chart import (
    ChartState,
    angular_momentum,
    canonical_momenta,
    chart_lagrangian,
    chart_Q,
    chart_to_covariant,
    covariant_lagrangian,
    covariant_momenta,
    covariant_Q,
    hyperbolic_angle,
    random_state,
    random_state_in_domain,
    state_from_covariant,
)
from rotator_lab.errors import DegenerateRotation, InvariantViolation
from rotator_lab.exact import ExactSolution, PhaseProfile, exact_eval
from rotator_lab.minkowski import build_solution_frame, minkowski_dot, pauli_lubanski
from rotator_lab.profiles import FUNDAMENTAL, casimir_mass_sq, casimir_spin_sq, parse_profile


def covariant_Q_oracle(state, ell=1.0, h=1e-6):
    """Q from four-vectors, with kdot from differencing N along the angles."""
    def N(s):
        th = state.theta + state.theta_dot * s
        ph = state.phi_sph + state.phi_sph_dot * s
        return np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])

    k = np.array([1.0, *N(0.0)])
    kdot = np.array([0.0, *((N(h) - N(-h)) / (2 * h))])
    xdot = ell * np.array([1.0, *state.V])
    return -ell**2 * minkowski_dot(kdot, kdot) / minkowski_dot(k, xdot) ** 2


def test_chart_Q_examples(example_state):
    assert chart_Q(example_state) == pytest.approx(0.13 / 0.81, rel=1e-15)
    assert covariant_Q_oracle(example_state) == pytest.approx(0.13 / 0.81, rel=1e-9)
    still = ChartState(theta=1.0, phi_sph=0.3, V=[0.2, -0.4, 0.1], theta_dot=0.0, phi_sph_dot=0.0)
    assert chart_Q(still) == 0.0
    rest = ChartState(theta=1.0, phi_sph=0.3, V=[0, 0, 0], theta_dot=1.0, phi_sph_dot=0.0)
    assert chart_Q(rest) == 1.0


def test_chart_and_covariant_Q_agree(rng):
    for _ in range(1000):
        state = random_state(rng)
        kin = chart_to_covariant(state, ell=0.8)
        assert minkowski_dot(kin.k, kin.k) == pytest.approx(0.0, abs=1e-15)
        assert kin.xdot[0] == 0.8
        assert covariant_Q(kin.xdot, kin.k, kin.kdot, 0.8) == pytest.approx(chart_Q(state), rel=1e-12)


def test_chart_to_covariant_direction():
    state = ChartState(theta=math.pi / 2, phi_sph=0.0, V=[0, 0, 0], theta_dot=0.1, phi_sph_dot=0.2)
    np.testing.assert_allclose(chart_to_covariant(state).k, [1, 1, 0, 0], atol=1e-16)


def test_chart_lagrangian_examples(example_state):
    assert chart_lagrangian(FUNDAMENTAL, ChartState(theta=1.0, phi_sph=0.0, V=[0, 0, 0], theta_dot=1.0,
                                                    phi_sph_dot=0.0)) == pytest.approx(math.sqrt(2), rel=1e-15)
    root = math.sqrt(1 - 0.01)
    Q = 0.13 / 0.81
    assert chart_lagrangian(FUNDAMENTAL, example_state) == pytest.approx(root * math.sqrt(1 + math.sqrt(Q)), rel=1e-14)
    assert chart_lagrangian(FUNDAMENTAL, example_state) == pytest.approx(1.177544, abs=1e-6)
    assert chart_lagrangian(parse_profile("affine:1"), example_state) == pytest.approx(1.154677, abs=1e-6)
    # chart Lagrangian is the covariant one divided by -m ell
    kin = chart_to_covariant(example_state, ell=2.0)
    L = covariant_lagrangian(FUNDAMENTAL, kin.xdot, kin.k, kin.kdot, m=3.0, ell=2.0)
    assert L == pytest.approx(-6.0 * chart_lagrangian(FUNDAMENTAL, example_state), rel=1e-14)


def test_invariants_are_enforced():
    with pytest.raises(InvariantViolation):
        ChartState(theta=1.0, phi_sph=0.0, V=[0.8, 0.7, 0.0], theta_dot=0.1, phi_sph_dot=0.1)
    with pytest.raises(InvariantViolation):
        ChartState(theta=1e-8, phi_sph=0.0, V=[0, 0, 0], theta_dot=0.1, phi_sph_dot=0.1)


def test_json_round_trip(example_state):
    data = json.loads(json.dumps(example_state.to_dict()))
    back = ChartState.from_dict(data)
    np.testing.assert_array_equal(back.qdot, example_state.qdot)
    np.testing.assert_array_equal(back.q, example_state.q)
    minimal = {k: data[k] for k in ("theta", "phi_sph", "V", "theta_dot", "phi_sph_dot")}
    assert np.array_equal(ChartState.from_dict(minimal).X, np.zeros(3))


def test_state_from_covariant_inverts_chart(rng):
    for _ in range(50):
        state = random_state(rng)
        kin = chart_to_covariant(state, ell=1.3, t=0.4)
        # arbitrary reparametrization and rescaling of k
        lam, alpha, alphadot = 2.5, 0.7, 0.3
        back, tc = state_from_covariant(kin.x, lam * kin.xdot, alpha * kin.k,
                                        lam * (alpha * kin.kdot + alphadot * kin.k), ell=1.3)
        assert tc == pytest.approx(0.4)
        np.testing.assert_allclose(back.qdot, state.qdot, atol=1e-12)
        np.testing.assert_allclose(back.N, state.N, atol=1e-14)


def fd_momentum(profile, state, m=1.0, ell=1.0, h=1e-6):
    """p^i = -m dLc/dV^i from the chart Lagrangian; p^0 from the covariant one."""
    p = np.empty(4)
    for i in range(3):
        dV = np.zeros(3)
        dV[i] = h
        plus = ChartState(theta=state.theta, phi_sph=state.phi_sph, V=state.V + dV,
                          theta_dot=state.theta_dot, phi_sph_dot=state.phi_sph_dot)
        minus = ChartState(theta=state.theta, phi_sph=state.phi_sph, V=state.V - dV,
                           theta_dot=state.theta_dot, phi_sph_dot=state.phi_sph_dot)
        p[i + 1] = -m * (chart_lagrangian(profile, plus) - chart_lagrangian(profile, minus)) / (2 * h)
    kin = chart_to_covariant(state, ell)
    e0 = np.array([h * ell, 0, 0, 0])
    Lp = covariant_lagrangian(profile, kin.xdot + e0, kin.k, kin.kdot, m, ell)
    Lm = covariant_lagrangian(profile, kin.xdot - e0, kin.k, kin.kdot, m, ell)
    p[0] = -(Lp - Lm) / (2 * h * ell)
    return p


def test_affine_mass_casimir_from_finite_difference_momenta():
    affine = parse_profile("affine:1")
    V = np.array([0.1, 0.2, 0.0])
    theta, phi = 1.1, 0.4
    N = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
    wnorm = 0.5 * (1 - N @ V)
    state = ChartState(theta=theta, phi_sph=phi, V=V, theta_dot=0.6 * wnorm, phi_sph_dot=0.8 * wnorm / math.sin(theta))
    assert chart_Q(state) == pytest.approx(0.25, rel=1e-14)
    p = fd_momentum(affine, state)
    assert minkowski_dot(p, p) == pytest.approx(5 / 16, rel=1e-7)


@pytest.mark.parametrize("profile", ALL_PROFILES, ids=lambda p: p.spec)
def test_closed_form_momentum_matches_finite_differences(profile, rng):
    for _ in range(10):
        state = random_state_in_domain(profile, rng)
        p, _ = canonical_momenta(profile, state, m=1.0, ell=1.0)
        np.testing.assert_allclose(p, fd_momentum(profile, state), rtol=0, atol=1e-7 * np.max(np.abs(p)))


def test_fundamental_momentum_is_on_shell(rng):
    m = 1.9
    for _ in range(200):
        state = random_state(rng)
        p, _ = canonical_momenta(FUNDAMENTAL, state, m=m, ell=0.6)
        assert minkowski_dot(p, p) == pytest.approx(m * m, rel=1e-10)


def test_hyperbolic_angle_at_Q_one():
    m = 1.0
    state = ChartState(theta=1.2, phi_sph=0.1, V=[0, 0, 0], theta_dot=0.6, phi_sph_dot=0.8 / math.sin(1.2))
    assert chart_Q(state) == pytest.approx(1.0)
    p, _ = canonical_momenta(FUNDAMENTAL, state, m=m)
    u = chart_to_covariant(state).xdot
    u = u / math.sqrt(minkowski_dot(u, u))
    psi = hyperbolic_angle(1.0)
    assert psi == pytest.approx(0.5 * math.log(2))
    assert minkowski_dot(p, u) == pytest.approx(m * math.cosh(psi), rel=1e-14)


def test_fundamental_needs_rotation():
    state = ChartState(theta=1.0, phi_sph=0.0, V=[0.1, 0, 0], theta_dot=0.0, phi_sph_dot=0.0)
    with pytest.raises(DegenerateRotation):
        canonical_momenta(FUNDAMENTAL, state)


@pytest.mark.parametrize("profile", ALL_PROFILES, ids=lambda p: p.spec)
def test_casimirs_match_closed_forms_at_every_state(profile, rng):
    m, ell = 1.4, 0.9
    for _ in range(50):
        state = random_state_in_domain(profile, rng)
        kin = chart_to_covariant(state, ell, t=rng.normal())
        kin_x = kin.x + rng.normal(size=4)
        p, pi = canonical_momenta(profile, state, m, ell)
        Q = chart_Q(state)
        assert minkowski_dot(p, p) == pytest.approx(casimir_mass_sq(profile, Q, m), rel=1e-8, abs=1e-12)
        W = pauli_lubanski(angular_momentum(kin_x, p, kin.k, pi), p)
        assert minkowski_dot(W, W) == pytest.approx(casimir_spin_sq(profile, Q, m, ell), rel=1e-6)


def test_angular_momentum_basics(rng):
    x, p, k, pi = rng.normal(size=(4, 4))
    M = angular_momentum(x, p, k, pi).matrix
    np.testing.assert_array_equal(M + M.T, np.zeros((4, 4)))
    zero = angular_momentum(np.zeros(4), p, k, 2.0 * k).matrix
    np.testing.assert_allclose(zero, np.zeros((4, 4)), atol=1e-15)


def test_angular_momentum_is_conserved_on_exact_solution():
    sol = ExactSolution(build_solution_frame(seed=2), PhaseProfile.modulated(1.0, 0.3, 2.0))
    Ms = []
    for t in (0.0, 1.0, 2.0):
        x, xdot, k, kdot = exact_eval(sol, t)
        p, pi = covariant_momenta(FUNDAMENTAL, xdot, k, kdot)
        Ms.append(angular_momentum(x, p, k, pi).matrix)
    np.testing.assert_allclose(Ms[1], Ms[0], atol=1e-9)
    np.testing.assert_allclose(Ms[2], Ms[0], atol=1e-9)
