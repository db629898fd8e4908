import math

import numpy as np
import pytest

from conftest import ALL_PROFILES
from rotator_lab.chart import chart_Q, random_state_in_domain
from rotator_lab.hessian import (
    closed_det_H,
    degeneracy_scan,
    det_prefactor,
    hessian_blocks,
    inverse_A,
    lu_det,
    numeric_hessian,
    raw_velocity_hessian,
    relative_det,
    scan_csv,
    schur_det,
    sigma_ratio,
)
from rotator_lab.profiles import FUNDAMENTAL, PARTNER, degeneracy_factor, parse_profile


def test_blocks_are_symmetric(affine, example_state):
    b = hessian_blocks(affine, example_state)
    H = b.H
    assert H.shape == (5, 5)
    assert np.max(np.abs(H - H.T)) == 0.0


def test_blocks_match_oracle_at_example(affine, example_state):
    H = hessian_blocks(affine, example_state).H
    oracle = numeric_hessian(affine, example_state)
    np.testing.assert_allclose(H, oracle, rtol=0, atol=1e-7 * np.max(np.abs(oracle)))


def test_fundamental_determinant_vanishes_at_example(example_state):
    H = hessian_blocks(FUNDAMENTAL, example_state).H
    assert abs(np.linalg.det(H)) < 1e-10 * np.linalg.norm(H, 2) ** 5


@pytest.mark.parametrize("profile", ALL_PROFILES, ids=lambda p: p.spec)
def test_blocks_match_oracle_on_random_states(profile, rng):
    for _ in range(40):
        state = random_state_in_domain(profile, rng)
        H = hessian_blocks(profile, state).H
        oracle = numeric_hessian(profile, state)
        np.testing.assert_allclose(H, oracle, rtol=0, atol=1e-7 * np.max(np.abs(oracle)))


def test_quadratic_hook_recovers_exact_hessian(rng, example_state):
    A = rng.normal(size=(5, 5))
    A = A + A.T

    def quad(z):
        total = 0.0
        for i in range(5):
            for j in range(5):
                total = total + 0.5 * A[i, j] * z[i] * z[j]
        return total

    np.testing.assert_allclose(numeric_hessian(None, example_state, lagrangian=quad), A, atol=1e-13)


@pytest.mark.parametrize("profile", ALL_PROFILES, ids=lambda p: p.spec)
def test_dual_and_finite_difference_paths_agree(profile, rng):
    for _ in range(5):
        state = random_state_in_domain(profile, rng)
        dual = numeric_hessian(profile, state, "dual")
        fd = numeric_hessian(profile, state, "fd")
        np.testing.assert_allclose(fd, dual, rtol=0, atol=1e-6 * np.max(np.abs(dual)))


def test_fundamental_hessian_is_spectrally_singular(rng):
    for _ in range(20):
        state = random_state_in_domain(FUNDAMENTAL, rng)
        assert sigma_ratio(numeric_hessian(FUNDAMENTAL, state)) < 1e-9


def test_inverse_A(affine, rng):
    for _ in range(50):
        state = random_state_in_domain(affine, rng)
        A = hessian_blocks(affine, state).A
        Ainv = inverse_A(affine, state)
        np.testing.assert_allclose(A @ Ainv, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(Ainv, np.linalg.inv(A), rtol=1e-12, atol=1e-12 * np.max(np.abs(Ainv)))


def test_fundamental_A_is_invertible(rng):
    # for sqrt(1 + sqrt Q): 1 + 2Q f''/f' = -sqrt(Q) / (2 (1 + sqrt Q)), never zero for Q > 0
    for Q in np.logspace(-3, 3, 50):
        f, d1, d2 = FUNDAMENTAL.eval(Q)
        assert 1 + 2 * Q * d2 / d1 == pytest.approx(-math.sqrt(Q) / (2 * (1 + math.sqrt(Q))), rel=1e-12)
    state = random_state_in_domain(FUNDAMENTAL, rng)
    A = hessian_blocks(FUNDAMENTAL, state).A
    np.testing.assert_allclose(A @ inverse_A(FUNDAMENTAL, state), np.eye(2), atol=1e-12)


def test_closed_determinant_vanishes_for_fundamental(rng):
    for _ in range(100):
        state = random_state_in_domain(FUNDAMENTAL, rng)
        assert abs(closed_det_H(FUNDAMENTAL, state)) < 1e-12 * abs(det_prefactor(FUNDAMENTAL, state))


def test_closed_determinant_matches_lu_at_example(affine, example_state):
    det_lu = lu_det(numeric_hessian(affine, example_state))
    assert closed_det_H(affine, example_state) == pytest.approx(det_lu, rel=1e-6)
    blocks = hessian_blocks(affine, example_state)
    assert schur_det(blocks) == pytest.approx(closed_det_H(affine, example_state), rel=1e-8)


def test_lu_det_against_numpy(rng):
    for _ in range(20):
        M = rng.normal(size=(5, 5))
        assert lu_det(M) == pytest.approx(np.linalg.det(M), rel=1e-12)


@pytest.mark.parametrize("spec", ["affine:1", "affine:2.5", "deformed:0.01", "deformed:-0.01"])
def test_schur_identity_and_sign(spec, rng):
    profile = parse_profile(spec)
    for _ in range(30):
        state = random_state_in_domain(profile, rng)
        blocks = hessian_blocks(profile, state)
        closed = closed_det_H(profile, state)
        assert schur_det(blocks, inverse_A(profile, state)) == pytest.approx(closed, rel=1e-8)
        det_lu = lu_det(numeric_hessian(profile, state))
        assert det_lu == pytest.approx(closed, rel=1e-6)
        if profile.kind == "affine":
            assert np.sign(det_lu) == -np.sign(degeneracy_factor(profile, chart_Q(state)))


def test_sylvester_rank_one_determinant(rng):
    for _ in range(50):
        w = rng.normal(size=2)
        c = rng.normal()
        M = np.eye(2) + c * np.outer(w, w) / (w @ w)
        assert np.linalg.det(M) == pytest.approx(1 + c, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("profile", ALL_PROFILES, ids=lambda p: p.spec)
def test_raw_velocity_hessian_jacobian(profile, rng):
    for _ in range(10):
        state = random_state_in_domain(profile, rng)
        H = numeric_hessian(profile, state)
        raw = raw_velocity_hessian(profile, state)
        J = np.diag([1.0, math.sin(state.theta), 1.0, 1.0, 1.0])
        np.testing.assert_allclose(raw, J @ H @ J, atol=1e-12 * np.max(np.abs(raw)))
        if not profile.degenerate_family:
            assert lu_det(raw) == pytest.approx(math.sin(state.theta) ** 2 * lu_det(H), rel=1e-8)


def test_scan_fundamental_is_degenerate():
    report = degeneracy_scan(FUNDAMENTAL, 100, seed=1)
    assert report["max_rel_det"] < 1e-9
    assert len(report["rows"]) == 100


def test_scan_deformed_lifts_degeneracy():
    report = degeneracy_scan(parse_profile("deformed:1e-2"), 100, seed=0)
    # first run gave min 8.8e-8 and max 1.9e-2
    assert report["min_rel_det"] > 1e-8
    assert report["max_rel_det"] > 1e-3


def test_scan_monotone_in_deformation():
    maxima = [degeneracy_scan(parse_profile(f"deformed:{eps}"), 100, seed=0)["max_rel_det"]
              for eps in (1e-4, 1e-3, 1e-2)]
    assert maxima[0] < maxima[1] < maxima[2]


def test_scan_is_deterministic():
    a = scan_csv(degeneracy_scan(parse_profile("affine:1"), 5, seed=9))
    b = scan_csv(degeneracy_scan(parse_profile("affine:1"), 5, seed=9))
    assert a == b
    assert a.splitlines()[0] == "seed,state_id,Q,det_closed,det_numeric,rel_det,sigma_min_over_max"


def test_relative_det_is_scale_free(affine, example_state):
    H = numeric_hessian(affine, example_state)
    assert relative_det(7.0 * H) == pytest.approx(relative_det(H), rel=1e-12)


def test_partner_is_degenerate(rng):
    for _ in range(10):
        state = random_state_in_domain(PARTNER, rng)
        assert sigma_ratio(numeric_hessian(PARTNER, state)) < 1e-9
        assert chart_Q(state) < 1.0
