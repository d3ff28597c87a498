import numpy as np
import pytest

from finsler_hmx.fields import Poly
from finsler_hmx.finsler import connections, euclidean
from finsler_hmx.hvector import (
    ChangeDomainError,
    HVectorField,
    PoleError,
    SearchSample,
    domain_guard,
    ef_tensors,
    gradient_field,
    h_vector_residuals,
    samples_from_space,
    search_h_vector,
    weak_h_vector,
)
from finsler_hmx.jets import PointDirection, fd_oracle
from finsler_hmx.verify.fixtures import mock_fixture

from helpers import P, random_points, setup_randers

P34 = PointDirection((0.0, 0.0), (3.0, 4.0))


def hv_at(space, field, pt):
    fr = connections(space, pt)
    bjet = field.jet(space.jet(pt, (1, 4)), pt)
    return fr, bjet, ef_tensors(fr, bjet, field.rho0)


def test_proportional_field_on_euclidean_plane():
    field = weak_h_vector(0.1, [Poly.const(0.0, 2)] * 2)
    _, _, hv = hv_at(euclidean(2), field, P34)
    assert np.allclose(hv.b, [0.06, 0.08], atol=1e-15)
    assert hv.beta == pytest.approx(0.5, abs=1e-15)
    assert hv.tau == pytest.approx(10.0, abs=1e-13)
    assert np.max(np.abs(hv.m)) < 1e-15


def test_gradient_field_has_no_skew_part():
    f = P(3, (0.2, (1, 0, 0)))
    field = weak_h_vector(0.1, gradient_field(f))
    for pt in random_points(3, 5, 2):
        fr, bjet, hv = hv_at(setup_randers(), field, pt)
        assert np.max(np.abs(hv.F)) < 1e-9
        assert np.max(np.abs(hv.F_up0)) < 1e-9 and abs(hv.F_beta0) < 1e-9


def test_constant_field_on_flat_space_is_parallel():
    field = weak_h_vector(0.1, [Poly.const(0.2, 3), Poly.const(-0.1, 3), Poly.const(0.05, 3)])
    _, _, hv = hv_at(euclidean(3), field, PointDirection((0.1, 0.2, 0.3), (1.0, 0.5, -0.2)))
    assert np.max(np.abs(hv.E)) < 1e-15 and np.max(np.abs(hv.F)) < 1e-15


def test_skew_part_matches_curl_of_c():
    sp = setup_randers(2)
    c = [P(2, (0.1, (0, 2))), P(2, 0.0)]  # c = (0.1 x2^2, 0)
    field = weak_h_vector(0.05, c)
    pt = PointDirection((0.2, 0.3), (1.0, 0.4))
    _, _, hv = hv_at(sp, field, pt)
    d2c1 = fd_oracle(lambda x, y: 0.1 * x[1] ** 2, pt, (0, 1), (), 1e-5)
    assert abs(2 * hv.F[0, 1] - d2c1) < 1e-6
    assert np.max(np.abs(hv.E + hv.F - hv.bh)) < 1e-15


def test_weak_identity_by_construction():
    sp = setup_randers()
    field = weak_h_vector(0.1, [P(3, 0.05), P(3, (0.1, (0, 1, 0))), P(3, -0.02)])
    for pt in random_points(3, 50, 3):
        fr = connections(sp, pt)
        res = h_vector_residuals(fr, field.jet(sp.jet(pt, (1, 4)), pt), field.rho0)
        assert res["weak"] < 1e-9


def test_second_condition_fails_on_riemannian_spaces():
    field = weak_h_vector(0.1, [Poly.const(0.03, 2), Poly.const(0.0, 2)])
    fr = connections(euclidean(2), P34)
    res = h_vector_residuals(fr, field.jet(euclidean(2).jet(P34), P34), 0.1)
    assert res["cond_ii"] == pytest.approx(0.1 * np.max(np.abs(fr.h)), rel=1e-12)


def test_m_annihilates_y():
    sp = setup_randers()
    field = weak_h_vector(0.2, [P(3, 0.05), P(3, (0.1, (1, 0, 0))), P(3, 0.0)])
    for pt in random_points(3, 10, 4):
        _, _, hv = hv_at(sp, field, pt)
        assert abs(hv.m @ np.array(pt.y)) < 1e-10


def test_domain_guard():
    assert domain_guard(2.0, 1.0) == 2.0
    with pytest.raises(PoleError):
        domain_guard(1.0, 1.0 + 1e-9)
    with pytest.raises(ChangeDomainError):
        domain_guard(1.0, 0.0)
    with pytest.raises(ValueError):
        HVectorField(0.0, (Poly(),))


def test_search_finds_nothing_on_euclidean_space():
    pts = random_points(3, 12, 5)
    res = search_h_vector(samples_from_space(euclidean(3), pts), degree=1)
    assert res.status == "no-candidate"
    assert res.normalized_residual > 0.1
    assert all(r > 0 for _, r in res.curve)


def test_search_recovers_planted_field():
    fx = mock_fixture(3, 2.0, 0.05, (0.0, 0.3, 0.4), 2.0)
    rng = np.random.default_rng(0)
    samples = [SearchSample(tuple(rng.uniform(-1, 1, 3)), fx.L, fx.Cm, fx.h) for _ in range(10)]
    res = search_h_vector(samples, degree=0, tol=1e-8)
    assert res.status == "candidate"
    assert res.normalized_residual < 1e-8
    c = fx.rho * res.direction[:, 0]
    # identified up to the l-direction, which the second condition cannot see
    assert np.max(np.abs(c - fx.m - (c @ fx.l) * fx.l)) < 1e-10


def test_search_is_deterministic_and_validates():
    pts = random_points(3, 10, 6)
    a = search_h_vector(samples_from_space(setup_randers(), pts), degree=0)
    b = search_h_vector(samples_from_space(setup_randers(), pts), degree=0)
    assert a.best_residual == b.best_residual and a.curve == b.curve
    with pytest.raises(ValueError):
        search_h_vector(samples_from_space(setup_randers(), pts[:5]))
    with pytest.raises(ValueError):
        search_h_vector(samples_from_space(setup_randers(), pts), rho_bounds=(0.0, 1.0))
