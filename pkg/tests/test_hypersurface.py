import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from finsler_hmx.fields import Poly
from finsler_hmx.finsler import euclidean
from finsler_hmx.hmatsumoto import barred_direct, barred_fundamentals
from finsler_hmx.hvector import ef_tensors, weak_h_vector
from finsler_hmx.hypersurface import (
    ChartError,
    barred_fundamentals_hs,
    barred_hypersurface,
    chart_frame,
    chart_from_config,
    classify,
    fundamentals,
    graph,
    hyperplane,
    induced_connections,
    orient_normal,
    parallel_collapse,
    relative_derivative_check,
    sphere,
)
from finsler_hmx.jets import PointDirection

from helpers import P, all_spaces, setup_randers, setup_riemannian

E3 = euclidean(3)


def barred_setup(space, chart, u, v, c=None, rho0=0.1, tangent_scale=0.1):
    hf = chart_frame(space, chart, u, v)
    fund = fundamentals(hf)
    if c is None:
        c = tangent_scale * (hf.base.g @ hf.B_alpha[:, 0])
    field = weak_h_vector(rho0, [Poly.const(float(ci), space.dim) for ci in c])
    pt = PointDirection(hf.x, hf.y)
    hv = ef_tensors(hf.base, field.jet(space.jet(pt), pt), rho0)
    hmf = barred_fundamentals(hf.base, hv)
    bh = barred_hypersurface(hf, hv, hmf)
    return hf, fund, field, hv, hmf, bh


def test_euclidean_hyperplane():
    hf = chart_frame(E3, hyperplane(3), (0.2, -0.1), (1.0, 0.5))
    assert np.array_equal(hf.B_alpha, [[1, 0], [0, 1], [0, 0]])
    assert np.allclose(hf.B_up, [0, 0, 1], atol=1e-15)
    assert np.allclose(hf.g_ab, np.eye(2), atol=1e-15)
    fund = fundamentals(hf)
    assert fund.kind == "third"
    for t in (fund.H_a, fund.H_ab, fund.M_ab):
        assert np.max(np.abs(t)) < 1e-15
    assert max(relative_derivative_check(E3, hyperplane(3), hf, fund).values()) < 1e-10
    ic = induced_connections(hf, fund)
    assert np.max(np.abs(ic.P_ind)) == 0.0 and np.max(np.abs(ic.G_ind)) == 0.0


def sphere_oracle(u, h=1e-4):
    """Euclidean second fundamental form n . x_ab of the unit sphere by central differences."""

    def x(u1, u2):
        return np.array([math.sin(u1) * math.cos(u2), math.sin(u1) * math.sin(u2), math.cos(u1)])

    u1, u2 = u
    xu = (x(u1 + h, u2) - x(u1 - h, u2)) / (2 * h)
    xv = (x(u1, u2 + h) - x(u1, u2 - h)) / (2 * h)
    n = np.cross(xu, xv)
    n = n / np.linalg.norm(n)
    n = n if n[-1] >= 0 else -n
    xuu = (x(u1 + h, u2) - 2 * x(u1, u2) + x(u1 - h, u2)) / h**2
    xvv = (x(u1, u2 + h) - 2 * x(u1, u2) + x(u1, u2 - h)) / h**2
    xuv = (x(u1 + h, u2 + h) - x(u1 + h, u2 - h) - x(u1 - h, u2 + h) + x(u1 - h, u2 - h)) / (4 * h * h)
    II = np.array([[n @ xuu, n @ xuv], [n @ xuv, n @ xvv]])
    I = np.array([[xu @ xu, xu @ xv], [xu @ xv, xv @ xv]])
    return n, I, II


@pytest.mark.parametrize("u", [(0.7, 0.4), (1.2, -2.0), (2.0, 0.3)])
def test_unit_sphere_against_classical_form(u):
    hf = chart_frame(E3, sphere(3), u, (0.3, 1.0))
    for key, val in hf.identity_residuals().items():
        assert val < 1e-10, key
    fund = fundamentals(hf)
    n, I, II = sphere_oracle(u)
    assert np.allclose(hf.B_up, n, atol=1e-8)
    assert np.max(np.abs(fund.M_ab)) < 1e-12
    assert np.max(np.abs(fund.H_ab - II)) < 1e-7
    # the unit sphere is umbilic: H_ab = +-g_ab
    sign = np.sign(fund.H_ab[0, 0])
    assert np.max(np.abs(fund.H_ab - sign * hf.g_ab)) < 1e-12
    assert np.max(np.abs(hf.g_ab - I)) < 1e-7
    assert fund.kind == "none"
    res = relative_derivative_check(E3, sphere(3), hf, fund)
    assert res["tangent_h"] < 1e-10 and res["tangent_v"] < 1e-12
    assert res["normal_h"] < 1e-7 and res["normal_v"] < 1e-7


@pytest.mark.parametrize("name", ["euclidean", "randers", "riemannian", "root"])
@pytest.mark.parametrize("chart", [hyperplane(3), sphere(3, 1.0), graph(3, Poly(((0.3, (2, 0)), (0.1, (1, 1)))))])
def test_frame_and_relations_on_all_families(name, chart):
    sp = all_spaces()[name]
    hf = chart_frame(sp, chart, (0.6, 0.3), (0.8, -0.4))
    for key, val in hf.identity_residuals().items():
        assert val < 1e-10, key
    fund = fundamentals(hf)
    for key, val in fund.relation_residuals(hf.v).items():
        assert val < 1e-9, key
    for key, val in relative_derivative_check(sp, chart, hf, fund).items():
        assert val < 1e-7, key
    ic = induced_connections(hf, fund)
    assert max(ic.reconstruction.values()) < 1e-9


def test_chart_errors():
    with pytest.raises(ChartError):
        chart_frame(E3, sphere(3), (0.0, 0.3), (1.0, 0.0))  # pole of the angle chart
    with pytest.raises(ChartError):
        chart_frame(euclidean(4), sphere(3), (0.5, 0.3), (1.0, 0.0))
    with pytest.raises(ChartError):
        hyperplane(3, axis=5)
    with pytest.raises(ChartError):
        chart_from_config({"family": "torus", "samples": []}, 3)


def test_normal_orientation_convention():
    assert np.array_equal(orient_normal(np.array([0.2, 0.0, -1.0])), [-0.2, 0.0, 1.0])
    assert np.array_equal(orient_normal(np.array([-1.0, 0.3, 0.0])), [1.0, -0.3, 0.0])


def mat(k):
    return st.lists(st.floats(-1e-6, 1e-6) | st.just(0.0) | st.floats(-1, 1), min_size=k, max_size=k)


@given(mat(2), mat(4), mat(4), st.floats(1e-10, 1e-2))
def test_classification_nesting(Ha, Hab, Mab, tol):
    kind, res = classify(np.array(Ha), np.array(Hab).reshape(2, 2), np.array(Mab).reshape(2, 2), tol)
    flags = {k: res[k] < tol for k in ("first", "second", "third")}
    if kind == "third":
        assert flags["third"] and flags["second"]
    elif kind == "second":
        assert flags["second"] and not flags["third"]
    elif kind == "first":
        assert flags["first"] and not flags["second"]
    else:
        assert not any(flags.values())
    assert res["third"] >= res["second"]


def test_barred_normal_at_p_equal_8():
    # tau = 2, rho = 1 on the flat hyperplane: L = 1, beta = 1/2
    hf, fund, field, hv, hmf, bh = barred_setup(
        E3, hyperplane(3), (0.0, 0.0), (1.0, 0.0), c=(-0.5, 0.2, 0.0), rho0=1.0
    )
    assert hv.tau == pytest.approx(2.0, abs=1e-14)
    assert hmf.scalars.p == pytest.approx(8.0, abs=1e-12)
    assert bh.tangent
    assert np.allclose(bh.B_up, np.array([0, 0, 1]) / math.sqrt(8), atol=1e-14)
    assert bh.residuals["orthonormal_unit"] < 1e-9


@pytest.mark.parametrize("space", [E3, setup_randers(), setup_riemannian()], ids=["E", "R", "riem"])
def test_barred_relations_for_tangent_gradient_field(space):
    chart = sphere(3)
    hf, fund, field, hv, hmf, bh = barred_setup(space, chart, (0.7, 0.4), (1.0, 0.5))
    assert bh.tangent
    for key, val in bh.residuals.items():
        assert val < 1e-9, key
    direct = barred_direct(space, field, PointDirection(hf.x, hf.y), connections=True)
    bf = barred_fundamentals_hs(hf, fund, hv, hmf, bh, direct)
    assert abs(bf.H0_direct - bf.H0_scaled) < 1e-9
    assert abs(bf.H0_direct - bf.H0_formula) < 1e-9
    assert np.max(np.abs(bf.M_ab_scaled - bf.M_ab_closed)) < 1e-9
    assert np.max(np.abs(bf.M_ab_scaled - bf.M_ab_direct)) < 1e-9
    # weak fields miss the second h-vector condition, so the reduced relation stays gated
    assert bf.condition_ii > 1e-6
    assert bf.second_fundamental is None


def test_euclidean_has_vanishing_v_tensor_after_change():
    hf, fund, field, hv, hmf, bh = barred_setup(E3, sphere(3), (0.9, 0.1), (0.2, 1.0))
    direct = barred_direct(E3, field, PointDirection(hf.x, hf.y), connections=True)
    bf = barred_fundamentals_hs(hf, fund, hv, hmf, bh, direct)
    assert np.max(np.abs(fund.M_ab)) < 1e-12
    assert np.max(np.abs(bf.M_ab_scaled)) < 1e-12


def test_non_tangent_field_reproduces_mixed_product():
    hf, fund, field, hv, hmf, bh = barred_setup(
        setup_randers(), sphere(3), (0.7, 0.4), (1.0, 0.5), c=(0.05, 0.1, 0.2)
    )
    assert not bh.tangent
    Ba, B = hf.B_alpha, hf.B_up
    lhs = Ba.T @ hmf.gbar @ B
    rhs = (hmf.Q @ Ba) * float(hv.m @ B)
    assert np.max(np.abs(rhs)) > 1e-3
    assert np.max(np.abs(lhs - rhs)) < 1e-9
    assert bh.B_up_closed is None and "normal_closed" not in bh.residuals
    for key in ("duality_ab", "duality_a_normal", "duality_normal_a", "duality_normal"):
        assert bh.residuals[key] < 1e-9


def test_parallel_collapse_on_first_kind_hyperplane():
    sp = setup_riemannian()
    hf, fund, field, hv, hmf, bh = barred_setup(sp, hyperplane(3), (0.1, 0.2), (1.0, 0.5))
    assert fund.kind_residuals["first"] < 1e-12
    ic = induced_connections(hf, fund)
    assert np.max(np.abs(ic.G_ind)) > 1e-3  # the induced Berwald connection is not trivial
    pc = parallel_collapse(hf, hv, hmf, bh)
    assert pc["D"] == 0.0 and pc["Dj"] == 0.0 and pc["Djk"] == 0.0
    assert pc["first_kind"]
    assert pc["P_ind"] < 1e-12 and pc["G_ind"] < 1e-12
