import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from finsler_hmx import jets
from finsler_hmx.jets import (
    Jet,
    JetConfigError,
    JetSingularityError,
    PointDirection,
    algebra,
    fd_oracle,
    jet_lift,
    jet_partial,
)


def sumsq(x, y):
    return sum((v * v for v in y[1:]), y[0] * y[0])


def norm_scaled(x, y):
    return jets.sqrt(sumsq(x, y)) * (1 + 0.1 * x[0])


P34 = PointDirection((0.0, 0.0), (3.0, 4.0))


def test_sum_of_squares_derivatives():
    j = jet_lift(sumsq, P34)
    assert j.value == 25.0
    assert jet_partial(j, y_idx=(1, 0)) == 6.0
    assert jet_partial(j, y_idx=(2, 0)) == 2.0
    assert jet_partial(j, y_idx=(1, 1)) == 0.0


def test_constant_field_has_no_derivatives():
    j = jet_lift(lambda x, y: 2.5, P34)
    assert j.value == 2.5
    assert np.all(j.c[1:] == 0.0)
    assert jet_partial(j, x_idx=(1, 0)) == 0.0
    assert jet_partial(j, y_idx=(0, 3)) == 0.0


def test_scaled_norm_matches_finite_differences():
    j = jet_lift(norm_scaled, P34)
    for xi, yi, expect in [((1, 0), (), 0.5), ((), (1, 0), 0.6)]:
        fd = fd_oracle(norm_scaled, P34, xi, yi, step=1e-5)
        assert abs(fd - expect) < 1e-6
        assert abs(jet_partial(j, xi, yi) - expect) < 1e-12


def test_fd_oracle_reference_values():
    assert abs(fd_oracle(sumsq, P34, (), (1, 0), 1e-4) - 6.0) < 1e-7
    norm = lambda x, y: math.sqrt(y[0] ** 2 + y[1] ** 2)
    # d^2 |y| / dy1 dy2 = -y1 y2 / |y|^3
    assert abs(fd_oracle(norm, P34, (), (1, 1), 1e-4) + 12 / 125) < 1e-5
    assert fd_oracle(lambda x, y: 3.0, P34, (), (1, 1)) == 0.0


def test_fd_oracle_rejects_high_order():
    with pytest.raises(ValueError):
        fd_oracle(sumsq, P34, (), (4, 0))


def test_randers_mixed_derivative_against_fd():
    def L(x, y):
        return jets.sqrt(y[0] * y[0] + y[1] * y[1]) + 0.1 * (1 + x[1]) * y[0]

    pt = PointDirection((0.2, -0.1), (1.0, 2.0))
    j = jet_lift(L, pt)
    for xi, yi in [((), (1, 1)), ((0, 1), (1, 0)), ((), (2, 0))]:
        assert abs(jet_partial(j, xi, yi) - fd_oracle(L, pt, xi, yi, 1e-4)) < 1e-6


def test_elementary_functions_match_closed_forms():
    pt = PointDirection((0.3, 0.0), (0.7, 0.4))
    for fn, d1 in [
        (jets.sin, math.cos),
        (jets.cos, lambda t: -math.sin(t)),
        (jets.exp, math.exp),
        (jets.log, lambda t: 1 / t),
    ]:
        j = jet_lift(lambda x, y, fn=fn: fn(y[0]), pt)
        assert abs(jet_partial(j, y_idx=(1, 0)) - d1(0.7)) < 1e-13
    j = jet_lift(lambda x, y: jets.power(y[0], 2.5), pt)
    assert abs(jet_partial(j, y_idx=(2, 0)) - 2.5 * 1.5 * 0.7**0.5) < 1e-13


def test_caps_and_point_validation():
    with pytest.raises(JetConfigError):
        jet_lift(sumsq, P34, caps=(2, 4))
    with pytest.raises(ValueError):
        PointDirection((0.0, 0.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        PointDirection((0.0,), (1.0,))
    with pytest.raises(ValueError):
        PointDirection((0.0, 0.0), (1.0, 0.0, 0.0))


def test_reciprocal_of_zero_raises():
    with pytest.raises(JetSingularityError):
        jet_lift(lambda x, y: 1 / (y[0] - 3.0), P34)


def test_inverse_of_matrix_jet():
    alg = algebra(((2, 1), (2, 2)))
    t = Jet.variable(alg, 2, 0.5)
    m = jets.stack([jets.stack([1 + t, t * t]), jets.stack([t * 0.0, 2.0 + t])])
    mi = jets.inv(m)
    prod = jets.contract("ij,jk->ik", m, mi)
    assert np.allclose(prod.c[..., 0], np.eye(2), atol=1e-14)
    assert np.max(np.abs(prod.c[..., 1:])) < 1e-13


fin = st.floats(-2.0, 2.0, allow_nan=False)


@given(st.tuples(fin, fin), st.tuples(fin, fin), st.tuples(fin, fin))
def test_product_and_chain_rules(x, y, ab):
    y = (y[0] + 3.0, y[1])  # keep y away from zero
    pt = PointDirection(x, y)
    a, b = ab

    def f(x, y):
        return jets.sin(a * x[0] + y[1]) * (y[0] * y[0] + b)

    j = jet_lift(f, pt)
    for xi, yi in [((1, 0), ()), ((), (1, 0)), ((), (0, 1)), ((), (1, 1)), ((1, 0), (0, 1))]:
        fd = fd_oracle(f, pt, xi, yi, 1e-4)
        assert abs(jet_partial(j, xi, yi) - fd) < 1e-5 * max(1.0, abs(fd))


@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_quotient_roundtrip(u, v):
    pt = PointDirection((0.0, 0.0), (u, v))
    j = jet_lift(lambda x, y: (y[0] * y[1]) / y[1] - y[0], pt)
    assert np.max(np.abs(j.c)) < 1e-12
