import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csforms import lie
from csforms.calculus import (
    ANALYTIC,
    DEFAULT_DIFF,
    constant_field,
    exterior_derivative,
    field_expm,
    field_inverse,
    field_scale,
    field_scalar_mul,
    field_trace,
    field_wedge,
    random_trig_field,
    realify,
    zero_field,
)
from csforms.chern_simons import (
    MC_REAL,
    BlockConnection,
    Connection,
    block_cs_defect,
    block_sum,
    complexify,
    cs_form,
    cs_form_alt,
    cs_form_complex,
    curvature,
    gauge_change_defect,
    gauge_transform,
    off_diagonal_curvature,
    pontryagin,
    reduce_mod_Z,
    stable_extend,
)
from csforms.geometry import left_invariant_frame, levi_civita_form, round_metric
from csforms.grassmann import eval_on_vectors


def pts(rng, n=50, d=3):
    return rng.uniform(0, 2 * np.pi, size=(n, d))


def rand_conn(rng, n=3, d=3, scalar="real"):
    return Connection(random_trig_field(rng, d, 1, (n, n), scalar=scalar))


def rand_gauge(rng, n=3, d=3):
    theta = random_trig_field(rng, d, 0, (1, 1))
    return lie.GroupMapField(None, field_expm(theta, rng.uniform(-1, 1, size=(n, n))))


@pytest.fixture(scope="module")
def sphere_conn():
    return Connection(levi_civita_form(round_metric(), left_invariant_frame()), "IJK")


def frame_vectors(x):
    V = left_invariant_frame().vectors(x).matrix()
    return [V[..., :, a] for a in range(3)]


def test_zero_connection_is_flat_and_has_zero_cs(rng):
    c = Connection(zero_field(3, 1, (3, 3)))
    x = pts(rng)
    assert curvature(c)(x).max_abs() == 0.0
    assert cs_form(c)(x).max_abs() == 0.0
    assert cs_form_complex(complexify(c))(x).max_abs() == 0.0


def test_closed_rank_one_has_zero_cs(rng):
    h = random_trig_field(rng, 3, 0, (1, 1))
    c = Connection(exterior_derivative(h, ANALYTIC))
    assert cs_form(c, ANALYTIC)(pts(rng)).max_abs() == 0.0
    assert pontryagin(c, ANALYTIC)(pts(rng, d=3)).coeffs.size == 0


def test_frobenius_form_has_zero_cs(rng):
    g, h = random_trig_field(rng, 3, 0, (1, 1)), random_trig_field(rng, 3, 0, (1, 1))
    c = Connection(field_scalar_mul(g, exterior_derivative(h, ANALYTIC)))
    assert cs_form(c, ANALYTIC)(pts(rng)).max_abs() < 1e-13


def test_round_sphere_sectional_curvature(sphere_conn, sphere_points):
    I, J, K = frame_vectors(sphere_points)
    Om = curvature(sphere_conn)(sphere_points)
    # <R(X, Y) Y, X> = 1 for orthonormal X, Y
    np.testing.assert_allclose(eval_on_vectors(Om, [I, J])[..., 0, 1], 1.0, atol=1e-6)
    np.testing.assert_allclose(eval_on_vectors(Om, [J, K])[..., 1, 2], 1.0, atol=1e-6)
    np.testing.assert_allclose(eval_on_vectors(Om, [I, K])[..., 0, 2], 1.0, atol=1e-6)


def test_round_sphere_pointwise_cs(sphere_conn, sphere_points):
    for spec in (DEFAULT_DIFF, ANALYTIC):
        F = cs_form(sphere_conn, spec)(sphere_points)
        val = eval_on_vectors(F, frame_vectors(sphere_points))[..., 0, 0]
        np.testing.assert_allclose(val, -1 / (2 * math.pi**2), atol=1e-10)


def test_cs_alt_formula_agrees(rng):
    c = rand_conn(rng)
    x = pts(rng)
    assert (cs_form(c, ANALYTIC, check=False)(x) - cs_form_alt(c, ANALYTIC)(x)).max_abs() < 1e-12


def test_scalar_type_checks(rng):
    with pytest.raises(ValueError):
        cs_form(rand_conn(rng, scalar="complex"))
    with pytest.raises(ValueError):
        cs_form_complex(rand_conn(rng))


def test_gauge_covariance_of_curvature(rng):
    c, a = rand_conn(rng), rand_gauge(rng)
    x = pts(rng)
    lhs = curvature(gauge_transform(c, a, ANALYTIC), ANALYTIC)(x)
    ainv = field_inverse(a.field)
    rhs = field_wedge(ainv, curvature(c, ANALYTIC), a.field)(x)
    assert (lhs - rhs).max_abs() < 1e-8


def test_gauge_transform_examples(rng):
    c = rand_conn(rng)
    x = pts(rng)
    A = rng.uniform(-1, 1, size=(3, 3)) + 3 * np.eye(3)
    const = lie.GroupMapField(None, constant_field(A, 3))
    expect = np.linalg.inv(A) @ c.omega(x).coeffs @ A
    np.testing.assert_allclose(gauge_transform(c, const).omega(x).coeffs, expect, atol=1e-12)
    ident = lie.GroupMapField(None, constant_field(np.eye(3), 3))
    assert (gauge_transform(c, ident).omega(x) - c.omega(x)).max_abs() < 1e-15
    a = rand_gauge(rng)
    back = lie.GroupMapField(None, field_inverse(a.field))
    twice = gauge_transform(gauge_transform(c, a, ANALYTIC), back, ANALYTIC)
    assert (twice.omega(x) - c.omega(x)).max_abs() < 1e-10
    with pytest.raises(ValueError):
        gauge_transform(c, lie.GroupMapField(None, constant_field(np.eye(2), 3)))


def test_gauge_defect_constant_gauge(rng):
    c = rand_conn(rng)
    a = lie.GroupMapField(None, constant_field(rng.uniform(-1, 1, size=(3, 3)) + 3 * np.eye(3), 3))
    assert gauge_change_defect(c, a, ANALYTIC)(pts(rng)).max_abs() < 1e-13


def test_pure_gauge_cs_is_maurer_cartan(rng):
    a = rand_gauge(rng)
    c = gauge_transform(Connection(zero_field(3, 1, (3, 3))), a, ANALYTIC)
    mu = lie.maurer_cartan(a)
    x = pts(rng)
    lhs = cs_form(c, ANALYTIC)(x)
    rhs = field_scale(MC_REAL, field_trace(field_wedge(mu, mu, mu)))(x)
    assert (lhs - rhs).max_abs() < 1e-13


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_gauge_defect_vanishes(seed):
    rng = np.random.default_rng(seed)
    c, a = rand_conn(rng), rand_gauge(rng)
    x = pts(rng, 100)
    assert gauge_change_defect(c, a, DEFAULT_DIFF)(x).max_abs() < 1e-7
    assert gauge_change_defect(c, a, ANALYTIC)(x).max_abs() < 1e-12


def test_gauge_exact_term_sign(rng):
    # cs(w') - cs(w) - tr(theta^3)/48pi^2 equals +d tr(da a^-1 w)/16pi^2; the opposite sign fails
    c, a = rand_conn(rng), rand_gauge(rng)
    x = pts(rng)
    mu = lie.maurer_cartan(a)
    da = exterior_derivative(a.field, ANALYTIC)
    exact = exterior_derivative(field_trace(field_wedge(da, field_inverse(a.field), c.omega)), ANALYTIC)(x)
    lhs = (cs_form(gauge_transform(c, a, ANALYTIC), ANALYTIC)(x) - cs_form(c, ANALYTIC)(x)
           - field_scale(MC_REAL, field_trace(field_wedge(mu, mu, mu)))(x))
    k = 1 / (16 * math.pi**2)
    assert (lhs - k * exact).max_abs() < 1e-12
    assert (lhs + k * exact).max_abs() > 1e-4


def test_dcs_is_pontryagin(rng):
    c = rand_conn(rng, n=2, d=4)
    x = pts(rng, d=4)
    exact = exterior_derivative(cs_form(c, ANALYTIC), ANALYTIC)(x) - pontryagin(c, ANALYTIC)(x)
    assert exact.max_abs() < 1e-11
    fd = exterior_derivative(cs_form(c, ANALYTIC), DEFAULT_DIFF)(x) - pontryagin(c, ANALYTIC)(x)
    assert fd.max_abs() < 1e-7
    flat = Connection(exterior_derivative(random_trig_field(rng, 4, 0, (1, 1)), ANALYTIC))
    assert pontryagin(flat, ANALYTIC)(x).max_abs() < 1e-13


def test_real_cs_is_half_complex(rng):
    c = rand_conn(rng)
    x = pts(rng)
    np.testing.assert_allclose(cs_form(c)(x).coeffs, 0.5 * cs_form_complex(complexify(c))(x).coeffs.real, atol=1e-12)


def test_realification_lemma(rng):
    c = rand_conn(rng, n=2, scalar="complex")
    x = pts(rng)
    lhs = cs_form_complex(c)(x).coeffs.real
    rhs = cs_form(Connection(realify(c.omega)))(x).coeffs
    assert np.max(np.abs(lhs - rhs)) < 1e-9


def _rand_blocks(rng, n1=2, n2=3, scalar="real", zero_offdiag=False, zero_diag=False):
    def r(shape, zero):
        return zero_field(3, 1, shape, scalar) if zero else random_trig_field(rng, 3, 1, shape, scalar=scalar)

    return BlockConnection(r((n1, n1), zero_diag), r((n2, n2), zero_diag), r((n1, n2), zero_offdiag),
                           r((n2, n1), zero_offdiag))


def test_block_examples(rng):
    x = pts(rng)
    b = _rand_blocks(rng, zero_offdiag=True)
    o12, o21 = off_diagonal_curvature(b, ANALYTIC)
    assert o12(x).max_abs() == 0.0 and o21(x).max_abs() == 0.0
    total = cs_form(block_sum(b), ANALYTIC)(x)
    parts = cs_form(Connection(b.omega1), ANALYTIC)(x) + cs_form(Connection(b.omega2), ANALYTIC)(x)
    assert (total - parts).max_abs() < 1e-15
    b = _rand_blocks(rng, zero_diag=True)
    o12, o21 = off_diagonal_curvature(b, ANALYTIC)
    assert (o12(x) - exterior_derivative(b.A, ANALYTIC)(x)).max_abs() == 0.0
    assert (o21(x) - exterior_derivative(b.B, ANALYTIC)(x)).max_abs() == 0.0


def test_off_diagonal_curvature_blocks(rng):
    b = _rand_blocks(rng)
    x = pts(rng)
    full = curvature(block_sum(b), ANALYTIC)(x).coeffs
    o12, o21 = off_diagonal_curvature(b, ANALYTIC)
    assert np.max(np.abs(full[..., :2, 2:] - o12(x).coeffs)) < 1e-9
    assert np.max(np.abs(full[..., 2:, :2] - o21(x).coeffs)) < 1e-9


@pytest.mark.parametrize("scalar", ["real", "complex"])
def test_block_defect(rng, scalar):
    for n1, n2 in [(1, 1), (1, 2), (2, 2), (3, 1)]:
        b = _rand_blocks(rng, n1, n2, scalar)
        assert block_cs_defect(b, ANALYTIC)(pts(rng, 200)).max_abs() < 1e-11


def test_block_connection_validates_shapes(rng):
    with pytest.raises(ValueError):
        BlockConnection(*(random_trig_field(rng, 3, 1, s) for s in [(2, 2), (3, 3), (3, 2), (3, 2)]))


def test_stable_extension_pointwise(rng):
    c = rand_conn(rng)
    assert stable_extend(c, 0) is c
    x = pts(rng)
    for k in (1, 2):
        ext = stable_extend(c, k)
        assert ext.rank == 3 + k
        assert (cs_form(ext)(x) - cs_form(c)(x)).max_abs() < 1e-15
    with pytest.raises(ValueError):
        stable_extend(c, -1)


def test_reduce_mod_z_examples():
    r = reduce_mod_Z(0.0)
    assert (r.reduced, r.nearest_int) == (0.0, 0)
    r = reduce_mod_Z(-1.0000000002)
    assert r.nearest_int == -1 and r.reduced == pytest.approx(-2e-10, abs=1e-15)
    r = reduce_mod_Z(-1 / 3)
    assert r.nearest_int == 0 and r.reduced == pytest.approx(-1 / 3)
    assert reduce_mod_Z(0.5).reduced == -0.5
    assert reduce_mod_Z(-0.5).reduced == -0.5
    assert reduce_mod_Z(-0.5).distance_to(0.5) == 0.0


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-1e6, 1e6))
def test_reduce_mod_z_range(x):
    r = reduce_mod_Z(x)
    assert -0.5 <= r.reduced < 0.5
    assert r.reduced + r.nearest_int == pytest.approx(x, abs=1e-9)
