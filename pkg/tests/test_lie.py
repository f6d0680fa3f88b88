import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csforms import lie
from csforms.calculus import ANALYTIC, constant_field, exterior_derivative, field_wedge
from csforms.geometry import hopf_chart, hopf_embedding, left_invariant_frame
from csforms.grassmann import eval_on_vectors
from csforms.lie import I, J, K, ONE, Quaternion

unit_quaternions = st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(
    lambda v: np.linalg.norm(v) > 0.1
).map(lambda v: Quaternion.from_array(np.asarray(v) / np.linalg.norm(v)))
quaternions = st.lists(st.floats(-2, 2), min_size=4, max_size=4).map(Quaternion.from_array)


def test_unit_products():
    assert (I * J).isclose(K)
    assert (J * K).isclose(I)
    assert (I * J * K).isclose(-ONE)
    assert lie.quat_conj(Quaternion(1, 2, 3, 4)).isclose(Quaternion(1, -2, -3, -4))


@settings(max_examples=50, deadline=None)
@given(p=quaternions, q=quaternions)
def test_rep_real_is_multiplicative(p, q):
    np.testing.assert_allclose(lie.rep_real(p) @ lie.rep_real(q), lie.rep_real(p * q), atol=1e-12)
    np.testing.assert_allclose(lie.rep_complex(p) @ lie.rep_complex(q), lie.rep_complex(p * q), atol=1e-12)


def test_rep_real_reversed_order_is_not_a_morphism():
    p, q = Quaternion(0.3, 1.0, -0.2, 0.5), Quaternion(-0.7, 0.1, 0.9, 0.4)
    assert np.max(np.abs(lie.rep_real(q) @ lie.rep_real(p) - lie.rep_real(p * q))) > 0.1


def test_identity_representations():
    np.testing.assert_array_equal(lie.rep_real(ONE), np.eye(4))
    np.testing.assert_array_equal(lie.rep_complex(ONE), np.eye(2))


@settings(max_examples=50, deadline=None)
@given(q=unit_quaternions)
def test_unit_images_are_special_orthogonal_and_unitary(q):
    R = lie.rep_real(q)
    assert np.max(np.abs(R @ R.T - np.eye(4))) < 1e-12
    assert abs(np.linalg.det(R) - 1) < 1e-12
    U = lie.rep_complex(q)
    assert np.max(np.abs(U @ U.conj().T - np.eye(2))) < 1e-12
    assert abs(np.linalg.det(U) - 1) < 1e-12
    A = lie.adjoint(q)
    assert np.max(np.abs(A @ A.T - np.eye(3))) < 1e-12
    assert abs(np.linalg.det(A) - 1) < 1e-12


def test_rep_complex_of_ijk():
    prod = lie.rep_complex(I) @ lie.rep_complex(J) @ lie.rep_complex(K)
    np.testing.assert_array_equal(prod, -np.eye(2))
    np.testing.assert_array_equal(lie.rep_complex(I * J * K), -np.eye(2))


def test_adjoint_kernel_and_action(rng):
    np.testing.assert_array_equal(lie.adjoint(ONE), np.eye(3))
    np.testing.assert_array_equal(lie.adjoint(-ONE), np.eye(3))
    q = Quaternion.from_array(rng.normal(size=4))
    q = q * (1 / q.norm())
    v = rng.normal(size=3)
    rotated = lie.qmul(lie.qmul(q.array(), np.r_[0.0, v]), q.conj().array())
    np.testing.assert_allclose(lie.adjoint(q) @ v, rotated[1:], atol=1e-12)
    with pytest.raises(ValueError):
        lie.adjoint(Quaternion(2.0))


def test_ad_traces_exact():
    adI, adJ, adK = (lie.ad_matrix(v) for v in "IJK")
    assert np.trace(adI @ adJ @ adK) == -8.0
    assert np.trace(adI @ adK @ adJ) == 8.0
    for v, m in zip((I, J, K), (adI, adJ, adK)):
        np.testing.assert_array_equal(lie.ad_from_bracket(v), m)
    with pytest.raises(ValueError):
        lie.ad_matrix("L")
    assert not lie.AD_I.flags.writeable


def test_adjoint_derivative_is_ad(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    h = 1e-5

    def curve(t):
        return lie.adjoint(lie.qmul(q, np.array([np.cos(t), np.sin(t), 0.0, 0.0])))

    deriv = (curve(h) - curve(-h)) / (2 * h)
    np.testing.assert_allclose(np.linalg.solve(lie.adjoint(q), deriv), lie.ad_matrix("I"), atol=1e-6)


def test_maurer_cartan_of_constant_map(rng):
    G = lie.GroupMapField(None, constant_field(lie.adjoint(np.array([0.5, 0.5, 0.5, 0.5])), 3))
    x = hopf_chart().sample(rng, 10)
    assert lie.maurer_cartan(G)(x).max_abs() == 0.0


def test_maurer_cartan_needs_analytic_channel():
    from csforms.calculus import FormField
    from csforms.grassmann import MatValForm

    F = FormField.from_callables(3, 0, (2, 2), lambda x: MatValForm.from_matrix(np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)), 3))
    with pytest.raises(ValueError):
        lie.maurer_cartan(lie.GroupMapField(None, F))


def test_structure_equation_flatness(sphere_points):
    G = lie.GroupMapField(hopf_chart(), lie.rep_real_field(hopf_embedding()))
    mu = lie.maurer_cartan(G)
    dmu = exterior_derivative(mu, ANALYTIC)(sphere_points)
    sq = field_wedge(mu, mu)(sphere_points)
    # g^{-1} dg is flat: d mu + mu^2 = 0; the other sign leaves 2 mu^2
    assert (dmu + sq).max_abs() < 1e-7
    assert (dmu - sq).max_abs() > 1.0


@pytest.mark.parametrize(
    "build, expected",
    [
        (lie.rep_real_field, -24.0),
        (lie.inverse_rep_real_field, 24.0),
        (lie.adjoint_field, -48.0),
        (lie.rep_complex_field, -12.0),
    ],
)
def test_trace_mu_cubed_on_ijk(sphere_points, build, expected):
    mu = lie.maurer_cartan(lie.GroupMapField(hopf_chart(), build(hopf_embedding())))
    t = lie.trace_cubed(mu)(sphere_points)
    V = left_invariant_frame().vectors(sphere_points).matrix()
    val = eval_on_vectors(t, [V[..., :, 0], V[..., :, 1], V[..., :, 2]])[..., 0, 0]
    np.testing.assert_allclose(val.real, expected, atol=1e-8)


def test_polar_examples(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    for s in (0.0, 0.3, 1.0):
        np.testing.assert_allclose(lie.polar_retract(Q, s), Q, atol=1e-12)
    np.testing.assert_allclose(lie.polar_retract(2 * np.eye(3), 1.0), np.eye(3), atol=1e-14)
    for _ in range(100):
        A = rng.normal(size=(4, 4))
        U = lie.polar_retract(A, 1.0)
        assert np.max(np.abs(U @ U.T - np.eye(4))) < 1e-10


def test_polar_path_is_continuous(rng):
    A = rng.normal(size=(4, 4))
    path = [lie.polar_retract(A, s) for s in np.linspace(0, 1, 51)]
    steps = [np.max(np.abs(b - a)) for a, b in zip(path, path[1:])]
    assert max(steps) < 0.2
    np.testing.assert_allclose(path[0], A, atol=1e-12)


def test_polar_complex_and_errors(rng):
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    U = lie.polar_retract(A, 1.0)
    assert np.max(np.abs(U @ U.conj().T - np.eye(3))) < 1e-10
    with pytest.raises(np.linalg.LinAlgError):
        lie.polar_retract(np.diag([1.0, 0.0, 2.0]), 1.0)
    with pytest.raises(ValueError):
        lie.polar_retract(np.eye(2), 1.5)


def test_jacobi_against_numpy(rng):
    B = rng.normal(size=(6, 6))
    S = B + B.T
    w, V = lie.jacobi_eigh(S)
    np.testing.assert_allclose(np.sort(w), np.linalg.eigvalsh(S), atol=1e-12)
    np.testing.assert_allclose(V @ np.diag(w) @ V.T, S, atol=1e-12)
    with pytest.raises(lie.ConvergenceError):
        lie.jacobi_eigh(S, max_sweeps=0)
