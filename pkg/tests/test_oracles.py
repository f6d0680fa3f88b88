"""Frozen reference values, derived by hand before the implementation.

Each constant is recomputed here from first principles (quaternion
arithmetic, explicit matrices) and then compared with the library.
"""

import math

import numpy as np
import pytest

from csforms import lie
from csforms.chern_simons import CS_COMPLEX, CS_REAL, MC_COMPLEX, MC_REAL
from csforms.grassmann import eval_on_vectors

# frozen values
VOL_S3 = 2 * math.pi**2
TR_AD_IJK = -8.0
TR_MU3_AD = -48.0
TR_MU3_REAL = -24.0
TR_MU3_REAL_INV = 24.0
TR_MU3_COMPLEX = -12.0
TR_OMEGA_DOMEGA = 12.0
TR_OMEGA3 = -6.0
CS_ROUND_DENSITY = -1 / (2 * math.pi**2)

UNITS = np.eye(4)[1:]


def structure_matrices():
    """``L_a[i, b] = <e_i, (e_a e_b - e_b e_a) / 2>``: Levi-Civita of the bi-invariant metric."""
    return np.array(
        [
            [[0.5 * UNITS[i] @ (lie.qmul(UNITS[a], UNITS[b]) - lie.qmul(UNITS[b], UNITS[a])) for b in range(3)]
             for i in range(3)]
            for a in range(3)
        ]
    )


def test_normalization_constants():
    assert CS_REAL == pytest.approx(-1 / (16 * math.pi**2), rel=1e-15)
    assert MC_REAL == pytest.approx(1 / (48 * math.pi**2), rel=1e-15)
    assert CS_COMPLEX == pytest.approx(-1 / (8 * math.pi**2), rel=1e-15)
    assert MC_COMPLEX == pytest.approx(1 / (24 * math.pi**2), rel=1e-15)


def test_structure_matrices_are_rotations_generators():
    L = structure_matrices()
    expected_L1 = np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float)
    assert np.array_equal(L[0], expected_L1)
    for a in range(3):
        assert np.array_equal(L[a], -L[a].T)


def test_round_sphere_pointwise_algebra():
    # with constant omega(E_a) = L_a: d omega(E_a, E_b) = -omega([E_a, E_b]) = -2 eps_abc L_c
    L = structure_matrices()
    # the only nonzero 3-index expression, evaluated on (I, J, K) by alternation
    perms = [((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1), ((0, 2, 1), -1), ((2, 1, 0), -1), ((1, 0, 2), -1)]
    tr_w3 = sum(s * np.trace(L[a] @ L[b] @ L[c]) for (a, b, c), s in perms)
    # omega ^ d omega (X, Y, Z) = sum over cyclic (X | YZ) splits of omega(X) d omega(Y, Z)
    def dw(b, c):
        comm = lie.qmul(UNITS[b], UNITS[c]) - lie.qmul(UNITS[c], UNITS[b])
        return -sum(comm[1 + e] * L[e] for e in range(3))
    tr_wdw = sum(np.trace(L[a] @ dw(b, c)) for a, b, c in [(0, 1, 2), (1, 2, 0), (2, 0, 1)])
    assert tr_w3 == pytest.approx(TR_OMEGA3, abs=1e-14)
    assert tr_wdw == pytest.approx(TR_OMEGA_DOMEGA, abs=1e-14)
    cs = -(tr_wdw + 2 / 3 * tr_w3) / (16 * math.pi**2)
    assert cs == pytest.approx(CS_ROUND_DENSITY, rel=1e-14)
    assert cs * VOL_S3 == pytest.approx(-1.0, rel=1e-14)


def test_ad_trace_oracle():
    ad = [lie.ad_from_bracket(u) for u in UNITS]
    assert np.trace(ad[0] @ ad[1] @ ad[2]) == TR_AD_IJK
    assert np.trace(ad[0] @ ad[2] @ ad[1]) == -TR_AD_IJK


def _mc_on_ijk(G, q, inverse=False):
    # mu(E_a) = G(q)^{-1} dG(q e_a); G is linear in q
    g = G(q)
    mus = [np.linalg.solve(g, G(lie.qmul(q, UNITS[a]))) for a in range(3)]
    perms = [((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1), ((0, 2, 1), -1), ((2, 1, 0), -1), ((1, 0, 2), -1)]
    return sum(s * np.trace(mus[a] @ mus[b] @ mus[c]) for (a, b, c), s in perms)


@pytest.mark.parametrize(
    "rep, expected",
    [
        (lie.rep_real, TR_MU3_REAL),
        (lambda q: lie.rep_real(lie._qconj(q)), TR_MU3_REAL_INV),
        (lie.rep_complex, TR_MU3_COMPLEX),
    ],
)
def test_maurer_cartan_pointwise_oracles(rep, expected, rng):
    for _ in range(5):
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        assert _mc_on_ijk(rep, q).real == pytest.approx(expected, abs=1e-12)


def test_adjoint_maurer_cartan_oracle(rng):
    # Ad is quadratic in q: differentiate along the curve q exp(t e_a) by hand
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    g = lie.adjoint(q)
    mus = [np.linalg.solve(g, g @ lie.ad_from_bracket(UNITS[a])) for a in range(3)]
    perms = [((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1), ((0, 2, 1), -1), ((2, 1, 0), -1), ((1, 0, 2), -1)]
    val = sum(s * np.trace(mus[a] @ mus[b] @ mus[c]) for (a, b, c), s in perms)
    assert val == pytest.approx(TR_MU3_AD, abs=1e-12)


def test_library_matches_structure_oracle(sphere_points):
    from csforms.geometry import left_invariant_frame, levi_civita_form, round_metric

    frame = left_invariant_frame()
    omega = levi_civita_form(round_metric(), frame)(sphere_points)
    V = frame.vectors(sphere_points).matrix()
    L = structure_matrices()
    for a in range(3):
        assert np.max(np.abs(eval_on_vectors(omega, [V[..., :, a]]) - L[a])) < 1e-8
