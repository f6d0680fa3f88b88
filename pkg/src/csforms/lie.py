"""Quaternions, their matrix representations, Maurer-Cartan forms and the
polar retraction of GL(n) onto its maximal compact subgroup.

Quaternions ``a + bi + cj + dk`` are identified with ``(a, b, c, d)`` in R^4
and, as complex vectors, ``z1 + z2 j`` with ``(z1, z2)`` in C^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import (
    ANALYTIC,
    FormField,
    exterior_derivative,
    field_inverse,
    field_map,
    field_trace,
    field_wedge,
    realify_matrix,
)

__all__ = [
    "Quaternion",
    "ConvergenceError",
    "quat_mul",
    "quat_conj",
    "qmul",
    "left_matrix",
    "right_matrix",
    "rep_real",
    "rep_complex",
    "adjoint",
    "ad_matrix",
    "ad_from_bracket",
    "AD_I",
    "AD_J",
    "AD_K",
    "GroupMapField",
    "rep_real_field",
    "rep_complex_field",
    "adjoint_field",
    "inverse_rep_real_field",
    "maurer_cartan",
    "trace_cubed",
    "jacobi_eigh",
    "polar_retract",
]


class ConvergenceError(RuntimeError):
    pass


def qmul(p, q) -> np.ndarray:
    """Hamilton product of quaternion arrays of shape ``(..., 4)``."""
    p, q = np.asarray(p), np.asarray(q)
    a1, b1, c1, d1 = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ],
        axis=-1,
    )


def _qconj(q) -> np.ndarray:
    return np.asarray(q) * np.array([1.0, -1.0, -1.0, -1.0])


@dataclass(frozen=True)
class Quaternion:
    a: float
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        a, b, c, d = (float(t) for t in arr)
        return cls(a, b, c, d)

    def array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return quat_mul(self, other)
        return Quaternion.from_array(self.array() * other)

    __rmul__ = __mul__

    def __add__(self, other):
        return Quaternion.from_array(self.array() + other.array())

    def __neg__(self):
        return Quaternion.from_array(-self.array())

    def conj(self) -> "Quaternion":
        return quat_conj(self)

    def norm(self) -> float:
        return float(np.linalg.norm(self.array()))

    def inverse(self) -> "Quaternion":
        return Quaternion.from_array(_qconj(self.array()) / self.norm() ** 2)

    def is_unit(self, tol=1e-12) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def isclose(self, other, tol=1e-12) -> bool:
        return bool(np.max(np.abs(self.array() - other.array())) <= tol)


ONE, I, J, K = (Quaternion(*row) for row in np.eye(4))


def quat_mul(p: Quaternion, q: Quaternion) -> Quaternion:
    return Quaternion.from_array(qmul(p.array(), q.array()))


def quat_conj(q: Quaternion) -> Quaternion:
    return Quaternion.from_array(_qconj(q.array()))


def _as_array(q) -> np.ndarray:
    return q.array() if isinstance(q, Quaternion) else np.asarray(q, dtype=float)


_E4 = np.eye(4)


def left_matrix(q) -> np.ndarray:
    """Matrix of ``v -> q v`` (batched over leading axes of ``q``)."""
    q = _as_array(q)
    return np.stack([qmul(q, e) for e in _E4], axis=-1)


def right_matrix(q) -> np.ndarray:
    """Matrix of ``v -> v q``."""
    q = _as_array(q)
    return np.stack([qmul(np.broadcast_to(e, q.shape), q) for e in _E4], axis=-1)


def rep_real(q) -> np.ndarray:
    """Real 4x4 matrix of ``v -> v conj(q)`` in the basis ``(1, i, j, k)``."""
    return right_matrix(_qconj(_as_array(q)))


def rep_complex(q) -> np.ndarray:
    """Complex 2x2 matrix of ``v -> v conj(q)`` in the C-basis ``(1, j)``.

    With ``conj(q) = w1 + w2 j`` and ``v = z1 + z2 j`` one has
    ``v conj(q) = (z1 w1 - z2 conj(w2)) + (z1 w2 + z2 conj(w1)) j``.
    """
    a, b, c, d = np.moveaxis(_as_array(q), -1, 0)
    w1 = a - 1j * b
    w2 = -c - 1j * d
    row0 = np.stack([w1, -np.conj(w2)], axis=-1)
    row1 = np.stack([w2, np.conj(w1)], axis=-1)
    return np.stack([row0, row1], axis=-2)


def adjoint(q, tol=1e-10) -> np.ndarray:
    """Rotation ``v -> q v q^{-1}`` of the imaginary quaternions, for ``|q| = 1``."""
    q = _as_array(q)
    if np.any(np.abs(np.linalg.norm(q, axis=-1) - 1.0) > tol):
        raise ValueError("adjoint is defined on unit quaternions only")
    full = left_matrix(q) @ rep_real(q)
    return full[..., 1:, 1:]


AD_I = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -2.0], [0.0, 2.0, 0.0]])
AD_J = np.array([[0.0, 0.0, 2.0], [0.0, 0.0, 0.0], [-2.0, 0.0, 0.0]])
AD_K = np.array([[0.0, -2.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
for _m in (AD_I, AD_J, AD_K):
    _m.setflags(write=False)

_AD = {"I": AD_I, "J": AD_J, "K": AD_K}


def ad_matrix(v: str) -> np.ndarray:
    """``ad`` of the left-invariant field ``"I"``, ``"J"`` or ``"K"`` (tabulated)."""
    try:
        return _AD[v].copy()
    except KeyError:
        raise ValueError(f"ad_matrix takes 'I', 'J' or 'K', got {v!r}") from None


def ad_from_bracket(v) -> np.ndarray:
    """Matrix of ``w -> v w - w v`` on ``span{i, j, k}``, computed from products."""
    v = _as_array(v)
    full = left_matrix(v) - right_matrix(v)
    return full[1:, 1:]


# ----------------------------------------------------------------------
# group-valued maps on charts


@dataclass(frozen=True)
class GroupMapField:
    """A map from a chart into a matrix group.

    ``field`` is a square degree-0 :class:`FormField`; the analytic channel is
    mandatory for the built-in maps because Maurer-Cartan cubes amplify
    finite-difference noise.
    """

    chart: object
    field: FormField

    def __post_init__(self):
        f = self.field
        if f.degree != 0 or f.shape[0] != f.shape[1]:
            raise ValueError("a group map must be a square degree-0 field")

    @property
    def n(self) -> int:
        return self.field.shape[0]

    def g(self, x) -> np.ndarray:
        return self.field(x).matrix()

    def dg(self, x) -> np.ndarray:
        """Partial derivatives, shape ``(..., d, N, N)``."""
        return np.stack([self.field.partial(s)(x).matrix() for s in range(self.field.chart_dim)], axis=-3)


def rep_real_field(qfield: FormField) -> FormField:
    """``x -> R_R(q(x))`` for a quaternion column field ``q`` (linear in ``q``)."""
    return field_map(qfield, lambda c: rep_real(c[..., 0]), (4, 4), label="R_R")


def inverse_rep_real_field(qfield: FormField) -> FormField:
    """``x -> R_R(q(x)^{-1})``; for unit ``q`` this is ``R_R(conj q)``."""
    return field_map(qfield, lambda c: rep_real(_qconj(c[..., 0])), (4, 4), label="R_R∘inv")


def rep_complex_field(qfield: FormField) -> FormField:
    return field_map(qfield, lambda c: rep_complex(c[..., 0]), (2, 2), "complex", label="R_C")


def adjoint_field(qfield: FormField) -> FormField:
    """``x -> Ad(q(x))`` in SO(3), assuming ``|q(x)| = 1``."""
    left = field_map(qfield, lambda c: left_matrix(c[..., 0]), (4, 4), label="L")
    right = rep_real_field(qfield)
    full = field_wedge(left, right)
    return field_map(full, lambda c: c[..., 1:, 1:], (3, 3), label="Ad")


def maurer_cartan(G: GroupMapField) -> FormField:
    """Pull-back ``g^{-1} dg`` of the Maurer-Cartan form along the map."""
    if not G.field.has_analytic:
        raise ValueError("maurer_cartan needs the analytic derivative channel")
    return field_wedge(field_inverse(G.field), exterior_derivative(G.field, ANALYTIC))


def trace_cubed(mu: FormField) -> FormField:
    """``tr(mu ^ mu ^ mu)``."""
    return field_trace(field_wedge(mu, mu, mu))


# ----------------------------------------------------------------------
# polar retraction


def jacobi_eigh(S, tol=1e-13, max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a real symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with ``S = V diag(w) V^T``.
    """
    a = np.array(S, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ValueError("jacobi_eigh needs a symmetric matrix")
    v = np.eye(n)
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    raise ConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def polar_retract(A, s: float) -> np.ndarray:
    """``Phi_s(A) = (A A^*)^{-s/2} A`` for invertible ``A`` and ``s`` in [0, 1].

    ``Phi_1(A)`` is the orthogonal (unitary) polar factor.  Complex inputs are
    handled through their real images, on which matrix functions commute
    with realification.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("polar_retract needs a square matrix")
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    is_complex = np.iscomplexobj(A)
    H = A @ A.conj().T
    S = realify_matrix(H) if is_complex else H.real
    S = 0.5 * (S + S.T)
    w, V = jacobi_eigh(S)
    if np.min(w) <= 1e-14 * max(np.max(w), 1e-300):
        raise np.linalg.LinAlgError("polar_retract needs an invertible matrix")
    f = (V * w ** (-s / 2)) @ V.T
    if is_complex:
        f = f[0::2, 0::2] + 1j * f[1::2, 0::2]
    return f @ A
