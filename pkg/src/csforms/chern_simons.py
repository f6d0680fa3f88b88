"""Chern-Simons forms, curvature, gauge changes and block sums.

For a connection ``nabla = d + omega`` on a trivial bundle,

    cs(omega) = -1/(16 pi^2) tr(omega d omega + 2/3 omega^3),

a scalar 3-form whose class modulo integral forms does not depend on the
frame.  Complex connections use ``cs_C = -1/(8 pi^2) tr_C(...)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calculus import (
    ANALYTIC,
    DEFAULT_DIFF,
    DiffSpec,
    FormField,
    exterior_derivative,
    field_block,
    field_inverse,
    field_scale,
    field_sum,
    field_to_complex,
    field_trace,
    field_wedge,
    zero_field,
)
from .grassmann import MatValForm
from .lie import GroupMapField

__all__ = [
    "CS_REAL",
    "MC_REAL",
    "CS_COMPLEX",
    "MC_COMPLEX",
    "Connection",
    "BlockConnection",
    "ModZValue",
    "curvature",
    "cs_form",
    "cs_form_alt",
    "cs_form_complex",
    "pontryagin",
    "gauge_transform",
    "gauge_change_defect",
    "block_sum",
    "off_diagonal_curvature",
    "block_cs_defect",
    "stable_extend",
    "reduce_mod_Z",
    "data_derivative",
]

PI2 = math.pi ** 2
CS_REAL = -1.0 / (16.0 * PI2)
MC_REAL = 1.0 / (48.0 * PI2)
CS_COMPLEX = -1.0 / (8.0 * PI2)
MC_COMPLEX = 1.0 / (24.0 * PI2)


@dataclass(frozen=True, eq=False)
class Connection:
    """``nabla = d + omega`` in a chosen frame."""

    omega: FormField
    frame_tag: str = ""

    def __post_init__(self):
        w = self.omega
        if w.degree != 1:
            raise ValueError(f"a connection form has degree 1, got {w.degree}")
        if w.shape[0] != w.shape[1]:
            raise ValueError(f"a connection form is square, got {w.shape}")

    @property
    def rank(self) -> int:
        return self.omega.shape[0]

    @property
    def scalar(self) -> str:
        return self.omega.scalar


@dataclass(frozen=True, eq=False)
class BlockConnection:
    """``omega = [[omega1, A], [B, omega2]]``."""

    omega1: FormField
    omega2: FormField
    A: FormField
    B: FormField

    def __post_init__(self):
        n1, n2 = self.omega1.shape[0], self.omega2.shape[0]
        want = {"omega1": (n1, n1), "omega2": (n2, n2), "A": (n1, n2), "B": (n2, n1)}
        blocks = {"omega1": self.omega1, "omega2": self.omega2, "A": self.A, "B": self.B}
        for name, f in blocks.items():
            if f.shape != want[name]:
                raise ValueError(f"block {name} has shape {f.shape}, expected {want[name]}")
            if f.degree != 1:
                raise ValueError(f"block {name} must be a 1-form")
        if len({f.chart_dim for f in blocks.values()}) != 1:
            raise ValueError("blocks live on different charts")
        if len({f.scalar for f in blocks.values()}) != 1:
            raise ValueError("blocks mix real and complex scalars")

    @property
    def scalar(self) -> str:
        return self.omega1.scalar


@dataclass(frozen=True)
class ModZValue:
    raw: float
    reduced: float
    nearest_int: int

    def distance_to(self, target: float) -> float:
        """Distance from ``raw`` to the class of ``target`` modulo Z."""
        return abs(reduce_mod_Z(self.raw - target).reduced)


def reduce_mod_Z(x: float) -> ModZValue:
    """Split ``x`` into ``nearest_int + reduced`` with ``reduced`` in [-1/2, 1/2)."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot reduce non-finite value {x}")
    n = math.floor(x + 0.5)
    return ModZValue(x, x - n, int(n))


def data_derivative(F: FormField, spec: DiffSpec = DEFAULT_DIFF) -> FormField:
    """``dF`` for input data: analytic when ``F`` has the channel, else per ``spec``."""
    if F.has_analytic:
        return exterior_derivative(F, ANALYTIC)
    if spec.analytic:
        return exterior_derivative(F, DEFAULT_DIFF)
    return exterior_derivative(F, spec)


# ----------------------------------------------------------------------
# curvature and the Chern-Simons form


def curvature(c: Connection, spec: DiffSpec = DEFAULT_DIFF) -> FormField:
    """``Omega = d omega + omega ^ omega``."""
    w = c.omega
    return field_sum([exterior_derivative(w, spec), field_wedge(w, w)])


def _cs_parts(w: FormField, dw: FormField):
    main = field_trace(field_sum([field_wedge(w, dw), field_scale(2.0 / 3.0, field_wedge(w, w, w))]))
    return main


def _cs_field(c: Connection, spec: DiffSpec, norm: float, check: bool, label: str) -> FormField:
    w = c.omega
    dw = exterior_derivative(w, spec)
    composite = field_scale(norm, _cs_parts(w, dw))
    d = w.chart_dim

    def value(x):
        wx, dwx = w(x), dw(x)
        w3 = wx @ wx @ wx
        main = _trace(wx @ dwx + (2.0 / 3.0) * w3)
        if check:
            # tr(omega Omega - 1/3 omega^3) with Omega = d omega + omega^2
            alt = _trace(wx @ (dwx + wx @ wx) - (1.0 / 3.0) * w3)
            scale = max(1.0, main.max_abs())
            if (main - alt).max_abs() > 1e-9 * scale:
                raise ArithmeticError("the two expressions of the Chern-Simons form disagree")
        return norm * main

    return FormField(d, 3, (1, 1), w.scalar, value, composite.partial_fn, label=label)


def _trace(u: MatValForm) -> MatValForm:
    return MatValForm(u.degree, u.base_dim, np.trace(u.coeffs, axis1=-2, axis2=-1)[..., None, None])


def cs_form(c: Connection, spec: DiffSpec = DEFAULT_DIFF, check: bool = True) -> FormField:
    """Real Chern-Simons 3-form ``-1/(16 pi^2) tr(omega d omega + 2/3 omega^3)``.

    With ``check`` every evaluation also computes
    ``-1/(16 pi^2) tr(omega Omega - 1/3 omega^3)`` and insists on agreement.
    """
    if c.scalar != "real":
        raise ValueError("cs_form takes real connections; use cs_form_complex")
    return _cs_field(c, spec, CS_REAL, check, "cs")


def cs_form_alt(c: Connection, spec: DiffSpec = DEFAULT_DIFF) -> FormField:
    """The same form written as ``-1/(16 pi^2) tr(omega Omega - 1/3 omega^3)``."""
    w = c.omega
    body = field_sum([field_wedge(w, curvature(c, spec)), field_scale(-1.0 / 3.0, field_wedge(w, w, w))])
    norm = CS_REAL if c.scalar == "real" else CS_COMPLEX
    return field_scale(norm, field_trace(body))


def cs_form_complex(c: Connection, spec: DiffSpec = DEFAULT_DIFF, check: bool = True) -> FormField:
    """Complex Chern-Simons form ``-1/(8 pi^2) tr_C(omega d omega + 2/3 omega^3)``."""
    if c.scalar != "complex":
        raise ValueError("cs_form_complex takes complex connections")
    return _cs_field(c, spec, CS_COMPLEX, check, "cs_C")


def pontryagin(c: Connection, spec: DiffSpec = DEFAULT_DIFF) -> FormField:
    """``-1/(16 pi^2) tr(Omega ^ Omega)`` (``-1/(8 pi^2)`` for complex input)."""
    omega = curvature(c, spec)
    norm = CS_REAL if c.scalar == "real" else CS_COMPLEX
    return field_scale(norm, field_trace(field_wedge(omega, omega)))


# ----------------------------------------------------------------------
# gauge changes


def _check_gauge(c: Connection, a: GroupMapField):
    if a.field.shape != c.omega.shape:
        raise ValueError(f"gauge map of shape {a.field.shape} does not fit a rank-{c.rank} connection")
    if a.field.chart_dim != c.omega.chart_dim:
        raise ValueError("gauge map and connection live on different charts")
    if a.field.scalar != c.scalar:
        raise ValueError("gauge map and connection mix real and complex scalars")


def gauge_transform(c: Connection, a: GroupMapField, spec: DiffSpec = DEFAULT_DIFF) -> Connection:
    """``omega' = a^{-1} omega a + a^{-1} da``."""
    _check_gauge(c, a)
    inv = field_inverse(a.field)
    da = data_derivative(a.field, spec)
    new = field_sum([field_wedge(inv, c.omega, a.field), field_wedge(inv, da)])
    tag = f"{c.frame_tag}*a" if c.frame_tag else "a"
    return Connection(new, tag)


def gauge_change_defect(c: Connection, a: GroupMapField, spec: DiffSpec = DEFAULT_DIFF) -> FormField:
    """Residual of the gauge-change formula for the Chern-Simons form.

    Returns ``cs(omega') - cs(omega) - 1/(48 pi^2) tr(theta^3)
    - 1/(16 pi^2) d tr(da a^{-1} omega)`` with ``theta = a^{-1} da``; it
    vanishes identically.  (Expanding ``omega' = a^{-1}(omega + da a^{-1})a``
    gives ``tr(omega' d omega' + 2/3 omega'^3) = tr(omega d omega + 2/3 omega^3)
    - 1/3 tr(theta^3) - d tr(da a^{-1} omega)``.)
    """
    if c.scalar != "real":
        raise ValueError("gauge_change_defect is stated for real connections")
    _check_gauge(c, a)
    inv = field_inverse(a.field)
    da = data_derivative(a.field, spec)
    theta = field_wedge(inv, da)
    new = gauge_transform(c, a, spec)
    mc = field_scale(MC_REAL, field_trace(field_wedge(theta, theta, theta)))
    exact = exterior_derivative(field_trace(field_wedge(da, inv, c.omega)), spec)
    return field_sum(
        [
            cs_form(new, spec, check=False),
            field_scale(-1.0, cs_form(c, spec, check=False)),
            field_scale(-1.0, mc),
            field_scale(CS_REAL, exact),
        ]
    )


# ----------------------------------------------------------------------
# block sums and stable extension


def block_sum(b: BlockConnection) -> Connection:
    return Connection(field_block([[b.omega1, b.A], [b.B, b.omega2]]), "block")


def off_diagonal_curvature(b: BlockConnection, spec: DiffSpec = DEFAULT_DIFF):
    """``(Omega12, Omega21)`` with ``Omega12 = dA + omega1 A + A omega2`` and
    ``Omega21 = dB + B omega1 + omega2 B``."""
    o12 = field_sum([exterior_derivative(b.A, spec), field_wedge(b.omega1, b.A), field_wedge(b.A, b.omega2)])
    o21 = field_sum([exterior_derivative(b.B, spec), field_wedge(b.B, b.omega1), field_wedge(b.omega2, b.B)])
    return o12, o21


def block_cs_defect(b: BlockConnection, spec: DiffSpec = DEFAULT_DIFF) -> FormField:
    """Residual of the block formula for the Chern-Simons form.

    ``cs(omega) - cs(omega1) - cs(omega2) + k (tr[A Omega21] + tr[B Omega12])``
    with ``k = 1/(16 pi^2)`` (``1/(8 pi^2)`` in the complex case); no
    condition on the blocks is needed.
    """
    o12, o21 = off_diagonal_curvature(b, spec)
    if b.scalar == "real":
        cs, k = cs_form, -CS_REAL
    else:
        cs, k = cs_form_complex, -CS_COMPLEX
    cross = field_sum([field_trace(field_wedge(b.A, o21)), field_trace(field_wedge(b.B, o12))])
    return field_sum(
        [
            cs(block_sum(b), spec, check=False),
            field_scale(-1.0, cs(Connection(b.omega1), spec, check=False)),
            field_scale(-1.0, cs(Connection(b.omega2), spec, check=False)),
            field_scale(k, cross),
        ]
    )


def stable_extend(c: Connection, extra_rank: int) -> Connection:
    """``omega (+) 0``: add a trivial rank-``k`` summand with the trivial connection."""
    if extra_rank < 0:
        raise ValueError("extra_rank must be non-negative")
    if extra_rank == 0:
        return c
    n, k, d = c.rank, extra_rank, c.omega.chart_dim
    z = lambda shape: zero_field(d, 1, shape, c.scalar)  # noqa: E731
    b = BlockConnection(c.omega, z((k, k)), z((n, k)), z((k, n)))
    return Connection(block_sum(b).omega, f"{c.frame_tag}+{k}")


def complexify(c: Connection) -> Connection:
    return Connection(field_to_complex(c.omega), c.frame_tag)
