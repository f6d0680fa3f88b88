"""Form fields over a coordinate chart and their calculus.

A :class:`FormField` is a vectorized callable ``x -> MatValForm``: given
points of shape ``(..., d)`` it returns a form with batch shape ``x.shape[:-1]``.

Fields may carry an *analytic channel*: ``partial(s)`` returns the exact
coordinate partial derivative ``d/dx_s`` as another :class:`FormField`.  Leaf
fields (constants, separable trigonometric/polynomial expansions) know their
derivatives to every order, and every operation in this module propagates the
channel by the Leibniz rule, so composite fields built from analytic leaves
are differentiable to any order without finite differences.

Fields lacking the channel can be given a central-difference one with
:func:`with_fd_partials`.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from math import comb
from typing import Callable, Sequence

import numpy as np

from .grassmann import MatValForm, basis, eval_on_vectors, wedge

__all__ = [
    "DiffSpec",
    "ANALYTIC",
    "DEFAULT_DIFF",
    "FormField",
    "MissingDerivativeError",
    "ChartMap",
    "shared_evaluation",
    "constant_field",
    "zero_field",
    "separable_field",
    "polynomial_field",
    "random_trig_field",
    "multilinear",
    "field_sum",
    "field_map",
    "field_block",
    "field_wedge",
    "field_trace",
    "field_combine",
    "field_scale",
    "field_transpose",
    "field_to_complex",
    "field_inverse",
    "field_power",
    "field_exp",
    "field_scalar_mul",
    "field_expm",
    "field_function",
    "field_cos",
    "with_fd_partials",
    "fd_partial",
    "exterior_derivative",
    "pullback",
    "realify",
    "realify_matrix",
]


class MissingDerivativeError(ValueError):
    """An analytic derivative was requested from a field without one."""


@dataclass(frozen=True)
class DiffSpec:
    """How derivatives of constructed fields are taken.

    ``step`` is in chart units; with ``richardson`` the steps ``h`` and
    ``h/2`` are combined to cancel the ``O(h^2)`` term.
    """

    backend: str = "central_fd"
    step: float = 1e-5
    richardson: bool = True

    def __post_init__(self):
        if self.backend not in ("analytic", "central_fd"):
            raise ValueError(f"unknown differentiation backend {self.backend!r}")
        if not (1e-8 <= self.step <= 1e-2):
            raise ValueError(f"finite-difference step {self.step} outside [1e-8, 1e-2]")

    @property
    def analytic(self) -> bool:
        return self.backend == "analytic"


ANALYTIC = DiffSpec("analytic")
DEFAULT_DIFF = DiffSpec()


# ----------------------------------------------------------------------
# per-evaluation memoization

_MEMO: contextvars.ContextVar = contextvars.ContextVar("csforms_memo", default=None)


@contextlib.contextmanager
def shared_evaluation():
    """Memoize field evaluations on identical point arrays inside the block.

    Composite fields re-evaluate shared sub-fields many times; within this
    context each ``(field, points)`` pair is computed once.  Fields are pure,
    so this never changes results.
    """
    if _MEMO.get() is not None:
        yield
        return
    token = _MEMO.set({})
    try:
        yield
    finally:
        _MEMO.reset(token)


# ----------------------------------------------------------------------
# the field type


@dataclass(frozen=True, eq=False)
class FormField:
    """A smooth family of :class:`MatValForm` values over a chart.

    Parameters
    ----------
    chart_dim : int
    degree : int
    shape : tuple of int
    scalar : {"real", "complex"}
    value_fn : callable
        Vectorized: maps points ``(..., chart_dim)`` to a form with batch
        shape ``x.shape[:-1]``.
    partial_fn : callable, optional
        ``s -> FormField`` giving the exact partial derivative along axis
        ``s``.  ``None`` when no analytic channel exists.
    constant : bool
        Marks fields known to be constant; their partials are zero.
    """

    chart_dim: int
    degree: int
    shape: tuple
    scalar: str
    value_fn: Callable[[np.ndarray], MatValForm]
    partial_fn: Callable[[int], "FormField"] | None = None
    constant: bool = False
    label: str = ""
    _partials: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        if self.scalar not in ("real", "complex"):
            raise ValueError(f"scalar must be 'real' or 'complex', got {self.scalar!r}")
        if len(self.shape) != 2:
            raise ValueError(f"shape must be a pair, got {self.shape}")

    @classmethod
    def from_callables(
        cls,
        chart_dim,
        degree,
        shape,
        value_fn,
        derivative_fn=None,
        scalar="real",
        vectorized=True,
    ) -> "FormField":
        """Wrap plain callables.

        ``derivative_fn(x)`` must return the list of ``chart_dim`` partial
        derivatives at ``x``; it becomes a first-order analytic channel.
        With ``vectorized=False`` the callables see one point at a time.
        """
        if not vectorized:
            value_fn = _vectorize(value_fn, chart_dim)
            if derivative_fn is not None:
                derivative_fn = _vectorize_list(derivative_fn, chart_dim)
        partial_fn = None
        if derivative_fn is not None:
            def partial_fn(s):
                return cls(chart_dim, degree, shape, scalar, lambda x: derivative_fn(x)[s])
        return cls(chart_dim, degree, shape, scalar, value_fn, partial_fn)

    # ------------------------------------------------------------------

    def __call__(self, x) -> MatValForm:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.chart_dim,):
            raise ValueError(f"points must have trailing axis {self.chart_dim}, got {x.shape}")
        memo = _MEMO.get()
        if memo is None:
            # top-level call: memoize shared sub-fields for this evaluation
            with shared_evaluation():
                return self(x)
        key = (id(self), id(x))
        hit = memo.get(key)
        if hit is not None:
            return hit[2]
        val = self.value_fn(x)
        if val.degree != self.degree or val.shape != self.shape or val.base_dim != self.chart_dim:
            raise ValueError(
                f"field {self.label or '<anon>'} produced degree {val.degree} shape {val.shape}, "
                f"declared degree {self.degree} shape {self.shape}"
            )
        memo[key] = (self, x, val)
        return val

    @property
    def has_analytic(self) -> bool:
        return self.constant or self.partial_fn is not None

    def partial(self, s: int) -> "FormField":
        if not 0 <= s < self.chart_dim:
            raise IndexError(f"axis {s} out of range for chart_dim {self.chart_dim}")
        cached = self._partials.get(s)
        if cached is not None:
            return cached
        if self.constant:
            out = zero_field(self.chart_dim, self.degree, self.shape, self.scalar)
        elif self.partial_fn is None:
            raise MissingDerivativeError(f"field {self.label or '<anon>'} has no analytic derivative")
        else:
            out = self.partial_fn(s)
        self._partials[s] = out
        return out

    def derivative_fn(self, x) -> list[MatValForm]:
        """Analytic partial derivatives at ``x``, one per chart axis."""
        return [self.partial(s)(x) for s in range(self.chart_dim)]

    def matrix(self, x) -> np.ndarray:
        return self(x).matrix()


def _vectorize(fn, d):
    def value(x):
        flat = x.reshape(-1, d)
        vals = [fn(p) for p in flat]
        coeffs = np.stack([v.coeffs for v in vals]).reshape(x.shape[:-1] + vals[0].coeffs.shape)
        return MatValForm(vals[0].degree, vals[0].base_dim, coeffs)
    return value


def _vectorize_list(fn, d):
    def value(x):
        flat = x.reshape(-1, d)
        rows = [fn(p) for p in flat]
        out = []
        for s in range(d):
            c = np.stack([r[s].coeffs for r in rows]).reshape(x.shape[:-1] + rows[0][s].coeffs.shape)
            out.append(MatValForm(rows[0][s].degree, rows[0][s].base_dim, c))
        return out
    return value


def _batch(x) -> tuple:
    return np.shape(x)[:-1]


# ----------------------------------------------------------------------
# leaves


def constant_field(value, chart_dim: int | None = None) -> FormField:
    """A constant field from a :class:`MatValForm` or a matrix (degree 0)."""
    if not isinstance(value, MatValForm):
        if chart_dim is None:
            raise ValueError("chart_dim is required for a matrix constant")
        value = MatValForm.from_matrix(value, chart_dim)
    form = value

    def fn(x):
        b = _batch(x)
        return MatValForm(form.degree, form.base_dim, np.broadcast_to(form.coeffs, b + form.coeffs.shape))

    return FormField(form.base_dim, form.degree, form.shape, form.scalar, fn, constant=True, label="const")


def zero_field(chart_dim, degree, shape, scalar="real") -> FormField:
    return constant_field(MatValForm.zero(degree, chart_dim, shape, scalar))


_TRIG, _MONO = 0, 1


def _falling(n, k):
    out = np.ones_like(n, dtype=float)
    for j in range(int(np.max(k, initial=0))):
        out = out * np.where(j < k, n - j, 1.0)
    return out


def separable_field(kinds, freqs, phases, coeffs, degree, chart_dim, order=None, label="separable"):
    """Sum of separable terms ``C_m * prod_s f_{m,s}(x_s)``.

    Each factor is ``cos(n x + phase)`` (kind 0) or the monomial ``x**n``
    (kind 1).  ``coeffs`` has shape ``(M, comb(d, p), k, k')``.  Partials of
    every order are exact: differentiation only bumps ``order``.
    """
    kinds = np.asarray(kinds, dtype=int)
    freqs = np.asarray(freqs, dtype=float)
    phases = np.asarray(phases, dtype=float)
    coeffs = np.asarray(coeffs)
    if not np.iscomplexobj(coeffs):
        coeffs = coeffs.astype(float)
    m, d = kinds.shape
    if d != chart_dim or freqs.shape != (m, d) or phases.shape != (m, d):
        raise ValueError("term tables must have shape (M, chart_dim)")
    if coeffs.shape[:2] != (m, comb(chart_dim, degree)):
        raise ValueError(f"coeffs must have shape (M, C(d,p), k, k'), got {coeffs.shape}")
    order = np.zeros(d, dtype=int) if order is None else np.asarray(order, dtype=int)
    trig = kinds == _TRIG
    # constant per-term prefactor of the differentiated factors
    k = np.broadcast_to(order, (m, d))
    pref = np.where(trig, freqs ** k, _falling(freqs, k))
    pref = np.prod(pref, axis=1)
    shift = phases + k * (np.pi / 2)
    powers = np.maximum(freqs - k, 0)
    dead = (~trig) & (k > freqs)
    pref = np.where(dead.any(axis=1), 0.0, pref)
    weighted = pref[:, None, None, None] * coeffs
    scalar = "complex" if np.iscomplexobj(coeffs) else "real"
    shape = coeffs.shape[2:]

    any_mono = bool((~trig).any())
    all_mono = bool((~trig).all())

    def value(x):
        xs = x[..., None, :]  # (..., 1, d)
        if all_mono:
            fac = xs ** powers
        elif any_mono:
            fac = np.where(trig, np.cos(freqs * xs + shift), xs ** powers)
        else:
            fac = np.cos(freqs * xs + shift)
        basis_vals = np.prod(fac, axis=-1)  # (..., M)
        c = np.tensordot(basis_vals, weighted, axes=([-1], [0]))
        return MatValForm(degree, chart_dim, c)

    def partial(s):
        o = order.copy()
        o[s] += 1
        return separable_field(kinds, freqs, phases, coeffs, degree, chart_dim, o, label)

    return FormField(chart_dim, degree, shape, scalar, value, partial, label=label)


def polynomial_field(terms, degree, chart_dim, shape=None) -> FormField:
    """Polynomial-coefficient field from ``[(exponents, index, matrix), ...]``.

    ``index`` is the increasing 0-based multi-index the term contributes to.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("need at least one term")
    pos = {idx: n for n, idx in enumerate(basis(chart_dim, degree))}
    first = np.atleast_2d(np.asarray(terms[0][2]))
    shape = first.shape if shape is None else tuple(shape)
    dtype = complex if any(np.iscomplexobj(t[2]) for t in terms) else float
    m = len(terms)
    coeffs = np.zeros((m, comb(chart_dim, degree)) + tuple(shape), dtype=dtype)
    freqs = np.zeros((m, chart_dim))
    for n, (expo, idx, mat) in enumerate(terms):
        freqs[n] = expo
        coeffs[n, pos[tuple(idx)]] = np.atleast_2d(np.asarray(mat))
    kinds = np.full((m, chart_dim), _MONO)
    return separable_field(kinds, freqs, np.zeros_like(freqs), coeffs, degree, chart_dim, label="poly")


def random_trig_field(rng, chart_dim, degree, shape, n_terms=4, max_freq=2, scalar="real", scale=1.0):
    """Seeded random trigonometric polynomial field with ``|c| <= scale``."""
    freqs = rng.integers(0, max_freq + 1, size=(n_terms, chart_dim)).astype(float)
    phases = rng.uniform(0, 2 * np.pi, size=(n_terms, chart_dim))
    size = (n_terms, comb(chart_dim, degree)) + tuple(shape)
    coeffs = rng.uniform(-scale, scale, size=size)
    if scalar == "complex":
        coeffs = coeffs + 1j * rng.uniform(-scale, scale, size=size)
    kinds = np.zeros((n_terms, chart_dim), dtype=int)
    return separable_field(kinds, freqs, phases, coeffs, degree, chart_dim, label="trig")


# ----------------------------------------------------------------------
# composite fields


def _all_differentiable(ops) -> bool:
    return all(op.has_analytic for op in ops)


def multilinear(fn, operands, degree, shape, scalar, label="multilinear") -> FormField:
    """Field ``x -> fn(op_1(x), ..., op_n(x))`` for ``fn`` linear in each slot.

    Each operand must enter every term of ``fn`` exactly once (pass a field
    twice to use it twice).  The analytic channel then follows from the
    Leibniz rule.
    """
    operands = list(operands)
    d = operands[0].chart_dim
    if any(op.chart_dim != d for op in operands):
        raise ValueError("operands live on charts of different dimension")
    live = [i for i, op in enumerate(operands) if not op.constant]

    def value(x):
        return fn(*[op(x) for op in operands])

    def partial(s):
        variants = []
        for i in live:
            ops = list(operands)
            ops[i] = operands[i].partial(s)
            variants.append(ops)
        if not variants:
            return zero_field(d, degree, shape, scalar)

        def dvalue(x):
            vals = [op(x) for op in operands]
            out = None
            for i in live:
                args = list(vals)
                args[i] = operands[i].partial(s)(x)
                term = fn(*args)
                out = term if out is None else out + term
            return out

        def dpartial(t):
            return field_sum([multilinear(fn, ops, degree, shape, scalar, label).partial(t) for ops in variants])

        return FormField(d, degree, shape, scalar, dvalue, dpartial, label=f"d{s}({label})")

    return FormField(
        d,
        degree,
        shape,
        scalar,
        value,
        partial if _all_differentiable(operands) else None,
        constant=not live,
        label=label,
    )


def field_sum(fields: Sequence[FormField]) -> FormField:
    fields = list(fields)
    f0 = fields[0]
    if len(fields) == 1:
        return f0
    for f in fields[1:]:
        if (f.chart_dim, f.degree, f.shape, f.scalar) != (f0.chart_dim, f0.degree, f0.shape, f0.scalar):
            raise ValueError("field_sum: structure mismatch")

    def value(x):
        return reduce(lambda a, b: a + b, (f(x) for f in fields))

    def partial(s):
        return field_sum([f.partial(s) for f in fields if not f.constant] or [f0.partial(s)])

    return FormField(
        f0.chart_dim,
        f0.degree,
        f0.shape,
        f0.scalar,
        value,
        partial if _all_differentiable(fields) else None,
        constant=all(f.constant for f in fields),
        label="sum",
    )


def field_map(u: FormField, fn, shape=None, scalar=None, label="map") -> FormField:
    """Apply a coefficient-wise *linear* map ``fn(coeffs) -> coeffs``."""
    shape = u.shape if shape is None else tuple(shape)
    scalar = u.scalar if scalar is None else scalar

    def value(x):
        v = u(x)
        return MatValForm(v.degree, v.base_dim, fn(v.coeffs))

    def partial(s):
        return field_map(u.partial(s), fn, shape, scalar, label)

    return FormField(
        u.chart_dim, u.degree, shape, scalar, value, partial if u.has_analytic else None, constant=u.constant, label=label
    )


def field_block(rows: Sequence[Sequence[FormField]]) -> FormField:
    """Assemble a block-matrix field; every block has the same degree."""
    rows = [list(r) for r in rows]
    flat = [f for r in rows for f in r]
    f0 = flat[0]
    if any(f.degree != f0.degree or f.chart_dim != f0.chart_dim for f in flat):
        raise ValueError("field_block: blocks must share degree and chart")
    heights = [r[0].shape[0] for r in rows]
    widths = [f.shape[1] for f in rows[0]]
    for r, h in zip(rows, heights):
        if len(r) != len(widths) or any(f.shape != (h, w) for f, w in zip(r, widths)):
            raise ValueError("field_block: inconsistent block shapes")
    scalar = "complex" if any(f.scalar == "complex" for f in flat) else "real"

    def value(x):
        vals = [[f(x).coeffs for f in r] for r in rows]
        c = np.concatenate([np.concatenate(r, axis=-1) for r in vals], axis=-2)
        return MatValForm(f0.degree, f0.chart_dim, c)

    def partial(s):
        return field_block([[f.partial(s) for f in r] for r in rows])

    return FormField(
        f0.chart_dim,
        f0.degree,
        (sum(heights), sum(widths)),
        scalar,
        value,
        partial if _all_differentiable(flat) else None,
        constant=all(f.constant for f in flat),
        label="block",
    )


def field_wedge(*fields: FormField) -> FormField:
    """Wedge product of two or more fields."""
    if len(fields) < 2:
        return fields[0]
    degree = sum(f.degree for f in fields)
    for a, b in zip(fields, fields[1:]):
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"field_wedge: cannot multiply {a.shape} by {b.shape}")
        if a.scalar != b.scalar:
            raise ValueError("field_wedge: cannot mix real and complex fields")
    shape = (fields[0].shape[0], fields[-1].shape[1])

    def fn(*vals):
        return reduce(wedge, vals)

    return multilinear(fn, fields, degree, shape, fields[0].scalar, label="wedge")


def field_trace(u: FormField) -> FormField:
    if u.shape[0] != u.shape[1]:
        raise ValueError(f"trace needs a square shape, got {u.shape}")
    return field_map(u, lambda c: np.trace(c, axis1=-2, axis2=-1)[..., None, None], (1, 1), label="trace")


def field_scale(c, u: FormField) -> FormField:
    scalar = "complex" if (np.iscomplexobj(c) or u.scalar == "complex") else "real"
    return field_map(u, lambda a: c * a, scalar=scalar, label="scale")


def field_combine(c1, u: FormField, c2, v: FormField) -> FormField:
    """Coefficient-wise ``c1*u + c2*v``."""
    if (u.degree, u.shape, u.chart_dim) != (v.degree, v.shape, v.chart_dim):
        raise ValueError("field_combine: structure mismatch")
    return field_sum([field_scale(c1, u), field_scale(c2, v)])


def field_transpose(u: FormField, conjugate=False) -> FormField:
    if conjugate:
        return field_map(u, lambda c: np.conj(np.swapaxes(c, -1, -2)), u.shape[::-1], label="adjoint")
    return field_map(u, lambda c: np.swapaxes(c, -1, -2), u.shape[::-1], label="transpose")


def field_to_complex(u: FormField) -> FormField:
    if u.scalar == "complex":
        return u
    return field_map(u, lambda c: c.astype(complex), scalar="complex", label="complexify")


def _neg_sandwich(a, da, b):
    return -wedge(wedge(a, da), b)


def field_inverse(a: FormField) -> FormField:
    """Pointwise inverse of an invertible degree-0 square field."""
    if a.degree != 0 or a.shape[0] != a.shape[1]:
        raise ValueError("field_inverse needs a square degree-0 field")
    d = a.chart_dim
    holder = {}

    def value(x):
        m = a(x).matrix()
        if np.any(np.abs(np.linalg.det(m)) < 1e-300):
            raise np.linalg.LinAlgError("singular matrix in field_inverse")
        return MatValForm.from_matrix(np.linalg.inv(m), d)

    def partial(s):
        inv = holder["inv"]
        return multilinear(_neg_sandwich, [inv, a.partial(s), inv], 0, a.shape, a.scalar, "d(inv)")

    inv = FormField(d, 0, a.shape, a.scalar, value, partial if a.has_analytic else None, constant=a.constant, label="inv")
    holder["inv"] = inv
    return inv


def _scalar_product(f, g):
    # (1,1) degree-0 times any form
    return MatValForm(g.degree, g.base_dim, f.coeffs[..., 0, 0, 0][..., None, None, None] * g.coeffs)


def field_scalar_mul(f: FormField, u: FormField) -> FormField:
    """Multiply a field by a scalar degree-0 field ``f`` (shape ``(1, 1)``)."""
    if f.degree != 0 or f.shape != (1, 1):
        raise ValueError("field_scalar_mul needs a scalar 0-form")
    scalar = "complex" if "complex" in (f.scalar, u.scalar) else "real"
    return multilinear(_scalar_product, [f, u], u.degree, u.shape, scalar, "scalar_mul")


def field_power(f: FormField, alpha: float) -> FormField:
    """``f**alpha`` for a positive scalar 0-form."""
    if f.degree != 0 or f.shape != (1, 1):
        raise ValueError("field_power needs a scalar 0-form")

    def value(x):
        v = f(x)
        return MatValForm(0, v.base_dim, v.coeffs ** alpha)

    def partial(s):
        return field_scale(alpha, field_scalar_mul(field_power(f, alpha - 1), f.partial(s)))

    return FormField(f.chart_dim, 0, (1, 1), f.scalar, value, partial if f.has_analytic else None,
                     constant=f.constant, label=f"pow{alpha}")


def field_exp(f: FormField) -> FormField:
    """``exp(f)`` for a scalar 0-form."""
    if f.degree != 0 or f.shape != (1, 1):
        raise ValueError("field_exp needs a scalar 0-form")
    holder = {}

    def value(x):
        v = f(x)
        return MatValForm(0, v.base_dim, np.exp(v.coeffs))

    def partial(s):
        return field_scalar_mul(f.partial(s), holder["e"])

    e = FormField(f.chart_dim, 0, (1, 1), f.scalar, value, partial if f.has_analytic else None,
                  constant=f.constant, label="exp")
    holder["e"] = e
    return e


def field_function(u: FormField, derivative, order: int = 0, label="fn") -> FormField:
    """``x -> g(u(x))`` for a real scalar 0-form ``u``.

    ``derivative(n)`` returns the vectorized ``n``-th derivative of ``g``; the
    analytic channel follows from the chain rule.
    """
    if u.degree != 0 or u.shape != (1, 1):
        raise ValueError("field_function needs a scalar 0-form")
    g = derivative(order)

    def value(x):
        v = u(x)
        return MatValForm(0, v.base_dim, g(v.coeffs))

    def partial(s):
        return field_scalar_mul(field_function(u, derivative, order + 1, label), u.partial(s))

    return FormField(u.chart_dim, 0, (1, 1), u.scalar, value, partial if u.has_analytic else None,
                     constant=u.constant, label=label)


def field_cos(u: FormField) -> FormField:
    return field_function(u, lambda n: (lambda t: np.cos(t + n * np.pi / 2)), label="cos")


def field_expm(theta: FormField, generator) -> FormField:
    """One-parameter subgroup map ``x -> expm(theta(x) * G)``.

    ``theta`` is a real scalar 0-form and ``G`` a constant square matrix.
    """
    gen = np.asarray(generator)
    n = gen.shape[0]
    evals, evecs = np.linalg.eig(gen)
    cond = np.linalg.cond(evecs)
    real = not np.iscomplexobj(gen)
    d = theta.chart_dim
    holder = {}

    def value(x):
        t = theta(x).coeffs[..., 0, 0, 0]
        if cond < 1e8:
            e = np.exp(t[..., None] * evals)
            m = np.einsum("ij,...j,jk->...ik", evecs, e, np.linalg.inv(evecs))
        else:
            from scipy.linalg import expm
            m = np.stack([expm(tt * gen) for tt in t.ravel()]).reshape(t.shape + (n, n))
        if real:
            m = m.real
        return MatValForm.from_matrix(m, d)

    def partial(s):
        return multilinear(
            lambda dt, e: _scalar_product(dt, MatValForm(0, e.base_dim, gen @ e.coeffs)),
            [theta.partial(s), holder["e"]],
            0,
            (n, n),
            "real" if real else "complex",
            "d(expm)",
        )

    e = FormField(d, 0, (n, n), "real" if real else "complex", value,
                  partial if theta.has_analytic else None, constant=theta.constant, label="expm")
    holder["e"] = e
    return e


# ----------------------------------------------------------------------
# finite differences


def _fd_partials_at(F: FormField, x: np.ndarray, spec: DiffSpec, axes) -> list[np.ndarray]:
    axes = list(axes)
    steps = [spec.step, spec.step / 2] if spec.richardson else [spec.step]
    eye = np.eye(F.chart_dim)
    offsets = []
    for h in steps:
        for s in axes:
            offsets.append(h * eye[s])
            offsets.append(-h * eye[s])
    offsets = np.array(offsets).reshape((len(offsets),) + (1,) * (x.ndim - 1) + (F.chart_dim,))
    vals = F(x[None, ...] + offsets).coeffs
    out = []
    na = len(axes)
    for j in range(na):
        diffs = []
        for n, h in enumerate(steps):
            plus = vals[2 * (n * na + j)]
            minus = vals[2 * (n * na + j) + 1]
            diffs.append((plus - minus) / (2 * h))
        if spec.richardson:
            out.append((4 * diffs[1] - diffs[0]) / 3)
        else:
            out.append(diffs[0])
    return out


def fd_partial(F: FormField, s: int, spec: DiffSpec = DEFAULT_DIFF) -> FormField:
    """Central-difference approximation of ``d/dx_s F`` as a field."""

    def value(x):
        return MatValForm(F.degree, F.chart_dim, _fd_partials_at(F, x, spec, [s])[0])

    return FormField(F.chart_dim, F.degree, F.shape, F.scalar, value, label=f"fd{s}({F.label})")


def with_fd_partials(F: FormField, spec: DiffSpec = DEFAULT_DIFF) -> FormField:
    """Return ``F`` itself if it has an analytic channel, else an FD-backed copy."""
    if F.has_analytic:
        return F

    def partial(s):
        return with_fd_partials(fd_partial(F, s, spec), spec)

    return FormField(F.chart_dim, F.degree, F.shape, F.scalar, F.value_fn, partial, label=F.label)


# ----------------------------------------------------------------------
# exterior derivative, pullback, realification


@lru_cache(maxsize=None)
def _d_table(d: int, p: int) -> np.ndarray:
    # table[s, I, K]: coefficient of dx^s ^ dx^I on dx^K
    src = basis(d, p)
    dst = {idx: n for n, idx in enumerate(basis(d, p + 1))}
    table = np.zeros((d, len(src), len(dst)))
    for i, idx in enumerate(src):
        for s in range(d):
            if s in idx:
                continue
            merged = tuple(sorted((s,) + idx))
            table[s, i, dst[merged]] = -1.0 if merged.index(s) % 2 else 1.0
    table.setflags(write=False)
    return table


def _assemble_d(partials: Sequence[np.ndarray], d: int, p: int) -> np.ndarray:
    stacked = np.stack(partials, axis=-4)  # (..., d, C_p, k, k')
    table = _d_table(d, p)
    a, b = stacked.shape[-2:]
    flat = stacked.reshape(stacked.shape[:-4] + (table.shape[0] * table.shape[1], a * b))
    out = np.matmul(table.reshape(-1, table.shape[2]).T, flat)
    return out.reshape(out.shape[:-1] + (a, b))


def exterior_derivative(F: FormField, spec: DiffSpec = DEFAULT_DIFF) -> FormField:
    """Exterior derivative ``dF`` of a matrix-valued form field.

    With the analytic backend ``F`` must carry an analytic channel and the
    result carries one too.  With ``central_fd`` the coordinate partials are
    central differences of ``F`` (Richardson-extrapolated when enabled).
    """
    d, p = F.chart_dim, F.degree
    if p >= d:
        return zero_field(d, p + 1, F.shape, F.scalar)
    if F.constant:
        return zero_field(d, p + 1, F.shape, F.scalar)
    if spec.analytic:
        if F.partial_fn is None:
            raise MissingDerivativeError(
                f"analytic exterior derivative requested for field {F.label or '<anon>'} without one"
            )

        def value(x):
            parts = [F.partial(s)(x).coeffs for s in range(d)]
            return MatValForm(p + 1, d, _assemble_d(parts, d, p))

        def partial(t):
            return exterior_derivative(F.partial(t), spec)

        return FormField(d, p + 1, F.shape, F.scalar, value, partial, label=f"d({F.label})")

    def fd_value(x):
        return MatValForm(p + 1, d, _assemble_d(_fd_partials_at(F, x, spec, range(d)), d, p))

    return FormField(d, p + 1, F.shape, F.scalar, fd_value, label=f"d_fd({F.label})")


@dataclass(frozen=True)
class ChartMap:
    """Smooth map between charts with an optional analytic Jacobian.

    ``value_fn`` maps ``(..., dim_in)`` to ``(..., dim_out)``;
    ``jacobian_fn`` returns ``(..., dim_out, dim_in)``.
    """

    dim_in: int
    dim_out: int
    value_fn: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x):
        return self.value_fn(np.asarray(x, dtype=float))

    def jacobian(self, x, spec: DiffSpec = DEFAULT_DIFF) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.jacobian_fn is not None:
            return self.jacobian_fn(x)
        if spec.analytic:
            raise MissingDerivativeError("chart map has no analytic Jacobian")
        as_field = FormField(
            self.dim_in, 0, (self.dim_out, 1), "real",
            lambda y: MatValForm.from_matrix(self.value_fn(y)[..., :, None], self.dim_in),
        )
        cols = _fd_partials_at(as_field, x, spec, range(self.dim_in))
        return np.stack([c[..., 0, :, 0] for c in cols], axis=-1)

    def compose(self, inner: "ChartMap") -> "ChartMap":
        """``self o inner``."""
        if inner.dim_out != self.dim_in:
            raise ValueError("dimension mismatch in composition")
        jac = None
        if self.jacobian_fn is not None and inner.jacobian_fn is not None:
            def jac(x):
                return self.jacobian_fn(inner(x)) @ inner.jacobian_fn(x)
        return ChartMap(inner.dim_in, self.dim_out, lambda x: self(inner(x)), jac)

    @classmethod
    def from_field(cls, f: FormField) -> "ChartMap":
        """Map given by a degree-0 column field with an analytic channel."""
        if f.degree != 0 or f.shape[1] != 1:
            raise ValueError("from_field needs a degree-0 column field")

        def value(x):
            return f(x).matrix()[..., :, 0]

        jac = None
        if f.has_analytic:
            def jac(x):
                return np.stack([f.partial(s)(x).matrix()[..., :, 0] for s in range(f.chart_dim)], axis=-1)
        return cls(f.chart_dim, f.shape[0], value, jac)


def pullback(F: FormField, phi: ChartMap, spec: DiffSpec = DEFAULT_DIFF) -> FormField:
    """Pull ``F`` (living on the target chart) back along ``phi``.

    ``(phi^* F)(x)(v_1, ..., v_p) = F(phi(x))(J v_1, ..., J v_p)``.
    """
    if F.chart_dim != phi.dim_out:
        raise ValueError(f"field lives on a {F.chart_dim}-chart, map lands in dimension {phi.dim_out}")
    p, d = F.degree, phi.dim_in

    def value(x):
        fy = F(phi(x))
        jac = phi.jacobian(x, spec)
        parts = [eval_on_vectors(fy, [jac[..., :, i] for i in idx]) for idx in basis(d, p)]
        if parts:
            c = np.stack(parts, axis=-3)
        else:
            c = np.zeros(x.shape[:-1] + (0,) + F.shape, dtype=fy.coeffs.dtype)
        return MatValForm(p, d, c)

    return FormField(d, p, F.shape, F.scalar, value, label=f"pullback({F.label})")


def realify_matrix(a) -> np.ndarray:
    """Real image of a complex matrix: each entry ``x+iy`` -> ``[[x,-y],[y,x]]``."""
    a = np.asarray(a, dtype=complex)
    k, kk = a.shape[-2:]
    out = np.empty(a.shape[:-2] + (2 * k, 2 * kk))
    out[..., 0::2, 0::2] = a.real
    out[..., 0::2, 1::2] = -a.imag
    out[..., 1::2, 0::2] = a.imag
    out[..., 1::2, 1::2] = a.real
    return out


def realify(F: FormField) -> FormField:
    """Underlying real field of a complex square field (shape ``2n x 2n``)."""
    if F.scalar != "complex":
        raise ValueError("realify needs a complex field")
    if F.shape[0] != F.shape[1]:
        raise ValueError(f"realify needs a square shape, got {F.shape}")
    n = F.shape[0]
    return field_map(F, realify_matrix, (2 * n, 2 * n), "real", label="realify")
