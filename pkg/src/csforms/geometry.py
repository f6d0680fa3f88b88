"""Charts, frames, metrics, 3-cycles and quadrature.

The round sphere is handled in Hopf coordinates ``(eta, xi1, xi2)`` with

    q = (cos(eta) e^{i xi1}, sin(eta) e^{i xi2}) = z1 + z2 j,

a single chart whose complement in S^3 has measure zero.  Lens spaces are
slabs ``xi1 in [0, 2 pi / p)`` of that chart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd

import numpy as np

from .calculus import (
    ANALYTIC,
    DEFAULT_DIFF,
    DiffSpec,
    FormField,
    MatValForm,
    exterior_derivative,
    field_block,
    field_inverse,
    field_map,
    field_power,
    field_scalar_mul,
    field_scale,
    field_sum,
    field_transpose,
    field_wedge,
    multilinear,
    separable_field,
    shared_evaluation,
    with_fd_partials,
)
from .lie import left_matrix

__all__ = [
    "Chart",
    "Cycle3",
    "Frame",
    "MetricField",
    "LensParams",
    "QuadratureSpec",
    "hopf_chart",
    "hopf_embedding",
    "sphere_cycle",
    "lens_cycle",
    "lens_deck",
    "left_invariant_frame",
    "round_metric",
    "volume_form",
    "quadrature_nodes",
    "integrate3",
    "levi_civita_form",
    "induced_hypersurface_connection",
    "ellipsoid_embedding",
    "ellipsoid_frame",
    "gram_schmidt",
    "frame_from_ambient",
    "random_ambient_function",
    "frame_derivative",
    "conformal_variation",
    "conformal_metric",
]


@dataclass(frozen=True, eq=False)
class Chart:
    """Box-shaped coordinate domain.

    ``embedding`` is an optional degree-0 column field ``(N, 1)`` giving the
    map into R^N.  ``orientation_sign`` is +1 when the coordinate order is
    positively oriented.
    """

    dim: int
    lower: tuple
    upper: tuple
    periodic: tuple
    orientation_sign: int = 1
    embedding: FormField | None = None
    name: str = "chart"

    def __post_init__(self):
        for attr in ("lower", "upper", "periodic"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        if not (len(self.lower) == len(self.upper) == len(self.periodic) == self.dim):
            raise ValueError("chart bounds and periodicity flags must have length dim")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("chart domain is degenerate")
        if self.orientation_sign not in (1, -1):
            raise ValueError("orientation_sign must be +1 or -1")
        if self.embedding is not None and self.embedding.chart_dim != self.dim:
            raise ValueError("embedding lives on a chart of another dimension")

    def embed(self, x) -> np.ndarray:
        if self.embedding is None:
            raise ValueError(f"chart {self.name} has no embedding")
        return self.embedding(x).matrix()[..., :, 0]

    def embedding_jacobian(self) -> FormField:
        """``(N, d)`` field of partial derivatives of the embedding."""
        if self.embedding is None:
            raise ValueError(f"chart {self.name} has no embedding")
        emb = with_fd_partials(self.embedding)
        return field_block([[emb.partial(s) for s in range(self.dim)]])

    def sample(self, rng, n: int, margin: float = 0.05) -> np.ndarray:
        """Random interior points, kept ``margin`` (relative) away from the edges."""
        lo, hi = np.array(self.lower), np.array(self.upper)
        span = hi - lo
        return lo + span * rng.uniform(margin, 1 - margin, size=(n, self.dim))


@dataclass(frozen=True, eq=False)
class Cycle3:
    """A 3-cycle: a chart, a sub-box of its domain, and a rational weight."""

    chart: Chart
    lower: tuple | None = None
    upper: tuple | None = None
    multiplicity: float = 1.0

    def __post_init__(self):
        if self.chart.dim != 3:
            raise ValueError("a 3-cycle needs a 3-dimensional chart")
        lo = self.chart.lower if self.lower is None else tuple(self.lower)
        hi = self.chart.upper if self.upper is None else tuple(self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        tol = 1e-12
        for a, b, ca, cb in zip(lo, hi, self.chart.lower, self.chart.upper):
            if not (ca - tol <= a < b <= cb + tol):
                raise ValueError("restriction box must lie inside the chart domain")
        if not self.multiplicity > 0:
            raise ValueError("multiplicity must be positive")


@dataclass(frozen=True)
class QuadratureSpec:
    order_per_axis: int = 16

    def __post_init__(self):
        if self.order_per_axis < 2:
            raise ValueError("order_per_axis must be at least 2")

    def doubled(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.order_per_axis)


@dataclass(frozen=True)
class LensParams:
    p: int
    q1: int = 1
    q2: int = 1

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be positive")
        if gcd(self.q1, self.p) != 1 or gcd(self.q2, self.p) != 1:
            raise ValueError(f"L({self.p}; {self.q1}, {self.q2}): the cyclic action is not free")


@dataclass(frozen=True, eq=False)
class Frame:
    """A frame of ``n`` vector fields over a chart.

    ``vectors`` holds chart components, shape ``(d, n)`` (column ``a`` is
    ``E_a``); ``ambient`` optionally holds the images in R^N, shape
    ``(N, n)``.  ``coframe`` is the inverse of ``vectors`` when ``n = d``.
    """

    chart: Chart
    vectors: FormField
    ambient: FormField | None = None
    _coframe: FormField | None = field(default=None, repr=False)

    def __post_init__(self):
        v = self.vectors
        if v.degree != 0 or v.shape[0] != self.chart.dim:
            raise ValueError("frame vectors must be a degree-0 (d, n) field")

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]

    @property
    def coframe(self) -> FormField:
        """``Theta`` with ``Theta[a, s] = theta^a(d/dx_s)``."""
        if self._coframe is None:
            if self.rank != self.chart.dim:
                raise ValueError("coframe needs a frame of the tangent bundle")
            object.__setattr__(self, "_coframe", field_inverse(self.vectors))
        return self._coframe


@dataclass(frozen=True, eq=False)
class MetricField:
    """Metric components ``G[i, j] = g(E_i, E_j)`` in some frame."""

    g: FormField

    def __post_init__(self):
        if self.g.degree != 0 or self.g.shape[0] != self.g.shape[1]:
            raise ValueError("a metric is a square degree-0 field")

    def check(self, x, tol=1e-12):
        m = self.g(x).matrix()
        if np.max(np.abs(m - np.swapaxes(m, -1, -2))) > tol * max(1.0, np.max(np.abs(m))):
            raise ValueError("metric is not symmetric")
        if np.any(np.linalg.eigvalsh(0.5 * (m + np.swapaxes(m, -1, -2))) <= 0):
            raise ValueError("metric is not positive definite")


# ----------------------------------------------------------------------
# the Hopf chart of S^3


@lru_cache(maxsize=None)
def hopf_embedding() -> FormField:
    """Column field ``(4, 1)`` of the quaternion ``q(eta, xi1, xi2)``."""
    half = np.pi / 2
    # cos(eta)cos(xi1), cos(eta)sin(xi1), sin(eta)cos(xi2), sin(eta)sin(xi2)
    freqs = np.array([[1, 1, 0], [1, 1, 0], [1, 0, 1], [1, 0, 1]], dtype=float)
    phases = np.array([[0, 0, 0], [0, -half, 0], [-half, 0, 0], [-half, 0, -half]])
    coeffs = np.zeros((4, 1, 4, 1))
    for a in range(4):
        coeffs[a, 0, a, 0] = 1.0
    return separable_field(np.zeros((4, 3), dtype=int), freqs, phases, coeffs, 0, 3, label="hopf")


# (I, J, K) is positively oriented iff det(Theta) > 0; in these coordinates
# det(Theta) = -cos(eta) sin(eta), checked in the test suite.
_HOPF_ORIENTATION = -1


@lru_cache(maxsize=None)
def hopf_chart() -> Chart:
    two_pi = 2 * np.pi
    return Chart(
        3,
        (0.0, 0.0, 0.0),
        (np.pi / 2, two_pi, two_pi),
        (False, True, True),
        _HOPF_ORIENTATION,
        hopf_embedding(),
        "hopf",
    )


def sphere_cycle() -> Cycle3:
    return Cycle3(hopf_chart())


def lens_cycle(params: LensParams) -> Cycle3:
    """Fundamental domain ``xi1 in [0, 2 pi / p)`` of ``L(p; q1, q2)``.

    The generator shifts ``xi1`` by ``2 pi q1 / p``; since ``q1`` is prime
    to ``p`` its powers hit every slab exactly once.
    """
    if not isinstance(params, LensParams):
        params = LensParams(*params)
    chart = hopf_chart()
    upper = (chart.upper[0], 2 * np.pi / params.p, chart.upper[2])
    return Cycle3(chart, chart.lower, upper, 1.0)


def lens_deck(params: LensParams, x, power: int = 1) -> np.ndarray:
    """Image of chart points under a power of the deck generator (unwrapped)."""
    x = np.array(x, dtype=float)
    x[..., 1] += 2 * np.pi * params.q1 * power / params.p
    x[..., 2] += 2 * np.pi * params.q2 * power / params.p
    return x


def _left_frame_ambient(qfield: FormField) -> FormField:
    # columns q*i, q*j, q*k
    return field_map(qfield, lambda c: left_matrix(c[..., 0])[..., :, 1:], (4, 3), label="qIJK")


@lru_cache(maxsize=None)
def left_invariant_frame() -> Frame:
    """The orthonormal frame ``(I, J, K) = (q i, q j, q k)`` on the Hopf chart."""
    chart = hopf_chart()
    q = chart.embedding
    amb = _left_frame_ambient(q)
    jac = chart.embedding_jacobian()
    theta = field_wedge(field_transpose(amb), jac)
    return Frame(chart, field_inverse(theta), amb, theta)


def round_metric(n: int = 3, chart_dim: int = 3) -> MetricField:
    from .calculus import constant_field

    return MetricField(constant_field(np.eye(n), chart_dim))


def frame_from_ambient(chart: Chart, ambient: FormField) -> Frame:
    """Frame of a hypersurface chart from ambient components of the vectors.

    ``Theta = G^{-1} E^T DX`` with ``G = E^T E`` expresses coordinate vectors
    in the frame; the chart components are its inverse.
    """
    jac = chart.embedding_jacobian()
    et = field_transpose(ambient)
    gram = field_wedge(et, ambient)
    theta = field_wedge(field_inverse(gram), et, jac)
    return Frame(chart, field_inverse(theta), ambient, theta)


def volume_form(frame: Frame, metric: MetricField | None = None) -> FormField:
    """Riemannian volume ``sqrt(det G) theta^1 ^ theta^2 ^ theta^3``.

    It is positive on the frame, so it integrates to the volume when the
    frame is positively oriented.
    """
    theta = frame.coframe
    d = frame.chart.dim

    def value(x):
        det = np.linalg.det(theta(x).matrix())
        if metric is not None:
            det = det * np.sqrt(np.linalg.det(metric.g(x).matrix()))
        return MatValForm(d, d, det[..., None, None, None])

    return FormField(d, d, (1, 1), "real", value, label="vol")


# ----------------------------------------------------------------------
# quadrature


def _axis_rule(lo, hi, full_period, m):
    if full_period:
        h = (hi - lo) / m
        return lo + h * (np.arange(m) + 0.5), np.full(m, h)
    t, w = np.polynomial.legendre.leggauss(m)
    half = 0.5 * (hi - lo)
    return lo + half * (t + 1.0), half * w


def quadrature_nodes(cycle: Cycle3, quad: QuadratureSpec):
    """Tensor-product nodes ``(m^3, 3)`` and weights ``(m^3,)``.

    Periodic axes covering the full period use the midpoint rule (spectrally
    accurate for periodic integrands); all other axes use Gauss-Legendre.
    Every node is interior to the restriction box.
    """
    chart, m = cycle.chart, quad.order_per_axis
    rules = []
    for ax in range(3):
        lo, hi = cycle.lower[ax], cycle.upper[ax]
        full = chart.periodic[ax] and np.isclose(hi - lo, chart.upper[ax] - chart.lower[ax], rtol=0, atol=1e-12)
        rules.append(_axis_rule(lo, hi, full, m))
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = wgrids[0].ravel() * wgrids[1].ravel() * wgrids[2].ravel()
    return nodes, weights


def integrate3(F: FormField, cycle: Cycle3, quad: QuadratureSpec = QuadratureSpec(), chunk: int = 8192):
    """Integral of a scalar (or 1x1-matrix-valued) 3-form over a 3-cycle.

    Returns a float (complex for complex forms).  Summation runs over nodes
    in a fixed order; ``np.sum`` reduces pairwise.
    """
    if F.degree != 3:
        raise ValueError(f"integrate3 needs a 3-form, got degree {F.degree}")
    if F.chart_dim != cycle.chart.dim:
        raise ValueError("form and cycle live on different charts")
    if F.shape != (1, 1):
        raise ValueError("integrate3 integrates scalar forms; take a trace first")
    nodes, weights = quadrature_nodes(cycle, quad)
    parts = []
    for start in range(0, len(nodes), chunk):
        with shared_evaluation():
            vals = F(nodes[start:start + chunk]).top()[..., 0, 0]
        parts.append(vals)
    vals = np.concatenate(parts)
    total = np.sum(weights * vals)
    total = cycle.multiplicity * cycle.chart.orientation_sign * total
    return complex(total) if np.iscomplexobj(total) else float(total)


# ----------------------------------------------------------------------
# Levi-Civita connection by Koszul's formula


def _stack_partials(F: FormField, d: int) -> FormField:
    # (d*k, k') field whose block s is d/dx_s F
    return field_block([[F.partial(s)] for s in range(d)])


def _unstack(c, d):
    # (..., 1, d*k, k') -> (..., d, k, k')
    c = c[..., 0, :, :]
    k = c.shape[-2] // d
    return c.reshape(c.shape[:-2] + (d, k, c.shape[-1]))


def _mm_first(a, b):
    # sum over the leading matrix axis: a (..., s, i), b (..., s, *rest) -> (..., i, *rest)
    rest = b.shape[a.ndim - 1:]
    flat = b.reshape(b.shape[:a.ndim - 1] + (-1,))
    out = np.matmul(np.swapaxes(a, -1, -2), flat)
    return out.reshape(out.shape[:-1] + rest)


def _gamma_to_omega(k2, ginv, theta):
    # Gamma^l_ij = K[i,j,k] Ginv[k,l] / 2 ... omega_s[l,j] = sum_i Theta[i,s] Gamma^l_ij
    gam = 0.5 * np.matmul(k2, ginv[..., None, :, :])  # (..., i, j, l)
    gam = np.swapaxes(gam, -1, -2)  # (..., i, l, j)
    return _mm_first(theta, gam)  # (..., s, l, j)


def _koszul_metric_part(d, n):
    # E_i G_jk + E_j G_ik - E_k G_ij
    def fn(E, PG, Ginv, Theta):
        dg = _mm_first(E.coeffs[..., 0, :, :], _unstack(PG.coeffs, d))  # (..., i, j, k)
        k2 = dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
        return MatValForm(1, d, _gamma_to_omega(k2, Ginv.coeffs[..., 0, :, :], Theta.coeffs[..., 0, :, :]))
    return fn


def _koszul_bracket_part(d, n):
    # brackets c_ij^l = Theta[l, t] (E_i(E_j^t) - E_j(E_i^t)), C[i,j,k] = c_ij^l G[l,k]
    def fn(ThetaB, E, PE, G, Ginv, Theta):
        de = _mm_first(E.coeffs[..., 0, :, :], _unstack(PE.coeffs, d))  # (..., i, t, j)
        br = de - np.swapaxes(de, -1, -3)  # [i, t, j] - [j, t, i]
        br = np.swapaxes(br, -3, -2)  # (..., t, i, j)
        c = _mm_first(np.swapaxes(ThetaB.coeffs[..., 0, :, :], -1, -2), br)  # (..., l, i, j)
        c = np.moveaxis(c, -3, -1)  # (..., i, j, l)
        cc = np.matmul(c, G.coeffs[..., 0, None, :, :])  # (..., i, j, k)
        k2 = cc - np.swapaxes(cc, -2, -1) - np.moveaxis(cc, -1, -3)
        return MatValForm(1, d, _gamma_to_omega(k2, Ginv.coeffs[..., 0, :, :], Theta.coeffs[..., 0, :, :]))
    return fn


def levi_civita_form(metric: MetricField, frame: Frame, spec: DiffSpec = DEFAULT_DIFF) -> FormField:
    """Connection 1-form of the Levi-Civita connection in ``frame``.

    With ``K[i,j,k] = g(nabla_{E_i} E_j, E_k)`` Koszul's formula reads

        2K[i,j,k] = E_i G_jk + E_j G_ik - E_k G_ij
                    + C[i,j,k] - C[i,k,j] - C[j,k,i],

    where ``C[i,j,k] = g([E_i, E_j], E_k)``.  The result satisfies
    ``nabla E_j = sum_l E_l omega[l, j]``.

    Derivatives of the frame and metric use their analytic channel when
    present and ``spec``-driven central differences otherwise.
    """
    d, n = frame.chart.dim, frame.rank
    if n != d:
        raise ValueError("levi_civita_form needs a frame of the tangent bundle")
    if metric.g.shape != (n, n) or metric.g.chart_dim != d:
        raise ValueError("metric does not match the frame")
    fd = spec if not spec.analytic else DEFAULT_DIFF
    E = with_fd_partials(frame.vectors, fd)
    G = with_fd_partials(metric.g, fd)
    theta = frame.coframe
    ginv = field_inverse(G)
    shape = (n, n)
    metric_part = multilinear(_koszul_metric_part(d, n), [E, _stack_partials(G, d), ginv, theta], 1, shape, "real",
                              "koszul_g")
    bracket_part = multilinear(
        _koszul_bracket_part(d, n), [theta, E, _stack_partials(E, d), G, ginv, theta], 1, shape, "real", "koszul_c"
    )
    return field_sum([metric_part, bracket_part])


def induced_hypersurface_connection(
    embedding: FormField, frame: FormField, spec: DiffSpec = DEFAULT_DIFF, check_points=None
) -> FormField:
    """Connection induced on a hypersurface frame by the flat ambient one.

    ``omega = G^{-1} E^T dE`` with ``G = E^T E``: the tangential part of the
    ambient derivative of each frame vector, expanded in the frame.
    """
    if embedding.degree != 0 or embedding.shape[1] != 1:
        raise ValueError("embedding must be a degree-0 column field")
    if frame.degree != 0 or frame.shape[0] != embedding.shape[0]:
        raise ValueError("frame must hold ambient components of shape (N, n)")
    d = embedding.chart_dim
    if check_points is None:
        check_points = _check_grid(d)
    _check_tangent(embedding, frame, check_points)
    E = with_fd_partials(frame, spec if not spec.analytic else DEFAULT_DIFF)
    et = field_transpose(E)
    dE = exterior_derivative(E, ANALYTIC)
    ginv = field_inverse(field_wedge(et, E))
    return field_wedge(ginv, et, dE)


def _check_grid(d):
    t = np.array([0.21, 0.47, 0.83])
    grid = np.stack(np.meshgrid(*([t] * d), indexing="ij"), axis=-1).reshape(-1, d)
    # scaled to (0, pi/2) x (0, 2 pi)^2 style boxes; only interior-ness matters
    return grid * np.array([np.pi / 2] + [2 * np.pi] * (d - 1))


def _check_tangent(embedding, frame, points, tol=1e-8):
    emb = with_fd_partials(embedding)
    jac = np.stack([emb.partial(s)(points).matrix()[..., :, 0] for s in range(embedding.chart_dim)], axis=-1)
    e = frame(points).matrix()
    proj = jac @ np.linalg.pinv(jac)
    resid = np.max(np.abs(e - proj @ e))
    if resid > tol * max(1.0, np.max(np.abs(e))):
        raise ValueError(f"frame is not tangent to the hypersurface (residual {resid:.2e})")


# ----------------------------------------------------------------------
# ellipsoids


def ellipsoid_embedding(axes) -> FormField:
    """``x = diag(1/a) q`` parametrizes ``sum a_i^2 x_i^2 = 1`` over the Hopf chart."""
    a = np.asarray(axes, dtype=float)
    if a.shape != (4,) or np.any(a <= 0):
        raise ValueError("ellipsoid needs four positive axes")
    scale = 1.0 / a
    return field_map(hopf_embedding(), lambda c: scale[:, None] * c, label="ellipsoid")


def _column(F: FormField, j: int) -> FormField:
    return field_map(F, lambda c: c[..., :, j:j + 1], (F.shape[0], 1), label=f"col{j}")


def gram_schmidt(vectors: FormField) -> FormField:
    """Euclidean Gram-Schmidt of the columns of a degree-0 ``(N, n)`` field.

    Built from field operations, so an analytic channel survives.
    """
    cols = [_column(vectors, j) for j in range(vectors.shape[1])]
    done = []
    for v in cols:
        w = v
        for u in done:
            coef = field_wedge(field_transpose(u), v)
            w = field_sum([w, field_scale(-1.0, field_scalar_mul(coef, u))])
        norm2 = field_wedge(field_transpose(w), w)
        done.append(field_scalar_mul(field_power(norm2, -0.5), w))
    return field_block([done])


def ellipsoid_frame(axes) -> Frame:
    """Orthonormalized push-forward of ``(I, J, K)`` to the ellipsoid."""
    a = np.asarray(axes, dtype=float)
    chart0 = hopf_chart()
    emb = ellipsoid_embedding(a)
    chart = Chart(3, chart0.lower, chart0.upper, chart0.periodic, chart0.orientation_sign, emb, "ellipsoid")
    pushed = field_map(_left_frame_ambient(hopf_embedding()), lambda c: (1.0 / a)[:, None] * c, label="pushed")
    return frame_from_ambient(chart, gram_schmidt(pushed))


# ----------------------------------------------------------------------
# smooth functions on the sphere and conformal variations


def random_ambient_function(rng, embedding: FormField | None = None, n_terms: int = 3, max_freq: float = 1.5,
                            scale: float = 1.0) -> FormField:
    """Seeded ``f = sum_m c_m cos(w_m . x + phi_m)`` in the ambient coordinates.

    Restricted to an embedded manifold this is smooth everywhere, unlike a
    trigonometric polynomial in chart angles.  ``|c_m| <= scale``.
    """
    from .calculus import constant_field, field_cos

    emb = hopf_embedding() if embedding is None else embedding
    n_amb, d = emb.shape[0], emb.chart_dim
    terms = []
    for _ in range(n_terms):
        w = rng.uniform(-max_freq, max_freq, size=n_amb)
        phi = rng.uniform(0, 2 * np.pi)
        c = rng.uniform(-scale, scale)
        lin = field_map(emb, lambda a, w=w: np.einsum("a,...ab->...b", w, a)[..., None, :], (1, 1), label="w.x")
        arg = field_sum([lin, constant_field(np.array([[phi]]), d)])
        terms.append(field_scale(c, field_cos(arg)))
    return field_sum(terms)


def frame_derivative(frame: Frame, f: FormField) -> FormField:
    """Column ``(n, 1)`` of ``E_i(f)``."""
    d = frame.chart.dim
    grad = field_block([[f.partial(s)] for s in range(d)])
    return field_wedge(field_transpose(frame.vectors), grad)


def conformal_variation(metric: MetricField, frame: Frame, f: FormField) -> FormField:
    """``d/dt`` at ``t = 0`` of the Levi-Civita form of ``e^{2tf} g``.

    In the frame: ``omega_dot(E_i)[l, j] = E_i(f) delta_lj + E_j(f) delta_li
    - G_ij (grad f)^l`` with ``(grad f)^l = G^{lk} E_k(f)``.
    """
    d, n = frame.chart.dim, frame.rank
    ef = frame_derivative(frame, f)
    theta = frame.coframe
    G = metric.g
    ginv = field_inverse(G)
    eye = np.eye(n)

    def first(efx, th):
        e = efx.coeffs[..., 0, :, 0]
        t = th.coeffs[..., 0, :, :]
        # sum_i Theta[i,s] (E_i f delta_lj + E_j f delta_li)
        a = np.einsum("...is,...i,lj->...slj", t, e, eye)
        b = np.einsum("...ls,...j->...slj", t, e)
        return MatValForm(1, d, a + b)

    def second(efx, th, gx, gi):
        e = efx.coeffs[..., 0, :, 0]
        grad = np.einsum("...lk,...k->...l", gi.coeffs[..., 0, :, :], e)
        w = np.einsum("...is,...ij,...l->...slj", th.coeffs[..., 0, :, :], gx.coeffs[..., 0, :, :], grad)
        return MatValForm(1, d, -w)

    return field_sum([
        multilinear(first, [ef, theta], 1, (n, n), "real", "cvar1"),
        multilinear(second, [ef, theta, G, ginv], 1, (n, n), "real", "cvar2"),
    ])


def conformal_metric(metric: MetricField, f: FormField, t: float = 1.0) -> MetricField:
    """``e^{2tf} g``."""
    from .calculus import field_exp

    return MetricField(field_scalar_mul(field_exp(field_scale(2.0 * t, f)), metric.g))
