"""Pointwise exterior algebra of matrix-valued forms.

A :class:`MatValForm` stores the coefficients of a degree-``p`` form on a
``d``-dimensional coordinate space, one ``k x k'`` matrix per strictly
increasing multi-index ``I = (i_1 < ... < i_p)``.  Coefficients are kept
densely in the lexicographic order produced by :func:`itertools.combinations`.

Every array may carry leading *batch* dimensions, so a single object can hold
the value of a form at many points at once::

    coeffs.shape == batch_shape + (comb(d, p), k, k')

All operations broadcast over those batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Sequence

import numpy as np

__all__ = [
    "MatValForm",
    "basis",
    "wedge",
    "trace",
    "linear_combine",
    "eval_on_vectors",
]


@lru_cache(maxsize=None)
def basis(d: int, p: int) -> tuple[tuple[int, ...], ...]:
    """Strictly increasing ``p``-tuples of ``range(d)``, in storage order."""
    if p < 0:
        raise ValueError(f"negative degree {p}")
    return tuple(combinations(range(d), p))


@lru_cache(maxsize=None)
def _position(d: int, p: int) -> dict[tuple[int, ...], int]:
    return {idx: n for n, idx in enumerate(basis(d, p))}


def _shuffle_sign(first: Sequence[int], second: Sequence[int]) -> int:
    inversions = sum(1 for a in first for b in second if a > b)
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def _wedge_table(d: int, p: int, q: int) -> np.ndarray:
    # table[I, J, K] = sign with dx^I ^ dx^J = table[I, J, K] dx^K
    rows, cols = basis(d, p), basis(d, q)
    out = basis(d, p + q)
    pos = _position(d, p + q)
    table = np.zeros((len(rows), len(cols), len(out)))
    for a, idx in enumerate(rows):
        for b, jdx in enumerate(cols):
            if set(idx) & set(jdx):
                continue
            merged = tuple(sorted(idx + jdx))
            table[a, b, pos[merged]] = _shuffle_sign(idx, jdx)
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class MatValForm:
    """A matrix-valued exterior form at a point (or at a batch of points).

    Parameters
    ----------
    degree : int
        Form degree ``p``.
    base_dim : int
        Dimension ``d`` of the underlying coordinate space.
    coeffs : ndarray
        Array of shape ``batch + (comb(d, p), k, k')``.  Real or complex.
    """

    degree: int
    base_dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if not np.iscomplexobj(c):
            c = c.astype(float, copy=False)
        if self.degree < 0 or self.base_dim < 0:
            raise ValueError("degree and base_dim must be non-negative")
        if c.ndim < 3:
            raise ValueError(f"coeffs must have at least 3 axes, got shape {c.shape}")
        expected = comb(self.base_dim, self.degree)
        if c.shape[-3] != expected:
            raise ValueError(
                f"degree {self.degree} on base_dim {self.base_dim} needs {expected} "
                f"coefficients, got {c.shape[-3]}"
            )
        if c.shape[-1] == 0 or c.shape[-2] == 0:
            raise ValueError("matrix shape must be positive")
        object.__setattr__(self, "coeffs", c)

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def zero(cls, degree, base_dim, shape, scalar="real", batch_shape=()):
        dtype = complex if scalar == "complex" else float
        c = np.zeros(tuple(batch_shape) + (comb(base_dim, degree),) + tuple(shape), dtype=dtype)
        return cls(degree, base_dim, c)

    @classmethod
    def from_matrix(cls, matrix, base_dim: int) -> "MatValForm":
        """Degree-0 form with the given (possibly batched) matrix value."""
        m = np.asarray(matrix)
        if m.ndim < 2:
            m = m.reshape(m.shape + (1,) * (2 - m.ndim))
        return cls(0, base_dim, m[..., None, :, :])

    @classmethod
    def from_components(cls, components: dict, degree: int, base_dim: int) -> "MatValForm":
        """Build from ``{index_tuple: matrix}``; missing indices are zero.

        Index tuples are 0-based and must be strictly increasing.
        """
        mats = {tuple(k): np.atleast_2d(np.asarray(v)) for k, v in components.items()}
        if not mats:
            raise ValueError("need at least one component to infer the shape")
        first = next(iter(mats.values()))
        scalar = "complex" if any(np.iscomplexobj(m) for m in mats.values()) else "real"
        out = cls.zero(degree, base_dim, first.shape[-2:], scalar, first.shape[:-2])
        pos = _position(base_dim, degree)
        for idx, m in mats.items():
            if idx not in pos:
                raise ValueError(f"{idx} is not an increasing {degree}-index in dimension {base_dim}")
            out.coeffs[..., pos[idx], :, :] = m
        return out

    # ------------------------------------------------------------------
    # structure

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[-2:]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-3]

    @property
    def scalar(self) -> str:
        return "complex" if np.iscomplexobj(self.coeffs) else "real"

    def component(self, index: Sequence[int]) -> np.ndarray:
        """Coefficient matrix on an increasing 0-based multi-index."""
        return self.coeffs[..., _position(self.base_dim, self.degree)[tuple(index)], :, :]

    def matrix(self) -> np.ndarray:
        """Value of a degree-0 form as a plain matrix."""
        if self.degree != 0:
            raise ValueError("matrix() is only defined for degree 0")
        return self.coeffs[..., 0, :, :]

    def top(self) -> np.ndarray:
        """Coefficient on ``dx^1 ^ ... ^ dx^d`` of a top-degree form."""
        if self.degree != self.base_dim:
            raise ValueError("top() needs degree == base_dim")
        return self.coeffs[..., 0, :, :]

    def to_complex(self) -> "MatValForm":
        return MatValForm(self.degree, self.base_dim, self.coeffs.astype(complex))

    def conj(self) -> "MatValForm":
        return MatValForm(self.degree, self.base_dim, np.conj(self.coeffs))

    def transpose(self) -> "MatValForm":
        return MatValForm(self.degree, self.base_dim, np.swapaxes(self.coeffs, -1, -2))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    # ------------------------------------------------------------------
    # arithmetic sugar

    def __add__(self, other):
        return linear_combine(1.0, self, 1.0, other)

    def __sub__(self, other):
        return linear_combine(1.0, self, -1.0, other)

    def __neg__(self):
        return MatValForm(self.degree, self.base_dim, -self.coeffs)

    def __mul__(self, c):
        if isinstance(c, MatValForm):
            return NotImplemented
        c = np.asarray(c)
        # array scalars broadcast over batch dimensions
        return MatValForm(self.degree, self.base_dim, c[..., None, None, None] * self.coeffs)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return wedge(self, other)


def _check_compatible(u: MatValForm, v: MatValForm, what: str):
    if u.base_dim != v.base_dim:
        raise ValueError(f"{what}: base dimensions differ ({u.base_dim} vs {v.base_dim})")
    if u.scalar != v.scalar:
        raise ValueError(f"{what}: cannot mix {u.scalar} and {v.scalar} forms")


def wedge(u: MatValForm, v: MatValForm) -> MatValForm:
    """Exterior product combined with matrix multiplication of coefficients.

    For degree-0 arguments this is ordinary matrix multiplication.  When the
    total degree exceeds the base dimension the (empty) zero form is returned.
    """
    _check_compatible(u, v, "wedge")
    if u.shape[1] != v.shape[0]:
        raise ValueError(f"wedge: cannot multiply {u.shape} by {v.shape}")
    d, p, q = u.base_dim, u.degree, v.degree
    if p + q > d:
        batch = np.broadcast_shapes(u.batch_shape, v.batch_shape)
        return MatValForm.zero(p + q, d, (u.shape[0], v.shape[1]), u.scalar, batch)
    table = _wedge_table(d, p, q)
    ni, nj, nk = table.shape
    # all coefficient products, then one signed contraction over index pairs
    prod = np.matmul(u.coeffs[..., :, None, :, :], v.coeffs[..., None, :, :, :])
    a, c = prod.shape[-2:]
    flat = prod.reshape(prod.shape[:-4] + (ni * nj, a * c))
    coeffs = np.matmul(table.reshape(ni * nj, nk).T, flat)
    return MatValForm(p + q, d, coeffs.reshape(coeffs.shape[:-1] + (a, c)))


def trace(u: MatValForm) -> MatValForm:
    """Matrix trace of every coefficient; the result has shape ``(1, 1)``."""
    k, kk = u.shape
    if k != kk:
        raise ValueError(f"trace needs a square shape, got {u.shape}")
    t = np.trace(u.coeffs, axis1=-2, axis2=-1)
    return MatValForm(u.degree, u.base_dim, t[..., None, None])


def linear_combine(c1, u: MatValForm, c2, v: MatValForm) -> MatValForm:
    """Coefficient-wise ``c1*u + c2*v``."""
    _check_compatible(u, v, "linear_combine")
    if u.degree != v.degree or u.shape != v.shape:
        raise ValueError(
            f"linear_combine: structure mismatch (degree {u.degree}/{v.degree}, "
            f"shape {u.shape}/{v.shape})"
        )
    return MatValForm(u.degree, u.base_dim, c1 * u.coeffs + c2 * v.coeffs)


def eval_on_vectors(u: MatValForm, vectors: Sequence) -> np.ndarray:
    """Evaluate a ``p``-form on ``p`` tangent vectors.

    Uses the determinant convention ``dx^I(v_1, ..., v_p) = det[v_j^{i_k}]``,
    so ``(dx^1 ^ dx^2)(e_1, e_2) = 1``.

    Parameters
    ----------
    u : MatValForm
    vectors : sequence of arrays
        ``p`` vectors, each of shape ``(..., d)``; batch axes broadcast
        against ``u.batch_shape``.

    Returns
    -------
    ndarray
        Matrix of shape ``batch + (k, k')``.
    """
    p, d = u.degree, u.base_dim
    if len(vectors) != p:
        raise ValueError(f"a {p}-form needs {p} vectors, got {len(vectors)}")
    if p == 0:
        return u.coeffs[..., 0, :, :]
    vecs = [np.asarray(v) for v in vectors]
    for v in vecs:
        if v.shape[-1] != d:
            raise ValueError(f"vector dimension {v.shape[-1]} does not match base_dim {d}")
    mat = np.stack(np.broadcast_arrays(*vecs), axis=-2)  # (..., p, d)
    idx = np.array(basis(d, p))  # (C, p)
    minors = mat[..., idx.T]  # (..., p, p, C): [vector j, slot a, index c]
    minors = np.moveaxis(minors, -1, -3)  # (..., C, p, p)
    dets = np.linalg.det(minors)  # (..., C)
    return np.einsum("...c,...cab->...ab", dets, u.coeffs)
