"""Truncated power series in a defining variable r.

A :class:`Series` of order N stores coefficients ``c[0..N]`` with shape
``(N+1, *shape)``; ``shape`` is the boundary grid (empty for
boundary-homogeneous data). All recursions are causal: coefficient k is
computed from coefficients 0..k only, with a fixed summation order, so the
low coefficients of a result do not depend on the working order (bitwise).
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import SeriesError

__all__ = ["Series", "cauchy", "matrix_inverse", "BoundaryChart", "Axis"]


def cauchy(a, b, prod=None):
    """Truncated Cauchy product of coefficient stacks ``a`` and ``b``.

    ``prod`` combines single coefficients (default: elementwise product), so
    the same loop serves matrix and tensor series through ``einsum``.
    """
    prod = prod or np.multiply
    N = min(len(a), len(b)) - 1
    out = []
    for k in range(N + 1):
        acc = prod(a[0], b[k])
        for i in range(1, k + 1):
            acc = acc + prod(a[i], b[k - i])
        out.append(acc)
    return np.stack(out)


def matrix_inverse(G):
    """Inverse of a matrix-valued series ``G[k, ..., a, b]``."""
    X0 = np.linalg.inv(G[0])
    mm = lambda x, y: np.einsum("...ab,...bc->...ac", x, y)  # noqa: E731
    X = [X0]
    for j in range(1, len(G)):
        acc = mm(G[1], X[j - 1])
        for i in range(2, j + 1):
            acc = acc + mm(G[i], X[j - i])
        X.append(-mm(X0, acc))
    return np.stack(X)


class Series:
    """Truncated series ``sum_j c[j] r^j``; coefficients may be grid arrays."""

    __slots__ = ("coeffs",)
    __array_priority__ = 100

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float)
        if c.ndim == 0:
            c = c.reshape(1)
        self.coeffs = c

    # construction
    @classmethod
    def constant(cls, value, order, shape=()):
        c = np.zeros((order + 1,) + tuple(shape))
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, order, shape=()):
        """The series ``r`` itself."""
        c = np.zeros((order + 1,) + tuple(shape))
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def from_list(cls, values, order=None, shape=()):
        values = list(values)
        order = len(values) - 1 if order is None else order
        c = np.zeros((order + 1,) + tuple(shape))
        for j, v in enumerate(values[: order + 1]):
            c[j] = v
        return cls(c)

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    def __getitem__(self, k):
        return self.coeffs[k]

    def __len__(self):
        return len(self.coeffs)

    def __repr__(self):
        if self.shape == ():
            return f"Series({self.coeffs.tolist()})"
        return f"Series(order={self.order}, shape={self.shape})"

    # arithmetic
    def _other(self, other):
        if isinstance(other, Series):
            if other.order != self.order:
                raise SeriesError(f"order mismatch: {self.order} vs {other.order}")
            return other
        return None

    def __add__(self, other):
        o = self._other(other)
        if o is None:
            c = self.coeffs.copy()
            c[0] = c[0] + other
            return Series(c)
        return Series(self.coeffs + o.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Series(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._other(other)
        if o is None:
            return Series(self.coeffs * np.asarray(other, float))
        return Series(cauchy(self.coeffs, o.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Series):
            return self * other.recip()
        return Series(self.coeffs / np.asarray(other, float))

    def __rtruediv__(self, other):
        return self.recip() * other

    def __pow__(self, p):
        return self.power(p)

    # elementary functions
    def _check_a0(self, positive):
        a0 = self.coeffs[0]
        if positive and not np.all(a0 > 0):
            raise SeriesError("constant coefficient must be positive")
        if not positive and not np.all(np.abs(a0) > 1e-300):
            raise SeriesError("constant coefficient must be nonzero")

    def recip(self):
        self._check_a0(False)
        a = self.coeffs
        b = [1.0 / a[0]]
        for k in range(1, len(a)):
            acc = a[1] * b[k - 1]
            for i in range(2, k + 1):
                acc = acc + a[i] * b[k - i]
            b.append(-acc / a[0])
        return Series(np.stack([np.broadcast_to(x, a.shape[1:]) for x in b]))

    def sqrt(self):
        self._check_a0(True)
        a = self.coeffs
        b = [np.sqrt(a[0])]
        for k in range(1, len(a)):
            acc = a[k]
            for i in range(1, k):
                acc = acc - b[i] * b[k - i]
            b.append(acc / (2 * b[0]))
        return Series(np.stack(b))

    def exp(self):
        a = self.coeffs
        b = [np.exp(a[0])]
        for k in range(1, len(a)):
            acc = 1 * a[1] * b[k - 1]
            for i in range(2, k + 1):
                acc = acc + i * a[i] * b[k - i]
            b.append(acc / k)
        return Series(np.stack(b))

    def log(self):
        self._check_a0(True)
        a = self.coeffs
        b = [np.log(a[0])]
        for k in range(1, len(a)):
            acc = k * a[k]
            for i in range(1, k):
                acc = acc - i * b[i] * a[k - i]
            b.append(acc / (k * a[0]))
        return Series(np.stack(b))

    def power(self, p):
        """``self ** p``; integer p by repeated products, otherwise needs a positive constant term."""
        if isinstance(p, (int, np.integer)) or (isinstance(p, Fraction) and p.denominator == 1):
            p = int(p)
            if p < 0:
                return self.recip().power(-p)
            out = Series.constant(1.0, self.order, self.shape)
            for _ in range(p):
                out = out * self
            return out
        p = float(p)
        self._check_a0(True)
        a = self.coeffs
        b = [a[0] ** p]
        for k in range(1, len(a)):
            acc = (p * 1 - (k - 1)) * a[1] * b[k - 1]
            for i in range(2, k + 1):
                acc = acc + (p * i - (k - i)) * a[i] * b[k - i]
            b.append(acc / (k * a[0]))
        return Series(np.stack(b))

    # structural operations
    def d_r(self):
        """r-derivative; the result has order N-1."""
        if self.order == 0:
            raise SeriesError("cannot differentiate an order-0 series")
        k = np.arange(1, len(self.coeffs)).reshape((-1,) + (1,) * len(self.shape))
        return Series(self.coeffs[1:] * k)

    def mul_r(self, k=1):
        """Multiply by ``r^k``, keeping the order."""
        c = np.zeros_like(self.coeffs)
        if k <= self.order:
            c[k:] = self.coeffs[: len(c) - k]
        return Series(c)

    def truncate(self, order):
        if order > self.order:
            raise SeriesError(f"cannot raise order {self.order} to {order} by truncation")
        return Series(self.coeffs[: order + 1].copy())

    def pad(self, order):
        """Extend with zero coefficients (only valid for exact polynomials)."""
        if order <= self.order:
            return self.truncate(order)
        c = np.zeros((order + 1,) + self.shape)
        c[: len(self.coeffs)] = self.coeffs
        return Series(c)

    def compose_scale(self, c):
        """``a(c r)`` for a boundary field ``c``."""
        c = np.asarray(c, float)
        return Series(np.stack([self.coeffs[j] * c**j for j in range(len(self.coeffs))]))

    def compose(self, inner: "Series"):
        """``a(b(r))`` for a series ``b`` with zero constant term (Horner)."""
        inner = self._other(inner)
        if not np.all(inner.coeffs[0] == 0):
            raise SeriesError("inner series must have zero constant term")
        out = Series.constant(self.coeffs[-1], self.order, self.shape)
        for j in range(len(self.coeffs) - 2, -1, -1):
            out = out * inner + self.coeffs[j]
        return out

    def evaluate(self, r):
        """Horner evaluation at a numeric r (scalar or grid-shaped)."""
        out = self.coeffs[-1] * 1.0
        for j in range(len(self.coeffs) - 2, -1, -1):
            out = out * r + self.coeffs[j]
        return out

    def map(self, fn):
        """Apply a linear coefficientwise operator (e.g. a tangential derivative)."""
        return Series(np.stack([fn(c) for c in self.coeffs]))


class Axis:
    """One boundary grid axis: ``count`` nodes on [lo, hi], periodic or clamped."""

    def __init__(self, lo, hi, count, periodic=False):
        if count < (7 if periodic else 3):
            raise SeriesError("too few grid nodes for the finite-difference stencil")
        self.lo, self.hi, self.count, self.periodic = float(lo), float(hi), int(count), bool(periodic)

    @property
    def nodes(self):
        if self.periodic:
            return self.lo + (self.hi - self.lo) * np.arange(self.count) / self.count
        return np.linspace(self.lo, self.hi, self.count)

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "count": self.count, "periodic": self.periodic}


class BoundaryChart:
    """Boundary chart of tensor dimension ``dim`` (= n-1).

    Each tangential coordinate is either ``None`` (coefficients independent
    of it, derivative zero) or an :class:`Axis` on the grid. With all axes
    None the chart is zero-dimensional and coefficients are plain numbers.
    """

    def __init__(self, dim, axes=None):
        if dim < 1:
            raise SeriesError("boundary tensor dimension must be >= 1")
        self.dim = dim
        self.axes = list(axes) if axes is not None else [None] * dim
        if len(self.axes) != dim:
            raise SeriesError("one axis entry per boundary coordinate")
        self.grid_axes = [k for k, a in enumerate(self.axes) if a is not None]

    @property
    def shape(self):
        return tuple(self.axes[k].count for k in self.grid_axes)

    def nodes(self):
        """Coordinates of all grid nodes, shape ``(*shape, dim)``; homogeneous axes read 0."""
        grids = np.meshgrid(*[self.axes[k].nodes for k in self.grid_axes], indexing="ij")
        out = np.zeros(self.shape + (self.dim,))
        for g, k in zip(grids, self.grid_axes):
            out[..., k] = g
        return out

    def derivative(self, arr, k):
        """Tangential derivative along boundary coordinate ``k``; grid axes lead ``arr``."""
        axis = self.axes[k]
        if axis is None:
            return np.zeros_like(arr)
        pos = self.grid_axes.index(k)
        if axis.periodic:
            h = (axis.hi - axis.lo) / axis.count
            r = lambda s: np.roll(arr, -s, axis=pos)  # noqa: E731
            return (-r(-3) + 9 * r(-2) - 45 * r(-1) + 45 * r(1) - 9 * r(2) + r(3)) / (60 * h)
        return np.gradient(arr, axis.nodes, axis=pos, edge_order=2)

    def to_dict(self):
        return {"dim": self.dim, "axes": [a.to_dict() if a else None for a in self.axes]}
