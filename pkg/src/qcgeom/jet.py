"""Truncated multivariate Taylor arithmetic (jets).

A :class:`Jet` stores the Taylor coefficients of one or many scalar functions
of ``dim`` ambient variables, truncated at total degree ``order``.  The
coefficient axis is always the last axis of ``Jet.c`` and is laid out in
graded lexicographic order, so truncating to a lower order is a slice.  All
leading axes behave like ordinary numpy axes (broadcasting, indexing,
contraction with :func:`einsum`), which is how whole frames, connection
tables and batches of sample points are pushed through the same formulas.

The elementary function set is ``+ - * /`` and ``sqrt``.
"""

from __future__ import annotations

import math
import string
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from .errors import DomainError, UsageError, ZeroDivisor

MAX_SEED_ORDER = 4
_TINY = 1e-300


class JetSpace:
    """Multi-index bookkeeping for jets in ``dim`` variables up to ``order``."""

    def __init__(self, dim: int, order: int):
        self.dim = dim
        self.order = order
        exps = []
        sizes = []
        for d in range(order + 1):
            for combo in combinations_with_replacement(range(dim), d):
                a = [0] * dim
                for i in combo:
                    a[i] += 1
                exps.append(tuple(a))
            sizes.append(len(exps))
        self.exponents = np.array(exps, dtype=np.int64).reshape(len(exps), dim)
        self.sizes = sizes
        self.index = {e: k for k, e in enumerate(exps)}
        self.degree = self.exponents.sum(axis=1)
        self.factorial = np.array(
            [math.prod(math.factorial(int(v)) for v in e) for e in exps], dtype=float
        )
        self._mul = {}
        self._grad = {}

    def size(self, order: int) -> int:
        return self.sizes[order]

    def mul_table(self, order: int):
        """Index pairs ``(I, J)`` and segment starts for a product at ``order``."""
        if order not in self._mul:
            n = self.sizes[order]
            src_i, src_j, dst = [], [], []
            for p in range(n):
                ep = self.exponents[p]
                rest = order - int(self.degree[p])
                for q in range(self.sizes[rest]):
                    src_i.append(p)
                    src_j.append(q)
                    dst.append(self.index[tuple(ep + self.exponents[q])])
            dst = np.array(dst)
            perm = np.argsort(dst, kind="stable")
            dst = dst[perm]
            starts = np.flatnonzero(np.r_[True, dst[1:] != dst[:-1]])
            self._mul[order] = (
                np.array(src_i)[perm],
                np.array(src_j)[perm],
                starts,
            )
        return self._mul[order]

    def grad_table(self, order: int):
        """Source indices and factors mapping an ``order`` jet to its partials."""
        if order not in self._grad:
            n = self.sizes[order - 1]
            src = np.empty((self.dim, n), dtype=np.int64)
            fac = np.empty((self.dim, n))
            for b in range(n):
                eb = self.exponents[b]
                for i in range(self.dim):
                    e = eb.copy()
                    e[i] += 1
                    src[i, b] = self.index[tuple(e)]
                    fac[i, b] = eb[i] + 1
            self._grad[order] = (src, fac)
        return self._grad[order]


@lru_cache(maxsize=None)
def jet_space(dim: int, order: int) -> JetSpace:
    return JetSpace(dim, order)


def _space_for(dim: int, order: int) -> JetSpace:
    # one table set per dimension, sized for the largest order in use
    return jet_space(dim, max(order, MAX_SEED_ORDER + 1))


class Jet:
    """Array of truncated Taylor expansions sharing one expansion point."""

    __slots__ = ("c", "dim", "order")
    __array_priority__ = 100

    def __init__(self, c, dim: int, order: int):
        self.c = np.asarray(c, dtype=float)
        self.dim = dim
        self.order = order

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, dim: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        n = _space_for(dim, order).size(order)
        c = np.zeros(value.shape + (n,))
        c[..., 0] = value
        return cls(c, dim, order)

    @property
    def space(self) -> JetSpace:
        return _space_for(self.dim, self.order)

    @property
    def shape(self) -> tuple:
        return self.c.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.c.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        return f"Jet(dim={self.dim}, order={self.order}, shape={self.shape})"

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        return Jet(self.c[..., : self.space.size(order)], self.dim, order)

    def copy(self) -> "Jet":
        return Jet(self.c.copy(), self.dim, self.order)

    # array-like plumbing ---------------------------------------------
    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.c[key + (slice(None),)], self.dim, self.order)

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.c.reshape(tuple(shape) + (self.c.shape[-1],)), self.dim, self.order)

    def transpose(self, *axes) -> "Jet":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return Jet(self.c.transpose(tuple(axes) + (self.ndim,)), self.dim, self.order)

    def swapaxes(self, a: int, b: int) -> "Jet":
        a, b = (x % self.ndim for x in (a, b))
        return Jet(self.c.swapaxes(a, b), self.dim, self.order)

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis % self.ndim,)
        else:
            axis = tuple(a % self.ndim for a in axis)
        return Jet(self.c.sum(axis=axis), self.dim, self.order)

    def expand(self, axis: int) -> "Jet":
        axis = axis % (self.ndim + 1)
        return Jet(np.expand_dims(self.c, axis), self.dim, self.order)

    def broadcast_to(self, shape) -> "Jet":
        return Jet(np.broadcast_to(self.c, tuple(shape) + (self.c.shape[-1],)), self.dim, self.order)

    # arithmetic -------------------------------------------------------
    def _pair(self, other: "Jet"):
        if other.dim != self.dim:
            raise UsageError(f"jet dimension mismatch: {self.dim} vs {other.dim}")
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k), k

    def __neg__(self) -> "Jet":
        return Jet(-self.c, self.dim, self.order)

    def __pos__(self) -> "Jet":
        return self

    def __add__(self, other) -> "Jet":
        if isinstance(other, Jet):
            a, b, k = self._pair(other)
            return Jet(a.c + b.c, self.dim, k)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        c = np.array(np.broadcast_to(self.c, shape + (self.c.shape[-1],)))
        c[..., 0] += other
        return Jet(c, self.dim, self.order)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        if isinstance(other, Jet):
            a, b, k = self._pair(other)
            if k == 0:
                return Jet(a.c * b.c, self.dim, 0)
            I, J, starts = self.space.mul_table(k)
            prod = a.c[..., I] * b.c[..., J]
            return Jet(np.add.reduceat(prod, starts, axis=-1), self.dim, k)
        other = np.asarray(other, dtype=float)
        return Jet(self.c * other[..., None], self.dim, self.order)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        v = self.value
        if np.any(np.abs(v) < _TINY):
            raise ZeroDivisor("jet division by a value-zero jet")
        t = self * (1.0 / v) - 1.0
        r = Jet.constant(np.ones(self.shape), self.dim, self.order)
        for _ in range(self.order):
            r = 1.0 - t * r
        return r * (1.0 / v)

    def __truediv__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return self * other.reciprocal()
        other = np.asarray(other, dtype=float)
        if np.any(np.abs(other) < _TINY):
            raise ZeroDivisor("jet division by zero")
        return Jet(self.c / other[..., None], self.dim, self.order)

    def __rtruediv__(self, other) -> "Jet":
        return self.reciprocal() * other

    def __pow__(self, k: int) -> "Jet":
        if not isinstance(k, int) or k < 0:
            raise UsageError("only non-negative integer powers are supported")
        r = Jet.constant(np.ones(self.shape), self.dim, self.order)
        for _ in range(k):
            r = r * self
        return r

    def sqrt(self) -> "Jet":
        v = self.value
        if np.any(v <= 0.0):
            raise DomainError("sqrt of a jet with non-positive value")
        t = self * (1.0 / v) - 1.0
        coeffs = [_binom_half(j) for j in range(self.order + 1)]
        r = Jet.constant(np.full(self.shape, coeffs[-1]), self.dim, self.order)
        for a in reversed(coeffs[:-1]):
            r = a + t * r
        return r * np.sqrt(v)

    # differentiation --------------------------------------------------
    def partial(self, i: int) -> "Jet":
        if self.order < 1:
            raise UsageError("cannot differentiate an order-0 jet")
        src, fac = self.space.grad_table(self.order)
        return Jet(self.c[..., src[i]] * fac[i], self.dim, self.order - 1)

    def grad(self) -> "Jet":
        """All first partials, stacked on a new trailing axis of size ``dim``."""
        if self.order < 1:
            raise UsageError("cannot differentiate an order-0 jet")
        src, fac = self.space.grad_table(self.order)
        return Jet(self.c[..., src] * fac, self.dim, self.order - 1)

    def derivative(self, idx) -> np.ndarray:
        idx = tuple(int(v) for v in idx)
        if len(idx) != self.dim:
            raise UsageError("multi-index length must equal the jet dimension")
        if sum(idx) > self.order:
            raise UsageError(f"derivative of order {sum(idx)} exceeds jet order {self.order}")
        k = self.space.index[idx]
        return self.c[..., k] * self.space.factorial[k]


def _binom_half(j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= (0.5 - i) / (i + 1)
    return out


def sqrt(x):
    """``sqrt`` that works on jets and plain numbers alike."""
    if isinstance(x, Jet):
        return x.sqrt()
    return np.sqrt(x)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Jet) else np.asarray(x, dtype=float)


def seed(point, order: int) -> Jet:
    """Coordinate jets ``x_i`` at ``point``; the last axis of ``point`` is the variable axis."""
    point = np.asarray(point, dtype=float)
    dim = point.shape[-1]
    n = _space_for(dim, order).size(order)
    c = np.zeros(point.shape + (n,))
    c[..., 0] = point
    if order >= 1:
        c[..., np.arange(dim), 1 + np.arange(dim)] = 1.0
    return Jet(c, dim, order)


def stack(items, axis: int = 0) -> Jet:
    items = list(items)
    jets = [x for x in items if isinstance(x, Jet)]
    if not jets:
        return np.stack(np.broadcast_arrays(*items), axis=axis)
    dim = jets[0].dim
    order = min(j.order for j in jets)
    n = _space_for(dim, order).size(order)
    cs = []
    for x in items:
        if isinstance(x, Jet):
            cs.append(x.c[..., :n])
        else:
            cs.append(Jet.constant(x, dim, order).c)
    shape = np.broadcast_shapes(*(c.shape[:-1] for c in cs))
    cs = [np.broadcast_to(c, shape + (n,)) for c in cs]
    ax = axis if axis >= 0 else axis + len(shape) + 1
    return Jet(np.stack(cs, axis=ax), dim, order)


def einsum(subscripts: str, a, b) -> Jet:
    """Two-operand ``np.einsum`` where either operand may be a :class:`Jet`."""
    a_jet, b_jet = isinstance(a, Jet), isinstance(b, Jet)
    if not (a_jet or b_jet):
        return np.einsum(subscripts, a, b)
    lhs, out = subscripts.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    z = next(ch for ch in string.ascii_uppercase if ch not in subscripts)
    if a_jet and b_jet:
        a, b, k = a._pair(b)
        if k == 0:
            c = np.einsum(f"{sa}{z},{sb}{z}->{out}{z}", a.c, b.c, optimize=True)
            return Jet(c, a.dim, 0)
        I, J, starts = a.space.mul_table(k)
        prod = np.einsum(f"{sa}{z},{sb}{z}->{out}{z}", a.c[..., I], b.c[..., J], optimize=True)
        return Jet(np.add.reduceat(prod, starts, axis=-1), a.dim, k)
    if a_jet:
        c = np.einsum(f"{sa}{z},{sb}->{out}{z}", a.c, np.asarray(b, dtype=float), optimize=True)
        return Jet(c, a.dim, a.order)
    c = np.einsum(f"{sa},{sb}{z}->{out}{z}", np.asarray(a, dtype=float), b.c, optimize=True)
    return Jet(c, b.dim, b.order)


def directional(field: Jet, f: Jet) -> Jet:
    """``V(f) = sum_i V^i d_i f`` for a vector field ``field`` (last axis = ambient)."""
    # field: (*F, m), f: (*G,) -> (*F, *G)
    g = f.grad()
    fs = string.ascii_lowercase[: field.ndim - 1]
    gs = string.ascii_lowercase[field.ndim - 1 : field.ndim - 1 + g.ndim - 1]
    return einsum(f"{fs}y,{gs}y->{fs}{gs}", field, g)


def solve(A, B, cond_limit: float | None = None):
    """Solve ``A X = B`` where ``A`` is ``(..., N, N)`` and ``B`` is ``(..., N, K)``.

    Either operand may be a jet.  The order-0 system is solved directly and
    each refinement sweep fixes one more Taylor order.
    """
    A0 = value_of(A)
    if cond_limit is not None:
        cond = np.linalg.cond(A0)
        if np.any(~np.isfinite(cond)) or np.any(cond > cond_limit):
            from .errors import DegenerateStructureError

            raise DegenerateStructureError(f"linear system condition number {np.max(cond):.3g}")
    inv0 = np.linalg.inv(A0)
    if not isinstance(A, Jet) and not isinstance(B, Jet):
        return inv0 @ B
    X = einsum("...ij,...jk->...ik", inv0, B)
    order = max(x.order for x in (A, B) if isinstance(x, Jet))
    if isinstance(A, Jet):
        for _ in range(order):
            X = X + einsum("...ij,...jk->...ik", inv0, B - einsum("...ij,...jk->...ik", A, X))
    return X


# ---------------------------------------------------------------------------
# small public API mirroring the engine's operations


def jet_seed(point, order: int) -> list[Jet]:
    """Return the coordinate jets at ``point`` as a list of scalar jets."""
    if not isinstance(order, int) or not 1 <= order <= MAX_SEED_ORDER:
        raise UsageError(f"jet order must be in [1, {MAX_SEED_ORDER}], got {order!r}")
    x = seed(np.atleast_1d(np.asarray(point, dtype=float)), order)
    return [x[i] for i in range(x.shape[0])]


def jet_arith(a: Jet, b: Jet, op: str) -> Jet:
    if a.dim != b.dim or a.order != b.order:
        raise UsageError("jet_arith requires matching dim and order")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise UsageError(f"unknown jet operation {op!r}")


def jet_sqrt(a: Jet) -> Jet:
    return a.sqrt()


def derivative_extract(a: Jet, idx) -> float:
    """Derivative value (not the raw Taylor coefficient) at multi-index ``idx``."""
    return a.derivative(idx)
