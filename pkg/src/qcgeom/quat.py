"""Quaternion and imaginary-quaternion arithmetic over a generic scalar.

Components may be floats, numpy arrays (vectorized evaluation) or
:class:`~qcgeom.jet.Jet` objects, so every formula written with these types
can be differentiated by evaluating it on coordinate jets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import ZeroDivisor
from .jet import Jet, sqrt, stack


@dataclass(frozen=True)
class ImQuaternion:
    """Purely imaginary quaternion ``i*a + j*b + k*c``."""

    i: Any
    j: Any
    k: Any

    @property
    def components(self) -> tuple:
        return (self.i, self.j, self.k)

    def as_quaternion(self) -> "Quaternion":
        return Quaternion(0.0 * self.i, self.i, self.j, self.k)

    def __add__(self, other: "ImQuaternion") -> "ImQuaternion":
        return ImQuaternion(self.i + other.i, self.j + other.j, self.k + other.k)

    def __sub__(self, other: "ImQuaternion") -> "ImQuaternion":
        return ImQuaternion(self.i - other.i, self.j - other.j, self.k - other.k)

    def __neg__(self) -> "ImQuaternion":
        return ImQuaternion(-self.i, -self.j, -self.k)

    def scale(self, s) -> "ImQuaternion":
        return ImQuaternion(self.i * s, self.j * s, self.k * s)

    def norm2(self):
        return self.i * self.i + self.j * self.j + self.k * self.k


@dataclass(frozen=True)
class Quaternion:
    """Quaternion ``re + i*x + j*y + k*z`` with generic scalar components."""

    re: Any
    x: Any
    y: Any
    z: Any

    @classmethod
    def real(cls, r) -> "Quaternion":
        return cls(r, 0.0 * r, 0.0 * r, 0.0 * r)

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        """Build from the last axis of an array or jet holding 4 components."""
        return cls(a[..., 0], a[..., 1], a[..., 2], a[..., 3])

    @property
    def components(self) -> tuple:
        return (self.re, self.x, self.y, self.z)

    @property
    def im(self) -> ImQuaternion:
        return ImQuaternion(self.x, self.y, self.z)

    def to_array(self):
        return stack(self.components, axis=-1)

    def __add__(self, other) -> "Quaternion":
        if isinstance(other, ImQuaternion):
            other = other.as_quaternion()
        if not isinstance(other, Quaternion):
            return Quaternion(self.re + other, self.x, self.y, self.z)
        return Quaternion(*(a + b for a, b in zip(self.components, other.components)))

    __radd__ = __add__

    def __sub__(self, other) -> "Quaternion":
        return self + (-other)

    def __rsub__(self, other) -> "Quaternion":
        return (-self) + other

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.re, -self.x, -self.y, -self.z)

    def __mul__(self, other) -> "Quaternion":
        if isinstance(other, ImQuaternion):
            other = other.as_quaternion()
        if isinstance(other, Quaternion):
            return qmul(self, other)
        return self.scale(other)

    def __rmul__(self, other) -> "Quaternion":
        return self.scale(other)

    def scale(self, s) -> "Quaternion":
        return Quaternion(self.re * s, self.x * s, self.y * s, self.z * s)

    def conj(self) -> "Quaternion":
        return Quaternion(self.re, -self.x, -self.y, -self.z)

    def norm2(self):
        return self.re * self.re + self.x * self.x + self.y * self.y + self.z * self.z

    def norm(self):
        return sqrt(self.norm2())

    def inv(self) -> "Quaternion":
        return qinv(self)


def qmul(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product ``a*b``."""
    a0, a1, a2, a3 = a.components
    b0, b1, b2, b3 = b.components
    return Quaternion(
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    )


def qinv(a: Quaternion) -> Quaternion:
    """Multiplicative inverse ``conj(a)/|a|^2``."""
    if not any(isinstance(c, Jet) for c in a.components):
        comps = np.abs(np.stack(np.broadcast_arrays(*a.components)))
        if np.any(comps.max(axis=0) < 1e-300):
            raise ZeroDivisor("inverse of a zero quaternion")
    n2 = a.norm2()
    return a.conj().scale(1.0 / n2)


def im_part(a: Quaternion) -> ImQuaternion:
    return a.im


def conj(a: Quaternion) -> Quaternion:
    return a.conj()


# -- H^n helpers -------------------------------------------------------------
# A point of H^n is a sequence of quaternions; products with a single
# quaternion act componentwise from the left.

QVector = Sequence[Quaternion]


def qvec_from_array(a, n: int) -> tuple[Quaternion, ...]:
    return tuple(Quaternion.from_array(a[..., 4 * l : 4 * l + 4]) for l in range(n))


def qvec_to_array(v: QVector):
    return stack([c for q in v for c in q.components], axis=-1)


def qvec_norm2(v: QVector):
    out = v[0].norm2()
    for q in v[1:]:
        out = out + q.norm2()
    return out


def qvec_lmul(a: Quaternion, v: QVector) -> tuple[Quaternion, ...]:
    return tuple(qmul(a, q) for q in v)


def qvec_add(u: QVector, v: QVector) -> tuple[Quaternion, ...]:
    return tuple(a + b for a, b in zip(u, v))


def qvec_scale(v: QVector, s) -> tuple[Quaternion, ...]:
    return tuple(q.scale(s) for q in v)


def qvec_herm(u: QVector, v: QVector) -> Quaternion:
    """``sum_l u_l * conj(v_l)``; its real part is the Euclidean inner product."""
    out = qmul(u[0], v[0].conj())
    for a, b in zip(u[1:], v[1:]):
        out = out + qmul(a, b.conj())
    return out


ONE = Quaternion(1.0, 0.0, 0.0, 0.0)
I = Quaternion(0.0, 1.0, 0.0, 0.0)
J = Quaternion(0.0, 0.0, 1.0, 0.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)
BASIS = (ONE, I, J, K)
