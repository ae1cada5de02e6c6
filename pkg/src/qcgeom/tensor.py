"""Pointwise tensor calculus: brackets, exterior derivatives, invariant splits.

Vector fields and 1-forms are handled on ambient coordinate extensions:
a field is a callable taking (jet-valued) points of shape ``(..., m)`` to
components of shape ``(..., m)``.  Nothing here knows about connections.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .jet import Jet, einsum, seed, value_of

Field = Callable[[object], object]


def exterior_d_jet(form: Jet) -> Jet:
    """``d sigma_{ij} = d_i sigma_j - d_j sigma_i`` for jet-valued covectors ``(..., m)``."""
    g = form.grad()  # (..., j, i) = d_i sigma_j
    return g.swapaxes(-1, -2) - g


def lie_bracket(A: Field, B: Field, p) -> np.ndarray:
    """``[A, B]`` at ``p`` from order-1 jets of the field components."""
    p = np.asarray(p, dtype=float)
    x = seed(p, 1)
    a, b = A(x), B(x)
    a0, b0 = value_of(a), value_of(b)
    # A(B^i) = sum_k A^k d_k B^i
    return np.einsum("k,ik->i", a0, _jacobian(b, p.size)) - np.einsum("k,ik->i", b0, _jacobian(a, p.size))


def _jacobian(v, m: int) -> np.ndarray:
    if not isinstance(v, Jet):
        return np.zeros(np.shape(v) + (m,))
    return value_of(v.grad())


def exterior_d(sigma: Field, p) -> np.ndarray:
    """``d sigma`` at ``p`` as an antisymmetric ``(m, m)`` matrix on coordinate fields."""
    p = np.asarray(p, dtype=float)
    s = sigma(seed(p, 1))
    if not isinstance(s, Jet):
        return np.zeros((p.size, p.size))
    return value_of(exterior_d_jet(s))


def batched_bracket(a: Jet, b: Jet) -> Jet:
    """Brackets of two batched field families sharing a leading point axis.

    ``a``: ``(P, NA, m)``, ``b``: ``(P, NB, m)`` -> ``(P, NA, NB, m)``.
    """
    ga = a.grad()  # (P, NA, m_i, m_k)
    gb = b.grad()
    ab = einsum("pak,pbik->pabi", a, gb)
    ba = einsum("pbk,paik->pabi", b, ga)
    return ab - ba


@dataclass(frozen=True)
class TensorValue:
    """Covariant tensor evaluated on a full frame at a point."""

    valence: int
    components: np.ndarray
    base: np.ndarray

    def __post_init__(self):
        if self.components.ndim != self.valence or len(set(self.components.shape)) > 1:
            raise ValueError("components must be a cube of the stated valence")


# -- invariant decomposition on H ---------------------------------------------------


@dataclass(frozen=True)
class EndoDecomposition:
    part3: np.ndarray
    partMinus1: np.ndarray


def casimir(psi: np.ndarray, cs: np.ndarray) -> np.ndarray:
    """Casimir action ``B -> sum_s B(I_s., I_s.)`` written on endomorphisms.

    For ``B(X, Y) = g(Psi X, Y)`` this is ``Psi -> -sum_s I_s Psi I_s``.
    """
    return -np.einsum("...sij,...jk,...skl->...il", cs, psi, cs)


def casimir_project(psi: np.ndarray, cs: np.ndarray) -> EndoDecomposition:
    """Split an endomorphism of H into its Casimir eigen-parts (eigenvalues 3 and -1)."""
    psi = np.asarray(psi, dtype=float)
    ups = casimir(psi, cs)
    p3 = 0.25 * (psi + ups)
    return EndoDecomposition(p3, psi - p3)


def frame_casimir_bilinear(B, cs):
    """``sum_s B(I_s e_a, I_s e_b)`` for a bilinear form on the horizontal frame.

    ``cs[..., s, c, a]`` holds the frame components of ``I_s e_a``.
    Works on jets and arrays.
    """
    t = einsum("...sca,...cd->...sad", cs, B)
    return einsum("...sad,...sdb->...ab", t, cs)
