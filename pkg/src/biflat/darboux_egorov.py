"""Residuals of the extended Darboux-Egorov and Lame systems, and the Lax pair.

All directional derivatives e(.) = sum_l d_l and E(.) = sum_l u^l d_l are
assembled from finite-difference partials so that any black-box field can be
checked.  Indices are 0-based: ``base=0`` selects d_1.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .geometry import LameField, RotationField, check_chart
from .numerics import eigenvalues, fd_jacobian

# 4th-order stencils keep the truncation error of the residuals near 1e-11
FD_ORDER = 4


def ed_residual(beta: RotationField, u, order: int = FD_ORDER):
    """(r1, r2, r3): residuals of d_k b_ij = b_ik b_kj, e(b_ij) = 0 and
    E(b_ij) = (d_i - d_j - 1) b_ij."""
    u = check_chart(u)
    n = beta.n
    B = beta(u)
    dB = fd_jacobian(beta, u, order=order)  # dB[i, j, k] = d_k beta_ij
    d = np.asarray(beta.degrees, dtype=float)
    off = ~np.eye(n, dtype=bool)
    r1 = 0.0
    for i, j, k in itertools.permutations(range(n), 3):
        r1 = max(r1, abs(dB[i, j, k] - B[i, k] * B[k, j]))
    e_b = dB.sum(axis=2)
    E_b = dB @ u
    hom = (d[:, None] - d[None, :] - 1.0) * B
    r2 = float(np.max(np.abs(e_b[off]))) if n > 1 else 0.0
    r3 = float(np.max(np.abs((E_b - hom)[off]))) if n > 1 else 0.0
    return float(r1), r2, r3


def lame_residual(beta: RotationField, H: LameField, u, order: int = FD_ORDER):
    """(s1, s2, s3): residuals of d_j H_i = b_ij H_j, e(H_i) = 0, E(H_i) = d_i H_i."""
    u = check_chart(u)
    n = H.n
    B, h = beta(u), H(u)
    dH = fd_jacobian(H, u, order=order)  # dH[i, k] = d_k H_i
    d = np.asarray(H.degrees, dtype=float)
    off = ~np.eye(n, dtype=bool)
    s1 = float(np.max(np.abs((dH - B * h[None, :])[off]))) if n > 1 else 0.0
    s2 = float(np.max(np.abs(dH.sum(axis=1))))
    s3 = float(np.max(np.abs(dH @ u - d * h)))
    return s1, s2, s3


@dataclass(frozen=True)
class LaxPair:
    """V and W_k at one point.  The eigenvalue mu appearing in the
    eigenvector relation E(H_i) = (d_i - d_1 + mu) H_i is read as the
    V-eigenvalue of that eigenvector; it is not stored."""

    V: np.ndarray
    W: np.ndarray
    k: int
    residual: float | None = None


def lax_V(beta: RotationField, u, base: int = 0) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    d = np.asarray(beta.degrees, dtype=float)
    B = beta(u).copy()
    np.fill_diagonal(B, 0.0)
    V = (u[None, :] - u[:, None]) * B
    V -= np.diag(d - d[base])
    return V


def lax_W(beta: RotationField, u, k: int) -> np.ndarray:
    B = beta(np.asarray(u, dtype=float)).copy()
    np.fill_diagonal(B, 0.0)
    W = np.zeros_like(B)
    W[k, :] += B[k, :]
    W[:, k] -= B[:, k]
    return W


def lax_residual(beta: RotationField, u, k: int, base: int = 0, order: int = FD_ORDER) -> float:
    """max |d_k V - [V, W_k]| with d_k V by finite differences."""
    from .numerics import fd_partial

    u = check_chart(u)
    dV = fd_partial(lambda x: lax_V(beta, x, base), u, k, order=order)
    V, W = lax_V(beta, u, base), lax_W(beta, u, k)
    return float(np.max(np.abs(dV - (V @ W - W @ V))))


def lax_matrices(beta: RotationField, u, k: int, base: int = 0, check: bool = False) -> LaxPair:
    u = check_chart(u)
    res = lax_residual(beta, u, k, base) if check else None
    return LaxPair(lax_V(beta, u, base), lax_W(beta, u, k), k, res)


def _matching_distance(a, b) -> float:
    """Bottleneck distance between two equal-size multisets of complex numbers."""
    a, b = np.asarray(a), np.asarray(b)
    if len(a) <= 6:
        return min(
            float(np.max(np.abs(a - b[list(p)]))) for p in itertools.permutations(range(len(b)))
        )
    key = lambda z: (round(z.real, 12), round(z.imag, 12))  # noqa: E731
    return float(np.max(np.abs(np.array(sorted(a, key=key)) - np.array(sorted(b, key=key)))))


def spectrum(beta: RotationField, u, base: int = 0) -> np.ndarray:
    return eigenvalues(lax_V(beta, check_chart(u), base))


def spectrum_invariance(beta: RotationField, path, base: int = 0) -> float:
    specs = [spectrum(beta, u, base) for u in path]
    if len(specs) < 2:
        return 0.0
    return max(_matching_distance(s, t) for s, t in zip(specs, specs[1:]))


def d1_in_spectrum(beta: RotationField, u, base: int = 0) -> float:
    d = np.asarray(beta.degrees, dtype=float)
    return float(np.min(np.abs(spectrum(beta, u, base) - d[base])))
