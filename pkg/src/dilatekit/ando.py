"""Parrott completion, commutant lifting for one contraction, Ando dilations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .dilations import TruncatedOperator, minimal_isometric_dilation, wold_decomposition
from .errors import LiftingFailed, NotAContraction, NotCommuting, NotIntertwining


@dataclass(frozen=True)
class CommutingPair:
    A1: np.ndarray
    A2: np.ndarray

    @property
    def commutator_residual(self) -> float:
        return la.opnorm(self.A1 @ self.A2 - self.A2 @ self.A1)


@dataclass(frozen=True)
class IntertwiningTriple:
    A1: np.ndarray
    A2: np.ndarray
    X: np.ndarray

    @property
    def residual(self) -> float:
        return la.opnorm(self.A1 @ self.X - self.X @ self.A2)


def _pinv_sqrt(g, tol):
    """Pseudo-inverse of ``g^(1/2)`` for Hermitian PSD ``g``; small eigenvalues dropped."""
    g = (g + la.adj(g)) / 2
    w, q = np.linalg.eigh(g)
    inv = np.where(w > tol, 1.0 / np.sqrt(np.where(w > tol, w, 1.0)), 0.0)
    return (q * inv) @ la.adj(q)


def parrott_completion(A, B, C, tol=None) -> np.ndarray:
    """Central completion ``X`` making ``[[A, B], [C, X]]`` have the least possible norm.

    The attained norm is ``mu = max(||[A; C]||, ||[A B]||)``.  After scaling by
    ``mu``, ``B = D_{A*} G1`` and ``C = G2 D_A`` and the completion is
    ``-G2 A* G1``.
    """
    tol = la._tol(tol)
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex).reshape(A.shape[0], -1)
    C = np.asarray(C, dtype=complex).reshape(-1, A.shape[1])
    mu = max(la.opnorm(np.vstack([A, C])), la.opnorm(np.hstack([A, B])))
    out = la.zeros(C.shape[0], B.shape[1])
    if mu <= tol or out.size == 0:
        return out
    a, b, c = A / mu, B / mu, C / mu
    g1 = _pinv_sqrt(la.eye(a.shape[0]) - a @ la.adj(a), tol) @ b
    g2 = c @ _pinv_sqrt(la.eye(a.shape[1]) - la.adj(a) @ a, tol)
    return -mu * (g2 @ la.adj(a) @ g1)


def complement_basis(w, tol=None) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the columns of ``w``."""
    w = np.asarray(w, dtype=complex)
    n = w.shape[0]
    q = la.orth(w, tol) if w.size else la.zeros(n, 0)
    if q.shape[1] == n:
        return la.zeros(n, 0)
    u, _, _ = np.linalg.svd(la.eye(n) - q @ la.adj(q))
    return u[:, : n - q.shape[1]]


def extend_by_parrott(W, Y, top, h_out, tol=None) -> np.ndarray:
    """Contraction ``Z`` with ``Z W = Y`` and first ``h_out`` rows equal to ``top``.

    ``W`` is an isometry into the domain; the unknown part (the lower rows on
    the complement of ``Ran W``) comes from a Parrott completion, so
    ``||Z|| = max(||Y||, ||top||)``.
    """
    W = np.asarray(W, dtype=complex)
    n = W.shape[0]
    Wp = complement_basis(W, tol)
    a = Y[:h_out]
    c = Y[h_out:]
    b = top @ Wp
    x = parrott_completion(a, b, c, tol)
    right = np.vstack([b, x])
    return Y @ la.adj(W) + right @ la.adj(Wp)


def commutant_lifting_disk(T, X, N: int, tol=None) -> TruncatedOperator:
    """Lift ``X`` commuting with ``T`` to ``Y`` commuting with the minimal isometric dilation.

    Level ``m`` of ``Y`` is fixed on ``V(K_{m-1})`` by the commutation relation
    and completed on the remaining ``r`` directions by Parrott, which keeps
    ``||Y|| = ||X||`` and makes ``VY = YV`` exact on all but the last level.
    """
    tol = la._tol(tol)
    T = np.asarray(T, dtype=complex)
    X = np.asarray(X, dtype=complex)
    for name, m in (("T", T), ("X", X)):
        if la.opnorm(m) > 1 + tol:
            raise NotAContraction(f"{name} is not a contraction")
    res = la.opnorm(T @ X - X @ T)
    if res > 10 * tol * max(1.0, la.opnorm(T) * la.opnorm(X)):
        raise NotCommuting(f"commutator residual {res:.3g}", residual=res)
    V = minimal_isometric_dilation(T, N, tol)
    n, r = T.shape[0], V.fiber_dim
    if r == 0:
        return TruncatedOperator(n, N, la.frozen(X), 1, "unitary", 0)
    if n and np.array_equal(X, X[0, 0] * la.eye(n)):
        # a scalar commutes with everything and lifts to the same scalar
        return TruncatedOperator(n, N, la.frozen(X[0, 0] * la.eye(n + N * r)), 1, "none", r)
    Y = X
    for m in range(1, N + 1):
        dim_prev = n + (m - 1) * r
        dim_m = n + m * r
        Vm = V.block[:dim_m, :dim_prev]
        known = Vm @ Y
        top = np.hstack([Y, la.zeros(dim_prev, r)])
        Y = extend_by_parrott(Vm, known, top, dim_prev, tol)
        # rows above the new level are exactly [Y_prev, 0]
        Y[:dim_prev] = top
    return TruncatedOperator(n, N, la.frozen(Y), 1, "none", r)


def _tower_block(n, f, N, head, first, shift_mask):
    """Window block ``[[head, 0], [first@level1, tower]]``.

    ``shift_mask`` is a boolean vector over fiber coordinates: ``True`` means
    the coordinate moves up one level, ``False`` means it stays put.
    """
    m = n + f * N
    b = la.zeros(m, m)
    b[:n, :n] = head
    b[n : n + f, :n] = first
    sh = np.diag(shift_mask.astype(complex))
    st = np.diag((~shift_mask).astype(complex))
    for k in range(N):
        c = slice(n + f * k, n + f * (k + 1))
        b[c, c] += st
        if k + 1 < N:
            b[n + f * (k + 1) : n + f * (k + 2), c] += sh
    return b


def ando_dilation(pair: CommutingPair, N: int, tol=None):
    """Commuting isometric coextensions of a commuting pair of contractions.

    Both isometries live on ``H + l2(D1 + D2)``.  ``W1`` dilates ``A1`` along
    the first defect tower and fixes the second; ``W2`` does the reverse.
    Then ``W1 W2`` and ``W2 W1`` are both minimal-type dilations of ``A1 A2``
    and a level-wise unitary ``U`` fixing ``H`` matches them; ``V1 = U* W1``
    and ``V2 = W2 U`` commute exactly on the window.
    """
    tol = la._tol(tol)
    A1 = np.asarray(pair.A1, dtype=complex)
    A2 = np.asarray(pair.A2, dtype=complex)
    res = la.opnorm(A1 @ A2 - A2 @ A1)
    if res > 10 * tol:
        raise NotCommuting(f"commutator residual {res:.3g}", residual=res)
    d1, d2 = la.defect(A1, tol), la.defect(A2, tol)
    n, r1, r2 = A1.shape[0], d1.rank, d2.rank
    f = r1 + r2
    if f == 0:
        W1 = TruncatedOperator(n, N, la.frozen(A1), 1, "unitary", 0)
        W2 = TruncatedOperator(n, N, la.frozen(A2), 1, "unitary", 0)
        return W1, W2
    D1 = d1.compressed_defect
    D2 = d2.compressed_defect
    mask1 = np.array([True] * r1 + [False] * r2)
    first1 = np.vstack([D1, la.zeros(r2, n)])
    first2 = np.vstack([la.zeros(r1, n), D2])
    W1 = _tower_block(n, f, N, A1, first1, mask1)
    W2 = _tower_block(n, f, N, A2, first2, ~mask1)
    prod = A1 @ A2
    c12 = np.vstack([D1 @ A2, D2])
    c21 = np.vstack([D1, D2 @ A1])
    # single-level windows of W2 W1 and W1 W2
    win21 = la.zeros(n + f, n + f)
    win21[:n, :n], win21[n:, :n] = prod, c21
    win12 = la.zeros(n + f, n + f)
    win12[:n, :n], win12[n:, :n] = prod, c12
    sol = la.intertwiner_solve([win21], [win12], la.Subspace.coordinates(n + f, range(n)), tol)
    if not sol.present:
        raise LiftingFailed(f"unitary matching failed, residual {sol.residual:.3g}")
    gamma = sol.unitary[n:, n:]
    U = la.dsum(la.eye(n), *([gamma] * N))
    V1 = la.adj(U) @ W1
    V2 = W2 @ U
    t1 = TruncatedOperator(n, N, la.frozen(V1), 1, "identity-shift", f)
    t2 = TruncatedOperator(n, N, la.frozen(V2), 1, "identity-shift", f)
    return t1, t2


def ando_certificates(pair: CommutingPair, V1: TruncatedOperator, V2: TruncatedOperator, tol=None) -> dict:
    """Residuals backing the Ando conclusions on the window."""
    tol = la._tol(tol)
    A1 = np.asarray(pair.A1, dtype=complex)
    A2 = np.asarray(pair.A2, dtype=complex)
    n = A1.shape[0]
    B1, B2 = V1.block, V2.block
    out = {
        "isometry_V1": V1.isometry_residual(),
        "isometry_V2": V2.isometry_residual(),
        "coextension_V1": max(la.opnorm(B1[:n, :n] - A1), la.opnorm(B1[:n, n:])),
        "coextension_V2": max(la.opnorm(B2[:n, :n] - A2), la.opnorm(B2[:n, n:])),
    }
    cols = V1.valid_cols(band=2) if V1.fiber_dim else np.arange(n)
    out["commutator"] = la.opnorm((B1 @ B2 - B2 @ B1)[:, cols]) if cols.size else 0.0
    # V2 = (minimal dilation of A2) + (part without shift)
    w = wold_decomposition(V2, tol)
    d2 = la.defect(A2, tol)
    out["v2_multiplicity"] = w.shift_multiplicity
    out["a2_defect_rank"] = d2.rank
    out["v2_split"] = _minimal_part_residual(A2, V2, tol)
    return out


def _minimal_part_residual(A, V: TruncatedOperator, tol):
    """Embed the minimal dilation of ``A`` into ``V`` and measure the mismatch.

    The embedding sends ``H`` to itself and level ``m`` of the minimal tower to
    ``V^(m-1)`` applied to the level-one image of the defect.  A small residual
    means the embedded copy is isometric, invariant and co-invariant.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    Vmin = minimal_isometric_dilation(A, max(V.level - 1, 1), tol)
    r = Vmin.fiber_dim
    if r == 0:
        return la.opnorm(V.block[:n, :n] - A)
    B = V.block
    lvl1 = np.vstack([la.zeros(n, n), B[n:, :n]])
    # isometric map from the defect fiber onto the part of V H outside H
    J = lvl1 @ np.linalg.pinv(la.defect(A, tol).compressed_defect)
    cols = [la.eye(B.shape[0])[:, :n]]
    cur = J
    for _ in range(Vmin.level):
        cols.append(cur)
        cur = B @ cur
    Phi = np.hstack(cols)
    m = Phi.shape[1] - r
    res = la.isometry_residual(Phi)
    res = max(res, la.opnorm((B @ Phi - Phi @ Vmin.block)[:, :m]))
    res = max(res, la.opnorm((la.adj(B) @ Phi - Phi @ la.adj(Vmin.block))[:, : n + r * max(Vmin.level - 1, 0)]))
    return res


def t2_commutant_lifting(triple: IntertwiningTriple, N: int, tol=None):
    """Isometric coextensions ``A1~, A2~, X~`` with ``A1~ X~ = X~ A2~`` and full join.

    Treated as the two-vertex tree with one edge carrying ``X``.
    """
    from .lifting import lift_tree

    tol = la._tol(tol)
    A1 = np.asarray(triple.A1, dtype=complex)
    A2 = np.asarray(triple.A2, dtype=complex)
    X = np.asarray(triple.X, dtype=complex)
    res = la.opnorm(A1 @ X - X @ A2)
    if res > 10 * tol:
        raise NotIntertwining(f"intertwining residual {res:.3g}", residual=res)
    lift = lift_tree(2, [(0, 1)], {(0, 1): X}, [A1.shape[0], A2.shape[0]], [A1, A2], tol=tol)
    sig, blocks = lift.windows(N)
    Xt = sig[(0, 1)]
    return blocks[0], blocks[1], Xt
