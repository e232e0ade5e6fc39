"""Single-operator and row dilations realised on finite windows.

A window keeps the base space plus ``level`` copies of a defect fiber.  Every
operator built here is lower triangular with respect to the level grading, so
products of window blocks agree with compressions of the true products and only
the last ``band_width`` levels lose isometry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .errors import NotAContraction, NotAnIsometry, NotARowContraction


@dataclass(frozen=True)
class TruncatedOperator:
    """Compression of an infinite banded operator to a level window.

    ``base_dim`` is the dimension of the non-tower part of the range space and
    ``orig_dim`` the dimension of the original space sitting at its start.
    ``domain_base_dim`` differs from ``base_dim`` only for operators between
    two different towers.
    """

    base_dim: int
    level: int
    block: np.ndarray
    band_width: int = 1
    tail_tag: str = "shift"
    fiber_dim: int = 0
    orig_dim: int | None = None
    domain_base_dim: int | None = None
    domain_orig_dim: int | None = None
    layout: str = "tower"

    @property
    def h_out(self) -> int:
        return self.base_dim if self.orig_dim is None else self.orig_dim

    @property
    def h_in(self) -> int:
        if self.domain_orig_dim is not None:
            return self.domain_orig_dim
        if self.domain_base_dim is not None:
            return self.domain_base_dim
        return self.h_out

    @property
    def in_base(self) -> int:
        return self.base_dim if self.domain_base_dim is None else self.domain_base_dim

    def valid_cols(self, band=None) -> np.ndarray:
        """Column indices whose image stays inside the window."""
        b = self.band_width if band is None else band
        if self.layout == "bilateral":
            # [H, +levels 1..N, -levels 1..N]; the +N level leaves the window
            n0, f, N = self.base_dim, self.fiber_dim, self.level
            keep = list(range(n0 + f * max(N - b, 0)))
            keep += list(range(n0 + f * N, n0 + 2 * f * N))
            return np.array(keep, dtype=int)
        m = self.in_base + self.fiber_dim * max(self.level - b, 0)
        return np.arange(m)

    def compress(self, power: int = 1) -> np.ndarray:
        """``P_H B^k |_H`` for a square window block."""
        b = np.linalg.matrix_power(self.block, power) if power != 1 else self.block
        return b[: self.h_out, : self.h_in]

    def isometry_residual(self) -> float:
        cols = self.valid_cols()
        v = self.block[:, cols]
        return la.isometry_residual(v) if cols.size else 0.0


@dataclass(frozen=True)
class RowOperator:
    blocks: tuple

    def __post_init__(self):
        rows = {np.shape(b.block if isinstance(b, TruncatedOperator) else b)[0] for b in self.blocks}
        if len(rows) > 1:
            raise la.DimensionMismatch("row blocks must share their output space")

    @property
    def n(self) -> int:
        return len(self.blocks)

    def matrix(self) -> np.ndarray:
        return np.hstack([np.asarray(b) for b in self.blocks])

    def norm(self) -> float:
        return la.opnorm(self.matrix())


def _shift_tower(n0, f, N):
    """Window block of the pure tower shift (level k -> k+1) padded by ``n0`` zeros."""
    m = n0 + f * N
    s = la.zeros(m, m)
    for k in range(1, N):
        r0 = n0 + f * k
        c0 = n0 + f * (k - 1)
        s[r0 : r0 + f, c0 : c0 + f] = np.eye(f)
    return s


def minimal_isometric_dilation(T, N: int, tol=None) -> TruncatedOperator:
    """Minimal isometric coextension of a contraction on ``H + N`` defect copies."""
    if N < 1:
        raise ValueError("level N must be at least 1")
    T = np.asarray(T, dtype=complex)
    d = la.defect(T, tol)
    n, r = T.shape[0], d.rank
    if r == 0:
        return TruncatedOperator(n, N, la.frozen(T), 1, "unitary", 0)
    blk = _shift_tower(n, r, N)
    blk[:n, :n] = T
    blk[n : n + r, :n] = d.compressed_defect
    return TruncatedOperator(n, N, la.frozen(blk), 1, "shift", r)


def schaeffer_unitary_dilation(T, N: int, tol=None) -> TruncatedOperator:
    """Window of the Schaeffer unitary dilation.

    Layout is ``[H, D+ levels 1..N, D- levels 1..N]`` where the plus tower
    carries the defect of ``T`` and the minus tower the defect of ``T*``.
    """
    if N < 1:
        raise ValueError("level N must be at least 1")
    T = np.asarray(T, dtype=complex)
    n = T.shape[0]
    dT = la.defect(T, tol)
    dS = la.defect(la.adj(T), tol)
    r = dT.rank
    if r != dS.rank:
        raise NotAContraction("defect ranks of T and T* disagree beyond tolerance")
    if r == 0:
        return TruncatedOperator(n, N, la.frozen(T), 1, "unitary", 0, layout="bilateral")
    bT, bS = dT.range_basis, dS.range_basis
    m = n + 2 * r * N
    U = la.zeros(m, m)
    plus = lambda k: slice(n + r * (k - 1), n + r * k)
    minus = lambda k: slice(n + r * N + r * (k - 1), n + r * N + r * k)
    U[:n, :n] = T
    U[plus(1), :n] = dT.compressed_defect
    # first minus level feeds H and the first plus level through the rotation block
    U[:n, minus(1)] = dS.defect @ bS
    U[plus(1), minus(1)] = -la.adj(bT) @ la.adj(T) @ bS
    for k in range(1, N):
        U[plus(k + 1), plus(k)] = np.eye(r)
        U[minus(k), minus(k + 1)] = np.eye(r)
    return TruncatedOperator(n, N, la.frozen(U), 1, "unitary", r, layout="bilateral")


def schaeffer_valid_rows(U: TruncatedOperator) -> np.ndarray:
    """Rows on which ``U U* = I`` holds (all but the outermost minus level)."""
    n0, f, N = U.base_dim, U.fiber_dim, U.level
    return np.arange(n0 + 2 * f * N - f)


def row_isometric_coextension(A, N: int, tol=None) -> RowOperator:
    """Row-isometric coextension of a row contraction ``[A_1 ... A_n]``.

    The tower is indexed by words in ``n`` letters of length ``0..N-1``; word
    ``w`` at length ``L`` sits at level ``L + 1``.  ``V_i`` sends ``h`` to
    ``A_i h`` plus the ``i``-th slice of the row defect on the empty word, and
    sends ``d (x) e_w`` to ``d (x) e_{iw}``.
    """
    if N < 1:
        raise ValueError("level N must be at least 1")
    blocks = [np.asarray(a, dtype=complex) for a in (A.blocks if isinstance(A, RowOperator) else A)]
    n_letters = len(blocks)
    h = blocks[0].shape[0]
    row = np.hstack(blocks)
    if la.opnorm(row) > 1 + la._tol(tol):
        raise NotARowContraction(f"row norm {la.opnorm(row):.6g} exceeds 1")
    d = la.defect(row, tol)
    r = d.rank
    words = [()]
    layer = [()]
    for _ in range(1, N):
        layer = [(i,) + w for w in layer for i in range(n_letters)]
        words.extend(layer)
    index = {w: k for k, w in enumerate(words)}
    m = h + r * len(words)
    out = []
    for i, a in enumerate(blocks):
        v = la.zeros(m, m)
        v[:h, :h] = a
        if r:
            v[h : h + r, :h] = d.compressed_defect[:, i * h : (i + 1) * h]
            for w, k in index.items():
                iw = (i,) + w
                if iw in index:
                    j = index[iw]
                    v[h + r * j : h + r * (j + 1), h + r * k : h + r * (k + 1)] = np.eye(r)
        tag = "shift" if r else "unitary"
        out.append(TruncatedOperator(h, N, la.frozen(v), 1, tag, r, layout="words"))
    return RowOperator(tuple(out))


def row_valid_cols(V: TruncatedOperator, n_letters: int) -> np.ndarray:
    """Columns of a word-indexed window whose words have length at most ``N - 2``."""
    h, r, N = V.base_dim, V.fiber_dim, V.level
    count = sum(n_letters**L for L in range(max(N - 1, 0)))
    return np.arange(h + r * count)


@dataclass(frozen=True)
class WoldResult:
    unitary_part: np.ndarray
    unitary_subspace: la.Subspace
    shift_multiplicity: int
    tag: str = "exact"
    extras: dict = field(default_factory=dict)


def _largest_unitary_reducing(B, start, tol):
    """Largest subspace inside ``start`` reducing ``B`` on which ``B`` is unitary."""
    n = B.shape[0]
    I = la.eye(n)
    q = start
    if q.shape[1]:
        # restrict to vectors where B and B* are both isometric
        m = np.vstack([(la.adj(B) @ B - I) @ q, (B @ la.adj(B) - I) @ q])
        q = q @ _null(m, tol)
    for _ in range(n + 1):
        if q.shape[1] == 0:
            break
        p_perp = I - q @ la.adj(q)
        m = np.vstack([p_perp @ B @ q, p_perp @ la.adj(B) @ q])
        k = _null(m, tol)
        if k.shape[1] == q.shape[1]:
            break
        q = la.orth(q @ k, tol)
    return q


def _null(m, tol):
    """Orthonormal basis of the numerical kernel of ``m``."""
    tol = la._tol(tol)
    c = m.shape[1]
    if c == 0:
        return la.zeros(0, 0)
    if m.shape[0] == 0:
        return la.eye(c)
    _, s, vh = np.linalg.svd(m)
    rank = int(np.sum(s > 10 * tol * max(1.0, s[0] if s.size else 0.0)))
    return la.adj(vh)[:, rank:]


def wold_decomposition(V, tol=None) -> WoldResult:
    """Unitary part and shift multiplicity of an isometry or a truncated isometry.

    For a window, the unitary part is searched inside the intersection of the
    ranges of ``B^k`` for ``k <= N - band`` and certified only on the window.
    The multiplicity is the kernel dimension of ``B*``, which equals the true
    wandering dimension because windows are co-invariant.
    """
    tol = la._tol(tol)
    if not isinstance(V, TruncatedOperator):
        B = np.asarray(V, dtype=complex)
        res = la.isometry_residual(B)
        if res > 10 * tol:
            raise NotAnIsometry(f"isometry residual {res:.3g}")
        if B.shape[0] == B.shape[1]:
            return WoldResult(la.frozen(B), la.Subspace.full(B.shape[0]), 0)
        raise NotAnIsometry("a finite non-square isometry has no Wold decomposition")
    B = V.block
    res = V.isometry_residual()
    if res > 10 * tol:
        raise NotAnIsometry(f"window isometry residual {res:.3g}")
    n = B.shape[0]
    mult = _null(la.adj(B), tol).shape[1]
    q = la.eye(n)
    bk = la.eye(n)
    for _ in range(max(V.level - V.band_width, 1) if V.fiber_dim else 1):
        bk = bk @ B
        rng = la.orth(bk, tol)
        # intersection of span(q) with span(rng)
        m = (la.eye(n) - rng @ la.adj(rng)) @ q
        q = la.orth(q @ _null(m, tol), tol)
    q = _largest_unitary_reducing(B, q, tol)
    u = la.adj(q) @ B @ q
    return WoldResult(la.frozen(u), la.Subspace(n, la.frozen(q)), int(mult), "window-certified")
