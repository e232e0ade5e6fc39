"""Dense complex linear algebra used by every other module.

All rank decisions go through one module-wide tolerance (default 1e-9).
Derived residual checks compare against ten times that value.
"""

from __future__ import annotations

import contextlib
import os
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .errors import AmbientMismatch, DimensionMismatch, NotAContraction

DEFAULT_TOL = 1e-9
_TOL = float(os.environ.get("DILATEKIT_TOL", DEFAULT_TOL))


def get_tol() -> float:
    return _TOL


def set_tol(tol: float) -> None:
    global _TOL
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    _TOL = float(tol)


@contextlib.contextmanager
def tolerance(tol: float):
    """Temporarily change the module-wide tolerance."""
    old = _TOL
    set_tol(tol)
    try:
        yield
    finally:
        set_tol(old)


def _tol(tol):
    return _TOL if tol is None else float(tol)


def as_matrix(a, rows=None, cols=None) -> np.ndarray:
    """Return an immutable complex 2-D copy of ``a``.

    Empty shapes are allowed (0-dimensional spaces show up whenever a defect
    vanishes), so a 1-D input is only accepted when it is empty or a shape hint
    resolves it.
    """
    m = np.array(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        if m.size == 0 and rows is not None and cols is not None:
            m = m.reshape(rows, cols)
        else:
            m = m.reshape(1, -1)
    elif m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got {m.ndim}-d array")
    if rows is not None and cols is not None and m.size == 0:
        m = m.reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    m.setflags(write=False)
    return m


def frozen(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.flags.writeable:
        m = m.copy()
        m.setflags(write=False)
    return m


def opnorm(a) -> float:
    """Spectral norm; zero for empty matrices."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def adj(a) -> np.ndarray:
    return np.asarray(a).conj().T


def zeros(r, c) -> np.ndarray:
    return np.zeros((r, c), dtype=complex)


def eye(n) -> np.ndarray:
    return np.eye(n, dtype=complex)


def dsum(*blocks) -> np.ndarray:
    """Block-diagonal direct sum that tolerates 0-dimensional blocks."""
    blocks = [np.asarray(b, dtype=complex).reshape(np.shape(b)) for b in blocks]
    if not blocks:
        return zeros(0, 0)
    return np.asarray(block_diag(*blocks), dtype=complex)


def isometry_residual(v) -> float:
    v = np.asarray(v)
    return opnorm(adj(v) @ v - eye(v.shape[1]))


def psd_sqrt(g, tol=None):
    """Square root of a Hermitian PSD matrix via eigh with clamping at zero."""
    g = (np.asarray(g, dtype=complex) + adj(g)) / 2
    w, q = np.linalg.eigh(g)
    w = np.where(w > 0, w, 0.0)
    return (q * np.sqrt(w)) @ adj(q)


def psd_factor(g, tol=None):
    """Return ``F`` with orthonormal-row structure such that ``F* F = g``.

    The number of rows is the count of eigenvalues above ``tol``; smaller
    eigenvalues are dropped, which perturbs ``g`` by at most ``tol``.
    """
    tol = _tol(tol)
    n = np.shape(g)[0]
    if n == 0:
        return zeros(0, 0)
    g = (np.asarray(g, dtype=complex) + adj(g)) / 2
    w, q = np.linalg.eigh(g)
    keep = w > tol
    w, q = w[keep][::-1], q[:, keep][:, ::-1]
    return np.sqrt(w)[:, None] * adj(q)


@dataclass(frozen=True)
class DefectData:
    defect: np.ndarray
    range_basis: np.ndarray
    compressed_defect: np.ndarray
    rank: int


def defect(T, tol=None) -> DefectData:
    """Defect operator ``(I - T*T)^(1/2)`` with its range and compressed form.

    The rank counts eigenvalues of ``I - T*T`` above the tolerance, so the
    dropped part perturbs ``V*V = I`` for the coextension by at most tol.
    """
    tol = _tol(tol)
    T = np.asarray(T, dtype=complex)
    if opnorm(T) > 1 + tol:
        raise NotAContraction(f"norm {opnorm(T):.6g} exceeds 1", norm=opnorm(T))
    n = T.shape[1]
    g = eye(n) - adj(T) @ T
    g = (g + adj(g)) / 2
    w, q = np.linalg.eigh(g)
    w = np.where(w > 0, w, 0.0)
    s = np.sqrt(w)
    d = (q * s) @ adj(q)
    keep = w > tol
    order = np.argsort(-w[keep], kind="stable")
    basis = q[:, keep][:, order]
    compressed = s[keep][order][:, None] * adj(basis)
    return DefectData(frozen(d), frozen(basis), frozen(compressed.reshape(len(order), n)), int(keep.sum()))


def classify(T, tol=None) -> dict:
    """Structural flags of ``T`` with the residual behind each flag."""
    tol = _tol(tol)
    T = np.asarray(T, dtype=complex)
    r, c = T.shape
    thr = 10 * tol
    nrm = opnorm(T)
    res = {
        "contraction": max(nrm - 1.0, 0.0),
        "isometry": opnorm(adj(T) @ T - eye(c)),
        "coisometry": opnorm(T @ adj(T) - eye(r)),
    }
    res["unitary"] = max(res["isometry"], res["coisometry"]) if r == c else float("inf")
    sv = np.linalg.svd(T, compute_uv=False) if T.size else np.zeros(0)
    nz = sv[sv > tol]
    res["partial_isometry"] = float(np.max(np.abs(1 - nz**2))) if nz.size else 0.0
    if r == c:
        sq = opnorm(T @ T)
        res["nilpotent_of_order_2"] = sq
        res["maximal_nilpotent_rep"] = max(sq, opnorm(T @ adj(T) + adj(T) @ T - eye(r)))
    else:
        res["nilpotent_of_order_2"] = float("inf")
        res["maximal_nilpotent_rep"] = float("inf")
    flags = {k: bool(v <= thr) for k, v in res.items()}
    flags["contraction"] = bool(nrm <= 1 + tol)
    return {"flags": flags, "residuals": res, "norm": nrm}


@dataclass(frozen=True)
class Subspace:
    ambient_dim: int
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def projection(self) -> np.ndarray:
        return self.basis @ adj(self.basis)

    @classmethod
    def span(cls, vectors, tol=None) -> "Subspace":
        v = np.asarray(vectors, dtype=complex)
        return cls(v.shape[0], frozen(orth(v, tol)))

    @classmethod
    def full(cls, n) -> "Subspace":
        return cls(n, frozen(eye(n)))

    @classmethod
    def coordinates(cls, n, idx) -> "Subspace":
        return cls(n, frozen(eye(n)[:, list(idx)]))


def orth(v, tol=None) -> np.ndarray:
    """Orthonormal basis for the column span, relative SVD threshold."""
    tol = _tol(tol)
    v = np.asarray(v, dtype=complex)
    if v.size == 0:
        return zeros(v.shape[0], 0)
    u, s, _ = np.linalg.svd(v, full_matrices=False)
    if s.size == 0 or s[0] <= 1e-300:
        return zeros(v.shape[0], 0)
    keep = s > tol * s[0]
    return u[:, keep]


def subspace_join(spaces, tol=None) -> Subspace:
    spaces = list(spaces)
    if not spaces:
        raise ValueError("need at least one subspace")
    n = spaces[0].ambient_dim
    if any(s.ambient_dim != n for s in spaces):
        raise AmbientMismatch("subspaces live in different ambient spaces")
    return Subspace(n, frozen(orth(np.hstack([s.basis for s in spaces]), tol)))


def projection_distance(a: Subspace, b: Subspace) -> float:
    return opnorm(a.projection - b.projection)


def smallest_reducing_subspace(generators, seed: Subspace, tol=None) -> Subspace:
    """Closure of ``seed`` under every generator and its adjoint."""
    n = seed.ambient_dim
    gens = [np.asarray(g, dtype=complex) for g in generators]
    if any(g.shape != (n, n) for g in gens):
        raise AmbientMismatch("generators must act on the seed's ambient space")
    q = seed.basis
    for _ in range(n + 1):
        parts = [q] + [g @ q for g in gens] + [adj(g) @ q for g in gens]
        q_new = orth(np.hstack(parts), tol)
        if q_new.shape[1] == q.shape[1]:
            break
        q = q_new
    return Subspace(n, frozen(q))


def _hs_orth(mats, n, tol):
    if not mats:
        return []
    stack = np.stack([np.asarray(m, dtype=complex).reshape(-1) for m in mats], axis=1)
    q = orth(stack, tol)
    return [q[:, k].reshape(n, n) for k in range(q.shape[1])]


def algebra_span(generators, unital=True, tol=None) -> list:
    """Hilbert-Schmidt orthonormal basis of the algebra generated by the inputs."""
    gens = [np.asarray(g, dtype=complex) for g in generators]
    if not gens:
        raise ValueError("need at least one generator")
    n = gens[0].shape[0]
    if any(g.shape != (n, n) for g in gens):
        raise DimensionMismatch("generators must be square of equal size")
    start = ([eye(n)] if unital else []) + gens
    basis = _hs_orth(start, n, tol)
    for _ in range(n * n + 1):
        prods = [a @ b for a in basis for b in basis]
        new = _hs_orth(basis + prods, n, tol)
        if len(new) == len(basis):
            break
        basis = new
    return [frozen(b) for b in basis]


def span_coordinates(basis, m):
    """Least-squares coordinates of ``m`` in the span of ``basis`` and the residual."""
    stack = np.stack([np.asarray(b).reshape(-1) for b in basis], axis=1)
    target = np.asarray(m, dtype=complex).reshape(-1)
    c, *_ = np.linalg.lstsq(stack, target, rcond=None)
    return c, float(np.linalg.norm(stack @ c - target))


@dataclass(frozen=True)
class IntertwinerResult:
    unitary: np.ndarray | None
    residual: float
    linear_residual: float

    @property
    def present(self) -> bool:
        return self.unitary is not None


def polar_unitary(m) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def intertwiner_solve(A_list, B_list, fixed: Subspace | None = None, tol=None) -> IntertwinerResult:
    """Find a unitary ``U`` with ``U A_k = B_k U``, ``U A_k* = B_k* U`` and ``U`` = I on ``fixed``.

    The linear system is solved for the solution nearest the identity, then
    polished to a unitary by polar decomposition.  When no unitary exists the
    result carries ``unitary=None`` and the least-squares residual.
    """
    tol = _tol(tol)
    A_list = [np.asarray(a, dtype=complex) for a in A_list]
    B_list = [np.asarray(b, dtype=complex) for b in B_list]
    if len(A_list) != len(B_list):
        raise DimensionMismatch("A_list and B_list differ in length")
    n = A_list[0].shape[0] if A_list else (fixed.ambient_dim if fixed else 0)
    for a, b in zip(A_list, B_list):
        if a.shape != (n, n) or b.shape != (n, n):
            raise DimensionMismatch("all operators must be square on a common space")
    if fixed is not None and fixed.ambient_dim != n:
        raise DimensionMismatch("fixed subspace has the wrong ambient dimension")
    I = eye(n)
    rows, rhs = [], []
    for a, b in zip(A_list, B_list):
        for x, y in ((a, b), (adj(a), adj(b))):
            # column-major vec: vec(U X) = (X^T kron I) vec U, vec(Y U) = (I kron Y) vec U
            rows.append(np.kron(x.T, I) - np.kron(I, y))
            rhs.append(np.zeros(n * n, dtype=complex))
    if fixed is not None and fixed.dim:
        q = fixed.basis
        rows.append(np.kron(q.T, I))
        rhs.append(q.reshape(-1, order="F"))
    if not rows:
        return IntertwinerResult(frozen(I), 0.0, 0.0)
    M = np.vstack(rows)
    r = np.concatenate(rhs)
    x0 = I.reshape(-1, order="F")
    delta, *_ = np.linalg.lstsq(M, r - M @ x0, rcond=None)
    x = x0 + delta
    lin_res = float(np.linalg.norm(M @ x - r))
    scale = max(1.0, max((opnorm(a) for a in A_list), default=1.0))
    if lin_res > 10 * tol * scale * n:
        return IntertwinerResult(None, lin_res, lin_res)
    U = polar_unitary(x.reshape(n, n, order="F"))
    res = max((opnorm(U @ a - b @ U) for a, b in zip(A_list, B_list)), default=0.0)
    if fixed is not None and fixed.dim:
        res = max(res, opnorm(U @ fixed.basis - fixed.basis))
    res = max(res, opnorm(adj(U) @ U - I))
    if res > 10 * tol * scale:
        return IntertwinerResult(None, res, lin_res)
    return IntertwinerResult(frozen(U), res, lin_res)
