"""Covariant pairs for semicrossed products and their isometric dilations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .errors import DimensionMismatch, InputError, NotAnAlgebra, NotAnAutomorphism, NotCovariant
from .incidence import TreeRepresentation, fully_extremal_check_tree, tree_ando


@dataclass(frozen=True)
class EndomorphismSpec:
    """An automorphism ``a -> U a U*`` of an algebra inside ``M_n``.

    ``graph_automorphism`` builds ``U = diag(phases) P`` where ``P e_j = e_{perm[j]}``,
    so ``E_ij`` goes to a phase times ``E_{perm[i], perm[j]}``.
    """

    kind: str
    unitary: np.ndarray | None = None
    perm: tuple | None = None
    phases: tuple | None = None

    def __post_init__(self):
        if self.kind == "matrix_conjugation":
            if self.unitary is None:
                raise InputError("matrix_conjugation needs a unitary")
            u = la.frozen(la.as_matrix(self.unitary))
            if la.opnorm(la.adj(u) @ u - la.eye(u.shape[0])) > 1e-8:
                raise NotAnAutomorphism("implementing matrix is not unitary")
            object.__setattr__(self, "unitary", u)
        elif self.kind == "graph_automorphism":
            if self.perm is None:
                raise InputError("graph_automorphism needs a vertex permutation")
            perm = tuple(int(p) for p in self.perm)
            if sorted(perm) != list(range(len(perm))):
                raise NotAnAutomorphism("perm is not a permutation")
            object.__setattr__(self, "perm", perm)
            ph = (1.0,) * len(perm) if self.phases is None else tuple(complex(p) for p in self.phases)
            if len(ph) != len(perm) or any(abs(abs(p) - 1) > 1e-12 for p in ph):
                raise NotAnAutomorphism("phases must be unimodular, one per vertex")
            object.__setattr__(self, "phases", ph)
        else:
            raise InputError(f"unknown endomorphism kind {self.kind!r}")

    @classmethod
    def identity(cls, n) -> "EndomorphismSpec":
        return cls("graph_automorphism", perm=tuple(range(n)))

    def matrix(self) -> np.ndarray:
        if self.kind == "matrix_conjugation":
            return self.unitary
        n = len(self.perm)
        p = la.zeros(n, n)
        for j, pj in enumerate(self.perm):
            p[pj, j] = 1
        return np.diag(np.asarray(self.phases, dtype=complex)) @ p

    def apply(self, a) -> np.ndarray:
        u = self.matrix()
        return u @ np.asarray(a, dtype=complex) @ la.adj(u)

    def power(self, a, k: int) -> np.ndarray:
        out = np.asarray(a, dtype=complex)
        for _ in range(k):
            out = self.apply(out)
        return out


@dataclass(frozen=True)
class MatrixAlgebraRep:
    """A representation given by the images of a basis of an algebra in ``M_n``."""

    basis: tuple
    images: tuple

    def __post_init__(self):
        if len(self.basis) != len(self.images):
            raise DimensionMismatch("one image per basis element")
        object.__setattr__(self, "basis", tuple(la.frozen(la.as_matrix(b)) for b in self.basis))
        object.__setattr__(self, "images", tuple(la.frozen(la.as_matrix(m)) for m in self.images))

    def algebra_basis(self) -> list:
        return list(self.basis)

    def __call__(self, a) -> np.ndarray:
        c, r = la.span_coordinates(self.basis, a)
        if r > 1e-8 * max(1.0, np.linalg.norm(a)):
            raise NotAnAlgebra(f"element is outside the algebra (residual {r:.3g})")
        return sum(ck * m for ck, m in zip(c, self.images))


@dataclass(frozen=True)
class OrbitRep:
    """``pi(a) = sigma(a) + sigma(alpha(a)) + ... + sigma(alpha^{N-1}(a))``."""

    sigma: object
    alpha: EndomorphismSpec
    N: int

    def algebra_basis(self) -> list:
        return self.sigma.algebra_basis()

    def __call__(self, a) -> np.ndarray:
        blocks = []
        cur = np.asarray(a, dtype=complex)
        for _ in range(self.N):
            blocks.append(self.sigma(cur))
            cur = self.alpha.apply(cur)
        return la.dsum(*blocks)


@dataclass(frozen=True)
class CovariantPair:
    rho: object
    T: np.ndarray
    alpha: EndomorphismSpec


@dataclass(frozen=True)
class CrossedPolynomial:
    """Formal ``sum_i t^i a_i`` with algebra coefficients ``a_i``."""

    coefficients: tuple

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


def check_automorphism(rho, alpha: EndomorphismSpec, tol=None):
    """Raise NotAnAutomorphism unless ``alpha`` maps the algebra onto itself."""
    tol = la._tol(tol)
    if isinstance(rho, TreeRepresentation):
        if alpha.kind == "graph_automorphism":
            perm = alpha.perm
            if len(perm) != rho.n:
                raise NotAnAutomorphism("permutation size differs from the vertex count")
            edges = set(rho.structure.generating_edges)
            if {(perm[i], perm[j]) for i, j in edges} != edges:
                raise NotAnAutomorphism("permutation does not preserve the generating edges")
            return
    basis = rho.algebra_basis()
    for b in basis:
        _, r = la.span_coordinates(basis, alpha.apply(b))
        if r > 10 * tol:
            raise NotAnAutomorphism(f"alpha leaves the algebra (residual {r:.3g})")


def covariance_residuals(pair: CovariantPair, cols=None) -> list:
    out = []
    T = np.asarray(pair.T)
    for a in pair.rho.algebra_basis():
        d = pair.rho(a) @ T - T @ pair.rho(pair.alpha.apply(a))
        if cols is not None:
            d = d[:, cols]
        out.append(la.opnorm(d) if d.size else 0.0)
    return out


def covariance_check(pair: CovariantPair, cols=None) -> float:
    """Max over the algebra basis of ``||rho(a) T - T rho(alpha(a))||``."""
    return max(covariance_residuals(pair, cols), default=0.0)


def orbit_representation(sigma, alpha: EndomorphismSpec, N: int) -> CovariantPair:
    """Orbit representation truncated to ``N`` copies with ``V`` the copy shift."""
    if N < 1:
        raise ValueError("level N must be at least 1")
    pi = OrbitRep(sigma, alpha, N)
    d = sigma(sigma.algebra_basis()[0]).shape[0]
    s = la.zeros(N, N)
    for k in range(N - 1):
        s[k + 1, k] = 1
    return CovariantPair(pi, la.frozen(np.kron(s, la.eye(d))), alpha)


def crossed_norm_lower_bound(p: CrossedPolynomial, pair: CovariantPair, tol=None) -> float:
    """``||sum_i T^i rho(a_i)||`` for a covariant pair, a lower bound for ``||p||``."""
    tol = la._tol(tol)
    res = covariance_check(pair)
    if res > 10 * tol:
        raise NotCovariant(f"covariance residual {res:.3g}", residual=res)
    T = np.asarray(pair.T)
    total = la.zeros(*T.shape)
    power = la.eye(T.shape[0])
    for a in p.coefficients:
        total = total + power @ pair.rho(a)
        power = power @ T
    return la.opnorm(total)


@dataclass(frozen=True)
class DilatedPair:
    """Window of a covariant coextension together with its certified columns."""

    pair: CovariantPair
    original_dims: tuple
    valid_cols: np.ndarray
    depth: int
    N: int

    @property
    def sigma(self) -> TreeRepresentation:
        return self.pair.rho

    @property
    def V(self) -> np.ndarray:
        return self.pair.T


def dilate_covariant_tree(pair: CovariantPair, depth: int, N: int, tol=None) -> DilatedPair:
    """Coextend ``(rho, T)`` to ``(sigma, V)`` with ``sigma`` fully extremal and ``V`` isometric.

    Phases are moved into ``T``: with ``L = diag(phases)`` one has covariance of
    ``(rho, T rho(L))`` for the bare permutation, the permutation case is a
    twisted tree lift, and ``V = V' sigma(L)*`` restores the phases.
    ``depth`` counts tower levels removed from the certified window; the lift
    is stationary, so deeper runs only shrink the reported window.
    """
    tol = la._tol(tol)
    rho = pair.rho
    alpha = pair.alpha
    if not isinstance(rho, TreeRepresentation):
        raise InputError("dilate_covariant_tree needs a tree representation")
    if alpha.kind != "graph_automorphism":
        raise NotAnAutomorphism("dilate_covariant_tree needs a graph automorphism")
    if depth < 1 or depth > N:
        raise InputError("depth must lie between 1 and N")
    check_automorphism(rho, alpha, tol)
    res = covariance_check(pair)
    if res > 10 * tol:
        raise NotCovariant(f"covariance residual {res:.3g}", residual=res)
    T = la.as_matrix(pair.T, rho.total_dim, rho.total_dim)
    perm = alpha.perm
    lam = np.asarray(alpha.phases, dtype=complex)
    L = la.dsum(*[lam[i] * la.eye(rho.dims[i]) for i in range(rho.n)])
    Tp = T @ L
    off = rho.offsets
    blocks = [Tp[off[k] : off[k + 1], off[perm[k]] : off[perm[k] + 1]] for k in range(rho.n)]
    sigma, B = tree_ando(rho, blocks, N, tol=tol, perm=perm)
    soff = sigma.offsets
    Vp = la.zeros(sigma.total_dim, sigma.total_dim)
    for k, b in enumerate(B):
        Vp[soff[k] : soff[k + 1], soff[perm[k]] : soff[perm[k] + 1]] = b.block
    Ls = la.dsum(*[np.conj(lam[i]) * la.eye(sigma.dims[i]) for i in range(rho.n)])
    V = Vp @ Ls
    f = B[0].fiber_dim if B else 0
    cols = []
    for j in range(rho.n):
        base = sigma.dims[j] - f * N
        cols.extend(range(soff[j], soff[j] + base + f * (N - depth)))
    return DilatedPair(CovariantPair(sigma, la.frozen(V), alpha), tuple(rho.dims),
                       np.array(cols, dtype=int), depth, N)


def covariant_certificates(original: CovariantPair, dilated: DilatedPair, tol=None) -> dict:
    """Residuals for the dilated pair on its certified window."""
    tol = la._tol(tol)
    sigma, V, cols = dilated.sigma, dilated.V, dilated.valid_cols
    rho = original.rho
    iso = la.isometry_residual(V[:, cols]) if cols.size else 0.0
    cov = covariance_check(dilated.pair, cols)
    idx = sigma.original_coordinates(rho.dims).basis
    H = idx.real.astype(bool).any(axis=1)
    # compression of (sigma, V) to the original spaces and co-invariance of H
    comp = la.opnorm(V[np.ix_(H, H)] - np.asarray(original.T))
    comp = max(comp, la.opnorm(V[np.ix_(H, ~H)]) if (~H).any() else 0.0)
    for a in rho.algebra_basis():
        s = sigma(a)
        comp = max(comp, la.opnorm(s[np.ix_(H, H)] - rho(a)))
        if (~H).any():
            comp = max(comp, la.opnorm(s[np.ix_(H, ~H)]))
    fe = fully_extremal_check_tree(sigma, rho.dims, tol)
    return {"isometry": iso, "covariance": cov, "compression": comp, "fully_extremal": fe.ok}
