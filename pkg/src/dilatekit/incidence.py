"""Incidence (tree) algebras and their representations.

Vertices are ``0..n-1``.  A pair ``(i, j)`` in the relation means the matrix
unit ``E_ij`` lies in the algebra; a representation sends it to an operator
``T_ij : H_j -> H_i``.  Only generating edges are stored, composites are path
products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .ando import complement_basis
from .errors import (
    DimensionMismatch,
    InputError,
    NotAContraction,
    NotAnAlgebra,
    NotATree,
    NotCommuting,
    NotExtremal,
    NotNilpotent,
    NotTransitive,
)
from .lifting import components, forest_check, lift_tree, potential_coextension


def _closure(n, pairs):
    rel = {(i, i) for i in range(n)} | set(pairs)
    while True:
        new = {(i, k) for (i, j) in rel for (j2, k) in rel if j == j2} - rel
        if not new:
            return rel
        rel |= new


@dataclass(frozen=True)
class IncidenceStructure:
    n: int
    relation: frozenset
    generating_edges: tuple

    @classmethod
    def from_edges(cls, n, edges) -> "IncidenceStructure":
        edges = tuple(sorted((int(i), int(j)) for i, j in edges))
        return cls(n, frozenset(_closure(n, edges)), edges)

    def validate(self):
        for i, j in self.relation | set(self.generating_edges):
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InputError(f"pair ({i}, {j}) outside the vertex range")
        if any((i, i) not in self.relation for i in range(self.n)):
            raise NotTransitive("relation is missing reflexive pairs")
        if _closure(self.n, self.relation) != set(self.relation):
            raise NotTransitive("relation is not transitive")
        if _closure(self.n, self.generating_edges) != set(self.relation):
            raise NotTransitive("generating edges do not generate the relation")

    def in_degree(self, v) -> int:
        return sum(1 for i, j in self.generating_edges if i == v and i != j)

    def path(self, i, k):
        """Vertices ``i = p0, p1, ..., k`` with every ``(p_t, p_{t+1})`` a generating edge."""
        if i == k:
            return [i]
        out = {}
        for a, b in self.generating_edges:
            out.setdefault(b, []).append(a)
        # walk forward from k along edges b -> a
        prev = {k: None}
        stack = [k]
        while stack:
            x = stack.pop()
            for y in out.get(x, []):
                if y not in prev:
                    prev[y] = x
                    stack.append(y)
        if i not in prev:
            raise InputError(f"no directed path from {k} to {i}")
        p = [i]
        while p[-1] != k:
            p.append(prev[p[-1]])
        return p


@dataclass(frozen=True)
class TreeRepresentation:
    """Vertex dimensions plus generating-edge operators ``T_ij : H_j -> H_i``."""

    structure: IncidenceStructure
    dims: tuple
    edge_ops: dict

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        ops = {}
        for (i, j), t in self.edge_ops.items():
            t = la.as_matrix(t, dims[i], dims[j])
            ops[(int(i), int(j))] = la.frozen(t)
        object.__setattr__(self, "edge_ops", ops)
        if len(dims) != self.structure.n:
            raise DimensionMismatch("one dimension per vertex is required")
        for e in self.structure.generating_edges:
            if e not in ops:
                raise InputError(f"missing operator for edge {e}")

    @classmethod
    def from_edges(cls, n, dims, ops) -> "TreeRepresentation":
        return cls(IncidenceStructure.from_edges(n, list(ops)), dims, ops)

    @property
    def n(self) -> int:
        return self.structure.n

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.dims)]).astype(int)

    @property
    def total_dim(self) -> int:
        return int(sum(self.dims))

    def composite(self, i, k) -> np.ndarray:
        """``rho(E_ik)`` as a map ``H_k -> H_i``, the product along the tree path."""
        if i == k:
            return la.eye(self.dims[i])
        p = self.structure.path(i, k)
        out = la.eye(self.dims[i])
        for a, b in zip(p[:-1], p[1:]):
            out = out @ self.edge_ops[(a, b)]
        return out

    def embed(self, i, j, block) -> np.ndarray:
        off = self.offsets
        m = la.zeros(self.total_dim, self.total_dim)
        m[off[i] : off[i + 1], off[j] : off[j + 1]] = block
        return m

    def __call__(self, a) -> np.ndarray:
        """Image of an algebra element given as an ``n x n`` matrix."""
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.n, self.n):
            raise DimensionMismatch("algebra elements are n x n matrices")
        out = la.zeros(self.total_dim, self.total_dim)
        off = self.offsets
        for i in range(self.n):
            for j in range(self.n):
                if a[i, j] == 0:
                    continue
                if (i, j) not in self.structure.relation:
                    raise NotAnAlgebra(f"entry ({i}, {j}) is outside the algebra")
                out[off[i] : off[i + 1], off[j] : off[j + 1]] += a[i, j] * self.composite(i, j)
        return out

    def algebra_basis(self) -> list:
        out = []
        for i, j in sorted(self.structure.relation):
            e = la.zeros(self.n, self.n)
            e[i, j] = 1
            out.append(e)
        return out

    def generators(self) -> list:
        """Vertex projections followed by the embedded generating edges."""
        gens = [self.embed(i, i, la.eye(self.dims[i])) for i in range(self.n)]
        gens += [self.embed(i, j, self.edge_ops[(i, j)]) for i, j in self.structure.generating_edges]
        return gens

    def original_coordinates(self, original_dims) -> la.Subspace:
        off = self.offsets
        idx = [off[i] + k for i in range(self.n) for k in range(original_dims[i])]
        return la.Subspace.coordinates(self.total_dim, idx)


def classify_graph(s: IncidenceStructure) -> dict:
    s.validate()
    edges = [e for e in s.generating_edges if e[0] != e[1]]
    try:
        forest_check(s.n, edges)
        bilateral = True
    except NotATree:
        bilateral = False
    unilateral = bilateral and all(s.in_degree(v) <= 1 for v in range(s.n))
    return {
        "is_bilateral_tree": bilateral,
        "is_unilateral_tree": unilateral,
        "components": components(s.n, edges),
    }


def validate_representation(rep: TreeRepresentation, tol=None) -> dict:
    """Contraction excess of every stored operator and composite consistency."""
    excess = 0.0
    comp = 0.0
    gen = set(rep.structure.generating_edges)
    for (i, j), t in rep.edge_ops.items():
        excess = max(excess, la.opnorm(t) - 1.0)
        if (i, j) not in gen:
            comp = max(comp, la.opnorm(t - rep.composite(i, j)))
    return {"contraction_excess": max(excess, 0.0), "composite_residual": comp}


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    witnesses: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def _require_forest(rep):
    forest_check(rep.n, [e for e in rep.structure.generating_edges if e[0] != e[1]])


def extremal_check_tree(rep: TreeRepresentation, tol=None) -> CheckResult:
    """Every generating edge must be an isometry on its whole domain."""
    tol = la._tol(tol)
    _require_forest(rep)
    wit = []
    for e in rep.structure.generating_edges:
        r = la.isometry_residual(rep.edge_ops[e])
        if r > 10 * tol:
            wit.append({"edge": list(e), "isometry_residual": r})
    return CheckResult(not wit, wit)


def fully_extremal_check_tree(rep: TreeRepresentation, original_dims, tol=None) -> CheckResult:
    """Extremal plus ``K_i = H_i v V_ij K_j`` on every edge; ``H_i`` are leading coordinates."""
    tol = la._tol(tol)
    ext = extremal_check_tree(rep, tol)
    if not ext.ok:
        raise NotExtremal("representation is not extremal", witnesses=ext.witnesses)
    wit = []
    for i, j in rep.structure.generating_edges:
        k = rep.dims[i]
        h = la.eye(k)[:, : original_dims[i]]
        join = la.subspace_join([la.Subspace(k, h), la.Subspace.span(rep.edge_ops[(i, j)], tol)], tol)
        if join.dim != k:
            wit.append({"edge": [i, j], "join_dim": join.dim, "space_dim": k})
    return CheckResult(not wit, wit)


def minimal_extremal_coextension_tree(rep: TreeRepresentation, tol=None) -> TreeRepresentation:
    """Extremal coextension whose extra dimensions follow a potential along the tree.

    The new part of ``K_i`` exceeds that of ``K_j`` by ``rank D_{T_ij}`` on
    every edge, which makes every edge isometric with full coverage.
    """
    _require_forest(rep)
    edges = list(rep.structure.generating_edges)
    co = potential_coextension(rep.n, edges, rep.edge_ops, rep.dims, tol)
    return TreeRepresentation(rep.structure, co.dims, dict(co.edges))


@dataclass(frozen=True)
class EquivalenceResult:
    unitaries: list | None
    residual: float
    linear_residual: float

    @property
    def present(self) -> bool:
        return self.unitaries is not None


def coextension_equivalence(repA: TreeRepresentation, repB: TreeRepresentation, fixed_dims, tol=None):
    """Per-vertex unitaries fixing ``H_i`` that carry ``repA`` onto ``repB``."""
    if repA.dims != repB.dims or repA.structure.generating_edges != repB.structure.generating_edges:
        raise DimensionMismatch("representations live on different spaces")
    res = la.intertwiner_solve(repA.generators(), repB.generators(),
                               repA.original_coordinates(fixed_dims), tol)
    if not res.present:
        return EquivalenceResult(None, res.residual, res.linear_residual)
    off = repA.offsets
    us = [res.unitary[off[i] : off[i + 1], off[i] : off[i + 1]] for i in range(repA.n)]
    return EquivalenceResult(us, res.residual, res.linear_residual)


def tree_ando(rep: TreeRepresentation, A_blocks, N: int, tol=None, perm=None):
    """Fully extremal coextension ``sigma`` of ``rep`` and isometric lifts ``B_i`` of ``A_i``.

    Returns ``(sigma, blocks)``; ``sigma`` acts on the level-``N`` windows and
    its edges are exact isometries there.
    """
    _require_forest(rep)
    tol = la._tol(tol)
    edges = list(rep.structure.generating_edges)
    blocks = [la.as_matrix(a) for a in A_blocks]
    if len(blocks) != rep.n:
        raise DimensionMismatch("one block per vertex is required")
    for a in blocks:
        if la.opnorm(a) > 1 + tol:
            raise NotAContraction(f"block norm {la.opnorm(a):.6g} exceeds 1")
    lift = lift_tree(rep.n, edges, rep.edge_ops, rep.dims, blocks, perm=perm, tol=tol)
    sig, out = lift.windows(N)
    dims = [lift.co.dims[i] + lift.fiber_dim * N for i in range(rep.n)]
    sigma = TreeRepresentation(rep.structure, dims, {e: t.block for e, t in sig.items()})
    return sigma, out


def tree_ando_certificates(rep, A_blocks, sigma, blocks, perm=None) -> dict:
    """Residuals of the tree Ando conclusions on the valid window."""
    n = rep.n
    perm = list(range(n)) if perm is None else list(perm)
    iso = max((b.isometry_residual() for b in blocks), default=0.0)
    inter = 0.0
    for i, j in rep.structure.generating_edges:
        bj, bi = blocks[j], blocks[i]
        cols = bj.valid_cols()
        lhs = sigma.edge_ops[(i, j)] @ bj.block
        rhs = bi.block @ sigma.edge_ops[(perm[i], perm[j])]
        inter = max(inter, la.opnorm((lhs - rhs)[:, cols]) if cols.size else 0.0)
    coext = 0.0
    for k, b in enumerate(blocks):
        h, hs = rep.dims[k], rep.dims[perm[k]]
        coext = max(coext, la.opnorm(b.block[:h, :hs] - np.asarray(A_blocks[k])) if h * hs else 0.0)
        coext = max(coext, la.opnorm(b.block[:h, hs:]) if h and b.block.shape[1] > hs else 0.0)
    for (i, j), t in rep.edge_ops.items():
        s = sigma.edge_ops[(i, j)]
        if t.size:
            coext = max(coext, la.opnorm(s[: rep.dims[i], : rep.dims[j]] - t))
        if rep.dims[i] and s.shape[1] > rep.dims[j]:
            coext = max(coext, la.opnorm(s[: rep.dims[i], rep.dims[j] :]))
    return {"isometry": iso, "intertwining": inter, "coextension": coext}


@dataclass(frozen=True)
class SemiDirichletResult:
    holds_in_ambient: bool
    residual: float
    conclusive: bool

    @property
    def verdict(self) -> str:
        if self.holds_in_ambient:
            return "true"
        return "false-conclusive" if self.conclusive else "false-inconclusive"


def _center(basis, gens, tol):
    """HS basis of the elements of ``span(basis)`` commuting with every generator."""
    n = basis[0].shape[0]
    stack = np.stack([b.reshape(-1) for b in basis], axis=1)
    rows = [np.stack([(b @ g - g @ b).reshape(-1) for b in basis], axis=1) for g in gens]
    m = np.vstack(rows)
    _, s, vh = np.linalg.svd(m)
    rank = int(np.sum(s > 10 * tol * max(1.0, s[0] if s.size else 0.0)))
    null = la.adj(vh)[:, rank:]
    return [(stack @ null[:, k]).reshape(n, n) for k in range(null.shape[1])]


def semi_dirichlet_check(algebra_basis, tol=None) -> SemiDirichletResult:
    """Test ``A* A`` inside ``A + A*`` in the ambient matrix algebra.

    A positive answer is sufficient for the semi-Dirichlet property.  A
    negative answer is conclusive when every central element of the generated
    C*-algebra already lies in the algebra: the algebra then splits along
    blocks whose generated C*-algebras are simple, so no boundary ideal can be
    quotiented out.
    """
    tol = la._tol(tol)
    basis = [la.as_matrix(b) for b in algebra_basis]
    if not basis:
        raise NotAnAlgebra("empty basis")
    n = basis[0].shape[0]
    if any(b.shape != (n, n) for b in basis):
        raise NotAnAlgebra("basis elements must be square of equal size")
    span = la._hs_orth(basis, n, tol)
    closed = la.algebra_span(basis, unital=True, tol=tol)
    if len(closed) != len(span):
        raise NotAnAlgebra("basis does not span a unital algebra",
                           span_dim=len(span), closure_dim=len(closed))
    prods = la._hs_orth([la.adj(a) @ b for a in span for b in span], n, tol)
    sym = la._hs_orth(span + [la.adj(a) for a in span], n, tol)
    res = 0.0
    for p in prods:
        _, r = la.span_coordinates(sym, p)
        res = max(res, r)
    cstar = la.algebra_span(basis + [la.adj(b) for b in basis], unital=True, tol=tol)
    cent = _center(cstar, basis + [la.adj(b) for b in basis], tol)
    conclusive = all(la.span_coordinates(span, z)[1] <= 10 * tol * max(1.0, np.linalg.norm(z)) for z in cent)
    return SemiDirichletResult(bool(res <= 10 * tol), float(res), bool(conclusive))


@dataclass(frozen=True)
class NilpotentRep:
    """``N = [[0, 0], [B, 0]]`` on ``H1 + H2`` with ``B : H1 -> H2``."""

    B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "B", la.frozen(la.as_matrix(self.B)))

    @property
    def dims(self):
        return self.B.shape[1], self.B.shape[0]

    @property
    def N(self) -> np.ndarray:
        h1, h2 = self.dims
        m = la.zeros(h1 + h2, h1 + h2)
        m[h1:, :h1] = self.B
        return m

    @classmethod
    def from_matrix(cls, N, tol=None):
        """Normal form on ``Ran N* + Ran N`` plus the basis change that produces it."""
        tol = la._tol(tol)
        N = la.as_matrix(N)
        if la.opnorm(N @ N) > 10 * tol:
            raise NotNilpotent(f"N^2 has norm {la.opnorm(N @ N):.3g}")
        q1 = la.orth(la.adj(N), tol)
        q2 = la.orth(N, tol)
        basis = np.hstack([q1, q2, complement_basis(np.hstack([q1, q2]), tol)])
        return cls(la.adj(q2) @ N @ q1), basis


@dataclass(frozen=True)
class NilpotentCoextension:
    W: np.ndarray
    labels: dict

    @property
    def dim(self) -> int:
        return self.W.shape[0]


def _random_unitary(rng, k):
    z = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def nilpotent2x2_maximal_coextension(rep: NilpotentRep, tol=None, rng=None) -> NilpotentCoextension:
    """Maximal coextension ``W`` on ``H1 + H2 + D_B + D``.

    ``B`` is first coextended to the isometry ``V = [B; D_B']`` into
    ``H2 + D_B``; then ``D = Ran(I - VV*)`` is appended and ``W`` maps
    ``H2 + D_B`` onto it through ``P_D (I - VV*)``.  ``rng`` rotates the
    internal orthonormal bases, which changes nothing up to a unitary fixing H.
    """
    tol = la._tol(tol)
    B = rep.B
    if la.opnorm(B) > 1 + tol:
        raise NotAContraction(f"B has norm {la.opnorm(B):.6g}")
    h1, h2 = rep.dims
    d = la.defect(B, tol)
    db = d.rank
    dB = d.compressed_defect
    if rng is not None and db:
        dB = _random_unitary(rng, db) @ dB
    V = np.vstack([B, dB])
    k2 = h2 + db
    proj = la.eye(k2) - V @ la.adj(V)
    # proj is an orthogonal projection: eigenvalues are 0 or 1 up to roundoff
    w, u = np.linalg.eigh((proj + la.adj(proj)) / 2)
    q = u[:, w > 0.5]
    dd = q.shape[1]
    if rng is not None and dd:
        q = q @ _random_unitary(rng, dd)
    n = h1 + h2 + db + dd
    W = la.zeros(n, n)
    W[h1 : h1 + h2, :h1] = B
    W[h1 + h2 : h1 + h2 + db, :h1] = dB
    W[h1 + h2 + db :, h1 : h1 + h2 + db] = la.adj(q) @ proj
    labels = {"H1": [0, h1], "H2": [h1, h1 + h2], "D_B": [h1 + h2, h1 + h2 + db], "D": [h1 + h2 + db, n]}
    return NilpotentCoextension(la.frozen(W), labels)
