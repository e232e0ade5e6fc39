"""Named examples and seeded random generators."""

from __future__ import annotations

import numpy as np

from . import linalg as la
from .errors import UnknownFixture
from .incidence import IncidenceStructure, NilpotentRep, TreeRepresentation
from .semicrossed import CovariantPair, EndomorphismSpec


def rng_for(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_matrix(rng, r, c) -> np.ndarray:
    return rng.standard_normal((r, c)) + 1j * rng.standard_normal((r, c))


def random_contraction(rng, r, c=None, norm=None) -> np.ndarray:
    """Random matrix scaled to operator norm ``norm`` (uniform in (0, 1] by default)."""
    c = r if c is None else c
    m = random_matrix(rng, r, c)
    nrm = la.opnorm(m)
    target = rng.uniform(0.05, 1.0) if norm is None else norm
    return m * (target / nrm) if nrm > 0 else m


def random_unitary(rng, n) -> np.ndarray:
    q, r = np.linalg.qr(random_matrix(rng, n, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_commuting_pair(rng, n=None, max_degree=3):
    """``(A, p(A))`` with ``||p(A)|| <= 1``."""
    n = int(rng.integers(1, 5)) if n is None else n
    A = random_contraction(rng, n)
    coeffs = random_matrix(rng, max_degree + 1, 1)[:, 0]
    P = sum(c * np.linalg.matrix_power(A, k) for k, c in enumerate(coeffs))
    nrm = la.opnorm(P)
    if nrm > 0:
        P = P * (rng.uniform(0.1, 1.0) / nrm)
    return A, P


def random_dense_range_B(rng, h1=None, h2=None) -> np.ndarray:
    """``B : H1 -> H2`` with full row rank and ``||B|| <= 1``."""
    h2 = int(rng.integers(1, 5)) if h2 is None else h2
    h1 = int(rng.integers(h2, 5)) if h1 is None else h1
    B = random_contraction(rng, h2, h1)
    if rng.uniform() < 0.25:
        u, s, vh = np.linalg.svd(B, full_matrices=False)
        s[0] = 1.0
        B = (u * s) @ vh
    return B


def random_forest(rng, n):
    """Random directed forest on ``n`` vertices: each vertex after the first joins an earlier one."""
    edges = []
    for v in range(1, n):
        if rng.uniform() < 0.85:
            u = int(rng.integers(0, v))
            edges.append((u, v) if rng.uniform() < 0.5 else (v, u))
    return edges


def random_tree_rep(rng, n=None, max_dim=3, isometric_prob=0.15) -> TreeRepresentation:
    n = int(rng.integers(1, 7)) if n is None else n
    edges = random_forest(rng, n)
    dims = [int(rng.integers(1, max_dim + 1)) for _ in range(n)]
    ops = {}
    for i, j in edges:
        if rng.uniform() < isometric_prob and dims[i] >= dims[j]:
            ops[(i, j)] = random_unitary(rng, dims[i])[:, : dims[j]]
        else:
            ops[(i, j)] = random_contraction(rng, dims[i], dims[j])
    return TreeRepresentation(IncidenceStructure.from_edges(n, edges), dims, ops)


def random_commuting_blocks(rng, rep: TreeRepresentation, perm=None, norm=None):
    """Random ``A_k : H_{perm k} -> H_k`` with ``T_ij A_j = A_i T_{perm i, perm j}``.

    A random element of the solution space of the homogeneous linear system,
    scaled so the largest block has norm ``norm``.
    """
    n = rep.n
    perm = list(range(n)) if perm is None else list(perm)
    shapes = [(rep.dims[k], rep.dims[perm[k]]) for k in range(n)]
    offs = np.cumsum([0] + [a * b for a, b in shapes])
    nv = int(offs[-1])
    rows = []
    for i, j in rep.structure.generating_edges:
        t = rep.edge_ops[(i, j)]
        w = rep.edge_ops[(perm[i], perm[j])]
        m = np.zeros((t.shape[0] * w.shape[1], nv), dtype=complex)
        m[:, offs[j] : offs[j + 1]] += np.kron(t, la.eye(shapes[j][1]))
        m[:, offs[i] : offs[i + 1]] -= np.kron(la.eye(shapes[i][0]), w.T)
        rows.append(m)
    if rows:
        M = np.vstack(rows)
        _, s, vh = np.linalg.svd(M)
        rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 0.0)))
        Z = la.adj(vh)[:, rank:]
    else:
        Z = la.eye(nv)
    x = Z @ random_matrix(rng, Z.shape[1], 1)[:, 0]
    blocks = [x[offs[k] : offs[k + 1]].reshape(shapes[k]) for k in range(n)]
    top = max((la.opnorm(b) for b in blocks if b.size), default=0.0)
    target = rng.uniform(0.1, 0.9) if norm is None else norm
    if top > 0:
        blocks = [b * (target / top) for b in blocks]
    return blocks


def zigzag(n: int) -> dict:
    """The zigzag algebra on ``n`` vertices and its compressions ``sigma_1 .. sigma_n``.

    Edges ``(i, j)`` with ``|i - j| = 1`` and ``j`` even in 0-based labels,
    ``sigma_k`` keeps the first ``k`` vertices and ``sigma_1`` is the base
    character.
    """
    if n < 2:
        raise UnknownFixture("zigzag needs n >= 2")
    edges = [(i, j) for i in range(n) for j in range(n) if abs(i - j) == 1 and j % 2 == 0]
    structure = IncidenceStructure.from_edges(n, edges)
    reps = {}
    for k in range(1, n + 1):
        dims = [1 if v < k else 0 for v in range(n)]
        ops = {e: np.ones((dims[e[0]], dims[e[1]])) for e in edges}
        reps[k] = TreeRepresentation(structure, dims, ops)
    return {"structure": structure, "reps": reps, "original_dims": [1] + [0] * (n - 1)}


def nilpotent(b: float) -> NilpotentRep:
    return NilpotentRep(np.array([[b]], dtype=complex))


def theta_pair(theta: float, rotation=None) -> dict:
    """Two edges into vertex 0 carrying ``T = diag(cos, sin)``.

    ``A`` uses ``[T; D]`` on both edges, ``B`` puts ``rotation`` (default a
    quarter turn) in front of ``D`` on the second edge.  Both act on
    ``C^4 + C^2 + C^2``.
    """
    T = np.diag([np.cos(theta), np.sin(theta)]).astype(complex)
    D = np.diag([np.sin(theta), np.cos(theta)]).astype(complex)
    R = np.array([[0, -1], [1, 0]], dtype=complex) if rotation is None else np.asarray(rotation)
    structure = IncidenceStructure.from_edges(3, [(0, 1), (0, 2)])
    base = TreeRepresentation(structure, [2, 2, 2], {(0, 1): T, (0, 2): T})
    rep_a = TreeRepresentation(structure, [4, 2, 2], {(0, 1): np.vstack([T, D]), (0, 2): np.vstack([T, D])})
    rep_b = TreeRepresentation(structure, [4, 2, 2], {(0, 1): np.vstack([T, D]), (0, 2): np.vstack([T, R @ D])})
    return {"base": base, "A": rep_a, "B": rep_b, "original_dims": [2, 2, 2]}


def bidisk() -> tuple:
    """``A1 = A2 = 0`` on ``C``: the Ando dilation is a pair of shifts in two directions."""
    z = np.zeros((1, 1), dtype=complex)
    return z, z


def rebase(rep: TreeRepresentation, original_dims, rng) -> TreeRepresentation:
    """Conjugate the added coordinates at every vertex by a random unitary."""
    us = []
    for d, h in zip(rep.dims, original_dims):
        us.append(la.dsum(la.eye(h), random_unitary(rng, d - h)) if d > h else la.eye(d))
    ops = {(i, j): us[i] @ t @ la.adj(us[j]) for (i, j), t in rep.edge_ops.items()}
    return TreeRepresentation(rep.structure, rep.dims, ops)


# covariant fixtures: stars whose leaves are swapped by the automorphism
STAR_TREES = {
    "out-star": (3, [(1, 0), (2, 0)], (0, 2, 1)),
    "in-star": (3, [(0, 1), (0, 2)], (0, 2, 1)),
    "path-flip": (3, [(0, 1), (2, 1)], (2, 1, 0)),
}


def covariant_star(rng, name="out-star", leaf_dim=2, centre_dim=1, phases=False, norm=None) -> CovariantPair:
    """Random covariant pair for a star whose two leaves are swapped."""
    if name not in STAR_TREES:
        raise UnknownFixture(f"unknown covariant tree {name!r}")
    n, edges, perm = STAR_TREES[name]
    centre = 1 if name == "path-flip" else 0
    dims = [leaf_dim] * n
    dims[centre] = centre_dim
    ops = {(i, j): random_contraction(rng, dims[i], dims[j], rng.uniform(0.3, 0.9)) for i, j in edges}
    rep = TreeRepresentation(IncidenceStructure.from_edges(n, edges), dims, ops)
    blocks = random_commuting_blocks(rng, rep, perm, norm)
    ph = tuple(np.exp(2j * np.pi * rng.uniform(size=n))) if phases else None
    alpha = EndomorphismSpec("graph_automorphism", perm=perm, phases=ph)
    lam = np.ones(n, dtype=complex) if ph is None else np.asarray(ph)
    off = rep.offsets
    Tp = la.zeros(rep.total_dim, rep.total_dim)
    for k in range(n):
        Tp[off[k] : off[k + 1], off[perm[k]] : off[perm[k] + 1]] = blocks[k]
    # T rho(L) = T' with L = diag(phases) on the vertex spaces
    L = la.dsum(*[lam[i] * la.eye(dims[i]) for i in range(n)])
    return CovariantPair(rep, Tp @ la.adj(L), alpha)


FIXTURES = ("zigzag", "nilpotent", "theta-pair", "bidisk")
