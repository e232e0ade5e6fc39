"""Finite-state isometric lifting over a directed forest.

Setting: vertices ``0..n-1``, generating edges ``(i, j)`` carrying
``T_ij : H_j -> H_i``, and blocks ``A_k : H_{phi(k)} -> H_k`` for a vertex
permutation ``phi`` (the identity for plain commutant lifting).  The blocks
satisfy ``T_ij A_j = A_i T_{phi(i) phi(j)}``.

The lift has the shape ``K_i = base_i + l2(F)`` where

* ``base_i = H_i + E_i`` carries an extremal coextension ``v_ij`` of the edges
  with the coverage property ``base_i = H_i v v_ij base_j``;
* ``beta_k : base_{phi(k)} -> base_k`` coextends ``A_k`` and satisfies
  ``v_ij beta_j = beta_i v_{phi(i) phi(j)}``;
* ``gamma_k : base_{phi(k)} -> F`` fills the defect of ``beta_k`` and
  satisfies ``gamma_j = gamma_i v_{phi(i) phi(j)}``.

Edges act as ``v_ij`` plus the identity on the tower, and ``B_k`` sends
``x`` to ``beta_k x + gamma_k x`` (first level) and shifts the tower.  All
relations then hold exactly on every level window.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .ando import extend_by_parrott, complement_basis
from .dilations import TruncatedOperator
from .errors import LiftingFailed, NotATree, NotCommuting


def forest_check(n, edges):
    """Raise NotATree unless the undirected edge graph is a forest."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        if i == j:
            raise NotATree(f"loop at vertex {i}")
        a, b = find(i), find(j)
        if a == b:
            raise NotATree("generating edges contain an undirected cycle")
        parent[a] = b


def components(n, edges):
    adj = {v: [] for v in range(n)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen, comps = set(), []
    for v in range(n):
        if v in seen:
            continue
        comp, queue = [], deque([v])
        seen.add(v)
        while queue:
            x = queue.popleft()
            comp.append(x)
            for y in sorted(adj[x]):
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        comps.append(sorted(comp))
    return comps


@dataclass(frozen=True)
class Coextension:
    """Extremal coextension data: ``base`` dims, original dims and edge isometries."""

    dims: tuple
    orig: tuple
    edges: dict


def potential_coextension(n, edges, ops, dims, tol=None) -> Coextension:
    """Finite extremal coextension with coverage at every edge.

    Extra dimensions follow a potential: ``e_i = e_j + rank(D_{T_ij})`` on each
    edge, normalised so the minimum over each component is zero.  The edge
    ``(i, j)`` maps ``H_j + E_j`` to ``H_i + E_i`` as ``[[T, 0], [D', 0], [0, I]]``.
    """
    forest_check(n, edges)
    defects = {e: la.defect(ops[e], tol) for e in edges}
    e_dim = [None] * n
    for comp in components(n, edges):
        e_dim[comp[0]] = 0
        queue = deque([comp[0]])
        while queue:
            x = queue.popleft()
            for i, j in edges:
                d = defects[(i, j)].rank
                if j == x and e_dim[i] is None:
                    e_dim[i] = e_dim[j] + d
                    queue.append(i)
                elif i == x and e_dim[j] is None:
                    e_dim[j] = e_dim[i] - d
                    queue.append(j)
        low = min(e_dim[v] for v in comp)
        for v in comp:
            e_dim[v] -= low
    base = [dims[v] + e_dim[v] for v in range(n)]
    vs = {}
    for i, j in edges:
        d = defects[(i, j)]
        v = la.zeros(base[i], base[j])
        v[: dims[i], : dims[j]] = ops[(i, j)]
        v[dims[i] : dims[i] + d.rank, : dims[j]] = d.compressed_defect
        v[dims[i] + d.rank :, dims[j] :] = np.eye(e_dim[j])
        vs[(i, j)] = la.frozen(v)
    return Coextension(tuple(base), tuple(dims), vs)


def pad_coextension(co: Coextension, m: int) -> Coextension:
    """Add an ``m``-dimensional summand carried by identity edges at every vertex."""
    if m == 0:
        return co
    dims = tuple(d + m for d in co.dims)
    edges = {e: la.frozen(la.dsum(v, la.eye(m))) for e, v in co.edges.items()}
    return Coextension(dims, co.orig, edges)


def merge_coextension(n, edges, ops, dims, tol=None) -> Coextension:
    """Extremal coextension with coverage, built sources first.

    A vertex ``i`` with sources ``s_1..s_k`` gets ``E_i = G_1 + ... + G_k`` with
    ``G_s = D_{T_is} + E_s`` placed orthogonally.  Each source ``s`` (and the
    already built part of the forest hanging off it) is padded by the blocks
    ``G_t`` of the other sources, carried by identity edges, and ``v_is`` maps
    that padding onto those blocks.  With in-degree at most one this is the
    potential coextension.
    """
    forest_check(n, edges)
    extra = [0] * n
    vs = {}
    done = set()
    for i in _depth_order(n, edges):
        sources = sorted(j for a, j in edges if a == i)
        defects = {s: la.defect(ops[(i, s)], tol) for s in sources}
        g = {s: defects[s].rank + extra[s] for s in sources}
        old_extra = list(extra)
        for s in sources:
            pad = sum(g[t] for t in sources if t != s)
            if pad:
                comp = _reach(s, [e for e in vs], done)
                for v in comp:
                    extra[v] += pad
                for (a, b), m in list(vs.items()):
                    if a in comp and b in comp:
                        vs[(a, b)] = la.dsum(m, la.eye(pad))
        extra[i] = sum(g.values())
        offsets, pos = {}, dims[i]
        for s in sources:
            offsets[s] = pos
            pos += g[s]
        for s in sources:
            d = defects[s]
            v = la.zeros(dims[i] + extra[i], dims[s] + extra[s])
            v[: dims[i], : dims[s]] = ops[(i, s)]
            o = offsets[s]
            v[o : o + d.rank, : dims[s]] = d.compressed_defect
            e0 = old_extra[s]
            v[o + d.rank : o + d.rank + e0, dims[s] : dims[s] + e0] = np.eye(e0)
            col = dims[s] + e0
            for t in sources:
                if t == s:
                    continue
                v[offsets[t] : offsets[t] + g[t], col : col + g[t]] = np.eye(g[t])
                col += g[t]
            vs[(i, s)] = v
        done.add(i)
    base = tuple(dims[v] + extra[v] for v in range(n))
    return Coextension(base, tuple(dims), {e: la.frozen(m) for e, m in vs.items()})


def _reach(start, edge_list, allowed):
    """Vertices reachable from ``start`` through ``edge_list`` inside ``allowed``."""
    seen, queue = {start}, deque([start])
    while queue:
        x = queue.popleft()
        for a, b in edge_list:
            for y, z in ((a, b), (b, a)):
                if y == x and z in allowed and z not in seen:
                    seen.add(z)
                    queue.append(z)
    return seen


def _depth_order(n, edges):
    """Vertices sorted so every edge's source precedes its range."""
    indeg = {v: 0 for v in range(n)}
    for i, _ in edges:
        indeg[i] += 1
    order, ready = [], deque(sorted(v for v in range(n) if indeg[v] == 0))
    while ready:
        x = ready.popleft()
        order.append(x)
        for i, j in sorted(edges):
            if j == x:
                indeg[i] -= 1
                if indeg[i] == 0:
                    ready.append(i)
    return order


def _betas_unilateral(n, edges, co, blocks, perm, tol):
    parent = {i: j for i, j in edges}
    beta = [None] * n
    for i in _depth_order(n, edges):
        h = co.orig[i]
        top = np.hstack([blocks[i], la.zeros(h, co.dims[perm[i]] - co.orig[perm[i]])])
        if i not in parent:
            if co.dims[i] != h or co.dims[perm[i]] != co.orig[perm[i]]:
                raise LiftingFailed("root base must equal the original space")
            beta[i] = np.asarray(blocks[i], dtype=complex)
            continue
        p = parent[i]
        W = co.edges[(perm[i], perm[p])]
        Y = co.edges[(i, p)] @ beta[p]
        mismatch = la.opnorm(Y[:h] - top @ W)
        if mismatch > 1e3 * tol:
            raise NotCommuting(f"blocks do not intertwine the edge ({i}, {p}): {mismatch:.3g}")
        beta[i] = extend_by_parrott(W, Y, top, h, tol)
    return beta


def _betas_convex(n, edges, co, blocks, perm, tol, excess=None):
    """Contractive ``beta`` solving the linear constraints, or None.

    The constraints are affine, so ``beta = x0 + Z y`` over a kernel basis
    ``Z``.  L-BFGS then drives the penalty ``sum (s - rho)_+^2`` over all
    singular values to zero, first with a radius below one (to leave slack for
    the defect factorisation) and then with radius one.  The penalty is convex,
    so a positive minimum at radius one means no contractive ``beta`` exists
    for this coextension; that minimum is stored in ``excess[0]`` when a list
    is passed.
    """
    from scipy.optimize import minimize

    shapes = [(co.dims[k], co.dims[perm[k]]) for k in range(n)]
    offs = np.cumsum([0] + [a * b for a, b in shapes])
    nv = int(offs[-1])
    rows, rhs = [], []

    def sel(k):
        a, b = shapes[k]
        out = np.zeros((a * b, nv), dtype=complex)
        out[:, offs[k] : offs[k + 1]] = np.eye(a * b)
        return out

    for i, j in edges:
        # v_ij beta_j - beta_i W = 0 with W = v_{phi i, phi j}; row-major vec
        vij = co.edges[(i, j)]
        W = co.edges[(perm[i], perm[j])]
        bj, bi = shapes[j], shapes[i]
        left = np.kron(vij, np.eye(bj[1])) @ sel(j)
        right = np.kron(np.eye(bi[0]), W.T) @ sel(i)
        rows.append(left - right)
        rhs.append(np.zeros(left.shape[0], dtype=complex))
    for k in range(n):
        h, hk = co.orig[k], co.orig[perm[k]]
        a, b = shapes[k]
        target = np.hstack([blocks[k], la.zeros(h, b - hk)])
        idx = [r * b + c for r in range(h) for c in range(b)]
        rows.append(sel(k)[idx])
        rhs.append(target.reshape(-1))
    M = np.vstack(rows)
    r = np.concatenate(rhs)
    x0, *_ = np.linalg.lstsq(M, r, rcond=None)
    if np.linalg.norm(M @ x0 - r) > 1e3 * tol:
        if excess is not None:
            excess[:] = [np.inf]
        return None
    _, s, vh = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-10 * max(1.0, s[0])))
    Z = la.adj(vh)[:, rank:]

    def unpack(x):
        return [x[offs[k] : offs[k + 1]].reshape(shapes[k]) for k in range(n)]

    def penalty(y, rho):
        x = x0 + Z @ (y[: Z.shape[1]] + 1j * y[Z.shape[1] :])
        val, grad = 0.0, []
        for bk in unpack(x):
            if bk.size == 0:
                grad.append(bk.reshape(-1))
                continue
            u, sv, wh = np.linalg.svd(bk, full_matrices=False)
            ex = np.maximum(sv - rho, 0.0)
            val += float(np.sum(ex**2))
            grad.append(((u * (2 * ex)) @ wh).reshape(-1))
        g = la.adj(Z) @ np.concatenate(grad)
        return val, np.concatenate([g.real, g.imag])

    def worst(y):
        x = x0 + Z @ (y[: Z.shape[1]] + 1j * y[Z.shape[1] :])
        return max((la.opnorm(bk) for bk in unpack(x)), default=0.0), x

    y = np.zeros(2 * Z.shape[1])
    top = max((la.opnorm(bk) for bk in blocks), default=0.0)
    for rho in ((1.0 + top) / 2, 1.0):
        if Z.shape[1]:
            res = minimize(penalty, y, args=(rho,), jac=True, method="L-BFGS-B",
                           options={"maxiter": 5000, "gtol": 1e-14, "ftol": 1e-30})
            y = res.x
        nrm, x = worst(y)
        if nrm <= 1 + tol:
            return [np.asarray(bk) for bk in unpack(x)]
    if excess is not None:
        excess[:] = [penalty(y, 1.0)[0]]
    return None


def _merge_slots(n, edges, co):
    """``(i, s, rows)`` for every source of a merge vertex except the first.

    ``rows`` is the size of ``E_i``; rotating those rows of ``v_is`` by a
    unitary keeps the edge isometric and keeps coverage (the first source
    alone already covers ``E_i``), but changes the angles between the defect
    embeddings, which is a genuinely different fully extremal coextension.
    """
    slots = []
    for i in range(n):
        sources = sorted(j for a, j in edges if a == i)
        rows = co.dims[i] - co.orig[i]
        slots += [(i, s, rows) for s in sources[1:] if rows]
    return slots


def rotate_merges(co: Coextension, slots, params) -> Coextension:
    """Apply ``exp(iH)`` to the defect rows of each slot; ``params`` packs the Hermitian ``H``s."""
    from scipy.linalg import expm

    vs = dict(co.edges)
    pos = 0
    for i, s, rows in slots:
        a = np.asarray(params[pos : pos + 2 * rows * rows])
        pos += 2 * rows * rows
        h = (a[: rows * rows] + 1j * a[rows * rows :]).reshape(rows, rows)
        u = expm(0.5j * (h + la.adj(h)))
        v = np.array(vs[(i, s)])
        o = co.orig[i]
        v[o:] = u @ v[o:]
        vs[(i, s)] = la.frozen(v)
    return Coextension(co.dims, co.orig, vs)


def _betas_rotated(n, edges, co, blocks, perm, tol, restarts=4, budget=800):
    """Search the merge angles for a coextension admitting a contractive ``beta``.

    Nelder-Mead on the penalty minimum, from the orthogonal merge and then from
    seeded random starts (so the result is deterministic).
    """
    from scipy.optimize import minimize

    slots = _merge_slots(n, edges, co)
    size = sum(2 * r * r for _, _, r in slots)
    if not size:
        return None, co
    found = {}

    def value(p):
        cand = rotate_merges(co, slots, p)
        ex = [np.inf]
        beta = _betas_convex(n, edges, cand, blocks, perm, tol, excess=ex)
        if beta is not None:
            found["hit"] = (beta, cand)
            raise StopIteration
        return ex[0]

    rng = np.random.default_rng(0)
    for attempt in range(restarts):
        start = np.zeros(size) if attempt == 0 else rng.standard_normal(size)
        try:
            minimize(value, start, method="Nelder-Mead",
                     options={"maxfev": budget, "xatol": 1e-10, "fatol": 1e-30})
        except StopIteration:
            return found["hit"]
    return None, co


def _gammas(n, edges, co, beta, perm, tol):
    """Tower maps ``g_m : base_m -> F`` indexed by domain vertex, then ``gamma_k = g_{phi(k)}``."""
    inv = [0] * n
    for k in range(n):
        inv[perm[k]] = k
    gram = []
    for m in range(n):
        b = beta[inv[m]]
        gram.append(la.eye(co.dims[m]) - la.adj(b) @ b)
    g = [None] * n
    fdim = 0
    for comp in components(n, edges):
        root = comp[0]
        f_root = la.psd_factor(gram[root], tol)
        g = [None if x is None else np.vstack([x, la.zeros(f_root.shape[0], x.shape[1])]) for x in g]
        g[root] = np.vstack([la.zeros(fdim, co.dims[root]), f_root])
        fdim += f_root.shape[0]
        queue = deque([root])
        while queue:
            x = queue.popleft()
            for a, b in sorted(edges):
                if x not in (a, b):
                    continue
                v = co.edges[(a, b)]
                if a == x and g[b] is None:
                    g[b] = g[a] @ v
                    queue.append(b)
                elif b == x and g[a] is None:
                    Wp = complement_basis(v, tol)
                    gb = g[b]
                    cross = la.adj(v) @ gram[a] @ Wp
                    w = np.linalg.pinv(la.adj(gb)) @ cross
                    schur = la.adj(Wp) @ gram[a] @ Wp - la.adj(w) @ w
                    z = la.psd_factor(schur, tol)
                    extra = z.shape[0]
                    if extra:
                        g = [None if y is None else np.vstack([y, la.zeros(extra, y.shape[1])]) for y in g]
                        fdim += extra
                        gb = g[b]
                        w = np.vstack([w, z])
                    g[a] = gb @ la.adj(v) + w @ la.adj(Wp)
                    queue.append(a)
    gamma = [g[perm[k]] for k in range(n)]
    return gamma, fdim


@dataclass(frozen=True)
class Lift:
    co: Coextension
    beta: tuple
    gamma: tuple
    fiber_dim: int
    perm: tuple
    padding: int

    def windows(self, N: int):
        """Edge isometries and lifted blocks on ``base_i + F^N``."""
        f = self.fiber_dim
        sig = {}
        for (i, j), v in self.co.edges.items():
            block = la.dsum(v, la.eye(f * N))
            sig[(i, j)] = TruncatedOperator(
                self.co.dims[i], N, la.frozen(block), 0, "identity", f,
                orig_dim=self.co.orig[i], domain_base_dim=self.co.dims[j],
                domain_orig_dim=self.co.orig[j])
        blocks = []
        for k, (b, gm) in enumerate(zip(self.beta, self.gamma)):
            src = self.perm[k]
            nb, ns = self.co.dims[k], self.co.dims[src]
            m = la.zeros(nb + f * N, ns + f * N)
            m[:nb, :ns] = b
            if f:
                m[nb : nb + f, :ns] = gm
                for lvl in range(1, N):
                    m[nb + f * lvl : nb + f * (lvl + 1), ns + f * (lvl - 1) : ns + f * lvl] = np.eye(f)
            blocks.append(TruncatedOperator(
                nb, N, la.frozen(m), 1, "shift" if f else "unitary", f,
                orig_dim=self.co.orig[k], domain_base_dim=ns, domain_orig_dim=self.co.orig[src]))
        return sig, blocks


def lift_tree(n, edges, ops, dims, blocks, perm=None, tol=None, max_padding=None) -> Lift:
    """Build the finite-state lift described in the module docstring."""
    tol = la._tol(tol)
    edges = sorted(tuple(e) for e in edges)
    perm = tuple(range(n)) if perm is None else tuple(perm)
    blocks = [np.asarray(b, dtype=complex) for b in blocks]
    for k in range(n):
        if blocks[k].shape != (dims[k], dims[perm[k]]):
            raise la.DimensionMismatch(f"block {k} has shape {blocks[k].shape}")
    for i, j in edges:
        lhs = ops[(i, j)] @ blocks[j]
        rhs = blocks[i] @ ops[(perm[i], perm[j])]
        res = la.opnorm(lhs - rhs)
        if res > 10 * tol:
            raise NotCommuting(f"edge ({i}, {j}) residual {res:.3g}", residual=res)
    co0 = merge_coextension(n, edges, ops, dims, tol)
    indeg = [0] * n
    for i, _ in edges:
        indeg[i] += 1
    if max(indeg, default=0) <= 1:
        beta = _betas_unilateral(n, edges, co0, blocks, perm, tol)
        co, pad = co0, 0
    else:
        beta = None
        limit = max_padding if max_padding is not None else 0
        for pad in range(0, limit + 1):
            co = pad_coextension(co0, pad)
            beta = _betas_convex(n, edges, co, blocks, perm, tol)
            if beta is not None:
                break
        if beta is None:
            co = pad_coextension(co0, limit)
            pad = limit
            beta, co = _betas_rotated(n, edges, co, blocks, perm, tol)
        if beta is None:
            raise LiftingFailed("no contractive lift found within the padding and rotation budget")
    gamma, fdim = _gammas(n, edges, co, beta, perm, tol)
    return Lift(co, tuple(la.frozen(b) for b in beta), tuple(la.frozen(g) for g in gamma), fdim, perm, pad)
