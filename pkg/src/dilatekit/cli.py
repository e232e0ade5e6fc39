"""JSON command-line front end.

Every command reads one JSON document and prints one report.  Complex
numbers are ``[re, im]`` pairs, matrices are row-major nested lists.
Exit status: 0 all certificates pass, 1 some certificate fails, 2 malformed
input, 3 a domain error from the library, 4 anything else.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time

import numpy as np

from . import ando, dilations, fixtures as fx, incidence as inc, linalg as la, semicrossed as sc
from .errors import DilateKitError, InputError, UnknownFixture

SCHEMA = "dilatekit/1"


class ParseError(Exception):
    pass


# ---------------------------------------------------------------- encoding

def encode_scalar(z):
    z = complex(z)
    return [z.real, z.imag]


def encode_matrix(m):
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m] if m.ndim == 2 else []


def decode_scalar(x) -> complex:
    if isinstance(x, bool):
        raise ParseError("booleans are not numbers")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ParseError(f"cannot read {x!r} as a complex number")


def decode_matrix(x, rows=None, cols=None) -> np.ndarray:
    if not isinstance(x, list):
        raise ParseError("a matrix must be a list of rows")
    if not x:
        return np.zeros((rows or 0, cols or 0), dtype=complex)
    if not all(isinstance(r, list) for r in x):
        raise ParseError("a matrix must be a list of rows")
    width = {len(r) for r in x}
    if len(width) != 1:
        raise ParseError("ragged matrix rows")
    m = np.array([[decode_scalar(v) for v in r] for r in x], dtype=complex).reshape(len(x), width.pop())
    if not np.all(np.isfinite(m)):
        raise ParseError("matrix entries must be finite")
    if rows is not None and cols is not None and m.size == 0:
        return np.zeros((rows, cols), dtype=complex)
    return m


def decode_rep(doc) -> inc.TreeRepresentation:
    _fields(doc, {"n", "edges", "dims", "ops"}, {"n", "dims"}, "representation")
    n = _int(doc["n"], "n")
    dims = [_int(d, "dims") for d in doc["dims"]]
    edges = [tuple(_int(v, "edge") for v in e) for e in doc.get("edges", [])]
    ops = {}
    for item in doc.get("ops", []):
        _fields(item, {"edge", "matrix"}, {"edge", "matrix"}, "op")
        i, j = (_int(v, "edge") for v in item["edge"])
        if not (0 <= i < n and 0 <= j < n) or len(dims) != n:
            raise ParseError("edge outside the vertex range")
        ops[(i, j)] = decode_matrix(item["matrix"], dims[i], dims[j])
    if not edges:
        edges = list(ops)
    structure = inc.IncidenceStructure.from_edges(n, edges)
    return inc.TreeRepresentation(structure, dims, ops)


def encode_rep(rep: inc.TreeRepresentation) -> dict:
    return {
        "n": rep.n,
        "edges": [list(e) for e in rep.structure.generating_edges],
        "dims": list(rep.dims),
        "ops": [{"edge": [i, j], "matrix": encode_matrix(rep.edge_ops[(i, j)])}
                for i, j in rep.structure.generating_edges],
    }


def decode_alpha(doc) -> sc.EndomorphismSpec:
    _fields(doc, {"kind", "perm", "phases", "unitary"}, {"kind"}, "alpha")
    if doc["kind"] == "matrix_conjugation":
        return sc.EndomorphismSpec("matrix_conjugation", unitary=decode_matrix(doc.get("unitary", [])))
    if doc["kind"] == "graph_automorphism":
        phases = doc.get("phases")
        phases = None if phases is None else tuple(decode_scalar(p) for p in phases)
        return sc.EndomorphismSpec("graph_automorphism", perm=tuple(doc.get("perm", [])), phases=phases)
    raise ParseError(f"unknown alpha kind {doc['kind']!r}")


def encode_alpha(alpha: sc.EndomorphismSpec) -> dict:
    if alpha.kind == "matrix_conjugation":
        return {"kind": alpha.kind, "unitary": encode_matrix(alpha.unitary)}
    return {"kind": alpha.kind, "perm": list(alpha.perm), "phases": [encode_scalar(p) for p in alpha.phases]}


def decode_algebra_rep(doc) -> sc.MatrixAlgebraRep:
    _fields(doc, {"basis", "images"}, {"basis", "images"}, "algebra")
    return sc.MatrixAlgebraRep(tuple(decode_matrix(b) for b in doc["basis"]),
                               tuple(decode_matrix(m) for m in doc["images"]))


def decode_rho(doc):
    if "representation" in doc:
        return decode_rep(doc["representation"])
    if "algebra" in doc:
        return decode_algebra_rep(doc["algebra"])
    raise ParseError("need a representation or an algebra")


def encode_pair(rep, T, alpha) -> dict:
    return {"representation": encode_rep(rep), "T": encode_matrix(T), "alpha": encode_alpha(alpha)}


def _fields(doc, allowed, required, what):
    if not isinstance(doc, dict):
        raise ParseError(f"{what} must be an object")
    extra = set(doc) - set(allowed)
    if extra:
        raise ParseError(f"unknown fields in {what}: {sorted(extra)}")
    missing = set(required) - set(doc)
    if missing:
        raise ParseError(f"missing fields in {what}: {sorted(missing)}")


def _int(x, what):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError(f"{what} must be an integer")
    return x


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (complex, np.complexfloating)):
        return encode_scalar(x)
    if isinstance(x, np.ndarray):
        return encode_matrix(x) if x.ndim == 2 else [_jsonable(v) for v in x.tolist()]
    return x


# ---------------------------------------------------------------- report

class Report:
    def __init__(self):
        self.outputs = {}
        self.residuals = {}
        self.certificates = {}

    def residual(self, name, value, threshold):
        value = float(value)
        self.residuals[name] = {"value": value, "threshold": float(threshold)}
        self.certificates[name] = bool(value <= threshold)

    def certify(self, name, ok):
        self.certificates[name] = bool(ok)


def _cmd_defect(doc, opts, rep):
    T = decode_matrix(doc["matrix"])
    d = la.defect(T, opts.tol)
    rep.outputs.update(defect=d.defect, range_basis=d.range_basis,
                       compressed_defect=d.compressed_defect, rank=d.rank)
    n = T.shape[1]
    rep.residual("defect_identity", la.opnorm(d.defect @ d.defect + la.adj(T) @ T - la.eye(n)) if n else 0.0,
                 10 * opts.tol)


def _power_residual(op, T, K):
    worst = 0.0
    h = T.shape[0]
    for k in range(K + 1):
        pk = np.linalg.matrix_power(op.block, k)[:h, :h]
        worst = max(worst, la.opnorm(pk - np.linalg.matrix_power(T, k)))
    return worst


def _cmd_dilate(doc, opts, rep):
    T = decode_matrix(doc["matrix"])
    V = dilations.minimal_isometric_dilation(T, opts.level, opts.tol)
    rep.outputs.update(block=V.block, base_dim=V.base_dim, level=V.level,
                       fiber_dim=V.fiber_dim, tail_tag=V.tail_tag, band_width=V.band_width)
    rep.residual("isometry", V.isometry_residual(), 10 * opts.tol)
    rep.residual("power_dilation", _power_residual(V, T, opts.level - 1), 10 * opts.level * opts.tol)


def _cmd_schaeffer(doc, opts, rep):
    T = decode_matrix(doc["matrix"])
    U = dilations.schaeffer_unitary_dilation(T, opts.level, opts.tol)
    rep.outputs.update(block=U.block, base_dim=U.base_dim, level=U.level, fiber_dim=U.fiber_dim,
                       tail_tag=U.tail_tag)
    cols, rows = U.valid_cols(), dilations.schaeffer_valid_rows(U)
    rep.residual("isometry", la.isometry_residual(U.block[:, cols]), 10 * opts.tol)
    rep.residual("coisometry", la.isometry_residual(la.adj(U.block[rows, :])), 10 * opts.tol)
    rep.residual("power_dilation", _power_residual(U, T, opts.level - 1), 10 * opts.level * opts.tol)


def _cmd_row_dilate(doc, opts, rep):
    blocks = [decode_matrix(b) for b in doc["blocks"]]
    row = dilations.row_isometric_coextension(blocks, opts.level, opts.tol)
    n = row.n
    rep.outputs.update(blocks=[b.block for b in row.blocks], fiber_dim=row.blocks[0].fiber_dim)
    cols = dilations.row_valid_cols(row.blocks[0], n)
    worst, comp = 0.0, 0.0
    h = blocks[0].shape[0]
    for i, vi in enumerate(row.blocks):
        comp = max(comp, la.opnorm(vi.block[:h, :h] - blocks[i]))
        for j, vj in enumerate(row.blocks):
            g = la.adj(vi.block[:, cols]) @ vj.block[:, cols]
            target = la.eye(len(cols)) if i == j else 0 * g
            worst = max(worst, la.opnorm(g - target))
    rep.residual("row_isometry", worst, 10 * opts.tol)
    rep.residual("compression", comp, 10 * opts.tol)


def _cmd_wold(doc, opts, rep):
    m = decode_matrix(doc["matrix"])
    target = dilations.minimal_isometric_dilation(m, opts.level, opts.tol) if doc.get("dilate") else m
    w = dilations.wold_decomposition(target, opts.tol)
    rep.outputs.update(unitary_part=w.unitary_part, unitary_dim=w.unitary_subspace.dim,
                       shift_multiplicity=w.shift_multiplicity, tag=w.tag)
    u = w.unitary_part
    rep.residual("unitary_part", la.opnorm(la.adj(u) @ u - la.eye(u.shape[0])) if u.size else 0.0, 10 * opts.tol)


def _cmd_clt(doc, opts, rep):
    T, X = decode_matrix(doc["T"]), decode_matrix(doc["X"])
    Y = ando.commutant_lifting_disk(T, X, opts.level, opts.tol)
    V = dilations.minimal_isometric_dilation(T, opts.level, opts.tol)
    rep.outputs.update(block=Y.block, fiber_dim=Y.fiber_dim)
    h = T.shape[0]
    cols = V.valid_cols()
    rep.residual("norm_excess", max(la.opnorm(Y.block) - la.opnorm(X), 0.0), 10 * opts.tol)
    comm = (V.block @ Y.block - Y.block @ V.block)[:, cols] if cols.size else np.zeros((0, 0))
    rep.residual("commutation", la.opnorm(comm) if comm.size else 0.0, 10 * opts.tol)
    rep.residual("compression", la.opnorm(Y.block[:h, :h] - X), 10 * opts.tol)
    rep.residual("co_invariance", la.opnorm(Y.block[:h, h:]) if Y.block.shape[1] > h else 0.0, 10 * opts.tol)


def _cmd_ando(doc, opts, rep):
    pair = ando.CommutingPair(decode_matrix(doc["A1"]), decode_matrix(doc["A2"]))
    V1, V2 = ando.ando_dilation(pair, opts.level, opts.tol)
    rep.outputs.update(V1=V1.block, V2=V2.block, fiber_dim=V1.fiber_dim)
    cert = ando.ando_certificates(pair, V1, V2, opts.tol)
    for k, v in cert.items():
        if isinstance(v, bool):
            rep.certify(k, v)
        elif isinstance(v, (int, np.integer)):
            rep.outputs[k] = int(v)
        else:
            rep.residual(k, v, 100 * opts.tol)
    w = dilations.wold_decomposition(V2, opts.tol)
    rep.outputs.update(v2_unitary_dim=w.unitary_subspace.dim, v2_shift_multiplicity=w.shift_multiplicity)


def _cmd_t2(doc, opts, rep):
    triple = ando.IntertwiningTriple(decode_matrix(doc["A1"]), decode_matrix(doc["A2"]), decode_matrix(doc["X"]))
    A1t, A2t, Xt = ando.t2_commutant_lifting(triple, opts.level, opts.tol)
    rep.outputs.update(A1=A1t.block, A2=A2t.block, X=Xt.block)
    cols = A2t.valid_cols()
    res = la.opnorm((A1t.block @ Xt.block - Xt.block @ A2t.block)[:, cols]) if cols.size else 0.0
    rep.residual("intertwining", res, 10 * opts.tol)
    rep.residual("isometry", max(A1t.isometry_residual(), A2t.isometry_residual(),
                                 la.isometry_residual(Xt.block)), 10 * opts.tol)
    k1 = A1t.block.shape[0]
    h1 = triple.A1.shape[0]
    join = la.subspace_join([la.Subspace.coordinates(k1, range(h1)), la.Subspace.span(Xt.block, opts.tol)], opts.tol)
    rep.outputs.update(join_dim=join.dim, space_dim=k1)
    rep.certify("join", join.dim == k1)


def _structure(doc):
    if "representation" in doc:
        return decode_rep(doc["representation"]).structure
    s = doc["structure"]
    _fields(s, {"n", "edges", "relation"}, {"n", "edges"}, "structure")
    n = _int(s["n"], "n")
    edges = [tuple(_int(v, "edge") for v in e) for e in s["edges"]]
    base = inc.IncidenceStructure.from_edges(n, edges)
    if "relation" in s:
        rel = frozenset(tuple(_int(v, "pair") for v in p) for p in s["relation"])
        return inc.IncidenceStructure(n, rel, base.generating_edges)
    return base


def _cmd_tree_classify(doc, opts, rep):
    rep.outputs.update(inc.classify_graph(_structure(doc)))


def _cmd_tree_validate(doc, opts, rep):
    r = decode_rep(doc["representation"])
    v = inc.validate_representation(r, opts.tol)
    rep.residual("contraction_excess", v["contraction_excess"], 10 * opts.tol)
    rep.residual("composite", v["composite_residual"], 10 * opts.tol)


def _cmd_tree_extremal(doc, opts, rep):
    r = inc.extremal_check_tree(decode_rep(doc["representation"]), opts.tol)
    rep.outputs.update(extremal=r.ok, witnesses=r.witnesses)


def _cmd_tree_fully(doc, opts, rep):
    r = decode_rep(doc["representation"])
    res = inc.fully_extremal_check_tree(r, [_int(d, "original_dims") for d in doc["original_dims"]], opts.tol)
    rep.outputs.update(fully_extremal=res.ok, witnesses=res.witnesses)


def _cmd_tree_coextend(doc, opts, rep):
    r = decode_rep(doc["representation"])
    s = inc.minimal_extremal_coextension_tree(r, opts.tol)
    rep.outputs["representation"] = encode_rep(s)
    rep.certify("extremal", inc.extremal_check_tree(s, opts.tol).ok)
    rep.certify("fully_extremal", inc.fully_extremal_check_tree(s, r.dims, opts.tol).ok)


def _cmd_tree_ando(doc, opts, rep):
    r = decode_rep(doc["representation"])
    blocks = [decode_matrix(b) for b in doc["blocks"]]
    sigma, B = inc.tree_ando(r, blocks, opts.level, opts.tol)
    rep.outputs.update(representation=encode_rep(sigma), blocks=[b.block for b in B])
    for k, v in inc.tree_ando_certificates(r, blocks, sigma, B).items():
        rep.residual(k, v, 10 * opts.tol)
    rep.certify("fully_extremal", inc.fully_extremal_check_tree(sigma, r.dims, opts.tol).ok)


def _cmd_semi_dirichlet(doc, opts, rep):
    res = inc.semi_dirichlet_check([decode_matrix(b) for b in doc["basis"]], opts.tol)
    rep.outputs.update(holds_in_ambient=res.holds_in_ambient, conclusive=res.conclusive,
                       verdict=res.verdict, containment_residual=res.residual)


def _cmd_nilpotent(doc, opts, rep):
    nrep = inc.NilpotentRep(decode_matrix(doc["B"]))
    c = inc.nilpotent2x2_maximal_coextension(nrep, opts.tol)
    W = c.W
    n = W.shape[0]
    h = sum(nrep.dims)
    rep.outputs.update(W=W, labels=c.labels, dim=n)
    rep.residual("square_zero", la.opnorm(W @ W) if n else 0.0, 10 * opts.tol)
    rep.residual("maximality", la.opnorm(W @ la.adj(W) + la.adj(W) @ W - la.eye(n)) if n else 0.0, 10 * opts.tol)
    rep.residual("compression", la.opnorm(W[:h, :h] - nrep.N) if h else 0.0, 10 * opts.tol)
    red = la.smallest_reducing_subspace([W], la.Subspace.coordinates(n, range(h)), opts.tol)
    rep.certify("minimal", red.dim == n)


def _pair(doc):
    return sc.CovariantPair(decode_rho(doc), decode_matrix(doc["T"]), decode_alpha(doc["alpha"]))


def _cmd_covariance(doc, opts, rep):
    pair = _pair(doc)
    rep.residual("covariance", sc.covariance_check(pair), 10 * opts.tol)


def _cmd_orbit(doc, opts, rep):
    rho, alpha = decode_rho(doc), decode_alpha(doc["alpha"])
    pair = sc.orbit_representation(rho, alpha, opts.level)
    rep.outputs.update(V=pair.T, copies=opts.level)
    rep.residual("covariance", sc.covariance_check(pair), 0.0)


def _cmd_crossed_norm(doc, opts, rep):
    pair = _pair(doc)
    poly = sc.CrossedPolynomial(tuple(decode_matrix(a) for a in doc["polynomial"]))
    rep.outputs["lower_bound"] = sc.crossed_norm_lower_bound(poly, pair, opts.tol)
    rep.outputs["coefficient_bound"] = float(sum(la.opnorm(a) for a in poly.coefficients))


def _cmd_dilate_covariant(doc, opts, rep):
    pair = _pair(doc)
    d = sc.dilate_covariant_tree(pair, opts.depth, opts.level, opts.tol)
    rep.outputs.update(representation=encode_rep(d.sigma), V=d.V, valid_cols=[int(c) for c in d.valid_cols])
    cert = sc.covariant_certificates(pair, d, opts.tol)
    rep.certify("fully_extremal", cert.pop("fully_extremal"))
    for k, v in cert.items():
        rep.residual(k, v, 10 * opts.tol)


# ---------------------------------------------------------------- fixtures

def _E(n, i, j):
    m = np.zeros((n, n))
    m[i, j] = 1
    return m


def fixture_document(name, params, seed):
    """Canonical JSON for a named example plus ready-to-run jobs."""
    jobs = []
    if name == "zigzag":
        n = int(params.get("n", 5))
        z = fx.zigzag(n)
        reps = {f"sigma_{k}": encode_rep(r) for k, r in z["reps"].items()}
        for k in range(2, n + 1):
            jobs.append({"command": "tree-fully-extremal",
                         "input": {"representation": reps[f"sigma_{k}"], "original_dims": z["original_dims"]}})
        jobs.append({"command": "tree-classify", "input": {"representation": reps[f"sigma_{n}"]}})
        data = {"n": n, "representations": reps, "original_dims": z["original_dims"]}
    elif name == "nilpotent":
        b = float(params.get("b", 0.5))
        data = {"B": encode_matrix(fx.nilpotent(b).B)}
        jobs.append({"command": "nilpotent-coextend", "input": {"B": data["B"]}})
        jobs.append({"command": "semi-dirichlet", "input": {"basis": [encode_matrix(np.eye(2)), encode_matrix(_E(2, 1, 0))]}})
    elif name == "theta-pair":
        theta = float(params.get("theta", math.pi / 6))
        t = fx.theta_pair(theta)
        data = {"theta": theta, "base": encode_rep(t["base"]), "A": encode_rep(t["A"]), "B": encode_rep(t["B"]),
                "original_dims": t["original_dims"]}
        jobs.append({"command": "tree-coextend", "input": {"representation": data["base"]}})
        for key in ("A", "B"):
            jobs.append({"command": "tree-fully-extremal",
                         "input": {"representation": data[key], "original_dims": t["original_dims"]}})
        jobs.append({"command": "tree-classify", "input": {"representation": data["base"]}})
    elif name == "bidisk":
        a1, a2 = fx.bidisk()
        data = {"A1": encode_matrix(a1), "A2": encode_matrix(a2)}
        jobs.append({"command": "ando", "input": dict(data)})
        jobs.append({"command": "dilate", "input": {"matrix": data["A1"]}})
        jobs.append({"command": "schaeffer", "input": {"matrix": data["A1"]}})
    elif name == "tree-algebras":
        data = {
            "upper_T2": [encode_matrix(_E(2, 0, 0)), encode_matrix(_E(2, 0, 1)), encode_matrix(_E(2, 1, 1))],
            "unilateral_3": [encode_matrix(_E(3, i, j)) for i, j in [(0, 0), (1, 1), (2, 2), (0, 2), (1, 2)]],
            "nilpotent_2": [encode_matrix(np.eye(2)), encode_matrix(_E(2, 1, 0))],
            "adjoint_3": [encode_matrix(_E(3, i, j)) for i, j in [(0, 0), (1, 1), (2, 2), (2, 0), (2, 1)]],
        }
        for basis in data.values():
            jobs.append({"command": "semi-dirichlet", "input": {"basis": basis}})
    elif name == "covariant-star":
        tree = params.get("tree", "out-star")
        pair = fx.covariant_star(fx.rng_for(seed), tree, phases=bool(params.get("phases", True)))
        data = encode_pair(pair.rho, pair.T, pair.alpha)
        jobs.append({"command": "covariance", "input": dict(data)})
        jobs.append({"command": "dilate-covariant", "input": dict(data)})
        jobs.append({"command": "orbit", "input": {"representation": data["representation"], "alpha": data["alpha"]}})
        poly = [encode_matrix(np.eye(3)), encode_matrix(_E(3, 1, 0) if tree == "out-star" else _E(3, 0, 1))]
        jobs.append({"command": "crossed-norm", "input": dict(data, polynomial=poly)})
    else:
        raise UnknownFixture(f"unknown fixture {name!r}", known=list(FIXTURE_NAMES))
    return {"fixture": name, "params": dict(params), "data": data, "jobs": jobs}


FIXTURE_NAMES = ("zigzag", "nilpotent", "theta-pair", "bidisk", "tree-algebras", "covariant-star")


def _cmd_fixtures(doc, opts, rep):
    name = doc.get("name", opts.name)
    if name is None:
        rep.outputs["available"] = list(FIXTURE_NAMES)
        return
    params = dict(doc.get("params", {}))
    params.update(opts.params)
    rep.outputs.update(fixture_document(name, params, opts.seed))


COMMANDS = {
    "defect": (_cmd_defect, {"matrix"}, set()),
    "dilate": (_cmd_dilate, {"matrix"}, set()),
    "schaeffer": (_cmd_schaeffer, {"matrix"}, set()),
    "row-dilate": (_cmd_row_dilate, {"blocks"}, set()),
    "wold": (_cmd_wold, {"matrix"}, {"dilate"}),
    "clt": (_cmd_clt, {"T", "X"}, set()),
    "ando": (_cmd_ando, {"A1", "A2"}, set()),
    "t2-ando": (_cmd_t2, {"A1", "A2", "X"}, set()),
    "tree-classify": (_cmd_tree_classify, set(), {"representation", "structure"}),
    "tree-validate": (_cmd_tree_validate, {"representation"}, set()),
    "tree-extremal": (_cmd_tree_extremal, {"representation"}, set()),
    "tree-fully-extremal": (_cmd_tree_fully, {"representation", "original_dims"}, set()),
    "tree-coextend": (_cmd_tree_coextend, {"representation"}, set()),
    "tree-ando": (_cmd_tree_ando, {"representation", "blocks"}, set()),
    "semi-dirichlet": (_cmd_semi_dirichlet, {"basis"}, set()),
    "nilpotent-coextend": (_cmd_nilpotent, {"B"}, set()),
    "covariance": (_cmd_covariance, {"T", "alpha"}, {"representation", "algebra"}),
    "orbit": (_cmd_orbit, {"alpha"}, {"representation", "algebra"}),
    "crossed-norm": (_cmd_crossed_norm, {"T", "alpha", "polynomial"}, {"representation", "algebra"}),
    "dilate-covariant": (_cmd_dilate_covariant, {"representation", "T", "alpha"}, set()),
    "fixtures": (_cmd_fixtures, set(), {"name", "params"}),
}


class Options:
    def __init__(self, level=4, depth=1, tol=None, seed=0, name=None, params=None):
        if level < 1:
            raise ParseError("level must be at least 1")
        if tol is not None and not tol > 0:
            raise ParseError("tolerance must be positive")
        self.level = level
        self.depth = depth
        self.tol = la.get_tol() if tol is None else tol
        self.seed = seed
        self.name = name
        self.params = params or {}

    def echo(self):
        return {"level": self.level, "depth": self.depth, "tol": self.tol, "seed": self.seed}


def canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def run(command: str, doc, opts: Options):
    """Run one job; returns ``(report_dict, exit_code)``."""
    start = time.perf_counter()
    out = {"schema": SCHEMA, "command": command, "options": opts.echo(),
           "inputs_digest": hashlib.sha256(canonical(doc).encode()).hexdigest()}
    rep = Report()
    code = 0
    try:
        if command not in COMMANDS:
            raise ParseError(f"unknown command {command!r}")
        fn, required, optional = COMMANDS[command]
        body = dict(doc)
        schema = body.pop("schema", SCHEMA)
        if schema != SCHEMA:
            raise ParseError(f"unsupported schema {schema!r}")
        _fields(body, required | optional, required, "input")
        with la.tolerance(opts.tol):
            fn(body, opts, rep)
        status = "pass" if all(rep.certificates.values()) else "fail"
        code = 0 if status == "pass" else 1
    except (ParseError, InputError) as e:
        status, code = "error", 2
        out["error"] = {"name": "ParseError", "message": str(e)}
    except DilateKitError as e:
        status, code = "error", 3
        out["error"] = {"name": type(e).__name__, "message": str(e), "details": _jsonable(e.details)}
    except Exception as e:  # pragma: no cover - defensive
        status, code = "error", 4
        out["error"] = {"name": "InternalError", "message": f"{type(e).__name__}: {e}"}
    out.update(outputs=_jsonable(rep.outputs), residuals=rep.residuals,
               certificates=rep.certificates, status=status)
    out["timing"] = {"seconds": time.perf_counter() - start}
    return out, code


def run_suite(seed=0, level=4, depth=1):
    """Run every fixture and all of its jobs; returns the list of reports."""
    reports = []
    for name in FIXTURE_NAMES:
        opts = Options(level=level, depth=depth, seed=seed, name=name)
        fixture, _ = run("fixtures", {}, opts)
        reports.append(fixture)
        for job in fixture["outputs"].get("jobs", []):
            r, _ = run(job["command"], job["input"], Options(level=level, depth=depth, seed=seed))
            reports.append(r)
    return reports


def without_timing(report) -> dict:
    return {k: v for k, v in report.items() if k != "timing"}


def _parse_param(text):
    if "=" not in text:
        raise ParseError(f"--param expects key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="dilatekit", description="Dilations of matrices and tree representations.")
    ap.add_argument("command", choices=sorted(COMMANDS) + ["suite"])
    ap.add_argument("--input", default=None, help="JSON file, '-' for stdin")
    ap.add_argument("--level", type=int, default=4)
    ap.add_argument("--depth", type=int, default=1)
    ap.add_argument("--tol", type=float, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--output", default=None)
    ap.add_argument("--name", default=None, help="fixture name for the fixtures command")
    ap.add_argument("--param", action="append", default=[], help="fixture parameter key=value")
    args = ap.parse_args(argv)

    def emit(obj):
        text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)

    try:
        params = dict(_parse_param(p) for p in args.param)
        opts = Options(args.level, args.depth, args.tol, args.seed, args.name, params)
        if args.command == "suite":
            reports = run_suite(args.seed, args.level, args.depth)
            emit({"schema": SCHEMA, "reports": reports})
            internal = any(r.get("error", {}).get("name") == "InternalError" for r in reports)
            return 4 if internal else 0
        if args.input is None:
            doc = {}
        elif args.input == "-":
            doc = json.load(sys.stdin)
        else:
            with open(args.input, encoding="utf-8") as fh:
                doc = json.load(fh)
    except (ParseError, json.JSONDecodeError, OSError) as e:
        emit({"schema": SCHEMA, "command": args.command, "status": "error",
              "error": {"name": "ParseError", "message": str(e)}})
        return 2
    report, code = run(args.command, doc, opts)
    emit(report)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
