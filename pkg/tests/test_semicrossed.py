import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dilatekit import linalg as la
from dilatekit.dilations import minimal_isometric_dilation
from dilatekit.errors import InputError, NotAnAutomorphism, NotCovariant
from dilatekit.fixtures import STAR_TREES, covariant_star, random_commuting_blocks, random_contraction, random_tree_rep, random_unitary
from dilatekit.incidence import TreeRepresentation, extremal_check_tree, fully_extremal_check_tree, minimal_extremal_coextension_tree
from dilatekit.semicrossed import (
    CovariantPair,
    CrossedPolynomial,
    EndomorphismSpec,
    MatrixAlgebraRep,
    check_automorphism,
    covariance_check,
    covariant_certificates,
    crossed_norm_lower_bound,
    dilate_covariant_tree,
    orbit_representation,
)

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def E(n, i, j):
    m = np.zeros((n, n))
    m[i, j] = 1
    return m


def upper_t2():
    basis = [E(2, 0, 0), E(2, 0, 1), E(2, 1, 1)]
    return MatrixAlgebraRep(basis, basis)


# endomorphisms

def test_graph_automorphism_matrix_moves_units():
    a = EndomorphismSpec("graph_automorphism", perm=(0, 2, 1))
    assert np.allclose(a.apply(E(3, 0, 1)), E(3, 0, 2))
    assert np.allclose(a.power(E(3, 0, 1), 2), E(3, 0, 1))


def test_endomorphism_validation():
    with pytest.raises(NotAnAutomorphism):
        EndomorphismSpec("graph_automorphism", perm=(0, 0, 1))
    with pytest.raises(NotAnAutomorphism):
        EndomorphismSpec("matrix_conjugation", unitary=2 * np.eye(2))
    with pytest.raises(InputError):
        EndomorphismSpec("shift")


def test_check_automorphism_on_tree():
    rep = TreeRepresentation.from_edges(3, [1, 1, 1], {(1, 0): [[0.5]], (2, 0): [[0.5]]})
    check_automorphism(rep, EndomorphismSpec("graph_automorphism", perm=(0, 2, 1)))
    with pytest.raises(NotAnAutomorphism):
        check_automorphism(rep, EndomorphismSpec("graph_automorphism", perm=(1, 0, 2)))


def test_check_automorphism_leaving_algebra():
    flip = np.array([[0, 1], [1, 0]])
    with pytest.raises(NotAnAutomorphism):
        check_automorphism(upper_t2(), EndomorphismSpec("matrix_conjugation", unitary=flip))


# covariance

def test_identity_alpha_commuting_T():
    rep = upper_t2()
    # the commutant of the upper triangular algebra on C^2 is the scalars
    pair = CovariantPair(rep, 0.3 * np.eye(2), EndomorphismSpec.identity(2))
    assert covariance_check(pair) < 1e-15


def test_zero_T_any_alpha():
    rep = TreeRepresentation.from_edges(3, [1, 2, 2], {(1, 0): np.ones((2, 1)) / 2, (2, 0): np.ones((2, 1)) / 2})
    pair = CovariantPair(rep, np.zeros((5, 5)), EndomorphismSpec("graph_automorphism", perm=(0, 2, 1)))
    assert covariance_check(pair) == 0.0


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_perturbation_measured(seed):
    rng = np.random.default_rng(seed)
    pair = covariant_star(rng, "out-star")
    assert covariance_check(pair) < 1e-9
    eps = 1e-3
    rep, perm = pair.rho, pair.alpha.perm
    vertex = np.repeat(np.arange(rep.n), rep.dims)
    # entries outside the blocks H_{perm k} -> H_k break covariance for the vertex projections
    bad = [(i, j) for i in range(rep.total_dim) for j in range(rep.total_dim) if vertex[j] != perm[vertex[i]]]
    i, j = bad[int(rng.integers(len(bad)))]
    T = np.array(pair.T)
    T[i, j] += eps
    r = covariance_check(CovariantPair(rep, T, pair.alpha))
    assert eps / 2 <= r <= 2 * eps


# orbit representation

def test_orbit_identity_alpha_is_shift():
    rep = upper_t2()
    pair = orbit_representation(rep, EndomorphismSpec.identity(2), 3)
    assert np.array_equal(pair.T, np.kron(np.eye(3, k=-1), np.eye(2)))
    assert np.array_equal(pair.rho(E(2, 0, 1)), np.kron(np.eye(3), E(2, 0, 1)))
    assert covariance_check(pair) == 0.0


def test_orbit_single_copy():
    pair = orbit_representation(upper_t2(), EndomorphismSpec.identity(2), 1)
    assert np.array_equal(pair.T, np.zeros((2, 2)))
    assert covariance_check(pair) == 0.0


@pytest.mark.parametrize("name", sorted(STAR_TREES))
def test_orbit_leaf_swap_exact(name):
    n, edges, perm = STAR_TREES[name]
    rng = np.random.default_rng(1)
    rep = TreeRepresentation.from_edges(n, [2] * n, {e: random_contraction(rng, 2) for e in edges})
    pair = orbit_representation(rep, EndomorphismSpec("graph_automorphism", perm=perm, phases=(1, 1j, -1)), 4)
    assert covariance_check(pair) == 0.0


# norm lower bounds

def test_norm_constant_term():
    rep = upper_t2()
    pair = orbit_representation(rep, EndomorphismSpec.identity(2), 3)
    a = np.array([[0.3, 0.5], [0, -0.2]])
    v = crossed_norm_lower_bound(CrossedPolynomial((a,)), pair)
    assert v == pytest.approx(la.opnorm(a))


def test_norm_generator_is_one():
    pair = orbit_representation(upper_t2(), EndomorphismSpec.identity(2), 3)
    v = crossed_norm_lower_bound(CrossedPolynomial((np.zeros((2, 2)), np.eye(2))), pair)
    assert v == pytest.approx(1.0)


def test_norm_monotone_in_levels():
    rep = upper_t2()
    a = np.array([[0.4, 0.9], [0, 0.1]])
    p = CrossedPolynomial((np.eye(2) * 0.2, a))
    vals = [crossed_norm_lower_bound(p, orbit_representation(rep, EndomorphismSpec.identity(2), N)) for N in (2, 4, 8)]
    assert vals[0] <= vals[1] + 1e-12 <= vals[2] + 2e-12


def test_norm_rejects_noncovariant():
    rep = upper_t2()
    pair = CovariantPair(rep, E(2, 1, 0), EndomorphismSpec.identity(2))
    with pytest.raises(NotCovariant):
        crossed_norm_lower_bound(CrossedPolynomial((np.eye(2),)), pair)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 3))
def test_norm_bounded_by_coefficients(seed, deg):
    rng = np.random.default_rng(seed)
    rep = random_tree_rep(rng, 3)
    alpha = EndomorphismSpec.identity(3)
    pair = orbit_representation(rep, alpha, 3)
    basis = rep.algebra_basis()
    coeffs = tuple(sum(complex(c) * b for c, b in zip(rng.standard_normal(len(basis)), basis)) for _ in range(deg + 1))
    v = crossed_norm_lower_bound(CrossedPolynomial(coeffs), pair)
    assert v <= sum(la.opnorm(a) for a in coeffs) + 1e-8


# covariant dilation

def test_single_vertex_collapses_to_minimal_dilation():
    rep = TreeRepresentation.from_edges(1, [1], {})
    pair = CovariantPair(rep, np.array([[0.5]]), EndomorphismSpec.identity(1))
    d = dilate_covariant_tree(pair, 1, 3)
    V = minimal_isometric_dilation([[0.5]], 3)
    assert d.V.shape == V.block.shape
    assert la.opnorm(np.abs(d.V) - np.abs(V.block)) < 1e-12


def test_zero_T_gives_shift_over_extremal_coextension():
    rng = np.random.default_rng(2)
    rep = random_tree_rep(rng, 3, isometric_prob=0.0)
    pair = CovariantPair(rep, np.zeros((rep.total_dim, rep.total_dim)), EndomorphismSpec.identity(3))
    d = dilate_covariant_tree(pair, 1, 3)
    c = covariant_certificates(pair, d)
    assert c["fully_extremal"] and c["isometry"] < 1e-9 and c["compression"] < 1e-12
    assert extremal_check_tree(minimal_extremal_coextension_tree(rep)).ok


def test_dilation_identity_alpha_commutes():
    rng = np.random.default_rng(3)
    rep = random_tree_rep(rng, 3)
    blocks = random_commuting_blocks(rng, rep, norm=0.8)
    pair = CovariantPair(rep, la.dsum(*blocks), EndomorphismSpec.identity(3))
    d = dilate_covariant_tree(pair, 2, 4)
    c = covariant_certificates(pair, d)
    assert c["covariance"] < 1e-8 and c["isometry"] < 1e-8
    # covariance for the identity is commutation with every sigma(a)
    cols = d.valid_cols
    for a in rep.algebra_basis():
        s = d.sigma(a)
        assert la.opnorm((s @ d.V - d.V @ s)[:, cols]) < 1e-8


def test_dilation_rejects_bad_input():
    rep = upper_t2()
    with pytest.raises(InputError):
        dilate_covariant_tree(CovariantPair(rep, np.zeros((2, 2)), EndomorphismSpec.identity(2)), 1, 2)
    pair = covariant_star(np.random.default_rng(4), "out-star")
    with pytest.raises(InputError):
        dilate_covariant_tree(pair, 5, 4)
    bad = CovariantPair(pair.rho, pair.T + 0.1 * np.eye(pair.T.shape[0]), pair.alpha)
    with pytest.raises(NotCovariant):
        dilate_covariant_tree(bad, 1, 3)


@settings(max_examples=30, deadline=None)
@given(seeds, st.sampled_from(sorted(STAR_TREES)), st.booleans())
def test_covariant_dilation_properties(seed, name, phases):
    rng = np.random.default_rng(seed)
    pair = covariant_star(rng, name, phases=phases, norm=0.8)
    d = dilate_covariant_tree(pair, 3, 4)
    c = covariant_certificates(pair, d)
    assert c["fully_extremal"]
    assert c["isometry"] < 1e-7 and c["covariance"] < 1e-6 and c["compression"] < 1e-8


def test_window_extension_stable():
    pair = covariant_star(np.random.default_rng(5), "out-star", norm=0.8)
    a = covariant_certificates(pair, dilate_covariant_tree(pair, 1, 4))
    b = covariant_certificates(pair, dilate_covariant_tree(pair, 1, 5))
    assert max(a["isometry"], b["isometry"]) < 1e-8


def test_matrix_rep_rejects_outside_element():
    with pytest.raises(Exception):
        upper_t2()(E(2, 1, 0))


def test_matrix_conjugation_orbit():
    U = random_unitary(np.random.default_rng(6), 2)
    basis = [np.eye(2), U @ np.diag([1.0, 0]) @ U.conj().T]
    rep = MatrixAlgebraRep(basis, basis)
    alpha = EndomorphismSpec("matrix_conjugation", unitary=U @ np.diag([1, 1j]) @ U.conj().T)
    check_automorphism(rep, alpha)
    assert covariance_check(orbit_representation(rep, alpha, 3)) == 0.0


# rotated merges

@settings(max_examples=25, deadline=None)
@given(seeds)
def test_rotated_merge_stays_fully_extremal(seed):
    from dilatekit.lifting import _merge_slots, merge_coextension, rotate_merges

    rng = np.random.default_rng(seed)
    n, edges, _ = STAR_TREES["in-star"]
    dims = [int(d) for d in rng.integers(1, 3, n)]
    ops = {e: random_contraction(rng, dims[e[0]], dims[e[1]]) for e in edges}
    co = merge_coextension(n, edges, ops, dims)
    slots = _merge_slots(n, edges, co)
    assert slots
    rot = rotate_merges(co, slots, rng.standard_normal(sum(2 * r * r for _, _, r in slots)))
    for (i, j), v in rot.edges.items():
        assert la.opnorm(la.adj(v) @ v - np.eye(v.shape[1])) < 1e-10
        assert np.array_equal(v[: dims[i], : dims[j]], ops[(i, j)])
    sigma = TreeRepresentation.from_edges(n, list(rot.dims), dict(rot.edges))
    assert extremal_check_tree(sigma).ok
    assert fully_extremal_check_tree(sigma, dims).ok


def test_in_star_needs_rotated_merge():
    # the orthogonal merge admits no contractive beta here (its optimum norm is
    # about 1.004); rotating the second defect embedding does
    from dilatekit.lifting import _betas_convex, merge_coextension

    pair = covariant_star(np.random.default_rng(13), "in-star", phases=True, norm=0.9)
    rho, perm = pair.rho, pair.alpha.perm
    lam = np.asarray(pair.alpha.phases)
    Tp = pair.T @ la.dsum(*[lam[i] * np.eye(rho.dims[i]) for i in range(rho.n)])
    off = rho.offsets
    blocks = [Tp[off[k] : off[k + 1], off[perm[k]] : off[perm[k] + 1]] for k in range(rho.n)]
    edges = list(rho.structure.generating_edges)
    co = merge_coextension(rho.n, edges, rho.edge_ops, rho.dims)
    assert _betas_convex(rho.n, edges, co, blocks, perm, 1e-10) is None
    d = dilate_covariant_tree(pair, 3, 4)
    c = covariant_certificates(pair, d)
    assert c["fully_extremal"] and c["isometry"] < 1e-7 and c["covariance"] < 1e-6 and c["compression"] < 1e-8
