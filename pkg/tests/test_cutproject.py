import math
from fractions import Fraction

import numpy as np
import pytest

from gapcert import cutproject as cp
from gapcert.exactnum import PHI, quad

from conftest import substitution_word


def brute_force_candidates(spec, L, box):
    """Independent oracle: scan the full integer cube and filter exactly."""
    n = spec.lattice_dim
    axes = [np.arange(-box, box + 1)] * n
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    phys = spec.phys_pairs(grid)
    kap = spec.kappa_pairs(grid)
    keep = spec.in_open_box(phys, Fraction(L)) & spec.kappa_accepts(kap, doubled=True)
    kept = grid[keep]
    return {tuple(v) for v in kept.tolist()}


def test_projection_identities(ab_spec, fib_spec):
    # construction already asserts kappa t = 0, p t = c I and orthogonality
    assert (ab_spec.pt_scale - 2).is_zero()
    phi = quad(0, 1, PHI)
    assert (fib_spec.pt_scale - (1 + phi * phi)).is_zero()


def test_candidates_contain_zero(ab_cands_small, fib_spec):
    for cands in ab_cands_small.values():
        assert cands.zero_index() >= 0
    fc = cp.candidate_set(fib_spec, 3)
    assert fc.zero_index() >= 0


def test_fibonacci_candidate_example(fib_spec):
    # (1,1): p = 1 + phi ~ 2.618 < 3 and kappa = 1 - phi ~ -0.618 in (-1,1)
    cands = cp.candidate_set(fib_spec, 3)
    assert (1, 1) in {tuple(v) for v in cands.vectors.tolist()}
    assert {tuple(v) for v in cands.vectors.tolist()} == {(-1, -1), (0, 0), (1, 1)}


@pytest.mark.parametrize("L", [2, 3, 5])
def test_ab_candidates_match_cube_scan(ab_spec, ab_cands_small, L):
    got = {tuple(v) for v in ab_cands_small[L].vectors.tolist()}
    want = brute_force_candidates(ab_spec, L, box=math.ceil(L) + 3)
    assert got == want


def test_candidates_sorted_lexicographically(ab_cands_small):
    vecs = [tuple(v) for v in ab_cands_small[3].vectors.tolist()]
    assert vecs == sorted(vecs)


def test_candidate_growth_exponents(ab_spec, fib_spec):
    Ls = [10, 20, 40]
    ab_counts = [len(cp.candidate_set(ab_spec, L)) for L in Ls]
    fib_counts = [len(cp.candidate_set(fib_spec, L)) for L in Ls]
    ab_slope = np.polyfit(np.log(Ls), np.log(ab_counts), 1)[0]
    fib_slope = np.polyfit(np.log(Ls), np.log(fib_counts), 1)[0]
    assert abs(ab_slope - 2) < 0.2
    assert abs(fib_slope - 1) < 0.2
    assert ab_counts == sorted(ab_counts)
    assert fib_counts == sorted(fib_counts)


def test_candidate_points_inside_box_exactly(ab_spec):
    cands = cp.candidate_set(ab_spec, 5)
    assert ab_spec.in_open_box(cands.phys, Fraction(5)).all()


def test_realize_patch_contains_origin(ab_spec, ab_cands_small, fib_spec):
    key, pts = cp.realize_patch(
        ab_spec, ab_cands_small[3], (quad(0, 0), quad(0, 0))
    )
    zero = ab_cands_small[3].zero_index()
    assert zero in key.ones
    fc = cp.candidate_set(fib_spec, 5)
    key2, _ = cp.realize_patch(fib_spec, fc, quad(0, 0, PHI))
    assert fc.zero_index() in key2.ones


def test_realize_patch_rejects_outside_point(fib_spec):
    cands = cp.candidate_set(fib_spec, 3)
    with pytest.raises(ValueError):
        cp.realize_patch(fib_spec, cands, quad(2, 0, PHI))
    with pytest.raises(ValueError):
        cp.realize_patch(fib_spec, cands, quad(1, 0, PHI))  # R = [0,1) excludes 1


def test_fibonacci_patch_at_zero_matches_letter_word(fib_spec):
    """Gap word of the realized patch at k = 0 vs the two-sided letter word.

    The origin vertex is the source of the letter at position -1, so the
    n-th gap right of local index i0 is the letter at n - i0 - 1; the whole
    word is a factor of the substitution family (prefix "LSLLS..." shifted
    by one).
    """
    from gapcert.models import fibonacci_letter

    L = 30
    cands = cp.candidate_set(fib_spec, L)
    _, pts = cp.realize_patch(fib_spec, cands, quad(0, 0, PHI))
    xs = sorted(p[0].to_float() for p in pts)
    phi = (1 + math.sqrt(5)) / 2
    gaps = ["L" if abs(d - (1 + 2 * phi)) < 1e-9 else "S" for d in np.diff(xs)]
    i0 = min(range(len(xs)), key=lambda i: abs(xs[i]))
    assert abs(xs[i0]) < 1e-9
    for n, gap in enumerate(gaps):
        assert gap == fibonacci_letter(n - i0 - 1)


def ab_patch_by_lattice_scan(spec, z, L, box):
    """Independent oracle: all v in a cube with z + v accepted and p(v) in B_L."""
    n = spec.lattice_dim
    axes = [np.arange(-box, box + 1)] * n
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    shifted = grid + z[None, :]
    keep = spec.kappa_accepts(spec.kappa_pairs(shifted)) & spec.in_open_box(
        spec.phys_pairs(grid), Fraction(L)
    )
    return {tuple(v) for v in grid[keep].tolist()}


def test_ab_realize_matches_lattice_scan(ab_spec, ab_cands_small):
    L = 3
    cands = ab_cands_small[L]
    rng = np.random.default_rng(11)
    for _ in range(4):
        z = cp.sample_lattice_point(ab_spec, rng, box=500)
        k_pairs = ab_spec.kappa_pairs(z[None, :])[0]
        k = tuple(ab_spec.pair_quad(p) for p in k_pairs)
        key, _ = cp.realize_patch(ab_spec, cands, k)
        got = {tuple(cands.vectors[i].tolist()) for i in key.ones}
        want = ab_patch_by_lattice_scan(ab_spec, z, L, box=math.ceil(L) + 3)
        assert got == want


def test_sampler_determinism_and_singleton(ab_spec, fib_spec):
    one = cp.sample_patches_bruteforce(fib_spec, 5, 1, seed=42)
    assert len(one) == 1
    a = cp.sample_patches_bruteforce(ab_spec, 3, 50, seed=9)
    b = cp.sample_patches_bruteforce(ab_spec, 3, 50, seed=9)
    assert a == b


def test_fib_sampled_keys_in_enumeration(fib_spec):
    from gapcert import regions

    cands = cp.candidate_set(fib_spec, 10)
    dec = regions.enumerate_patches(fib_spec, 10, cands=cands)
    keys = {k for k, _ in dec.entries}
    sampled = cp.sample_patches_bruteforce(fib_spec, 10, 2000, seed=5, cands=cands)
    assert sampled <= keys


def test_patchkey_hex_roundtrip(fib_spec):
    cands = cp.candidate_set(fib_spec, 10)
    key, _ = cp.realize_patch(fib_spec, cands, quad(0, 0, PHI))
    again = cp.PatchKey.from_hex(key.to_hex(), cands)
    assert again == key and again.ones == key.ones


def test_ab_symmetries_structure(ab_spec):
    ops = cp.ab_symmetries()
    assert len(ops) == 8
    # each op maps the candidate set V_L to itself
    cands = cp.candidate_set(ab_spec, 3)
    vecs = {tuple(v) for v in cands.vectors.tolist()}
    for op in ops:
        mapped = op.map_vectors(cands.vectors)
        assert {tuple(v) for v in mapped.tolist()} == vecs


def test_ab_covering_radius_sampling(ab_spec):
    """Every plane point lies within inf-distance < 1 (indeed <= 0.924) of a
    vertex; verified on 10^5 random points against a KD-tree of a patch."""
    from scipy.spatial import cKDTree
    from gapcert import models

    cands = cp.candidate_set(ab_spec, 20)
    key, _ = cp.realize_patch(ab_spec, cands, (quad(0, 0), quad(0, 0)))
    sites = models.siteset_from_patch(ab_spec, cands, key.ones, 20)
    tree = cKDTree(sites.floats)
    rng = np.random.default_rng(123)
    pts = rng.uniform(-15, 15, size=(100_000, 2))
    dist, _ = tree.query(pts, p=np.inf)
    assert dist.max() < 0.924
