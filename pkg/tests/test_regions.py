from fractions import Fraction

import numpy as np
import pytest

from gapcert import cutproject as cp
from gapcert import regions as rg
from gapcert.exactnum import PHI, QuadElem, quad

from conftest import substitution_points


def square(x0, y0, x1, y1, ring="sqrt2"):
    q = lambda v: QuadElem(Fraction(v), 0, ring)
    return rg.Polygon(((q(x0), q(y0)), (q(x1), q(y0)), (q(x1), q(y1)), (q(x0), q(y1))))


def test_intersect_idempotent(ab_spec):
    R = ab_spec.region
    out = rg.intersect(R, R)
    assert (out.area() - R.area()).is_zero()


def test_intersect_disjoint_squares():
    a = square(0, 0, 1, 1)
    b = square(2, 0, 3, 1)
    assert rg.intersect(a, b) is None


def test_intersect_half_shifted_square():
    a = square(0, 0, 1, 1)
    b = square(Fraction(1, 2), 0, Fraction(3, 2), 1)
    out = rg.intersect(a, b)
    assert (out.area() - QuadElem(Fraction(1, 2))).is_zero()


def test_subtract_self_empty():
    a = square(0, 0, 1, 1)
    assert rg.subtract(a, a) == []


def test_subtract_right_half():
    a = square(0, 0, 1, 1)
    right = square(Fraction(1, 2), 0, 1, 1)
    pieces = rg.subtract(a, right)
    assert len(pieces) == 1
    assert (pieces[0].area() - QuadElem(Fraction(1, 2))).is_zero()


def test_subtract_area_bookkeeping_octagons(ab_spec):
    R = ab_spec.region
    shift = (quad(Fraction(1, 2), Fraction(1, 4)), quad(Fraction(-1, 3), 0))
    Q = R.translate(shift)
    inter = rg.intersect(R, Q)
    pieces = rg.subtract(R, Q)
    total = inter.area()
    for p in pieces:
        total = total + p.area()
    assert (total - R.area()).is_zero()


def test_degenerate_contact_is_empty():
    a = square(0, 0, 1, 1)
    b = square(1, 0, 2, 1)  # shares an edge only
    assert rg.intersect(a, b) is None


def test_polygon_contains_and_boundary():
    a = square(0, 0, 2, 2)
    inside, bd = a.contains((quad(1), quad(1)), report_boundary=True)
    assert inside and not bd
    inside, bd = a.contains((quad(0), quad(1)), report_boundary=True)
    assert inside and bd
    assert not a.contains((quad(3), quad(1)))


def test_enumerate_empty_candidates(fib_spec):
    cands = cp.candidate_set(fib_spec, 3)
    empty = cp.CandidateSet(
        spec=fib_spec,
        L=Fraction(3),
        vectors=cands.vectors[:0],
        kappa=cands.kappa[:0],
        phys=cands.phys[:0],
        digests=[],
    )
    dec = rg.enumerate_patches(fib_spec, 3, cands=empty)
    assert len(dec) == 1
    key = dec.entries[0][0]
    assert key.ones == ()


def fib_window_patch_count(L: int, n_letters: int = 120_000) -> int:
    """Sliding-window oracle: distinct relative point sets of radius L along
    a substitution-generated stretch of the chain."""
    import gapcert.cutproject as cp

    spec = cp.fibonacci()
    z = substitution_points(n_letters)
    margin = int(L / 2.6) + 3
    phys = z[:, 0].astype(np.int64), z[:, 1].astype(np.int64)
    seen = set()
    for i in range(margin, len(z) - margin):
        rel = z[i - margin : i + margin + 1] - z[i]
        pairs = spec.phys_pairs(rel)
        keep = spec.in_open_box(pairs, Fraction(L))
        seen.add(tuple(map(tuple, rel[keep].tolist())))
    return len(seen)


@pytest.mark.parametrize("L", [5, 10])
def test_fib_enumeration_matches_sliding_window(fib_spec, L):
    dec = rg.enumerate_patches(fib_spec, L)
    assert len(dec) == fib_window_patch_count(L)


def test_fib_decomposition_invariants(fib_spec):
    dec = rg.enumerate_patches(fib_spec, 10)
    total = dec.total_area()
    assert (total - quad(1, 0, PHI)).is_zero()
    # realize at each piece midpoint reproduces the key
    cands = cp.candidate_set(fib_spec, 10)
    for key, pieces in dec.entries:
        for piece in pieces:
            mid = piece.centroid()
            got, _ = cp.realize_patch(fib_spec, cands, mid)
            assert got == key


def test_ab_decomposition_invariants(ab_spec):
    L = 3
    cands = cp.candidate_set(ab_spec, L)
    dec = rg.enumerate_patches(ab_spec, L, cands=cands)
    assert (dec.total_area() - ab_spec.region.area()).is_zero()
    keys = {k for k, _ in dec.entries}
    assert len(keys) == len(dec.entries)
    rng = np.random.default_rng(0)
    idx = rng.choice(len(dec.entries), size=40, replace=False)
    for i in idx:
        key, pieces = dec.entries[int(i)]
        got, _ = cp.realize_patch(ab_spec, cands, pieces[0].centroid())
        assert got == key


def test_ab_pieces_interior_disjoint(ab_spec):
    dec = rg.enumerate_patches(ab_spec, 2)
    pieces = [p for _, ps in dec.entries for p in ps]
    boxes = np.array(
        [
            [p.float_verts[:, 0].min(), p.float_verts[:, 0].max(),
             p.float_verts[:, 1].min(), p.float_verts[:, 1].max()]
            for p in pieces
        ]
    )
    rng = np.random.default_rng(1)
    checked = 0
    for i in rng.choice(len(pieces), size=min(len(pieces), 150), replace=False):
        for j in range(len(pieces)):
            if j == i:
                continue
            if boxes[i, 0] > boxes[j, 1] or boxes[j, 0] > boxes[i, 1]:
                continue
            if boxes[i, 2] > boxes[j, 3] or boxes[j, 2] > boxes[i, 3]:
                continue
            inter = rg.intersect(pieces[int(i)], pieces[j])
            assert inter is None
            checked += 1
    assert checked > 0


def test_order_independence_of_key_areas(fib_spec):
    """The (key -> total area) map is identical under reversed candidate order."""
    L = 8
    cands = cp.candidate_set(fib_spec, L)
    rev = cp.CandidateSet(
        spec=fib_spec,
        L=cands.L,
        vectors=cands.vectors[::-1].copy(),
        kappa=cands.kappa[::-1].copy(),
        phys=cands.phys[::-1].copy(),
        digests=cands.digests[::-1],
    )
    d1 = rg.enumerate_patches(fib_spec, L, cands=cands)
    d2 = rg.enumerate_patches(fib_spec, L, cands=rev)

    def area_map(dec):
        out = {}
        for key, pieces in dec.entries:
            acc = pieces[0].area()
            for p in pieces[1:]:
                acc = acc + p.area()
            out[key.digest] = acc
        return out

    m1, m2 = area_map(d1), area_map(d2)
    assert set(m1) == set(m2)
    for k in m1:
        assert (m1[k] - m2[k]).is_zero()


def test_patch_count_nondecreasing(fib_spec):
    counts = [len(rg.enumerate_patches(fib_spec, L)) for L in (3, 5, 8, 12)]
    assert counts == sorted(counts)


def test_symmetry_reduce_geometry(ab_spec):
    wedge = rg.symmetry_reduce(ab_spec)
    eight = wedge.area() * 8
    assert (eight - ab_spec.region.area()).is_zero()
    for v in wedge.verts:
        assert ab_spec.region.contains(v)


def test_symmetry_reduce_requires_ab(fib_spec):
    with pytest.raises(ValueError):
        rg.symmetry_reduce(fib_spec)


def test_wedge_keys_closed_under_mirrors(ab_spec):
    """Wedge enumeration, closed under the 8 mirror maps, equals the full
    enumeration (key sets compared content-addressably)."""
    L = 3
    cands = cp.candidate_set(ab_spec, L)
    full = {k.digest for k, _ in rg.enumerate_patches(ab_spec, L, cands=cands).entries}
    wedge = rg.enumerate_patches(ab_spec, L, cands=cands, symmetry=True)
    ops = cp.ab_symmetries()
    index_of = {tuple(v): i for i, v in enumerate(cands.vectors.tolist())}
    closed = set()
    for key, _ in wedge.entries:
        for op in ops:
            mapped = op.map_vectors(cands.vectors[list(key.ones)])
            ones = [index_of[tuple(v)] for v in mapped.tolist()]
            closed.add(cp.PatchKey.from_ones(ones, cands).digest)
    assert closed == full


def test_split_for_parallelism(ab_spec):
    R = ab_spec.region
    assert rg.split_for_parallelism(R, 1) == [R]
    sq = square(0, 0, 1, 1)
    cells = rg.split_for_parallelism(sq, 4)
    assert len(cells) == 4
    for c in cells:
        assert (c.area() - QuadElem(Fraction(1, 4))).is_zero()
    many = rg.split_for_parallelism(R, 80)
    total = many[0].area()
    for p in many[1:]:
        total = total + p.area()
    assert (total - R.area()).is_zero()


def test_enumeration_piece_split_equivalence(ab_spec):
    cands = cp.candidate_set(ab_spec, 3)
    d1 = {k.digest for k, _ in rg.enumerate_patches(ab_spec, 3, cands=cands).entries}
    d2 = {
        k.digest
        for k, _ in rg.enumerate_patches(ab_spec, 3, pieces=12, cands=cands).entries
    }
    assert d1 == d2


def test_interval_operations():
    one = quad(1, 0, PHI)
    zero = quad(0, 0, PHI)
    half = quad(Fraction(1, 2), 0, PHI)
    iv = rg.Interval(zero, one)
    assert iv.contains(zero) and not iv.contains(one)
    left = iv.subtract(rg.Interval(half, one))
    assert len(left) == 1 and (left[0].hi - half).is_zero()
    mid = rg.Interval(quad(Fraction(1, 4), 0, PHI), half)
    parts = iv.subtract(mid)
    assert len(parts) == 2
    assert (parts[0].area() + parts[1].area() - (one - half + quad(Fraction(1, 4), 0, PHI))).sign() == 0
