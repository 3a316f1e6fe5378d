"""Exact convex-region engine and local-patch enumeration.

2D pieces are convex polygons with counterclockwise QuadElem vertices, 1D
pieces are half-open intervals [lo, hi).  All set operations (half-plane
clipping, intersection, convex difference) are exact; floating-point data
is used only as a prefilter and every ambiguous comparison falls back to
exact sign tests.

The patch enumeration walks the candidate set once, maintaining the list J
of (piece, partial bit string) pairs.  Containment/disjointness shortcuts
against the region being decomposed are applied before any piecewise
splitting, and set differences are stored as convex decompositions
(fan-split along the clip edges) so every operation stays convex-convex.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .exactnum import QuadElem, quad

logger = logging.getLogger(__name__)

__all__ = [
    "Polygon",
    "Interval",
    "intersect",
    "subtract",
    "RegionDecomposition",
    "enumerate_patches",
    "iter_patch_entries",
    "symmetry_reduce",
    "split_for_parallelism",
]


# ---------------------------------------------------------------------------
# Geometry primitives
# ---------------------------------------------------------------------------


class Polygon:
    """Convex polygon with exact CCW vertices (tuples of QuadElem pairs)."""

    __slots__ = ("verts", "_float", "_area")

    def __init__(self, verts: Sequence[Tuple[QuadElem, QuadElem]]):
        self.verts = tuple(verts)
        self._float = None
        self._area = None

    # -- basic data ---------------------------------------------------------
    @property
    def float_verts(self) -> np.ndarray:
        if self._float is None:
            self._float = np.array(
                [[v[0].to_float(), v[1].to_float()] for v in self.verts], dtype=float
            )
        return self._float

    def area(self) -> QuadElem:
        """Exact area (shoelace)."""
        if self._area is None:
            ring = self.verts[0][0].ring
            acc = quad(0, 0, ring)
            n = len(self.verts)
            for i in range(n):
                x1, y1 = self.verts[i]
                x2, y2 = self.verts[(i + 1) % n]
                acc = acc + (x1 * y2 - x2 * y1)
            self._area = acc / 2
        return self._area

    def centroid(self) -> Tuple[QuadElem, QuadElem]:
        """Vertex average; exact and strictly interior for convex pieces."""
        ring = self.verts[0][0].ring
        sx = quad(0, 0, ring)
        sy = quad(0, 0, ring)
        for x, y in self.verts:
            sx = sx + x
            sy = sy + y
        n = len(self.verts)
        return (sx / n, sy / n)

    def translate(self, vec: Tuple[QuadElem, QuadElem]) -> "Polygon":
        return Polygon(tuple((x + vec[0], y + vec[1]) for x, y in self.verts))

    def halfplanes(self):
        """Edges as (nx, ny, c) with inside = { n.x <= c } for CCW order."""
        out = []
        n = len(self.verts)
        for i in range(n):
            x1, y1 = self.verts[i]
            x2, y2 = self.verts[(i + 1) % n]
            nx = y2 - y1
            ny = x1 - x2
            c = nx * x1 + ny * y1
            out.append((nx, ny, c))
        return out

    def contains(self, point, report_boundary: bool = False):
        """Exact closed membership test; optionally reports boundary hits."""
        px, py = point
        on_boundary = False
        n = len(self.verts)
        for i in range(n):
            x1, y1 = self.verts[i]
            x2, y2 = self.verts[(i + 1) % n]
            cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
            s = cross.sign()
            if s < 0:
                return (False, False) if report_boundary else False
            if s == 0:
                on_boundary = True
        return (True, on_boundary) if report_boundary else True

    def clip_halfplane(self, nx, ny, c) -> Optional["Polygon"]:
        """Exact Sutherland-Hodgman clip against { n.x <= c }.

        Returns None when the result has empty interior (degenerate contact
        counts as empty).
        """
        verts = self.verts
        n = len(verts)
        margins = []
        for x, y in verts:
            margins.append((c - (nx * x + ny * y)).sign())
        if all(m >= 0 for m in margins):
            if all(m > 0 for m in margins):
                return self
            return self if _positive_area(verts) else None
        if all(m <= 0 for m in margins):
            return None
        out = []
        for i in range(n):
            j = (i + 1) % n
            ax, ay = verts[i]
            bx, by = verts[j]
            ma, mb = margins[i], margins[j]
            if ma >= 0:
                out.append((ax, ay))
                if mb < 0 and ma > 0:
                    out.append(_edge_plane_point(ax, ay, bx, by, nx, ny, c))
            elif mb > 0:
                out.append(_edge_plane_point(ax, ay, bx, by, nx, ny, c))
        cleaned = _cleanup(out)
        if cleaned is None:
            return None
        return Polygon(cleaned)

    def is_empty(self) -> bool:
        return len(self.verts) < 3 or self.area().sign() <= 0

    def __repr__(self):
        pts = ", ".join(f"({x.to_float():.4f},{y.to_float():.4f})" for x, y in self.verts)
        return f"Polygon[{pts}]"


def _edge_plane_point(ax, ay, bx, by, nx, ny, c):
    da = nx * ax + ny * ay
    db = nx * bx + ny * by
    t = (c - da) / (db - da)
    return (ax + t * (bx - ax), ay + t * (by - ay))


def _positive_area(verts) -> bool:
    if len(verts) < 3:
        return False
    ring = verts[0][0].ring
    acc = quad(0, 0, ring)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        acc = acc + (x1 * y2 - x2 * y1)
    return acc.sign() > 0


def _cleanup(verts):
    """Dedup consecutive vertices, drop collinear middles, validate area."""
    if len(verts) < 3:
        return None
    dedup = []
    for v in verts:
        if not dedup or not _same_point(dedup[-1], v):
            dedup.append(v)
    while len(dedup) > 1 and _same_point(dedup[0], dedup[-1]):
        dedup.pop()
    if len(dedup) < 3:
        return None
    out = []
    n = len(dedup)
    for i in range(n):
        p0 = dedup[(i - 1) % n]
        p1 = dedup[i]
        p2 = dedup[(i + 1) % n]
        cross = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
        if cross.sign() != 0:
            out.append(p1)
    if len(out) < 3 or not _positive_area(out):
        return None
    return tuple(out)


def _same_point(a, b) -> bool:
    return (a[0] - b[0]).is_zero() and (a[1] - b[1]).is_zero()


class Interval:
    """Half-open interval [lo, hi) with exact endpoints."""

    __slots__ = ("lo", "hi")
    closed_left = True
    closed_right = False

    def __init__(self, lo: QuadElem, hi: QuadElem):
        self.lo = lo
        self.hi = hi

    def area(self) -> QuadElem:
        return self.hi - self.lo

    def length(self) -> QuadElem:
        return self.area()

    def centroid(self) -> QuadElem:
        return (self.lo + self.hi) / 2

    def is_empty(self) -> bool:
        return (self.hi - self.lo).sign() <= 0

    def contains(self, x: QuadElem) -> bool:
        return (x - self.lo).sign() >= 0 and (x - self.hi).sign() < 0

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        lo = self.lo if (self.lo - other.lo).sign() >= 0 else other.lo
        hi = self.hi if (self.hi - other.hi).sign() <= 0 else other.hi
        out = Interval(lo, hi)
        return None if out.is_empty() else out

    def subtract(self, other: "Interval") -> List["Interval"]:
        pieces = []
        if (other.lo - self.lo).sign() > 0:
            piece = Interval(self.lo, _min_q(other.lo, self.hi))
            if not piece.is_empty():
                pieces.append(piece)
        if (other.hi - self.hi).sign() < 0:
            piece = Interval(_max_q(other.hi, self.lo), self.hi)
            if not piece.is_empty():
                pieces.append(piece)
        return pieces

    def __repr__(self):
        return f"Interval[{self.lo.to_float():.6f}, {self.hi.to_float():.6f})"


def _min_q(a: QuadElem, b: QuadElem) -> QuadElem:
    return a if (a - b).sign() <= 0 else b


def _max_q(a: QuadElem, b: QuadElem) -> QuadElem:
    return a if (a - b).sign() >= 0 else b


# ---------------------------------------------------------------------------
# Convex set operations
# ---------------------------------------------------------------------------


def intersect(piece, clipper):
    """Exact convex intersection; None when empty or measure-zero."""
    if isinstance(piece, Interval):
        return piece.intersect(clipper)
    out = piece
    for nx, ny, c in clipper.halfplanes():
        out = out.clip_halfplane(nx, ny, c)
        if out is None:
            return None
    return out


def subtract(piece, clipper) -> list:
    """Convex decomposition of piece \\ clipper (fan-split on clip edges)."""
    if isinstance(piece, Interval):
        return piece.subtract(clipper)
    pieces = []
    cur = piece
    for nx, ny, c in clipper.halfplanes():
        outside = cur.clip_halfplane(-nx, -ny, -c)
        if outside is not None:
            pieces.append(outside)
        cur = cur.clip_halfplane(nx, ny, c)
        if cur is None:
            break
    return pieces


def split_with(piece, clipper):
    """(piece ∩ clipper, convex pieces of piece \\ clipper) in one pass."""
    if isinstance(piece, Interval):
        return piece.intersect(clipper), piece.subtract(clipper)
    outs = []
    cur = piece
    for nx, ny, c in clipper.halfplanes():
        outside = cur.clip_halfplane(-nx, -ny, -c)
        if outside is not None:
            outs.append(outside)
        cur = cur.clip_halfplane(nx, ny, c)
        if cur is None:
            break
    return cur, outs


# ---------------------------------------------------------------------------
# Enumeration of local patches (supplement Algorithms 1+2 driver)
# ---------------------------------------------------------------------------


@dataclass
class PatchEntry:
    """One enumerated patch: content digest, optional explicit bits, pieces."""

    digest: int
    ones: Optional[tuple]
    pieces: list


@dataclass
class RegionDecomposition:
    """Partition of the acceptance region labeled by patch keys."""

    spec_name: str
    L: Fraction
    nbits: int
    entries: list  # list[(PatchKey, list[pieces])]
    source_pieces: list

    def total_area(self) -> QuadElem:
        acc = None
        for _, pieces in self.entries:
            for p in pieces:
                acc = p.area() if acc is None else acc + p.area()
        return acc

    def __len__(self):
        return len(self.entries)


class _OctagonClipper:
    """The 8 half-planes of a translated acceptance octagon.

    Base octagon (side length `scale`): |x| <= scale*(1+sqrt2)/2 etc.
    Translated by -kappa(v), offsets become c_e - n_e . kappa(v).
    """

    NORMALS = np.array(
        [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1], [1, -1], [-1, 1]],
        dtype=float,
    )

    def __init__(self, region: Polygon):
        # derive exact normals/offsets once from the octagon polygon
        ring = region.verts[0][0].ring
        one = quad(1, 0, ring)
        zero = quad(0, 0, ring)
        n_exact = [
            (one, zero),
            (-one, zero),
            (zero, one),
            (zero, -one),
            (one, one),
            (-one, -one),
            (one, -one),
            (-one, one),
        ]
        offs = []
        for nx, ny in n_exact:
            best = None
            for x, y in region.verts:
                val = nx * x + ny * y
                if best is None or (val - best).sign() > 0:
                    best = val
            offs.append(best)
        self.n_exact = n_exact
        self.c_exact = offs
        self.c_float = np.array([c.to_float() for c in offs])

    def rhs_float(self, kv_float: np.ndarray) -> np.ndarray:
        return self.c_float - self.NORMALS @ kv_float

    def rhs_exact(self, kv: tuple) -> list:
        return [
            self.c_exact[e]
            - (self.n_exact[e][0] * kv[0] + self.n_exact[e][1] * kv[1])
            for e in range(8)
        ]

    def shifted_polygon(self, region: Polygon, kv: tuple) -> Polygon:
        return region.translate((-kv[0], -kv[1]))


class _Piece2D:
    """DP bookkeeping wrapper: polygon + float directional extrema."""

    __slots__ = ("poly", "maxd", "mind")

    def __init__(self, poly: Polygon, clip: _OctagonClipper):
        self.poly = poly
        dots = poly.float_verts @ clip.NORMALS.T
        self.maxd = dots.max(axis=0)
        self.mind = dots.min(axis=0)


# Tie quantum for directional-margin classification.  All clip lines carry
# offsets (p + q*sqrt2)/2 with small integers and normals from the four
# octagon edge families, so piece vertices have denominator <= 4 (<= 256
# with quantized parallel-split cuts) and every nonzero margin exceeds
# ~1e-7 in magnitude; float evaluation errs below 1e-12.  Margins inside
# the band are therefore exact ties (touching), decided as such.
_EPS = 1e-9


def _classify(piece: _Piece2D, rhs_f: np.ndarray) -> int:
    """3-way classification vs the shifted octagon: 1 inside, 0 outside, -1 straddle.

    Closed-side semantics: touching the boundary from inside counts as
    contained; touching from outside means measure-zero overlap (empty).
    """
    if (rhs_f - piece.maxd > -_EPS).all():
        return 1
    if (piece.mind - rhs_f > -_EPS).any():
        return 0
    return -1


def _decompose_polygon_piece(spec, cands, r0: Polygon, keep_ones: bool) -> list:
    """Run the candidate DP over one R0 piece; returns PatchEntry list."""
    clip = _OctagonClipper(spec.region)
    region = spec.region
    kv_float = spec.pairs_float(cands.kappa)  # (n, 2)
    rhs_all = clip.c_float[None, :] - kv_float @ clip.NORMALS.T  # (n, 8)
    digests = cands.digests

    root = _Piece2D(r0, clip)
    # entries: [piece, chain, digest]; chain is a cons list of set bit indices
    entries = [[root, None, 0]]
    cap = 1024
    maxd_mat = np.empty((cap, 8))
    mind_mat = np.empty((cap, 8))
    maxd_mat[0] = root.maxd
    mind_mat[0] = root.mind

    def ensure_cap(n):
        nonlocal cap, maxd_mat, mind_mat
        if n <= cap:
            return
        while cap < n:
            cap *= 2
        grown_max = np.empty((cap, 8))
        grown_min = np.empty((cap, 8))
        grown_max[: len(entries)] = maxd_mat[: len(entries)]
        grown_min[: len(entries)] = mind_mat[: len(entries)]
        maxd_mat, mind_mat = grown_max, grown_min

    n_cand = len(cands)
    for i in range(n_cand):
        rhs_f = rhs_all[i]
        cls = _classify(root, rhs_f)
        if cls == 1:
            d = digests[i]
            for ent in entries:
                if keep_ones:
                    ent[1] = (ent[1], i)
                ent[2] ^= d
            continue
        if cls == 0:
            continue

        ne = len(entries)
        margins_in = rhs_f[None, :] - maxd_mat[:ne]
        margins_out = mind_mat[:ne] - rhs_f[None, :]
        sure_in = (margins_in > -_EPS).all(axis=1)
        sure_out = (margins_out > -_EPS).any(axis=1)
        undecided = np.nonzero(~(sure_in | sure_out))[0]

        d = digests[i]
        for j in np.nonzero(sure_in & ~sure_out)[0]:
            ent = entries[int(j)]
            if keep_ones:
                ent[1] = (ent[1], i)
            ent[2] ^= d

        if len(undecided) == 0:
            continue

        shifted = None
        for j in undecided:
            j = int(j)
            ent = entries[j]
            piece: _Piece2D = ent[0]
            if shifted is None:
                kvq = cands.kappa_quad(i)
                shifted = clip.shifted_polygon(region, kvq)
            inter, outs = split_with(piece.poly, shifted)
            if inter is None:
                continue  # measure-zero overlap: bit stays 0, no split
            if not outs:
                if keep_ones:
                    ent[1] = (ent[1], i)
                ent[2] ^= d
                continue
            old_chain = ent[1]
            old_digest = ent[2]
            new_piece = _Piece2D(inter, clip)
            ent[0] = new_piece
            if keep_ones:
                ent[1] = (old_chain, i)
            ent[2] = old_digest ^ d
            maxd_mat[j] = new_piece.maxd
            mind_mat[j] = new_piece.mind
            for out_poly in outs:
                child = _Piece2D(out_poly, clip)
                ensure_cap(len(entries) + 1)
                maxd_mat[len(entries)] = child.maxd
                mind_mat[len(entries)] = child.mind
                entries.append([child, old_chain, old_digest])

    out = []
    for piece, chain, digest in entries:
        ones = None
        if keep_ones:
            acc = []
            node = chain
            while node is not None:
                node, idx = node[0], node[1]
                acc.append(idx)
            acc.reverse()
            ones = tuple(acc)
        out.append(PatchEntry(digest=digest, ones=ones, pieces=[piece.poly]))
    return out


def _decompose_interval_piece(spec, cands, r0: Interval, keep_ones: bool) -> list:
    region: Interval = spec.region
    entries = [[r0, None, 0]]
    digests = cands.digests
    for i in range(len(cands)):
        kv = cands.kappa_quad(i)[0]
        p1 = Interval(_max_q(region.lo, region.lo - kv), _min_q(region.hi, region.hi - kv))
        d = digests[i]
        if p1.is_empty():
            continue
        # shortcut against the R0 piece
        if (r0.lo - p1.lo).sign() >= 0 and (r0.hi - p1.hi).sign() <= 0:
            for ent in entries:
                ent[1] = (ent[1], i)
                ent[2] ^= d
            continue
        if (p1.hi - r0.lo).sign() <= 0 or (r0.hi - p1.lo).sign() <= 0:
            continue
        new_entries = []
        for ent in entries:
            piece: Interval = ent[0]
            inter = piece.intersect(p1)
            if inter is None:
                continue
            outs = piece.subtract(p1)
            ent[0] = inter
            ent[1] = (ent[1], i)
            ent[2] ^= d
            for out_piece in outs:
                new_entries.append([out_piece, ent[1][0], ent[2] ^ d])
        entries.extend(new_entries)
    out = []
    for piece, chain, digest in entries:
        ones = None
        if keep_ones:
            acc = []
            node = chain
            while node is not None:
                node, idx = node[0], node[1]
                acc.append(idx)
            acc.reverse()
            ones = tuple(acc)
        out.append(PatchEntry(digest=digest, ones=ones, pieces=[piece]))
    return out


def iter_patch_entries(spec, cands, pieces, keep_ones: bool = True) -> Iterator[PatchEntry]:
    """Stream PatchEntry objects per R0 piece (no cross-piece dedup)."""
    for r0 in pieces:
        if isinstance(r0, Interval):
            found = _decompose_interval_piece(spec, cands, r0, keep_ones)
        else:
            found = _decompose_polygon_piece(spec, cands, r0, keep_ones)
        for entry in found:
            yield entry


def enumerate_patches(
    spec,
    L,
    pieces=None,
    *,
    symmetry: bool = False,
    keep_ones: bool = True,
    cands=None,
) -> RegionDecomposition:
    """Enumerate all local patches at scale L over the given region pieces.

    `pieces` may be None (whole acceptance region, or the symmetry-reduced
    wedge when `symmetry`), an integer (that many parallel pieces), or an
    explicit list.  Entries with equal patch keys across pieces are merged.
    """
    from . import cutproject  # deferred: cutproject imports this module

    if cands is None:
        cands = cutproject.candidate_set(spec, L)
    base = symmetry_reduce(spec) if symmetry else spec.region
    if pieces is None:
        piece_list = [base]
    elif isinstance(pieces, int):
        piece_list = split_for_parallelism(base, pieces)
    else:
        piece_list = list(pieces)

    merged = {}
    order = []
    for entry in iter_patch_entries(spec, cands, piece_list, keep_ones=keep_ones):
        got = merged.get(entry.digest)
        if got is None:
            merged[entry.digest] = entry
            order.append(entry.digest)
        else:
            got.pieces.extend(entry.pieces)
            if got.ones is None:
                got.ones = entry.ones
    entries = []
    for digest in order:
        entry = merged[digest]
        key = cutproject.PatchKey(nbits=len(cands), digest=entry.digest, ones=entry.ones)
        entries.append((key, entry.pieces))
    return RegionDecomposition(
        spec_name=spec.name,
        L=Fraction(L),
        nbits=len(cands),
        entries=entries,
        source_pieces=piece_list,
    )


def symmetry_reduce(spec) -> Polygon:
    """Fundamental wedge R ∩ {x > 0, y > 0, y < x} of the octagon (AB only)."""
    if spec.name != "ab":
        raise ValueError("symmetry reduction is defined for the Ammann-Beenker spec")
    c = quad(Fraction(1, 2), Fraction(1, 2))  # (1+sqrt2)/2
    d = quad(Fraction(1, 2), Fraction(1, 4))  # (2+sqrt2)/4
    z = quad(0)
    h = quad(Fraction(1, 2))
    return Polygon(((z, z), (c, z), (c, h), (d, d)))


def split_for_parallelism(piece, count: int) -> list:
    """Interior-disjoint convex cover of `piece` by clipped grid cells."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if count == 1:
        return [piece]
    if isinstance(piece, Interval):
        cuts = [piece.lo + (piece.hi - piece.lo) * Fraction(j, count) for j in range(count + 1)]
        return [Interval(cuts[j], cuts[j + 1]) for j in range(count)]
    fv = piece.float_verts
    width = fv[:, 0].max() - fv[:, 0].min()
    height = fv[:, 1].max() - fv[:, 1].min()
    aspect = max(width / max(height, 1e-12), 1e-3)
    # cut denominators must stay small for the margin-quantum argument in
    # the enumeration classifier, so cap the grid resolution per axis
    gx = min(64, max(1, round((count * aspect) ** 0.5)))
    gy = min(64, max(1, -(-count // gx)))
    ring = piece.verts[0][0].ring
    xs = [v[0] for v in piece.verts]
    ys = [v[1] for v in piece.verts]
    xlo = min(xs)
    xhi = max(xs)
    ylo = min(ys)
    yhi = max(ys)
    one = quad(1, 0, ring)
    zero = quad(0, 0, ring)
    out = []
    for ix in range(gx):
        x0 = xlo + (xhi - xlo) * Fraction(ix, gx)
        x1 = xlo + (xhi - xlo) * Fraction(ix + 1, gx)
        col = piece.clip_halfplane(-one, zero, -x0)
        if col is None:
            continue
        col = col.clip_halfplane(one, zero, x1)
        if col is None:
            continue
        for iy in range(gy):
            y0 = ylo + (yhi - ylo) * Fraction(iy, gy)
            y1 = ylo + (yhi - ylo) * Fraction(iy + 1, gy)
            cell = col.clip_halfplane(zero, -one, -y0)
            if cell is None:
                continue
            cell = cell.clip_halfplane(zero, one, y1)
            if cell is None:
                continue
            out.append(cell)
    return out
