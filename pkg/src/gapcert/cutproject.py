"""Cut-and-project quasicrystal specifications and candidate enumeration.

Two quasicrystals ship: the Ammann-Beenker tiling (Z^4 -> R^2, ring sqrt2,
octagonal acceptance region) and the Fibonacci chain (Z^2 -> R, ring phi,
acceptance interval [0, 1)).

Projected coordinates of integer lattice vectors always take the form
(c0 + c1*omega)/scale with integer c0, c1 and a fixed small scale, so bulk
geometric predicates are evaluated exactly with vectorized int64 arithmetic.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .exactnum import PHI, SQRT2, QuadElem, quad
from .regions import Interval, Polygon

logger = logging.getLogger(__name__)

__all__ = [
    "QuasicrystalSpec",
    "CandidateSet",
    "PatchKey",
    "LatticeSymmetry",
    "ammann_beenker",
    "fibonacci",
    "candidate_set",
    "realize_patch",
    "sample_patches_bruteforce",
    "ab_symmetries",
    "get_spec",
]

_SQRT2_F = math.sqrt(2.0)
_SQRT5_F = math.sqrt(5.0)


def _sign_pair(c0, c1, k: int):
    """Vectorized exact sign of c0 + c1*sqrt(k) for integer arrays."""
    c0 = np.asarray(c0, dtype=np.int64)
    c1 = np.asarray(c1, dtype=np.int64)
    s0 = np.sign(c0)
    s1 = np.sign(c1)
    d = c0 * c0 - k * c1 * c1
    # equal (or one zero) signs decide immediately; else the larger square wins
    out = np.where(
        s0 == s1,
        s0,
        np.where(
            s0 == 0,
            s1,
            np.where(s1 == 0, s0, np.where(d > 0, s0, np.where(d < 0, s1, 0))),
        ),
    )
    return out


def sign_sqrt2_pair(c0, c1):
    """Exact sign of c0 + c1*sqrt(2), elementwise over int arrays."""
    return _sign_pair(c0, c1, 2)


def sign_phi_pair(c0, c1):
    """Exact sign of c0 + c1*phi = ((2*c0 + c1) + c1*sqrt(5))/2, elementwise."""
    c0 = np.asarray(c0, dtype=np.int64)
    c1 = np.asarray(c1, dtype=np.int64)
    return _sign_pair(2 * c0 + c1, c1, 5)


def _pair_sign(ring: str, c0, c1):
    return sign_sqrt2_pair(c0, c1) if ring == SQRT2 else sign_phi_pair(c0, c1)


def _pair_float(ring: str, c0, c1, scale: int):
    w = _SQRT2_F if ring == SQRT2 else (1.0 + _SQRT5_F) / 2.0
    return (np.asarray(c0, dtype=np.float64) + w * np.asarray(c1, dtype=np.float64)) / scale


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuasicrystalSpec:
    """A cut-and-project quasicrystal definition.

    `p` and `kappa` are the physical and internal projections as nested
    tuples of QuadElem; `t` is the right-inverse helper with kappa@t = 0 and
    p@t = pt_scale * Identity.  `region` is the acceptance region (Polygon
    for d=2, half-open Interval for d=1) and `region_double` its Minkowski
    difference R + (-R) used to gate candidates.  Projected lattice
    coordinates are integer pairs over `coord_scale`.
    """

    name: str
    lattice_dim: int
    physical_dim: int
    ring: str
    p: tuple
    kappa: tuple
    t: tuple
    pt_scale: QuadElem
    region: object
    region_double: object
    covering_radius: Fraction
    coord_scale: int

    def __post_init__(self):
        self._check_projections()

    def _check_projections(self):
        n, d = self.lattice_dim, self.physical_dim
        zero = quad(0, 0, self.ring)
        # kappa t = 0 and p t = pt_scale * I, exactly
        for i in range(n - d):
            for j in range(d):
                acc = zero
                for k in range(n):
                    acc = acc + self.kappa[i][k] * self.t[k][j]
                if not acc.is_zero():
                    raise ValueError("kappa @ t != 0")
        for i in range(d):
            for j in range(d):
                acc = zero
                for k in range(n):
                    acc = acc + self.p[i][k] * self.t[k][j]
                want = self.pt_scale if i == j else zero
                if not (acc - want).is_zero():
                    raise ValueError("p @ t != pt_scale * I")
        # rows of p orthogonal to rows of kappa
        for prow in self.p:
            for krow in self.kappa:
                acc = zero
                for k in range(n):
                    acc = acc + prow[k] * krow[k]
                if not acc.is_zero():
                    raise ValueError("ker(p) and ker(kappa) are not orthogonal")

    # -- integer-pair coordinates ------------------------------------------
    def phys_pairs(self, vecs: np.ndarray) -> np.ndarray:
        """Physical projection of integer vectors as (..., d, 2) int64 pairs."""
        raise NotImplementedError

    def kappa_pairs(self, vecs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def pair_quad(self, pair) -> QuadElem:
        c0, c1 = int(pair[0]), int(pair[1])
        return QuadElem(
            Fraction(c0, self.coord_scale), Fraction(c1, self.coord_scale), self.ring
        )

    def pairs_float(self, pairs: np.ndarray) -> np.ndarray:
        return _pair_float(self.ring, pairs[..., 0], pairs[..., 1], self.coord_scale)

    def in_open_box(self, pairs: np.ndarray, bound: Fraction) -> np.ndarray:
        """Exact test ||x||_inf < bound for (..., d, 2) integer pairs."""
        num, den = bound.numerator, bound.denominator
        c0 = pairs[..., 0] * den
        c1 = pairs[..., 1] * den
        lim = num * self.coord_scale
        below = _pair_sign(self.ring, c0 - lim, c1) < 0
        above = _pair_sign(self.ring, c0 + lim, c1) > 0
        return np.logical_and(below, above).all(axis=-1)

    def kappa_accepts(self, pairs: np.ndarray, doubled: bool = False) -> np.ndarray:
        raise NotImplementedError

    def kappa_on_boundary(self, pairs: np.ndarray, doubled: bool = False) -> np.ndarray:
        raise NotImplementedError


class _ABSpec(QuasicrystalSpec):
    # Octagon edge tests: |x| <= c, |y| <= c, |x+y| <= e, |x-y| <= e with
    # c = (1+sqrt2)/2, e = (2+sqrt2)/2, all scaled by 2 for kappa pairs.

    def phys_pairs(self, vecs: np.ndarray) -> np.ndarray:
        v = np.asarray(vecs, dtype=np.int64)
        out = np.empty(v.shape[:-1] + (2, 2), dtype=np.int64)
        out[..., 0, 0] = 2 * v[..., 0]
        out[..., 0, 1] = v[..., 1] - v[..., 3]
        out[..., 1, 0] = 2 * v[..., 2]
        out[..., 1, 1] = v[..., 1] + v[..., 3]
        return out

    def kappa_pairs(self, vecs: np.ndarray) -> np.ndarray:
        v = np.asarray(vecs, dtype=np.int64)
        out = np.empty(v.shape[:-1] + (2, 2), dtype=np.int64)
        out[..., 0, 0] = 2 * v[..., 0]
        out[..., 0, 1] = v[..., 3] - v[..., 1]
        out[..., 1, 0] = -2 * v[..., 2]
        out[..., 1, 1] = v[..., 1] + v[..., 3]
        return out

    @staticmethod
    def _octagon_margins(pairs: np.ndarray, factor: int):
        # coordinates are (c0 + c1*sqrt2)/2; octagon edge offsets scale with
        # factor: axis edges factor*(1+sqrt2)/2, diagonal edges factor*(2+sqrt2)/2
        x0, x1 = pairs[..., 0, 0], pairs[..., 0, 1]
        y0, y1 = pairs[..., 1, 0], pairs[..., 1, 1]
        margins = []
        ca0, ca1 = factor, factor  # 2 * factor*(1+sqrt2)/2 = factor*(1 + sqrt2)
        cd0, cd1 = 2 * factor, factor  # 2 * factor*(2+sqrt2)/2
        for u0, u1 in ((x0, x1), (y0, y1)):
            margins.append((ca0 - u0, ca1 - u1))
            margins.append((ca0 + u0, ca1 + u1))
        for u0, u1 in ((x0 + y0, x1 + y1), (x0 - y0, x1 - y1)):
            margins.append((cd0 - u0, cd1 - u1))
            margins.append((cd0 + u0, cd1 + u1))
        return margins

    def kappa_accepts(self, pairs: np.ndarray, doubled: bool = False) -> np.ndarray:
        # closed octagon membership (R is treated as closed for AB)
        factor = 2 if doubled else 1
        ok = None
        for m0, m1 in self._octagon_margins(pairs, factor):
            cond = sign_sqrt2_pair(m0, m1) >= 0
            ok = cond if ok is None else np.logical_and(ok, cond)
        return ok

    def kappa_on_boundary(self, pairs: np.ndarray, doubled: bool = False) -> np.ndarray:
        factor = 2 if doubled else 1
        inside = self.kappa_accepts(pairs, doubled)
        on_edge = None
        for m0, m1 in self._octagon_margins(pairs, factor):
            cond = sign_sqrt2_pair(m0, m1) == 0
            on_edge = cond if on_edge is None else np.logical_or(on_edge, cond)
        return np.logical_and(inside, on_edge)


class _FibSpec(QuasicrystalSpec):
    def phys_pairs(self, vecs: np.ndarray) -> np.ndarray:
        v = np.asarray(vecs, dtype=np.int64)
        out = np.empty(v.shape[:-1] + (1, 2), dtype=np.int64)
        out[..., 0, 0] = v[..., 0]
        out[..., 0, 1] = v[..., 1]
        return out

    def kappa_pairs(self, vecs: np.ndarray) -> np.ndarray:
        v = np.asarray(vecs, dtype=np.int64)
        out = np.empty(v.shape[:-1] + (1, 2), dtype=np.int64)
        out[..., 0, 0] = v[..., 1]
        out[..., 0, 1] = -v[..., 0]
        return out

    def kappa_accepts(self, pairs: np.ndarray, doubled: bool = False) -> np.ndarray:
        c0, c1 = pairs[..., 0, 0], pairs[..., 0, 1]
        if doubled:
            # open interval (-1, 1)
            lo = sign_phi_pair(c0 + 1, c1) > 0
            hi = sign_phi_pair(c0 - 1, c1) < 0
        else:
            # half-open [0, 1)
            lo = sign_phi_pair(c0, c1) >= 0
            hi = sign_phi_pair(c0 - 1, c1) < 0
        return np.logical_and(lo, hi)

    def kappa_on_boundary(self, pairs: np.ndarray, doubled: bool = False) -> np.ndarray:
        # half-open conventions decide all ties exactly; nothing is ambiguous
        return np.zeros(pairs.shape[:-2], dtype=bool)


def _octagon_polygon(side_scale: int) -> Polygon:
    """Regular axis-aligned octagon centered at 0 with side length side_scale."""
    h = Fraction(side_scale, 2)  # half side
    a = Fraction(side_scale, 2)  # sqrt2-coefficient of the long offset
    # vertices CCW starting at (h + a*sqrt2? , ...): long offset = h + side_scale/sqrt2
    lo = quad(h, a)  # (side/2) + (side/2)*sqrt2 ... = side*(1+sqrt2)/2
    sh = quad(h, 0)
    z = quad(0, 0)
    verts = [
        (lo, sh),
        (sh, lo),
        (-sh, lo),
        (-lo, sh),
        (-lo, -sh),
        (-sh, -lo),
        (sh, -lo),
        (lo, -sh),
    ]
    _ = z
    return Polygon(tuple(verts))


def ammann_beenker() -> QuasicrystalSpec:
    """Ammann-Beenker tiling spec: Z^4 -> R^2, a = 1/sqrt2 = sqrt2/2."""
    a = quad(0, Fraction(1, 2))
    one = quad(1)
    zero = quad(0)
    p = ((one, a, zero, -a), (zero, a, one, a))
    kappa = ((one, -a, zero, a), (zero, a, -one, a))
    t = ((one, zero), (a, a), (zero, one), (-a, a))
    return _ABSpec(
        name="ab",
        lattice_dim=4,
        physical_dim=2,
        ring=SQRT2,
        p=p,
        kappa=kappa,
        t=t,
        pt_scale=quad(2),
        region=_octagon_polygon(1),
        region_double=_octagon_polygon(2),
        covering_radius=Fraction(1),
        coord_scale=2,
    )


def fibonacci() -> QuasicrystalSpec:
    """Fibonacci chain spec: Z^2 -> R, golden-ratio ring."""
    one = quad(1, 0, PHI)
    phi = quad(0, 1, PHI)
    p = ((one, phi),)
    kappa = ((-phi, one),)
    t = ((one,), (phi,))
    return _FibSpec(
        name="fibonacci",
        lattice_dim=2,
        physical_dim=1,
        ring=PHI,
        p=p,
        kappa=kappa,
        t=t,
        pt_scale=one + phi * phi,
        region=Interval(quad(0, 0, PHI), quad(1, 0, PHI)),
        region_double=Interval(quad(-1, 0, PHI), quad(1, 0, PHI)),
        covering_radius=Fraction(1),
        coord_scale=1,
    )


_SPECS = {"ab": ammann_beenker, "fibonacci": fibonacci}


def get_spec(name: str) -> QuasicrystalSpec:
    try:
        return _SPECS[name]()
    except KeyError:
        raise ValueError(f"unknown quasicrystal spec {name!r}") from None


# ---------------------------------------------------------------------------
# Candidate sets and patch keys
# ---------------------------------------------------------------------------


def _digest_vector(vec: Sequence[int], ring: str) -> int:
    h = hashlib.blake2b(
        (ring + ":" + ",".join(str(int(x)) for x in vec)).encode(), digest_size=16
    )
    return int.from_bytes(h.digest(), "big")


@dataclass(frozen=True)
class PatchKey:
    """Bit string over the candidate set, identified content-addressably.

    `digest` is the XOR of 128-bit hashes of the selected candidate vectors,
    so keys are comparable across runs and across candidate orderings.
    `ones` (indices of set bits in the canonical ordering) is kept when the
    enumeration retains explicit keys, and None in hash-only mode.
    """

    nbits: int
    digest: int
    ones: Optional[tuple] = None

    def __eq__(self, other):
        return (
            isinstance(other, PatchKey)
            and self.nbits == other.nbits
            and self.digest == other.digest
        )

    def __hash__(self):
        return hash((self.nbits, self.digest))

    def popcount(self) -> Optional[int]:
        return None if self.ones is None else len(self.ones)

    def to_hex(self) -> str:
        """Hex-encoded bit string (bit i = candidate i, little-endian bits)."""
        if self.ones is None:
            raise ValueError("hash-only PatchKey has no explicit bits")
        acc = 0
        for i in self.ones:
            acc |= 1 << i
        nbytes = (self.nbits + 7) // 8
        return acc.to_bytes(nbytes, "little").hex()

    @classmethod
    def from_hex(cls, hexstr: str, cands: "CandidateSet") -> "PatchKey":
        acc = int.from_bytes(bytes.fromhex(hexstr), "little")
        ones = tuple(i for i in range(len(cands)) if (acc >> i) & 1)
        return cls.from_ones(ones, cands)

    @classmethod
    def from_ones(cls, ones: Iterable[int], cands: "CandidateSet") -> "PatchKey":
        ones = tuple(sorted(int(i) for i in ones))
        digest = 0
        for i in ones:
            digest ^= cands.digests[i]
        return cls(nbits=len(cands), digest=digest, ones=ones)


@dataclass
class CandidateSet:
    """Ordered candidate vectors V_L with precomputed exact projections."""

    spec: QuasicrystalSpec
    L: Fraction
    vectors: np.ndarray  # (n, lattice_dim) int64, lexicographically sorted
    kappa: np.ndarray  # (n, n-d, 2) int64 pairs over coord_scale
    phys: np.ndarray  # (n, d, 2) int64 pairs over coord_scale
    digests: list

    def __len__(self):
        return len(self.vectors)

    def kappa_quad(self, i: int) -> tuple:
        return tuple(self.spec.pair_quad(p) for p in self.kappa[i])

    def phys_quad(self, i: int) -> tuple:
        return tuple(self.spec.pair_quad(p) for p in self.phys[i])

    def zero_index(self) -> int:
        idx = np.where((self.vectors == 0).all(axis=1))[0]
        if len(idx) != 1:
            raise RuntimeError("candidate set must contain the zero vector once")
        return int(idx[0])


def candidate_set(spec: QuasicrystalSpec, L) -> CandidateSet:
    """Enumerate V_L = { v in Z^n : p(v) in B_L(0), kappa(v) in R + (-R) }.

    Loop bounds follow the projection identities (scan a provably covering
    integer box, then filter exactly); ordering is lexicographic on the
    integer coordinates.
    """
    L = Fraction(L)
    if L <= 0:
        raise ValueError("L must be positive")
    Lf = float(L)
    if spec.name == "ab":
        s = (1.0 + _SQRT2_F) / 2.0
        w_hi = Lf / 2.0 + s
        a = _SQRT2_F / 2.0
        rows = []
        w_range = range(int(math.floor(-w_hi)) - 1, int(math.ceil(w_hi)) + 2)
        for v1 in w_range:
            for v3 in w_range:
                c2 = a * (v1 + v3)
                c4 = a * (v3 - v1)
                for v2 in range(int(math.floor(c2 - 2 * s)) - 1, int(math.ceil(c2 + 2 * s)) + 2):
                    for v4 in range(
                        int(math.floor(c4 - 2 * s)) - 1, int(math.ceil(c4 + 2 * s)) + 2
                    ):
                        rows.append((v1, v2, v3, v4))
        vecs = np.array(rows, dtype=np.int64)
    elif spec.name == "fibonacci":
        phi = (1.0 + _SQRT5_F) / 2.0
        v1_hi = (Lf + 1.0) / (1.0 + phi * phi)
        rows = []
        for v1 in range(int(math.floor(-v1_hi)) - 2, int(math.ceil(v1_hi)) + 3):
            c = phi * v1
            for v2 in range(int(math.floor(c - 1)) - 1, int(math.ceil(c + 1)) + 2):
                rows.append((v1, v2))
        vecs = np.array(rows, dtype=np.int64)
    else:  # pragma: no cover - only two specs ship
        raise ValueError(f"no candidate enumeration for spec {spec.name!r}")

    phys = spec.phys_pairs(vecs)
    kap = spec.kappa_pairs(vecs)
    keep = spec.in_open_box(phys, L) & spec.kappa_accepts(kap, doubled=True)
    vecs = vecs[keep]
    order = np.lexsort(tuple(vecs[:, k] for k in reversed(range(vecs.shape[1]))))
    vecs = np.ascontiguousarray(vecs[order])
    digests = [_digest_vector(v, spec.ring) for v in vecs]
    return CandidateSet(
        spec=spec,
        L=L,
        vectors=vecs,
        kappa=spec.kappa_pairs(vecs),
        phys=spec.phys_pairs(vecs),
        digests=digests,
    )


# ---------------------------------------------------------------------------
# Patch realization
# ---------------------------------------------------------------------------


def _bits_for_internal_pairs(cands: CandidateSet, k_pairs: np.ndarray):
    """Candidate bits for an internal lattice point given as integer pairs.

    Returns (bits, boundary) boolean arrays; boundary marks candidates whose
    shifted-region test hits the acceptance boundary exactly.
    """
    shifted = cands.kappa + k_pairs[None, :, :]
    bits = cands.spec.kappa_accepts(shifted, doubled=False)
    boundary = cands.spec.kappa_on_boundary(shifted, doubled=False)
    return bits, boundary


def realize_patch(spec: QuasicrystalSpec, cands: CandidateSet, k) -> tuple:
    """Realize the local patch for internal point k in R.

    k is a tuple of QuadElem (length n-d; a bare QuadElem is accepted for
    d=1 specs).  Returns (PatchKey, points) where points are the exact
    physical coordinates p(v_i) of the selected candidates.

    Raises ValueError if k lies outside the acceptance region.  Boundary
    hits of the per-candidate tests are logged (measure zero; never occurs
    for genuine lattice internal points).
    """
    if isinstance(k, QuadElem):
        k = (k,)
    k = tuple(k)
    if len(k) != spec.lattice_dim - spec.physical_dim:
        raise ValueError("internal point has wrong dimension")
    if not _region_contains(spec, k):
        raise ValueError("internal point outside acceptance region")

    scale = spec.coord_scale
    ints = []
    for comp in k:
        if comp.ring != spec.ring:
            raise ValueError("internal point in wrong ring")
        if scale % comp.den == 0:
            m = scale // comp.den
            ints.append((comp.an * m, comp.bn * m))
        else:
            ints = None
            break

    if ints is not None:
        k_pairs = np.array(ints, dtype=np.int64)
        bits, boundary = _bits_for_internal_pairs(cands, k_pairs)
        if boundary.any():
            logger.warning(
                "acceptance-boundary tie for %d candidate(s) at internal point %s",
                int(boundary.sum()),
                k,
            )
    else:
        bits = np.zeros(len(cands), dtype=bool)
        region = spec.region
        for i in range(len(cands)):
            kv = cands.kappa_quad(i)
            shifted = tuple(k[j] + kv[j] for j in range(len(k)))
            if spec.physical_dim == 1:
                bits[i] = region.contains(shifted[0])
            else:
                inside, on_bd = region.contains(shifted, report_boundary=True)
                bits[i] = inside
                if on_bd:
                    logger.warning(
                        "acceptance-boundary tie at candidate %d for %s", i, k
                    )

    ones = tuple(int(i) for i in np.nonzero(bits)[0])
    key = PatchKey.from_ones(ones, cands)
    points = [cands.phys_quad(i) for i in ones]
    return key, points


def _region_contains(spec: QuasicrystalSpec, k: tuple) -> bool:
    if spec.physical_dim == 1:
        return spec.region.contains(k[0])
    inside, _ = spec.region.contains(k, report_boundary=True)
    return inside


# ---------------------------------------------------------------------------
# Brute-force sampling oracle
# ---------------------------------------------------------------------------


def sample_lattice_point(spec: QuasicrystalSpec, rng: np.random.Generator, box: int = 10**4):
    """One random z in Z^n with kappa(z) in R, by rejection sampling."""
    if spec.name == "fibonacci":
        while True:
            z1 = int(rng.integers(-box, box + 1))
            if z1 == 0:
                z2 = 0
            else:
                # z2 = floor(z1*phi) + 1 puts kappa(z) = z2 - phi*z1 in (0,1)
                k5 = math.isqrt(5 * z1 * z1)
                if z1 < 0:
                    k5 = -k5 - 1
                z2 = (z1 + k5) // 2 + 1 if z1 != 0 else 0
            z = np.array([z1, z2], dtype=np.int64)
            if spec.kappa_accepts(spec.kappa_pairs(z[None, :]))[0]:
                return z
    a = _SQRT2_F / 2.0
    while True:
        z1 = int(rng.integers(-box, box + 1))
        z3 = int(rng.integers(-box, box + 1))
        z2 = int(round(a * (z1 + z3))) + int(rng.integers(-2, 3))
        z4 = int(round(a * (z3 - z1))) + int(rng.integers(-2, 3))
        z = np.array([z1, z2, z3, z4], dtype=np.int64)
        if spec.kappa_accepts(spec.kappa_pairs(z[None, :]))[0]:
            return z


def sample_patches_bruteforce(
    spec: QuasicrystalSpec,
    L,
    count: int,
    seed: int,
    cands: Optional[CandidateSet] = None,
) -> set:
    """Realize `count` patches at random lattice internal points.

    Deterministic given `seed`.  Samples whose candidate tests hit the
    acceptance boundary exactly are logged and redrawn (measure zero).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if cands is None:
        cands = candidate_set(spec, L)
    rng = np.random.default_rng(seed)
    keys = set()
    produced = 0
    while produced < count:
        z = sample_lattice_point(spec, rng)
        k_pairs = spec.kappa_pairs(z[None, :])[0]
        bits, boundary = _bits_for_internal_pairs(cands, k_pairs)
        if boundary.any():
            logger.warning("boundary tie during sampling at z=%s; sample excluded", z)
            continue
        ones = tuple(int(i) for i in np.nonzero(bits)[0])
        keys.add(PatchKey.from_ones(ones, cands))
        produced += 1
    return keys


# ---------------------------------------------------------------------------
# Lattice symmetries of the Ammann-Beenker construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeSymmetry:
    """Integer lattice map M with kappa(Mz) = K kappa(z), p(Mz) = P p(z)."""

    lattice: tuple  # 4x4 ints
    internal: tuple  # 2x2 QuadElem
    physical: tuple  # 2x2 QuadElem

    def map_vectors(self, vecs: np.ndarray) -> np.ndarray:
        m = np.array(self.lattice, dtype=np.int64)
        return np.asarray(vecs, dtype=np.int64) @ m.T

    def map_internal_quad(self, point: tuple) -> tuple:
        (k00, k01), (k10, k11) = self.internal
        return (k00 * point[0] + k01 * point[1], k10 * point[0] + k11 * point[1])


def ab_symmetries() -> list:
    """The 8 mirror/rotation symmetries used for wedge-reduced enumeration.

    These are the lattice automorphisms whose physical and internal actions
    both preserve infinity-norm boxes (rotations by multiples of 90 degrees
    and the axis/diagonal mirrors).
    """
    rho = np.array(
        [[0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]], dtype=np.int64
    )  # physical rot 45, internal rot 135
    sigma = np.array(
        [[1, 0, 0, 0], [0, 0, 0, -1], [0, 0, -1, 0], [0, -1, 0, 0]], dtype=np.int64
    )  # physical and internal mirror y -> -y
    rho2 = rho @ rho
    spec = ammann_beenker()

    def derive(m: np.ndarray, pairs_of) -> tuple:
        eye = np.eye(4, dtype=np.int64)
        src = pairs_of(eye)  # (4, 2, 2) pairs
        dst = pairs_of(eye @ m.T)
        srcf = _pair_float(SQRT2, src[..., 0], src[..., 1], 2)  # (4,2)
        dstf = _pair_float(SQRT2, dst[..., 0], dst[..., 1], 2)
        K, _, _, _ = np.linalg.lstsq(srcf, dstf, rcond=None)
        Kf = K.T  # dst = K @ src per column vector
        return tuple(tuple(_snap_quad(Kf[i, j]) for j in range(2)) for i in range(2))

    ops = []
    seen = set()
    group = [np.eye(4, dtype=np.int64)]
    # close <rho^2, sigma> under composition
    frontier = [np.eye(4, dtype=np.int64)]
    while frontier:
        nxt = []
        for g in frontier:
            for gen in (rho2, sigma):
                h = gen @ g
                key = h.tobytes()
                if key not in {x.tobytes() for x in group}:
                    group.append(h)
                    nxt.append(h)
        frontier = nxt
    assert len(group) == 8, f"expected 8 symmetries, got {len(group)}"
    for m in group:
        key = m.tobytes()
        if key in seen:
            continue
        seen.add(key)
        internal = derive(m, spec.kappa_pairs)
        physical = derive(m, spec.phys_pairs)
        ops.append(
            LatticeSymmetry(
                lattice=tuple(tuple(int(x) for x in row) for row in m),
                internal=internal,
                physical=physical,
            )
        )
    return ops


def _snap_quad(x: float) -> QuadElem:
    """Snap a float to the nearest element of {0, +-1, +-sqrt2/2, +-sqrt2, +-1/2}."""
    table = [
        quad(0),
        quad(1),
        quad(-1),
        quad(0, Fraction(1, 2)),
        quad(0, Fraction(-1, 2)),
        quad(0, 1),
        quad(0, -1),
        quad(Fraction(1, 2)),
        quad(Fraction(-1, 2)),
    ]
    for q in table:
        if abs(q.to_float() - x) < 1e-9:
            return q
    raise ValueError(f"cannot snap {x} to an exact symmetry entry")
