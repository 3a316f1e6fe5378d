"""Finite Hermitian Hamiltonians on realized quasicrystal patches.

Builders: the Hofstadter model and the p_x p_y superconductor on
Ammann-Beenker patches, and the Fibonacci chain on Z.  Site coordinates are
exact integer pairs (c0 + c1*omega)/scale; neighbor classification and all
box memberships are decided exactly, while matrix entries (phases, angles)
are evaluated in floating point from the exact coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .exactnum import PHI, SQRT2, QuadElem, quad
from .cutproject import CandidateSet, QuasicrystalSpec, sign_phi_pair, sign_sqrt2_pair
from .regions import Interval

__all__ = [
    "SiteSet",
    "HermitianSparse",
    "siteset_from_patch",
    "fib_window_siteset",
    "build_neighbors",
    "hofstadter",
    "pxpy",
    "fibonacci_letter",
    "fibonacci_hamiltonian",
    "letter_window_decomposition",
    "open_radius_int",
    "build_model",
]

_SQRT2_F = math.sqrt(2.0)
_PHI_F = (1.0 + math.sqrt(5.0)) / 2.0


def _pair_sign(ring: str, c0, c1):
    return sign_sqrt2_pair(c0, c1) if ring == SQRT2 else sign_phi_pair(c0, c1)


def _pair_square(ring: str, A, B):
    """Integer pair of (A + B*omega)^2."""
    if ring == SQRT2:
        return A * A + 2 * B * B, 2 * A * B
    return A * A + B * B, 2 * A * B + B * B


@dataclass
class SiteSet:
    """Ordered sites of one patch, centered at the origin.

    `pairs` holds exact coordinates as (n, d, 2) integer pairs over `scale`;
    `vectors` keeps the generating lattice vectors when the sites come from
    a cut-and-project patch (used by the unit-vector neighbor rule).
    """

    ring: str
    scale: int
    pairs: np.ndarray
    L: Fraction
    vectors: Optional[np.ndarray] = None

    def __post_init__(self):
        self._floats = None

    def __len__(self):
        return len(self.pairs)

    @property
    def dim(self) -> int:
        return self.pairs.shape[1]

    @property
    def floats(self) -> np.ndarray:
        if self._floats is None:
            w = _SQRT2_F if self.ring == SQRT2 else _PHI_F
            self._floats = (self.pairs[..., 0] + w * self.pairs[..., 1]) / self.scale
        return self._floats

    def coord_quad(self, i: int) -> tuple:
        return tuple(
            QuadElem(
                Fraction(int(p[0]), self.scale), Fraction(int(p[1]), self.scale), self.ring
            )
            for p in self.pairs[i]
        )

    def in_box(self, bound: Fraction, closed: bool) -> np.ndarray:
        """Exact mask of sites with ||x||_inf <= bound (closed) or < bound."""
        bound = Fraction(bound)
        num, den = bound.numerator, bound.denominator
        c0 = self.pairs[..., 0] * den
        c1 = self.pairs[..., 1] * den
        lim = num * self.scale
        su = _pair_sign(self.ring, c0 - lim, c1)
        sl = _pair_sign(self.ring, c0 + lim, c1)
        if closed:
            ok = (su <= 0) & (sl >= 0)
        else:
            ok = (su < 0) & (sl > 0)
        return ok.all(axis=-1)

    def translated(self, delta_pairs: np.ndarray) -> "SiteSet":
        return SiteSet(
            ring=self.ring,
            scale=self.scale,
            pairs=self.pairs + delta_pairs[None, :, :],
            L=self.L,
            vectors=self.vectors,
        )


def siteset_from_patch(
    spec: QuasicrystalSpec, cands: CandidateSet, ones, L=None
) -> SiteSet:
    """Site set of a realized patch: physical projections of the selected
    candidates (always contains the origin)."""
    idx = np.asarray(sorted(int(i) for i in ones), dtype=np.int64)
    return SiteSet(
        ring=spec.ring,
        scale=spec.coord_scale,
        pairs=cands.phys[idx].copy(),
        L=Fraction(L if L is not None else cands.L),
        vectors=cands.vectors[idx].copy(),
    )


def open_radius_int(L) -> int:
    """Largest integer strictly below L (integer window radius of B_L)."""
    L = Fraction(L)
    n = L.numerator // L.denominator
    return n - 1 if L == n else n


def fib_window_siteset(L) -> SiteSet:
    """Integer sites of B_L(0) on the Fibonacci chain."""
    W = open_radius_int(L)
    xs = np.arange(-W, W + 1, dtype=np.int64)
    pairs = np.zeros((len(xs), 1, 2), dtype=np.int64)
    pairs[:, 0, 0] = xs
    return SiteSet(ring=PHI, scale=1, pairs=pairs, L=Fraction(L))


# ---------------------------------------------------------------------------
# Neighbor classification
# ---------------------------------------------------------------------------


def build_neighbors(sites: SiteSet, rule: str = "metric") -> np.ndarray:
    """Unordered site pairs (i, j), i < j, that carry a hopping.

    rule="metric": squared Euclidean distance <= 1, decided exactly in the
    quadratic ring (boundary inclusive; covers the short rhombus diagonal).
    rule="graph": generating lattice vectors differ by a unit vector.

    Self-pairs are not listed; builders add diagonal terms themselves.
    """
    n = len(sites)
    if rule == "graph":
        if sites.vectors is None:
            raise ValueError("graph rule needs generating lattice vectors")
        lookup = {tuple(v): i for i, v in enumerate(sites.vectors.tolist())}
        pairs = []
        dim = sites.vectors.shape[1]
        for i, v in enumerate(sites.vectors.tolist()):
            for k in range(dim):
                for s in (1, -1):
                    w = list(v)
                    w[k] += s
                    j = lookup.get(tuple(w))
                    if j is not None and j > i:
                        pairs.append((i, j))
        return np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    if rule != "metric":
        raise ValueError(f"unknown neighbor rule {rule!r}")

    if n == 0:
        return np.empty((0, 2), dtype=np.int64)
    f = sites.floats
    if sites.dim == 1:
        order = np.argsort(f[:, 0], kind="stable")
        cand_i = []
        cand_j = []
        xs = f[order, 0]
        for k in range(len(order)):
            m = k + 1
            while m < len(order) and xs[m] - xs[k] <= 1.0 + 1e-9:
                cand_i.append(order[k])
                cand_j.append(order[m])
                m += 1
        ci = np.array(cand_i, dtype=np.int64)
        cj = np.array(cand_j, dtype=np.int64)
    else:
        cells = np.floor(f).astype(np.int64)
        buckets = {}
        for i, c in enumerate(map(tuple, cells)):
            buckets.setdefault(c, []).append(i)
        offsets = [(0, 0), (1, 0), (0, 1), (1, 1), (1, -1)]
        cand_i = []
        cand_j = []
        for cell, idx in buckets.items():
            for dx, dy in offsets:
                other = buckets.get((cell[0] + dx, cell[1] + dy))
                if other is None:
                    continue
                if (dx, dy) == (0, 0):
                    for a in range(len(idx)):
                        for b in range(a + 1, len(idx)):
                            cand_i.append(idx[a])
                            cand_j.append(idx[b])
                else:
                    for a in idx:
                        for b in other:
                            cand_i.append(a)
                            cand_j.append(b)
        ci = np.array(cand_i, dtype=np.int64)
        cj = np.array(cand_j, dtype=np.int64)

    if len(ci) == 0:
        return np.empty((0, 2), dtype=np.int64)
    diff = sites.pairs[ci] - sites.pairs[cj]  # (m, d, 2)
    P = np.zeros(len(ci), dtype=np.int64)
    Q = np.zeros(len(ci), dtype=np.int64)
    for c in range(diff.shape[1]):
        pc, qc = _pair_square(sites.ring, diff[:, c, 0], diff[:, c, 1])
        P += pc
        Q += qc
    # squared distance (P + Q*omega)/scale^2 <= 1
    s2 = sites.scale * sites.scale
    keep = _pair_sign(sites.ring, P - s2, Q) <= 0
    keep &= ~((P == 0) & (Q == 0))
    ci, cj = ci[keep], cj[keep]
    swap = ci > cj
    ci2 = np.where(swap, cj, ci)
    cj2 = np.where(swap, ci, cj)
    pairs = np.stack([ci2, cj2], axis=1)
    if len(pairs):
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    return pairs


def _pair_dets_float(sites: SiteSet, pairs: np.ndarray) -> np.ndarray:
    """det(x_i, x_j) for each pair, exact integer pair then float."""
    xi = sites.pairs[pairs[:, 0]]
    xj = sites.pairs[pairs[:, 1]]
    # det = x0*y1 - x1*y0 with coords (c0 + c1 w)/scale
    a0, a1 = xi[:, 0, 0], xi[:, 0, 1]
    b0, b1 = xi[:, 1, 0], xi[:, 1, 1]
    c0, c1 = xj[:, 0, 0], xj[:, 0, 1]
    d0, d1 = xj[:, 1, 0], xj[:, 1, 1]
    if sites.ring == SQRT2:
        # (a0+a1w)(d0+d1w) = a0d0 + 2 a1d1 + (a0d1 + a1d0) w
        P = a0 * d0 + 2 * a1 * d1 - (b0 * c0 + 2 * b1 * c1)
        Q = a0 * d1 + a1 * d0 - (b0 * c1 + b1 * c0)
        w = _SQRT2_F
    else:
        P = a0 * d0 + a1 * d1 - (b0 * c0 + b1 * c1)
        Q = a0 * d1 + a1 * d0 + a1 * d1 - (b0 * c1 + b1 * c0 + b1 * c1)
        w = _PHI_F
    return (P.astype(float) + w * Q.astype(float)) / (sites.scale * sites.scale)


@dataclass
class HermitianSparse:
    """Complex Hermitian sparse matrix over sites x internal dimension."""

    matrix: sp.csr_matrix
    blockdim: int
    hop_range: Fraction
    n_sites: int

    def __post_init__(self):
        self.assert_hermitian()

    def assert_hermitian(self, tol: float = 1e-14):
        delta = (self.matrix - self.matrix.getH()).tocoo()
        worst = np.abs(delta.data).max() if delta.nnz else 0.0
        if worst > tol:
            raise ValueError(f"matrix is not Hermitian (max |H - H^*| = {worst:.3e})")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dof_indices(self, site_mask: np.ndarray) -> np.ndarray:
        """Expand a boolean site mask to matrix row indices."""
        idx = np.nonzero(site_mask)[0]
        if self.blockdim == 1:
            return idx
        return (idx[:, None] * self.blockdim + np.arange(self.blockdim)[None, :]).ravel()


def hofstadter(
    sites: SiteSet, b: float, rule: str = "metric", include_diagonal: bool = False
) -> HermitianSparse:
    """Hofstadter Hamiltonian H_xy = exp(i b det(x, y)) on ||x-y||_2 <= 1.

    By default the formula is applied to distinct sites only (a hopping
    Hamiltonian); this is the convention that reproduces the known spectral
    gap at b = 1 around energy 1.5.  `include_diagonal` adds the x = y
    entries (all equal to 1, since det(x, x) = 0), which rigidly shifts the
    spectrum by +1.  Hopping range m = 1 in the infinity norm.
    """
    n = len(sites)
    pairs = build_neighbors(sites, rule=rule)
    dets = _pair_dets_float(sites, pairs)
    phases = np.exp(1j * b * dets)
    rows = [pairs[:, 0], pairs[:, 1]]
    cols = [pairs[:, 1], pairs[:, 0]]
    vals = [phases, np.conj(phases)]
    if include_diagonal:
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        vals.append(np.ones(n, dtype=complex))
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    return HermitianSparse(matrix=H, blockdim=1, hop_range=Fraction(1), n_sites=n)


_SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)


def pxpy(
    sites: SiteSet, t: float, delta: float, mu: float, rule: str = "metric"
) -> HermitianSparse:
    """p_x p_y superconductor: 2x2 blocks per site pair.

    H_xy = -t*s3 - (i/2)*Delta*(s1*cos(a_xy) + s2*sin(a_xy)) on edges with
    0 < ||x-y||_2 <= 1, H_xx = -mu*s3, where a_xy is the signed angle of the
    edge against the first axis.
    """
    n = len(sites)
    pairs = build_neighbors(sites, rule=rule)
    f = sites.floats
    rows = []
    cols = []
    vals = []

    def put_block(i, j, block):
        for r in range(2):
            for c in range(2):
                v = block[r, c]
                if v != 0:
                    rows.append(2 * i + r)
                    cols.append(2 * j + c)
                    vals.append(v)

    for i, j in pairs:
        d = f[j] - f[i]
        alpha = math.atan2(d[1], d[0])
        block = (
            -t * _SIGMA3
            - 0.5j * delta * (_SIGMA1 * math.cos(alpha) + _SIGMA2 * math.sin(alpha))
        )
        put_block(i, j, block)
        put_block(j, i, block.conj().T)
    diag = -mu * _SIGMA3
    for i in range(n):
        put_block(i, i, diag)
    H = sp.coo_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n)).tocsr()
    return HermitianSparse(matrix=H, blockdim=2, hop_range=Fraction(1), n_sites=n)


# ---------------------------------------------------------------------------
# Fibonacci chain
# ---------------------------------------------------------------------------

_THETA = quad(2, -1, PHI)  # 2 - phi, the rotation step of the letter orbit
_INV_PHI = quad(-1, 1, PHI)  # phi - 1 = 1/phi, the L-letter acceptance length


def _frac(x: QuadElem) -> QuadElem:
    return x - x.floor()


def fibonacci_letter(n: int) -> str:
    """Letter of the two-sided Fibonacci word at position n.

    Decided by the cut-and-project membership test: position n carries L
    exactly when frac((n+1)*(2-phi)) < 1/phi.  Matches the substitution
    fixed point L -> LS, S -> L with prefix "LSLLSLSL" at positions >= 0.
    """
    k = n + 1
    x = quad(2 * k, -k, PHI)
    return "L" if (_frac(x) - _INV_PHI).sign() < 0 else "S"


def fibonacci_letters(lo: int, hi: int) -> list:
    """Letters at positions lo..hi inclusive, via the exact orbit recursion.

    The base parameter advances by 2-phi (mod 1) per position, so after one
    exact anchor evaluation the remaining letters cost one comparison each.
    """
    out = []
    u = _frac(quad(2 * (lo + 1), -(lo + 1), PHI))
    one = quad(1, 0, PHI)
    for _ in range(lo, hi + 1):
        out.append("L" if (u - _INV_PHI).sign() < 0 else "S")
        u = u + _THETA
        if (u - one).sign() >= 0:
            u = u - one
    return out


def letter_at_parameter(u: QuadElem, j: int) -> str:
    """Letter at offset j for a chain whose base parameter is u in [0,1)."""
    x = _frac(u + _THETA * j)
    return "L" if (x - _INV_PHI).sign() < 0 else "S"


def fibonacci_hamiltonian(window, alpha: float, letters=None) -> HermitianSparse:
    """Tridiagonal Fibonacci Hamiltonian on an integer window [lo, hi].

    Diagonal alpha*f(x) with f(x) = 1 iff the letter at x is L; off-diagonal
    entries -1; hopping range m = 1.  `letters` overrides the two-sided
    Fibonacci word (used when certifying enumerated letter windows).
    """
    lo, hi = int(window[0]), int(window[1])
    if hi < lo:
        raise ValueError("empty window")
    n = hi - lo + 1
    if letters is None:
        letters = fibonacci_letters(lo, hi)
    if len(letters) != n:
        raise ValueError("letters length does not match window")
    diag = alpha * np.array([1.0 if ch == "L" else 0.0 for ch in letters])
    off = -np.ones(n - 1)
    H = sp.diags([off, diag, off], offsets=[-1, 0, 1], format="csr", dtype=complex)
    return HermitianSparse(matrix=H.tocsr(), blockdim=1, hop_range=Fraction(1), n_sites=n)


def _mod1_interval_pieces(lo: QuadElem, length: QuadElem):
    """[lo, lo+length) mod 1 as explicit half-open pieces inside [0, 1)."""
    zero = quad(0, 0, PHI)
    one = quad(1, 0, PHI)
    lo = _frac(lo)
    hi = lo + length
    if (hi - one).sign() <= 0:
        return [Interval(lo, hi)]
    return [Interval(lo, one), Interval(zero, hi - one)]


_WINDOW_CACHE: dict = {}


def letter_window_decomposition(L) -> list:
    """All letter windows of B_L(0) with their acceptance sub-intervals.

    The window around chain position x is determined by the base parameter
    u = frac((x+1)*(2-phi)); offset j carries letter L iff
    frac(u + j*(2-phi)) < 1/phi.  Splitting [0, 1) by these tests for all
    |j| <= W enumerates every window that occurs, each labeled by its
    letter string.  Returns a list of (letters, [Interval]) pairs.
    """
    key = Fraction(L)
    cached = _WINDOW_CACHE.get(key)
    if cached is not None:
        return cached
    W = open_radius_int(L)
    zero = quad(0, 0, PHI)
    one = quad(1, 0, PHI)
    entries = [([], [Interval(zero, one)])]
    for j in range(-W, W + 1):
        t_pieces = _mod1_interval_pieces(_frac(_THETA * (-j)), _INV_PHI)
        new_entries = []
        for letters, pieces in entries:
            in_pieces = []
            out_pieces = []
            for piece in pieces:
                for tp in t_pieces:
                    got = piece.intersect(tp)
                    if got is not None:
                        in_pieces.append(got)
                rem = [piece]
                for tp in t_pieces:
                    nxt = []
                    for r in rem:
                        nxt.extend(r.subtract(tp))
                    rem = nxt
                out_pieces.extend(rem)
            if in_pieces:
                new_entries.append((letters + ["L"], in_pieces))
            if out_pieces:
                new_entries.append((letters + ["S"], out_pieces))
        entries = new_entries
    merged = {}
    order = []
    for letters, pieces in entries:
        word = "".join(letters)
        if word not in merged:
            merged[word] = []
            order.append(word)
        merged[word].extend(pieces)
    out = [(word, merged[word]) for word in order]
    _WINDOW_CACHE[key] = out
    return out


def export_coo(H: HermitianSparse) -> list:
    """Matrix as (row, col, re, im) coordinate triplets for debugging."""
    coo = H.matrix.tocoo()
    return [
        (int(r), int(c), float(v.real), float(v.imag))
        for r, c, v in zip(coo.row, coo.col, coo.data)
    ]


# ---------------------------------------------------------------------------
# Model registry
# ---------------------------------------------------------------------------


def build_model(model_id: str, sites: SiteSet, params: dict) -> HermitianSparse:
    """Construct a model Hamiltonian on a site set from config parameters."""
    rule = params.get("rule", "metric")
    if model_id == "hofstadter":
        return hofstadter(
            sites,
            b=float(params["b"]),
            rule=rule,
            include_diagonal=bool(params.get("include_diagonal", False)),
        )
    if model_id == "pxpy":
        return pxpy(
            sites,
            t=float(params["t"]),
            delta=float(params["delta"]),
            mu=float(params["mu"]),
            rule=rule,
        )
    if model_id == "fibchain":
        W = open_radius_int(sites.L)
        letters = params.get("letters")
        return fibonacci_hamiltonian((-W, W), float(params["alpha"]), letters=letters)
    raise ValueError(f"unknown model {model_id!r}")
