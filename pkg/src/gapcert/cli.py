"""Command-line front end: patches, certify, scan, butterfly, decompose.

Configuration comes from a TOML file plus flag overrides; every output file
embeds the tool version and a hash of the resolved configuration (jobs and
output paths excluded, so reruns with different parallelism produce
byte-identical artifacts).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import multiprocessing as mp
import sys
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__, certifier, cutproject, models, regions

logger = logging.getLogger(__name__)

_MODEL_SPECS = {"hofstadter": "ab", "pxpy": "ab", "fibchain": "fibonacci"}


@dataclass
class RunConfig:
    """Resolved run configuration shared by all subcommands."""

    spec: str = "ab"
    model: str = "hofstadter"
    L: Fraction = Fraction(5)
    N: int = 2
    energy: Optional[float] = None
    seed: int = 0
    jobs: int = 1
    pieces: int = 1
    symmetry: bool = False
    t_max: int = 5
    a_radius: Optional[Fraction] = None
    m_tol: Optional[float] = None
    rule: str = "metric"
    model_params: dict = field(default_factory=dict)
    grid: Optional[tuple] = None  # (lo, hi, count)
    upper_n: Optional[int] = None
    certify_window: Optional[tuple] = None
    energy_L: dict = field(default_factory=dict)
    b_grid: Optional[tuple] = None
    patch_L: Fraction = Fraction(30)
    kde_bandwidth: float = 0.1
    energy_grid_n: int = 600
    keys: Optional[bool] = None
    out: Optional[str] = None

    def validate(self):
        if self.spec not in ("ab", "fibonacci"):
            raise ValueError(f"unknown spec {self.spec!r}")
        want = _MODEL_SPECS.get(self.model)
        if want is None:
            raise ValueError(f"unknown model {self.model!r}")
        if want != self.spec:
            raise ValueError(f"model {self.model!r} requires spec {want!r}")
        if self.jobs < 1 or self.pieces < 1:
            raise ValueError("jobs and pieces must be >= 1")
        if self.symmetry and self.spec != "ab":
            raise ValueError("symmetry reduction is only defined for the ab spec")

    def resolved_model_params(self) -> dict:
        out = dict(self.model_params)
        out.setdefault("rule", self.rule)
        return out

    def hash_dict(self) -> dict:
        d = asdict(self)
        d.pop("jobs", None)
        d.pop("out", None)
        d["L"] = str(self.L)
        d["patch_L"] = str(self.patch_L)
        d["a_radius"] = None if self.a_radius is None else str(self.a_radius)
        d["energy_L"] = {str(k): str(v) for k, v in self.energy_L.items()}
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.hash_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def cert_params(self, lam: float) -> certifier.CertParams:
        return certifier.CertParams(
            L=self.L,
            N=self.N,
            lam=lam,
            t_max=self.t_max,
            seed=self.seed,
            a_radius=self.a_radius,
            m_tol=self.m_tol,
        )


def _parse_range(text: str) -> tuple:
    lo, hi, n = text.split(":")
    return (float(lo), float(hi), int(n))


def load_config(path: Optional[str], args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if path:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        run = data.get("run", {})
        for key in ("spec", "model", "N", "seed", "jobs", "pieces", "symmetry", "t_max", "rule"):
            if key in run:
                setattr(cfg, key, run[key])
        if "L" in run:
            cfg.L = Fraction(str(run["L"]))
        if "a_radius" in run:
            cfg.a_radius = Fraction(str(run["a_radius"]))
        if "m_tol" in run:
            cfg.m_tol = float(run["m_tol"])
        cfg.model_params.update(data.get("model", {}))
        cert = data.get("certify", {})
        if "energy" in cert:
            cfg.energy = float(cert["energy"])
        scan = data.get("scan", {})
        if "grid" in scan:
            cfg.grid = _parse_range(scan["grid"])
        if "upper_n" in scan:
            cfg.upper_n = int(scan["upper_n"])
        if "certify_lo" in scan and "certify_hi" in scan:
            cfg.certify_window = (float(scan["certify_lo"]), float(scan["certify_hi"]))
        if "energy_L" in scan:
            cfg.energy_L = {float(k): Fraction(str(v)) for k, v in scan["energy_L"].items()}
        bf = data.get("butterfly", {})
        if "b_grid" in bf:
            cfg.b_grid = _parse_range(bf["b_grid"])
        if "patch_L" in bf:
            cfg.patch_L = Fraction(str(bf["patch_L"]))
        if "kde_bandwidth" in bf:
            cfg.kde_bandwidth = float(bf["kde_bandwidth"])
        if "energy_grid_n" in bf:
            cfg.energy_grid_n = int(bf["energy_grid_n"])
        out = data.get("output", {})
        if "out" in out:
            cfg.out = out["out"]

    for key in ("spec", "model", "seed", "jobs", "pieces", "t_max", "rule", "out"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "L", None) is not None:
        cfg.L = Fraction(str(args.L))
    if getattr(args, "N", None) is not None:
        cfg.N = int(args.N)
    if getattr(args, "energy", None) is not None:
        cfg.energy = float(args.energy)
    if getattr(args, "symmetry", False):
        cfg.symmetry = True
    if getattr(args, "a_radius", None) is not None:
        cfg.a_radius = Fraction(str(args.a_radius))
    if getattr(args, "m_tol", None) is not None:
        cfg.m_tol = float(args.m_tol)
    if getattr(args, "grid", None) is not None:
        cfg.grid = _parse_range(args.grid)
    if getattr(args, "upper_n", None) is not None:
        cfg.upper_n = int(args.upper_n)
    if getattr(args, "b_grid", None) is not None:
        cfg.b_grid = _parse_range(args.b_grid)
    if getattr(args, "patch_L", None) is not None:
        cfg.patch_L = Fraction(str(args.patch_L))
    if getattr(args, "keys", None) is not None:
        cfg.keys = args.keys
    for name in ("b", "alpha", "t", "delta", "mu"):
        val = getattr(args, name, None)
        if val is not None:
            cfg.model_params["delta" if name == "delta" else name] = float(val)
    if getattr(args, "include_diagonal", False):
        cfg.model_params["include_diagonal"] = True
    cfg.validate()
    return cfg


def _canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_json(path: Optional[str], payload: dict) -> str:
    text = _canonical_json(payload)
    if path:
        Path(path).write_text(text + "\n")
    return text


# ---------------------------------------------------------------------------
# patches
# ---------------------------------------------------------------------------


def cmd_patches(cfg: RunConfig) -> int:
    spec = cutproject.get_spec(cfg.spec)
    cands = cutproject.candidate_set(spec, cfg.L)
    keep_keys = cfg.keys if cfg.keys is not None else len(cands) <= 5000
    dec = regions.enumerate_patches(
        spec, cfg.L, pieces=cfg.pieces if cfg.pieces > 1 else None,
        symmetry=cfg.symmetry, keep_ones=keep_keys, cands=cands,
    )
    payload = {
        "kind": "patch_catalog",
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "spec": cfg.spec,
        "L": str(cfg.L),
        "symmetry": cfg.symmetry,
        "count": len(dec),
        "n_candidates": len(cands),
        "candidates": [list(map(int, v)) for v in cands.vectors] if keep_keys else None,
        "keys": sorted(k.to_hex() for k, _ in dec.entries) if keep_keys else None,
        "key_hashes": sorted(f"{k.digest:032x}" for k, _ in dec.entries),
    }
    write_json(cfg.out, payload)
    print(len(dec))
    return 0


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------


def _certify_worker(payload):
    cfg_dict, piece_indices = payload
    cfg = _cfg_from_dict(cfg_dict)
    spec = cutproject.get_spec(cfg.spec)
    params = cfg.cert_params(cfg.energy)
    base = regions.symmetry_reduce(spec) if cfg.symmetry else spec.region
    pieces = regions.split_for_parallelism(base, cfg.pieces)
    my_pieces = [pieces[i] for i in piece_indices]
    d = spec.physical_dim
    cands = cutproject.candidate_set(spec, params.L)
    records = []
    failure = None
    order = 0
    for pi, piece in zip(piece_indices, my_pieces):
        for entry in regions.iter_patch_entries(spec, cands, [piece], keep_ones=True):
            order += 1
            sites = models.siteset_from_patch(spec, cands, entry.ones, params.L)
            H = models.build_model(cfg.model, sites, cfg.resolved_model_params())
            cert, attempts = certifier.certify_patch(H, sites, params, d, entry.digest)
            if cert is None:
                failure = ((pi, order), entry.digest, attempts, order)
                return records, failure
            records.append(cert)
    return records, failure


def _cfg_from_dict(d: dict) -> RunConfig:
    cfg = RunConfig()
    for k, v in d.items():
        setattr(cfg, k, v)
    return cfg


def _cfg_to_dict(cfg: RunConfig) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


def cmd_certify(cfg: RunConfig) -> int:
    if cfg.energy is None:
        raise ValueError("certify requires --energy")
    spec = cutproject.get_spec(cfg.spec)
    params = cfg.cert_params(cfg.energy)
    d = spec.physical_dim

    if cfg.model == "fibchain" or cfg.jobs == 1:
        result = certifier.certify_gap(
            spec, cfg.model, cfg.resolved_model_params(), params,
            symmetry=cfg.symmetry,
            pieces=cfg.pieces if cfg.pieces > 1 else None,
        )
        if isinstance(result, certifier.FailureReport):
            payload = result.to_json_dict()
            payload.update(version=__version__, config_hash=cfg.config_hash())
            write_json(cfg.out, payload)
            print("FAIL: no gap could be proven", file=sys.stderr)
            return 1
        cert = result
    else:
        chunks = [list(range(i, cfg.pieces, cfg.jobs)) for i in range(cfg.jobs)]
        cfg_dict = _cfg_to_dict(cfg)
        with mp.get_context("fork").Pool(cfg.jobs) as pool:
            parts = pool.map(_certify_worker, [(cfg_dict, c) for c in chunks if c])
        failures = [f for _, f in parts if f is not None]
        if failures:
            _, digest, attempts, n = min(failures, key=lambda f: f[0])
            report = certifier.FailureReport(
                spec_name=cfg.spec, model_id=cfg.model, lam=cfg.energy,
                failed_digest=digest, attempts=attempts, n_checked=n,
                meta={"symmetry": cfg.symmetry},
            )
            payload = report.to_json_dict()
            payload.update(version=__version__, config_hash=cfg.config_hash())
            write_json(cfg.out, payload)
            print("FAIL: no gap could be proven", file=sys.stderr)
            return 1
        by_digest = {}
        for records, _ in parts:
            for c in records:
                by_digest.setdefault(c.digest, c)
        records = [by_digest[k] for k in sorted(by_digest)]
        eps_min = min(c.eps for c in records)
        implied_C = max((c.D + eps_min * c.M) ** 2 for c in records)
        cert = certifier.GapCertificate(
            spec_name=cfg.spec, model_id=cfg.model,
            model_params=cfg.resolved_model_params(),
            L=params.L, N=params.N, lam=cfg.energy, r=params.r, m=params.m,
            seed=cfg.seed, t_max=cfg.t_max, symmetry=cfg.symmetry,
            eps_min=eps_min, n_patches=len(records), patches=records,
            implied_C=implied_C,
        )

    cert.patches.sort(key=lambda c: c.digest)
    payload = cert.to_json_dict()
    payload.update(version=__version__, config_hash=cfg.config_hash())
    write_json(cfg.out, payload)
    print(f"OK: gap of half-width {cert.eps_min:.6g} at energy {cfg.energy}")
    return 0


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------


def cmd_scan(cfg: RunConfig) -> int:
    if cfg.grid is None:
        raise ValueError("scan requires --grid lo:hi:count")
    lo, hi, n = cfg.grid
    energies = list(np.linspace(lo, hi, n))
    spec = cutproject.get_spec(cfg.spec)
    params = cfg.cert_params(energies[0])
    scan = certifier.scan_energies(
        spec, cfg.model, cfg.resolved_model_params(), params, energies,
        symmetry=cfg.symmetry,
        pieces=cfg.pieces if cfg.pieces > 1 else None,
        upper_n=cfg.upper_n,
        certify_window=cfg.certify_window,
        energy_L=cfg.energy_L or None,
        progress=lambda msg: print(msg, file=sys.stderr),
    )
    lines = [
        f"# gapcert scan v{__version__} config={cfg.config_hash()}",
        f"# spec={cfg.spec} model={cfg.model} L={cfg.L} N={cfg.N}",
    ]
    best = None
    for row in scan.rows:
        if row.certified and (best is None or row.lower > best[1]):
            best = (row.energy, row.lower)
    if best is not None:
        ext = certifier.gap_extent(scan, best[0])
        lines.append(
            "# gap_extent "
            + _canonical_json(
                {
                    "center": best[0],
                    "inner": list(ext.inner),
                    "outer": list(ext.outer),
                }
            )
        )
    lines.append("energy,energy_hex,lower,lower_hex,upper,upper_hex,certified")
    for row in scan.rows:
        lines.append(
            f"{row.energy!r},{float(row.energy).hex()},{row.lower!r},"
            f"{float(row.lower).hex()},{row.upper!r},{float(row.upper).hex()},"
            f"{str(row.certified).lower()}"
        )
    text = "\n".join(lines) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# butterfly
# ---------------------------------------------------------------------------


def kde_gap_candidates(eigs: np.ndarray, bandwidth: float, n_grid: int = 600):
    """Interior local minima of a Gaussian KDE of the eigenvalue cloud."""
    eigs = np.sort(np.asarray(eigs, dtype=float))
    grid = np.linspace(eigs[0], eigs[-1], n_grid)
    dens = np.exp(-0.5 * ((grid[:, None] - eigs[None, :]) / bandwidth) ** 2).mean(axis=1)
    dens /= bandwidth * math.sqrt(2 * math.pi)
    out = []
    for i in range(1, len(grid) - 1):
        if dens[i] < dens[i - 1] and dens[i] <= dens[i + 1]:
            out.append(float(grid[i]))
    return out, grid, dens


def cmd_butterfly(cfg: RunConfig) -> int:
    if cfg.b_grid is None:
        raise ValueError("butterfly requires --b-grid lo:hi:count")
    if cfg.model != "hofstadter":
        raise ValueError("butterfly is defined for the hofstadter model")
    spec = cutproject.get_spec(cfg.spec)
    cands = cutproject.candidate_set(spec, cfg.patch_L)
    zero = tuple(cutproject.QuadElem(0, 0, spec.ring) for _ in range(2))
    key, _ = cutproject.realize_patch(spec, cands, zero)
    sites = models.siteset_from_patch(spec, cands, key.ones, cfg.patch_L)
    lo, hi, n = cfg.b_grid
    bs = np.linspace(lo, hi, n)
    cloud_lines = ["b,energy"]
    cand_lines = ["b,energy"]
    n_candidates = 0
    mp_params = cfg.resolved_model_params()
    for b in bs:
        mp_b = dict(mp_params)
        mp_b["b"] = float(b)
        H = models.build_model("hofstadter", sites, mp_b)
        eigs = np.linalg.eigvalsh(H.matrix.toarray())
        for e in eigs:
            cloud_lines.append(f"{float(b)!r},{float(e)!r}")
        minima, _, _ = kde_gap_candidates(eigs, cfg.kde_bandwidth, cfg.energy_grid_n)
        for lam in minima:
            cand_lines.append(f"{float(b)!r},{lam!r}")
            n_candidates += 1
    header = (
        f"# gapcert butterfly v{__version__} config={cfg.config_hash()} "
        f"patch_L={cfg.patch_L} sites={len(sites)} bandwidth={cfg.kde_bandwidth}\n"
    )
    if cfg.out:
        Path(cfg.out).write_text(header + "\n".join(cand_lines) + "\n")
        cloud_path = str(cfg.out) + ".cloud.csv"
        Path(cloud_path).write_text(header + "\n".join(cloud_lines) + "\n")
    else:
        sys.stdout.write(header + "\n".join(cand_lines) + "\n")
    print(f"{n_candidates} gap candidates over {len(bs)} field values", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------


def cmd_decompose(cfg: RunConfig) -> int:
    if cfg.spec != "ab":
        raise ValueError("decompose requires the ab spec")
    if cfg.energy is None:
        raise ValueError("decompose requires --energy")
    spec = cutproject.get_spec(cfg.spec)
    params = cfg.cert_params(cfg.energy)
    d = spec.physical_dim
    cands = cutproject.candidate_set(spec, cfg.L)
    dec = regions.enumerate_patches(
        spec, cfg.L, pieces=cfg.pieces if cfg.pieces > 1 else None,
        symmetry=cfg.symmetry, cands=cands,
    )
    entries = []
    for key, pieces in dec.entries:
        sites = models.siteset_from_patch(spec, cands, key.ones, cfg.L)
        H = models.build_model(cfg.model, sites, cfg.resolved_model_params())
        A_mask, _ = certifier.choose_A_variants(sites, params, 1, key.digest)
        try:
            system = certifier.PatchSystem(H, sites, A_mask, params)
            D, _ = certifier.compute_D(system, d)
            log10_D = math.log10(D) if D > 0 else None
        except certifier.NearSingularError:
            D, log10_D = None, None
        entries.append(
            {
                "key": f"{key.digest:032x}",
                "pieces": [
                    {
                        "vertices_exact": [
                            [c.as_pair_str() for c in v] for v in piece.verts
                        ],
                        "vertices_float": [
                            [v[0].to_float(), v[1].to_float()] for v in piece.verts
                        ],
                    }
                    for piece in pieces
                ],
                "D": D,
                "D_hex": float(D).hex() if D is not None else None,
                "log10_D": log10_D,
            }
        )
    payload = {
        "kind": "region_decomposition",
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "spec": cfg.spec,
        "model": cfg.model,
        "model_params": certifier._jsonable(cfg.resolved_model_params()),
        "L": str(cfg.L),
        "N": cfg.N,
        "lambda": cfg.energy,
        "symmetry": cfg.symmetry,
        "count": len(entries),
        "entries": entries,
    }
    write_json(cfg.out, payload)
    print(len(entries))
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gapcert", description=__doc__)
    ap.add_argument("--config", help="TOML configuration file")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", choices=("ab", "fibonacci"))
    common.add_argument("--model", choices=("hofstadter", "pxpy", "fibchain"))
    common.add_argument("--L", type=str)
    common.add_argument("--N", type=int)
    common.add_argument("--energy", type=float)
    common.add_argument("--b", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--t", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--mu", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--pieces", type=int)
    common.add_argument("--symmetry", action="store_true")
    common.add_argument("--rule", choices=("metric", "graph"))
    common.add_argument("--include-diagonal", action="store_true", dest="include_diagonal")
    common.add_argument("--tmax", type=int, dest="t_max")
    common.add_argument("--a-radius", type=str, dest="a_radius")
    common.add_argument("--m-tol", type=float, dest="m_tol")
    common.add_argument("--out", type=str)
    sub.add_parser("patches", parents=[common]).add_argument(
        "--keys", action=argparse.BooleanOptionalAction
    )
    sub.add_parser("certify", parents=[common])
    p_scan = sub.add_parser("scan", parents=[common])
    p_scan.add_argument("--grid", type=str)
    p_scan.add_argument("--upper-n", type=int, dest="upper_n")
    p_bf = sub.add_parser("butterfly", parents=[common])
    p_bf.add_argument("--b-grid", type=str, dest="b_grid")
    p_bf.add_argument("--patch-L", type=str, dest="patch_L")
    sub.add_parser("decompose", parents=[common])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    cfg = load_config(args.config, args)
    handlers = {
        "patches": cmd_patches,
        "certify": cmd_certify,
        "scan": cmd_scan,
        "butterfly": cmd_butterfly,
        "decompose": cmd_decompose,
    }
    return handlers[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
