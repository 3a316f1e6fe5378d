import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from gapcert import cli


def run_cli(args, **kw):
    return subprocess.run(
        [sys.executable, "-m", "gapcert.cli", *args],
        capture_output=True, text=True, **kw,
    )


def test_patches_count_matches_window_oracle(tmp_path):
    out = tmp_path / "cat.json"
    res = run_cli(
        ["patches", "--spec", "fibonacci", "--model", "fibchain", "--L", "10",
         "--out", str(out)]
    )
    assert res.returncode == 0
    count = int(res.stdout.strip())
    payload = json.loads(out.read_text())
    assert payload["count"] == count
    from test_regions import fib_window_patch_count

    assert count == fib_window_patch_count(10)
    assert payload["keys"] and len(payload["keys"]) == count
    assert payload["config_hash"] and payload["version"]


def test_certify_exit_codes(tmp_path):
    ok = run_cli(
        ["certify", "--spec", "fibonacci", "--model", "fibchain", "--alpha", "1.0",
         "--L", "50", "--N", "6", "--energy", "-0.1",
         "--out", str(tmp_path / "cert.json")]
    )
    assert ok.returncode == 0 and "OK" in ok.stdout
    data = json.loads((tmp_path / "cert.json").read_text())
    assert data["kind"] == "gap_certificate" and data["eps_min"] > 0

    bad = run_cli(
        ["certify", "--spec", "fibonacci", "--model", "fibchain", "--alpha", "0.0",
         "--L", "20", "--N", "6", "--energy", "0.0",
         "--out", str(tmp_path / "fail.json")]
    )
    assert bad.returncode == 1
    data = json.loads((tmp_path / "fail.json").read_text())
    assert data["kind"] == "failure_report"


def test_certify_jobs_determinism(tmp_path):
    """Identical config and seed, jobs in {1, 4}: byte-identical artifacts."""
    outs = []
    for jobs in (1, 4, 4):
        out = tmp_path / f"ab_{jobs}_{len(outs)}.json"
        res = run_cli(
            ["certify", "--spec", "ab", "--model", "hofstadter", "--b", "1.0",
             "--L", "5", "--N", "2", "--energy", "1.5", "--seed", "11",
             "--pieces", "8", "--jobs", str(jobs), "--out", str(out)]
        )
        assert res.returncode == 1  # L = 3 cannot certify the gap
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]

    fib = []
    for rep in range(2):
        out = tmp_path / f"fib_{rep}.json"
        res = run_cli(
            ["certify", "--spec", "fibonacci", "--model", "fibchain",
             "--alpha", "1.0", "--L", "40", "--N", "6", "--energy", "-0.1",
             "--seed", "5", "--jobs", str(1 + 3 * rep), "--out", str(out)]
        )
        assert res.returncode == 0
        fib.append(out.read_bytes())
    assert fib[0] == fib[1]


def test_scan_csv_single_row(tmp_path):
    out = tmp_path / "scan.csv"
    res = run_cli(
        ["scan", "--spec", "fibonacci", "--model", "fibchain", "--alpha", "1.0",
         "--L", "50", "--N", "6", "--grid=-0.1:-0.1:1", "--upper-n", "100",
         "--out", str(out)]
    )
    assert res.returncode == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "energy,energy_hex,lower,lower_hex,upper,upper_hex,certified"
    assert len(lines) == 2
    fields = lines[1].split(",")
    assert fields[-1] == "true"
    assert float(fields[2]) <= float(fields[4]) + 1e-9
    assert float.fromhex(fields[3]) == float(fields[2])


def test_scan_rows_sorted_and_consistent(tmp_path):
    out = tmp_path / "scan.csv"
    res = run_cli(
        ["scan", "--spec", "fibonacci", "--model", "fibchain", "--alpha", "1.0",
         "--L", "30", "--N", "6", "--grid=-0.5:1.6:8", "--upper-n", "60",
         "--out", str(out)]
    )
    assert res.returncode == 0
    rows = [l.split(",") for l in out.read_text().splitlines() if l and not l.startswith("#") and not l.startswith("energy")]
    es = [float(r[0]) for r in rows]
    assert es == sorted(es)
    for r in rows:
        assert float(r[2]) <= float(r[4]) + 1e-9


def test_kde_candidates_two_clusters():
    eigs = np.concatenate([np.random.default_rng(0).normal(-2, 0.05, 200),
                           np.random.default_rng(1).normal(2, 0.05, 200)])
    minima, grid, dens = cli.kde_gap_candidates(eigs, bandwidth=0.1)
    assert len(minima) == 1
    assert abs(minima[0]) < 0.3


def test_butterfly_candidate_near_gap(tmp_path):
    out = tmp_path / "bf.csv"
    res = run_cli(
        ["butterfly", "--spec", "ab", "--model", "hofstadter",
         "--b-grid", "1.0:1.0:1", "--patch-L", "10", "--out", str(out)]
    )
    assert res.returncode == 0
    rows = [l.split(",") for l in out.read_text().splitlines()[2:]]
    cands = [float(r[1]) for r in rows]
    assert any(abs(c - 1.5) < 0.15 for c in cands)
    cloud = Path(str(out) + ".cloud.csv")
    assert cloud.exists() and len(cloud.read_text().splitlines()) > 100


def test_decompose_roundtrip(tmp_path):
    out = tmp_path / "dec.json"
    res = run_cli(
        ["decompose", "--spec", "ab", "--model", "hofstadter", "--b", "1.0",
         "--L", "5", "--N", "2", "--energy", "1.5", "--out", str(out)]
    )
    assert res.returncode == 0
    payload = json.loads(out.read_text())
    assert payload["kind"] == "region_decomposition"
    assert payload["count"] == int(res.stdout.strip())
    # round-trip: parse(emit(x)) == x
    text2 = json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
    assert text2 == out.read_text()
    # exact area sum: reconstruct vertices from the exact serialization
    from fractions import Fraction
    from gapcert.exactnum import QuadElem
    from gapcert.regions import Polygon
    from gapcert import cutproject as cp

    total = None
    for entry in payload["entries"]:
        for piece in entry["pieces"]:
            verts = [
                (QuadElem.from_pair_str(*v[0], "sqrt2"), QuadElem.from_pair_str(*v[1], "sqrt2"))
                for v in piece["vertices_exact"]
            ]
            area = Polygon(tuple(verts)).area()
            total = area if total is None else total + area
    assert (total - cp.ammann_beenker().region.area()).is_zero()
    assert all(e["D"] is None or e["D"] >= 0 for e in payload["entries"])


def test_config_file_and_overrides(tmp_path):
    cfgfile = tmp_path / "run.toml"
    cfgfile.write_text(
        """
[run]
spec = "fibonacci"
model = "fibchain"
L = 30
N = 6
seed = 3
[model]
alpha = 1.0
[certify]
energy = -0.1
"""
    )
    out = tmp_path / "c.json"
    res = run_cli(["--config", str(cfgfile), "certify", "--L", "40", "--out", str(out)])
    assert res.returncode == 0
    data = json.loads(out.read_text())
    assert data["L"] == "40"  # flag overrides the file
    assert data["seed"] == 3


def test_invalid_model_spec_combo():
    res = run_cli(["patches", "--spec", "ab", "--model", "fibchain", "--L", "3"])
    assert res.returncode != 0
