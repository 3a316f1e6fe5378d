#!/usr/bin/env python3
"""Fibonacci-chain distance bounds over [-2, 3.5] (Fig.-S1-style data).

Writes out/fibonacci_bounds.csv: certified lower bound and spectral upper
bound for 200 energies at L = 500, N = 6, alpha = 1.
"""
import pathlib
import subprocess
import sys

root = pathlib.Path(__file__).resolve().parent.parent
out = root / "out"
out.mkdir(exist_ok=True)
sys.exit(
    subprocess.call(
        [sys.executable, "-m", "gapcert.cli", "--config",
         str(root / "configs" / "fibonacci_L500.toml"), "scan",
         "--out", str(out / "fibonacci_bounds.csv")]
    )
)
