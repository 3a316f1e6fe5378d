#!/usr/bin/env python3
"""Acceptance-region decomposition colored by log10 D (Fig.-2-style data).

Writes out/decomposition_L5.json: every patch polygon of the octagon at
L = 5 with its D value for the Hofstadter model at b = 1, lambda = 1.5,
N = 2, A = B_{L-1}.
"""
import pathlib
import subprocess
import sys

out = pathlib.Path(__file__).resolve().parent.parent / "out"
out.mkdir(exist_ok=True)
sys.exit(
    subprocess.call(
        [sys.executable, "-m", "gapcert.cli", "decompose",
         "--spec", "ab", "--model", "hofstadter", "--b", "1.0",
         "--L", "5", "--N", "2", "--energy", "1.5", "--tmax", "1",
         "--out", str(out / "decomposition_L5.json")]
    )
)
