#!/usr/bin/env python3
"""Certification attempt at the reported p_x p_y gap near 0.804.

Model parameters are a documented guess (the published account omits them);
see configs/pxpy_0804.toml. Exit status reflects the certification outcome.
"""
import pathlib
import subprocess
import sys

root = pathlib.Path(__file__).resolve().parent.parent
out = root / "out"
out.mkdir(exist_ok=True)
rc = subprocess.call(
    [sys.executable, "-m", "gapcert.cli", "--config",
     str(root / "configs" / "pxpy_0804.toml"), "certify",
     "--out", str(out / "pxpy_0804_certify.json")]
)
print(f"certification exit status: {rc} ({'gap proven' if rc == 0 else 'no gap proven at this scale'})")
sys.exit(rc)
