#!/usr/bin/env python3
"""Lower/upper bound cross-section at fixed b = 1 (Fig.-4-style data).

Runs the configured Hofstadter scan (see configs/hofstadter_L50.toml) and
writes out/hofstadter_section.csv. Hours on one core.
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
         str(root / "configs" / "hofstadter_L50.toml"), "scan",
         "--out", str(out / "hofstadter_section.csv")]
    )
)
