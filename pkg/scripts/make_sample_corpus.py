#!/usr/bin/env python3
"""Regenerate the bundled sample corpus (checked into data/)."""
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from varlenrank.synthdata import make_sample_corpus

if __name__ == "__main__":
    out = pathlib.Path(__file__).resolve().parents[1] / "data" / "sample.letor"
    make_sample_corpus(out, n_queries=20, n_features=8, seed=7)
    print(f"wrote {out}")
