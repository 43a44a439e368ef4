#!/usr/bin/env python3
"""Writes data/sample_priors.json: a small size repository for demos and tests.

Samples are drawn from hand-picked Gaussian modes (w, l, h in millimeters)
with a fixed seed, so the file is reproducible.
"""
import json
import re
import random
import sys
from pathlib import Path

SAMPLES_PER_LEAF = 60

# name: (shape, dim_mask, [(weight, mean, sd)], aspect or None)
LEAVES = {
    "furniture": {
        "chair": ("box", "wlh", [(1.0, (450, 500, 900), (30, 30, 50))], None),
        "table": ("box", "wlh", [(0.6, (800, 1400, 750), (50, 80, 20)),
                                 (0.4, (500, 1000, 450), (40, 60, 30))], None),
        "sofa": ("box", "wlh", [(1.0, (900, 2000, 850), (60, 150, 50))], None),
        "bed": ("box", "wlh", [(1.0, (1500, 2000, 500), (200, 50, 60))], None),
    },
    "electronics": {
        "laptop": ("box", "wlh", [(1.0, (240, 340, 25), (15, 20, 4))], None),
        "keyboard": ("box", "wl", [(1.0, (150, 450), (10, 20))], (150, 450, 30)),
        "monitor": ("box", "wlh", [(1.0, (200, 600, 450), (30, 80, 60))], None),
        "mouse": ("box", "wlh", [(1.0, (65, 115, 40), (5, 8, 4))], None),
    },
    "kitchen": {
        "bottle": ("cylinder", "wlh", [(1.0, (75, 75, 250), (8, 8, 30))], None),
        "cup": ("cylinder", "wlh", [(1.0, (80, 80, 95), (6, 6, 8))], None),
        "bowl": ("cylinder", "wlh", [(1.0, (160, 160, 70), (15, 15, 8))], None),
    },
    "person": ("box", "h", [(0.5, (1750,), (70,)), (0.5, (1620,), (65,))], (350, 500, 1700)),
    "vehicle": {
        "car": ("box", "wlh", [(1.0, (1800, 4500, 1500), (80, 300, 100))], None),
    },
}


def draw(rng, shape, mask, modes):
    weights = [m[0] for m in modes]
    _, mean, sd = modes[rng.choices(range(len(modes)), weights)[0]]
    values = [max(1.0, rng.gauss(mu, s)) for mu, s in zip(mean, sd)]
    if shape == "cylinder":
        diameter = values[0]
        values = [diameter, diameter] + values[2:]
    full = {}
    for letter, v in zip(mask, values):
        full[letter] = round(v, 1)
    return [full.get(letter) for letter in "wlh"]


def leaf(rng, name, spec):
    shape, mask, modes, aspect = spec
    node = {"name": name, "dim_mask": list(mask), "shape": shape,
            "samples": [draw(rng, shape, mask, modes) for _ in range(SAMPLES_PER_LEAF)]}
    if aspect:
        node["aspect"] = list(aspect)
    return node


def build(rng, name, spec):
    if isinstance(spec, tuple):
        return leaf(rng, name, spec)
    return {"name": name, "children": [build(rng, k, v) for k, v in spec.items()]}


def main():
    rng = random.Random(7)
    doc = {"version": 1, "tree": build(rng, "root", LEAVES)}
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "data" / "sample_priors.json"
    text = json.dumps(doc, indent=1)
    # One line per sample keeps the file readable.
    text = re.sub(r"\[\s+([^\[\]{}]*?)\s+\]", lambda m: "[" + re.sub(r"\s+", " ", m.group(1)) + "]", text)
    out.write_text(text + "\n")


if __name__ == "__main__":
    main()
