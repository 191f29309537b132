#!/usr/bin/env python3
"""Regenerate the shipped datasets under datasets/.

The synthetic documents are fully determined by (kind, params, seed), so this
script always reproduces the committed files byte-for-byte.
"""
import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from simmap.datasets import gen_synthetic

OUT = pathlib.Path(__file__).resolve().parents[1] / "datasets"

SYNTHETIC = [
    ("m_n.json", "m_n", {"leaves": 10, "density": 0.1}, 1),
    ("two_level.json", "two_level", {"leaves": 17, "parents": 5, "density": 0.2}, 2),
    ("dense.json", "dense", {"leaves": 12, "parents": 3, "dim": 10}, 6),
]

# A small handcrafted pair-mode hierarchy: regions containing territories,
# with explicit border-style relations that cross region boundaries.
BORDERS = {
    "name": "borders",
    "id": "world",
    "children": [
        {"name": "Asia", "id": "asia", "children": [
            {"name": "China", "id": "cn", "weight": 14.0},
            {"name": "India", "id": "in", "weight": 14.0},
            {"name": "Japan", "id": "jp", "weight": 1.2},
        ]},
        {"name": "Europe", "id": "europe", "children": [
            {"name": "Russia", "id": "ru", "weight": 1.4},
            {"name": "Germany", "id": "de", "weight": 0.8},
            {"name": "France", "id": "fr", "weight": 0.7},
        ]},
        {"name": "Africa", "id": "africa", "children": [
            {"name": "Egypt", "id": "eg", "weight": 1.1},
            {"name": "Nigeria", "id": "ng", "weight": 2.2},
        ]},
    ],
    "pairs": [
        ["cn", "ru", 1.0],
        ["cn", "in", 1.0],
        ["de", "fr", 1.0],
        ["ru", "de", 0.7],
        ["eg", "in", 0.4],
        ["eg", "fr", 0.5],
        ["ng", "eg", 0.9],
    ],
}


def main() -> None:
    OUT.mkdir(exist_ok=True)
    for fname, kind, params, seed in SYNTHETIC:
        doc = gen_synthetic(kind, params, seed)
        (OUT / fname).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        print(f"wrote datasets/{fname}")
    (OUT / "borders.json").write_text(json.dumps(BORDERS, indent=2, sort_keys=True) + "\n")
    print("wrote datasets/borders.json")


if __name__ == "__main__":
    main()
