#!/usr/bin/env python3
"""Regenerate the bundled example datasets (deterministic).

Writes:
  data/three_layer_demo.tsv   11-node, 3-layer network whose co-association
                              weights defeat every global threshold.
  data/campus_multiplex.tsv   61 entities, 620 edges, 5 layers: a synthetic
                              university-department multiplex (planted
                              research groups, per-layer participation)
                              shaped like the classic AUCS benchmark.
"""

import os
import random
from itertools import combinations

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, os.pardir, "data")

QUAD1 = ["01", "02", "03", "04"]
QUAD2 = ["05", "06", "07", "08"]
TRIANGLE = ["09", "10", "11"]


def write_edges(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# layerId\tsrcId\tdstId\n")
        for layer, u, v in rows:
            fh.write(f"{layer}\t{u}\t{v}\n")
    print(f"wrote {path}: {len(rows)} edges")


def three_layer_demo():
    rows = []
    for u, v in (list(combinations(QUAD1, 2)) + list(combinations(QUAD2, 2))
                 + list(combinations(TRIANGLE, 2))):
        rows.append(("A", u, v))
    for u, v in combinations(QUAD1 + QUAD2, 2):
        rows.append(("B", u, v))
    for u, v in [("01", "02"), ("01", "03"), ("02", "03"), ("05", "07")]:
        rows.append(("C", u, v))
    write_edges(os.path.join(DATA, "three_layer_demo.tsv"), rows)


def campus_multiplex(seed=73):
    rng = random.Random(seed)
    nodes = [f"U{i:02d}" for i in range(1, 62)]
    sizes = [9, 9, 8, 8, 7, 7, 7, 6]
    group = {}
    start = 0
    for gid, size in enumerate(sizes):
        for node in nodes[start:start + size]:
            group[node] = gid
        start += size

    # (layer, edge count, participant count, intra fraction)
    plan = [("work", 194, 61, 0.85),
            ("lunch", 193, 61, 0.80),
            ("facebook", 124, 40, 0.78),
            ("leisure", 88, 47, 0.72),
            ("coauthor", 21, 18, 0.90)]
    rows = []
    for layer, count, n_part, intra_frac in plan:
        participants = sorted(rng.sample(nodes, n_part))
        intra = [(u, v) for u, v in combinations(participants, 2)
                 if group[u] == group[v]]
        cross = [(u, v) for u, v in combinations(participants, 2)
                 if group[u] != group[v]]
        n_intra = min(round(count * intra_frac), len(intra), count)
        chosen = rng.sample(intra, n_intra) + rng.sample(cross, count - n_intra)
        rng.shuffle(chosen)
        rows.extend((layer, u, v) for u, v in chosen)
    assert len(rows) == 620, len(rows)
    write_edges(os.path.join(DATA, "campus_multiplex.tsv"), rows)


if __name__ == "__main__":
    os.makedirs(DATA, exist_ok=True)
    three_layer_demo()
    campus_multiplex()
