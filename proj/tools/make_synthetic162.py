#!/usr/bin/env python3
"""Writes a deterministic synthetic 162-bus network in IEEE common data format.

This is a stand-in for the 162-bus test system: it has the same bus count,
the same source buses (all PQ) and a meshed, well-conditioned topology, but
its electrical data is generated, not taken from the original archive.

    python3 tools/make_synthetic162.py data/ieee162_synthetic.cdf
"""

import random
import sys

N_BUS = 162
N_BRANCH = 284
BASE_MVA = 100.0
SOURCE_BUSES = {3, 15, 22, 27, 36, 45, 67, 68, 84, 94, 100, 124, 126, 142, 147, 148}
SEED = 162


def place(fields, width):
    """Right-aligns each (first_col, last_col, text) field in a fixed-width card."""
    card = [" "] * width
    for first, last, text in fields:
        text = text.rjust(last - first + 1)
        card[first - 1:last] = list(text)
    return "".join(card).rstrip()


def bus_card(num, btype, v, load_p, load_q, gen_p, desired):
    return place([
        (1, 4, str(num)), (6, 17, f"BUS {num}".ljust(12)), (19, 20, "1"), (21, 23, "1"),
        (25, 26, str(btype)), (28, 33, f"{v:.4f}"), (34, 40, "0.00"),
        (41, 49, f"{load_p:.2f}"), (50, 59, f"{load_q:.2f}"), (60, 67, f"{gen_p:.2f}"),
        (68, 75, "0.00"), (77, 83, "138.00"), (85, 90, f"{desired:.4f}"),
        (91, 98, "0.00"), (99, 106, "0.00"), (107, 114, "0.0000"), (115, 122, "0.0000"), (124, 127, "0"),
    ], 127)


def branch_card(f, t, r, x, b):
    return place([
        (1, 4, str(f)), (6, 9, str(t)), (11, 12, "1"), (13, 14, "1"), (17, 17, "1"), (19, 19, "0"),
        (20, 29, f"{r:.5f}"), (30, 40, f"{x:.5f}"), (41, 50, f"{b:.5f}"),
        (51, 55, "0"), (57, 61, "0"), (63, 67, "0"), (69, 72, "0"), (74, 74, "0"),
        (77, 82, "0.0"), (84, 90, "0.0"),
    ], 90)


def build(rng):
    candidates = [b for b in range(2, N_BUS + 1) if b not in SOURCE_BUSES]
    pv = sorted(rng.sample(candidates, 16))
    kinds = {b: 0 for b in range(1, N_BUS + 1)}
    kinds[1] = 3
    for b in pv:
        kinds[b] = 2

    loads = {}
    for b in range(1, N_BUS + 1):
        if kinds[b] == 0:
            p = rng.uniform(5.0, 35.0)
            loads[b] = (p, p * rng.uniform(0.25, 0.5))
        else:
            loads[b] = (0.0, 0.0)
    total = sum(p for p, _ in loads.values())
    gen = {b: total / 18.0 for b in pv}

    edges = set()
    for b in range(1, N_BUS):
        edges.add((b, b + 1))
    edges.add((1, N_BUS))
    while len(edges) < N_BRANCH:
        a = rng.randint(1, N_BUS)
        step = rng.randint(2, 12)
        c = (a - 1 + step) % N_BUS + 1
        e = (min(a, c), max(a, c))
        edges.add(e)

    branches = []
    for f, t in sorted(edges):
        x = rng.uniform(0.02, 0.08)
        r = x * rng.uniform(0.1, 0.3)
        b = rng.uniform(0.0, 0.04)
        branches.append((f, t, r, x, b))
    return kinds, loads, gen, branches


def main(path):
    rng = random.Random(SEED)
    kinds, loads, gen, branches = build(rng)
    out = [f" 01/01/00 {'SYNTH':<20s} {BASE_MVA:6.1f} 2000 S Synthetic 162-bus stand-in"]
    out.append(f"BUS DATA FOLLOWS                            {N_BUS} ITEMS")
    for b in range(1, N_BUS + 1):
        k = kinds[b]
        v = 1.04 if k == 3 else (1.02 if k == 2 else 1.0)
        desired = v if k else 1.0
        out.append(bus_card(b, k, v, loads[b][0], loads[b][1], gen.get(b, 0.0), desired))
    out.append("-999")
    out.append(f"BRANCH DATA FOLLOWS                         {len(branches)} ITEMS")
    for br in branches:
        out.append(branch_card(*br))
    out.append("-999")
    out.append("LOSS ZONES FOLLOWS                     1 ITEMS")
    out.append("  1 SYNTH")
    out.append("-99")
    out.append("INTERCHANGE DATA FOLLOWS                 1 ITEMS")
    out.append(" 1    1 SYNTH        0.0  999.99  SYNTH   SYNTHETIC")
    out.append("-9")
    out.append("TIE LINES FOLLOWS                     0 ITEMS")
    out.append("-999")
    out.append("END OF DATA")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "ieee162_synthetic.cdf")
