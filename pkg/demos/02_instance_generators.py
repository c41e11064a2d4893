"""The three synthetic instance families and their knobs.

Clique-group graphs get harder as p decreases (more inter-group edges),
random regular graphs get harder with degree, and preferential-attachment
graphs have heavy-tailed degrees. Everything is a pure function of its
seed.
"""

import numpy as np

from spinanneal import encode, energy, solve_instance
from spinanneal.baselines import db_greedy
from spinanneal.instances import gen_ba, gen_rb, gen_rrg

print("clique-group family: greedy gap grows as p shrinks")
for p in (0.95, 0.6, 0.3):
    gaps = []
    for seed in range(20):
        g = gen_rb(6, 5, p, seed=seed)
        inst = encode("mis", g, 1.0, 1.1)
        oracle = solve_instance(inst, method="branch_and_bound", count_optima=False)
        greedy = energy(inst.model, db_greedy(g, "mis"))
        gaps.append(greedy - oracle.best_energy)
    print(f"  p={p:.2f}: mean oracle-vs-greedy energy gap {np.mean(gaps):.3f}")

print("\nrandom regular family: every node has exactly degree d")
for d in (3, 7, 10):
    g = gen_rrg(60, d, seed=d)
    degrees = sorted({g.degree(i) for i in range(g.n)})
    print(f"  d={d:2d}: n={g.n}, m={g.n_edges}, degree set {degrees}")

print("\npreferential attachment: m edges per newcomer, exact edge count")
for m in (1, 2, 4):
    g = gen_ba(100, m, seed=m)
    expect = m * (m + 1) // 2 + (100 - m - 1) * m
    degs = np.array([g.degree(i) for i in range(g.n)])
    print(f"  m={m}: edges {g.n_edges} (formula {expect}), max degree {degs.max()}")
