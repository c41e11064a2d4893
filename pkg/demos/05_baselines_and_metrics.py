"""Run the parameter-free baselines through the benchmark harness.

The report machinery evaluates each method on each instance under
multiple seeds, scores everything against the exact oracle, and writes
CSV/JSON reports plus aggregate means with standard errors over seeds.
"""

import tempfile

import numpy as np

from spinanneal import encode
from spinanneal.instances import gen_rb
from spinanneal.metrics import MethodSpec, run_benchmark
from spinanneal.rng import stream

instances = []
idx = 0
while len(instances) < 8:
    r = stream(21, "demo", idx)
    idx += 1
    g = gen_rb(int(r.integers(5, 8)), int(r.integers(4, 6)), float(r.uniform(0.3, 0.9)),
               seed=int(r.integers(1 << 62)))
    if g.n <= 30:
        instances.append((f"rb_{len(instances)}", encode("mis", g, 1.0, 1.1)))

methods = [
    MethodSpec(name="oracle", kind="oracle"),
    MethodSpec(name="db-greedy", kind="db-greedy"),
    MethodSpec(name="rga", kind="rga", params=(("n_repeats", 3),)),
]

with tempfile.TemporaryDirectory() as out:
    report = run_benchmark(instances, methods, n_samples=8, seeds=[0, 1, 2],
                           out_dir=out, timing=True)
    print(f"{len(report.rows)} rows written to {out}\n")

print("method      metric     mean      stderr")
for agg in report.aggregates:
    if agg["metric"] in ("ar_star", "eps_best"):
        print(f"{agg['method']:10s}  {agg['metric']:8s}  {agg['mean']:.5f}  {agg['stderr']:.5f}")

by_method = {}
for row in report.rows:
    by_method.setdefault(row.method, []).append(row.wall_ms)
print("\nmean wall time per instance (ms):",
      {m: round(float(np.mean(v)), 2) for m, v in by_method.items()})
