"""Solution-quality metrics, benchmark orchestration, and reports.

Approximation ratios compare the best (lowest-energy) sample against the
certified optimum as |E_best| / |E_opt|: for problems with negative optima
(independent set, clique, cut) suboptimal values fall below one, for
vertex cover they lie above one, so in both conventions values closer to
one are better. Relative errors measure |E_opt - E| / |E_opt| with either
the best or the mean over samples.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import ising
from .baselines import db_greedy, decode_ce, rga
from .errors import CapacityError, InputError, MetricUndefinedError
from .exact import solve_instance
from .graphs import Graph
from .ising import ProblemInstance, energy
from .nets import PolicyValueNet, ProductNet
from .policy import generate
from .rng import stream


def ar_star(sample_energies, oracle_energy: float) -> float:
    """Best-sample approximation ratio |E_best| / |E_opt| where the best
    sample is the one with the lowest energy."""
    if oracle_energy == 0:
        raise MetricUndefinedError("approximation ratio undefined for zero optimum energy")
    energies = np.asarray(sample_energies, dtype=np.float64)
    if energies.size == 0:
        raise InputError("need at least one sample energy")
    return float(abs(energies.min()) / abs(oracle_energy))


def ar_hat(sample_energies, oracle_energy: float) -> float:
    """Average approximation ratio over all samples."""
    if oracle_energy == 0:
        raise MetricUndefinedError("approximation ratio undefined for zero optimum energy")
    energies = np.asarray(sample_energies, dtype=np.float64)
    if energies.size == 0:
        raise InputError("need at least one sample energy")
    return float(np.mean(np.abs(energies)) / abs(oracle_energy))


def eps_rel(sample_energies, oracle_energy: float, mode: str = "best") -> float:
    """Relative error |E_opt - E| / |E_opt|, minimized ('best') or averaged
    ('mean') over the samples."""
    if oracle_energy == 0:
        raise MetricUndefinedError("relative error undefined for zero optimum energy")
    if mode not in ("best", "mean"):
        raise InputError(f"mode must be 'best' or 'mean', got {mode!r}")
    energies = np.asarray(sample_energies, dtype=np.float64)
    if energies.size == 0:
        raise InputError("need at least one sample energy")
    errs = np.abs(oracle_energy - energies) / abs(oracle_energy)
    return float(errs.min() if mode == "best" else errs.mean())


def maxcut_value(graph: Graph, s) -> int:
    """Number of edges cut by the two-sided partition encoded in s."""
    s = np.asarray(s)
    if s.shape != (graph.n,):
        raise InputError(f"state length {s.shape} does not match n={graph.n}")
    return int(sum(1 for (u, v) in graph.edges if s[u] != s[v]))


# ---- benchmark harness -----------------------------------------------------


@dataclass(frozen=True)
class MethodSpec:
    """One evaluated method.

    kind is one of 'oracle', 'db-greedy', 'rga', 'policy', 'product-ce';
    params carries the kind-specific settings (sampling mode and token size
    for 'policy', flip repeats for 'rga'). Checkpoints are loaded lazily so
    specs stay picklable and hashable.
    """

    name: str
    kind: str
    checkpoint: str | None = None
    params: tuple = ()

    def param_dict(self) -> dict:
        return dict(self.params)


@dataclass
class BenchRow:
    instance_id: str
    method: str
    seed: int
    n_samples: int
    best_energy: float
    oracle_energy: float | None
    ar_star: float | None
    ar_hat: float | None
    eps_best: float | None
    eps_mean: float | None
    wall_ms: float
    sample_energies: list = field(default_factory=list)
    error: str | None = None


@dataclass
class BenchReport:
    rows: list
    aggregates: list
    config: dict

    def row_key(self):
        return [(r.instance_id, r.method, r.seed) for r in self.rows]


CSV_COLUMNS = ["instance_id", "method", "seed", "n_S", "best_energy", "oracle_energy",
               "ar_star", "ar_hat", "eps_best", "eps_mean", "wall_ms"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report_csv(report: BenchReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in report.rows:
            fh.write(",".join([
                r.instance_id, r.method, str(r.seed), str(r.n_samples),
                _fmt(r.best_energy), _fmt(r.oracle_energy), _fmt(r.ar_star),
                _fmt(r.ar_hat), _fmt(r.eps_best), _fmt(r.eps_mean), _fmt(r.wall_ms),
            ]) + "\n")


def read_report_csv(path: str) -> list[BenchRow]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != CSV_COLUMNS:
            raise InputError(f"unexpected report columns in {path}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            opt = lambda tok: None if tok == "" else float(tok)
            rows.append(BenchRow(
                instance_id=parts[0], method=parts[1], seed=int(parts[2]),
                n_samples=int(parts[3]), best_energy=float(parts[4]),
                oracle_energy=opt(parts[5]), ar_star=opt(parts[6]), ar_hat=opt(parts[7]),
                eps_best=opt(parts[8]), eps_mean=opt(parts[9]), wall_ms=float(parts[10]),
            ))
    return rows


def write_report_json(report: BenchReport, path: str) -> None:
    payload = {
        "format_version": 1,
        "config": report.config,
        "columns": CSV_COLUMNS,
        "rows": [
            {**{c: getattr(r, a) for c, a in zip(CSV_COLUMNS, [
                "instance_id", "method", "seed", "n_samples", "best_energy",
                "oracle_energy", "ar_star", "ar_hat", "eps_best", "eps_mean", "wall_ms"])},
             "sample_energies": list(map(float, r.sample_energies)),
             "error": r.error}
            for r in report.rows
        ],
        "aggregates": report.aggregates,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _evaluate_method(instance: ProblemInstance, spec: MethodSpec, n_samples: int,
                     seed: int, oracle: float | None, nets: dict) -> list[float]:
    params = spec.param_dict()
    if spec.kind == "oracle":
        if oracle is None:
            raise CapacityError("oracle energies unavailable for this instance")
        return [oracle]
    if spec.kind == "db-greedy":
        state = db_greedy(instance.original_graph if instance.kind == "maxcl" else instance.graph,
                          instance.kind)
        return [energy(instance.model, state)]
    if spec.kind == "rga":
        n_rep = int(params.get("n_repeats", 5))
        out = []
        for j in range(n_samples):
            state = rga(instance.model, n_rep, int(stream(seed, "rga", j).integers(1 << 62)))
            state = ising.repair(instance, state)
            out.append(energy(instance.model, state))
        return out
    if spec.kind == "policy":
        net = nets[spec.checkpoint]
        k = net.config.token_k
        mode = params.get("mode", "og")
        if mode == "og":
            results = generate(instance, net, k, "greedy", seed=seed, n_orderings=n_samples)
        elif mode == "os":
            n_ord = int(params.get("n_orderings", max(1, n_samples // 2)))
            results = generate(instance, net, k, "sample", seed=seed,
                               n_orderings=n_ord, n_samples=n_samples)
        elif mode == "s":
            results = generate(instance, net, k, "sample", seed=seed,
                               n_orderings=1, n_samples=n_samples)
        else:
            raise InputError(f"unknown policy sampling mode {mode!r}")
        return [energy(instance.model, r.spins) for r in results]
    if spec.kind == "product-ce":
        net = nets[spec.checkpoint]
        gen_model = instance.model
        if net.energy_scale is not None:
            gen_model = ising.scale_model(instance.model, *net.energy_scale)
        _, energies = decode_ce(instance, net, seed=seed, attempts=n_samples, model=gen_model)
        return energies
    raise InputError(f"unknown method kind {spec.kind!r}")


def _aggregate(rows: list[BenchRow], seeds: list[int]) -> list[dict]:
    """Per-method dataset means with the standard error over seeds."""
    out = []
    methods = sorted({r.method for r in rows})
    for method in methods:
        for metric in ("ar_star", "ar_hat", "eps_best", "eps_mean", "best_energy"):
            per_seed = []
            for seed in seeds:
                vals = [getattr(r, metric) for r in rows
                        if r.method == method and r.seed == seed
                        and getattr(r, metric) is not None and r.error is None]
                if vals:
                    per_seed.append(float(np.mean(vals)))
            if not per_seed:
                continue
            mean = float(np.mean(per_seed))
            stderr = float(np.std(per_seed, ddof=1) / np.sqrt(len(per_seed))) if len(per_seed) > 1 else 0.0
            out.append({"method": method, "metric": metric, "mean": mean,
                        "stderr": stderr, "n_seeds": len(per_seed)})
    return out


def run_benchmark(dataset: list[tuple[str, ProblemInstance]],
                  methods: list[MethodSpec],
                  n_samples: int,
                  seeds: list[int],
                  out_dir: str | None = None,
                  oracle_limit: int = 26,
                  skip_oracle: bool = False,
                  threads: int = 1,
                  timing: bool = True) -> BenchReport:
    """Evaluate every method on every instance for every seed.

    Oracle optima are computed once per instance (rows are marked
    oracle-unavailable if the instance exceeds oracle capacity). Failures
    in one row are recorded and do not stop the run. With timing disabled
    the wall_ms column is fixed at zero so reruns are byte-identical.
    """
    nets: dict = {}
    for spec in methods:
        if spec.checkpoint and spec.checkpoint not in nets:
            if spec.kind == "policy":
                nets[spec.checkpoint] = PolicyValueNet.load(spec.checkpoint)
            elif spec.kind == "product-ce":
                nets[spec.checkpoint] = ProductNet.load(spec.checkpoint)

    oracle_energies: dict[str, float | None] = {}
    for inst_id, inst in dataset:
        if skip_oracle:
            oracle_energies[inst_id] = None
            continue
        try:
            oracle_energies[inst_id] = solve_instance(inst, limit_n=oracle_limit,
                                                      count_optima=False).best_energy
        except CapacityError:
            oracle_energies[inst_id] = None

    tasks = [(ii, mi, si) for ii in range(len(dataset))
             for mi in range(len(methods)) for si in range(len(seeds))]

    def run_task(task):
        ii, mi, si = task
        inst_id, inst = dataset[ii]
        spec = methods[mi]
        seed = seeds[si]
        row_seed = int(stream(seed, "bench", inst_id, spec.name).integers(1 << 62))
        oracle = oracle_energies[inst_id]
        start = time.perf_counter()
        try:
            energies = _evaluate_method(inst, spec, n_samples, row_seed, oracle, nets)
            wall = (time.perf_counter() - start) * 1000.0 if timing else 0.0
            row = BenchRow(
                instance_id=inst_id, method=spec.name, seed=seed, n_samples=len(energies),
                best_energy=float(np.min(energies)), oracle_energy=oracle,
                ar_star=ar_star(energies, oracle) if oracle else None,
                ar_hat=ar_hat(energies, oracle) if oracle else None,
                eps_best=eps_rel(energies, oracle, "best") if oracle else None,
                eps_mean=eps_rel(energies, oracle, "mean") if oracle else None,
                wall_ms=wall, sample_energies=[float(e) for e in energies])
        except Exception as exc:  # per-row failure, run continues
            wall = (time.perf_counter() - start) * 1000.0 if timing else 0.0
            row = BenchRow(instance_id=inst_id, method=spec.name, seed=seed,
                           n_samples=0, best_energy=float("nan"), oracle_energy=oracle,
                           ar_star=None, ar_hat=None, eps_best=None, eps_mean=None,
                           wall_ms=wall, error=f"{type(exc).__name__}: {exc}")
        return task, row

    results: dict[tuple, BenchRow] = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for task, row in pool.map(run_task, tasks):
                results[task] = row
    else:
        for task in tasks:
            task, row = run_task(task)
            results[task] = row
    rows = [results[t] for t in sorted(results)]
    report = BenchReport(rows=rows, aggregates=_aggregate(rows, seeds), config={
        "n_samples": n_samples, "seeds": seeds, "methods": [asdict(m) for m in methods],
        "n_instances": len(dataset), "timing": timing,
    })
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_report_csv(report, os.path.join(out_dir, "report.csv"))
        write_report_json(report, os.path.join(out_dir, "report.json"))
    return report


# ---- native SVG plotting ----------------------------------------------------


def write_svg_lines(path: str, series: dict[str, list[tuple[float, float]]],
                    xlabel: str = "", ylabel: str = "", title: str = "",
                    width: int = 640, height: int = 420) -> None:
    """Minimal line/scatter plot written directly as SVG."""
    pad = 60
    pts = [p for pts_ in series.values() for p in pts_]
    if not pts:
        raise InputError("nothing to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width/2:.0f}" y="24" text-anchor="middle" font-size="15">{title}</text>',
             f'<text x="{width/2:.0f}" y="{height-12}" text-anchor="middle" font-size="12">{xlabel}</text>',
             f'<text x="16" y="{height/2:.0f}" text-anchor="middle" font-size="12" '
             f'transform="rotate(-90 16 {height/2:.0f})">{ylabel}</text>',
             f'<line x1="{pad}" y1="{height-pad}" x2="{width-pad}" y2="{height-pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height-pad}" stroke="black"/>']
    for tick in range(5):
        xv = x0 + tick * (x1 - x0) / 4
        yv = y0 + tick * (y1 - y0) / 4
        parts.append(f'<text x="{sx(xv):.1f}" y="{height-pad+16}" text-anchor="middle" '
                     f'font-size="10">{xv:.3g}</text>')
        parts.append(f'<text x="{pad-6}" y="{sy(yv):.1f}" text-anchor="end" '
                     f'font-size="10">{yv:.3g}</text>')
    for idx, (label, pts_) in enumerate(sorted(series.items())):
        color = colors[idx % len(colors)]
        pts_sorted = sorted(pts_)
        path_d = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts_sorted)
        parts.append(f'<polyline points="{path_d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts_sorted:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>')
        parts.append(f'<text x="{width-pad+4}" y="{pad+14*idx}" font-size="11" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
