"""Command-line entry point.

Subcommands cover the full pipeline: `generate` instance datasets, `train`
the autoregressive policy or a baseline model, `eval` a trained policy,
`baseline` the parameter-free and product-model methods, `oracle` exact
optima, and `theory` the sample-complexity coverage check. All randomness
is routed through --seed (or the config's seed field), every run echoes
its effective configuration into the output directory, and no subcommand
writes outside its --out directory.

Exit codes: 0 success, 2 input/config error, 3 capacity error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from . import ising
from .anneal import AnnealSchedule
from .baselines import BaselineTrainConfig, train_product
from .errors import CapacityError, InputError, NumericError
from .exact import solve_instance
from .instances import GeneratorSpec, generate as gen_graph, read_dataset, write_dataset
from .metrics import MethodSpec, run_benchmark, write_svg_lines
from .nets import NetConfig, ProductNetConfig
from .ppo import PPOConfig, train as train_ppo
from .rng import stream


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {path}: {exc}")


def _echo_config(out_dir: str, payload: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "run_config.json"), "w", encoding="utf-8") as fh:
        json.dump({"format_version": 1, **payload}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _build_problem_dataset(dataset_dir: str, kind: str, penalty_a: float, penalty_b: float):
    pairs = read_dataset(dataset_dir)
    return [(inst_id, ising.encode(kind, g, penalty_a, penalty_b)) for inst_id, g in pairs]


# ---- generate ---------------------------------------------------------------


def _cmd_generate(args) -> int:
    params_by_family = {
        "rb": {"n_groups": args.n_groups, "group_size": args.group_size, "p": args.p},
        "rrg": {"n": args.n, "d": args.d},
        "ba": {"n": args.n, "m": args.m},
    }
    params = params_by_family[args.family]
    missing = [k for k, v in params.items() if v is None]
    if missing:
        raise InputError(f"family {args.family!r} needs flags: {', '.join('--' + m.replace('_', '-') for m in missing)}")
    graphs = []
    for idx in range(args.count):
        inst_seed = int(stream(args.seed, "gen_dataset", idx).integers(1 << 62))
        g = gen_graph(GeneratorSpec(family=args.family, params=params, seed=inst_seed))
        if args.min_n and g.n < args.min_n:
            continue
        if args.max_n and g.n > args.max_n:
            continue
        graphs.append(g)
    write_dataset(graphs, args.out, GeneratorSpec(family=args.family, params=params, seed=args.seed))
    _echo_config(args.out, {"command": "generate", "family": args.family, "params": params,
                            "count": args.count, "seed": args.seed,
                            "min_n": args.min_n, "max_n": args.max_n})
    print(f"wrote {len(graphs)} instances to {args.out}")
    return 0


# ---- train ------------------------------------------------------------------


def _net_config_from(cfg: dict, token_k: int) -> NetConfig:
    net = dict(cfg)
    net.setdefault("token_k", token_k)
    net["feature_dim"] = 5 + net["token_k"]
    for key in ("encoder_widths", "msg_widths", "node_widths", "head_widths"):
        if key in net:
            net[key] = tuple(net[key])
    return NetConfig(**net)


def _product_config_from(cfg: dict) -> ProductNetConfig:
    net = dict(cfg)
    for key in ("encoder_widths", "msg_widths", "node_widths", "out_widths"):
        if key in net:
            net[key] = tuple(net[key])
    return ProductNetConfig(**net)


def _split_dataset(pairs, val_fraction: float, seed: int):
    n_val = max(1, int(round(len(pairs) * val_fraction))) if len(pairs) > 1 else 0
    order = stream(seed, "split").permutation(len(pairs))
    val_idx = set(int(i) for i in order[:n_val])
    train = [pairs[i][1] for i in range(len(pairs)) if i not in val_idx]
    val = [pairs[i][1] for i in range(len(pairs)) if i in val_idx]
    return train, val


def _cmd_train(args) -> int:
    cfg = _load_json(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    method = cfg.get("method", "policy")
    problem = cfg.get("problem", {})
    kind = problem.get("kind", "mis")
    pa, pb = float(problem.get("penalty_a", 1.0)), float(problem.get("penalty_b", 1.1))
    dataset_cfg = cfg.get("dataset", {})
    if "dir" not in dataset_cfg:
        raise InputError("config dataset.dir is required")
    pairs = _build_problem_dataset(dataset_cfg["dir"], kind, pa, pb)
    train_insts, val_insts = _split_dataset(pairs, float(dataset_cfg.get("val_fraction", 0.2)), seed)

    sched_cfg = cfg.get("schedule", {"t0": 0.05, "n_warmup": 10, "n_anneal": 90})
    schedule = AnnealSchedule(**sched_cfg)
    _echo_config(args.out, {"command": "train", "config": cfg, "seed": seed})

    if method == "policy":
        ppo_cfg = PPOConfig(**{"minibatch": tuple(cfg["ppo"].get("minibatch", (10, 10, 10))),
                               **{k: v for k, v in cfg["ppo"].items() if k != "minibatch"}})
        net_cfg = _net_config_from(cfg.get("net", {}), ppo_cfg.token_k)
        result = train_ppo(train_insts, val_insts, net_cfg, ppo_cfg, schedule, seed, out_dir=args.out)
        print(f"training done; checkpoints: {sorted(result.checkpoints.values())}")
    elif method in ("mfa", "mfa-anneal", "egn", "egn-anneal"):
        bl_cfg = BaselineTrainConfig(method=method, **cfg.get("baseline", {}))
        net_cfg = _product_config_from(cfg.get("net", {}))
        val_oracles = [solve_instance(inst).best_energy for inst in val_insts]
        result = train_product(train_insts, val_insts, val_oracles, net_cfg, bl_cfg,
                               schedule if bl_cfg.annealed else None, seed, out_dir=args.out)
        print(f"training done; final checkpoint: {result.final_checkpoint}")
    else:
        raise InputError(f"unknown training method {method!r}")
    return 0


# ---- eval / baseline ---------------------------------------------------------


def _plot_report(report, out_dir: str) -> None:
    series: dict[str, list[tuple[float, float]]] = {}
    for row in report.rows:
        if row.eps_best is None:
            continue
        # hardness axis: instance size stands in when no generator knob is known
        series.setdefault(row.method, []).append((float(row.n_samples), row.eps_best))
    if series:
        write_svg_lines(os.path.join(out_dir, "report.svg"), series,
                        xlabel="samples", ylabel="best relative error", title="benchmark")


def _cmd_eval(args) -> int:
    dataset = _build_problem_dataset(args.dataset, args.kind, args.penalty_a, args.penalty_b)
    mode = {"og": "og", "os": "os", "s": "s"}[args.mode]
    params = (("mode", mode),)
    if mode == "os":
        params = params + (("n_orderings", args.orderings),)
    spec = MethodSpec(name=f"policy-{mode}", kind="policy", checkpoint=args.checkpoint, params=params)
    report = run_benchmark(dataset, [spec], args.n_samples, [args.seed], out_dir=args.out,
                           oracle_limit=args.oracle_limit, skip_oracle=args.skip_oracle,
                           threads=args.threads, timing=args.timing)
    _echo_config(args.out, {"command": "eval", "checkpoint": args.checkpoint,
                            "dataset": args.dataset, "kind": args.kind, "mode": args.mode,
                            "n_samples": args.n_samples, "seed": args.seed,
                            "threads": args.threads, "timing": args.timing})
    if args.svg:
        _plot_report(report, args.out)
    print(f"wrote report for {len(report.rows)} rows to {args.out}")
    return 0


_BASELINE_KINDS = {"db-greedy": "db-greedy", "rga": "rga",
                   "mfa-ce": "product-ce", "egn-ce": "product-ce"}


def _cmd_baseline(args) -> int:
    dataset = _build_problem_dataset(args.dataset, args.kind, args.penalty_a, args.penalty_b)
    kind = _BASELINE_KINDS[args.method]
    if kind == "product-ce" and not args.checkpoint:
        raise InputError(f"method {args.method!r} needs --checkpoint")
    params = (("n_repeats", args.rga_repeats),) if kind == "rga" else ()
    spec = MethodSpec(name=args.method, kind=kind, checkpoint=args.checkpoint, params=params)
    report = run_benchmark(dataset, [spec], args.n_samples, [args.seed], out_dir=args.out,
                           oracle_limit=args.oracle_limit, skip_oracle=args.skip_oracle,
                           threads=args.threads, timing=args.timing)
    _echo_config(args.out, {"command": "baseline", "method": args.method,
                            "dataset": args.dataset, "kind": args.kind,
                            "n_samples": args.n_samples, "seed": args.seed,
                            "threads": args.threads, "timing": args.timing})
    print(f"wrote report for {len(report.rows)} rows to {args.out}")
    return 0


# ---- oracle -------------------------------------------------------------------


def _cmd_oracle(args) -> int:
    dataset = _build_problem_dataset(args.dataset, args.kind, args.penalty_a, args.penalty_b)
    os.makedirs(args.out, exist_ok=True)
    results = []
    for inst_id, inst in dataset:
        res = solve_instance(inst, limit_n=args.oracle_limit)
        results.append({"instance_id": inst_id, "best_energy": res.best_energy,
                        "optimum_count": res.optimum_count,
                        "nodes_explored": res.nodes_explored,
                        "best_state": [int(v) for v in res.best_state]})
    with open(os.path.join(args.out, "oracle.json"), "w", encoding="utf-8") as fh:
        json.dump({"format_version": 1, "kind": args.kind, "results": results},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    _echo_config(args.out, {"command": "oracle", "dataset": args.dataset, "kind": args.kind,
                            "penalty_a": args.penalty_a, "penalty_b": args.penalty_b})
    print(f"solved {len(results)} instances")
    return 0


# ---- theory -------------------------------------------------------------------


def _cmd_theory(args) -> int:
    from .theory import coverage_grid, random_family

    cfg = _load_json(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    n_states = int(cfg.get("n_states", 16))
    n_families = int(cfg.get("n_families", 5))
    beta_star = float(cfg.get("beta_star", 2.0))
    m_values = [int(m) for m in cfg.get("m", [50, 200, 800])]
    deltas = [float(d) for d in cfg.get("delta", [0.1, 0.05])]
    trials = int(cfg.get("trials", 500))
    families = [random_family(n_states, int(stream(seed, "fam", i).integers(1 << 62)))
                for i in range(n_families)]
    checks = coverage_grid(families, beta_star, m_values, deltas, trials, seed)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "coverage.csv"), "w", encoding="utf-8") as fh:
        fh.write("m,delta,beta_star,coverage,mean_kl,bound_rhs\n")
        for c in checks:
            fh.write(f"{c.m},{c.delta!r},{c.beta_star!r},{c.coverage!r},{c.mean_kl!r},{c.bound_rhs!r}\n")
    _echo_config(args.out, {"command": "theory", "config": cfg, "seed": seed})
    print(f"wrote {len(checks)} coverage rows to {args.out}")
    return 0


# ---- parser -------------------------------------------------------------------


def _add_common_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", default="mis", choices=["mis", "mvc", "maxcl", "maxcut"])
    p.add_argument("--penalty-a", type=float, default=1.0, dest="penalty_a")
    p.add_argument("--penalty-b", type=float, default=1.1, dest="penalty_b")
    p.add_argument("--n-samples", type=int, default=8, dest="n_samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--oracle-limit", type=int, default=26, dest="oracle_limit")
    p.add_argument("--skip-oracle", action="store_true", dest="skip_oracle")
    p.add_argument("--timing", action=argparse.BooleanOptionalAction, default=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinanneal",
                                     description="Ising-model combinatorial optimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an instance dataset")
    p.add_argument("--family", required=True, choices=["rb", "rrg", "ba"])
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-groups", type=int, dest="n_groups")
    p.add_argument("--group-size", type=int, dest="group_size")
    p.add_argument("--p", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--min-n", type=int, default=0, dest="min_n")
    p.add_argument("--max-n", type=int, default=0, dest="max_n")
    p.set_defaults(fn=_cmd_generate)

    p = sub.add_parser("train", help="train the policy or a baseline model")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained policy checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default="og", choices=["og", "os", "s"])
    p.add_argument("--orderings", type=int, default=2)
    p.add_argument("--svg", action="store_true")
    _add_common_eval_flags(p)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("baseline", help="run a baseline method")
    p.add_argument("--method", required=True, choices=sorted(_BASELINE_KINDS))
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--rga-repeats", type=int, default=5, dest="rga_repeats")
    _add_common_eval_flags(p)
    p.set_defaults(fn=_cmd_baseline)

    p = sub.add_parser("oracle", help="solve a dataset exactly")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", default="mis", choices=["mis", "mvc", "maxcl", "maxcut"])
    p.add_argument("--penalty-a", type=float, default=1.0, dest="penalty_a")
    p.add_argument("--penalty-b", type=float, default=1.1, dest="penalty_b")
    p.add_argument("--oracle-limit", type=int, default=26, dest="oracle_limit")
    p.set_defaults(fn=_cmd_oracle)

    p = sub.add_parser("theory", help="coverage check of the divergence bound")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_theory)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
