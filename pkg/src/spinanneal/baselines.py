"""Comparison methods: product-distribution models trained with REINFORCE
or the closed-form expected energy, conditional-expectation decoding,
degree-based greedy, and the random greedy flip algorithm.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from . import ising
from .anneal import AnnealSchedule, temperature
from .autodiff import Tensor
from .errors import InputError, NumericError
from .graphs import Graph, complement
from .ising import IsingModel, ProblemInstance, energy
from .nets import GraphBatch, ProductNet, ProductNetConfig, make_optimizer
from .rng import stream


# ---- product-distribution model ------------------------------------------


def product_features(model: IsingModel, rng: np.random.Generator,
                     n_random: int = 6) -> np.ndarray:
    """Node features for the product nets: the field value plus random
    binary entries redrawn per decode attempt."""
    x = np.zeros((model.n, 1 + n_random))
    x[:, 0] = model.fields
    x[:, 1:] = rng.integers(0, 2, size=(model.n, n_random)).astype(np.float64)
    return x


def model_batch(model: IsingModel, node_x: np.ndarray) -> GraphBatch:
    src = np.concatenate([model.coup_i, model.coup_j])
    dst = np.concatenate([model.coup_j, model.coup_i])
    attr = np.concatenate([model.coup_v, model.coup_v]).reshape(-1, 1)
    return GraphBatch(node_x=node_x, edge_src=src, edge_dst=dst, edge_attr=attr,
                      node_graph=np.zeros(model.n, dtype=np.int64), n_graphs=1)


def mfa_forward(net: ProductNet, model: IsingModel, rng: np.random.Generator) -> Tensor:
    """Per-node selection probabilities for one instance with freshly drawn
    random node features."""
    x = product_features(model, rng, net.config.n_random_features)
    return net.forward(model_batch(model, x))


def bernoulli_log_prob(probs: Tensor, q: np.ndarray) -> Tensor:
    """Log-probability of the 0/1 assignment q under independent selection
    probabilities."""
    q = np.asarray(q, dtype=np.float64)
    return ad.tsum(ad.add(ad.mul(Tensor(q), ad.log(probs)),
                          ad.mul(Tensor(1.0 - q), ad.log(ad.sub(1.0, probs)))))


def reinforce_step(instance: ProblemInstance, net: ProductNet, n_samples: int,
                   beta: float | None, seed: int,
                   model: IsingModel | None = None) -> tuple[dict, dict]:
    """Variance-reduced score-function gradient estimate for one instance.

    Samples assignments from the current product distribution and scores
    them by the energy, or by energy plus the temperature-weighted log
    probability when beta is given. The sample-mean baseline is subtracted
    and the gradient flows only through the log-probabilities. Returns
    (gradients by parameter name, summary statistics).
    """
    if n_samples < 2:
        raise InputError("need at least 2 samples for the baseline")
    model = model if model is not None else instance.model
    rng = stream(seed, "reinforce")
    probs = mfa_forward(net, model, rng)
    p = probs.data
    q_samples = (rng.random((n_samples, model.n)) < p[None, :]).astype(np.float64)
    states = 2.0 * q_samples - 1.0
    scores = ising.energy_batch(model, states)
    logp_const = (q_samples * np.log(p) + (1 - q_samples) * np.log1p(-p)).sum(axis=1)
    if beta is not None:
        if beta <= 0:
            raise InputError(f"beta must be positive, got {beta}")
        scores = scores + logp_const / beta
    centered = scores - scores.mean()
    surrogate = None
    for j in range(n_samples):
        term = ad.mul(bernoulli_log_prob(probs, q_samples[j]), float(centered[j]))
        surrogate = term if surrogate is None else ad.add(surrogate, term)
    surrogate = ad.mul(surrogate, 1.0 / n_samples)
    net.params.zero_grads()
    surrogate.backward()
    grads = {name: t.grad.copy() for name, t in net.params.items()}
    stats = {"mean_score": float(scores.mean()), "mean_energy": float(ising.energy_batch(model, states).mean())}
    return grads, stats


def egn_loss(probs, model: IsingModel, beta: float | None = None) -> Tensor:
    """Exact expected energy of the product distribution, in closed form.

    The energy is multilinear in the spins, so substituting the per-spin
    means 2p - 1 yields the expectation exactly. With beta given, the
    temperature-weighted negative entropy of the distribution is added.
    """
    probs = ad.as_tensor(probs)
    s = ad.sub(ad.mul(probs, 2.0), 1.0)
    total = ad.tsum(ad.mul(Tensor(model.fields), s))
    if model.coup_v.size:
        si = ad.gather_rows(s, model.coup_i)
        sj = ad.gather_rows(s, model.coup_j)
        total = ad.add(total, ad.tsum(ad.mul(Tensor(model.coup_v), ad.mul(si, sj))))
    total = ad.add(total, model.offset)
    if beta is not None:
        if beta <= 0:
            raise InputError(f"beta must be positive, got {beta}")
        one_m = ad.sub(1.0, probs)
        entropy = ad.mul(ad.tsum(ad.add(ad.mul(probs, ad.log(probs)),
                                        ad.mul(one_m, ad.log(one_m)))), -1.0)
        total = ad.sub(total, ad.mul(entropy, 1.0 / beta))
    return total


def conditional_expectation(probs, model: IsingModel) -> np.ndarray:
    """Derandomize a product distribution into a single assignment whose
    energy never exceeds the expected energy.

    Nodes are fixed in order of decreasing confidence |2p - 1|; each node
    takes whichever supported value gives the lower conditional expectation
    (ties resolve to exclusion, q = 0). A coordinate with probability
    exactly 0 or 1 is already decided and keeps its value. Exactness of the
    conditional expectation follows from the multilinearity of the energy.
    """
    probs = probs.data if isinstance(probs, Tensor) else np.asarray(probs, dtype=np.float64)
    if probs.shape != (model.n,):
        raise InputError(f"probs must have shape ({model.n},)")
    s = 2.0 * probs - 1.0
    gain = model.fields.copy()
    for i, j, v in zip(model.coup_i, model.coup_j, model.coup_v):
        gain[i] += v * s[j]
        gain[j] += v * s[i]
    order = np.argsort(-np.abs(s), kind="stable")
    for node in order:
        node = int(node)
        if abs(s[node]) == 1.0:
            continue  # deterministic coordinate: outside values unsupported
        # moving s[node] to v changes the expectation by (v - s[node]) * gain[node]
        d_plus = (1.0 - s[node]) * gain[node]
        d_minus = (-1.0 - s[node]) * gain[node]
        new = 1.0 if d_plus < d_minus else -1.0
        shift = new - s[node]
        for (nbr, v) in model.neighbors(node):
            gain[nbr] += v * shift
        s[node] = new
    return s.astype(np.int8)


def decode_ce(instance: ProblemInstance, net: ProductNet, seed: int,
              attempts: int = 8, model: IsingModel | None = None) -> tuple[np.ndarray, list[float]]:
    """Conditional-expectation decoding with several random-feature draws.

    Runs the network `attempts` times with fresh random node features,
    derandomizes each output, repairs it, and returns (best assignment,
    energies of all attempts) under the reporting model.
    """
    gen_model = model if model is not None else instance.model
    best_state, energies = None, []
    for a in range(attempts):
        rng = stream(seed, "ce_attempt", a)
        probs = mfa_forward(net, gen_model, rng)
        state = conditional_expectation(probs.data, gen_model)
        state = ising.repair(instance, state)
        e = energy(instance.model, state)
        energies.append(e)
        if best_state is None or e < min(energies[:-1]):
            best_state = state
    return best_state, energies


# ---- parameter-free algorithms ---------------------------------------------


def db_greedy(graph: Graph, target: str) -> np.ndarray:
    """Degree-based greedy: repeatedly take the minimum-degree node of the
    residual graph into the independent set (ties to the lowest id) and
    delete it with its neighbors.

    'mis' returns the set, 'mvc' its complement (the cover), and 'maxcl'
    runs on the complement graph so the selection is a clique of `graph`.
    """
    if target not in ("mis", "mvc", "maxcl"):
        raise InputError(f"db_greedy supports mis/mvc/maxcl, got {target!r}")
    work = complement(graph) if target == "maxcl" else graph
    alive = np.ones(work.n, dtype=bool)
    deg = np.array([work.degree(i) for i in range(work.n)], dtype=np.int64)
    selected = np.zeros(work.n, dtype=bool)
    n_alive = work.n
    while n_alive > 0:
        candidates = np.flatnonzero(alive)
        node = int(candidates[np.argmin(deg[candidates])])
        selected[node] = True
        to_remove = [node] + [v for v in work.neighbors[node] if alive[v]]
        for u in to_remove:
            alive[u] = False
            n_alive -= 1
            for w in work.neighbors[u]:
                if alive[w]:
                    deg[w] -= 1
    q = (~selected if target == "mvc" else selected).astype(np.int8)
    return ising.binary_to_spins(q)


def rga(model: IsingModel, n_repeats: int, seed: int) -> np.ndarray:
    """Random greedy: uniform random spins, then n * n_repeats single-spin
    proposals, each accepted only if it strictly lowers the energy."""
    if n_repeats < 0:
        raise InputError("n_repeats must be >= 0")
    rng = stream(seed, "rga")
    s = rng.choice(np.array([-1, 1], dtype=np.int8), size=model.n)
    local = model.fields.copy()
    for i, j, v in zip(model.coup_i, model.coup_j, model.coup_v):
        local[i] += v * s[j]
        local[j] += v * s[i]
    for _ in range(model.n * n_repeats):
        node = int(rng.integers(model.n))
        delta = -2.0 * s[node] * local[node]
        if delta < 0.0:
            old = s[node]
            s[node] = -old
            for (nbr, v) in model.neighbors(node):
                local[nbr] += v * (s[node] - old)
    return s


def standardize_dataset(instances: list[ProblemInstance], seed: int,
                        n_repeats: int = 1) -> tuple[float, float]:
    """Energy-scale statistics over a dataset: one random-greedy state per
    instance, pooled mean and standard deviation of their energies."""
    energies = [energy(inst.model, rga(inst.model, n_repeats, int(stream(seed, "std", idx).integers(1 << 62))))
                for idx, inst in enumerate(instances)]
    arr = np.array(energies)
    std = float(arr.std())
    if std == 0.0:
        std = 1.0
    return float(arr.mean()), std


# ---- training loops ---------------------------------------------------------


@dataclass
class BaselineTrainConfig:
    """Hyperparameters for training the product-distribution baselines.

    Reference defaults use batches of 32 instances and 30 samples per
    gradient estimate; shrink both for desk-scale runs.
    """

    method: str = "mfa"  # mfa | mfa-anneal | egn | egn-anneal
    batch_size: int = 32
    n_samples: int = 30
    lr: float = 1e-4
    epochs: int = 200
    optimizer: str = "adam"
    momentum: float = 0.9
    grad_clip: float = 1.0
    val_every: int = 10
    val_attempts: int = 8

    def __post_init__(self):
        if self.method not in ("mfa", "mfa-anneal", "egn", "egn-anneal"):
            raise InputError(f"unknown baseline method {self.method!r}")

    @property
    def annealed(self) -> bool:
        return self.method.endswith("-anneal")


@dataclass
class BaselineTrainResult:
    net: ProductNet
    log_rows: list[dict]
    best_checkpoint: str | None
    final_checkpoint: str | None


def train_product(train_instances: list[ProblemInstance],
                  val_instances: list[ProblemInstance],
                  val_oracle_energies: list[float],
                  net_config: ProductNetConfig,
                  config: BaselineTrainConfig,
                  schedule: AnnealSchedule | None,
                  seed: int,
                  out_dir: str | None = None) -> BaselineTrainResult:
    """Train a product-distribution model with REINFORCE ('mfa' methods) or
    the closed-form expected-energy loss ('egn' methods), optionally with
    an annealed entropy term. Energies are standardized over the training
    set before training."""
    if config.annealed and schedule is None:
        raise InputError("annealed methods need a schedule")
    mean, std = standardize_dataset(train_instances, seed)
    scaled = [ising.scale_model(inst.model, mean, std) for inst in train_instances]
    net = ProductNet.create(net_config, seed=seed, energy_scale=(mean, std))
    opt = make_optimizer(config.optimizer, net.params, config.lr,
                         momentum=config.momentum, grad_clip=config.grad_clip)
    order_rng = stream(seed, "batch_order")
    log_rows: list[dict] = []
    best_eps = np.inf
    best_path = final_path = None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
            json.dump({"net": asdict(net_config), "train": asdict(config),
                       "schedule": asdict(schedule) if schedule else None,
                       "seed": seed, "energy_scale": [mean, std]},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")

    n_train = len(train_instances)
    for epoch in range(config.epochs):
        if config.annealed:
            temp = temperature(epoch, schedule)
            beta = None if temp == 0.0 else 1.0 / temp
        else:
            temp, beta = 0.0, None
        picks = order_rng.integers(0, n_train, size=min(config.batch_size, n_train))
        batch_energy = 0.0
        if config.method.startswith("mfa"):
            acc: dict[str, np.ndarray] = {}
            for bi, inst_idx in enumerate(picks):
                grads, stats = reinforce_step(
                    train_instances[inst_idx], net, config.n_samples, beta,
                    seed=int(stream(seed, "rf", epoch, bi).integers(1 << 62)),
                    model=scaled[inst_idx])
                batch_energy += stats["mean_energy"]
                for name, g in grads.items():
                    acc[name] = acc.get(name, 0.0) + g
            for name, t in net.params.items():
                t.grad = acc[name] / len(picks)
            loss_val = batch_energy / len(picks)
        else:
            loss = None
            for bi, inst_idx in enumerate(picks):
                rng = stream(seed, "egn_feat", epoch, bi)
                probs = mfa_forward(net, scaled[inst_idx], rng)
                term = egn_loss(probs, scaled[inst_idx], beta)
                loss = term if loss is None else ad.add(loss, term)
            loss = ad.mul(loss, 1.0 / len(picks))
            loss_val = float(loss.data)
            net.params.zero_grads()
            loss.backward()
        if not np.isfinite(loss_val):
            raise NumericError(f"non-finite baseline loss at epoch {epoch}")
        opt.step()

        row = {"epoch": epoch, "temperature": temp, "loss": loss_val,
               "val_eps_best": "", "val_eps_mean": ""}
        last = epoch == config.epochs - 1
        if val_instances and (epoch % config.val_every == 0 or last):
            eps_best, eps_mean = evaluate_ce(val_instances, val_oracle_energies, net,
                                             seed=int(stream(seed, "val", epoch).integers(1 << 62)),
                                             attempts=config.val_attempts)
            row["val_eps_best"], row["val_eps_mean"] = eps_best, eps_mean
            if out_dir and eps_best < best_eps:
                best_eps = eps_best
                best_path = os.path.join(out_dir, "best.ckpt")
                net.save(best_path)
        log_rows.append(row)

    if out_dir:
        final_path = os.path.join(out_dir, "final.ckpt")
        net.save(final_path)
        with open(os.path.join(out_dir, "log.csv"), "w", encoding="utf-8") as fh:
            cols = ["epoch", "temperature", "loss", "val_eps_best", "val_eps_mean"]
            fh.write(",".join(cols) + "\n")
            for row in log_rows:
                fh.write(",".join(repr(row[c]) if not isinstance(row[c], str) else row[c]
                                  for c in cols) + "\n")
    return BaselineTrainResult(net=net, log_rows=log_rows,
                               best_checkpoint=best_path, final_checkpoint=final_path)


def evaluate_ce(instances: list[ProblemInstance], oracle_energies: list[float],
                net: ProductNet, seed: int, attempts: int = 8) -> tuple[float, float]:
    """Mean best and mean average relative error of conditional-expectation
    decoding across a dataset."""
    best_vals, mean_vals = [], []
    for idx, inst in enumerate(instances):
        gen_model = inst.model
        if net.energy_scale is not None:
            gen_model = ising.scale_model(inst.model, *net.energy_scale)
        _, energies = decode_ce(inst, net, seed=int(stream(seed, "ce", idx).integers(1 << 62)),
                                attempts=attempts, model=gen_model)
        ref = oracle_energies[idx]
        errs = np.abs(np.array(energies) - ref) / abs(ref)
        best_vals.append(float(errs.min()))
        mean_vals.append(float(errs.mean()))
    return float(np.mean(best_vals)), float(np.mean(mean_vals))
