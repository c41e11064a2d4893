"""Clipped-ratio policy optimization for the autoregressive generator.

Each training epoch collects a fixed-horizon batch of token-generation
steps from several instances at the current temperature, scores each step
with a dense reward (negative energy increment, minus the temperature-
weighted action log-probability), computes advantages with generalized
advantage estimation, and then runs clipped importance-ratio updates over
the collected buffer. The temperature follows the cosine-modulated
annealing schedule, so the objective interpolates from an entropy-
regularized free energy to plain energy minimization.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, asdict, field

import numpy as np

from . import autodiff as ad
from . import ising
from .anneal import AnnealSchedule, temperature
from .autodiff import Tensor
from .baselines import standardize_dataset
from .errors import InputError, NumericError
from .exact import solve_instance
from .graphs import NodeOrdering, random_bfs_order
from .ising import ProblemInstance
from .nets import NetConfig, PolicyValueNet, make_optimizer
from .policy import GenerationState, PaddedProblem, build_batch, generate, pad_instance
from .rng import stream


def reward(delta_e: float, log_prob: float, beta: float | None) -> float:
    """Per-step reward: -(energy increment + log-prob / beta).

    beta is the inverse temperature; None (or infinity) disables the
    entropy term, realizing the zero-temperature limit. With token
    grouping, delta_e is the token's total energy increment and log_prob
    the token log-probability.
    """
    if beta is None or beta == math.inf:
        return -float(delta_e)
    if beta <= 0:
        raise InputError(f"beta must be positive, got {beta}")
    return -(float(delta_e) + float(log_prob) / beta)


def gae(rewards, values, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation for one trajectory.

    values must have one more entry than rewards, holding the successor
    value after the last step (zero at a terminal state). Returns
    (advantages, value targets) with targets = advantages + values[:-1].
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    horizon = rewards.shape[0]
    if values.shape[0] != horizon + 1:
        raise InputError("values must have len(rewards) + 1 entries")
    adv = np.zeros(horizon)
    running = 0.0
    for t in range(horizon - 1, -1, -1):
        delta = rewards[t] + gamma * values[t + 1] - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
    return adv, adv + values[:-1]


def gae_masked(rewards: np.ndarray, values: np.ndarray, bootstrap: np.ndarray,
               dones: np.ndarray, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized advantage estimation over (slots, horizon) arrays with
    episode boundaries marked in dones; bootstrap holds the successor value
    of each slot after the last collected step."""
    n_slots, horizon = rewards.shape
    adv = np.zeros_like(rewards)
    running = np.zeros(n_slots)
    next_value = bootstrap.astype(np.float64)
    for t in range(horizon - 1, -1, -1):
        not_done = 1.0 - dones[:, t]
        delta = rewards[:, t] + gamma * next_value * not_done - values[:, t]
        running = delta + gamma * lam * not_done * running
        adv[:, t] = running
        next_value = values[:, t]
    return adv, adv + values


@dataclass(frozen=True)
class PPOConfig:
    """Training hyperparameters.

    Reference defaults: clip 0.1, value coefficient 0.5, two buffer sweeps
    per epoch, gamma 1, lambda 1 - 1/horizon, 30 instances x 30 samples per
    collection phase. Desk-scale runs shrink the collection and minibatch
    sizes; the optimizer is momentum gradient descent with global
    gradient-norm clipping and can be switched to adam in the config.
    """

    horizon: int
    token_k: int = 5
    clip_eps: float = 0.1
    value_coef: float = 0.5
    n_repeat: int = 2
    gamma: float = 1.0
    gae_lambda: float | None = None  # None resolves to 1 - 1/horizon
    n_instances: int = 30            # instances per collection phase
    n_samples: int = 30              # trajectories per instance
    minibatch: tuple = (10, 10, 10)  # (instances, samples, steps) per minibatch
    lr: float = 1e-3
    lr_final: float | None = None    # cosine-decay target; None keeps lr constant
    epochs: int = 100
    advantage_norm: bool = True
    optimizer: str = "sgd"
    momentum: float = 0.9
    grad_clip: float = 1.0
    val_every: int = 10
    val_samples: int = 8

    def __post_init__(self):
        if not (0.0 < self.clip_eps < 1.0):
            raise InputError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if not (0.0 < self.gamma <= 1.0):
            raise InputError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.horizon < 1:
            raise InputError("horizon must be >= 1")
        if len(self.minibatch) != 3 or any(m < 1 for m in self.minibatch):
            raise InputError("minibatch must be three positive sizes")

    @property
    def lam(self) -> float:
        return self.gae_lambda if self.gae_lambda is not None else 1.0 - 1.0 / self.horizon


@dataclass
class EpisodeRef:
    """Everything needed to re-create any prefix state of one episode."""

    instance_index: int
    ordering: NodeOrdering
    actions: list[int] = field(default_factory=list)
    completed: bool = False
    raw_spins: np.ndarray | None = None


@dataclass
class StepRecord:
    episode: EpisodeRef
    tokens_done: int
    action: int
    log_prob: float
    value: float
    reward: float
    done: bool
    advantage: float = 0.0
    value_target: float = 0.0


class RolloutBuffer:
    """Collected step records laid out as (instance h, sample s, step t)."""

    def __init__(self, n_instances: int, n_samples: int, horizon: int):
        self.shape = (n_instances, n_samples, horizon)
        self.records: list[list[StepRecord]] = [[] for _ in range(n_instances * n_samples)]
        self.completed_episodes: list[EpisodeRef] = []

    def add(self, slot: int, record: StepRecord) -> None:
        self.records[slot].append(record)

    def record_at(self, h: int, s: int, t: int) -> StepRecord:
        return self.records[h * self.shape[1] + s][t]

    def all_records(self) -> list[StepRecord]:
        return [r for slot in self.records for r in slot]


@dataclass
class _TrainContext:
    padded: list[PaddedProblem]
    k: int


def _rebuild_state(ctx: _TrainContext, record: StepRecord, scaled_models) -> GenerationState:
    ep = record.episode
    model = scaled_models[ep.instance_index]
    return GenerationState.at_prefix(model, ctx.k, ep.ordering, ep.actions[:record.tokens_done])


def ppo_losses(records: list[StepRecord], net: PolicyValueNet, cfg: PPOConfig,
               ctx: _TrainContext, scaled_models) -> tuple[Tensor, Tensor, Tensor]:
    """Clipped policy loss, value regression loss, and their weighted sum
    over one minibatch of step records, evaluated at the current
    parameters."""
    states = [_rebuild_state(ctx, r, scaled_models) for r in records]
    batch, token_nodes, sample_graph = build_batch(states)
    log_probs, values = net.forward(batch, token_nodes, sample_graph)
    actions = np.array([r.action for r in records], dtype=np.int64)
    logp_new = ad.select_columns(log_probs, actions)
    logp_old = np.array([r.log_prob for r in records])
    ratio = ad.exp(ad.sub(logp_new, Tensor(logp_old)))
    adv = np.array([r.advantage for r in records])
    if cfg.advantage_norm:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    adv_t = Tensor(adv)
    unclipped = ad.mul(ratio, adv_t)
    clipped = ad.mul(ad.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv_t)
    policy_loss = ad.mul(ad.tmean(ad.minimum(unclipped, clipped)), -1.0)
    targets = Tensor(np.array([r.value_target for r in records]))
    diff = ad.sub(values, targets)
    value_loss = ad.tmean(ad.mul(diff, diff))
    combined = ad.add(policy_loss, ad.mul(value_loss, cfg.value_coef))
    return policy_loss, value_loss, combined


def collect_phase(ctx: _TrainContext, scaled_models, instance_ids: list[int],
                  net: PolicyValueNet, cfg: PPOConfig, beta: float | None,
                  seed: int, epoch: int) -> RolloutBuffer:
    """Roll the current policy for `horizon` steps in every slot.

    Each of the n_instances x n_samples slots runs episodes of the assigned
    instance back to back: when an episode finishes mid-phase its final
    state is recorded and the slot restarts with a fresh ordering. Episodes
    still open at the end of the phase are truncated and later bootstrapped
    with the value of their successor state.
    """
    H, S = cfg.n_instances, cfg.n_samples
    buffer = RolloutBuffer(H, S, cfg.horizon)
    states: list[GenerationState] = []
    episodes: list[EpisodeRef] = []
    rngs = []
    episode_counter = [0] * (H * S)

    def fresh_episode(slot: int) -> tuple[GenerationState, EpisodeRef]:
        h = slot // S
        inst_idx = instance_ids[h]
        counter = episode_counter[slot]
        episode_counter[slot] += 1
        oseed = int(stream(seed, "collect_order", epoch, slot, counter).integers(1 << 62))
        padded = ctx.padded[inst_idx]
        ordering = random_bfs_order(padded.instance.graph, oseed,
                                    restrict_start_to=padded.base_n)
        return GenerationState(scaled_models[inst_idx], ctx.k, ordering), \
            EpisodeRef(instance_index=inst_idx, ordering=ordering)

    for slot in range(H * S):
        state, ep = fresh_episode(slot)
        states.append(state)
        episodes.append(ep)
        rngs.append(stream(seed, "collect_draw", epoch, slot))

    for t in range(cfg.horizon):
        batch, token_nodes, sample_graph = build_batch(states)
        log_probs, values = net.forward(batch, token_nodes, sample_graph)
        lp = log_probs.data
        vals = values.data
        for slot in range(H * S):
            action = int(rngs[slot].choice(lp.shape[1], p=np.exp(lp[slot])))
            logp_a = float(lp[slot, action])
            delta = states[slot].apply_token(action)
            episodes[slot].actions.append(action)
            done = states[slot].done
            buffer.add(slot, StepRecord(
                episode=episodes[slot], tokens_done=states[slot].steps_done - 1,
                action=action, log_prob=logp_a, value=float(vals[slot]),
                reward=reward(delta, logp_a, beta), done=done))
            if done:
                episodes[slot].completed = True
                episodes[slot].raw_spins = states[slot].spins.copy()
                buffer.completed_episodes.append(episodes[slot])
                states[slot], episodes[slot] = fresh_episode(slot)

    batch, token_nodes, sample_graph = build_batch(states)
    _, boot_values = net.forward(batch, token_nodes, sample_graph)
    rewards = np.array([[r.reward for r in buffer.records[slot]] for slot in range(H * S)])
    values_arr = np.array([[r.value for r in buffer.records[slot]] for slot in range(H * S)])
    dones = np.array([[1.0 if r.done else 0.0 for r in buffer.records[slot]] for slot in range(H * S)])
    adv, targets = gae_masked(rewards, values_arr, boot_values.data, dones, cfg.gamma, cfg.lam)
    for slot in range(H * S):
        for t in range(cfg.horizon):
            rec = buffer.records[slot][t]
            rec.advantage = float(adv[slot, t])
            rec.value_target = float(targets[slot, t])
    return buffer


def _minibatch_plan(cfg: PPOConfig, rng: np.random.Generator):
    """Seeded partition of the (h, s, t) axes into minibatch index groups
    covering every record exactly once."""
    hm, nm, sm = cfg.minibatch
    h_groups = np.array_split(rng.permutation(cfg.n_instances), max(1, math.ceil(cfg.n_instances / hm)))
    s_groups = np.array_split(rng.permutation(cfg.n_samples), max(1, math.ceil(cfg.n_samples / nm)))
    t_groups = np.array_split(rng.permutation(cfg.horizon), max(1, math.ceil(cfg.horizon / sm)))
    for hg in h_groups:
        for sg in s_groups:
            for tg in t_groups:
                yield hg, sg, tg


@dataclass
class TrainResult:
    net: PolicyValueNet
    log_rows: list[dict]
    checkpoints: dict
    energy_scale: tuple[float, float]


LOG_COLUMNS = ["epoch", "temperature", "policy_loss", "value_loss", "loss",
               "mean_energy", "free_energy", "entropy_est", "val_eps_best", "val_eps_mean"]


def evaluate_policy(instances: list[ProblemInstance], oracle_energies: list[float],
                    net: PolicyValueNet, k: int, seed: int, n_samples: int,
                    mode: str = "sample", n_orderings: int = 1) -> tuple[float, float]:
    """Mean best and mean average relative error of decoded solutions over a
    dataset, measured on the unscaled energies against oracle optima."""
    best_vals, mean_vals = [], []
    for idx, inst in enumerate(instances):
        if mode == "greedy":
            results = generate(inst, net, k, "greedy", seed=int(stream(seed, "evalg", idx).integers(1 << 62)),
                               n_orderings=n_orderings if n_orderings > 1 else n_samples)
        else:
            results = generate(inst, net, k, "sample", seed=int(stream(seed, "evals", idx).integers(1 << 62)),
                               n_orderings=n_orderings, n_samples=n_samples)
        energies = np.array([ising.energy(inst.model, r.spins) for r in results])
        ref = oracle_energies[idx]
        errs = np.abs(energies - ref) / abs(ref)
        best_vals.append(float(errs.min()))
        mean_vals.append(float(errs.mean()))
    return float(np.mean(best_vals)), float(np.mean(mean_vals))


def train(train_instances: list[ProblemInstance],
          val_instances: list[ProblemInstance],
          net_config: NetConfig,
          cfg: PPOConfig,
          schedule: AnnealSchedule,
          seed: int,
          out_dir: str | None = None,
          val_oracle_energies: list[float] | None = None) -> TrainResult:
    """Full training loop: standardize energies, collect, update, anneal.

    Writes an effective-config echo, a per-epoch CSV log, and three
    checkpoints (best validation best-error, best validation mean-error,
    final parameters) into out_dir when given.
    """
    if net_config.token_k != cfg.token_k:
        raise InputError("network and training token sizes disagree")
    k = cfg.token_k
    mean, std = standardize_dataset(train_instances, seed)
    ctx = _TrainContext(padded=[pad_instance(inst, k) for inst in train_instances], k=k)
    scaled_models = [ising.scale_model(p.instance.model, mean, std) for p in ctx.padded]
    net = PolicyValueNet.create(net_config, seed=seed, energy_scale=(mean, std))
    opt = make_optimizer(cfg.optimizer, net.params, cfg.lr,
                         momentum=cfg.momentum, grad_clip=cfg.grad_clip)
    if val_instances and val_oracle_energies is None:
        val_oracle_energies = [solve_instance(inst).best_energy for inst in val_instances]

    paths: dict[str, str] = {}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        echo = {"net": asdict(net_config), "ppo": asdict(cfg), "schedule": asdict(schedule),
                "seed": seed, "energy_scale": [mean, std],
                "n_train": len(train_instances), "n_val": len(val_instances)}
        with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
            json.dump(echo, fh, indent=2, sort_keys=True)
            fh.write("\n")

    rotation = stream(seed, "instance_rotation").permutation(len(train_instances))
    update_rng = stream(seed, "minibatch_order")
    log_rows: list[dict] = []
    best = {"val_eps_best": np.inf, "val_eps_mean": np.inf}

    for epoch in range(cfg.epochs):
        temp = temperature(epoch, schedule)
        beta = None if temp == 0.0 else 1.0 / temp
        if cfg.lr_final is not None and cfg.epochs > 1:
            frac = epoch / (cfg.epochs - 1)
            opt.lr = cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1 + math.cos(math.pi * frac))
        instance_ids = [int(rotation[(epoch * cfg.n_instances + h) % len(train_instances)])
                        for h in range(cfg.n_instances)]
        buffer = collect_phase(ctx, scaled_models, instance_ids, net, cfg, beta, seed, epoch)

        p_losses, v_losses, losses = [], [], []
        for _ in range(cfg.n_repeat):
            for hg, sg, tg in _minibatch_plan(cfg, update_rng):
                records = [buffer.record_at(h, s, t) for h in hg for s in sg for t in tg]
                policy_loss, value_loss, combined = ppo_losses(records, net, cfg, ctx, scaled_models)
                if not np.isfinite(combined.data):
                    raise NumericError(f"non-finite loss at epoch {epoch}")
                net.params.zero_grads()
                combined.backward()
                opt.step()
                p_losses.append(float(policy_loss.data))
                v_losses.append(float(value_loss.data))
                losses.append(float(combined.data))

        stats = _episode_stats(buffer, ctx, beta, scaled_models)
        row = {"epoch": epoch, "temperature": temp,
               "policy_loss": float(np.mean(p_losses)), "value_loss": float(np.mean(v_losses)),
               "loss": float(np.mean(losses)), **stats,
               "val_eps_best": "", "val_eps_mean": ""}
        last = epoch == cfg.epochs - 1
        if val_instances and (epoch % cfg.val_every == 0 or last):
            eb, em = evaluate_policy(val_instances, val_oracle_energies, net, k,
                                     seed=int(stream(seed, "val", epoch).integers(1 << 62)),
                                     n_samples=cfg.val_samples)
            row["val_eps_best"], row["val_eps_mean"] = eb, em
            for key, value in (("val_eps_best", eb), ("val_eps_mean", em)):
                if out_dir and value < best[key]:
                    best[key] = value
                    paths[key] = os.path.join(out_dir, f"best_{key[4:]}.ckpt")
                    net.save(paths[key])
        log_rows.append(row)

    if out_dir:
        paths["final"] = os.path.join(out_dir, "final.ckpt")
        net.save(paths["final"])
        with open(os.path.join(out_dir, "log.csv"), "w", encoding="utf-8") as fh:
            fh.write(",".join(LOG_COLUMNS) + "\n")
            for row in log_rows:
                fh.write(",".join(row[c] if isinstance(row[c], str) else repr(row[c])
                                  for c in LOG_COLUMNS) + "\n")
    return TrainResult(net=net, log_rows=log_rows, checkpoints=paths, energy_scale=(mean, std))


def _episode_stats(buffer: RolloutBuffer, ctx: _TrainContext, beta: float | None,
                   scaled_models) -> dict:
    """Scaled-energy, free-energy, and entropy estimates over the episodes
    completed during one collection phase. The free energy is estimated as
    the mean of scaled energy plus temperature-weighted log-probability."""
    if not buffer.completed_episodes:
        return {"mean_energy": float("nan"), "free_energy": float("nan"),
                "entropy_est": float("nan")}
    logp_by_episode: dict[int, float] = {}
    for slot_records in buffer.records:
        for r in slot_records:
            if r.episode.completed:
                key = id(r.episode)
                logp_by_episode[key] = logp_by_episode.get(key, 0.0) + r.log_prob
    energies, logps = [], []
    for ep in buffer.completed_episodes:
        energies.append(ising.energy(scaled_models[ep.instance_index], ep.raw_spins))
        logps.append(logp_by_episode.get(id(ep), 0.0))
    energies = np.array(energies)
    logps = np.array(logps)
    mean_energy = float(energies.mean())
    free = mean_energy if beta is None else float((energies + logps / beta).mean())
    return {"mean_energy": mean_energy, "free_energy": free,
            "entropy_est": float(-logps.mean())}
