"""Autoregressive solution generation with token grouping and pruning.

Spins are generated k at a time along a breadth-first node ordering. The
network sees only the still-live part of the graph: once a token of spins
is emitted, each generated spin folds its couplings into the field terms
of its live neighbors and disappears from the graph, so the per-step
energy increments computed on the shrinking graph sum to the exact energy
of the completed assignment (minus the model's constant offset).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ising
from .errors import InputError, StateError
from .graphs import Graph, NodeOrdering, random_bfs_order
from .ising import IsingModel, ProblemInstance
from .nets import GraphBatch, PolicyValueNet
from .rng import stream


@dataclass(frozen=True)
class PaddedProblem:
    """A problem instance padded with isolated zero-field spins so the spin
    count is a multiple of the token size. Padding never changes the energy
    of any extension of an assignment."""

    instance: ProblemInstance
    base_n: int
    k: int

    @property
    def n(self) -> int:
        return self.instance.n


def pad_instance(instance: ProblemInstance, k: int) -> PaddedProblem:
    if k < 1:
        raise InputError(f"token size must be >= 1, got {k}")
    n = instance.n
    pad = (-n) % k
    if pad == 0:
        return PaddedProblem(instance=instance, base_n=n, k=k)
    model = instance.model
    padded_model = IsingModel(n + pad, model.couplings,
                              np.concatenate([model.fields, np.zeros(pad)]), model.offset)
    padded_graph = Graph(n + pad, instance.graph.edges)
    padded = ProblemInstance(kind=instance.kind, graph=padded_graph,
                             penalty_a=instance.penalty_a, penalty_b=instance.penalty_b,
                             model=padded_model, original_graph=instance.original_graph)
    return PaddedProblem(instance=padded, base_n=n, k=k)


# node state tags: set to +1 (I), set to -1 (II), generated now (III), later (IV)
TAG_NOW = 2
TAG_LATER = 3


class GenerationState:
    """Mutable state of one generation episode. Single-owner."""

    __slots__ = ("model", "k", "ordering", "live_fields", "alive", "spins",
                 "cursor", "delta_history")

    def __init__(self, model: IsingModel, k: int, ordering: NodeOrdering):
        if model.n % k != 0:
            raise InputError("model size must be a multiple of k; pad the instance first")
        self.model = model
        self.k = k
        self.ordering = ordering
        self.live_fields = model.fields.copy()
        self.alive = np.ones(model.n, dtype=bool)
        self.spins = np.zeros(model.n, dtype=np.int8)
        self.cursor = 0
        self.delta_history: list[float] = []

    @property
    def done(self) -> bool:
        return self.cursor >= self.model.n

    @property
    def n_steps(self) -> int:
        return self.model.n // self.k

    @property
    def steps_done(self) -> int:
        return self.cursor // self.k

    def token_nodes(self) -> np.ndarray:
        if self.done:
            raise StateError("all spins are already generated")
        return self.ordering.order[self.cursor:self.cursor + self.k]

    def apply_token(self, config_index: int) -> float:
        """Assign the current token's spins from the configuration index and
        prune them from the live graph.

        Bit j of config_index (least significant first) gives spin +1 to the
        j-th token node in generation order. Returns the exact energy
        increment of the token, including couplings inside the token.
        """
        token = self.token_nodes()
        token_set = set(int(t) for t in token)
        sigma = {}
        delta = 0.0
        for pos, node in enumerate(token):
            node = int(node)
            s = 1 if (config_index >> pos) & 1 else -1
            sigma[node] = s
            delta += s * self.live_fields[node]
            self.spins[node] = s
        rank = self.ordering.rank
        for node, s in sigma.items():
            for (nbr, j_val) in self.model.neighbors(node):
                if nbr in token_set:
                    if rank[nbr] < rank[node]:
                        delta += j_val * s * sigma[nbr]
                elif self.alive[nbr]:
                    self.live_fields[nbr] += j_val * s
        for node in token_set:
            self.alive[node] = False
        self.cursor += self.k
        self.delta_history.append(float(delta))
        return float(delta)

    @classmethod
    def at_prefix(cls, model: IsingModel, k: int, ordering: NodeOrdering,
                  actions) -> "GenerationState":
        """Reconstruct the state reached after applying the given token
        configuration actions, without replaying the network."""
        state = cls(model, k, ordering)
        for a in actions:
            state.apply_token(int(a))
        return state


@dataclass(frozen=True)
class TokenDistribution:
    """Distribution over the 2^k joint configurations of the current token.

    Configuration index encoding: bit j (LSB) is 1 iff the j-th token node
    in generation order takes spin +1.
    """

    probs: np.ndarray
    log_probs: np.ndarray


def state_features(state: GenerationState) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-node features and edges of the live subgraph.

    Returns (node_x, edge_src, edge_dst, edge_attr, live_nodes) where edge
    endpoints are indices into live_nodes and both directions of every live
    coupling are present.
    """
    model, k = state.model, state.k
    live_nodes = np.flatnonzero(state.alive)
    local = np.full(model.n, -1, dtype=np.int64)
    local[live_nodes] = np.arange(live_nodes.size)
    x = np.zeros((live_nodes.size, 5 + k), dtype=np.float64)
    x[:, 0] = state.live_fields[live_nodes]
    x[:, 1 + TAG_LATER] = 1.0
    token = state.token_nodes()
    for pos, node in enumerate(token):
        li = local[int(node)]
        x[li, 1 + TAG_LATER] = 0.0
        x[li, 1 + TAG_NOW] = 1.0
        x[li, 5 + pos] = 1.0
    mask = state.alive[model.coup_i] & state.alive[model.coup_j]
    src = local[model.coup_i[mask]]
    dst = local[model.coup_j[mask]]
    val = model.coup_v[mask]
    edge_src = np.concatenate([src, dst])
    edge_dst = np.concatenate([dst, src])
    edge_attr = np.concatenate([val, val]).reshape(-1, 1)
    return x, edge_src, edge_dst, edge_attr, live_nodes


def build_batch(states: list[GenerationState]) -> tuple[GraphBatch, np.ndarray, np.ndarray]:
    """Stack the live subgraphs of several states into one disjoint union.

    Returns (batch, token_nodes, sample_graph): token_nodes holds, per
    state, the batch-absolute indices of its current token in generation
    order; sample_graph maps each state to its graph slot.
    """
    xs, srcs, dsts, attrs, graphs, tokens = [], [], [], [], [], []
    offset = 0
    for gi, state in enumerate(states):
        x, es, ed, ea, live_nodes = state_features(state)
        local = np.full(state.model.n, -1, dtype=np.int64)
        local[live_nodes] = np.arange(live_nodes.size)
        xs.append(x)
        srcs.append(es + offset)
        dsts.append(ed + offset)
        attrs.append(ea)
        graphs.append(np.full(live_nodes.size, gi, dtype=np.int64))
        tokens.append(local[state.token_nodes()] + offset)
        offset += live_nodes.size
    batch = GraphBatch(
        node_x=np.concatenate(xs, axis=0),
        edge_src=np.concatenate(srcs) if srcs else np.zeros(0, dtype=np.int64),
        edge_dst=np.concatenate(dsts) if dsts else np.zeros(0, dtype=np.int64),
        edge_attr=np.concatenate(attrs, axis=0) if attrs else np.zeros((0, 1)),
        node_graph=np.concatenate(graphs),
        n_graphs=len(states),
    )
    return batch, np.stack(tokens), np.arange(len(states), dtype=np.int64)


def token_step(state: GenerationState, net: PolicyValueNet) -> tuple[TokenDistribution, float]:
    """Network forward pass for one state: the token distribution and the
    value estimate of the current state."""
    if state.done:
        raise StateError("generation already exhausted")
    if net.config.token_k != state.k:
        raise InputError(f"network token size {net.config.token_k} != state token size {state.k}")
    batch, token_nodes, sample_graph = build_batch([state])
    log_probs, value = net.forward(batch, token_nodes, sample_graph)
    lp = log_probs.data[0]
    return TokenDistribution(probs=np.exp(lp), log_probs=lp), float(value.data[0])


@dataclass(frozen=True)
class GenerationResult:
    """One generated solution: the repaired spins on the original nodes, the
    raw (pre-repair) spins, and the per-step bookkeeping of the episode.
    The ordering and the padded raw spins make the trajectory re-scorable."""

    spins: np.ndarray
    raw_spins: np.ndarray
    raw_spins_padded: np.ndarray
    step_log_probs: np.ndarray
    step_delta_e: np.ndarray
    ordering_index: int
    ordering: NodeOrdering
    n_steps: int

    @property
    def log_prob(self) -> float:
        return float(self.step_log_probs.sum())

    def actions(self, k: int) -> list[int]:
        """Token configuration indices that reproduce this trajectory."""
        out = []
        for t in range(self.n_steps):
            nodes = self.ordering.order[t * k:(t + 1) * k]
            bits = 0
            for pos, node in enumerate(nodes):
                if self.raw_spins_padded[int(node)] > 0:
                    bits |= 1 << pos
            out.append(bits)
        return out


def _generation_model(instance_padded: ProblemInstance, net: PolicyValueNet) -> IsingModel:
    if net.energy_scale is None:
        return instance_padded.model
    mean, std = net.energy_scale
    return ising.scale_model(instance_padded.model, mean, std)


def generate(instance: ProblemInstance, net: PolicyValueNet, k: int, mode: str,
             seed: int, n_orderings: int = 1, n_samples: int = 1) -> list[GenerationResult]:
    """Generate solutions for one instance.

    mode 'greedy' decodes the argmax configuration at every step (ties go
    to the lowest configuration index) once per ordering; mode 'sample'
    draws configurations from the token distribution, n_samples total split
    evenly over n_orderings distinct breadth-first orderings. Every
    returned solution is repaired to feasibility; raw spins are kept for
    bookkeeping checks.
    """
    if mode not in ("greedy", "sample"):
        raise InputError(f"mode must be 'greedy' or 'sample', got {mode!r}")
    if net.config.token_k != k:
        raise InputError(f"network token size {net.config.token_k} != requested k {k}")
    if n_orderings < 1:
        raise InputError("n_orderings must be >= 1")
    padded = pad_instance(instance, k)
    gen_model = _generation_model(padded.instance, net)
    if mode == "greedy":
        per_ordering = 1
    else:
        if n_samples % n_orderings != 0:
            raise InputError("n_samples must be divisible by n_orderings")
        per_ordering = n_samples // n_orderings

    states: list[GenerationState] = []
    meta: list[tuple[int, np.random.Generator | None]] = []
    for o in range(n_orderings):
        ordering_seed = int(stream(seed, "ordering", o).integers(1 << 62))
        ordering = random_bfs_order(padded.instance.graph, ordering_seed,
                                    restrict_start_to=padded.base_n)
        for s in range(per_ordering):
            states.append(GenerationState(gen_model, k, ordering))
            rng = None if mode == "greedy" else stream(seed, "draw", o, s)
            meta.append((o, rng))

    n_steps = states[0].n_steps
    logps = [[] for _ in states]
    for _ in range(n_steps):
        batch, token_nodes, sample_graph = build_batch(states)
        log_probs, _ = net.forward(batch, token_nodes, sample_graph)
        lp = log_probs.data
        for idx, state in enumerate(states):
            if mode == "greedy":
                action = int(np.argmax(lp[idx]))
            else:
                action = int(meta[idx][1].choice(lp.shape[1], p=np.exp(lp[idx])))
            logps[idx].append(lp[idx][action])
            state.apply_token(action)

    results = []
    for idx, state in enumerate(states):
        raw = state.spins[:padded.base_n].copy()
        repaired = ising.repair(instance, raw)
        results.append(GenerationResult(
            spins=repaired, raw_spins=raw, raw_spins_padded=state.spins.copy(),
            step_log_probs=np.array(logps[idx]),
            step_delta_e=np.array(state.delta_history),
            ordering_index=meta[idx][0],
            ordering=state.ordering,
            n_steps=n_steps,
        ))
    return results


def rescore(instance: ProblemInstance, net: PolicyValueNet, k: int,
            ordering: NodeOrdering, actions) -> np.ndarray:
    """Log-probability of each token action when the stored trajectory is
    replayed through the network; the oracle for log-prob bookkeeping."""
    padded = pad_instance(instance, k)
    gen_model = _generation_model(padded.instance, net)
    state = GenerationState(gen_model, k, ordering)
    out = []
    for action in actions:
        dist, _ = token_step(state, net)
        out.append(dist.log_probs[int(action)])
        state.apply_token(int(action))
    return np.array(out)
