"""Ising encodings of graph problems and energy evaluation.

A problem instance is encoded as a quadratic energy over spins in {-1, +1}:

    E(sigma) = sum_{i<j} J_ij sigma_i sigma_j + sum_i B_i sigma_i + offset

The binary and spin forms are related by q_i = (sigma_i + 1) / 2. The
constant `offset` keeps both forms numerically identical for every
assignment, which the tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegenerateInputError, InputError, StateError
from .graphs import Graph, NodeOrdering, complement

KINDS = ("mis", "mvc", "maxcl", "maxcut")
SET_KINDS = ("mis", "mvc", "maxcl")  # kinds with an A/B penalty split


class IsingModel:
    """Immutable quadratic spin energy: couplings, fields, constant offset."""

    __slots__ = ("n", "fields", "offset", "coup_i", "coup_j", "coup_v", "_adj")

    def __init__(self, n: int, couplings: dict, fields, offset: float = 0.0) -> None:
        self.n = int(n)
        fields = np.asarray(fields, dtype=np.float64)
        if fields.shape != (self.n,):
            raise InputError(f"fields must have shape ({self.n},), got {fields.shape}")
        self.fields = fields
        self.fields.setflags(write=False)
        self.offset = float(offset)
        items = []
        for (i, j), v in couplings.items():
            i, j = int(i), int(j)
            if not (0 <= i < j < self.n):
                raise InputError(f"coupling key ({i}, {j}) must satisfy 0 <= i < j < n")
            if v != 0.0:
                items.append((i, j, float(v)))
        items.sort()
        self.coup_i = np.array([a for a, _, _ in items], dtype=np.int64)
        self.coup_j = np.array([b for _, b, _ in items], dtype=np.int64)
        self.coup_v = np.array([v for _, _, v in items], dtype=np.float64)
        for arr in (self.coup_i, self.coup_j, self.coup_v):
            arr.setflags(write=False)
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for i, j, v in items:
            adj[i].append((j, v))
            adj[j].append((i, v))
        self._adj = tuple(tuple(a) for a in adj)

    @property
    def couplings(self) -> dict:
        return {(int(i), int(j)): float(v) for i, j, v in zip(self.coup_i, self.coup_j, self.coup_v)}

    def neighbors(self, i: int) -> tuple:
        """Pairs (j, J_ij) for every stored coupling touching node i."""
        return self._adj[i]

    def graph(self) -> Graph:
        """Interaction graph of the nonzero couplings."""
        return Graph(self.n, list(zip(self.coup_i, self.coup_j)))

    def __repr__(self) -> str:
        return f"IsingModel(n={self.n}, couplings={len(self.coup_v)}, offset={self.offset:g})"


@dataclass(frozen=True)
class ProblemInstance:
    """A graph problem together with its spin encoding.

    For maximum-clique the stored `graph` is the complement on which the
    independent-set energy is evaluated; `original_graph` keeps the input
    graph for reporting.
    """

    kind: str
    graph: Graph
    penalty_a: float
    penalty_b: float
    model: IsingModel
    original_graph: Graph

    @property
    def n(self) -> int:
        return self.model.n


def as_spins(s) -> np.ndarray:
    s = np.asarray(s)
    if not np.all(np.isin(s, (-1, 1))):
        raise InputError("spin values must be -1 or +1")
    return s.astype(np.int8)


def spins_to_binary(s) -> np.ndarray:
    """q = (sigma + 1) / 2."""
    return ((as_spins(s) + 1) // 2).astype(np.int8)


def binary_to_spins(q) -> np.ndarray:
    q = np.asarray(q)
    if not np.all(np.isin(q, (0, 1))):
        raise InputError("binary values must be 0 or 1")
    return (2 * q.astype(np.int8) - 1).astype(np.int8)


def encode(kind: str, graph: Graph, penalty_a: float = 1.0, penalty_b: float = 1.1) -> ProblemInstance:
    """Build the spin encoding of a graph problem.

    kind is one of 'mis', 'mvc', 'maxcl', 'maxcut'. For the set problems
    the penalties must satisfy 0 < penalty_a < penalty_b so that every
    energy minimum is feasible. Penalties are ignored for 'maxcut'.
    """
    kind = kind.lower()
    if kind not in KINDS:
        raise InputError(f"unknown problem kind {kind!r}; expected one of {KINDS}")
    original = graph
    if kind == "maxcl":
        graph = complement(graph)
    n = graph.n
    if kind == "maxcut":
        couplings = {(u, v): 0.5 for (u, v) in graph.edges}
        fields = np.zeros(n)
        offset = -0.5 * graph.n_edges
        a = b = 0.0
    else:
        a, b = float(penalty_a), float(penalty_b)
        if not (0.0 < a < b):
            raise InputError(f"penalties must satisfy 0 < A < B, got A={a}, B={b}")
        quarter = b / 4.0
        couplings = {(u, v): quarter for (u, v) in graph.edges}
        deg = np.array([graph.degree(i) for i in range(n)], dtype=np.float64)
        if kind in ("mis", "maxcl"):
            fields = -a / 2.0 + quarter * deg
            offset = -a * n / 2.0 + quarter * graph.n_edges
        else:  # mvc
            fields = a / 2.0 - quarter * deg
            offset = a * n / 2.0 + quarter * graph.n_edges
    model = IsingModel(n, couplings, fields, offset)
    return ProblemInstance(kind=kind, graph=graph, penalty_a=a, penalty_b=b,
                           model=model, original_graph=original)


def binary_energy(instance: ProblemInstance, q) -> float:
    """Evaluate the binary-form objective directly; test oracle for encode."""
    q = np.asarray(q, dtype=np.float64)
    g, a, b = instance.graph, instance.penalty_a, instance.penalty_b
    if instance.kind == "maxcut":
        s = 2.0 * q - 1.0
        return float(-sum((1.0 - s[u] * s[v]) / 2.0 for (u, v) in g.edges))
    if instance.kind in ("mis", "maxcl"):
        return float(-a * q.sum() + b * sum(q[u] * q[v] for (u, v) in g.edges))
    return float(a * q.sum() + b * sum((1.0 - q[u]) * (1.0 - q[v]) for (u, v) in g.edges))


def energy(model: IsingModel, s) -> float:
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (model.n,):
        raise InputError(f"state length {s.shape} does not match n={model.n}")
    pair = float(np.dot(s[model.coup_i] * s[model.coup_j], model.coup_v)) if model.coup_v.size else 0.0
    return pair + float(np.dot(model.fields, s)) + model.offset


def energy_batch(model: IsingModel, states: np.ndarray) -> np.ndarray:
    """Energies of a (batch, n) matrix of spin states."""
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2 or states.shape[1] != model.n:
        raise InputError(f"states must have shape (batch, {model.n})")
    out = states @ model.fields + model.offset
    if model.coup_v.size:
        out = out + (states[:, model.coup_i] * states[:, model.coup_j]) @ model.coup_v
    return out


def delta_energy(model: IsingModel, ordering: NodeOrdering, spins, i: int) -> float:
    """Energy increment of the i-th generated spin under `ordering`.

    Equals sigma_v * (sum over already-generated neighbors of J * sigma + B_v)
    where v = ordering.order[i]. Summing over all steps recovers
    energy(model, s) - offset exactly.
    """
    spins = np.asarray(spins)
    v = int(ordering.order[i])
    if spins[v] not in (-1, 1):
        raise StateError(f"spin at step {i} (node {v}) is not assigned")
    acc = model.fields[v]
    rank = ordering.rank
    for (u, j_uv) in model.neighbors(v):
        if rank[u] < i:
            if spins[u] not in (-1, 1):
                raise StateError(f"prefix spin at node {u} is not assigned")
            acc += j_uv * float(spins[u])
    return float(spins[v]) * float(acc)


def delta_energy_trace(model: IsingModel, ordering: NodeOrdering, spins) -> np.ndarray:
    """All per-step increments for a full assignment."""
    return np.array([delta_energy(model, ordering, spins, i) for i in range(model.n)])


def violation_energy(instance: ProblemInstance, s) -> float:
    """Constraint part of the binary objective (the B term); zero iff feasible."""
    q = spins_to_binary(s)
    g = instance.graph
    if instance.kind == "maxcut":
        return 0.0
    if instance.kind in ("mis", "maxcl"):
        bad = sum(int(q[u] and q[v]) for (u, v) in g.edges)
    else:
        bad = sum(int((not q[u]) and (not q[v])) for (u, v) in g.edges)
    return instance.penalty_b * bad


def _violation_counts(instance: ProblemInstance, q: np.ndarray) -> np.ndarray:
    """Per-node count of violated constraints the node could fix by flipping.
    The constraint edges are exactly the stored coupling pairs."""
    model = instance.model
    ci, cj = model.coup_i, model.coup_j
    if ci.size == 0:
        return np.zeros(instance.graph.n, dtype=np.int64)
    if instance.kind in ("mis", "maxcl"):
        bad = (q[ci] == 1) & (q[cj] == 1)
    else:
        bad = (q[ci] == 0) & (q[cj] == 0)
    return (np.bincount(ci[bad], minlength=instance.graph.n)
            + np.bincount(cj[bad], minlength=instance.graph.n))


def repair(instance: ProblemInstance, s) -> np.ndarray:
    """Flip spins until no constraint is violated.

    Each step flips the node involved in the most violations (ties go to
    the lowest node id) to its constraint-satisfying value: out of the set
    for independent-set problems, into the cover for vertex cover. Each
    flip strictly reduces the violated-constraint count, so this always
    terminates, and with A < B it never increases the energy.
    """
    s = as_spins(s).copy()
    if instance.kind == "maxcut":
        return s
    q = spins_to_binary(s)
    into_cover = instance.kind == "mvc"
    while True:
        counts = _violation_counts(instance, q)
        if counts.max(initial=0) == 0:
            break
        node = int(np.argmax(counts))
        q[node] = 1 if into_cover else 0
    return binary_to_spins(q)


def scale_model(model: IsingModel, mean: float, std: float) -> IsingModel:
    """Affine rescale so energies map to (E - mean) / std for every state."""
    if std <= 0:
        raise DegenerateInputError("energy scale std must be positive")
    couplings = {(int(i), int(j)): float(v) / std
                 for i, j, v in zip(model.coup_i, model.coup_j, model.coup_v)}
    return IsingModel(model.n, couplings, model.fields / std, (model.offset - mean) / std)


def standardize(instance: ProblemInstance, reference_states: Iterable) -> tuple[IsingModel, float, float]:
    """Rescale the instance energy using reference-state statistics.

    Returns (scaled model, mean, std) where mean and std are taken over the
    energies of the reference states and the scaled model satisfies
    energy_scaled(sigma) == (energy(sigma) - mean) / std for all sigma.
    """
    states = [as_spins(s) for s in reference_states]
    if len(states) < 2:
        raise InputError("need at least 2 reference states")
    energies = np.array([energy(instance.model, s) for s in states])
    mean = float(energies.mean())
    std = float(energies.std())
    if std == 0.0:
        raise DegenerateInputError("reference energies have zero spread")
    return scale_model(instance.model, mean, std), mean, std
