"""Exact ground-truth solvers at desk scale.

Two paths produce certified optima: exhaustive enumeration of all 2^n spin
assignments for general models, and a branch-and-bound search over
independent sets for models whose structure comes from the set problems
(independent set directly, vertex cover through complementation of the
selected set). Full Boltzmann tables are enumerated for distribution-level
checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, InputError
from .graphs import Graph
from .ising import IsingModel, ProblemInstance, energy, energy_batch

EXHAUSTIVE_LIMIT = 26
BRANCH_AND_BOUND_LIMIT = 64
AUTO_BB_THRESHOLD = 18  # set problems switch to branch-and-bound above this
_BLOCK_BITS = 16
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class OracleResult:
    best_state: np.ndarray
    best_energy: float
    optimum_count: int | None  # None when counting was skipped
    nodes_explored: int


@dataclass(frozen=True)
class BoltzmannTable:
    """Exact Boltzmann distribution over all 2^n assignments.

    State index encoding: bit i (LSB first) is 1 iff spin i is +1.
    """

    beta: float
    probs: np.ndarray
    partition_log: float
    n: int

    def state(self, index: int) -> np.ndarray:
        bits = (index >> np.arange(self.n)) & 1
        return (2 * bits - 1).astype(np.int8)

    def prob(self, state) -> float:
        state = np.asarray(state)
        index = int(np.sum(((state + 1) // 2).astype(np.int64) << np.arange(self.n)))
        return float(self.probs[index])


def all_states(n: int) -> np.ndarray:
    """(2^n, n) matrix of all spin assignments in index order."""
    idx = np.arange(1 << n, dtype=np.int64)
    return (2 * ((idx[:, None] >> np.arange(n)) & 1) - 1).astype(np.int8)


def _exhaustive_min(model: IsingModel) -> OracleResult:
    n = model.n
    total = 1 << n
    best_e = np.inf
    best_idx = 0
    count = 0
    block = 1 << min(_BLOCK_BITS, n)
    for start in range(0, total, block):
        idx = np.arange(start, min(start + block, total), dtype=np.int64)
        states = (2 * ((idx[:, None] >> np.arange(n)) & 1) - 1).astype(np.float64)
        energies = energy_batch(model, states)
        lo = float(energies.min())
        tol = _TIE_RTOL * max(1.0, abs(min(lo, best_e)))
        if lo < best_e - tol:
            best_e = lo
            best_idx = int(idx[int(np.argmin(energies))])
            count = int(np.sum(energies <= best_e + tol))
        elif lo <= best_e + tol:
            count += int(np.sum(energies <= best_e + tol))
    bits = (best_idx >> np.arange(n)) & 1
    state = (2 * bits - 1).astype(np.int8)
    return OracleResult(best_state=state, best_energy=float(energy(model, state)),
                        optimum_count=count, nodes_explored=total)


def _greedy_clique_cover_bound(candidates: int, adj: list[int]) -> int:
    """Number of cliques in a greedy cover of the candidate set; an upper
    bound on the independence number of the induced subgraph."""
    cliques: list[tuple[int, int]] = []  # (member mask, common-neighbor mask)
    rest = candidates
    while rest:
        v = (rest & -rest).bit_length() - 1
        rest &= rest - 1
        placed = False
        for idx, (mask, common) in enumerate(cliques):
            if (common >> v) & 1:
                cliques[idx] = (mask | (1 << v), common & adj[v])
                placed = True
                break
        if not placed:
            cliques.append((1 << v, adj[v]))
    return len(cliques)


def _max_degree_vertex(candidates: int, adj: list[int]) -> int:
    v, v_deg = -1, -1
    scan = candidates
    while scan:
        u = (scan & -scan).bit_length() - 1
        scan &= scan - 1
        deg = bin(adj[u] & candidates).count("1")
        if deg > v_deg:
            v, v_deg = u, deg
    return v


def _bitmask_components(full: int, adj: list[int]) -> list[int]:
    components = []
    remaining = full
    while remaining:
        seed = remaining & -remaining
        comp = seed
        frontier = seed
        while frontier:
            grown = comp
            scan = frontier
            while scan:
                u = (scan & -scan).bit_length() - 1
                scan &= scan - 1
                grown |= adj[u] & remaining
            frontier = grown & ~comp
            comp = grown
        components.append(comp)
        remaining &= ~comp
    return components


def _component_alpha(candidates: int, adj: list[int], state: dict) -> tuple[int, int]:
    """Independence number and one optimal set within one component."""
    best = {"size": -1, "mask": 0}

    def visit(cand: int, chosen: int, size: int) -> None:
        state["nodes"] += 1
        bound = _greedy_clique_cover_bound(cand, adj)
        if bound == bin(cand).count("1"):
            if size + bound > best["size"]:
                best["size"] = size + bound
                best["mask"] = chosen | cand
            return
        if size + bound <= best["size"]:
            return
        v = _max_degree_vertex(cand, adj)
        visit(cand & ~((1 << v) | adj[v]), chosen | (1 << v), size + 1)
        visit(cand & ~(1 << v), chosen, size)

    visit(candidates, 0, 0)
    return best["size"], best["mask"]


def _component_count(candidates: int, adj: list[int], alpha: int, state: dict) -> int:
    """Number of independent sets of size exactly alpha within one component."""
    total = {"count": 0}

    def visit(cand: int, size: int) -> None:
        state["nodes"] += 1
        bound = _greedy_clique_cover_bound(cand, adj)
        if size + bound < alpha:
            return
        if bound == bin(cand).count("1"):
            # only taking the whole independent remainder reaches alpha
            if size + bound == alpha:
                total["count"] += 1
            return
        v = _max_degree_vertex(cand, adj)
        visit(cand & ~((1 << v) | adj[v]), size + 1)
        visit(cand & ~(1 << v), size)

    visit(candidates, 0)
    return total["count"]


def max_independent_sets(graph: Graph, count_optima: bool = True) -> tuple[int, int | None, int, int]:
    """Exact independence number, optionally with optimum counting.

    Returns (alpha, count of maximum independent sets or None, one optimal
    set as a bitmask, nodes explored). The search branches on the highest-
    degree candidate with a greedy clique-cover bound and decomposes into
    connected components, so counts multiply across components instead of
    being enumerated jointly. Counting visits every tying optimum within a
    component and can be switched off when only the optimum is needed.
    """
    n = graph.n
    if n > BRANCH_AND_BOUND_LIMIT:
        raise CapacityError(f"branch-and-bound limited to {BRANCH_AND_BOUND_LIMIT} nodes, got {n}")
    if n == 0:
        return 0, (1 if count_optima else None), 0, 1
    adj = [0] * n
    for (u, v) in graph.edges:
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    state = {"nodes": 0}
    alpha_total = 0
    mask_total = 0
    count_total = 1
    for comp in _bitmask_components((1 << n) - 1, adj):
        c_alpha, c_mask = _component_alpha(comp, adj, state)
        alpha_total += c_alpha
        mask_total |= c_mask
        if count_optima:
            count_total *= _component_count(comp, adj, c_alpha, state)
    return alpha_total, (count_total if count_optima else None), mask_total, state["nodes"]


def _mask_to_spins(mask: int, n: int, invert: bool) -> np.ndarray:
    bits = (mask >> np.arange(n)) & 1
    if invert:
        bits = 1 - bits
    return (2 * bits - 1).astype(np.int8)


def solve_instance(instance: ProblemInstance,
                   limit_n: int = EXHAUSTIVE_LIMIT,
                   method: str = "auto",
                   count_optima: bool = True) -> OracleResult:
    """Certified optimum of an encoded problem instance.

    method 'auto' enumerates small models exhaustively and switches to
    branch-and-bound for the set problems once enumeration would be slow;
    'exhaustive' and 'branch_and_bound' force one path. On the
    branch-and-bound path optimum counting can be disabled (optimum_count
    is then None): instances whose optima are astronomically degenerate
    still solve quickly.
    """
    n = instance.n
    set_form = instance.kind in ("mis", "maxcl", "mvc")
    if method not in ("auto", "exhaustive", "branch_and_bound"):
        raise InputError(f"unknown oracle method {method!r}")
    use_bb = method == "branch_and_bound" or (
        method == "auto" and set_form and n > min(limit_n, AUTO_BB_THRESHOLD))
    if not use_bb:
        if n > limit_n:
            raise CapacityError(f"exhaustive oracle limited to {limit_n} spins, got {n}")
        return _exhaustive_min(instance.model)
    if not set_form:
        raise InputError("branch-and-bound applies only to the set problems")
    alpha, count, mask, nodes = max_independent_sets(instance.graph, count_optima=count_optima)
    state = _mask_to_spins(mask, n, invert=instance.kind == "mvc")
    return OracleResult(best_state=state, best_energy=float(energy(instance.model, state)),
                        optimum_count=count, nodes_explored=nodes)


def _detect_set_form(model: IsingModel) -> ProblemInstance | None:
    """Recognize an independent-set / vertex-cover encoding from raw
    couplings and fields; returns a reconstructed instance or None."""
    from . import ising as _ising

    if model.coup_v.size == 0:
        return None
    quarter = float(model.coup_v[0])
    if quarter <= 0 or not np.allclose(model.coup_v, quarter, rtol=0, atol=1e-12):
        return None
    b = 4.0 * quarter
    graph = model.graph()
    deg = np.array([graph.degree(i) for i in range(model.n)], dtype=np.float64)
    for kind in ("mis", "mvc"):
        sign = -1.0 if kind == "mis" else 1.0
        a_vals = sign * 2.0 * (model.fields - (-sign) * quarter * deg)
        a = float(a_vals[0])
        if not (0 < a < b and np.allclose(a_vals, a, rtol=0, atol=1e-9)):
            continue
        expect_off = sign * a * model.n / 2.0 + quarter * graph.n_edges
        if abs(model.offset - expect_off) <= 1e-9 * max(1.0, abs(expect_off)):
            return _ising.encode(kind, graph, a, b)
    return None


def brute_force_min(model: IsingModel, limit_n: int = EXHAUSTIVE_LIMIT) -> OracleResult:
    """Certified global minimum of a raw spin model.

    Models up to limit_n spins are enumerated exhaustively. Larger models
    are accepted only when their coupling/field pattern is recognized as a
    set-problem encoding, in which case branch-and-bound takes over.
    """
    if model.n <= limit_n:
        return _exhaustive_min(model)
    recognized = _detect_set_form(model)
    if recognized is None:
        raise CapacityError(
            f"model with {model.n} spins exceeds the exhaustive limit {limit_n} "
            "and has no recognizable set-problem structure")
    return solve_instance(recognized, limit_n=limit_n, method="branch_and_bound")


BOLTZMANN_LIMIT = 20


def boltzmann_enumerate(model: IsingModel, beta: float) -> BoltzmannTable:
    """Exact Boltzmann table p(sigma) = exp(-beta E(sigma)) / Z."""
    if model.n > BOLTZMANN_LIMIT:
        raise CapacityError(f"Boltzmann enumeration limited to {BOLTZMANN_LIMIT} spins, got {model.n}")
    if beta < 0:
        raise InputError(f"beta must be >= 0, got {beta}")
    states = all_states(model.n).astype(np.float64)
    energies = energy_batch(model, states)
    logw = -beta * energies
    peak = logw.max()
    partition_log = float(peak + np.log(np.exp(logw - peak).sum()))
    probs = np.exp(logw - partition_log)
    return BoltzmannTable(beta=float(beta), probs=probs, partition_log=partition_log, n=model.n)


def free_energy_exact(dist: np.ndarray, model: IsingModel, beta: float) -> float:
    """Expected energy plus temperature-weighted negative entropy of `dist`.

    dist holds one probability per assignment in state-index order and must
    sum to 1; entries with zero probability contribute nothing.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (1 << model.n,):
        raise InputError(f"dist must have length 2^{model.n}")
    if abs(float(dist.sum()) - 1.0) > 1e-9 or np.any(dist < 0):
        raise InputError("dist must be a normalized probability vector")
    if beta <= 0:
        raise InputError(f"beta must be > 0, got {beta}")
    energies = energy_batch(model, all_states(model.n).astype(np.float64))
    mask = dist > 0
    ent_term = np.zeros_like(dist)
    ent_term[mask] = dist[mask] * np.log(dist[mask])
    return float(np.dot(dist, energies) + ent_term.sum() / beta)
