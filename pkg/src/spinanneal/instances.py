"""Synthetic hard-instance generators and edge-list file I/O.

Three graph families are provided: clique-group constraint graphs ("rb"),
random regular graphs ("rrg"), and preferential-attachment graphs ("ba").
All generators are deterministic functions of their parameters and seed.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .graphs import Graph
from .rng import stream

FAMILIES = ("rb", "rrg", "ba", "edgelist")


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}; expected one of {FAMILIES}")


def gen_rb(n_groups: int, group_size: int, p: float, seed: int) -> Graph:
    """Clique-group graph whose hardness is controlled by p in (0, 1].

    n_groups disjoint cliques of size group_size are connected by
    ceil(n_groups * ln(n_groups)) rounds; each round picks a random pair of
    distinct groups and inserts ceil((1 - p) * group_size**1.6) missing
    inter-group edges. Smaller p therefore adds more cross edges and makes
    the instances harder; p = 1 leaves the cliques disjoint.
    """
    if n_groups < 2 or group_size < 2:
        raise InputError("need n_groups >= 2 and group_size >= 2")
    if not (0.0 < p <= 1.0):
        raise InputError(f"p must be in (0, 1], got {p}")
    rng = stream(seed, "rb")
    n = n_groups * group_size
    edges = set()
    groups = []
    for g in range(n_groups):
        members = list(range(g * group_size, (g + 1) * group_size))
        groups.append(members)
        for a in range(group_size):
            for b in range(a + 1, group_size):
                edges.add((members[a], members[b]))
    rounds = math.ceil(n_groups * math.log(n_groups))
    per_round = math.ceil((1.0 - p) * group_size ** 1.6)
    for _ in range(rounds):
        if per_round == 0:
            break
        ga, gb = rng.choice(n_groups, size=2, replace=False)
        missing = [
            (min(u, v), max(u, v))
            for u in groups[ga]
            for v in groups[gb]
            if (min(u, v), max(u, v)) not in edges
        ]
        take = min(per_round, len(missing))
        if take:
            picked = rng.choice(len(missing), size=take, replace=False)
            for idx in sorted(int(t) for t in picked):
                edges.add(missing[idx])
    return Graph(n, sorted(edges))


def gen_rrg(n: int, d: int, seed: int) -> Graph:
    """Random d-regular simple graph via stub matching.

    Stubs are paired one at a time, rejecting self-loops and duplicate
    edges; if the remaining stubs admit no valid pair the whole attempt is
    discarded and the construction restarts with fresh randomness.
    """
    if not (0 <= d < n):
        raise InputError(f"need 0 <= d < n, got d={d}, n={n}")
    if (n * d) % 2 != 0:
        raise InputError(f"n * d must be even, got n={n}, d={d}")
    if d == 0:
        return Graph(n, [])
    rng = stream(seed, "rrg")
    for _attempt in range(10_000):
        remaining = np.full(n, d, dtype=np.int64)
        edges = set()
        ok = True
        while remaining.sum() > 0:
            stubs = np.repeat(np.arange(n), remaining)
            u = int(stubs[rng.integers(stubs.size)])
            partners = [
                v for v in np.flatnonzero(remaining > 0)
                if v != u and (min(u, int(v)), max(u, int(v))) not in edges
            ]
            if not partners:
                ok = False
                break
            weights = remaining[partners].astype(np.float64)
            v = int(rng.choice(partners, p=weights / weights.sum()))
            edges.add((min(u, v), max(u, v)))
            remaining[u] -= 1
            remaining[v] -= 1
        if ok:
            return Graph(n, sorted(edges))
    raise InputError(f"could not realize a simple {d}-regular graph on {n} nodes")


def gen_ba(n: int, m: int, seed: int) -> Graph:
    """Preferential-attachment graph: clique seed of m+1 nodes, then each
    new node attaches to m distinct existing nodes sampled proportional to
    degree. Edge count is m(m+1)/2 + (n-m-1)m exactly.
    """
    if not (1 <= m < n):
        raise InputError(f"need 1 <= m < n, got m={m}, n={n}")
    rng = stream(seed, "ba")
    edges = []
    endpoints: list[int] = []  # one entry per edge endpoint: degree-proportional urn
    for a in range(m + 1):
        for b in range(a + 1, m + 1):
            edges.append((a, b))
            endpoints.extend((a, b))
    for new in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            targets.add(int(endpoints[rng.integers(len(endpoints))]))
        for t in sorted(targets):
            edges.append((t, new))
            endpoints.extend((t, new))
    return Graph(n, edges)


def generate(spec: GeneratorSpec) -> Graph:
    if spec.family == "rb":
        return gen_rb(seed=spec.seed, **spec.params)
    if spec.family == "rrg":
        return gen_rrg(seed=spec.seed, **spec.params)
    if spec.family == "ba":
        return gen_ba(seed=spec.seed, **spec.params)
    raise InputError(f"family {spec.family!r} is not generated from parameters")


def load_edgelist(path: str) -> Graph:
    """Read a whitespace-separated edge list.

    Each non-comment line holds two labels "u v". Labels may be arbitrary
    tokens and are relabeled to dense integer ids in first-occurrence
    order. Self-loops and duplicate edges are rejected with the offending
    line number.
    """
    labels: dict[str, int] = {}
    edges = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected 'u v', got {raw.rstrip()!r}")
            ids = []
            for tok in parts:
                if tok not in labels:
                    labels[tok] = len(labels)
                ids.append(labels[tok])
            u, v = ids
            if u == v:
                raise InputError(f"{path}:{lineno}: self-loop on {parts[0]!r}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InputError(f"{path}:{lineno}: duplicate edge {parts[0]!r} {parts[1]!r}")
            seen.add(key)
            edges.append(key)
    return Graph(len(labels), edges)


def save_edgelist(graph: Graph, path: str) -> None:
    """Write the sorted edge list. The pair format cannot express isolated
    nodes, and loading relabels nodes by first occurrence, so a saved graph
    reads back isomorphic but not necessarily with identical ids."""
    isolated = [i for i in range(graph.n) if graph.degree(i) == 0]
    if isolated:
        raise InputError(f"edge-list format cannot express isolated nodes: {isolated[:5]}")
    with open(path, "w", encoding="utf-8") as fh:
        for (u, v) in graph.edges:
            fh.write(f"{u} {v}\n")


MANIFEST_VERSION = 1


def write_dataset(graphs: list[Graph], out_dir: str, spec: GeneratorSpec | None = None) -> str:
    """Write graphs as numbered edge-list files plus a manifest; returns the
    manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    files = []
    for idx, g in enumerate(graphs):
        name = f"instance_{idx:04d}.edgelist"
        save_edgelist(g, os.path.join(out_dir, name))
        files.append({"file": name, "n": g.n, "m": g.n_edges})
    manifest = {
        "format_version": MANIFEST_VERSION,
        "family": spec.family if spec else "edgelist",
        "params": spec.params if spec else {},
        "seed": spec.seed if spec else None,
        "count": len(graphs),
        "instances": files,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_dataset(dir_path: str) -> list[tuple[str, Graph]]:
    """Load (instance_id, graph) pairs from a dataset directory.

    With a manifest present the manifest order is used; otherwise all
    *.edgelist files are loaded in sorted name order.
    """
    manifest_path = os.path.join(dir_path, "manifest.json")
    if os.path.exists(manifest_path):
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        names = [entry["file"] for entry in manifest["instances"]]
    else:
        names = sorted(f for f in os.listdir(dir_path) if f.endswith(".edgelist"))
    if not names:
        raise InputError(f"no instances found in {dir_path}")
    return [(os.path.splitext(name)[0], load_edgelist(os.path.join(dir_path, name))) for name in names]
