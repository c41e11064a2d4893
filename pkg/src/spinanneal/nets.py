"""Network architectures over graphs, parameter storage, and checkpoints.

Two networks are built from the same blocks:

* ``PolicyValueNet`` scores token configurations during autoregressive
  generation: feature encoder, a stack of message-passing layers, global
  sum aggregation, then separate policy (2^k-way softmax) and value heads
  fed with the global embedding concatenated to the token-node embeddings.
* ``ProductNet`` outputs an independent per-node selection probability for
  the mean-field style baselines: encoder, the same message-passing stack,
  and a per-node output head with a 2-way softmax.

Hidden MLP layers run affine -> layer norm -> rectifier; output layers skip
the normalization. Message-passing updates are wrapped in a learned layer
norm, with an optional linear skip connection for deep stacks.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InputError
from .rng import stream


class ParamStore:
    """Named parameter tensors with gradient slots."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def create(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise InputError(f"duplicate parameter {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        t.zero_grad()
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def n_parameters(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def copy(self) -> "ParamStore":
        other = ParamStore()
        for name, t in self._params.items():
            other.create(name, t.data.copy())
        return other

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        if set(values) != set(self._params):
            missing = set(self._params) - set(values)
            extra = set(values) - set(self._params)
            raise InputError(f"parameter name mismatch: missing={sorted(missing)}, extra={sorted(extra)}")
        for name, arr in values.items():
            t = self._params[name]
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != t.data.shape:
                raise InputError(f"shape mismatch for {name!r}: {arr.shape} vs {t.data.shape}")
            t.data = arr.copy()
            t.zero_grad()


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_mlp(store: ParamStore, rng: np.random.Generator, prefix: str,
             in_dim: int, widths: tuple[int, ...]) -> None:
    d = in_dim
    for layer, width in enumerate(widths):
        store.create(f"{prefix}.w{layer}", _glorot(rng, d, width))
        store.create(f"{prefix}.b{layer}", np.zeros(width))
        if layer < len(widths) - 1:
            store.create(f"{prefix}.ln_g{layer}", np.ones(width))
            store.create(f"{prefix}.ln_b{layer}", np.zeros(width))
        d = width


def mlp_forward(store: ParamStore, prefix: str, widths: tuple[int, ...], x: Tensor,
                out_activation: str = "linear") -> Tensor:
    """Run an MLP whose hidden layers use affine -> layer norm -> rectifier.

    The output layer applies only the requested activation ('linear' or
    'relu'); softmax outputs are taken downstream in log space.
    """
    h = x
    for layer in range(len(widths)):
        h = ad.add(ad.matmul(h, store[f"{prefix}.w{layer}"]), store[f"{prefix}.b{layer}"])
        if layer < len(widths) - 1:
            h = ad.layer_norm(h, store[f"{prefix}.ln_g{layer}"], store[f"{prefix}.ln_b{layer}"])
            h = ad.relu(h)
        elif out_activation == "relu":
            h = ad.relu(h)
        elif out_activation != "linear":
            raise InputError(f"unknown output activation {out_activation!r}")
    return h


@dataclass
class GraphBatch:
    """Disjoint union of graphs prepared for one forward pass.

    Edges are directed: every undirected interaction appears once per
    direction so messages flow both ways. node_graph maps each node to its
    graph index for per-graph aggregation.
    """

    node_x: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_attr: np.ndarray
    node_graph: np.ndarray
    n_graphs: int

    @property
    def n_nodes(self) -> int:
        return self.node_x.shape[0]


def mpnn_forward(store: ParamStore, prefix: str, config, h: Tensor, batch: GraphBatch) -> Tensor:
    """Apply the configured stack of message-passing layers.

    Per layer: each directed edge (j -> i) contributes a message computed
    from (h_j, h_i, e_ij); messages are sum-aggregated per target node
    (isolated nodes get zeros); the node update MLP consumes (h_i, m_i);
    with skip connections a linear map of h_i is added, and the result is
    layer normalized.
    """
    edge_attr = Tensor(batch.edge_attr)
    for layer in range(config.mpnn_layers):
        p = (prefix + "." if prefix else "") + f"mp{layer}"
        h_src = ad.gather_rows(h, batch.edge_src)
        h_dst = ad.gather_rows(h, batch.edge_dst)
        msg_in = ad.concat([h_src, h_dst, edge_attr], axis=1)
        msg = mlp_forward(store, f"{p}.msg", config.msg_widths, msg_in, out_activation="relu")
        agg = ad.segment_sum(msg, batch.edge_dst, batch.n_nodes)
        upd = mlp_forward(store, f"{p}.node", config.node_widths,
                          ad.concat([h, agg], axis=1), out_activation="relu")
        if config.use_skip:
            upd = ad.add(upd, ad.matmul(h, store[f"{p}.skip"]))
        h = ad.layer_norm(upd, store[f"{p}.ln_g"], store[f"{p}.ln_b"])
    return h


@dataclass(frozen=True)
class NetConfig:
    """Sizes for the policy/value network.

    Defaults follow the reference architecture: a 2x40 encoder, 2x64
    message and node-update MLPs, 120-120 policy and value heads with 2^k
    and 1 outputs, rectifier activations, and skip connections switched on
    automatically for stacks deeper than three layers.
    """

    token_k: int = 5
    feature_dim: int = 10  # 1 field value + 4 state tags + k token positions
    encoder_widths: tuple = (40, 40)
    msg_widths: tuple = (64, 64)
    node_widths: tuple = (64, 64)
    mpnn_layers: int = 3
    skip: bool | None = None
    head_widths: tuple = (120, 120)

    def __post_init__(self):
        for w in (*self.encoder_widths, *self.msg_widths, *self.node_widths,
                  *self.head_widths, self.mpnn_layers, self.token_k):
            if int(w) < 1:
                raise InputError("all layer sizes must be >= 1")
        if self.feature_dim != 5 + self.token_k:
            raise InputError(f"feature_dim must be 5 + token_k = {5 + self.token_k}")

    @property
    def use_skip(self) -> bool:
        return self.mpnn_layers > 3 if self.skip is None else self.skip

    @property
    def embed_dim(self) -> int:
        return self.node_widths[-1]

    @property
    def n_configs(self) -> int:
        return 1 << self.token_k

    @classmethod
    def for_k(cls, k: int, **kwargs) -> "NetConfig":
        return cls(token_k=k, feature_dim=5 + k, **kwargs)

    @classmethod
    def desk(cls, k: int, mpnn_layers: int = 2) -> "NetConfig":
        """Small configuration for CPU-scale experiments."""
        return cls(token_k=k, feature_dim=5 + k, encoder_widths=(24, 24),
                   msg_widths=(32, 32), node_widths=(32, 32),
                   mpnn_layers=mpnn_layers, head_widths=(48, 48))


class PolicyValueNet:
    """Token-configuration policy and state-value estimator."""

    def __init__(self, config: NetConfig, params: ParamStore | None = None,
                 energy_scale: tuple[float, float] | None = None):
        self.config = config
        self.params = params if params is not None else ParamStore()
        self.energy_scale = energy_scale  # (mean, std) applied to instance energies

    @classmethod
    def create(cls, config: NetConfig, seed: int,
               energy_scale: tuple[float, float] | None = None) -> "PolicyValueNet":
        net = cls(config, ParamStore(), energy_scale)
        rng = stream(seed, "net_init")
        c = config
        init_mlp(net.params, rng, "enc", c.feature_dim, c.encoder_widths)
        d = c.encoder_widths[-1]
        for layer in range(c.mpnn_layers):
            p = f"mp{layer}"
            init_mlp(net.params, rng, f"{p}.msg", 2 * d + 1, c.msg_widths)
            init_mlp(net.params, rng, f"{p}.node", d + c.msg_widths[-1], c.node_widths)
            if c.use_skip:
                net.params.create(f"{p}.skip", _glorot(rng, d, c.node_widths[-1]))
            net.params.create(f"{p}.ln_g", np.ones(c.node_widths[-1]))
            net.params.create(f"{p}.ln_b", np.zeros(c.node_widths[-1]))
            d = c.node_widths[-1]
        head_in = (c.token_k + 1) * d
        init_mlp(net.params, rng, "policy", head_in, c.head_widths + (c.n_configs,))
        init_mlp(net.params, rng, "value", head_in, c.head_widths + (1,))
        return net

    def embed(self, batch: GraphBatch) -> Tensor:
        h = mlp_forward(self.params, "enc", self.config.encoder_widths,
                        Tensor(batch.node_x), out_activation="relu")
        return mpnn_forward(self.params, "", self.config, h, batch)

    def forward(self, batch: GraphBatch, token_nodes: np.ndarray,
                sample_graph: np.ndarray) -> tuple[Tensor, Tensor]:
        """Log-probabilities over the 2^k token configurations and the state
        value for each sample in the batch.

        token_nodes has shape (samples, k) holding batch-absolute node
        indices of the token in generation order; sample_graph maps each
        sample to its graph for the global aggregation.
        """
        c = self.config
        h = self.embed(batch)
        global_emb = ad.segment_sum(h, batch.node_graph, batch.n_graphs)
        token_emb = ad.gather_rows(h, np.asarray(token_nodes, dtype=np.int64))
        n_samples = token_nodes.shape[0]
        flat = ad.reshape(token_emb, (n_samples, c.token_k * c.embed_dim))
        head_in = ad.concat([flat, ad.gather_rows(global_emb, sample_graph)], axis=1)
        logits = mlp_forward(self.params, "policy", c.head_widths + (c.n_configs,), head_in)
        log_probs = ad.log_softmax(logits, axis=1)
        value = mlp_forward(self.params, "value", c.head_widths + (1,), head_in)
        return log_probs, ad.reshape(value, (n_samples,))

    def save(self, path: str) -> None:
        meta = {"net_type": "policy_value", "config": asdict(self.config),
                "energy_scale": list(self.energy_scale) if self.energy_scale else None}
        save_checkpoint(path, meta, self.params)

    @classmethod
    def load(cls, path: str) -> "PolicyValueNet":
        meta, values = load_checkpoint(path)
        if meta["net_type"] != "policy_value":
            raise InputError(f"checkpoint at {path} is not a policy/value net")
        cfg_dict = dict(meta["config"])
        for key in ("encoder_widths", "msg_widths", "node_widths", "head_widths"):
            cfg_dict[key] = tuple(cfg_dict[key])
        config = NetConfig(**cfg_dict)
        scale = meta.get("energy_scale")
        net = cls.create(config, seed=0, energy_scale=tuple(scale) if scale else None)
        net.params.load_values(values)
        return net


@dataclass(frozen=True)
class ProductNetConfig:
    """Sizes for the per-node selection-probability network.

    The reference setup uses a single 64-unit encoder layer, the shared
    2x64 message-passing MLPs, and a per-node output MLP of three 64-unit
    layers feeding a 2-way softmax. Node features are the field value plus
    six random binary entries resampled per decode attempt.
    """

    feature_dim: int = 7  # 1 field value + 6 random binary features
    n_random_features: int = 6
    encoder_widths: tuple = (64,)
    msg_widths: tuple = (64, 64)
    node_widths: tuple = (64, 64)
    mpnn_layers: int = 8
    skip: bool | None = None
    out_widths: tuple = (64, 64, 64)

    @property
    def use_skip(self) -> bool:
        return self.mpnn_layers > 3 if self.skip is None else self.skip

    @classmethod
    def desk(cls, mpnn_layers: int = 2) -> "ProductNetConfig":
        return cls(encoder_widths=(32,), msg_widths=(32, 32), node_widths=(32, 32),
                   mpnn_layers=mpnn_layers, out_widths=(32, 32))


PROB_CLAMP = 1e-7


class ProductNet:
    """Independent per-node selection probabilities for baseline methods."""

    def __init__(self, config: ProductNetConfig, params: ParamStore | None = None,
                 energy_scale: tuple[float, float] | None = None):
        self.config = config
        self.params = params if params is not None else ParamStore()
        self.energy_scale = energy_scale

    @classmethod
    def create(cls, config: ProductNetConfig, seed: int,
               energy_scale: tuple[float, float] | None = None) -> "ProductNet":
        net = cls(config, ParamStore(), energy_scale)
        rng = stream(seed, "product_net_init")
        c = config
        init_mlp(net.params, rng, "enc", c.feature_dim, c.encoder_widths)
        d = c.encoder_widths[-1]
        for layer in range(c.mpnn_layers):
            p = f"mp{layer}"
            init_mlp(net.params, rng, f"{p}.msg", 2 * d + 1, c.msg_widths)
            init_mlp(net.params, rng, f"{p}.node", d + c.msg_widths[-1], c.node_widths)
            if c.use_skip:
                net.params.create(f"{p}.skip", _glorot(rng, d, c.node_widths[-1]))
            net.params.create(f"{p}.ln_g", np.ones(c.node_widths[-1]))
            net.params.create(f"{p}.ln_b", np.zeros(c.node_widths[-1]))
            d = c.node_widths[-1]
        init_mlp(net.params, rng, "out", d, c.out_widths + (2,))
        return net

    def forward(self, batch: GraphBatch) -> Tensor:
        """Probability that each node is selected (q = 1), clamped away from
        0 and 1 for log stability."""
        c = self.config
        h = mlp_forward(self.params, "enc", c.encoder_widths,
                        Tensor(batch.node_x), out_activation="relu")
        h = mpnn_forward(self.params, "", c, h, batch)
        logits = mlp_forward(self.params, "out", c.out_widths + (2,), h)
        probs = ad.exp(ad.log_softmax(logits, axis=1))
        # first output column is the probability of inclusion
        col = ad.matmul(probs, Tensor(np.array([[1.0], [0.0]])))
        return ad.clip(ad.reshape(col, (batch.n_nodes,)), PROB_CLAMP, 1.0 - PROB_CLAMP)

    def save(self, path: str) -> None:
        meta = {"net_type": "product", "config": asdict(self.config),
                "energy_scale": list(self.energy_scale) if self.energy_scale else None}
        save_checkpoint(path, meta, self.params)

    @classmethod
    def load(cls, path: str) -> "ProductNet":
        meta, values = load_checkpoint(path)
        if meta["net_type"] != "product":
            raise InputError(f"checkpoint at {path} is not a product net")
        cfg_dict = dict(meta["config"])
        for key in ("encoder_widths", "msg_widths", "node_widths", "out_widths"):
            cfg_dict[key] = tuple(cfg_dict[key])
        config = ProductNetConfig(**cfg_dict)
        scale = meta.get("energy_scale")
        net = cls.create(config, seed=0, energy_scale=tuple(scale) if scale else None)
        net.params.load_values(values)
        return net


# ---- checkpoint container -------------------------------------------------

CHECKPOINT_MAGIC = b"SPINANN\x01"
CHECKPOINT_VERSION = 1


def save_checkpoint(path: str, meta: dict, params: ParamStore) -> None:
    """Write a deterministic binary checkpoint: a JSON header describing the
    config and tensor layout followed by raw little-endian float64 data."""
    names = sorted(params.names())
    header = {
        "format_version": CHECKPOINT_VERSION,
        "meta": meta,
        "tensors": [{"name": n, "shape": list(params[n].data.shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params[n].data, dtype="<f8").tobytes())


def load_checkpoint(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise InputError(f"{path} is not a checkpoint file")
        (blob_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        if header["format_version"] != CHECKPOINT_VERSION:
            raise InputError(f"unsupported checkpoint version {header['format_version']}")
        values = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            values[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return header["meta"], values


# ---- optimizers -----------------------------------------------------------

def global_grad_norm(params: ParamStore) -> float:
    total = 0.0
    for _, t in params.items():
        if t.grad is not None:
            total += float(np.sum(t.grad * t.grad))
    return float(np.sqrt(total))


class SgdMomentum:
    """Gradient descent with momentum and global gradient-norm clipping."""

    def __init__(self, params: ParamStore, lr: float, momentum: float = 0.9,
                 grad_clip: float = 1.0):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.grad_clip = grad_clip
        self._velocity = {name: np.zeros_like(t.data) for name, t in params.items()}

    def step(self) -> None:
        scale = 1.0
        if self.grad_clip:
            norm = global_grad_norm(self.params)
            if norm > self.grad_clip:
                scale = self.grad_clip / norm
        for name, t in self.params.items():
            v = self._velocity[name]
            v *= self.momentum
            v += scale * t.grad
            t.data = t.data - self.lr * v


class Adam:
    """Adam with bias correction and global gradient-norm clipping."""

    def __init__(self, params: ParamStore, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, grad_clip: float = 1.0):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.grad_clip = grad_clip
        self._m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in params.items()}
        self._t = 0

    def step(self) -> None:
        scale = 1.0
        if self.grad_clip:
            norm = global_grad_norm(self.params)
            if norm > self.grad_clip:
                scale = self.grad_clip / norm
        self._t += 1
        b1t = 1.0 - self.beta1 ** self._t
        b2t = 1.0 - self.beta2 ** self._t
        for name, t in self.params.items():
            g = scale * t.grad
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            t.data = t.data - self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def make_optimizer(name: str, params: ParamStore, lr: float, momentum: float = 0.9,
                   grad_clip: float = 1.0):
    if name == "sgd":
        return SgdMomentum(params, lr, momentum=momentum, grad_clip=grad_clip)
    if name == "adam":
        return Adam(params, lr, grad_clip=grad_clip)
    raise InputError(f"unknown optimizer {name!r}")
