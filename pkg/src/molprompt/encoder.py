"""GIN-style message-passing encoder with prompt-guided multi-head attention
readout, parameter initialization, checkpoint persistence, and a
finite-difference gradient checker.

Node update per layer: h_v <- MLP((1 + eps) * h_v + sum_u (h_u + bond_emb)),
with edge features added to neighbor messages. The readout treats a learned
prompt vector as the attention query over atom representations; one
aggregator per learning channel.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InputError
from .molgraph import BOND_ORDERS, MolecularGraph
from .tables import ORGANIC_SUBSET

CHANNELS = ("MCD", "SCD", "CP")

# atom feature domains for the embedding vocabulary; index 0 is the mask token
_CHARGES = tuple(range(-3, 4))
_HCOUNTS = tuple(range(0, 6))
MASK_INDEX = 0
VOCAB_SIZE = 1 + len(ORGANIC_SUBSET) * len(_CHARGES) * len(_HCOUNTS) * 2 * 2

CHECKPOINT_MAGIC = b"MSPC"
CHECKPOINT_VERSION = 1


def atom_feature_index(atom) -> int:
    """Mixed-radix index of the (element, charge, explicit_h, aromatic,
    in_ring) tuple, offset past the mask token."""
    try:
        e = ORGANIC_SUBSET.index(atom.element)
        q = _CHARGES.index(atom.formal_charge)
        h = _HCOUNTS.index(atom.explicit_h)
    except ValueError as err:
        raise InputError(
            f"atom feature tuple outside the embedding vocabulary: "
            f"{atom.element} charge={atom.formal_charge} h={atom.explicit_h}"
        ) from err
    idx = ((e * len(_CHARGES) + q) * len(_HCOUNTS) + h) * 4
    idx += (2 if atom.aromatic else 0) + (1 if atom.in_ring else 0)
    return 1 + idx


@dataclass
class ModelConfig:
    hidden_dim: int = 64
    num_layers: int = 5
    heads: int = 4
    aggregate_values: bool = True  # False: literal weighted sum of h_x
    layer_norm: bool = False  # optional per-layer node normalization
    seed: int = 0

    @property
    def head_dim(self) -> int:
        if self.hidden_dim % self.heads:
            raise ValueError("hidden_dim must divide evenly into heads")
        return self.hidden_dim // self.heads


@dataclass
class ModelParams:
    """All named parameter tensors plus the architecture config."""

    config: ModelConfig
    tensors: dict[str, Tensor] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def aggregator_names(self) -> list[str]:
        return [k for k in self.tensors if k.startswith("agg/") or k.startswith("prompt/")]

    def trainable(self, freeze_aggregators: bool = False,
                  freeze_prompt_logits: bool = False) -> dict[str, Tensor]:
        frozen: set[str] = set()
        if freeze_aggregators:
            frozen.update(self.aggregator_names())
        if freeze_prompt_logits:
            frozen.add("prompt_logits")
        return {k: t for k, t in self.tensors.items() if k not in frozen}

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None


def init_params(config: ModelConfig) -> ModelParams:
    """Seeded uniform init in [-1/sqrt(D), 1/sqrt(D)]; epsilons start at 0."""
    rng = np.random.default_rng(config.seed)
    d = config.hidden_dim
    dk = config.head_dim
    scale = 1.0 / np.sqrt(d)

    def uniform(shape):
        return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)

    p: dict[str, Tensor] = {}
    p["atom_emb"] = uniform((VOCAB_SIZE, d))
    p["bond_emb"] = uniform((len(BOND_ORDERS), d))
    for layer in range(config.num_layers):
        p[f"layer{layer}/W1"] = uniform((d, d))
        p[f"layer{layer}/b1"] = Tensor(np.zeros((1, d)), requires_grad=True)
        p[f"layer{layer}/W2"] = uniform((d, d))
        p[f"layer{layer}/b2"] = Tensor(np.zeros((1, d)), requires_grad=True)
        p[f"layer{layer}/eps"] = Tensor(np.zeros((1, 1)), requires_grad=True)
    for ch in CHANNELS:
        p[f"prompt/{ch}"] = uniform((1, d))
        for h in range(config.heads):
            for mat in ("Wq", "Wk", "Wv"):
                p[f"agg/{ch}/head{h}/{mat}"] = uniform((d, dk))
            for vec in ("bq", "bk", "bv"):
                p[f"agg/{ch}/head{h}/{vec}"] = Tensor(np.zeros((1, dk)), requires_grad=True)
        p[f"agg/{ch}/Wo"] = uniform((d, d))
        p[f"agg/{ch}/bo"] = Tensor(np.zeros((1, d)), requires_grad=True)
    n_elem = len(ORGANIC_SUBSET)
    n_orders = len(BOND_ORDERS)
    p["cp/W_presence"] = uniform((d, n_elem + n_orders))
    p["cp/b_presence"] = Tensor(np.zeros((1, n_elem + n_orders)), requires_grad=True)
    p["cp/W_fg"] = uniform((d, 16))
    p["cp/b_fg"] = Tensor(np.zeros((1, 16)), requires_grad=True)
    for task in range(3):
        p[f"align/task{task}/W"] = uniform((d, 1))
        p[f"align/task{task}/b"] = Tensor(np.zeros((1, 1)), requires_grad=True)
    p["head/W"] = uniform((d, 1))
    p["head/b"] = Tensor(np.zeros((1, 1)), requires_grad=True)
    p["prompt_logits"] = Tensor(np.zeros((1, len(CHANNELS))), requires_grad=True)
    return ModelParams(config, p)


def _graph_of(item) -> tuple[MolecularGraph, frozenset]:
    base = getattr(item, "base", None)  # MaskedGraph duck-typing
    if base is not None:
        return base, item.masked_atoms
    return item, frozenset()


def encode_batch(items, params: ModelParams) -> tuple[Tensor, list[tuple[int, int]]]:
    """Run the message-passing stack over the disjoint union of ``items``.

    Returns the final node matrix (total_atoms, D) and per-item row spans.
    """
    feat_idx: list[int] = []
    src: list[int] = []
    dst: list[int] = []
    codes: list[int] = []
    spans: list[tuple[int, int]] = []
    for item in items:
        g, masked = _graph_of(item)
        offset = len(feat_idx)
        for v, atom in enumerate(g.atoms):
            feat_idx.append(MASK_INDEX if v in masked else atom_feature_index(atom))
        for bond in g.bonds:
            code = BOND_ORDERS.index(bond.order)
            src.extend((bond.a + offset, bond.b + offset))
            dst.extend((bond.b + offset, bond.a + offset))
            codes.extend((code, code))
        spans.append((offset, len(feat_idx)))

    n = len(feat_idx)
    h = ad.gather_rows(params["atom_emb"], feat_idx)
    for layer in range(params.config.num_layers):
        if src:
            msgs = ad.gather_rows(h, src) + ad.gather_rows(params["bond_emb"], codes)
            agg = ad.scatter_add_rows(msgs, dst, n)
            pre = h * (params[f"layer{layer}/eps"] + 1.0) + agg
        else:
            pre = h * (params[f"layer{layer}/eps"] + 1.0)
        hidden = ad.relu(pre @ params[f"layer{layer}/W1"] + params[f"layer{layer}/b1"])
        h = hidden @ params[f"layer{layer}/W2"] + params[f"layer{layer}/b2"]
        if params.config.layer_norm:
            h = ad.layer_norm_rows(h)
    return h, spans


def encode_nodes(item, params: ModelParams) -> Tensor:
    """Final-layer node representations for a single (possibly masked) graph."""
    h, _ = encode_batch([item], params)
    return h


def prompt_aggregate_spans(
    nodes: Tensor, spans, params: ModelParams, channel: str
) -> tuple[Tensor, Tensor]:
    """Prompt-guided multi-head attention over contiguous graph segments.

    The prompt embedding is the query; atoms provide keys and values.
    Returns (graph vectors (num_graphs, D), attention columns (atoms, heads)).
    With ``aggregate_values=False`` the heads weight the raw node vectors and
    are averaged instead of value-transformed and concatenated.
    """
    if nodes.shape[0] == 0:
        raise ValueError("cannot aggregate an empty node set")
    starts = [lo for lo, _ in spans]
    sizes = [hi - lo for lo, hi in spans]
    cfg = params.config
    scale = 1.0 / np.sqrt(cfg.head_dim)
    prompt = params[f"prompt/{channel}"]
    head_outputs = []
    alpha_cols = []
    for head in range(cfg.heads):
        base = f"agg/{channel}/head{head}"
        q = prompt @ params[f"{base}/Wq"] + params[f"{base}/bq"]
        k = nodes @ params[f"{base}/Wk"] + params[f"{base}/bk"]
        logits = (k @ q.T) * scale
        alpha = ad.segment_softmax(logits, starts, sizes)
        alpha_cols.append(alpha)
        if cfg.aggregate_values:
            v = nodes @ params[f"{base}/Wv"] + params[f"{base}/bv"]
            head_outputs.append(ad.segment_sum(alpha * v, starts, sizes))
        else:
            head_outputs.append(ad.segment_sum(alpha * nodes, starts, sizes))
    attn = ad.concat(alpha_cols, axis=1)
    if cfg.aggregate_values:
        stacked = ad.concat(head_outputs, axis=1)
        out = stacked @ params[f"agg/{channel}/Wo"] + params[f"agg/{channel}/bo"]
    else:
        total = head_outputs[0]
        for extra in head_outputs[1:]:
            total = total + extra
        out = total / cfg.heads
    return out, attn


def prompt_aggregate(nodes: Tensor, params: ModelParams, channel: str) -> tuple[Tensor, Tensor]:
    """Single-graph readout: (graph vector (1, D), attention rows (heads, atoms))."""
    vec, attn = prompt_aggregate_spans(
        nodes, [(0, nodes.shape[0])], params, channel
    )
    return vec, attn.T


def encode_channel(items, params: ModelParams, channel: str):
    """Encode ``items`` and aggregate each through one channel.

    Returns (graph matrix (n, D), list of attention tensors, node matrix).
    """
    h, spans = encode_batch(items, params)
    vecs, attn = prompt_aggregate_spans(h, spans, params, channel)
    attns = [
        ad.slice_rows(attn, lo, hi).T for lo, hi in spans
    ]
    return vecs, attns, h


# --- checkpoints --------------------------------------------------------------


def save_checkpoint(path, params: ModelParams):
    cfg = params.config
    meta = {
        "__meta__/hidden_dim": float(cfg.hidden_dim),
        "__meta__/num_layers": float(cfg.num_layers),
        "__meta__/heads": float(cfg.heads),
        "__meta__/aggregate_values": 1.0 if cfg.aggregate_values else 0.0,
        "__meta__/layer_norm": 1.0 if cfg.layer_norm else 0.0,
        "__meta__/seed": float(cfg.seed),
    }
    entries: list[tuple[str, np.ndarray]] = [
        (name, np.full((1, 1), value)) for name, value in meta.items()
    ]
    entries += [(name, t.value) for name, t in sorted(params.tensors.items())]
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(entries)))
        for name, arr in entries:
            if arr.ndim != 2:
                raise ValueError(f"tensor {name} must be 2-D for checkpointing")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            fh.write(arr.astype("<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise InputError(f"not a checkpoint file: bad magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise InputError(f"unsupported checkpoint version {version}")
        (count,) = struct.unpack("<I", fh.read(4))
        raw: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            rows, cols = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
            raw[name] = data.reshape(rows, cols).copy()
    config = ModelConfig(
        hidden_dim=int(raw.pop("__meta__/hidden_dim")[0, 0]),
        num_layers=int(raw.pop("__meta__/num_layers")[0, 0]),
        heads=int(raw.pop("__meta__/heads")[0, 0]),
        aggregate_values=bool(raw.pop("__meta__/aggregate_values")[0, 0]),
        layer_norm=bool(raw.pop("__meta__/layer_norm")[0, 0]),
        seed=int(raw.pop("__meta__/seed")[0, 0]),
    )
    tensors = {name: Tensor(arr, requires_grad=True) for name, arr in raw.items()}
    return ModelParams(config, tensors)


# --- gradient checking ---------------------------------------------------------


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    worst_tensor: str
    worst_coord: tuple[int, ...]
    checked_coords: int
    below_noise_floor: int

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}: max rel error {self.max_rel_error:.3e} at "
            f"{self.worst_tensor}{list(self.worst_coord)} "
            f"({self.checked_coords} coordinates, "
            f"{self.below_noise_floor} at the cancellation floor)"
        )


def finite_diff_check(
    fn,
    params: dict[str, Tensor],
    step: float = 1e-5,
    tol: float = 1e-5,
    max_coords: int = 200,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare analytic gradients of ``fn()`` against central differences.

    ``fn`` must rebuild the forward pass from ``params`` on every call and
    return a scalar Tensor. Small tensors are checked at every coordinate;
    large ones at their top-|gradient| coordinates plus a random sample, up
    to ``max_coords`` total. Relative error is |fd - grad| / (|grad| + 1e-8).

    Central differences of a loss of magnitude |f| carry about
    |f| * eps / step of cancellation noise in 64-bit floats, so coordinates
    whose finite-difference signal sits below that floor are held to absolute
    agreement within the floor instead of the relative tolerance; a wrong
    analytic gradient above the floor still fails either way.
    """
    rng = rng or np.random.default_rng(0)
    for t in params.values():
        t.grad = None
    loss = fn()
    ad.backward(loss)
    grads = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.value))
        for name, t in params.items()
    }
    noise_floor = 100.0 * max(1.0, abs(loss.item())) * np.finfo(np.float64).eps / step

    candidates: list[tuple[str, tuple[int, ...]]] = []
    for name, t in params.items():
        size = t.value.size
        if size <= 16:
            coords = list(np.ndindex(t.value.shape))
        else:
            flat = np.abs(grads[name]).ravel()
            top = np.argsort(flat)[-4:]
            extra = rng.integers(0, size, size=4)
            picked = sorted(set(top.tolist()) | set(extra.tolist()))
            coords = [np.unravel_index(i, t.value.shape) for i in picked]
        candidates.extend((name, tuple(c)) for c in coords)
    if len(candidates) > max_coords:
        keep = rng.choice(len(candidates), size=max_coords, replace=False)
        candidates = [candidates[i] for i in sorted(keep)]

    worst = 0.0
    worst_tensor = ""
    worst_coord: tuple[int, ...] = ()
    excused = 0
    for name, coord in candidates:
        t = params[name]
        original = t.value[coord]
        t.value[coord] = original + step
        up = fn().item()
        t.value[coord] = original - step
        down = fn().item()
        t.value[coord] = original
        fd = (up - down) / (2 * step)
        diff = abs(fd - grads[name][coord])
        rel = diff / (abs(grads[name][coord]) + 1e-8)
        if rel > tol and diff <= noise_floor:
            excused += 1
            continue
        if rel > worst:
            worst = rel
            worst_tensor = name
            worst_coord = coord
    return GradCheckReport(
        worst <= tol, worst, worst_tensor, worst_coord, len(candidates), excused
    )
