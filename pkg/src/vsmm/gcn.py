"""End-to-end secure two-layer GCN: dataset handling, the secure trainer and
its plaintext reference oracle.

The graph owner (party 0) contributes the normalized adjacency, decomposed
once before training; the feature owner (party 1) contributes features and
labels. Weights start from a public seeded initialization and stay shared
throughout; only logits revealed for evaluation leave the sharing. Per-epoch
transcript sizes depend only on (|V|, t, feature dim, hidden, classes), never
on values.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .decompose import DecompositionBundle, SparseMatrixCOO, decompose_full
from .binary import relu
from .nonlinear import AdamState, adam_step, scale_public, sgd_step, softmax_rows
from .protocols import beaver_mult, reveal
from .ring import FixedPointConfig, decode_fixed, encode_fixed
from .runtime import CommMeter, run_two_party
from .smm import SmmDims, smm, smm_transpose


@dataclass
class GraphDataset:
    num_nodes: int
    edges: np.ndarray          # (E, 2) undirected, 0-based
    features: np.ndarray       # (n, dim) float
    labels: np.ndarray         # (n,) int
    train_mask: np.ndarray     # (n,) bool
    test_mask: np.ndarray      # (n,) bool
    adj_norm: SparseMatrixCOO = None

    def __post_init__(self):
        if self.adj_norm is None:
            self.adj_norm = normalize_adjacency(self.edges, self.num_nodes)

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "sgd"     # "sgd" or "adam"
    lr: float = 0.5
    epochs: int = 50
    seed: int = 0
    hidden: int = 16
    f: int = 16
    adam_eps: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.9

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be sgd or adam")
        if self.lr <= 0 or self.epochs < 1:
            raise ValueError("lr must be positive and epochs >= 1")


def normalize_adjacency(edges: np.ndarray, num_nodes: int) -> SparseMatrixCOO:
    """Symmetric normalization D^{-1/2} (A + I) D^{-1/2} with self-loops."""
    a = np.zeros((num_nodes, num_nodes), dtype=np.float64)
    for u, v in np.asarray(edges).reshape(-1, 2):
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise ValueError(f"edge ({u}, {v}) out of range")
        a[u, v] = a[v, u] = 1.0
    a += np.eye(num_nodes)
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    return SparseMatrixCOO.from_dense(dinv[:, None] * a * dinv[None, :])


def make_synthetic_community(num_nodes: int = 32, seed: int = 0,
                             dim: int = 4, p_in: float = 0.4,
                             p_out: float = 0.04,
                             train_frac: float = 0.5) -> GraphDataset:
    """Two-community graph with noisy community-indicator features."""
    rng = np.random.default_rng(seed)
    labels = (np.arange(num_nodes) >= num_nodes // 2).astype(np.int64)
    edges = []
    for i in range(num_nodes):
        for j in range(i + 1, num_nodes):
            p = p_in if labels[i] == labels[j] else p_out
            if rng.random() < p:
                edges.append((i, j))
    feats = rng.normal(0, 0.3, (num_nodes, dim))
    feats[:, 0] += np.where(labels == 0, 1.0, -1.0)
    feats[:, 1] += np.where(labels == 1, 1.0, -1.0)
    perm = rng.permutation(num_nodes)
    n_train = int(round(train_frac * num_nodes))
    train_mask = np.zeros(num_nodes, dtype=bool)
    train_mask[perm[:n_train]] = True
    return GraphDataset(num_nodes, np.array(edges, dtype=np.int64), feats,
                        labels, train_mask, ~train_mask)


def save_dataset(path: str, ds: GraphDataset) -> None:
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "edges.tsv"), "w") as fh:
        for u, v in ds.edges:
            fh.write(f"{u}\t{v}\n")
    np.savetxt(os.path.join(path, "features.csv"), ds.features, delimiter=",")
    np.savetxt(os.path.join(path, "labels.csv"), ds.labels, fmt="%d")
    np.savetxt(os.path.join(path, "masks.csv"),
               np.stack([ds.train_mask, ds.test_mask], axis=1), fmt="%d",
               delimiter=",", header="train,test", comments="")


def load_dataset(path: str) -> GraphDataset:
    def _fail(name, line_no, msg):
        raise ValueError(f"{os.path.join(path, name)}:{line_no}: {msg}")

    edges = []
    with open(os.path.join(path, "edges.tsv")) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                _fail("edges.tsv", line_no, "expected 'u<TAB>v'")
            edges.append((int(parts[0]), int(parts[1])))
    features = np.loadtxt(os.path.join(path, "features.csv"),
                          delimiter=",", ndmin=2)
    labels = np.loadtxt(os.path.join(path, "labels.csv"), dtype=np.int64, ndmin=1)
    masks = np.loadtxt(os.path.join(path, "masks.csv"), delimiter=",",
                       skiprows=1, dtype=np.int64, ndmin=2)
    n = len(features)
    if n == 0:
        raise ValueError(f"{path}: empty graph (no feature rows)")
    if len(labels) != n or len(masks) != n:
        raise ValueError(f"{path}: labels/masks row count does not match features")
    return GraphDataset(n, np.array(edges, dtype=np.int64).reshape(-1, 2),
                        features, labels, masks[:, 0].astype(bool),
                        masks[:, 1].astype(bool))


def init_weights(dim: int, hidden: int, classes: int, seed: int):
    """Public Glorot-uniform initialization shared by both trainers."""
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-s, s, (fan_in, fan_out))

    return glorot(dim, hidden), glorot(hidden, classes)


# clear reference oracle ------------------------------------------------------

def _softmax(y: np.ndarray) -> np.ndarray:
    e = np.exp(y - y.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def clear_forward(a, x, w1, w2):
    ax = a @ x
    pre = ax @ w1
    z = np.maximum(pre, 0)
    logits = (a @ z) @ w2
    return logits, pre, z


def clear_loss(logits, labels, mask):
    sm = _softmax(logits)
    return float(-np.log(np.clip(sm[mask, labels[mask]], 1e-12, None)).mean())


def clear_gradients(a, x, labels, mask, w1, w2):
    n_train = int(mask.sum())
    logits, pre, z = clear_forward(a, x, w1, w2)
    g = _softmax(logits)
    g[np.arange(len(labels)), labels] -= 1.0
    g *= mask[:, None] / max(n_train, 1)
    atg = a.T @ g
    gw2 = z.T @ atg
    dpre = (atg @ w2.T) * (pre > 0)
    gw1 = x.T @ (a.T @ dpre)
    return gw1, gw2, logits


def reference_train_clear(ds: GraphDataset, cfg: TrainConfig) -> dict:
    """Plaintext trainer implementing the identical recurrences in floats."""
    a = ds.adj_norm.to_dense()
    x = ds.features
    w1, w2 = init_weights(x.shape[1], cfg.hidden, ds.num_classes, cfg.seed)
    u1 = np.zeros_like(w1); v1 = np.zeros_like(w1)
    u2 = np.zeros_like(w2); v2 = np.zeros_like(w2)
    history = []
    for _ in range(cfg.epochs):
        gw1, gw2, logits = clear_gradients(a, x, ds.labels, ds.train_mask, w1, w2)
        history.append({
            "loss": clear_loss(logits, ds.labels, ds.train_mask),
            "acc": accuracy(logits, ds.labels, ds.test_mask),
        })
        if cfg.optimizer == "sgd":
            w1 -= cfg.lr * gw1
            w2 -= cfg.lr * gw2
        else:
            b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
            u1 = b1 * u1 + (1 - b1) * gw1; v1 = b2 * v1 + (1 - b2) * gw1 ** 2
            u2 = b1 * u2 + (1 - b1) * gw2; v2 = b2 * v2 + (1 - b2) * gw2 ** 2
            w1 -= cfg.lr * u1 / np.sqrt(v1 + eps * eps)
            w2 -= cfg.lr * u2 / np.sqrt(v2 + eps * eps)
    logits, _, _ = clear_forward(a, x, w1, w2)
    return {"w1": w1, "w2": w2, "history": history, "logits": logits,
            "test_acc": accuracy(logits, ds.labels, ds.test_mask),
            "predictions": logits.argmax(axis=1)}


def accuracy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    if mask.sum() == 0:
        return 0.0
    return float((logits[mask].argmax(axis=1) == labels[mask]).mean())


# secure trainer --------------------------------------------------------------

def _secure_forward(ctx, bundle, dims, x_in, w1, w2, first_layer_plain: bool):
    """Layer 1: smm then dense multiply then ReLU; layer 2: smm then dense."""
    ax = smm(ctx, bundle, dims, x_in, shared=not first_layer_plain,
             fixed_point=True)
    pre = beaver_mult(ctx, ax, w1, matmul=True, truncate=True)
    z, mask = relu(ctx, pre)
    az = smm(ctx, bundle, dims, z, shared=True, fixed_point=True)
    logits = beaver_mult(ctx, az, w2, matmul=True, truncate=True)
    return logits, z, mask


def _secure_backward(ctx, bundle, dims, x_shared, z, relu_mask, w2, logits,
                     onehot_scaled, mask_vec):
    """Gradients of the masked cross-entropy; see the clear oracle for the
    plaintext identities."""
    sm = softmax_rows(ctx, logits)
    g = sm - onehot_scaled if ctx.party == 1 else sm
    g = g * mask_vec[:, None]  # public 0/1 train mask, unscaled
    inv_n = 1.0 / max(int(mask_vec.sum()), 1)
    g = scale_public(g, inv_n, ctx)
    atg = smm_transpose(ctx, bundle, dims, g, fixed_point=True)
    gw2 = beaver_mult(ctx, z.T, atg, matmul=True, truncate=True)
    dz = beaver_mult(ctx, atg, w2.T, matmul=True, truncate=True)
    dpre = beaver_mult(ctx, dz, relu_mask)  # 0/1 mask, no truncation
    adpre = smm_transpose(ctx, bundle, dims, dpre, fixed_point=True)
    gw1 = beaver_mult(ctx, x_shared.T, adpre, matmul=True, truncate=True)
    return gw1, gw2


def _eval_logits(ctx, logits_share, pub):
    """Reveal logits (evaluation/reporting only) and score them in the clear."""
    opened = decode_fixed(reveal(ctx, logits_share), ctx.cfg)
    return opened, {
        "loss": clear_loss(opened, pub["labels"], pub["train_mask"]),
        "acc": accuracy(opened, pub["labels"], pub["test_mask"]),
    }


def _train_protocol(ctx, bundle, x_plain, onehot_enc, pub, cfg: TrainConfig):
    """Per-party training loop. Party 0 supplies the decomposition bundle;
    party 1 supplies encoded plaintext features and one-hot labels. pub holds
    the public shapes, masks and evaluation labels."""
    dims: SmmDims = pub["dims"]
    n, dim, classes = dims.m, pub["dim"], pub["classes"]
    p0 = ctx.party == 0
    w1f, w2f = init_weights(dim, cfg.hidden, classes, cfg.seed)
    w1 = encode_fixed(w1f, ctx.cfg) if p0 else np.zeros(w1f.shape, np.uint64)
    w2 = encode_fixed(w2f, ctx.cfg) if p0 else np.zeros(w2f.shape, np.uint64)
    x_in = x_plain if not p0 else np.zeros((n, dim), dtype=np.uint64)
    x_shared = x_plain if not p0 else np.zeros((n, dim), dtype=np.uint64)
    mask_vec = pub["train_mask"].astype(np.uint64)
    if cfg.optimizer == "adam":
        hyper = dict(beta1=cfg.adam_beta1, beta2=cfg.adam_beta2,
                     eps=cfg.adam_eps, lr=cfg.lr)
        st1 = AdamState.init(w1.shape, **hyper)
        st2 = AdamState.init(w2.shape, **hyper)
    history = []
    meter = ctx.ep._rt.meter
    prev_bits, prev_clock = meter.online_bits, ctx.ep.clock
    for _ in range(cfg.epochs):
        logits, z, relu_mask = _secure_forward(
            ctx, bundle, dims, x_in, w1, w2, first_layer_plain=True)
        _, stats = _eval_logits(ctx, logits, pub)
        gw1, gw2 = _secure_backward(ctx, bundle, dims, x_shared, z, relu_mask,
                                    w2, logits, onehot_enc, mask_vec)
        if cfg.optimizer == "sgd":
            w1 = sgd_step(ctx, w1, gw1, cfg.lr)
            w2 = sgd_step(ctx, w2, gw2, cfg.lr)
        else:
            w1 = adam_step(ctx, st1, w1, gw1)
            w2 = adam_step(ctx, st2, w2, gw2)
        stats["online_bytes"] = (meter.online_bits - prev_bits + 7) // 8
        stats["rounds"] = ctx.ep.clock - prev_clock
        prev_bits, prev_clock = meter.online_bits, ctx.ep.clock
        history.append(stats)
    logits, _, _ = _secure_forward(ctx, bundle, dims, x_in, w1, w2,
                                   first_layer_plain=True)
    opened, stats = _eval_logits(ctx, logits, pub)
    return {"w1": w1, "w2": w2, "history": history, "logits": opened,
            "test_acc": stats["acc"], "predictions": opened.argmax(axis=1)}


def _public_view(ds: GraphDataset, bundle: DecompositionBundle) -> dict:
    return {
        "dims": SmmDims(bundle.m, bundle.n, bundle.t),
        "dim": ds.features.shape[1],
        "classes": ds.num_classes,
        "labels": ds.labels,
        "train_mask": ds.train_mask,
        "test_mask": ds.test_mask,
    }


def _encode_inputs(ds: GraphDataset, cfg_fp: FixedPointConfig):
    x_enc = encode_fixed(ds.features, cfg_fp)
    onehot = np.eye(ds.num_classes)[ds.labels]
    return x_enc, encode_fixed(onehot, cfg_fp)


def train_secure(ds: GraphDataset, cfg: TrainConfig,
                 seed: int | None = None) -> tuple[dict, CommMeter]:
    """Run the full secure training loop in-process and return the party-0
    view of the result (histories and revealed evaluations are identical on
    both sides) together with the communication meter."""
    cfg_fp = FixedPointConfig(f=cfg.f)
    bundle = decompose_full(ds.adj_norm)
    pub = _public_view(ds, bundle)
    x_enc, onehot_enc = _encode_inputs(ds, cfg_fp)
    out0, out1, meter = run_two_party(
        _train_protocol,
        inputs0=(bundle, None, None, pub, cfg),
        inputs1=(None, x_enc, onehot_enc, pub, cfg),
        seed=cfg.seed if seed is None else seed, cfg=cfg_fp)
    result = dict(out0)
    result["w1"] = (out0["w1"], out1["w1"])
    result["w2"] = (out0["w2"], out1["w2"])
    return result, meter


def _forward_protocol(ctx, bundle, x_plain, w1, w2, pub):
    dims = pub["dims"]
    n, dim = dims.m, pub["dim"]
    x_in = x_plain if ctx.party == 1 else np.zeros((n, dim), dtype=np.uint64)
    logits, _, _ = _secure_forward(ctx, bundle, dims, x_in, w1, w2,
                                   first_layer_plain=True)
    return decode_fixed(reveal(ctx, logits), ctx.cfg)


def infer_secure(ds: GraphDataset, w1_shares, w2_shares, f: int = 16,
                 seed: int = 0) -> tuple[np.ndarray, CommMeter]:
    """Secure forward pass with shared weights; returns revealed predictions."""
    cfg_fp = FixedPointConfig(f=f)
    bundle = decompose_full(ds.adj_norm)
    pub = _public_view(ds, bundle)
    x_enc, _ = _encode_inputs(ds, cfg_fp)
    out0, _, meter = run_two_party(
        _forward_protocol,
        inputs0=(bundle, None, w1_shares[0], w2_shares[0], pub),
        inputs1=(None, x_enc, w1_shares[1], w2_shares[1], pub),
        seed=seed, cfg=cfg_fp)
    return out0.argmax(axis=1), meter


def _gradients_protocol(ctx, bundle, x_plain, onehot_enc, pub, w1f, w2f):
    dims = pub["dims"]
    n, dim = dims.m, pub["dim"]
    p0 = ctx.party == 0
    w1 = encode_fixed(w1f, ctx.cfg) if p0 else np.zeros(w1f.shape, np.uint64)
    w2 = encode_fixed(w2f, ctx.cfg) if p0 else np.zeros(w2f.shape, np.uint64)
    x_in = x_plain if not p0 else np.zeros((n, dim), dtype=np.uint64)
    logits, z, relu_mask = _secure_forward(ctx, bundle, dims, x_in, w1, w2,
                                           first_layer_plain=True)
    gw1, gw2 = _secure_backward(ctx, bundle, dims, x_in, z, relu_mask, w2,
                                logits, onehot_enc, pub["train_mask"].astype(np.uint64))
    return (decode_fixed(reveal(ctx, gw1), ctx.cfg),
            decode_fixed(reveal(ctx, gw2), ctx.cfg))


def secure_gradients(ds: GraphDataset, w1f: np.ndarray, w2f: np.ndarray,
                     f: int = 16, seed: int = 0):
    """One secure forward/backward pass at the given plaintext weights,
    returning the revealed (gw1, gw2); used to validate gradient direction."""
    cfg_fp = FixedPointConfig(f=f)
    bundle = decompose_full(ds.adj_norm)
    pub = _public_view(ds, bundle)
    x_enc, onehot_enc = _encode_inputs(ds, cfg_fp)
    out0, _, meter = run_two_party(
        _gradients_protocol,
        inputs0=(bundle, None, None, pub, w1f, w2f),
        inputs1=(None, x_enc, onehot_enc, pub, w1f, w2f),
        seed=seed, cfg=cfg_fp)
    return out0[0], out0[1], meter


# model share persistence ------------------------------------------------------

def save_model(path: str, w1_shares, w2_shares, f: int = 16) -> None:
    import json
    doc = {"version": 1, "f": f}
    for name, shares in (("w1", w1_shares), ("w2", w2_shares)):
        doc[name] = [[int(v) for v in np.asarray(s, dtype=np.uint64).ravel()]
                     for s in shares]
        doc[name + "_shape"] = list(np.asarray(shares[0]).shape)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path: str):
    import json
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != 1:
        raise ValueError(f"{path}: unsupported model file version")

    def unpack(name):
        shape = tuple(doc[name + "_shape"])
        return tuple(np.array(s, dtype=np.uint64).reshape(shape)
                     for s in doc[name])

    return unpack("w1"), unpack("w2"), int(doc["f"])
