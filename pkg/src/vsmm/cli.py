"""Command-line interface: decomposition, protocol benchmarks, secure GCN
training / inference, and network-time reporting.

All subcommands emit JSON to stdout (and optionally to a file); `train` can
additionally mirror the per-epoch table as CSV. Usage errors exit 2, protocol
or input errors exit 1. The VSMM_SEED environment variable overrides any
configured seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .decompose import (DecomposeError, SparseMatrixCOO, decompose_full,
                        read_coo_text, save_bundle)
from .dealer import TapeExhausted
from .gcn import (TrainConfig, infer_secure, load_dataset, load_model,
                  save_model, train_secure)
from .protocols import op, osm
from .ring import random_ring, share_secret
from .runtime import (DeadlockError, NETWORK_CONDITIONS, PeerFailedError,
                      estimate_time, run_two_party)
from .smm import (SmmDims, beaver_dense_online_bits, smm, smm_online_bits)
from .decompose import Permutation


def _seed(args) -> int:
    env = os.environ.get("VSMM_SEED")
    return int(env) if env else args.seed


def _emit(doc: dict, out_path: str | None) -> None:
    text = json.dumps(doc, indent=2, default=float)
    print(text)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")


def _random_sparse(nodes: int, edges_per_node: int,
                   rng: np.random.Generator) -> SparseMatrixCOO:
    t = nodes * edges_per_node
    flat = rng.choice(nodes * nodes, size=t, replace=False)
    entries = [(int(p) // nodes, int(p) % nodes,
                float(rng.uniform(0.1, 2.0))) for p in flat]
    return SparseMatrixCOO.from_entries(nodes, nodes, entries)


# subcommands -----------------------------------------------------------------

def cmd_decompose(args) -> int:
    a = read_coo_text(args.coo)
    bundle = decompose_full(a)
    if args.out:
        save_bundle(args.out, bundle)
    _emit({"m": bundle.m, "n": bundle.n, "t": bundle.t,
           "ncol": bundle.ncol, "nrow": bundle.nrow,
           "out": args.out or None}, None)
    return 0


def cmd_bench(args) -> int:
    rng = np.random.default_rng(_seed(args))
    k, d, trials = args.nodes, args.dim, args.trials
    if args.protocol == "op":
        sigma = Permutation(rng.permutation(k))
        def proto(ctx, s, x):
            return op(ctx, s, x, k, d, shared=True)
        x0, x1 = share_secret(random_ring(rng, (k, d)), random_ring(rng, (k, d)))
        meter = None
        for _ in range(trials):
            _, _, meter = run_two_party(proto, (sigma, x0), (None, x1),
                                        seed=_seed(args))
        report = meter.report("op", NETWORK_CONDITIONS)
    elif args.protocol == "osm":
        s = rng.integers(0, 2, size=k * d).astype(np.uint64)
        x0, x1 = share_secret(random_ring(rng, (k * d,)),
                              random_ring(rng, (k * d,)))
        meter = None
        for _ in range(trials):
            _, _, meter = run_two_party(osm, (s, x0), (None, x1),
                                        seed=_seed(args))
        report = meter.report("osm", NETWORK_CONDITIONS)
    else:
        a = _random_sparse(k, args.edges_per_node, rng)
        bundle = decompose_full(a)
        dims = SmmDims(bundle.m, bundle.n, bundle.t)
        x0, x1 = share_secret(random_ring(rng, (k, d)), random_ring(rng, (k, d)))
        def proto(ctx, b, x):
            return smm(ctx, b, dims, x, shared=True)
        meter = None
        for _ in range(trials):
            _, _, meter = run_two_party(proto, (bundle, x0), (None, x1),
                                        seed=_seed(args))
        report = meter.report("smm", NETWORK_CONDITIONS)
        baseline = trials * beaver_dense_online_bits(k, k, d)
        report["beaver_dense_online_bits"] = baseline
        report["saving_pct"] = 100.0 * (1 - report["online_bits"] / baseline)
        report["formula_online_bits"] = trials * smm_online_bits(
            dims.m, dims.n, dims.t, d)
    report["trials"] = trials
    _emit(report, args.out)
    return 0


def cmd_train(args) -> int:
    ds = load_dataset(args.dataset)
    cfg = TrainConfig(optimizer=args.opt, lr=args.lr, epochs=args.epochs,
                      seed=_seed(args), hidden=args.hidden)
    result, meter = train_secure(ds, cfg)
    report = {
        "dataset": args.dataset,
        "config": {"optimizer": cfg.optimizer, "lr": cfg.lr,
                   "epochs": cfg.epochs, "seed": cfg.seed,
                   "hidden": cfg.hidden, "f": cfg.f},
        "per_epoch": result["history"],
        "totals": meter.report("gcn_train"),
        "test_acc": result["test_acc"],
        "est_time": {name: estimate_time(meter, model)
                     for name, model in NETWORK_CONDITIONS.items()},
    }
    if args.model_out:
        save_model(args.model_out, result["w1"], result["w2"], f=cfg.f)
        report["model"] = args.model_out
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["epoch", "loss", "acc", "online_bytes", "rounds"])
            writer.writeheader()
            for i, row in enumerate(result["history"]):
                writer.writerow({"epoch": i, **row})
    _emit(report, args.out)
    return 0


def cmd_infer(args) -> int:
    ds = load_dataset(args.dataset)
    w1, w2, f = load_model(args.model)
    preds, meter = infer_secure(ds, w1, w2, f=f, seed=_seed(args))
    acc = float((preds[ds.test_mask] == ds.labels[ds.test_mask]).mean()) \
        if ds.test_mask.any() else 0.0
    _emit({"predictions": preds.tolist(), "test_acc": acc,
           "totals": meter.report("gcn_infer"),
           "est_time": {name: estimate_time(meter, model)
                        for name, model in NETWORK_CONDITIONS.items()}},
          args.out)
    return 0


def cmd_report(args) -> int:
    with open(args.report) as fh:
        doc = json.load(fh)
    totals = doc.get("totals", doc)
    online_bits = totals.get("online_bits", totals.get("online_bytes", 0) * 8)
    framing_bits = totals.get("framing_bytes", 0) * 8
    rounds = totals["rounds"]
    conditions = [args.net] if args.net else list(NETWORK_CONDITIONS)
    est = {}
    for name in conditions:
        model = NETWORK_CONDITIONS[name]
        est[name] = (rounds * model.latency_s
                     + (online_bits + framing_bits) / model.bandwidth_bps)
    _emit({"protocol": totals.get("protocol", doc.get("protocol", "")),
           "online_bytes": (online_bits + 7) // 8,
           "offline_bytes": totals.get("offline_bytes", 0),
           "rounds": rounds, "est_time_by_condition": est}, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vsmm",
        description="Secure sparse-matrix 2PC toolkit: decomposition, "
                    "protocol benchmarks, and secure GCN training.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="decompose a COO text file")
    p.add_argument("coo")
    p.add_argument("--out", help="write the bundle as JSON")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("bench", help="run a protocol benchmark")
    p.add_argument("protocol", choices=["smm", "op", "osm"])
    p.add_argument("--nodes", type=int, default=64)
    p.add_argument("--edges-per-node", type=int, default=1)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("train", help="secure GCN training on a dataset dir")
    p.add_argument("--dataset", required=True)
    p.add_argument("--opt", choices=["sgd", "adam"], default="sgd")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-out", help="save trained weight shares as JSON")
    p.add_argument("--csv", help="mirror the per-epoch table as CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="secure inference with saved shares")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("report", help="network-time estimates for a report")
    p.add_argument("report", help="JSON report from bench/train/infer")
    p.add_argument("--net", choices=list(NETWORK_CONDITIONS))
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DecomposeError, DeadlockError, PeerFailedError, TapeExhausted,
            ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
