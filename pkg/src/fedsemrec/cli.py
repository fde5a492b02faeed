"""Command-line interface.

Subcommands: synth, ingest, pretrain, finetune, evaluate, inspect-clusters.
Metrics go out as line-delimited JSON records with fields
{phase, round, domain, metric, value}. Exit codes: 0 success, 1 runtime
failure, 2 usage error (unknown flags, unknown config keys, missing
checkpoint).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import TrainConfig, UsageError, load_config
from .data import (EmptyDatasetError, InteractionDataset, dataset_rows,
                   five_core_filter, read_sequences, write_sequences)
from .federation import Client, Server, finetune, pretrain
from .mlse import read_bank, write_bank
from .seqmodel import load_checkpoint, load_model_state, model_state, save_checkpoint
from .synth import synth_generate


def _emit(records, path) -> None:
    lines = [json.dumps(r, sort_keys=True) for r in records]
    if path in (None, "-"):
        for line in lines:
            print(line)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("".join(line + "\n" for line in lines))


def _overrides(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _config(args) -> TrainConfig:
    path = getattr(args, "config", None)
    if path is not None and not os.path.exists(path):
        raise UsageError(f"config file {path} not found")
    return load_config(path, _overrides(getattr(args, "set", None)))


def _load_dataset(path, n_items: int, domain: str) -> InteractionDataset:
    if not os.path.exists(path):
        raise UsageError(f"sequences file {path} not found")
    rows = read_sequences(path)
    try:
        sequences = [[int(item) for item in items] for _, items in rows]
        return InteractionDataset(sequences=sequences, n_users=len(rows),
                                  n_items=n_items, domain=domain,
                                  user_ids=[user for user, _ in rows])
    except ValueError as exc:
        raise UsageError(f"{path}: not a dense ingested sequences file "
                         f"({exc})") from exc


def _read_bank(path):
    if not os.path.exists(path):
        raise UsageError(f"encoding bank {path} not found")
    return read_bank(path)


def _load_checkpoint(path) -> dict:
    if not os.path.exists(path):
        raise UsageError(f"checkpoint {path} not found")
    return load_checkpoint(path)


# -- subcommands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    datasets, banks, labels = synth_generate(
        n_topics=args.topics, n_items=args.items, n_users=args.users,
        d_w=args.d_w, n_layers=args.layers, seed=args.seed,
        encoding_noise=args.encoding_noise, min_len=args.min_len,
        max_len=args.max_len, stay_prob=args.stay_prob,
        interaction_noise=args.interaction_noise,
        popularity_skew=args.popularity_skew)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for ds, bank, topic_of in zip(datasets, banks, labels):
        write_sequences(out / f"sequences_{ds.domain}.tsv", dataset_rows(ds))
        write_bank(out / f"bank_{ds.domain}.mlse", bank)
        with open(out / f"topics_{ds.domain}.tsv", "w", encoding="utf-8") as fh:
            for item, topic in enumerate(topic_of):
                fh.write(f"{item}\t{topic}\n")
        for metric, value in (("n_items", ds.n_items), ("n_users", ds.n_users),
                              ("n_interactions", ds.n_interactions)):
            records.append({"phase": "synth", "round": -1, "domain": ds.domain,
                            "metric": metric, "value": value})
    _emit(records, args.metrics_out)
    return 0


def cmd_ingest(args) -> int:
    if not os.path.exists(args.sequences):
        raise UsageError(f"sequences file {args.sequences} not found")
    raw = read_sequences(args.sequences)
    domain = args.domain or Path(args.sequences).stem
    try:
        ds = five_core_filter(raw, domain=domain)
    except EmptyDatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_sequences(args.out_sequences, dataset_rows(ds))
    if args.out_items:
        with open(args.out_items, "w", encoding="utf-8") as fh:
            for dense, original in enumerate(ds.item_ids):
                fh.write(f"{dense}\t{original}\n")
    records = [{"phase": "ingest", "round": -1, "domain": domain,
                "metric": metric, "value": value}
               for metric, value in (("n_users", ds.n_users),
                                     ("n_items", ds.n_items),
                                     ("n_interactions", ds.n_interactions),
                                     ("n_raw_users", len(raw)))]
    _emit(records, args.metrics_out)
    return 0


def _build_clients(args, config) -> list:
    if len(args.bank) != len(args.sequences):
        raise UsageError(f"{len(args.bank)} banks for {len(args.sequences)} "
                         "sequence files")
    if args.domains:
        names = [n.strip() for n in args.domains.split(",")]
        if len(names) != len(args.bank):
            raise UsageError(f"{len(names)} domain names for {len(args.bank)} banks")
    else:
        names = [Path(p).stem for p in args.sequences]
    clients = []
    for index, (bank_path, seq_path, name) in enumerate(
            zip(args.bank, args.sequences, names)):
        bank = _read_bank(bank_path)
        ds = _load_dataset(seq_path, bank.n_items, name)
        try:
            clients.append(Client(name, bank, ds, config, index=index))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return clients


def cmd_pretrain(args) -> int:
    config = _config(args)
    clients = _build_clients(args, config)
    if args.exchange_dir:
        Path(args.exchange_dir).mkdir(parents=True, exist_ok=True)
    server = Server(k=config.k_clusters, cluster_iters=config.cluster_iters,
                    shift_tol=config.cluster_shift_tol, epsilon=config.epsilon,
                    seed=config.seed, exchange_dir=args.exchange_dir)
    transcript = [] if args.transcript else None
    history = pretrain(clients, server, config, transcript=transcript)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for client in clients:
        state = model_state(client.model)
        state["state.x_c"] = client.x_c
        save_checkpoint(out / f"{client.client_id}.ckpt", state)
    if args.transcript:
        with open(args.transcript, "w", encoding="utf-8") as fh:
            for entry in transcript:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
    records = [{"phase": "pretrain", "round": entry["round"], "domain": cid,
                "metric": "loss", "value": loss}
               for entry in history for cid, loss in entry["losses"].items()]
    _emit(records, args.metrics_out)
    return 0


def cmd_finetune(args) -> int:
    config = _config(args)
    bank = _read_bank(args.bank)
    name = args.domain or Path(args.sequences).stem
    ds = _load_dataset(args.sequences, bank.n_items, name)
    try:
        client = Client(name, bank, ds, config, index=args.client_index)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    state = _load_checkpoint(args.checkpoint)
    if "state.x_c" not in state:
        raise UsageError(f"{args.checkpoint} holds no clustered encodings; "
                         "run pretrain first")
    try:
        load_model_state(client.model, state)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    client.x_c = state["state.x_c"]
    result = finetune(client, config)
    save_checkpoint(args.out, result.state)
    records = [{"phase": "finetune", "round": h["epoch"], "domain": name,
                "metric": "loss", "value": h["loss"]} for h in result.history]
    records += [{"phase": "finetune", "round": h["epoch"], "domain": name,
                 "metric": "valid_recall@10", "value": h["valid_recall10"]}
                for h in result.history]
    records.append({"phase": "finetune", "round": -1, "domain": name,
                    "metric": "best_valid_recall@10",
                    "value": result.best_valid_recall})
    _emit(records, args.metrics_out)
    return 0


def cmd_evaluate(args) -> int:
    config = _config(args)
    bank = _read_bank(args.bank)
    name = args.domain or Path(args.sequences).stem
    ds = _load_dataset(args.sequences, bank.n_items, name)
    try:
        client = Client(name, bank, ds, config, index=args.client_index)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    state = _load_checkpoint(args.checkpoint)
    try:
        load_model_state(client.model, state)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if "state.x_c" in state:
        client.x_c = state["state.x_c"]
    try:
        cutoffs = tuple(int(n) for n in args.cutoffs.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --cutoffs value {args.cutoffs!r}") from exc
    report = client.evaluate(target=args.target, cutoffs=cutoffs)
    _emit(report.as_records(phase="evaluate", domain=name), args.metrics_out)
    return 0


def cmd_inspect_clusters(args) -> int:
    state = _load_checkpoint(args.checkpoint)
    if "state.x_c" not in state:
        raise UsageError(f"{args.checkpoint} holds no clustered encodings")
    x_c = state["state.x_c"]
    _, inverse, counts = np.unique(x_c, axis=0, return_inverse=True,
                                   return_counts=True)
    records = [{"phase": "inspect-clusters", "round": -1, "domain": "",
                "metric": metric, "value": value}
               for metric, value in (("n_items", int(x_c.shape[0])),
                                     ("n_centroids", int(counts.size)),
                                     ("largest_cluster", int(counts.max())),
                                     ("smallest_cluster", int(counts.min())),
                                     ("mean_cluster_size", float(counts.mean())))]
    if args.per_cluster:
        records += [{"phase": "inspect-clusters", "round": -1,
                     "domain": "", "metric": f"cluster_{idx}_size",
                     "value": int(size)} for idx, size in enumerate(counts)]
    _emit(records, args.metrics_out)
    return 0


# -- parser ----------------------------------------------------------------------


def _add_config_flags(sub) -> None:
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override one config key")


def _add_metrics_flag(sub) -> None:
    sub.add_argument("--metrics-out", default="-",
                     help="metrics JSONL path, '-' for stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsemrec",
        description="Federated semantic sequential recommendation")
    subs = parser.add_subparsers(dest="command", required=True)

    synth = subs.add_parser("synth", help="generate the two-domain benchmark")
    synth.add_argument("--out-dir", required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--topics", type=int, default=8)
    synth.add_argument("--items", type=int, default=200)
    synth.add_argument("--users", type=int, default=300)
    synth.add_argument("--d-w", type=int, default=16)
    synth.add_argument("--layers", type=int, default=3)
    synth.add_argument("--encoding-noise", type=float, default=0.1)
    synth.add_argument("--interaction-noise", type=float, default=0.0)
    synth.add_argument("--min-len", type=int, default=6)
    synth.add_argument("--max-len", type=int, default=12)
    synth.add_argument("--stay-prob", type=float, default=0.8)
    synth.add_argument("--popularity-skew", type=float, default=0.0)
    _add_metrics_flag(synth)
    synth.set_defaults(func=cmd_synth)

    ingest = subs.add_parser("ingest", help="five-core filter raw sequences")
    ingest.add_argument("--sequences", required=True)
    ingest.add_argument("--out-sequences", required=True)
    ingest.add_argument("--out-items", help="dense-to-original item id map")
    ingest.add_argument("--domain")
    _add_metrics_flag(ingest)
    ingest.set_defaults(func=cmd_ingest)

    pre = subs.add_parser("pretrain", help="stage-1 federated rounds")
    pre.add_argument("--bank", action="append", required=True)
    pre.add_argument("--sequences", action="append", required=True)
    pre.add_argument("--domains", help="comma-separated client names")
    pre.add_argument("--out-dir", required=True)
    pre.add_argument("--transcript", help="message transcript JSONL path")
    pre.add_argument("--exchange-dir",
                     help="pass payloads through MLSE files in this directory")
    _add_config_flags(pre)
    _add_metrics_flag(pre)
    pre.set_defaults(func=cmd_pretrain)

    fin = subs.add_parser("finetune", help="stage-2 local fine-tuning")
    fin.add_argument("--bank", required=True)
    fin.add_argument("--sequences", required=True)
    fin.add_argument("--checkpoint", required=True)
    fin.add_argument("--out", required=True)
    fin.add_argument("--domain")
    fin.add_argument("--client-index", type=int, default=0)
    _add_config_flags(fin)
    _add_metrics_flag(fin)
    fin.set_defaults(func=cmd_finetune)

    ev = subs.add_parser("evaluate", help="full-ranking metrics for a checkpoint")
    ev.add_argument("--bank", required=True)
    ev.add_argument("--sequences", required=True)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--target", choices=("test", "valid"), default="test")
    ev.add_argument("--cutoffs", default="10,50")
    ev.add_argument("--domain")
    ev.add_argument("--client-index", type=int, default=0)
    _add_config_flags(ev)
    _add_metrics_flag(ev)
    ev.set_defaults(func=cmd_evaluate)

    ins = subs.add_parser("inspect-clusters",
                          help="summarize a checkpoint's clustered encodings")
    ins.add_argument("--checkpoint", required=True)
    ins.add_argument("--per-cluster", action="store_true")
    _add_metrics_flag(ins)
    ins.set_defaults(func=cmd_inspect_clusters)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())
