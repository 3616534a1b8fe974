"""Command-line driver: ``etlp <subcommand> [options]``.

Exit status is 0 on success, 2 for usage and configuration errors and 1 for
data or runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import report
from .config import RunConfig, parse_entries
from .data import decode_nmnist, write_canonical_events
from .errors import ConfigError, EtlpError
from .experiment import (
    COMPLEXITY_HEADER,
    complexity_report,
    complexity_rows,
    load_data,
    run_experiment,
    theta_sweep,
)
from .hardware import (
    GradientUnit,
    TraceMemory,
    equivalence_report,
    hw_step,
    random_stimuli,
    required_cycles_per_second,
    write_records,
)
from .network import SynapseSet, evaluate_detailed
from .neuron import decay_from_tau

log = logging.getLogger("etlp")


def _overrides(args) -> dict[str, str]:
    entries = parse_entries(args.set or [])
    for key, flag in (("rule", args.rule), ("theta", args.theta)):
        if flag is not None:
            entries[key] = str(flag)
    if getattr(args, "seed", None) is not None:
        entries["seeds"] = str(args.seed)
    if getattr(args, "epochs", None) is not None:
        entries["epochs"] = str(args.epochs)
    return entries


def load_config(args) -> RunConfig:
    overrides = _overrides(args)
    if args.config:
        return RunConfig.from_file(args.config, overrides)
    return RunConfig.from_entries(overrides)


def save_weights(path: Path, weights: SynapseSet, config: RunConfig):
    arrays = {k: v for k, v in (("W_in", weights.W_in), ("W_rec", weights.W_rec), ("W_out", weights.W_out), ("B", weights.B)) if v is not None}
    np.savez(path, config=np.array(config.to_text()), **arrays)


def load_weights(path: str | Path) -> tuple[SynapseSet, RunConfig]:
    with np.load(path) as z:
        config = RunConfig.from_text(str(z["config"]))
        get = lambda k: z[k].copy() if k in z.files else None  # noqa: E731
        weights = SynapseSet(W_out=get("W_out"), W_in=get("W_in"), W_rec=get("W_rec"), B=get("B"))
    return weights, config


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_train(args) -> int:
    config = load_config(args)
    out = Path(args.out or "metrics.csv")
    result = run_experiment(config, out)
    print(f"metrics: {out}")
    for split in ("train", "test"):
        acc = np.array(result.final_accuracies(split))
        print(f"{split}: mean {acc.mean():.4f} std {acc.std():.4f} over {acc.size} seed(s)")
    if not args.no_plot:
        fig = report.learning_curve(result.records, out.with_suffix(".png"), f"{config.dataset} / {config.rule}")
        print(f"figure: {fig}")
    if args.save_weights:
        for seed, net in zip(config.seeds, result.networks):
            path = Path(args.save_weights.format(seed=seed))
            path.parent.mkdir(parents=True, exist_ok=True)
            save_weights(path, net.weights, config.replace(seeds=(seed,)))
            print(f"weights: {path}")
    return 0


def cmd_evaluate(args) -> int:
    weights, stored = load_weights(args.weights)
    entries = _overrides(args)
    config = RunConfig.from_entries({**_entries(stored), **entries}) if entries else stored
    net = config.build_network(config.seeds[0])
    if {k: v.shape for k, v in weights.blocks().items()} != {k: v.shape for k, v in net.weights.blocks().items()}:
        raise ConfigError("stored weights do not match the configured topology")
    net.weights = weights
    train_set, test_set = load_data(config)
    data = {"train": train_set, "test": test_set}
    splits = ["train", "test"] if args.split == "both" else [args.split]
    stream = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["split", "samples", "accuracy"])
        for split in splits:
            acc, _ = evaluate_detailed(net, data[split])
            writer.writerow([split, len(data[split]), f"{acc:.6f}"])
    finally:
        if args.out:
            stream.close()
    return 0


def _entries(config: RunConfig) -> dict[str, str]:
    return parse_entries(config.to_text().splitlines())


def cmd_sweep(args) -> int:
    config = load_config(args)
    thetas = [float(t) for t in args.thetas.split(",") if t.strip()]
    rules = [r.strip() for r in args.rules.split(",")] if args.rules else None
    out_dir = Path(args.out or "sweep")
    table = theta_sweep(config, thetas, out_dir, rules)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(table.header())
    writer.writerows(table.rows())
    if not args.no_plot:
        report.theta_sweep_plot(table, out_dir / "theta_sweep.png")
    return 0


def cmd_complexity(args) -> int:
    config = load_config(args)
    rows = complexity_report(config, args.connectivity)
    stream = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(COMPLEXITY_HEADER)
        writer.writerows(complexity_rows(rows))
    finally:
        if args.out:
            stream.close()
    if args.out and not args.no_plot:
        report.complexity_plot(rows, Path(args.out).with_suffix(".png"))
    return 0


def cmd_hwsim(args) -> int:
    alpha = args.alpha if args.alpha is not None else decay_from_tau(args.tau_ms, args.dt_ms)
    stimuli = random_stimuli(args.steps, args.memory_size, args.seed, spike_prob=args.spike_prob)
    single = equivalence_report(stimuli, alpha, args.memory_size, resync=True)
    drift = equivalence_report(stimuli, alpha, args.memory_size)
    print(f"steps: {single.steps}")
    print(f"max gradient error: {single.max_gradient_error:.3e}")
    print(f"max trace error: {single.max_trace_error:.3e}")
    print(f"max accumulated trace error: {drift.max_trace_error:.3e}")
    if args.records:
        unit = GradientUnit(TraceMemory(args.memory_size), alpha, record=True)
        for inputs in stimuli[: args.record_steps]:
            hw_step(unit, inputs)
        with open(args.records, "w", newline="", encoding="utf-8") as fh:
            write_records(unit.records, fh)
        print(f"records: {args.records}")
    if args.synapses:
        cycles = required_cycles_per_second(args.synapses, args.update_rate_hz)
        print(f"required clock: {cycles} cycles/s for {args.synapses} synapses at {args.update_rate_hz:g} updates/s")
    return 0


def cmd_decode(args) -> int:
    blob = Path(args.input).read_bytes()
    events = decode_nmnist(blob, crop=args.crop)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_canonical_events(events, fh)
    else:
        write_canonical_events(events, sys.stdout)
    return 0


# --------------------------------------------------------------------------


def _config_flags(p: argparse.ArgumentParser, seed: bool = True):
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key (repeatable)")
    p.add_argument("--rule", choices=("etlp", "eprop", "bptt", "none"))
    p.add_argument("--theta", type=float, metavar="X", help="threshold adaptation strength")
    if seed:
        p.add_argument("--seed", type=int, metavar="N", help="run this single seed instead of the configured list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etlp", description="Event-based three-factor local plasticity for spiking networks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress per epoch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train every configured seed and write a metrics CSV")
    _config_flags(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", metavar="PATH", help="metrics CSV (default metrics.csv)")
    p.add_argument("--no-plot", action="store_true", help="skip the learning-curve PNG")
    p.add_argument("--save-weights", metavar="PATTERN", help="npz path per seed, may contain {seed}")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="accuracy of stored weights")
    _config_flags(p, seed=False)
    p.add_argument("--weights", required=True, metavar="PATH")
    p.add_argument("--split", choices=("train", "test", "both"), default="test")
    p.add_argument("--out", metavar="PATH", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-theta", help="final test accuracy per rule and theta")
    _config_flags(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--thetas", default="0,5,10", help="comma-separated theta values")
    p.add_argument("--rules", help="comma-separated rules (default: the configured rule)")
    p.add_argument("--out", metavar="DIR", help="output directory (default sweep/)")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("complexity", help="stored gradient state per rule and layer")
    _config_flags(p, seed=False)
    p.add_argument("--connectivity", type=float, default=1.0)
    p.add_argument("--out", metavar="PATH", help="CSV output (default stdout)")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("hwsim", help="fixed-point gradient unit against its float mirror")
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--memory-size", type=int, default=64)
    p.add_argument("--spike-prob", type=float, default=0.1)
    p.add_argument("--alpha", type=float, help="trace decay (overrides --tau-ms)")
    p.add_argument("--tau-ms", type=float, default=80.0)
    p.add_argument("--dt-ms", type=float, default=1.0)
    p.add_argument("--records", metavar="PATH", help="per-cycle CSV log of the first --record-steps requests")
    p.add_argument("--record-steps", type=int, default=100)
    p.add_argument("--synapses", type=int, help="synapses per neuron for the clock budget")
    p.add_argument("--update-rate-hz", type=float, default=100.0)
    p.set_defaults(func=cmd_hwsim)

    p = sub.add_parser("decode-nmnist", help="convert an N-MNIST .bin sample to canonical CSV events")
    p.add_argument("input", metavar="FILE")
    p.add_argument("--crop", type=int)
    p.add_argument("--out", metavar="PATH", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_decode)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"etlp: configuration error: {exc}", file=sys.stderr)
        return 2
    except (EtlpError, OSError) as exc:
        print(f"etlp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
