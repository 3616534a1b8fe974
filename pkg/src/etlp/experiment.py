"""Training loops, metrics files, theta sweeps and complexity tables."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import GradientTopology, StateCount, count_gradient_state
from .config import RunConfig
from .data import LabeledSample, load_event_dataset, split_per_class, synth_dataset
from .errors import ConfigError
from .network import Network, evaluate_detailed, run_sample

log = logging.getLogger(__name__)

METRICS_HEADER = ["run_id", "seed", "epoch", "split", "accuracy", "mean_rate_hz", "updates", "wall_ms"]


@dataclass
class MetricsRecord:
    run_id: str
    seed: int | str
    epoch: int
    split: str
    accuracy: float
    mean_rate_hz: float
    updates: int
    wall_ms: float

    def row(self) -> list[str]:
        return [
            self.run_id,
            str(self.seed),
            str(self.epoch),
            self.split,
            f"{self.accuracy:.6f}",
            f"{self.mean_rate_hz:.6f}",
            str(self.updates),
            f"{self.wall_ms:.0f}",
        ]


def load_data(config: RunConfig) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Train and test samples for the configured dataset."""
    if config.dataset == "synthetic":
        per_class = config.synth_train_per_class + config.synth_test_per_class
        synth = synth_dataset(
            config.num_outputs,
            config.num_inputs,
            config.T,
            config.synth_base_rate_hz,
            config.synth_jitter_ms,
            per_class,
            config.data_seed,
            dt_ms=config.dt_ms,
            deletion_prob=config.synth_deletion_prob,
            channels_per_class=config.synth_channels_per_class,
        )
        return split_per_class(synth.samples, config.synth_test_per_class)
    root = config.resolved_data_dir
    if not root:
        raise ConfigError("data_dir: no dataset path configured (set data_dir or ETLP_DATA_DIR)")
    if not Path(root).is_dir():
        raise ConfigError(f"data_dir: dataset path {root!r} does not exist")
    if config.dataset == "nmnist":
        size = config.crop or 34
        if config.num_inputs != 2 * size * size:
            raise ConfigError(f"num_inputs: N-MNIST at {size}x{size} needs {2 * size * size} inputs")
    splits = []
    for split in ("train", "test"):
        splits.append(
            load_event_dataset(root, split, config.dataset, config.dt_ms, config.T, config.num_inputs, config.crop)
        )
    return splits[0], splits[1]


def train_epoch(net: Network, samples: Sequence[LabeledSample], rule: str, rng: np.random.Generator, batch_size: int = 128) -> int:
    """One pass over shuffled samples; returns the number of weight-update events.

    ETLP and eProp learn sample by sample. BPTT averages gradients over
    mini-batches of ``batch_size`` samples.
    """
    order = rng.permutation(len(samples))
    updates = 0
    if rule != "bptt":
        for i in order:
            s = samples[i]
            updates += run_sample(net, s.frames, s.label, rule=rule, train=True).updates
        return updates
    w = net.weights
    for start in range(0, len(order), batch_size):
        batch = order[start : start + batch_size]
        total: dict[str, np.ndarray] = {}
        for i in batch:
            s = samples[i]
            res = run_sample(net, s.frames, s.label, rule="bptt", train=True, apply_updates=False)
            for k, g in (res.gradients or {}).items():
                total[k] = total.get(k, 0.0) + g
        for k, g in total.items():
            setattr(w, k, getattr(w, k) - net.learning.lr * g / len(batch))
        if total:
            updates += 1
    return updates


def _eval_record(config, net, samples, run_id, seed, epoch, split, updates, wall_ms) -> MetricsRecord:
    accuracy, counts = evaluate_detailed(net, samples)
    window_s = config.T * config.dt_ms / 1000.0
    return MetricsRecord(run_id, seed, epoch, split, accuracy, float(counts.mean() / window_s), updates, wall_ms)


def run_seed(config: RunConfig, seed: int, train_set, test_set, run_id: str | None = None) -> tuple[list[MetricsRecord], Network]:
    """Train one randomly initialised network, evaluating after every epoch."""
    run_id = run_id or config.run_id()
    net = config.build_network(seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(5)[4])
    records = []
    for split, data in (("train", train_set), ("test", test_set)):
        records.append(_eval_record(config, net, data, run_id, seed, 0, split, 0, 0.0))
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        updates = train_epoch(net, train_set, config.rule, rng, config.batch_size)
        wall_ms = (time.perf_counter() - start) * 1000.0
        for split, data in (("train", train_set), ("test", test_set)):
            records.append(_eval_record(config, net, data, run_id, seed, epoch, split, updates, wall_ms))
        log.info("seed %d epoch %d: train %.3f test %.3f", seed, epoch, records[-2].accuracy, records[-1].accuracy)
    return records, net


def summarize(records: Sequence[MetricsRecord], run_id: str) -> list[MetricsRecord]:
    """Mean and standard deviation over seeds at the final epoch, per split."""
    final = max(r.epoch for r in records)
    out = []
    for split in ("train", "test"):
        rows = [r for r in records if r.epoch == final and r.split == split and isinstance(r.seed, int)]
        acc = np.array([r.accuracy for r in rows])
        rate = np.array([r.mean_rate_hz for r in rows])
        upd = np.array([r.updates for r in rows])
        for name, fn in (("mean", np.mean), ("std", np.std)):
            out.append(MetricsRecord(run_id, name, final, split, float(fn(acc)), float(fn(rate)), int(round(fn(upd))), 0.0))
    return out


@dataclass
class ExperimentResult:
    path: Path
    records: list[MetricsRecord]
    networks: list[Network]

    def final_accuracies(self, split: str = "test") -> list[float]:
        final = max(r.epoch for r in self.records)
        return [r.accuracy for r in self.records if r.epoch == final and r.split == split and isinstance(r.seed, int)]


def run_experiment(config: RunConfig, out_path: str | Path, data=None) -> ExperimentResult:
    """Train every seed of ``config`` and write the metrics CSV to ``out_path``."""
    out_path = Path(out_path)
    train_set, test_set = data if data is not None else load_data(config)
    run_id = config.run_id()
    records: list[MetricsRecord] = []
    networks = []
    for seed in config.seeds:
        seed_records, net = run_seed(config, seed, train_set, test_set, run_id)
        records += seed_records
        networks.append(net)
    records += summarize(records, run_id)
    write_metrics(records, out_path)
    return ExperimentResult(out_path, records, networks)


def write_metrics(records: Sequence[MetricsRecord], path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for r in records:
            writer.writerow(r.row())


def read_metrics(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRICS_HEADER:
            raise ValueError(f"{path}: unexpected metrics header {reader.fieldnames}")
        return list(reader)


# --------------------------------------------------------------------------
# theta sweep
# --------------------------------------------------------------------------


@dataclass
class SweepTable:
    thetas: list[float]
    rules: list[str]
    mu: dict[tuple[str, float], float]
    sigma: dict[tuple[str, float], float]
    runs: dict[tuple[str, float], ExperimentResult]

    def header(self) -> list[str]:
        cols = ["rule"]
        for th in self.thetas:
            cols += [f"theta={th:g} mu", f"theta={th:g} sigma"]
        return cols

    def rows(self) -> list[list[str]]:
        out = []
        for rule in self.rules:
            row = [rule]
            for th in self.thetas:
                row += [f"{100 * self.mu[rule, th]:.2f}", f"{100 * self.sigma[rule, th]:.2f}"]
            out.append(row)
        return out

    def write(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.header())
            writer.writerows(self.rows())


def theta_sweep(
    config: RunConfig,
    theta_values: Sequence[float],
    out_dir: str | Path,
    rules: Sequence[str] | None = None,
    data=None,
) -> SweepTable:
    """Final test accuracy (mean and std over seeds) per rule and theta."""
    if not (config.recurrent and config.hidden_neuron == "alif"):
        raise ConfigError("theta sweep needs a recurrent topology with adaptive (alif) hidden neurons")
    if not theta_values:
        raise ConfigError("theta sweep needs at least one theta value")
    out_dir = Path(out_dir)
    rules = list(rules or [config.rule])
    data = data if data is not None else load_data(config)
    thetas = [float(t) for t in theta_values]
    mu, sigma, runs = {}, {}, {}
    for rule in rules:
        for th in thetas:
            cfg = config.replace(rule=rule, theta=th)
            res = run_experiment(cfg, out_dir / f"metrics_{rule}_theta{th:g}.csv", data)
            acc = np.array(res.final_accuracies("test"))
            mu[rule, th], sigma[rule, th], runs[rule, th] = float(acc.mean()), float(acc.std()), res
    table = SweepTable(thetas, rules, mu, sigma, runs)
    table.write(out_dir / "theta_sweep.csv")
    return table


# --------------------------------------------------------------------------
# complexity
# --------------------------------------------------------------------------

COMPLEXITY_HEADER = ["layer", "rule", "inputs", "neurons", "activations", "pre_traces", "synaptic_eligibility", "adapt_traces", "total"]


def complexity_report(config: RunConfig, connectivity: float = 1.0) -> list[tuple[str, GradientTopology, StateCount]]:
    """Stored-scalar counts of every rule for every layer of the configured network."""
    layers = []
    if config.hidden_size > 0:
        n_pre = config.num_inputs + (config.hidden_size if config.recurrent else 0)
        layers.append(("hidden", GradientTopology(n_pre, config.hidden_size, config.T, connectivity, config.hidden_neuron)))
        layers.append(("output", GradientTopology(config.hidden_size, config.num_outputs, config.T, connectivity, config.output_neuron)))
    else:
        layers.append(("output", GradientTopology(config.num_inputs, config.num_outputs, config.T, connectivity, config.output_neuron)))
    rows = []
    for name, topo in layers:
        for rule in ("bptt", "eprop", "etlp"):
            rows.append((name, topo, count_gradient_state(rule, topo)))
    return rows


def complexity_rows(report) -> list[list[str]]:
    return [
        [name, c.rule, str(t.num_inputs), str(t.num_neurons), str(c.activations), str(c.pre_traces),
         str(c.synaptic_eligibility), str(c.adapt_traces), str(c.total)]
        for name, t, c in report
    ]
