"""Run configuration: dataset presets, ``key = value`` files and overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import ConfigError, ParameterError
from .network import NEURON_KINDS, RULES, Network, Topology, init_weights
from .neuron import NeuronParams
from .plasticity import LearningParams, TeachingConfig, TeachingMode

DATASETS = ("nmnist", "shd_canonical", "synthetic")
DATA_DIR_ENV = "ETLP_DATA_DIR"


@dataclass(frozen=True)
class RunConfig:
    # defaults describe the desk-scale synthetic benchmark; presets replace them
    dataset: str = "synthetic"
    data_dir: str = ""
    rule: str = "etlp"
    # topology
    num_inputs: int = 40
    hidden_size: int = 64
    num_outputs: int = 5
    recurrent: bool = True
    hidden_neuron: str = "alif"
    output_neuron: str = "lif"
    # neuron and time grid
    dt_ms: float = 1.0
    T: int = 100
    tau_m_ms: float = 80.0
    tau_a_ms: float = 20.0
    v_th: float = 0.5
    theta: float = 5.0
    refractory_steps: int = 0
    gamma_d: float = 0.3
    # learning
    lr: float = 5e-4
    teach_rate_hz: float = 1000.0
    teach_mode: str = "periodic"
    literal_output_sign: bool = False
    loss: str = "many_to_one"
    eprop_kappa: float | None = None
    batch_size: int = 128
    epochs: int = 50
    seeds: tuple[int, ...] = (0, 1, 2)
    # data
    data_seed: int = 1234
    crop: int | None = None
    synth_base_rate_hz: float = 50.0
    synth_jitter_ms: float = 2.0
    synth_deletion_prob: float = 0.05
    synth_channels_per_class: int | None = None
    synth_train_per_class: int = 40
    synth_test_per_class: int = 20

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset: unknown value {self.dataset!r}, expected one of {DATASETS}")
        if self.rule not in RULES:
            raise ConfigError(f"rule: unknown value {self.rule!r}, expected one of {RULES}")
        for key in ("hidden_neuron", "output_neuron"):
            if getattr(self, key) not in NEURON_KINDS:
                raise ConfigError(f"{key}: unknown neuron kind {getattr(self, key)!r}")
        if self.teach_mode not in {m.value for m in TeachingMode}:
            raise ConfigError(f"teach_mode: unknown value {self.teach_mode!r}")
        if self.loss not in ("many_to_one", "per_step"):
            raise ConfigError(f"loss: unknown value {self.loss!r}")
        positive = ("num_inputs", "num_outputs", "dt_ms", "T", "tau_m_ms", "tau_a_ms", "lr", "batch_size")
        for key in positive:
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key}: must be positive, got {getattr(self, key)}")
        for key in ("hidden_size", "epochs", "refractory_steps", "theta"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key}: must be non-negative, got {getattr(self, key)}")
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")

    # ------------------------------------------------------------------

    @classmethod
    def for_dataset(cls, dataset: str, **overrides) -> "RunConfig":
        if dataset not in PRESETS:
            raise ConfigError(f"dataset: unknown value {dataset!r}, expected one of {DATASETS}")
        return cls(**{**PRESETS[dataset], **overrides})

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @property
    def resolved_data_dir(self) -> str:
        return self.data_dir or os.environ.get(DATA_DIR_ENV, "")

    def topology(self) -> Topology:
        return Topology(
            num_inputs=self.num_inputs,
            hidden_size=self.hidden_size,
            num_outputs=self.num_outputs,
            recurrent=self.recurrent,
            hidden_kind=self.hidden_neuron,
            output_kind=self.output_neuron,
        )

    def neuron_params(self) -> NeuronParams:
        return NeuronParams.from_time_constants(
            self.tau_m_ms,
            self.tau_a_ms,
            self.dt_ms,
            v_th=self.v_th,
            theta=self.theta,
            refractory_steps=self.refractory_steps,
        )

    def teaching(self) -> TeachingConfig:
        return TeachingConfig(
            num_classes=self.num_outputs,
            rate_hz=self.teach_rate_hz,
            mode=self.teach_mode,
            dt_ms=self.dt_ms,
            window_steps=self.T,
        )

    def build_network(self, seed: int) -> Network:
        try:
            params = self.neuron_params()
            topology = self.topology()
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
        return Network(
            topology=topology,
            weights=init_weights(topology, seed),
            hidden_params=params,
            output_params=params,
            teaching=self.teaching(),
            learning=LearningParams(lr=self.lr, literal_output_sign=self.literal_output_sign),
            gamma_d=self.gamma_d,
            eprop_kappa=self.eprop_kappa,
            loss=self.loss,
        )

    # ------------------------------------------------------------------

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))

    def run_id(self) -> str:
        # seeds are excluded so that runs of one experiment share an id
        text = "".join(line for line in self.to_text().splitlines(True) if not line.startswith("seeds "))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    @classmethod
    def from_text(cls, text: str, overrides: Mapping[str, str] | None = None) -> "RunConfig":
        """Parse ``key = value`` lines (``#`` comments); ``overrides`` win over the file.

        Unset keys take the preset of the configured dataset.
        """
        entries = parse_entries(text.splitlines())
        entries.update(overrides or {})
        return cls.from_entries(entries)

    @classmethod
    def from_file(cls, path: str | os.PathLike, overrides: Mapping[str, str] | None = None) -> "RunConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), overrides)

    @classmethod
    def from_entries(cls, entries: Mapping[str, str]) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(entries) - set(known))
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
        dataset = entries.get("dataset", "synthetic").strip()
        values = dict(PRESETS.get(dataset, {}))
        for key, raw in entries.items():
            values[key] = _parse(key, known[key].type, raw)
        return cls(**values)


def parse_entries(lines: Iterable[str]) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(key: str, type_name: str, raw: str) -> Any:
    raw = raw.strip()
    optional = "None" in type_name
    if optional and raw.lower() in ("none", "auto", ""):
        return None
    try:
        if type_name.startswith("bool"):
            if raw.lower() in ("true", "yes", "1", "on"):
                return True
            if raw.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if type_name.startswith("int"):
            return int(raw)
        if type_name.startswith("float"):
            return float(raw)
        if type_name.startswith("tuple"):
            return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type_name}") from None
    return raw


PRESETS: dict[str, dict[str, Any]] = {
    "nmnist": dict(
        dataset="nmnist",
        num_inputs=2312,
        hidden_size=200,
        num_outputs=10,
        recurrent=False,
        hidden_neuron="lif",
        output_neuron="lif",
        dt_ms=1.0,
        T=100,
        tau_m_ms=80.0,
        tau_a_ms=10.0,
        v_th=1.0,
        theta=0.0,
        refractory_steps=5,
        lr=5e-4,
        teach_rate_hz=100.0,
        batch_size=128,
    ),
    "shd_canonical": dict(
        dataset="shd_canonical",
        num_inputs=700,
        hidden_size=450,
        num_outputs=20,
        recurrent=True,
        hidden_neuron="alif",
        output_neuron="alif",
        dt_ms=10.0,
        T=100,
        tau_m_ms=1000.0,
        tau_a_ms=1000.0,
        v_th=1.0,
        theta=10.0,
        refractory_steps=5,
        lr=5e-4,
        teach_rate_hz=100.0,
        batch_size=128,
    ),
    "synthetic": {},
}
