"""Network wiring, the per-sample simulation loop and rate decoding.

A network has an optional hidden layer (feedforward or with all-to-all
recurrence) followed by a spiking output layer. ``hidden_size = 0`` gives a
single-layer network where inputs project straight onto the outputs.

Weight blocks are stored ``(pre, post)`` so that the input current of a layer
is ``x @ W``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ParameterError, ShapeError
from .neuron import LayerState, NeuronParams, advance, threshold
from .plasticity import (
    LearningParams,
    TeachingConfig,
    init_projection,
    output_teaching_current,
    update_hidden_weights,
    update_output_weights,
)
from .traces import TraceState

RULES = ("etlp", "eprop", "bptt", "none")
NEURON_KINDS = ("lif", "alif")


@dataclass(frozen=True)
class Topology:
    num_inputs: int
    hidden_size: int
    num_outputs: int
    recurrent: bool = False
    hidden_kind: str = "lif"
    output_kind: str = "lif"

    def __post_init__(self):
        if self.num_inputs < 1 or self.num_outputs < 1 or self.hidden_size < 0:
            raise ParameterError(
                f"layer sizes must be positive (hidden may be 0): "
                f"{self.num_inputs}/{self.hidden_size}/{self.num_outputs}"
            )
        if self.recurrent and self.hidden_size == 0:
            raise ParameterError("a recurrent network needs a hidden layer")
        for kind in (self.hidden_kind, self.output_kind):
            if kind not in NEURON_KINDS:
                raise ParameterError(f"unknown neuron kind {kind!r}, expected one of {NEURON_KINDS}")

    @property
    def has_hidden(self) -> bool:
        return self.hidden_size > 0


@dataclass
class SynapseSet:
    """All weight blocks plus the fixed label projection ``B`` (classes x hidden)."""

    W_out: np.ndarray
    W_in: np.ndarray | None = None
    W_rec: np.ndarray | None = None
    B: np.ndarray | None = None

    def blocks(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in (("W_in", self.W_in), ("W_rec", self.W_rec), ("W_out", self.W_out)) if v is not None}

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name, W in self.blocks().items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(W).tobytes())
        return h.hexdigest()

    def copy(self) -> "SynapseSet":
        return SynapseSet(
            W_out=self.W_out.copy(),
            W_in=None if self.W_in is None else self.W_in.copy(),
            W_rec=None if self.W_rec is None else self.W_rec.copy(),
            B=self.B,
        )


def _uniform_block(seed: np.random.SeedSequence, fan_in: int, fan_out: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return np.random.default_rng(seed).uniform(-bound, bound, size=(fan_in, fan_out))


def init_weights(topology: Topology, seed: int) -> SynapseSet:
    """Uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` blocks, one generator stream per block.

    Streams are independent, so toggling recurrence leaves ``W_in``, ``W_out``
    and ``B`` unchanged for a given seed.
    """
    s_in, s_rec, s_out, s_b = np.random.SeedSequence(seed).spawn(4)
    t = topology
    if not t.has_hidden:
        return SynapseSet(W_out=_uniform_block(s_out, t.num_inputs, t.num_outputs))
    return SynapseSet(
        W_in=_uniform_block(s_in, t.num_inputs, t.hidden_size),
        W_rec=_uniform_block(s_rec, t.hidden_size, t.hidden_size) if t.recurrent else None,
        W_out=_uniform_block(s_out, t.hidden_size, t.num_outputs),
        B=init_projection(t.num_outputs, t.hidden_size, s_b),
    )


@dataclass
class Network:
    topology: Topology
    weights: SynapseSet
    hidden_params: NeuronParams
    output_params: NeuronParams
    teaching: TeachingConfig
    learning: LearningParams = field(default_factory=LearningParams)
    gamma_d: float = 0.3
    # eProp eligibility filter decay; None means the output membrane decay
    eprop_kappa: float | None = None
    # "many_to_one": error at teaching steps only; "per_step": error at every step
    loss: str = "many_to_one"

    def __post_init__(self):
        if self.loss not in ("many_to_one", "per_step"):
            raise ParameterError(f"unknown loss aggregation {self.loss!r}")
        t, w = self.topology, self.weights
        expected = {
            "W_out": (t.hidden_size if t.has_hidden else t.num_inputs, t.num_outputs),
            "W_in": (t.num_inputs, t.hidden_size) if t.has_hidden else None,
            "W_rec": (t.hidden_size, t.hidden_size) if t.recurrent else None,
        }
        for name, shape in expected.items():
            W = getattr(w, name)
            actual = None if W is None else W.shape
            if actual != shape:
                raise ShapeError(f"{name} has shape {actual}, topology requires {shape}")
        if t.has_hidden and (w.B is None or w.B.shape != (t.num_outputs, t.hidden_size)):
            raise ShapeError("projection B missing or mis-shaped")
        if self.teaching.num_classes != t.num_outputs:
            raise ShapeError("teaching layer must have one neuron per output class")

    @property
    def kappa(self) -> float:
        return self.output_params.alpha if self.eprop_kappa is None else self.eprop_kappa

    def error_steps(self, num_steps: int) -> list[int]:
        if self.loss == "per_step":
            return list(range(num_steps))
        return self.teaching.schedule(num_steps)


@dataclass
class LayerRecord:
    """Per-step values of one layer over an unrolled sample, each ``(T, size)``."""

    v: np.ndarray
    a: np.ndarray
    s: np.ndarray
    A: np.ndarray


@dataclass
class UnrollBuffer:
    """Everything reverse-mode differentiation needs from a forward pass.

    Reset and adaptation contributions are not differentiated through; the
    buffer only keeps the forward values.
    """

    x: np.ndarray
    output: LayerRecord
    hidden: LayerRecord | None = None

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass
class SampleResult:
    counts: np.ndarray
    updates: int = 0
    buffer: UnrollBuffer | None = None
    gradients: dict[str, np.ndarray] | None = None


def rate_decode(spike_counts) -> int:
    """Index of the most active output neuron; ties go to the lowest index."""
    counts = np.asarray(spike_counts)
    if counts.size == 0:
        raise ParameterError("cannot decode an empty spike-count vector")
    return int(np.argmax(counts))


def _check_frames(net: Network, frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[1] != net.topology.num_inputs:
        raise ShapeError(f"frames must be (T, {net.topology.num_inputs}), got {frames.shape}")
    return frames.astype(float, copy=False)


def _layer_params(net: Network, kind: str, params: NeuronParams) -> NeuronParams:
    # a LIF layer ignores any configured adaptation scale
    return params if kind == "alif" else replace(params, theta=0.0)


def run_sample(
    net: Network,
    frames,
    label: int,
    rule: str = "none",
    train: bool = False,
    apply_updates: bool = True,
) -> SampleResult:
    """Simulate one sample from a zero state, learning according to ``rule``.

    With ``train=False`` the weights are never touched. For ``etlp`` updates are
    applied online at each teaching spike; ``eprop`` and ``bptt`` accumulate over
    the sample and apply at its end (``apply_updates=False`` returns the
    accumulated quantities in ``SampleResult.gradients`` instead).
    """
    if rule not in RULES:
        raise ParameterError(f"unknown learning rule {rule!r}, expected one of {RULES}")
    frames = _check_frames(net, frames)
    if not 0 <= label < net.topology.num_outputs:
        raise ParameterError(f"label {label} outside [0, {net.topology.num_outputs})")
    if not train or rule == "none":
        counts = simulate_batch(net, frames[None])[0]
        return SampleResult(counts=counts)
    if rule == "bptt":
        return _run_bptt(net, frames, label, apply_updates)
    return _run_online(net, frames, label, rule, apply_updates)


def simulate_batch(net: Network, frames: np.ndarray) -> np.ndarray:
    """Forward-only simulation of a batch ``(B, T, inputs)``; returns spike counts ``(B, outputs)``."""
    frames = np.asarray(frames, dtype=float)
    topo, w = net.topology, net.weights
    batch, T, _ = frames.shape
    hp = _layer_params(net, topo.hidden_kind, net.hidden_params)
    op = _layer_params(net, topo.output_kind, net.output_params)
    out = LayerState.zeros((batch, topo.num_outputs))
    hid = LayerState.zeros((batch, topo.hidden_size)) if topo.has_hidden else None
    counts = np.zeros((batch, topo.num_outputs))
    for t in range(T):
        x = frames[:, t]
        if hid is not None:
            current = x @ w.W_in
            if w.W_rec is not None:
                current = current + hid.s @ w.W_rec
            hid = advance(hid, current, hp)
            x = hid.s
        out = advance(out, x @ w.W_out, op)
        counts += out.s
    return counts


def _surrogate(state: LayerState, params: NeuronParams, gamma_d: float) -> np.ndarray:
    return gamma_d * np.maximum(0.0, 1.0 - np.abs(state.v - threshold(state.a, params)))


def _run_online(net: Network, frames: np.ndarray, label: int, rule: str, apply_updates: bool) -> SampleResult:
    from .baselines import EligibilityStore, eprop_step

    topo, w = net.topology, net.weights
    T = frames.shape[0]
    hp = _layer_params(net, topo.hidden_kind, net.hidden_params)
    op = _layer_params(net, topo.output_kind, net.output_params)
    lr = net.learning.lr
    gd = net.gamma_d

    n_pre_out = topo.hidden_size if topo.has_hidden else topo.num_inputs
    traces = {"W_out": TraceState.zeros(n_pre_out, topo.num_outputs, op.theta)}
    if topo.has_hidden:
        traces["W_in"] = TraceState.zeros(topo.num_inputs, topo.hidden_size, hp.theta)
        if topo.recurrent:
            traces["W_rec"] = TraceState.zeros(topo.hidden_size, topo.hidden_size, hp.theta)

    teach_steps = set(net.teaching.schedule(T))
    error_steps = set(net.error_steps(T))
    target = np.zeros(topo.num_outputs)
    target[label] = 1.0
    teach_vec = target  # the active teaching neuron is the label's
    if rule == "eprop":
        elig = EligibilityStore.zeros({k: tr.shape for k, tr in traces.items()}, net.kappa)
        deltas = {k: np.zeros(shape) for k, shape in elig.shapes().items()}

    out = LayerState.zeros(topo.num_outputs)
    hid = LayerState.zeros(topo.hidden_size) if topo.has_hidden else None
    counts = np.zeros(topo.num_outputs)
    updates = 0
    for t in range(T):
        x = frames[t]
        if hid is not None:
            s_prev = hid.s
            current = x @ w.W_in
            if w.W_rec is not None:
                current = current + s_prev @ w.W_rec
            hid = advance(hid, current, hp)
            phi_h = _surrogate(hid, hp, gd)
            traces["W_in"].step(x, phi_h, hp.alpha, hp.gamma_a)
            if w.W_rec is not None:
                traces["W_rec"].step(s_prev, phi_h, hp.alpha, hp.gamma_a)
            pre_out = hid.s
        else:
            pre_out = x
        out = advance(out, pre_out @ w.W_out, op)
        counts += out.s
        phi_o = _surrogate(out, op, gd)
        traces["W_out"].step(pre_out, phi_o, op.alpha, op.gamma_a)

        if rule == "etlp":
            if t in teach_steps:
                updates += 1
                if hid is not None:
                    signal = teach_vec @ w.B
                    w.W_in = update_hidden_weights(w.W_in, signal, traces["W_in"].e, lr)
                    if w.W_rec is not None:
                        w.W_rec = update_hidden_weights(w.W_rec, signal, traces["W_rec"].e, lr)
                w.W_out = update_output_weights(
                    w.W_out,
                    out.s,
                    output_teaching_current(teach_vec),
                    traces["W_out"].e,
                    lr,
                    literal_sign=net.learning.literal_output_sign,
                )
        else:
            err = out.s - target if t in error_steps else None
            step_deltas = eprop_step(traces, elig, err, w.B, lr)
            if step_deltas is not None:
                updates += 1
                for k, d in step_deltas.items():
                    deltas[k] += d

    result = SampleResult(counts=counts, updates=updates)
    if rule == "eprop":
        if apply_updates:
            for k, d in deltas.items():
                setattr(w, k, getattr(w, k) + d)
        else:
            result.gradients = deltas
    return result


def unroll(net: Network, frames: np.ndarray) -> UnrollBuffer:
    """Forward pass of a single sample recording every per-step layer quantity."""
    frames = _check_frames(net, frames)
    topo, w = net.topology, net.weights
    T = frames.shape[0]
    hp = _layer_params(net, topo.hidden_kind, net.hidden_params)
    op = _layer_params(net, topo.output_kind, net.output_params)

    def record(size):
        return LayerRecord(*(np.zeros((T, size)) for _ in range(4)))

    out_rec = record(topo.num_outputs)
    hid_rec = record(topo.hidden_size) if topo.has_hidden else None
    out = LayerState.zeros(topo.num_outputs)
    hid = LayerState.zeros(topo.hidden_size) if topo.has_hidden else None
    for t in range(T):
        x = frames[t]
        if hid is not None:
            current = x @ w.W_in
            if w.W_rec is not None:
                current = current + hid.s @ w.W_rec
            hid = advance(hid, current, hp)
            hid_rec.v[t], hid_rec.a[t], hid_rec.s[t], hid_rec.A[t] = hid.v, hid.a, hid.s, threshold(hid.a, hp)
            x = hid.s
        out = advance(out, x @ w.W_out, op)
        out_rec.v[t], out_rec.a[t], out_rec.s[t], out_rec.A[t] = out.v, out.a, out.s, threshold(out.a, op)
    return UnrollBuffer(x=frames, output=out_rec, hidden=hid_rec)


def _run_bptt(net: Network, frames: np.ndarray, label: int, apply_updates: bool) -> SampleResult:
    from .baselines import bptt_gradient

    buffer = unroll(net, frames)
    target = np.zeros(net.topology.num_outputs)
    target[label] = 1.0
    steps = net.error_steps(len(buffer))
    grads = bptt_gradient(buffer, target, steps, net) if steps else None
    result = SampleResult(counts=buffer.output.s.sum(axis=0), updates=1 if steps else 0, buffer=buffer)
    if grads is None:
        return result
    if apply_updates:
        for k, g in grads.items():
            setattr(net.weights, k, getattr(net.weights, k) - net.learning.lr * g)
    else:
        result.gradients = grads
    return result


def evaluate(net: Network, dataset: Sequence, batch_size: int = 256) -> float:
    """Fraction of samples whose rate-decoded prediction equals the label."""
    return evaluate_detailed(net, dataset, batch_size)[0]


def evaluate_detailed(net: Network, dataset: Sequence, batch_size: int = 256) -> tuple[float, np.ndarray]:
    """Accuracy and the per-sample output spike counts."""
    if len(dataset) == 0:
        raise ParameterError("cannot evaluate on an empty dataset")
    counts = []
    for start in range(0, len(dataset), batch_size):
        chunk = dataset[start : start + batch_size]
        frames = np.stack([np.asarray(s.frames, dtype=float) for s in chunk])
        if frames.shape[2] != net.topology.num_inputs:
            raise ShapeError(f"frames have {frames.shape[2]} channels, network expects {net.topology.num_inputs}")
        counts.append(simulate_batch(net, frames))
    counts = np.concatenate(counts)
    labels = np.array([s.label for s in dataset])
    # argmax picks the lowest index on ties, same as rate_decode
    accuracy = float(np.mean(np.argmax(counts, axis=1) == labels))
    return accuracy, counts
