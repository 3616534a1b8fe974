"""Reference learning rules: surrogate-gradient BPTT and broadcast eProp.

Both share the neuron model and the trace primitives with ETLP, which makes
the three rules directly comparable. BPTT is exact reverse-mode
differentiation of the unrolled network (reset and adaptation paths not
differentiated); eProp filters the per-synapse eligibility and scales it with
an error broadcast through a fixed random matrix.

:func:`count_gradient_state` tallies the scalars each rule must keep around to
compute its gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping

import numpy as np

from .errors import ParameterError, ShapeError
from .traces import TraceState

if TYPE_CHECKING:
    from .network import Network, UnrollBuffer

__all__ = [
    "EligibilityStore",
    "GradientTopology",
    "StateCount",
    "bptt_gradient",
    "count_gradient_state",
    "eprop_step",
]


def _phi(v: np.ndarray, A: np.ndarray, gamma_d: float) -> np.ndarray:
    return gamma_d * np.maximum(0.0, 1.0 - np.abs(v - A))


def bptt_gradient(
    buffer: "UnrollBuffer",
    target,
    eval_steps: int | Iterable[int],
    net: "Network",
) -> dict[str, np.ndarray]:
    """Gradient of ``E = 1/2 sum_{t in eval_steps} |s_out(t) - target|**2``.

    Reverse accumulation through time; errors cross from the output to the
    hidden layer through ``W_out.T`` and back in time through ``W_rec.T``.
    Returns one gradient per weight block, keyed like ``SynapseSet`` fields.
    """
    T = len(buffer)
    steps = {eval_steps} if isinstance(eval_steps, (int, np.integer)) else set(eval_steps)
    if not steps:
        raise ParameterError("at least one evaluation step is required")
    bad = [t for t in steps if not 0 <= t < T]
    if bad:
        raise ParameterError(f"evaluation step(s) {sorted(bad)} outside [0, {T})")
    target = np.asarray(target, dtype=float)
    out, hid = buffer.output, buffer.hidden
    if target.shape != (out.s.shape[1],):
        raise ShapeError(f"target has shape {target.shape}, output layer has {out.s.shape[1]} neurons")
    w = net.weights
    gd = net.gamma_d
    alpha_o = net.output_params.alpha
    alpha_h = net.hidden_params.alpha

    phi_o = _phi(out.v, out.A, gd)
    pre_out = buffer.x if hid is None else hid.s
    g_out = np.zeros(w.W_out.shape)
    d_out = np.zeros(out.s.shape[1])
    if hid is not None:
        phi_h = _phi(hid.v, hid.A, gd)
        g_in = np.zeros(w.W_in.shape)
        g_rec = None if w.W_rec is None else np.zeros(w.W_rec.shape)
        d_hid = np.zeros(hid.s.shape[1])

    for t in range(T - 1, -1, -1):
        dE_ds = out.s[t] - target if t in steps else 0.0
        d_out = dE_ds * phi_o[t] + alpha_o * d_out
        g_out += np.outer(pre_out[t], d_out)
        if hid is None:
            continue
        dE_dsh = w.W_out @ d_out
        if g_rec is not None:
            # d_hid still holds dE/dv_h(t+1) here
            dE_dsh = dE_dsh + w.W_rec @ d_hid
        d_hid = phi_h[t] * dE_dsh + alpha_h * d_hid
        g_in += np.outer(buffer.x[t], d_hid)
        if g_rec is not None and t > 0:
            g_rec += np.outer(hid.s[t - 1], d_hid)

    grads = {"W_out": g_out}
    if hid is not None:
        grads["W_in"] = g_in
        if g_rec is not None:
            grads["W_rec"] = g_rec
    return grads


@dataclass
class EligibilityStore:
    """Per-synapse low-pass filtered eligibility, one array per weight block."""

    values: dict[str, np.ndarray]
    kappa: float

    @classmethod
    def zeros(cls, shapes: Mapping[str, tuple[int, int]], kappa: float) -> "EligibilityStore":
        if not 0.0 <= kappa < 1.0:
            raise ParameterError(f"eligibility filter decay must lie in [0, 1), got {kappa}")
        return cls({k: np.zeros(shape) for k, shape in shapes.items()}, kappa)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self.values.items()}

    @property
    def size(self) -> int:
        return sum(v.size for v in self.values.values())


def eprop_step(
    traces: Mapping[str, TraceState],
    elig: EligibilityStore,
    output_error,
    B_feedback: np.ndarray | None,
    lr: float,
) -> dict[str, np.ndarray] | None:
    """Filter this step's eligibilities and return the weight deltas.

    ``output_error`` is ``s_out - s*`` at this step, or ``None`` when no error
    is defined here, in which case only the filters advance and ``None`` is
    returned. Hidden blocks receive the learning signal ``B_feedback.T @ error``.
    """
    for k, tr in traces.items():
        if k not in elig.values:
            raise ShapeError(f"no eligibility store for block {k}")
        if elig.kappa == 0.0:
            elig.values[k] = tr.e
        else:
            elig.values[k] = elig.kappa * elig.values[k] + tr.e
    if output_error is None:
        return None
    output_error = np.asarray(output_error, dtype=float)
    deltas = {}
    for k, e in elig.values.items():
        if k == "W_out":
            signal = output_error
        else:
            if B_feedback is None or B_feedback.shape[0] != output_error.shape[0]:
                raise ShapeError("hidden eProp update needs a (classes x hidden) feedback matrix")
            signal = output_error @ B_feedback
        if signal.shape != (e.shape[1],):
            raise ShapeError(f"learning signal of length {signal.shape} does not fit block {k} {e.shape}")
        deltas[k] = -lr * (signal * e)
    return deltas


@dataclass(frozen=True)
class GradientTopology:
    """One layer: ``num_inputs`` (N) pre-synaptic neurons onto ``num_neurons`` (M)."""

    num_inputs: int
    num_neurons: int
    num_steps: int = 100
    connectivity: float = 1.0
    neuron: str = "lif"

    def __post_init__(self):
        if min(self.num_inputs, self.num_neurons, self.num_steps) < 0:
            raise ParameterError("topology sizes must be non-negative")
        if not 0.0 <= self.connectivity <= 1.0:
            raise ParameterError(f"connectivity ratio must lie in [0, 1], got {self.connectivity}")
        if self.neuron not in ("lif", "alif"):
            raise ParameterError(f"unknown neuron kind {self.neuron!r}")

    @property
    def synapses(self) -> int:
        return round(self.connectivity * self.num_inputs * self.num_neurons)


@dataclass(frozen=True)
class StateCount:
    """Scalars stored per layer to compute the gradient.

    ``activations`` are unrolled per-step values (BPTT), ``pre_traces`` one per
    pre-synaptic neuron, ``synaptic_eligibility`` one filtered eligibility per
    realized synapse (eProp) and ``adapt_traces`` the per-synapse threshold
    adaptation traces of adaptive neurons.
    """

    rule: str
    activations: int = 0
    pre_traces: int = 0
    synaptic_eligibility: int = 0
    adapt_traces: int = 0

    @property
    def total(self) -> int:
        return self.activations + self.pre_traces + self.synaptic_eligibility + self.adapt_traces


def count_gradient_state(rule: str, topology: GradientTopology) -> StateCount:
    """Exact stored-scalar count of a rule on one layer."""
    N, M, T = topology.num_inputs, topology.num_neurons, topology.num_steps
    adaptive = topology.neuron == "alif"
    if rule == "bptt":
        # per step: the layer input plus v, s (and a, A for adaptive neurons)
        per_step = N + (4 if adaptive else 2) * M
        return StateCount(rule, activations=T * per_step)
    adapt = topology.synapses if adaptive else 0
    if rule == "eprop":
        return StateCount(rule, pre_traces=N, synaptic_eligibility=topology.synapses, adapt_traces=adapt)
    if rule == "etlp":
        return StateCount(rule, pre_traces=N, adapt_traces=adapt)
    raise ParameterError(f"unknown rule {rule!r}; expected bptt, eprop or etlp")
