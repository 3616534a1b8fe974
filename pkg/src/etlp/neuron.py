"""Discrete-time LIF / ALIF neuron layer with soft reset and refractoriness.

One call to :func:`step_layer` advances a whole layer by one time step::

    a(t) = gamma_a * a(t-1) + s(t-1)
    v(t) = alpha * v(t-1) + I(t) - s(t-1) * v_th
    A(t) = v_th + theta * a(t)
    s(t) = [v(t) >= A(t)] and refrac == 0

The membrane keeps integrating while a neuron is refractory; only spike
emission is suppressed. ``theta = 0`` turns the adaptive neuron into a plain
LIF neuron.

State arrays may carry leading batch dimensions; every update is elementwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ParameterError, ShapeError

__all__ = [
    "NeuronParams",
    "LayerState",
    "decay_from_tau",
    "step_layer",
    "threshold",
]


def decay_from_tau(tau_ms: float, dt_ms: float) -> float:
    """Per-step decay factor ``exp(-dt / tau)`` of a first-order filter."""
    if not (tau_ms > 0 and dt_ms > 0):
        raise ParameterError(f"tau_ms and dt_ms must be positive, got tau_ms={tau_ms}, dt_ms={dt_ms}")
    return math.exp(-dt_ms / tau_ms)


@dataclass(frozen=True)
class NeuronParams:
    alpha: float
    gamma_a: float
    v_th: float = 1.0
    theta: float = 0.0
    refractory_steps: int = 0
    dt_ms: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.gamma_a < 1.0:
            raise ParameterError(f"gamma_a must lie in (0, 1), got {self.gamma_a}")
        if self.theta < 0:
            raise ParameterError(f"theta must be >= 0, got {self.theta}")
        if self.refractory_steps < 0 or int(self.refractory_steps) != self.refractory_steps:
            raise ParameterError(f"refractory_steps must be a non-negative integer, got {self.refractory_steps}")
        if not self.dt_ms > 0:
            raise ParameterError(f"dt_ms must be positive, got {self.dt_ms}")

    @classmethod
    def from_time_constants(
        cls,
        tau_m_ms: float,
        tau_a_ms: float,
        dt_ms: float,
        v_th: float = 1.0,
        theta: float = 0.0,
        refractory_steps: int = 0,
    ) -> "NeuronParams":
        return cls(
            alpha=decay_from_tau(tau_m_ms, dt_ms),
            gamma_a=decay_from_tau(tau_a_ms, dt_ms),
            v_th=v_th,
            theta=theta,
            refractory_steps=refractory_steps,
            dt_ms=dt_ms,
        )

    @property
    def adaptive(self) -> bool:
        return self.theta > 0


@dataclass
class LayerState:
    """Membrane voltage ``v``, adaptation ``a``, spikes ``s`` and refractory counters."""

    v: np.ndarray
    a: np.ndarray
    s: np.ndarray
    refrac: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "LayerState":
        return cls(
            v=np.zeros(shape),
            a=np.zeros(shape),
            s=np.zeros(shape),
            refrac=np.zeros(shape, dtype=np.int64),
        )

    @property
    def size(self) -> int:
        return self.v.shape[-1]

    def copy(self) -> "LayerState":
        return LayerState(self.v.copy(), self.a.copy(), self.s.copy(), self.refrac.copy())


def threshold(a: np.ndarray, params: NeuronParams) -> np.ndarray:
    """Instantaneous threshold ``A = v_th + theta * a``."""
    return params.v_th + params.theta * a


def step_layer(state: LayerState, input_current, params: NeuronParams) -> tuple[LayerState, np.ndarray]:
    """Advance a layer by one step.

    Args:
        state: layer state at ``t-1``.
        input_current: summed synaptic drive ``sum_i W_ij x_i(t)``, same shape as ``state.v``.
        params: neuron constants.

    Returns:
        The new state and its spike vector (a float array of zeros and ones).
    """
    input_current = np.asarray(input_current, dtype=float)
    if input_current.shape != state.v.shape:
        raise ShapeError(f"input current has shape {input_current.shape}, layer state has {state.v.shape}")
    if np.isnan(input_current).any():
        raise NumericError("NaN in input current")
    new = advance(state, input_current, params)
    return new, new.s


def advance(state: LayerState, input_current: np.ndarray, params: NeuronParams) -> LayerState:
    """Unchecked body of :func:`step_layer`, used in the simulation loops."""
    a = params.gamma_a * state.a + state.s
    v = params.alpha * state.v + input_current - state.s * params.v_th
    fire = (v >= threshold(a, params)) & (state.refrac == 0)
    s = fire.astype(float)
    refrac = np.where(fire, params.refractory_steps, np.maximum(state.refrac - 1, 0))
    return LayerState(v=v, a=a, s=s, refrac=refrac)
