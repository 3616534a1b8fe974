"""Teaching neurons, the fixed random label projection and ETLP weight updates.

Teaching neurons carry the label: the neuron of the active class fires on a
schedule, and each of its spikes is the only thing that triggers plasticity.
Hidden synapses receive the label through a fixed random matrix ``B``; output
synapses receive it through one excitatory (own class) and inhibitory (all
other classes) synapse per teaching neuron.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ParameterError, ShapeError

__all__ = [
    "LearningParams",
    "TeachingConfig",
    "TeachingMode",
    "init_projection",
    "output_error",
    "output_teaching_current",
    "project_teaching",
    "teaching_spikes",
    "update_hidden_weights",
    "update_output_weights",
]


class TeachingMode(str, Enum):
    PERIODIC = "periodic"
    END_OF_WINDOW = "end_of_window"


@dataclass(frozen=True)
class TeachingConfig:
    """Firing schedule of the teaching neurons.

    ``window_steps`` is only consulted in end-of-window mode.
    """

    num_classes: int
    rate_hz: float = 100.0
    mode: TeachingMode = TeachingMode.PERIODIC
    dt_ms: float = 1.0
    window_steps: int = 100

    def __post_init__(self):
        object.__setattr__(self, "mode", TeachingMode(self.mode))
        if self.num_classes < 1:
            raise ParameterError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.mode is TeachingMode.PERIODIC and not self.rate_hz > 0:
            raise ParameterError(f"rate_hz must be positive, got {self.rate_hz}")

    @property
    def period_steps(self) -> int:
        # a rate faster than the step clock saturates at one spike per step
        return max(1, round(1000.0 / (self.rate_hz * self.dt_ms)))

    def fires(self, step: int) -> bool:
        if self.mode is TeachingMode.END_OF_WINDOW:
            return step == self.window_steps - 1
        return (step + 1) % self.period_steps == 0

    def schedule(self, num_steps: int) -> list[int]:
        return [t for t in range(num_steps) if self.fires(t)]


@dataclass(frozen=True)
class LearningParams:
    lr: float = 5e-4
    # applies the update of the output layer with the sign as literally printed
    literal_output_sign: bool = False

    def __post_init__(self):
        if not self.lr > 0:
            raise ParameterError(f"lr must be positive, got {self.lr}")


def teaching_spikes(step: int, label: int, cfg: TeachingConfig) -> np.ndarray:
    """One-hot spike vector of the teaching layer at ``step``."""
    if not 0 <= label < cfg.num_classes:
        raise ParameterError(f"label {label} outside [0, {cfg.num_classes})")
    out = np.zeros(cfg.num_classes)
    if cfg.fires(step):
        out[label] = 1.0
    return out


def init_projection(num_classes: int, hidden_size: int, seed) -> np.ndarray:
    """Fixed random label projection, uniform in ``[-1/sqrt(H), 1/sqrt(H)]``.

    Shape ``(num_classes, hidden_size)``. ``seed`` may be an int or a
    ``numpy.random.SeedSequence``. The returned array is read-only.
    """
    if num_classes < 1 or hidden_size < 1:
        raise ParameterError(f"projection needs positive dimensions, got {num_classes}x{hidden_size}")
    bound = 1.0 / math.sqrt(hidden_size)
    B = np.random.default_rng(seed).uniform(-bound, bound, size=(num_classes, hidden_size))
    B.flags.writeable = False
    return B


def project_teaching(B: np.ndarray, teach) -> np.ndarray:
    """Teaching signal seen by the hidden neurons, ``B.T @ teach``."""
    teach = np.asarray(teach, dtype=float)
    if B.shape[0] != teach.shape[-1]:
        raise ShapeError(f"projection has {B.shape[0]} classes, teaching vector has {teach.shape[-1]}")
    return teach @ B


def update_hidden_weights(W: np.ndarray, teach_signal, e: np.ndarray, lr: float) -> np.ndarray:
    """``W'[i, j] = W[i, j] + lr * teach_signal[j] * e[i, j]``.

    Returns ``W`` itself, untouched, when the teaching signal is all zero.
    """
    teach_signal = np.asarray(teach_signal, dtype=float)
    if e.shape != W.shape or teach_signal.shape != (W.shape[1],):
        raise ShapeError(f"hidden update: W {W.shape}, e {e.shape}, teaching signal {teach_signal.shape}")
    if not teach_signal.any():
        return W
    return W + lr * (teach_signal * e)


def output_teaching_current(teach) -> np.ndarray:
    """Signed current from the teaching layer: +1 for the taught class, -1 elsewhere."""
    teach = np.asarray(teach, dtype=float)
    n_active = np.count_nonzero(teach)
    if n_active == 0:
        return np.zeros_like(teach)
    if n_active > 1:
        raise ParameterError(f"teaching vector must be one-hot or zero, got {n_active} active classes")
    return np.where(teach != 0, 1.0, -1.0)


def output_error(s_out, I_teach) -> np.ndarray:
    """``(2 s - I - 1) / 2``, which equals ``s - s*`` under the +-1 label encoding."""
    return (2.0 * np.asarray(s_out, dtype=float) - np.asarray(I_teach, dtype=float) - 1.0) / 2.0


def update_output_weights(
    W: np.ndarray,
    s_out,
    I_teach,
    e_out: np.ndarray,
    lr: float,
    literal_sign: bool = False,
) -> np.ndarray:
    """Error-driven update of the output block on a teaching spike.

    Descends the squared error: ``W' = W - lr * err[j] * e_out[i, j]`` with
    ``err = s - s*``. ``literal_sign=True`` adds the term instead.
    """
    I_teach = np.asarray(I_teach, dtype=float)
    s_out = np.asarray(s_out, dtype=float)
    if e_out.shape != W.shape or s_out.shape != (W.shape[1],) or I_teach.shape != (W.shape[1],):
        raise ShapeError(f"output update: W {W.shape}, e {e_out.shape}, s {s_out.shape}, I {I_teach.shape}")
    if not I_teach.any():
        raise ParameterError("output update requires a teaching spike (I_teach is all zero)")
    err = output_error(s_out, I_teach)
    sign = 1.0 if literal_sign else -1.0
    return W + sign * lr * (err * e_out)
