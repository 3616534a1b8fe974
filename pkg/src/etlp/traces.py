"""Local learning quantities: pre-synaptic traces, surrogate, eligibility.

Weight blocks are laid out ``(pre, post)``; pre-indexed vectors broadcast
along rows and post-indexed vectors along columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError

__all__ = [
    "TraceState",
    "closed_form_pre_trace",
    "eligibility",
    "surrogate",
    "update_adapt_trace",
    "update_pre_trace",
]


def _check_same(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes {a.shape} and {b.shape} differ")


def _check_block(matrix: np.ndarray, pre: np.ndarray, post: np.ndarray, what: str):
    if matrix.shape != (pre.shape[-1], post.shape[-1]):
        raise ShapeError(
            f"{what}: matrix shape {matrix.shape} does not match (pre={pre.shape[-1]}, post={post.shape[-1]})"
        )


def update_pre_trace(eps_pre, input_spikes, alpha: float) -> np.ndarray:
    """Low-pass filter of input spikes: ``eps' = alpha * eps + I``."""
    eps_pre = np.asarray(eps_pre, dtype=float)
    input_spikes = np.asarray(input_spikes, dtype=float)
    _check_same(eps_pre, input_spikes, "pre trace vs input spikes")
    return alpha * eps_pre + input_spikes


def closed_form_pre_trace(spike_history, alpha: float, t: int) -> float:
    """Explicit sum ``sum_{i<=t} alpha**(t-i) * I(i)`` over a spike history."""
    history = np.asarray(spike_history, dtype=float)
    if not 0 <= t < len(history):
        raise IndexError(f"step {t} outside history of length {len(history)}")
    total = 0.0
    for i in range(t + 1):
        if history[i]:
            total += alpha ** (t - i) * history[i]
    return total


def surrogate(v, A, gamma_d: float):
    """Triangular pseudo-derivative ``gamma_d * max(0, 1 - |v - A|)``."""
    v = np.asarray(v, dtype=float)
    A = np.asarray(A, dtype=float)
    if np.isnan(v).any() or np.isnan(A).any():
        raise NumericError("NaN in surrogate input")
    out = gamma_d * np.maximum(0.0, 1.0 - np.abs(v - A))
    return float(out) if out.ndim == 0 else out


def update_adapt_trace(eps_adapt, eps_pre, phi, gamma_a: float, theta: float) -> np.ndarray:
    """Per-synapse adaptation eligibility.

    ``eps_adapt'[i, j] = eps_pre[i] * phi[j] + (gamma_a - phi[j] * theta) * eps_adapt[i, j]``
    """
    eps_adapt = np.asarray(eps_adapt, dtype=float)
    eps_pre = np.atleast_1d(np.asarray(eps_pre, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    _check_block(np.atleast_2d(eps_adapt), eps_pre, phi, "adaptation trace")
    return np.outer(eps_pre, phi) + (gamma_a - phi * theta) * eps_adapt


def eligibility(eps_pre, phi, eps_adapt=None, theta: float = 0.0) -> np.ndarray:
    """Combined eligibility ``e[i, j] = phi[j] * (eps_pre[i] - theta * eps_adapt[i, j])``.

    ``eps_adapt`` is ignored (treated as zero) when ``theta == 0``.
    """
    eps_pre = np.atleast_1d(np.asarray(eps_pre, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if theta == 0 or eps_adapt is None:
        return np.outer(eps_pre, phi)
    eps_adapt = np.atleast_2d(np.asarray(eps_adapt, dtype=float))
    _check_block(eps_adapt, eps_pre, phi, "eligibility")
    return phi * (eps_pre[:, None] - theta * eps_adapt)


@dataclass
class TraceState:
    """Trace storage for one ``(pre, post)`` weight block.

    ``eps_adapt`` is only allocated for adaptive post-synaptic neurons. The
    combined eligibility is formed on demand by :attr:`e`, since event-driven
    updates need it only at teaching steps.
    """

    eps_pre: np.ndarray
    eps_adapt: np.ndarray | None
    phi: np.ndarray
    theta: float = 0.0
    _e: np.ndarray | None = None

    @classmethod
    def zeros(cls, n_pre: int, n_post: int, theta: float = 0.0) -> "TraceState":
        return cls(
            eps_pre=np.zeros(n_pre),
            eps_adapt=np.zeros((n_pre, n_post)) if theta > 0 else None,
            phi=np.zeros(n_post),
            theta=theta,
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.eps_pre.size, self.phi.size)

    @property
    def stored_scalars(self) -> int:
        """Number of scalars kept from one step to the next."""
        n = self.eps_pre.size
        if self.eps_adapt is not None:
            n += self.eps_adapt.size
        return n

    def step(self, pre_spikes: np.ndarray, phi: np.ndarray, alpha: float, gamma_a: float):
        """Advance every trace by one step given this step's input spikes and surrogate."""
        self.eps_pre = alpha * self.eps_pre + pre_spikes
        self.phi = phi
        self._e = None
        if self.eps_adapt is not None:
            self.eps_adapt *= gamma_a - phi * self.theta
            self.eps_adapt += np.multiply.outer(self.eps_pre, phi)

    @property
    def e(self) -> np.ndarray:
        """Eligibility ``e(t)`` of the current step."""
        if self._e is None:
            if self.eps_adapt is None:
                self._e = np.multiply.outer(self.eps_pre, self.phi)
            else:
                self._e = self.phi * (self.eps_pre[:, None] - self.theta * self.eps_adapt)
        return self._e
