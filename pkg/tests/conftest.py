import sys

import numpy as np

from etlp.network import Network, SynapseSet, Topology, init_weights
from etlp.neuron import NeuronParams
from etlp.plasticity import LearningParams, TeachingConfig


def single_layer(N, M, seed, T=100, alpha=0.9, mean=0.0, scale=1.0, error_step=None, kappa=0.0):
    """Feedforward LIF layer with a single error/teaching step (``T - 1`` unless given)."""
    topo = Topology(num_inputs=N, hidden_size=0, num_outputs=M, recurrent=False, hidden_kind="lif", output_kind="lif")
    W = np.random.default_rng(seed).normal(mean, scale / np.sqrt(N), size=(N, M))
    params = NeuronParams(alpha=alpha, gamma_a=0.5)
    return Network(
        topology=topo,
        weights=SynapseSet(W_out=W),
        hidden_params=params,
        output_params=params,
        teaching=TeachingConfig(num_classes=M, mode="end_of_window", window_steps=T if error_step is None else error_step + 1),
        learning=LearningParams(lr=1e-3),
        eprop_kappa=kappa,
    )


def two_layer(N, H, C, seed, recurrent=True, hidden_kind="alif", output_kind="lif", theta=2.0, T=100, refractory=0, teach_rate_hz=100.0, gamma_a=0.9):
    topo = Topology(num_inputs=N, hidden_size=H, num_outputs=C, recurrent=recurrent, hidden_kind=hidden_kind, output_kind=output_kind)
    params = NeuronParams(alpha=0.95, gamma_a=gamma_a, theta=theta, refractory_steps=refractory)
    return Network(
        topology=topo,
        weights=init_weights(topo, seed),
        hidden_params=params,
        output_params=params,
        teaching=TeachingConfig(num_classes=C, rate_hz=teach_rate_hz, window_steps=T),
        learning=LearningParams(lr=1e-2),
    )


def poisson_frames(T, N, rate, seed):
    return (np.random.default_rng(seed).random((T, N)) < rate).astype(np.uint8)


def informative_steps(buffer, target, gamma_d=0.3):
    """Steps at which some output neuron has both a nonzero surrogate and a nonzero error."""
    out = buffer.output
    phi = gamma_d * np.maximum(0.0, 1.0 - np.abs(out.v - out.A))
    return np.flatnonzero(((phi > 0) & (out.s != target)).any(axis=1))


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.RESULTS:
            terminalreporter.write_line(line)
