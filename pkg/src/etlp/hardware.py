"""Bit-accurate model of the ETLP gradient unit.

The unit keeps one pre-synaptic trace per pre-neuron address in a small
memory. A request (``step_I``) walks the control FSM through three clock
cycles:

1. ``init``  latch the request inputs, go to ``read``;
2. ``read``  fetch the stored trace, compute the new trace, the triangular
   surrogate of the post-synaptic voltage and the gradient, go to ``write``;
3. ``write`` store the new trace, raise ``done``, go back to ``init``.

All arithmetic is signed 16-bit fixed point with 10 fractional bits (Q6.10),
round-to-nearest-even and saturation instead of wraparound.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Sequence, TextIO

import numpy as np

from .errors import FsmError, NumericError, ParameterError

FRAC_BITS = 10
WORD_BITS = 16
RAW_MAX = (1 << (WORD_BITS - 1)) - 1
RAW_MIN = -(1 << (WORD_BITS - 1))
LSB = 2.0**-FRAC_BITS
CYCLES_PER_UPDATE = 3


def _saturate(raw: int) -> int:
    return min(RAW_MAX, max(RAW_MIN, raw))


def _shift_round_even(value: int, bits: int) -> int:
    q, r = divmod(value, 1 << bits)
    half = 1 << (bits - 1)
    if r > half or (r == half and q & 1):
        q += 1
    return q


@dataclass(frozen=True)
class FixedPoint:
    """Q6.10 value; ``raw`` is the two's-complement integer word."""

    raw: int

    def __post_init__(self):
        if not RAW_MIN <= self.raw <= RAW_MAX:
            raise ParameterError(f"raw value {self.raw} outside the 16-bit word")

    def __add__(self, other: "FixedPoint") -> "FixedPoint":
        return FixedPoint(_saturate(self.raw + other.raw))

    def __sub__(self, other: "FixedPoint") -> "FixedPoint":
        return FixedPoint(_saturate(self.raw - other.raw))

    def __mul__(self, other: "FixedPoint") -> "FixedPoint":
        return FixedPoint(_saturate(_shift_round_even(self.raw * other.raw, FRAC_BITS)))

    def __neg__(self) -> "FixedPoint":
        return FixedPoint(_saturate(-self.raw))

    def __abs__(self) -> "FixedPoint":
        return FixedPoint(_saturate(abs(self.raw)))

    def __float__(self) -> float:
        return self.raw * LSB


ZERO = FixedPoint(0)
ONE = FixedPoint(1 << FRAC_BITS)


def fx_quantize(x: float) -> FixedPoint:
    """Nearest Q6.10 value (ties to even), saturating outside the range."""
    x = float(x)
    if np.isnan(x):
        raise NumericError("cannot quantize NaN")
    if x >= (RAW_MAX + 1) * LSB:
        return FixedPoint(RAW_MAX)
    if x < RAW_MIN * LSB:
        return FixedPoint(RAW_MIN)
    # scaling by a power of two is exact; round() ties to even
    return FixedPoint(_saturate(round(x * (1 << FRAC_BITS))))


def fx_to_real(f: FixedPoint) -> float:
    return f.raw * LSB


def fx_max(a: FixedPoint, b: FixedPoint) -> FixedPoint:
    return a if a.raw >= b.raw else b


class FsmState(str, Enum):
    INIT = "init"
    READ = "read"
    WRITE = "write"


_NEXT = {FsmState.INIT: FsmState.READ, FsmState.READ: FsmState.WRITE, FsmState.WRITE: FsmState.INIT}


class HwInputs(NamedTuple):
    """One gradient request. Real values are quantized when latched."""

    address: int
    pre_spike: int
    post_v: float
    threshold: float
    teach_value: float


class TraceMemory:
    """One Q6.10 trace word per pre-synaptic address."""

    def __init__(self, size: int, initial: Sequence[float] | None = None):
        if size < 1:
            raise ParameterError("trace memory needs at least one address")
        self.words = [0] * size
        if initial is not None:
            if len(initial) != size:
                raise ParameterError(f"{len(initial)} initial traces for a memory of {size}")
            self.words = [fx_quantize(x).raw for x in initial]

    def __len__(self) -> int:
        return len(self.words)

    def read(self, address: int) -> FixedPoint:
        return FixedPoint(self.words[address])

    def write(self, address: int, value: FixedPoint):
        self.words[address] = value.raw

    def as_real(self) -> np.ndarray:
        return np.array(self.words, dtype=float) * LSB


@dataclass
class CycleRecord:
    cycle: int
    state: FsmState
    address: int
    pre_spike: int
    post_v_raw: int
    threshold_raw: int
    teach_raw: int
    trace_raw: int
    gradient_raw: int
    done: int


@dataclass
class GradientUnitState:
    fsm: FsmState = FsmState.INIT
    cycle_counter: int = 0
    pending: HwInputs | None = None
    done: bool = False


@dataclass
class GradientUnit:
    """Cycle-level model of one gradient module and its trace memory.

    ``alpha`` is the trace decay and ``increment`` the constant added on a
    pre-synaptic spike; both are quantized to Q6.10 once, at construction.
    """

    memory: TraceMemory
    alpha: float
    increment: float = 1.0
    record: bool = False
    state: GradientUnitState = field(default_factory=GradientUnitState)
    records: list[CycleRecord] = field(default_factory=list)

    def __post_init__(self):
        self.alpha_fx = fx_quantize(self.alpha)
        self.increment_fx = fx_quantize(self.increment)
        self._latched: tuple | None = None
        self._new_trace = ZERO
        self.gradient = ZERO

    def request(self, inputs: HwInputs):
        """Raise ``step_I`` with the given inputs; consumed on the next ``init`` cycle."""
        if self.state.fsm is not FsmState.INIT or self.state.pending is not None:
            raise FsmError(f"request while the unit is busy (state {self.state.fsm.value})")
        if not 0 <= inputs.address < len(self.memory):
            raise ParameterError(f"address {inputs.address} outside trace memory of size {len(self.memory)}")
        if inputs.pre_spike not in (0, 1):
            raise ParameterError(f"pre_spike must be 0 or 1, got {inputs.pre_spike}")
        self.state.pending = inputs

    def tick(self):
        """Advance one clock cycle."""
        st = self.state
        current = st.fsm
        st.done = False
        if current is FsmState.INIT:
            if st.pending is None:
                st.cycle_counter += 1
                self._log(current)
                return
            p = st.pending
            self._latched = (
                p.address,
                p.pre_spike,
                fx_quantize(p.post_v),
                fx_quantize(p.threshold),
                fx_quantize(p.teach_value),
            )
            st.pending = None
        elif current is FsmState.READ:
            address, pre_spike, v, A, teach = self._latched
            trace = self.memory.read(address)
            new_trace = self.alpha_fx * trace
            if pre_spike:
                new_trace = new_trace + self.increment_fx
            surr = fx_max(ZERO, ONE - abs(v - A))
            self._new_trace = new_trace
            self.gradient = (new_trace * surr) * teach
        else:
            self.memory.write(self._latched[0], self._new_trace)
            st.done = True
        st.fsm = _NEXT[current]
        st.cycle_counter += 1
        self._log(current)

    def _log(self, state: FsmState):
        if not self.record:
            return
        if self._latched is None:
            latched = (0, 0, ZERO, ZERO, ZERO)
        else:
            latched = self._latched
        address, pre_spike, v, A, teach = latched
        self.records.append(
            CycleRecord(
                cycle=self.state.cycle_counter,
                state=state,
                address=address,
                pre_spike=pre_spike,
                post_v_raw=v.raw,
                threshold_raw=A.raw,
                teach_raw=teach.raw,
                trace_raw=self._new_trace.raw,
                gradient_raw=self.gradient.raw,
                done=int(self.state.done),
            )
        )


def hw_step(unit: GradientUnit, inputs: HwInputs) -> tuple[FixedPoint, int]:
    """Run one complete gradient computation; returns ``(gradient, cycles)``."""
    if unit.state.fsm is not FsmState.INIT:
        raise FsmError(f"hw_step called in state {unit.state.fsm.value}, expected init")
    start = unit.state.cycle_counter
    unit.request(inputs)
    while True:
        unit.tick()
        if unit.state.done:
            break
    return unit.gradient, unit.state.cycle_counter - start


def reference_step(trace: float, inputs: HwInputs, alpha: float, increment: float = 1.0) -> tuple[float, float]:
    """Floating-point mirror of the datapath; returns ``(new_trace, gradient)``."""
    new_trace = alpha * trace + (increment if inputs.pre_spike else 0.0)
    surr = max(0.0, 1.0 - abs(inputs.post_v - inputs.threshold))
    return new_trace, new_trace * surr * inputs.teach_value


@dataclass(frozen=True)
class EquivalenceReport:
    steps: int
    max_gradient_error: float
    mean_gradient_error: float
    max_trace_error: float
    mean_trace_error: float


def equivalence_report(
    stimuli: Iterable[HwInputs],
    alpha: float,
    memory_size: int,
    initial_traces: Sequence[float] | None = None,
    increment: float = 1.0,
    resync: bool = False,
) -> EquivalenceReport:
    """Feed the same stimuli to the fixed-point unit and a float mirror.

    The mirror uses the unit's stored decay and increment constants, so the
    reported error is that of the datapath arithmetic alone. With ``resync``
    the mirror trace is reset to the stored word before every request, which
    isolates the error of a single step from accumulated trace drift.
    """
    unit = GradientUnit(TraceMemory(memory_size, initial_traces), alpha, increment)
    mirror = unit.memory.as_real()
    alpha_real = fx_to_real(unit.alpha_fx)
    inc_real = fx_to_real(unit.increment_fx)
    g_err, t_err = [], []
    for inputs in stimuli:
        if resync:
            mirror[inputs.address] = fx_to_real(unit.memory.read(inputs.address))
        grad, _ = hw_step(unit, inputs)
        new_trace, ref_grad = reference_step(mirror[inputs.address], inputs, alpha_real, inc_real)
        mirror[inputs.address] = new_trace
        g_err.append(abs(fx_to_real(grad) - ref_grad))
        t_err.append(abs(fx_to_real(unit.memory.read(inputs.address)) - new_trace))
    if not g_err:
        return EquivalenceReport(0, 0.0, 0.0, 0.0, 0.0)
    return EquivalenceReport(len(g_err), max(g_err), float(np.mean(g_err)), max(t_err), float(np.mean(t_err)))


def random_stimuli(
    n: int,
    memory_size: int,
    seed: int,
    spike_prob: float = 0.5,
    voltage_range: float = 2.0,
    teach_range: float = 1.0,
) -> list[HwInputs]:
    """Random requests whose real-valued fields already lie on the Q6.10 grid."""
    rng = np.random.default_rng(seed)

    def grid(lo, hi, size):
        return rng.integers(round(lo / LSB), round(hi / LSB), size=size, endpoint=True) * LSB

    address = rng.integers(0, memory_size, size=n)
    spikes = (rng.random(n) < spike_prob).astype(int)
    v = grid(-voltage_range, voltage_range, n)
    A = grid(-voltage_range, voltage_range, n)
    teach = grid(-teach_range, teach_range, n)
    return [HwInputs(int(a), int(s), float(x), float(y), float(z)) for a, s, x, y, z in zip(address, spikes, v, A, teach)]


def required_cycles_per_second(
    synapses_per_neuron: int | Sequence[int],
    updates_per_second: float,
    cycles_per_update: int = CYCLES_PER_UPDATE,
) -> int:
    """Clock cycles per second one unit needs to update all synapses of a neuron."""
    total = synapses_per_neuron if isinstance(synapses_per_neuron, int) else sum(synapses_per_neuron)
    return round(total * updates_per_second * cycles_per_update)


RECORD_FIELDS = [
    "cycle",
    "state",
    "address",
    "pre_spike",
    "post_v_raw",
    "threshold_raw",
    "teach_raw",
    "trace_raw",
    "gradient_raw",
    "done",
]


def write_records(records: Iterable[CycleRecord], stream: TextIO):
    """Write the per-cycle stimulus/response log as CSV."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    for r in records:
        writer.writerow([getattr(r, f).value if f == "state" else getattr(r, f) for f in RECORD_FIELDS])
