"""Event-data ingestion, time binning and a synthetic spike-pattern generator.

Supported sources:

* N-MNIST ``.bin`` files (5-byte records, 34x34 sensor, two polarities).
* Canonical event CSV (``timestamp_us,channel``), the interchange format for
  audio-like sources such as SHD after external conversion.
* :func:`synth_dataset`, class templates of Poisson spike times perturbed by
  jitter and random deletion.

Datasets on disk use one sub-directory per class label under ``train/`` and
``test/``; files are read in sorted order.
"""

from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence, TextIO

import numpy as np

from .errors import FormatError, ParameterError

log = logging.getLogger(__name__)

NMNIST_SIZE = 34
RECORD_BYTES = 5
CANONICAL_HEADER = "timestamp_us,channel"


class Event(NamedTuple):
    timestamp_us: int
    channel: int


@dataclass
class FrameSequence:
    frames: np.ndarray  # (T, channels), uint8 in {0, 1}
    dt_ms: float
    dropped: int = 0

    @property
    def T(self) -> int:
        return self.frames.shape[0]


@dataclass
class LabeledSample:
    frames: np.ndarray
    label: int


# --------------------------------------------------------------------------
# vision channel layout
# --------------------------------------------------------------------------


def pixel_channel(x: int, y: int, polarity: int, width: int = NMNIST_SIZE, height: int = NMNIST_SIZE) -> int:
    """Flatten a pixel event address: ``polarity * W * H + y * W + x``."""
    if not (0 <= x < width and 0 <= y < height and polarity in (0, 1)):
        raise FormatError(f"pixel address ({x}, {y}, {polarity}) outside a {width}x{height} sensor")
    return polarity * width * height + y * width + x


def channel_pixel(channel: int, width: int = NMNIST_SIZE, height: int = NMNIST_SIZE) -> tuple[int, int, int]:
    """Inverse of :func:`pixel_channel`, returns ``(x, y, polarity)``."""
    if not 0 <= channel < 2 * width * height:
        raise FormatError(f"channel {channel} outside a {width}x{height}x2 layout")
    polarity, rest = divmod(channel, width * height)
    y, x = divmod(rest, width)
    return x, y, polarity


def decode_nmnist_records(blob: bytes) -> np.ndarray:
    """Raw N-MNIST fields as an ``(n, 4)`` int array of ``x, y, polarity, timestamp_us``."""
    if len(blob) % RECORD_BYTES:
        offset = len(blob) - len(blob) % RECORD_BYTES
        raise FormatError(f"truncated N-MNIST record at byte offset {offset} (file length {len(blob)})")
    raw = np.frombuffer(blob, dtype=np.uint8).reshape(-1, RECORD_BYTES).astype(np.int64)
    x = raw[:, 0]
    y = raw[:, 1]
    polarity = raw[:, 2] >> 7
    ts = ((raw[:, 2] & 0x7F) << 16) | (raw[:, 3] << 8) | raw[:, 4]
    return np.stack([x, y, polarity, ts], axis=1)


def decode_nmnist(
    blob: bytes,
    sensor_w: int = NMNIST_SIZE,
    sensor_h: int = NMNIST_SIZE,
    crop: int | None = None,
) -> list[Event]:
    """Decode an N-MNIST sample into time-ordered channel events.

    Record layout (5 bytes): x, y, then polarity in bit 7 of byte 2 followed by
    a 23-bit big-endian microsecond timestamp. ``crop`` keeps a centred
    ``crop x crop`` window and renumbers channels for that window.
    """
    fields = decode_nmnist_records(blob)
    if fields.size == 0:
        return []
    x, y, p, ts = fields.T
    if (x >= sensor_w).any() or (y >= sensor_h).any():
        raise FormatError(f"pixel address outside the {sensor_w}x{sensor_h} sensor")
    width, height = sensor_w, sensor_h
    if crop is not None:
        if not 0 < crop <= min(sensor_w, sensor_h):
            raise ParameterError(f"crop {crop} does not fit a {sensor_w}x{sensor_h} sensor")
        ox, oy = (sensor_w - crop) // 2, (sensor_h - crop) // 2
        keep = (x >= ox) & (x < ox + crop) & (y >= oy) & (y < oy + crop)
        x, y, p, ts = x[keep] - ox, y[keep] - oy, p[keep], ts[keep]
        width = height = crop
    channels = p * width * height + y * width + x
    order = np.argsort(ts, kind="stable")
    return [Event(int(t), int(c)) for t, c in zip(ts[order], channels[order])]


def encode_nmnist(records: Iterable[tuple[int, int, int, int]]) -> bytes:
    """Pack ``(x, y, polarity, timestamp_us)`` tuples into N-MNIST records."""
    out = bytearray()
    for x, y, p, ts in records:
        if not (0 <= x < 256 and 0 <= y < 256 and p in (0, 1) and 0 <= ts < 1 << 23):
            raise FormatError(f"record ({x}, {y}, {p}, {ts}) not representable")
        out += bytes([x, y, (p << 7) | (ts >> 16), (ts >> 8) & 0xFF, ts & 0xFF])
    return bytes(out)


# --------------------------------------------------------------------------
# canonical CSV
# --------------------------------------------------------------------------


def read_canonical_events(stream: TextIO | str, num_channels: int | None = None) -> list[Event]:
    """Parse a ``timestamp_us,channel`` CSV; timestamps must not decrease."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = stream.readline().strip()
    if header != CANONICAL_HEADER:
        raise FormatError(f"line 1: expected header {CANONICAL_HEADER!r}, got {header!r}")
    events = []
    last = -1
    for lineno, line in enumerate(stream, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            ts, ch = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"line {lineno}: expected two integers, got {line!r}") from None
        if ts < 0 or ch < 0:
            raise FormatError(f"line {lineno}: negative value in {line!r}")
        if num_channels is not None and ch >= num_channels:
            raise FormatError(f"line {lineno}: channel {ch} >= channel count {num_channels}")
        if ts < last:
            raise FormatError(f"line {lineno}: timestamp {ts} precedes {last}")
        last = ts
        events.append(Event(ts, ch))
    return events


def write_canonical_events(events: Iterable[Event], stream: TextIO) -> None:
    stream.write(CANONICAL_HEADER + "\n")
    for ts, ch in events:
        stream.write(f"{ts},{ch}\n")


# --------------------------------------------------------------------------
# binning
# --------------------------------------------------------------------------


def bin_events(
    events: Sequence[Event],
    dt_ms: float,
    T: int,
    num_channels: int,
    window_start_us: int = 0,
) -> FrameSequence:
    """Bin events into ``T`` binary frames of width ``dt_ms``.

    Event time ``t`` lands in bin ``floor((t - window_start) / dt)``; events
    outside ``[0, T)`` are dropped and counted, repeated events clamp to 1.
    """
    if not dt_ms > 0 or T <= 0:
        raise ParameterError(f"dt_ms and T must be positive, got dt_ms={dt_ms}, T={T}")
    frames = np.zeros((T, num_channels), dtype=np.uint8)
    if len(events) == 0:
        return FrameSequence(frames, dt_ms)
    arr = np.asarray(events, dtype=np.int64).reshape(-1, 2)
    ts, ch = arr[:, 0], arr[:, 1]
    if (ch < 0).any() or (ch >= num_channels).any():
        raise FormatError(f"event channel outside [0, {num_channels})")
    bin_us = dt_ms * 1000.0
    if bin_us.is_integer():
        bins = (ts - window_start_us) // int(bin_us)
    else:
        bins = np.floor((ts - window_start_us) / bin_us).astype(np.int64)
    keep = (bins >= 0) & (bins < T)
    frames[bins[keep], ch[keep]] = 1
    return FrameSequence(frames, dt_ms, dropped=int((~keep).sum()))


# --------------------------------------------------------------------------
# datasets on disk
# --------------------------------------------------------------------------


def _split_dir(root: Path, split: str) -> Path:
    for name in (split, split.capitalize()):
        if (root / name).is_dir():
            return root / name
    raise FileNotFoundError(f"no {split!r} directory under {root}")


def _class_dirs(split_dir: Path) -> list[Path]:
    dirs = [d for d in split_dir.iterdir() if d.is_dir()]
    # numeric class names sort numerically
    return sorted(dirs, key=lambda d: (0, int(d.name), "") if d.name.isdigit() else (1, 0, d.name))


def load_event_dataset(
    root: str | os.PathLike,
    split: str,
    kind: str,
    dt_ms: float,
    T: int,
    num_channels: int,
    crop: int | None = None,
) -> list[LabeledSample]:
    """Load ``root/<split>/<class>/*`` and bin every file from time zero.

    ``kind`` is ``"nmnist"`` (``*.bin``) or ``"shd_canonical"`` (``*.csv``).
    Class labels are the class directories' positions in sorted order.
    """
    split_dir = _split_dir(Path(root), split)
    suffix = {"nmnist": ".bin", "shd_canonical": ".csv"}.get(kind)
    if suffix is None:
        raise ParameterError(f"unknown event dataset kind {kind!r}")
    samples = []
    dropped = 0
    for label, class_dir in enumerate(_class_dirs(split_dir)):
        for path in sorted(class_dir.glob("*" + suffix)):
            if kind == "nmnist":
                events = decode_nmnist(path.read_bytes(), crop=crop)
            else:
                with open(path, encoding="utf-8", newline="") as fh:
                    events = read_canonical_events(fh, num_channels)
            seq = bin_events(events, dt_ms, T, num_channels)
            dropped += seq.dropped
            samples.append(LabeledSample(seq.frames, label))
    if not samples:
        raise FileNotFoundError(f"no {suffix} files under {split_dir}")
    log.info("loaded %d %s samples from %s (%d out-of-window events dropped)", len(samples), split, split_dir, dropped)
    return samples


# --------------------------------------------------------------------------
# synthetic patterns
# --------------------------------------------------------------------------


@dataclass
class SyntheticSet:
    samples: list[LabeledSample]
    templates: list[np.ndarray]  # per class, spike times (ms) per channel as (channel, time) rows
    dt_ms: float


def synth_dataset(
    num_classes: int,
    num_channels: int,
    T: int,
    base_rate_hz: float,
    jitter_ms: float,
    samples_per_class: int,
    seed: int,
    dt_ms: float = 1.0,
    deletion_prob: float = 0.05,
    channels_per_class: int | None = None,
) -> SyntheticSet:
    """Spatio-temporal spike patterns with one fixed template per class.

    Each template draws Poisson spike times at ``base_rate_hz`` on every channel
    (or on a disjoint block of ``channels_per_class`` channels per class).
    Samples move each template spike by Gaussian jitter and delete it with
    probability ``deletion_prob``; spikes jittered out of the window are lost.
    Samples are ordered class by class.
    """
    if min(num_classes, num_channels, T, samples_per_class) <= 0 or base_rate_hz <= 0 or dt_ms <= 0:
        raise ParameterError("synthetic dataset parameters must be positive")
    if jitter_ms < 0 or not 0 <= deletion_prob < 1:
        raise ParameterError("jitter must be >= 0 and deletion probability in [0, 1)")
    if channels_per_class is not None and channels_per_class * num_classes > num_channels:
        raise ParameterError("not enough channels for disjoint class blocks")
    template_seed, sample_seed = np.random.SeedSequence(seed).spawn(2)
    trng = np.random.default_rng(template_seed)
    srng = np.random.default_rng(sample_seed)
    window_ms = T * dt_ms

    templates = []
    for c in range(num_classes):
        if channels_per_class is None:
            active = np.arange(num_channels)
        else:
            active = np.arange(c * channels_per_class, (c + 1) * channels_per_class)
        n = trng.poisson(base_rate_hz * window_ms / 1000.0, size=active.size)
        chans = np.repeat(active, n)
        times = trng.uniform(0.0, window_ms, size=chans.size)
        templates.append(np.stack([chans, times], axis=1))

    samples = []
    for c, tpl in enumerate(templates):
        chans, times = tpl[:, 0].astype(np.int64), tpl[:, 1]
        for _ in range(samples_per_class):
            t = times + (srng.normal(0.0, jitter_ms, size=times.size) if jitter_ms > 0 else 0.0)
            keep = srng.random(times.size) >= deletion_prob if deletion_prob > 0 else np.ones(times.size, bool)
            bins = np.floor(t / dt_ms).astype(np.int64)
            keep &= (bins >= 0) & (bins < T)
            frames = np.zeros((T, num_channels), dtype=np.uint8)
            frames[bins[keep], chans[keep]] = 1
            samples.append(LabeledSample(frames, c))
    return SyntheticSet(samples, templates, dt_ms)


def split_per_class(samples: Sequence[LabeledSample], test_per_class: int) -> tuple[list, list]:
    """Hold out the last ``test_per_class`` samples of every class."""
    by_class: dict[int, list] = {}
    for s in samples:
        by_class.setdefault(s.label, []).append(s)
    train, test = [], []
    for label in sorted(by_class):
        items = by_class[label]
        if test_per_class >= len(items):
            raise ParameterError(f"class {label} has only {len(items)} samples")
        train += items[: len(items) - test_per_class]
        test += items[len(items) - test_per_class :]
    return train, test


def template_frames(tpl: np.ndarray, T: int, num_channels: int, dt_ms: float) -> np.ndarray:
    """Bin a template's spike times (no jitter, no deletion) into frames."""
    frames = np.zeros((T, num_channels), dtype=np.uint8)
    bins = np.floor(tpl[:, 1] / dt_ms).astype(np.int64)
    frames[bins, tpl[:, 0].astype(np.int64)] = 1
    return frames

