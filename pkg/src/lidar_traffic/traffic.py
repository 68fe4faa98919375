"""LiDAR burst traffic: the seven built-in compression models, traces, packets.

A LiDAR frame becomes one burst generated at a fixed period (100 ms by
default).  Model-driven bursts draw their size from the configuration's
fitted distribution in kilobytes (1 kB = 1000 bytes); trace-driven bursts
replay recorded sizes.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from .distributions import Family
from .errors import EmptyTrace, InvalidParams, TooFewBursts, TraceParseError, UnknownModel
from .sampling import RngStream, draw_positive

DEFAULT_FRAME_PERIOD_MS = 100.0
DEFAULT_MTU = 1500


@dataclass(frozen=True)
class CompressionConfig:
    id: str
    family: Family
    params: dict[str, float]
    frame_period_ms: float = DEFAULT_FRAME_PERIOD_MS
    encode_ms: float = 0.0
    decode_ms: float = 0.0
    inference_ms: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        object.__setattr__(self, "params", dist.make_params(self.family, self.params))
        if not self.frame_period_ms > 0:
            raise InvalidParams("frame period must be positive")
        for name in ("encode_ms", "decode_ms", "inference_ms"):
            if getattr(self, name) < 0:
                raise InvalidParams(f"{name} must be nonnegative")

    @property
    def processing_ms(self) -> float:
        """Encode + inference + decode time added to every burst."""
        return self.encode_ms + self.inference_ms + self.decode_ms

    def mean_size_kb(self) -> float:
        return dist.mean(self.family, self.params)


# Size models (kB) with measured codec and segmentation timings (ms).
_BUILTIN = {
    "D0/S0": (Family.TLocationScale, (3172.74, 64.41, 1.49), 0.0, 0.0, 0.0),
    "D0/S1": (Family.Normal, (1458.7, 455.36), 0.0, 0.0, 56.0),
    "D0/S2": (Family.Gamma, (1.87, 131.97), 0.0, 0.0, 56.0),
    "D11/S0": (Family.Nakagami, (9.31, 4914.06), 23.3, 10.48, 0.0),
    "D14/S0": (Family.Logistic, (197.54, 8.96), 28.2, 13.57, 0.0),
    "D14/S1": (Family.TLocationScale, (98.11, 16.83, 4.08), 12.97, 5.81, 56.0),
    "D14/S2": (Family.Gamma, (2.81, 6.06), 1.95, 0.72, 56.0),
}
MODEL_IDS: tuple[str, ...] = tuple(_BUILTIN)


def builtin_config(model_id: str) -> CompressionConfig:
    key = str(model_id).strip().upper()
    if key not in _BUILTIN:
        raise UnknownModel(f"unknown model {model_id!r}; expected one of {', '.join(MODEL_IDS)}")
    fam, theta, enc, dec, inf = _BUILTIN[key]
    return CompressionConfig(key, fam, dict(zip(dist.param_names(fam), theta)),
                             encode_ms=enc, decode_ms=dec, inference_ms=inf)


@dataclass(frozen=True)
class Burst:
    index: int
    gen_time_ms: float
    size_bytes: int


@dataclass(frozen=True)
class Packet:
    burst_index: int
    seq_in_burst: int
    size_bytes: int


@dataclass(frozen=True)
class TraceFile:
    """Recorded frame sizes in bytes, in capture order."""

    sizes: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if any(int(s) != s or s <= 0 for s in self.sizes):
            raise TraceParseError("trace sizes must be positive integers")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    def __len__(self):
        return len(self.sizes)


def _bursts(sizes, frame_period_ms: float) -> list[Burst]:
    return [Burst(i, i * frame_period_ms, int(s)) for i, s in enumerate(sizes)]


def sizes_to_bytes(sizes_kb) -> np.ndarray:
    b = np.rint(np.asarray(sizes_kb, dtype=float) * 1000.0)
    return np.maximum(b, 1).astype(np.int64)


def generate_bursts(cfg: CompressionConfig, n_frames: int, rng: RngStream) -> list[Burst]:
    """Model-driven bursts: positive sizes drawn from the size model, fixed period."""
    if n_frames < 1:
        raise InvalidParams("n_frames must be >= 1")
    kb = draw_positive(cfg.family, cfg.params, rng, size=int(n_frames))
    return _bursts(sizes_to_bytes(kb), cfg.frame_period_ms)


def bursts_from_trace(trace: TraceFile, frame_period_ms: float = DEFAULT_FRAME_PERIOD_MS) -> list[Burst]:
    if len(trace) == 0:
        raise EmptyTrace("trace contains no frames")
    return _bursts(trace.sizes, frame_period_ms)


def fragment(b: Burst, mtu_bytes: int = DEFAULT_MTU) -> list[Packet]:
    if mtu_bytes < 1:
        raise InvalidParams("mtu must be >= 1")
    return [Packet(b.index, i, int(s)) for i, s in enumerate(packet_sizes(b.size_bytes, mtu_bytes))]


def packet_sizes(size_bytes: int, mtu_bytes: int) -> np.ndarray:
    full, rest = divmod(int(size_bytes), int(mtu_bytes))
    sizes = np.full(full + (1 if rest else 0), mtu_bytes, dtype=np.int64)
    if rest:
        sizes[-1] = rest
    return sizes


def source_rate(bursts: list[Burst], frame_period_ms: float | None = None) -> float:
    """Offered load in Mbit/s over the generation span plus one frame period."""
    if len(bursts) < 2:
        raise TooFewBursts("source rate needs at least two bursts")
    if frame_period_ms is None:
        frame_period_ms = bursts[1].gen_time_ms - bursts[0].gen_time_ms
    total = sum(b.size_bytes for b in bursts)
    span_s = (bursts[-1].gen_time_ms - bursts[0].gen_time_ms + frame_period_ms) / 1000.0
    return total * 8 / 1e6 / span_s


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

TRACE_HEADER = ("frame_index", "size_bytes")
BURST_HEADER = ("burst_index", "gen_time_ms", "size_bytes")


def _rows(text: str):
    for lineno, line in enumerate(io.StringIO(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, next(csv.reader([stripped]))


def parse_trace(text: str) -> TraceFile:
    """Parse trace CSV text; a header row is optional.

    Accepts ``frame_index,size_bytes`` rows, or a single ``size_bytes``
    column.  Errors carry the offending line number.
    """
    sizes = []
    for lineno, row in _rows(text):
        if not sizes and row and not _is_number(row[-1]):
            continue  # header
        if len(row) not in (1, 2):
            raise TraceParseError(f"expected 1 or 2 columns, got {len(row)}", lineno)
        cell = row[-1].strip()
        try:
            value = float(cell)
        except ValueError:
            raise TraceParseError(f"size {cell!r} is not a number", lineno) from None
        if not math.isfinite(value) or value != int(value) or value <= 0:
            raise TraceParseError(f"size {cell!r} is not a positive integer", lineno)
        sizes.append(int(value))
    if not sizes:
        raise EmptyTrace("trace contains no frames")
    return TraceFile(tuple(sizes))


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_trace(path) -> TraceFile:
    with open(path, newline="") as fh:
        return parse_trace(fh.read())


def format_trace(sizes) -> str:
    out = [",".join(TRACE_HEADER)]
    out += [f"{i},{int(s)}" for i, s in enumerate(sizes)]
    return "\n".join(out) + "\n"


def format_bursts(bursts: list[Burst]) -> str:
    out = [",".join(BURST_HEADER)]
    out += [f"{b.index},{b.gen_time_ms:.10g},{b.size_bytes}" for b in bursts]
    return "\n".join(out) + "\n"


def trace_of(bursts: list[Burst]) -> TraceFile:
    return TraceFile(tuple(b.size_bytes for b in bursts))


def write_text_atomic(path, text: str) -> None:
    """Write via a sibling temp file and rename so readers never see partial output."""
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
