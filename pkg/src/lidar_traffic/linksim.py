"""Single-uplink discrete-event simulation of LiDAR burst traffic.

Each burst waits for encoding and segmentation, then enters a drop-tail
buffer as a whole (or is dropped as a whole).  The link drains the buffer in
FIFO order at the capacity given by the link profile for the configured
distance; every packet is lost independently with probability ``1 - prr``.
The loop advances from one burst arrival to the next; departures between
arrivals are resolved from the deterministic service times.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples, InvalidParams, LinkProfileOutOfRange, TraceParseError
from .gof import KsResult, ks_two_sample
from .sampling import RngStream
from .traffic import (
    DEFAULT_MTU,
    Burst,
    CompressionConfig,
    TraceFile,
    bursts_from_trace,
    generate_bursts,
    packet_sizes,
    trace_of,
)

MODEL_STREAM = 0  # model-driven burst sizes
LOSS_STREAM = 1
TRACE_STREAM = 2  # synthetic "recorded" traces
GOODPUT_WINDOW_MS = 1000.0

# mean-SINR capacity estimates (m, Mbit/s) and mean packet reception ratio
_CAPACITY_ANCHORS = ((15.0, 3140.0), (45.0, 2750.0), (300.0, 16.42))
_PRR_ANCHORS = (
    (15.0, 1.0), (45.0, 1.0), (75.0, 0.828), (105.0, 0.745), (135.0, 0.654),
    (165.0, 0.483), (195.0, 0.412), (225.0, 0.343), (255.0, 0.168), (300.0, 0.14),
)


@dataclass(frozen=True)
class LinkProfile:
    """Distance-indexed capacity and PRR, interpolated between anchors.

    Capacity is interpolated linearly in log scale, PRR linearly.
    """

    distances: tuple[float, ...]
    capacities_mbps: tuple[float, ...]
    prrs: tuple[float, ...]

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        if len(d) == 0 or not (len(d) == len(self.capacities_mbps) == len(self.prrs)):
            raise InvalidParams("link profile needs matching, nonempty columns")
        if np.any(np.diff(d) <= 0):
            raise InvalidParams("link profile distances must be strictly increasing")
        if any(not c > 0 for c in self.capacities_mbps):
            raise InvalidParams("link capacities must be positive")
        if any(not 0 <= p <= 1 for p in self.prrs):
            raise InvalidParams("PRR values must lie in [0, 1]")

    def _check(self, d: float):
        if not self.distances[0] <= d <= self.distances[-1]:
            raise LinkProfileOutOfRange(
                f"distance {d} m outside profile range [{self.distances[0]}, {self.distances[-1]}] m"
            )

    def capacity(self, d: float) -> float:
        self._check(d)
        return float(np.exp(np.interp(d, self.distances, np.log(self.capacities_mbps))))

    def prr(self, d: float) -> float:
        self._check(d)
        return float(np.interp(d, self.distances, self.prrs))


def default_link_profile() -> LinkProfile:
    cd, cv = zip(*_CAPACITY_ANCHORS)
    pd_, pv = zip(*_PRR_ANCHORS)
    grid = sorted(set(cd) | set(pd_))
    caps = np.exp(np.interp(grid, cd, np.log(cv)))
    prrs = np.interp(grid, pd_, pv)
    return LinkProfile(tuple(grid), tuple(float(c) for c in caps), tuple(float(p) for p in prrs))


PROFILE_HEADER = ("distance_m", "capacity_mbps", "prr")


def parse_link_profile(text: str) -> LinkProfile:
    rows = []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        cells = next(csv.reader([s]))
        if tuple(c.strip() for c in cells) == PROFILE_HEADER:
            continue
        if len(cells) != 3:
            raise TraceParseError(f"expected 3 columns, got {len(cells)}", lineno)
        try:
            rows.append(tuple(float(c) for c in cells))
        except ValueError:
            raise TraceParseError(f"non-numeric link profile row {s!r}", lineno) from None
    if not rows:
        raise TraceParseError("link profile is empty")
    try:
        d, c, p = zip(*rows)
        return LinkProfile(d, c, p)
    except InvalidParams as exc:
        raise TraceParseError(str(exc)) from None


def format_link_profile(link: LinkProfile) -> str:
    lines = [",".join(PROFILE_HEADER)]
    lines += [f"{d:g},{c:.6g},{p:.6g}" for d, c, p in zip(link.distances, link.capacities_mbps, link.prrs)]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SimConfig:
    distance_m: float
    buffer_bytes: int = 12_000_000
    overhead_fraction: float = 0.02
    mtu: int = DEFAULT_MTU
    seed: int = 0
    stream_id: int = 0  # sweep index; keeps sweep points on independent loss streams

    def __post_init__(self):
        if self.buffer_bytes <= 0:
            raise InvalidParams("buffer_bytes must be positive")
        if self.overhead_fraction < 0:
            raise InvalidParams("overhead_fraction must be nonnegative")
        if self.mtu < 1:
            raise InvalidParams("mtu must be >= 1")


@dataclass
class SimResult:
    """Per-burst records plus run-level metrics.

    ``completion_ms`` is the arrival of the last received packet (NaN when no
    packet of the burst arrived); ``delivered`` means every packet arrived.
    """

    gen_time_ms: np.ndarray
    size_bytes: np.ndarray
    first_byte_ms: np.ndarray
    completion_ms: np.ndarray
    latency_ms: np.ndarray
    delivered: np.ndarray
    buffer_dropped: np.ndarray
    tx_time_ms: np.ndarray
    throughput_mbps: float
    prr_measured: float
    buffer_drops: int
    goodput_mbps: np.ndarray
    offered_bytes: int
    received_bytes: int
    max_occupancy_bytes: int
    span_ms: float
    distance_m: float = math.nan
    meta: dict = field(default_factory=dict)

    @property
    def latency_samples(self) -> np.ndarray:
        """Latency of every burst with at least one received packet."""
        return self.latency_ms[np.isfinite(self.latency_ms)]

    @property
    def mean_latency_ms(self) -> float:
        s = self.latency_samples
        return float(s.mean()) if s.size else math.nan

    @property
    def p95_latency_ms(self) -> float:
        s = self.latency_samples
        return float(np.percentile(s, 95)) if s.size else math.nan


def run_sim(bursts: list[Burst], cfg: CompressionConfig, sim: SimConfig,
            link: LinkProfile | None = None) -> SimResult:
    link = link or default_link_profile()
    cap_mbps = link.capacity(sim.distance_m)
    prr = link.prr(sim.distance_m)
    rng = RngStream(sim.seed, (sim.stream_id << 8) | LOSS_STREAM)
    ms_per_byte = (1.0 + sim.overhead_fraction) * 8.0 / (cap_mbps * 1000.0)

    n = len(bursts)
    gen = np.array([b.gen_time_ms for b in bursts], dtype=float)
    size = np.array([b.size_bytes for b in bursts], dtype=np.int64)
    if n and np.any(np.diff(gen) < 0):
        raise InvalidParams("bursts must be ordered by generation time")
    first = np.full(n, np.nan)
    done = np.full(n, np.nan)
    lat = np.full(n, np.nan)
    tx = size * ms_per_byte
    delivered = np.zeros(n, dtype=bool)
    dropped = np.zeros(n, dtype=bool)

    span = (gen[-1] + cfg.frame_period_ms) if n else 0.0
    n_windows = max(1, int(math.ceil(span / GOODPUT_WINDOW_MS)))
    window_bytes = np.zeros(n_windows)

    link_free = -math.inf
    # admitted bursts still holding buffer space: (finish times, bytes left after each packet)
    active: deque = deque()
    sent_pkts = recv_pkts = 0
    recv_bytes = 0
    max_occ = 0
    last_event = span

    for i in range(n):
        t_in = gen[i] + cfg.encode_ms + cfg.inference_ms
        occ = 0
        while active and active[0][0][-1] <= t_in:
            active.popleft()
        for fin, left, total in active:
            k = int(np.searchsorted(fin, t_in, side="right"))
            occ += int(left[k - 1]) if k else total
        if occ + size[i] > sim.buffer_bytes:
            dropped[i] = True
            continue
        max_occ = max(max_occ, occ + int(size[i]))

        pk = packet_sizes(size[i], sim.mtu)
        start = max(t_in, link_free)
        fin = start + np.cumsum(pk) * ms_per_byte
        link_free = fin[-1]
        active.append((fin, int(size[i]) - np.cumsum(pk), int(size[i])))
        first[i] = start

        ok = rng.uniform(pk.size) < prr
        sent_pkts += pk.size
        got = int(np.count_nonzero(ok))
        recv_pkts += got
        if got:
            recv_bytes += int(pk[ok].sum())
            last = fin[ok][-1]
            done[i] = last
            lat[i] = last + cfg.decode_ms - gen[i]
            last_event = max(last_event, last)
            w = np.minimum((fin[ok] // GOODPUT_WINDOW_MS).astype(np.int64), 10**9)
            if w.max() >= window_bytes.size:
                window_bytes = np.concatenate([window_bytes, np.zeros(int(w.max()) + 1 - window_bytes.size)])
            np.add.at(window_bytes, w, pk[ok])
        delivered[i] = got == pk.size

    span_ms = max(span, last_event)
    wire = 1.0 + sim.overhead_fraction
    throughput = recv_bytes * wire * 8.0 / (span_ms * 1000.0) if span_ms > 0 else 0.0
    goodput = window_bytes * wire * 8.0 / 1e6 / (GOODPUT_WINDOW_MS / 1000.0)
    return SimResult(
        gen_time_ms=gen, size_bytes=size, first_byte_ms=first, completion_ms=done,
        latency_ms=lat, delivered=delivered, buffer_dropped=dropped, tx_time_ms=tx,
        throughput_mbps=throughput,
        prr_measured=recv_pkts / sent_pkts if sent_pkts else 0.0,
        buffer_drops=int(dropped.sum()), goodput_mbps=goodput,
        offered_bytes=int(size.sum()), received_bytes=recv_bytes,
        max_occupancy_bytes=max_occ, span_ms=span_ms, distance_m=sim.distance_m,
        meta={"capacity_mbps": cap_mbps, "prr": prr},
    )


def compare_runs(a: SimResult, b: SimResult) -> tuple[KsResult, KsResult]:
    """Two-sample KS on burst latencies and on 1-second goodput samples."""
    la, lb = a.latency_samples, b.latency_samples
    if la.size < 2 or lb.size < 2:
        raise InsufficientSamples("each run needs at least two latency samples")
    return ks_two_sample(la, lb), ks_two_sample(a.goodput_mbps, b.goodput_mbps)


def trace_vs_model(cfg: CompressionConfig, distance_m: float, n_frames: int, seed: int = 0,
                   link: LinkProfile | None = None, trace: TraceFile | None = None,
                   **sim_kw) -> tuple[KsResult, KsResult]:
    """Replay a trace and an independent model-driven run over the same link and compare them.

    Without ``trace`` one is presampled from the model on its own stream,
    standing in for recorded data.  The two runs also use distinct loss streams.
    """
    if trace is None:
        trace = trace_of(generate_bursts(cfg, n_frames, RngStream(seed, TRACE_STREAM)))
    link = link or default_link_profile()
    a = run_sim(bursts_from_trace(trace, cfg.frame_period_ms), cfg,
                SimConfig(distance_m, seed=seed, stream_id=0, **sim_kw), link)
    model = generate_bursts(cfg, len(trace), RngStream(seed, MODEL_STREAM))
    b = run_sim(model, cfg, SimConfig(distance_m, seed=seed, stream_id=1, **sim_kw), link)
    return compare_runs(a, b)


BURST_RECORD_HEADER = ("burst_index", "gen_time_ms", "completion_ms", "latency_ms", "delivered")
SUMMARY_HEADER = ("distance_m", "throughput_mbps", "mean_latency_ms", "p95_latency_ms", "prr", "buffer_drops")


def _num(v: float) -> str:
    return "" if not math.isfinite(v) else f"{v:.10g}"


def format_burst_records(res: SimResult) -> str:
    lines = [",".join(BURST_RECORD_HEADER)]
    for i in range(res.gen_time_ms.size):
        lines.append(
            f"{i},{_num(res.gen_time_ms[i])},{_num(res.completion_ms[i])},"
            f"{_num(res.latency_ms[i])},{'true' if res.delivered[i] else 'false'}"
        )
    return "\n".join(lines) + "\n"


def summary_row(res: SimResult) -> str:
    return (
        f"{res.distance_m:g},{res.throughput_mbps:.6g},{_num(res.mean_latency_ms)},"
        f"{_num(res.p95_latency_ms)},{res.prr_measured:.6g},{res.buffer_drops}"
    )


def format_summary(results: list[SimResult]) -> str:
    return "\n".join([",".join(SUMMARY_HEADER)] + [summary_row(r) for r in results]) + "\n"
