import math

import numpy as np
import pytest

from lidar_traffic import linksim, traffic
from lidar_traffic.errors import InsufficientSamples, InvalidParams, LinkProfileOutOfRange, TraceParseError
from lidar_traffic.linksim import LinkProfile, SimConfig, run_sim
from lidar_traffic.sampling import RngStream
from lidar_traffic.traffic import Burst, CompressionConfig, builtin_config


def flat_link(capacity, prr):
    return LinkProfile((0.0, 1000.0), (capacity, capacity), (prr, prr))


ZERO_DELAY = CompressionConfig("x", "Normal", {"mu": 1000, "sigma": 1})


def model_bursts(model, n, seed=0):
    return traffic.generate_bursts(builtin_config(model), n, RngStream(seed, 0))


def test_single_burst_latency():
    r = run_sim([Burst(0, 0.0, 1_000_000)], ZERO_DELAY, SimConfig(10.0, overhead_fraction=0.0), flat_link(100.0, 1.0))
    assert r.latency_ms[0] == pytest.approx(80.0, rel=1e-12)
    assert r.delivered[0]


def test_zero_prr():
    r = run_sim(model_bursts("D14/S2", 50), builtin_config("D14/S2"), SimConfig(10.0), flat_link(1000.0, 0.0))
    assert r.throughput_mbps == 0.0
    assert r.prr_measured == 0.0
    assert r.latency_samples.size == 0 and not r.delivered.any()


def test_d14s2_short_range_latency():
    cfg = builtin_config("D14/S2")
    link = linksim.default_link_profile()
    cap = link.capacity(30.0)
    assert cap == pytest.approx(2938.5, rel=1e-3)
    assert link.prr(30.0) == 1.0
    r = run_sim(model_bursts("D14/S2", 2000), cfg, SimConfig(30.0), link)
    expected = 1.95 + 56 + 0.72 + 17_030 * 8 * 1.02 / (cap * 1000)
    assert r.mean_latency_ms == pytest.approx(expected, abs=0.01)
    assert r.mean_latency_ms == pytest.approx(58.7, abs=0.05)


def test_default_profile_anchors():
    link = linksim.default_link_profile()
    assert link.capacity(15) == pytest.approx(3140)
    assert link.capacity(45) == pytest.approx(2750)
    assert link.capacity(300) == pytest.approx(16.42)
    assert [link.prr(d) for d in (15, 45, 105, 300)] == pytest.approx([1.0, 1.0, 0.745, 0.14])
    # log-linear capacity: geometric mean at the midpoint of two anchors
    assert link.capacity(30) == pytest.approx(math.sqrt(3140 * 2750))
    with pytest.raises(LinkProfileOutOfRange):
        link.capacity(301)
    with pytest.raises(LinkProfileOutOfRange):
        run_sim(model_bursts("D14/S2", 5), builtin_config("D14/S2"), SimConfig(5.0))


def test_link_profile_validation_and_io():
    with pytest.raises(InvalidParams):
        LinkProfile((1.0, 1.0), (1.0, 1.0), (1.0, 1.0))
    with pytest.raises(InvalidParams):
        LinkProfile((1.0, 2.0), (1.0, 1.0), (1.0, 1.5))
    link = linksim.default_link_profile()
    again = linksim.parse_link_profile(linksim.format_link_profile(link))
    for d in (15, 50, 77, 200, 300):
        assert again.prr(d) == pytest.approx(link.prr(d), rel=1e-5)
        assert again.capacity(d) == pytest.approx(link.capacity(d), rel=1e-5)
    with pytest.raises(TraceParseError, match="line 3"):
        linksim.parse_link_profile("distance_m,capacity_mbps,prr\n1,2,1\n2,x,1\n")


def test_work_conservation():
    cfg = builtin_config("D0/S1")
    bursts = model_bursts("D0/S1", 3000)
    r = run_sim(bursts, cfg, SimConfig(15.0))
    assert r.buffer_drops == 0
    assert r.throughput_mbps == pytest.approx(traffic.source_rate(bursts) * 1.02, rel=0.01)


def test_conservation_and_buffer_bound_under_congestion():
    cfg = builtin_config("D0/S0")
    r = run_sim(model_bursts("D0/S0", 300), cfg, SimConfig(300.0))
    assert r.buffer_drops > 0
    assert 0 < r.max_occupancy_bytes <= 12_000_000
    assert r.received_bytes <= r.offered_bytes


def test_latency_lower_bound():
    cfg = builtin_config("D14/S1")
    r = run_sim(model_bursts("D14/S1", 1000), cfg, SimConfig(120.0))
    ok = r.delivered
    floor = cfg.processing_ms + r.tx_time_ms[ok]
    assert np.all(r.latency_ms[ok] >= floor - 1e-9)


def test_monotone_in_distance():
    cfg = builtin_config("D14/S0")
    bursts = model_bursts("D14/S0", 600)
    thr = [run_sim(bursts, cfg, SimConfig(d, seed=3)).throughput_mbps for d in np.arange(15, 301, 15)]
    assert all(a >= b for a, b in zip(thr, thr[1:]))


def test_deterministic_replay():
    cfg = builtin_config("D11/S0")
    bursts = model_bursts("D11/S0", 400)
    a = run_sim(bursts, cfg, SimConfig(150.0, seed=5))
    b = run_sim(bursts, cfg, SimConfig(150.0, seed=5))
    assert linksim.format_burst_records(a) == linksim.format_burst_records(b)
    assert a.latency_ms.tobytes() == b.latency_ms.tobytes()
    assert a.goodput_mbps.tobytes() == b.goodput_mbps.tobytes()
    c = run_sim(bursts, cfg, SimConfig(150.0, seed=5, stream_id=1))
    assert not np.array_equal(a.completion_ms, c.completion_ms, equal_nan=True)


def test_compare_identical_runs():
    cfg = builtin_config("D14/S0")
    bursts = model_bursts("D14/S0", 300)
    a = run_sim(bursts, cfg, SimConfig(60.0, seed=1))
    b = run_sim(bursts, cfg, SimConfig(60.0, seed=1))
    lat, thr = linksim.compare_runs(a, b)
    assert (lat.statistic, lat.p_value, thr.statistic, thr.p_value) == (0.0, 1.0, 0.0, 1.0)


def test_compare_grossly_different_loads():
    a = run_sim(model_bursts("D0/S0", 300), builtin_config("D0/S0"), SimConfig(30.0))
    b = run_sim(model_bursts("D14/S2", 300), builtin_config("D14/S2"), SimConfig(30.0))
    _, thr = linksim.compare_runs(a, b)
    assert thr.p_value < 0.001


def test_compare_needs_samples():
    cfg = builtin_config("D14/S2")
    a = run_sim(model_bursts("D14/S2", 10), cfg, SimConfig(10.0), flat_link(100.0, 0.0))
    b = run_sim(model_bursts("D14/S2", 10), cfg, SimConfig(10.0), flat_link(100.0, 1.0))
    with pytest.raises(InsufficientSamples):
        linksim.compare_runs(a, b)


def test_output_formats():
    cfg = builtin_config("D14/S2")
    r = run_sim(model_bursts("D14/S2", 5), cfg, SimConfig(30.0))
    rows = linksim.format_burst_records(r).splitlines()
    assert rows[0] == "burst_index,gen_time_ms,completion_ms,latency_ms,delivered"
    assert len(rows) == 6 and rows[1].endswith(",true")
    s = linksim.format_summary([r]).splitlines()
    assert s[0] == "distance_m,throughput_mbps,mean_latency_ms,p95_latency_ms,prr,buffer_drops"
    assert s[1].startswith("30,")
