"""Metric computation tests."""

import csv
import math

import pytest
from hypothesis import given, strategies as st

from octosim.events import Event
from octosim.metrics import (
    FRAMES_COLUMNS,
    QUEUE_COLUMNS,
    SUMMARY_COLUMNS,
    FrameRecord,
    QualityConfig,
    aoi_series,
    bucket_residence,
    latency_stats,
    nearest_rank,
    quality_score,
    queuing_delay_series,
    write_frames_csv,
    write_queue_csv,
    write_summary_csv,
)


def _fr(frame, send_ms, deliver_ms, level=0):
    return FrameRecord(
        frame=frame,
        send_us=send_ms * 1000,
        deliver_us=None if deliver_ms is None else deliver_ms * 1000,
        level=level,
    )


def test_aoi_worked_example():
    # sends at 0/33/66 ms delivered at 50/90/120 ms -> ages 50, 90, 87 ms
    records = [_fr(0, 0, 50), _fr(1, 33, 90), _fr(2, 66, 120)]
    samples, p50, p99 = aoi_series(records)
    assert samples == [50_000, 90_000, 87_000]
    assert p50 == 87_000
    assert p99 == 90_000


def test_aoi_out_of_order_delivery_uses_freshest():
    # frame 1 (sent 33ms) arrives before frame 0 (sent 0ms); the late
    # frame 0 does not refresh the age baseline
    records = [_fr(0, 0, 100), _fr(1, 33, 60), _fr(2, 66, 120)]
    samples, _, _ = aoi_series(records)
    assert samples == [27_000, 67_000, 87_000]


def test_aoi_empty():
    assert aoi_series([]) == ([], None, None)
    assert aoi_series([_fr(0, 0, None)]) == ([], None, None)


def test_nearest_rank_values():
    vals = list(range(10, 1001, 10))  # 100 samples: 10..1000
    assert nearest_rank(vals, 50) == 500
    assert nearest_rank(vals, 99) == 990
    assert nearest_rank(vals, 100) == 1000
    assert nearest_rank([7], 50) == 7
    assert nearest_rank([7], 99) == 7


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=200),
       st.sampled_from([1, 25, 50, 75, 90, 99, 100]))
def test_nearest_rank_is_order_statistic(vals, pct):
    ordered = sorted(vals)
    got = nearest_rank(ordered, pct)
    assert got in ordered
    rank = max(1, math.ceil(pct / 100 * len(ordered)))
    assert got == ordered[rank - 1]


def test_quality_decay():
    cfg = QualityConfig(level_scores=(0.90, 0.95, 0.98), decay_per_s=3.0)
    records = [_fr(0, 0, 10, level=2), _fr(1, 33, None, level=None)]
    expected = (0.98 + 0.98 * math.exp(-3.0 * 0.033)) / 2
    assert quality_score(records, cfg) == pytest.approx(expected)


def test_quality_zero_before_first_decode():
    cfg = QualityConfig()
    records = [_fr(0, 0, None, level=None), _fr(1, 33, 50, level=1)]
    assert quality_score(records, cfg) == pytest.approx(0.95 / 2)
    assert quality_score([], cfg) is None


def test_latency_stats():
    records = [_fr(i, 0, 10 * (i + 1)) for i in range(4)] + [_fr(9, 0, None)]
    p50, p99 = latency_stats(records)
    assert p50 == 20_000
    assert p99 == 40_000
    assert latency_stats([_fr(0, 5, None)]) == (None, None)


def test_queuing_delay_series_and_buckets():
    events = [
        Event(1_000, "router", "enq", 1, 1, 0, 1500),
        Event(9_000, "router", "deq", 1, 1, 0, 1500),
        Event(10_000, "router", "enq", 1, 2, 1, 1500),
        Event(250_000, "router", "drop_msg", 1, 2, 1, 1500),
        Event(5_000, "other", "enq", 1, 3, 2, 1500),
        Event(400_000, "other", "deq", 1, 3, 2, 1500),
    ]
    samples, buckets = queuing_delay_series(events, element="router")
    assert samples == [(9_000, 8_000), (250_000, 240_000)]
    assert buckets == [(0, 8.0), (200, 240.0)]


def test_bucket_residence_takes_max_per_bucket():
    samples = [(5_000, 1_000), (80_000, 9_000), (150_000, 2_000)]
    assert bucket_residence(samples) == [(0, 9.0), (100, 2.0)]


def test_csv_writers(tmp_path):
    fp = tmp_path / "frames.csv"
    write_frames_csv(str(fp), [_fr(1, 33, None, level=None), _fr(0, 0, 50, level=2)])
    rows = list(csv.reader(open(fp)))
    assert rows[0] == FRAMES_COLUMNS
    assert rows[1] == ["0", "0", "50000", "2", "1"]
    assert rows[2] == ["1", "33000", "", "", "0"]

    sp = tmp_path / "summary.csv"
    write_summary_csv(str(sp), [{
        "scenario": "s", "scheme": "octopus", "quality_mean": 0.98765,
        "lat_p50_ms": 1.0, "lat_p99_ms": 2.0, "aoi_p50_ms": None,
        "aoi_p99_ms": None, "util_pct": 50.0, "drops_by_msg": 1,
        "drops_by_bitrate": 2, "drops_tail": 3,
    }])
    rows = list(csv.reader(open(sp)))
    assert rows[0] == SUMMARY_COLUMNS
    assert rows[1][2] == "0.9877"
    assert rows[1][5] == ""

    qp = tmp_path / "queue.csv"
    write_queue_csv(str(qp), [(0, 1.5), (100, 2.25)])
    rows = list(csv.reader(open(qp)))
    assert rows[0] == QUEUE_COLUMNS
    assert rows[1] == ["0", "1.5000"]
