import pytest

from ricloop.ran import CellId
from ricloop.topology import generate_topology
from ricloop.traffic import (
    DiurnalConfig,
    GridError,
    ParseError,
    RangeError,
    TraceError,
    TrafficTrace,
    hash_floats,
    load_trace,
    synth_diurnal,
    target_ue_count,
    ue_events,
    write_trace,
)


@pytest.fixture(scope="module")
def topo():
    return generate_topology(2, 2, 2)


class TestSynth:
    def test_two_weeks_is_1344_intervals(self, topo):
        trace = synth_diurnal(topo, DiurnalConfig(days=14, seed=1))
        assert trace.n_intervals == 14 * 96

    def test_degenerate_profile_is_constant(self, topo):
        cfg = DiurnalConfig(
            days=1,
            peak_utilization=0.5,
            trough_utilization=0.5,
            noise_std=0.0,
            per_band_scale=(1.0, 1.0),
        )
        trace = synth_diurnal(topo, cfg)
        for rows in trace.series.values():
            assert all(u == 0.5 for _, u in rows)

    def test_same_seed_bit_identical(self, topo, tmp_path):
        cfg = DiurnalConfig(days=2, seed=42)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trace(synth_diurnal(topo, cfg), a)
        write_trace(synth_diurnal(topo, cfg), b)
        assert a.read_bytes() == b.read_bytes()

    def test_peak_hour_mean_near_peak(self, topo):
        cfg = DiurnalConfig(
            days=7,
            peak_utilization=0.8,
            trough_utilization=0.2,
            peak_hour=12.0,
            noise_std=0.02,
            seed=5,
            per_band_scale=(1.0, 1.0),
        )
        trace = synth_diurnal(topo, cfg)
        cell = CellId(0, 0, 0)
        at_peak = [
            u for t, u in trace.series[cell] if (t % 86400) == 12 * 3600
        ]
        assert len(at_peak) == 7
        mean = sum(at_peak) / len(at_peak)
        assert abs(mean - 0.8) < 3 * 0.02

    def test_band_scaling(self, topo):
        cfg = DiurnalConfig(
            days=1, noise_std=0.0, per_band_scale=(1.0, 0.5), peak_utilization=0.6,
            trough_utilization=0.2,
        )
        trace = synth_diurnal(topo, cfg)
        base = trace.series[CellId(0, 0, 0)]
        scaled = trace.series[CellId(0, 0, 1)]
        for (_, u0), (_, u1) in zip(base, scaled):
            assert u1 == pytest.approx(u0 * 0.5)

    def test_values_clamped(self, topo):
        cfg = DiurnalConfig(days=2, peak_utilization=1.0, trough_utilization=0.0,
                            noise_std=0.3, seed=9)
        trace = synth_diurnal(topo, cfg)
        trace.validate()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DiurnalConfig(peak_utilization=0.3, trough_utilization=0.5)
        with pytest.raises(ValueError):
            DiurnalConfig(noise_std=-0.1)


class TestCsv:
    def test_round_trip(self, topo, tmp_path):
        trace = synth_diurnal(topo, DiurnalConfig(days=1, seed=2))
        path = tmp_path / "t.csv"
        write_trace(trace, path)
        loaded = load_trace(path, topo)
        assert loaded == trace

    def test_fixture_trace(self, fixtures_dir):
        from ricloop.topology import load_topology

        topo = load_topology(fixtures_dir / "s1_topology.json")
        trace = load_trace(fixtures_dir / "s1_trace.csv", topo)
        assert trace.n_intervals == 4
        assert trace.util(CellId(0, 0, 1), 0) == 0.5

    def test_out_of_range_value(self, topo, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("site,sector,band,timestamp,prb_util\n0,0,0,0,1.3\n")
        with pytest.raises(RangeError) as err:
            load_trace(path, topo)
        assert err.value.line_no == 2

    def test_mismatched_grids(self, topo, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "site,sector,band,timestamp,prb_util\n"
            "0,0,0,0,0.1\n0,0,0,900,0.1\n"
            "0,0,1,0,0.1\n0,0,1,800,0.1\n"
        )
        with pytest.raises(GridError):
            load_trace(path, topo)

    def test_unknown_cell(self, topo, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("site,sector,band,timestamp,prb_util\n99,0,0,0,0.1\n")
        with pytest.raises(ParseError):
            load_trace(path, topo)

    def test_bad_header(self, topo, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(ParseError):
            load_trace(path, topo)

    def test_missing_file(self, topo, tmp_path):
        with pytest.raises(TraceError):
            load_trace(tmp_path / "nope.csv", topo)


class TestUeEvents:
    def test_target_count(self):
        assert target_ue_count(0.5, 100, 10) == 5

    def test_events_to_zero(self):
        trace = TrafficTrace(
            granularity_s=900, series={CellId(0, 0, 0): [(0, 0.0)]}
        )
        events = ue_events(trace, 0, CellId(0, 0, 0), 100, 10, current_count=4)
        assert len(events) == 4
        assert all(e.kind == "departure" for e in events)

    def test_fixed_point_no_events(self):
        trace = TrafficTrace(
            granularity_s=900, series={CellId(0, 0, 0): [(0, 0.5)]}
        )
        assert ue_events(trace, 0, CellId(0, 0, 0), 100, 10, current_count=5) == []

    def test_arrivals_up_to_target(self):
        trace = TrafficTrace(
            granularity_s=900, series={CellId(0, 0, 0): [(0, 0.5)]}
        )
        events = ue_events(trace, 0, CellId(0, 0, 0), 100, 10, current_count=2)
        assert [e.kind for e in events] == ["arrival"] * 3


def test_hash_floats_deterministic_and_uniform():
    a = hash_floats(7, 1, 2, 3, n=4)
    b = hash_floats(7, 1, 2, 3, n=4)
    assert a == b
    assert all(0.0 <= v < 1.0 for v in a)
    assert hash_floats(7, 1, 2, 4, n=4) != a
