import json

import pytest

from conftest import s1_scenario, small_scenario
from ricloop import compute_metrics, replay, run_scenario
from ricloop.messages import (
    ArrivalRecord,
    EndRecord,
    IntervalEnd,
    ScenarioHeader,
    encode,
)
from ricloop.metrics import CorruptLogError, audit_log
from ricloop.ran import CellId, QosClass
from ricloop.topology import generate_topology


class TestReplayRoundTrip:
    def test_replay_equals_run_metrics(self):
        res = run_scenario(small_scenario())
        assert replay(res.lines).to_json() == res.metrics.to_json()

    def test_replay_from_disk(self, tmp_path):
        res = run_scenario(small_scenario(), out_dir=tmp_path)
        assert replay(res.log_path).to_json() == res.metrics_path.read_text().rstrip("\n")

    def test_truncated_log_is_corrupt(self):
        res = run_scenario(small_scenario())
        with pytest.raises(CorruptLogError):
            compute_metrics(res.lines[: len(res.lines) // 2])

    def test_missing_header_is_corrupt(self):
        res = run_scenario(small_scenario())
        with pytest.raises(CorruptLogError):
            compute_metrics(res.lines[1:])

    def test_garbage_line_is_corrupt(self):
        res = run_scenario(small_scenario())
        lines = list(res.lines)
        lines[10] = "not json at all"
        with pytest.raises(CorruptLogError):
            compute_metrics(lines)

    def test_tampered_kpm_is_corrupt(self):
        res = run_scenario(small_scenario())
        lines = list(res.lines)
        for i, line in enumerate(lines):
            if '"type":"kpm"' in line:
                doc = json.loads(line)
                doc["rrc_count"] += 3
                lines[i] = json.dumps(doc, separators=(",", ":"))
                break
        with pytest.raises(CorruptLogError):
            compute_metrics(lines)

    def test_injected_blocked_attempt_lowers_accessibility(self):
        res = run_scenario(small_scenario())
        lines = list(res.lines)
        extra = ArrivalRecord(
            ts=0, ue=10**6, anchor=CellId(0, 0, 0), outcome="blocked",
            cell=None, reason="no_candidate", demand_prb=5,
            qos=QosClass.BROADBAND,
        )
        lines.insert(5, encode(extra))
        doctored = compute_metrics(lines)
        assert doctored.accessibility < res.metrics.accessibility
        assert doctored.attempts == res.metrics.attempts + 1


class TestAccessibilityArithmetic:
    def test_hundred_thousand_attempts_one_blocked(self):
        """The five-nines case: 1 blocked out of 100000 attempts."""
        topo = generate_topology(1, 1, 2, prb_capacity=500000)
        header = ScenarioHeader(
            ts=0,
            scenario={"name": "synthetic", "mode": "ccc", "seed": 0,
                       "granularity_s": 900, "duration_intervals": 1},
            topology=topo.to_dict(),
        )
        lines = [encode(header)]
        anchor = CellId(0, 0, 1)
        for ue in range(99999):
            lines.append(encode(ArrivalRecord(
                ts=0, ue=ue, anchor=anchor, outcome="admitted", cell=anchor,
                reason=None, demand_prb=5, qos=QosClass.BROADBAND,
            )))
        lines.append(encode(ArrivalRecord(
            ts=0, ue=99999, anchor=anchor, outcome="blocked", cell=None,
            reason="no_candidate", demand_prb=5, qos=QosClass.BROADBAND,
        )))
        lines.append(encode(IntervalEnd(ts=0, index=0)))
        lines.append(encode(EndRecord(ts=0, intervals=1)))
        metrics = compute_metrics(lines)
        assert metrics.attempts == 100000
        assert metrics.blocked == 1
        assert metrics.accessibility == pytest.approx(0.99999)

    def test_no_attempts_reads_perfect(self):
        topo = generate_topology(1, 1, 1)
        lines = [
            encode(ScenarioHeader(
                ts=0,
                scenario={"name": "idle", "mode": "ccc", "seed": 0,
                           "granularity_s": 900, "duration_intervals": 1},
                topology=topo.to_dict(),
            )),
            encode(IntervalEnd(ts=0, index=0)),
            encode(EndRecord(ts=0, intervals=1)),
        ]
        assert compute_metrics(lines).accessibility == 1.0


class TestSavingsAccounting:
    def test_savings_bounds(self):
        res = run_scenario(small_scenario())
        m = res.metrics
        assert 0.0 <= m.savings_capacity_pct < 100.0
        assert m.energy_actual_capacity_j <= m.energy_baseline_capacity_j

    def test_attempts_equal_arrival_records(self):
        res = run_scenario(small_scenario())
        arrivals = sum(1 for l in res.lines if '"type":"arrival"' in l)
        assert res.metrics.attempts == arrivals

    def test_baseline_mode_invariant(self, fixtures_dir):
        res_a = run_scenario(s1_scenario(mode="a1"))
        res_b = run_scenario(s1_scenario(mode="ccc"))
        assert res_a.metrics.energy_baseline_j == res_b.metrics.energy_baseline_j
        assert (
            res_a.metrics.energy_baseline_capacity_j
            == res_b.metrics.energy_baseline_capacity_j
        )

    def test_transition_count_matches_sleep_cycles(self, fixtures_dir):
        res = run_scenario(s1_scenario())
        # one cell slept and never woke: exactly one transition into saving
        assert res.metrics.transitions == 1


class TestAuditing:
    def test_clean_run_has_no_violations(self):
        res = run_scenario(small_scenario())
        assert audit_log(res.lines).violations == []

    def test_final_states_exposed(self, fixtures_dir):
        res = run_scenario(s1_scenario())
        audit = audit_log(res.lines)
        assert set(audit.final_states) == {
            "0-0-0", "0-0-1", "1-0-0", "1-0-1", "1-0-2",
        }

    def test_indication_minimality(self):
        res = run_scenario(small_scenario())
        per_cell: dict[str, list] = {}
        for line in res.lines:
            if '"type":"ccc_indication"' in line:
                doc = json.loads(line)
                key = tuple(doc["cell"])
                content = (
                    doc["cesSwitch"], doc["energySavingState"],
                    doc["energySavingControl"],
                )
                history = per_cell.setdefault(key, [])
                if history:
                    assert history[-1] != content
                history.append(content)
