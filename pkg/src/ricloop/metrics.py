"""KPIs computed by replaying event logs.

A run's metrics are always derived from its log, never from live engine
state: the walker reconstructs per-cell load and energy state record by
record, integrates energy at every interval mark, and cross-checks load
reports against the reconstruction (any disagreement means the log is
corrupt). Semantic breaches (a handover into a forbidden cell, a sleep
write over a loaded cell, an illegal state edge) are collected as
violations rather than errors, which is what the soundness checks consume.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .messages import (
    A1PolicyEvent,
    ArrivalRecord,
    AuditRecord,
    BaselineRecord,
    CccIndication,
    DecodeError,
    DepartureRecord,
    DrainTimeoutRecord,
    EndRecord,
    EsDecision,
    IntervalEnd,
    KpmReport,
    O1Write,
    ScenarioHeader,
    decode,
)
from .ran import (
    LEGAL_TRANSITIONS,
    CellId,
    CellRole,
    EnergyState,
    O1Attribute,
    interval_energy,
)
from .topology import topology_from_dict


class CorruptLogError(Exception):
    pass


@dataclass
class MetricsReport:
    name: str
    mode: str
    seed: int
    duration_intervals: int
    granularity_s: int
    energy_baseline_j: float
    energy_actual_j: float
    energy_baseline_capacity_j: float
    energy_actual_capacity_j: float
    savings_capacity_pct: float
    savings_total_pct: float
    attempts: int
    admitted: int
    blocked: int
    accessibility: float
    handovers_attempted: int
    handovers_succeeded: int
    handovers_denied: int
    drain_timeouts: int
    transitions: int
    es_mode_timeline: dict[str, list[list[int]]]
    sector_load_timeline: dict[str, list[list]]
    per_cell_rrc_timeline: dict[str, list[list[int]]]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "seed": self.seed,
            "duration_intervals": self.duration_intervals,
            "granularity_s": self.granularity_s,
            "energy_baseline_j": self.energy_baseline_j,
            "energy_actual_j": self.energy_actual_j,
            "energy_baseline_capacity_j": self.energy_baseline_capacity_j,
            "energy_actual_capacity_j": self.energy_actual_capacity_j,
            "savings_capacity_pct": self.savings_capacity_pct,
            "savings_total_pct": self.savings_total_pct,
            "attempts": self.attempts,
            "admitted": self.admitted,
            "blocked": self.blocked,
            "accessibility": self.accessibility,
            "handovers_attempted": self.handovers_attempted,
            "handovers_succeeded": self.handovers_succeeded,
            "handovers_denied": self.handovers_denied,
            "drain_timeouts": self.drain_timeouts,
            "transitions": self.transitions,
            "es_mode_timeline": self.es_mode_timeline,
            "sector_load_timeline": self.sector_load_timeline,
            "per_cell_rrc_timeline": self.per_cell_rrc_timeline,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class LogAudit:
    """Reconstruction byproducts used by the soundness and equivalence checks."""

    violations: list[str] = field(default_factory=list)
    final_attachment: dict[int, str] = field(default_factory=dict)
    final_states: dict[str, str] = field(default_factory=dict)


def _iter_lines(source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            with path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        yield line
        except OSError as exc:
            raise CorruptLogError(f"cannot read {path}: {exc}") from exc
    else:
        for line in source:
            line = line.strip()
            if line:
                yield line


class _Walker:
    def __init__(self) -> None:
        self.header: Optional[ScenarioHeader] = None
        self.baseline: Optional[BaselineRecord] = None
        self.cells = None
        self.cell_order: list[CellId] = []
        self.granularity = 0
        self.duration = 0
        self.ues: dict[int, tuple[CellId, int]] = {}
        self.forbidden: set[CellId] = set()
        self.last_kpm_rrc: dict[CellId, int] = {}
        self.last_indication: dict[CellId, tuple] = {}
        self.saw_trigger = False
        self.done = False
        self.intervals_seen = 0
        self.energy_total = 0.0
        self.energy_capacity = 0.0
        self.attempts = 0
        self.admitted = 0
        self.blocked = 0
        self.ho_attempted = 0
        self.ho_succeeded = 0
        self.ho_denied = 0
        self.drain_timeouts = 0
        self.transitions = 0
        self.violations: list[str] = []
        self.mode_timeline: dict[str, list[list[int]]] = {}
        self.sector_series: dict[str, list[list]] = {}
        self.rrc_timeline: dict[str, list[list[int]]] = {}
        self._last_rrc_row: dict[CellId, int] = {}

    def feed(self, record) -> None:
        if self.done:
            raise CorruptLogError("records after the end marker")
        if self.header is None:
            if not isinstance(record, ScenarioHeader):
                raise CorruptLogError("log must start with a scenario header")
            self._init_from_header(record)
            return
        handler = self._HANDLERS.get(type(record))
        if handler is not None:
            handler(self, record)

    def _init_from_header(self, header: ScenarioHeader) -> None:
        self.header = header
        try:
            topology = topology_from_dict(header.topology)
            self.granularity = int(header.scenario["granularity_s"])
            self.duration = int(header.scenario["duration_intervals"])
        except Exception as exc:
            raise CorruptLogError(f"bad scenario header: {exc}") from exc
        self.cells = topology.build_cells()
        self.cell_order = sorted(self.cells)
        self._last_rrc_row = {c: -1 for c in self.cell_order}

    # -- handlers ---------------------------------------------------------

    def _on_baseline(self, rec: BaselineRecord) -> None:
        self.baseline = rec

    def _on_kpm(self, rec: KpmReport) -> None:
        self.saw_trigger = True
        cell = self.cells.get(rec.cell)
        if cell is None:
            raise CorruptLogError(f"kpm for unknown cell {rec.cell.key()}")
        if (
            rec.rrc_count != cell.rrc_count
            or rec.prb_utilization != cell.prb_used / cell.prb_capacity
        ):
            raise CorruptLogError(
                f"kpm at t={rec.ts} disagrees with reconstruction for {rec.cell.key()}"
            )
        self.last_kpm_rrc[rec.cell] = rec.rrc_count

    def _on_arrival(self, rec: ArrivalRecord) -> None:
        self.attempts += 1
        if rec.outcome == "blocked":
            self.blocked += 1
            return
        self.admitted += 1
        cell = self.cells[rec.cell]
        if cell.energy_state is not EnergyState.IS_NOT_ENERGY_SAVING:
            self.violations.append(
                f"t={rec.ts}: arrival admitted into non-awake cell {rec.cell.key()}"
            )
        if rec.cell in self.forbidden:
            self.violations.append(
                f"t={rec.ts}: arrival admitted into forbidden cell {rec.cell.key()}"
            )
        if cell.prb_used + rec.demand_prb > cell.prb_capacity:
            self.violations.append(
                f"t={rec.ts}: arrival overflows {rec.cell.key()}"
            )
        if rec.ue in self.ues:
            raise CorruptLogError(f"duplicate arrival for ue {rec.ue}")
        cell.rrc_connected[rec.ue] = rec.demand_prb
        cell.prb_used += rec.demand_prb
        self.ues[rec.ue] = (rec.cell, rec.demand_prb)

    def _on_departure(self, rec: DepartureRecord) -> None:
        entry = self.ues.pop(rec.ue, None)
        if entry is None or entry[0] != rec.cell:
            raise CorruptLogError(f"departure of ue {rec.ue} contradicts the log")
        cell = self.cells[rec.cell]
        cell.prb_used -= cell.rrc_connected.pop(rec.ue)

    def _on_audit(self, rec: AuditRecord) -> None:
        self.ho_attempted += 1
        if not self.saw_trigger:
            self.violations.append(
                f"t={rec.ts}: handover command before any report was delivered"
            )
        if rec.outcome == "denied":
            self.ho_denied += 1
            return
        if rec.outcome == "failed":
            return
        self.ho_succeeded += 1
        target = self.cells[rec.target]
        if target.energy_state is not EnergyState.IS_NOT_ENERGY_SAVING:
            self.violations.append(
                f"t={rec.ts}: handover into non-awake cell {rec.target.key()}"
            )
        if rec.target in self.forbidden:
            self.violations.append(
                f"t={rec.ts}: handover into forbidden cell {rec.target.key()}"
            )
        if target.prb_used + rec.demand_prb > target.prb_capacity:
            self.violations.append(f"t={rec.ts}: handover overflows {rec.target.key()}")
        entry = self.ues.get(rec.ue)
        if entry is None or entry[0] != rec.source:
            raise CorruptLogError(f"handover of ue {rec.ue} contradicts the log")
        source = self.cells[rec.source]
        demand = source.rrc_connected.pop(rec.ue)
        source.prb_used -= demand
        target.rrc_connected[rec.ue] = demand
        target.prb_used += demand
        self.ues[rec.ue] = (rec.target, demand)

    def _on_indication(self, rec: CccIndication) -> None:
        self.saw_trigger = True
        cell = self.cells[rec.cell]
        old = cell.energy_state
        content = (rec.ces_switch, rec.energy_state, rec.control)
        if self.last_indication.get(rec.cell) == content:
            self.violations.append(
                f"t={rec.ts}: indication without attribute change on {rec.cell.key()}"
            )
        self.last_indication[rec.cell] = content
        if rec.energy_state is not old:
            if rec.energy_state not in LEGAL_TRANSITIONS[old]:
                self.violations.append(
                    f"t={rec.ts}: illegal transition {old.value} -> "
                    f"{rec.energy_state.value} on {rec.cell.key()}"
                )
            if rec.energy_state is EnergyState.IS_ENERGY_SAVING:
                if cell.rrc_connected:
                    self.violations.append(
                        f"t={rec.ts}: {rec.cell.key()} sleeps with {cell.rrc_count} users"
                    )
                self.transitions += 1
            if old is EnergyState.IS_ENERGY_SAVING:
                self.transitions += 1
            cell.energy_state = rec.energy_state
        cell.ces_switch = rec.ces_switch

    def _on_o1(self, rec: O1Write) -> None:
        if (
            rec.attribute is O1Attribute.ENERGY_SAVING_STATE
            and rec.value is EnergyState.IS_ENERGY_SAVING
            and self.last_kpm_rrc.get(rec.cell) != 0
        ):
            self.violations.append(
                f"t={rec.ts}: sleep write on {rec.cell.key()} with last observed "
                f"rrc={self.last_kpm_rrc.get(rec.cell)}"
            )

    def _on_policy(self, rec: A1PolicyEvent) -> None:
        self.saw_trigger = True
        self.forbidden = set(rec.live_forbidden)

    def _on_decision(self, rec: EsDecision) -> None:
        key = f"{rec.site}-{rec.sector}"
        self.sector_series.setdefault(key, []).append(
            [rec.ts, rec.observed_util, rec.predicted_util, rec.awake_capacity_count]
        )
        timeline = self.mode_timeline.setdefault(key, [])
        if not timeline or timeline[-1][1] != rec.awake_capacity_count:
            timeline.append([rec.ts, rec.awake_capacity_count])

    def _on_drain_timeout(self, rec: DrainTimeoutRecord) -> None:
        self.drain_timeouts += 1

    def _on_interval_end(self, rec: IntervalEnd) -> None:
        if rec.index != self.intervals_seen:
            raise CorruptLogError(
                f"interval marker {rec.index} out of order "
                f"(expected {self.intervals_seen})"
            )
        self.intervals_seen += 1
        for cid in self.cell_order:
            cell = self.cells[cid]
            joules = interval_energy(cell, cell.power, self.granularity)
            self.energy_total += joules
            if cell.role is CellRole.CAPACITY:
                self.energy_capacity += joules
            if cell.rrc_count != self._last_rrc_row[cid]:
                self._last_rrc_row[cid] = cell.rrc_count
                self.rrc_timeline.setdefault(cid.key(), []).append(
                    [rec.ts, cell.rrc_count]
                )

    def _on_end(self, rec: EndRecord) -> None:
        if rec.intervals != self.intervals_seen:
            raise CorruptLogError(
                f"end marker claims {rec.intervals} intervals, saw {self.intervals_seen}"
            )
        self.done = True

    _HANDLERS = {
        BaselineRecord: _on_baseline,
        KpmReport: _on_kpm,
        ArrivalRecord: _on_arrival,
        DepartureRecord: _on_departure,
        AuditRecord: _on_audit,
        CccIndication: _on_indication,
        O1Write: _on_o1,
        A1PolicyEvent: _on_policy,
        EsDecision: _on_decision,
        DrainTimeoutRecord: _on_drain_timeout,
        IntervalEnd: _on_interval_end,
        EndRecord: _on_end,
    }

    # -- results -----------------------------------------------------------

    def finish(self) -> tuple[MetricsReport, LogAudit]:
        if self.header is None:
            raise CorruptLogError("empty log")
        if not self.done:
            raise CorruptLogError(
                f"truncated log: saw {self.intervals_seen} of {self.duration} intervals "
                "and no end marker"
            )
        baseline_total = (
            self.baseline.energy_total_j if self.baseline else self.energy_total
        )
        baseline_capacity = (
            self.baseline.energy_capacity_j if self.baseline else self.energy_capacity
        )
        savings_capacity = (
            100.0 * (1.0 - self.energy_capacity / baseline_capacity)
            if baseline_capacity > 0
            else 0.0
        )
        savings_total = (
            100.0 * (1.0 - self.energy_total / baseline_total)
            if baseline_total > 0
            else 0.0
        )
        sc = self.header.scenario
        report = MetricsReport(
            name=str(sc.get("name", "")),
            mode=str(sc.get("mode", "")),
            seed=int(sc.get("seed", 0)),
            duration_intervals=self.duration,
            granularity_s=self.granularity,
            energy_baseline_j=baseline_total,
            energy_actual_j=self.energy_total,
            energy_baseline_capacity_j=baseline_capacity,
            energy_actual_capacity_j=self.energy_capacity,
            savings_capacity_pct=savings_capacity,
            savings_total_pct=savings_total,
            attempts=self.attempts,
            admitted=self.admitted,
            blocked=self.blocked,
            accessibility=self.admitted / self.attempts if self.attempts else 1.0,
            handovers_attempted=self.ho_attempted,
            handovers_succeeded=self.ho_succeeded,
            handovers_denied=self.ho_denied,
            drain_timeouts=self.drain_timeouts,
            transitions=self.transitions,
            es_mode_timeline=self.mode_timeline,
            sector_load_timeline=self.sector_series,
            per_cell_rrc_timeline=self.rrc_timeline,
        )
        audit = LogAudit(
            violations=self.violations,
            final_attachment={u: c.key() for u, (c, _) in sorted(self.ues.items())},
            final_states={
                c.key(): self.cells[c].energy_state.value for c in self.cell_order
            },
        )
        return report, audit


def _walk(source) -> tuple[MetricsReport, LogAudit]:
    walker = _Walker()
    for no, line in enumerate(_iter_lines(source), start=1):
        try:
            record = decode(line)
        except DecodeError as exc:
            raise CorruptLogError(f"line {no}: {exc}") from exc
        walker.feed(record)
    return walker.finish()


def compute_metrics(source) -> MetricsReport:
    """Replay an event log (path or iterable of lines) into a MetricsReport."""
    return _walk(source)[0]


def replay(source) -> MetricsReport:
    """Alias of compute_metrics: metrics come from the log and nothing else."""
    return compute_metrics(source)


def audit_log(source) -> LogAudit:
    """Replay a log for its soundness violations and terminal state."""
    return _walk(source)[1]
