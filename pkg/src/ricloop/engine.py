"""Discrete-event engine: interval clock, traffic injection, deterministic
message delivery, both control loops, and the event log.

Each interval runs a fixed pipeline: traffic churn, a full report batch, the
non-RT saving tick, then bounded settle sub-epochs in which the node
finalizes transitional states, fresh partial reports go out, and the
steering app retries drains until nothing moves. Metrics always come from
replaying the log, never from engine-side bookkeeping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .es_rapp import EnergySavingRapp, EsConfig, RappHooks, ScriptedAction
from .messages import (
    ArrivalRecord,
    BaselineRecord,
    CccIndication,
    DepartureRecord,
    EndRecord,
    IntervalEnd,
    KpmReport,
    O1Write,
    RcMeasurement,
    RcNodeInfo,
    RcUeInfo,
    ScenarioHeader,
    encode,
)
from .ran import CellId, CellRole, EnergyState, QosClass, RanModel, UE, interval_energy
from .ric import ControlOutcome, NearRtRic
from .topology import Topology, generate_topology, load_topology, topology_from_dict
from .traffic import (
    DiurnalConfig,
    TrafficTrace,
    hash_floats,
    load_trace,
    synth_diurnal,
    target_ue_count,
)
from .ts_xapp import TrafficSteeringXapp, XappConfig


class EngineError(Exception):
    pass


class ConfigError(EngineError):
    pass


class NonQuiescenceError(EngineError):
    pass


@dataclass
class Scenario:
    """Fully resolved run description; see load_scenario for the file format."""

    name: str
    topology: Topology
    trace: TrafficTrace
    trace_descriptor: dict
    mode: str = "ccc"  # "a1" | "ccc"
    seed: int = 0
    duration_intervals: int = 0
    ue_demand_prb: int = 5
    voice_fraction: float = 0.0
    placement_radius_m: float = 300.0
    es_policy: str = "auto"  # "auto" | "scripted" | "off"
    es_config: EsConfig = field(default_factory=EsConfig)
    scripted: tuple[ScriptedAction, ...] = ()
    voice_coverage_margin_db: float = 6.0
    settle_subepochs: int = 16

    def __post_init__(self) -> None:
        if self.mode not in ("a1", "ccc"):
            raise ConfigError(f"unknown notification mode {self.mode!r}")
        if self.es_policy not in ("auto", "scripted", "off"):
            raise ConfigError(f"unknown saving policy {self.es_policy!r}")
        if self.duration_intervals <= 0:
            self.duration_intervals = self.trace.n_intervals
        if self.duration_intervals > self.trace.n_intervals:
            raise ConfigError(
                f"duration {self.duration_intervals} exceeds trace length "
                f"{self.trace.n_intervals}"
            )
        if self.ue_demand_prb < 1:
            raise ConfigError("ue_demand_prb must be >= 1")
        if not (0.0 <= self.voice_fraction <= 1.0):
            raise ConfigError("voice_fraction must be in [0, 1]")
        if self.es_config.min_dwell_s < self.trace.granularity_s:
            raise ConfigError("min_dwell_s must be at least one interval")
        if self.settle_subepochs < 1:
            raise ConfigError("settle_subepochs must be >= 1")

    def with_es_off(self) -> "Scenario":
        return replace(self, es_policy="off", scripted=())

    def header_dict(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "seed": self.seed,
            "duration_intervals": self.duration_intervals,
            "granularity_s": self.trace.granularity_s,
            "ue_demand_prb": self.ue_demand_prb,
            "voice_fraction": self.voice_fraction,
            "placement_radius_m": self.placement_radius_m,
            "es": {
                "policy": self.es_policy,
                "theta_off": self.es_config.theta_off,
                "theta_on": self.es_config.theta_on,
                "min_dwell_s": self.es_config.min_dwell_s,
                "horizon_intervals": self.es_config.horizon_intervals,
                "drain_timeout_epochs": self.es_config.drain_timeout_epochs,
                "scripted": [
                    {
                        "interval": a.interval,
                        "action": a.action,
                        "cell": [a.cell.site, a.cell.sector, a.cell.band],
                    }
                    for a in self.scripted
                ],
            },
            "voice_coverage_margin_db": self.voice_coverage_margin_db,
            "settle_subepochs": self.settle_subepochs,
            "trace": self.trace_descriptor,
        }


def build_scenario(doc: dict, base_dir: Path | str = ".") -> Scenario:
    """Resolve a scenario document: load or generate the topology, load or
    synthesize the trace, and validate everything against each other."""
    base = Path(base_dir)
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")

    topo_spec = doc.get("topology")
    if isinstance(topo_spec, str):
        topology = load_topology(base / topo_spec)
    elif isinstance(topo_spec, dict) and "generate" in topo_spec:
        gen = dict(topo_spec["generate"])
        try:
            topology = generate_topology(
                sites=int(gen.pop("sites")),
                sectors=int(gen.pop("sectors")),
                bands=int(gen.pop("bands")),
                **gen,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad topology generate spec: {exc}") from exc
    elif isinstance(topo_spec, dict):
        topology = topology_from_dict(topo_spec)
    else:
        raise ConfigError("scenario needs a 'topology' path, document, or generate spec")

    seed = int(doc.get("seed", 0))
    trace_spec = doc.get("trace")
    if isinstance(trace_spec, dict) and "file" in trace_spec:
        trace = load_trace(base / trace_spec["file"], topology)
        descriptor = {"file": str(trace_spec["file"])}
    elif isinstance(trace_spec, dict) and "diurnal" in trace_spec:
        d = dict(trace_spec["diurnal"])
        d.setdefault("seed", seed)
        if "per_band_scale" in d:
            d["per_band_scale"] = tuple(d["per_band_scale"])
        try:
            cfg = DiurnalConfig(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad diurnal config: {exc}") from exc
        trace = synth_diurnal(topology, cfg)
        descriptor = {"diurnal": {**d, "per_band_scale": list(d.get("per_band_scale", ()))}}
    else:
        raise ConfigError("scenario needs a 'trace' with a 'file' or 'diurnal' spec")

    es_doc = dict(doc.get("es", {}))
    policy = es_doc.pop("policy", "auto")
    scripted_docs = es_doc.pop("scripted", [])
    try:
        es_config = EsConfig(**es_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad es config: {exc}") from exc
    try:
        scripted = tuple(
            ScriptedAction(
                interval=int(a["interval"]),
                action=str(a["action"]),
                cell=CellId(*[int(v) for v in a["cell"]]),
            )
            for a in scripted_docs
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scripted action: {exc}") from exc
    for action in scripted:
        if action.action not in ("sleep", "wake"):
            raise ConfigError(f"unknown scripted action {action.action!r}")

    ts_doc = doc.get("ts", {})
    try:
        return Scenario(
            name=str(doc.get("name", "scenario")),
            topology=topology,
            trace=trace,
            trace_descriptor=descriptor,
            mode=str(doc.get("mode", "ccc")),
            seed=seed,
            duration_intervals=int(doc.get("duration_intervals", 0)),
            ue_demand_prb=int(doc.get("ue_demand_prb", 5)),
            voice_fraction=float(doc.get("voice_fraction", 0.0)),
            placement_radius_m=float(doc.get("placement_radius_m", 300.0)),
            es_policy=str(policy),
            es_config=es_config,
            scripted=scripted,
            voice_coverage_margin_db=float(
                ts_doc.get("voice_coverage_margin_db", 6.0)
            ),
            settle_subepochs=int(doc.get("settle_subepochs", 16)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return build_scenario(doc, path.parent)


class _Sim:
    """One simulation pass over a scenario; produces the event-log lines."""

    def __init__(self, scenario: Scenario, baseline: Optional[tuple[float, float]]):
        self.sc = scenario
        self.baseline = baseline
        self.lines: list[str] = []
        self.t = 0
        self._activity = 0

        self.ran = RanModel(scenario.topology)
        self.ran.indication_sink = self._on_indication
        self.cell_order = self.ran.cell_order
        self.ric = NearRtRic(self.ran, emit=self.emit, clock=lambda: self.t)

        self.xapp = TrafficSteeringXapp(
            scenario.topology,
            XappConfig(
                mode=scenario.mode,
                voice_coverage_margin_db=scenario.voice_coverage_margin_db,
            ),
            submit=self._submit_control,
            clock=lambda: self.t,
        )
        self.rapp = EnergySavingRapp(
            scenario.topology,
            scenario.es_config,
            mode=scenario.mode,
            policy=scenario.es_policy,
            granularity_s=scenario.trace.granularity_s,
            hooks=RappHooks(
                a1_put=self._hook_a1_put,
                a1_delete=self._hook_a1_delete,
                o1_write=self._hook_o1_write,
                e2_control=self._hook_e2_control,
                emit=self.emit,
            ),
            clock=lambda: self.t,
            scripted=scenario.scripted,
        )
        self.ric.register(self.xapp.APP_ID, self.xapp.on_message)
        self.ric.register(self.rapp.APP_ID, self.rapp.on_message)

        self.anchor_pop: dict[CellId, list[int]] = {c: [] for c in self.cell_order}
        self.next_ue = 0
        self._kpm_snapshot: dict[CellId, tuple[int, int]] = {}
        # live energy bookkeeping, same formula and order as the log walker;
        # run_scenario reads it off the shadow pass instead of replaying it
        self.energy_total = 0.0
        self.energy_capacity = 0.0
        self._capacity_role = {
            c: self.ran.cells[c].role is CellRole.CAPACITY for c in self.cell_order
        }

    # -- logging and wiring ---------------------------------------------------

    def emit(self, msg) -> None:
        self.lines.append(encode(msg))

    def _on_indication(self, cell, control) -> None:
        self._activity += 1
        ind = CccIndication(
            ts=self.t,
            cell=cell.id,
            ces_switch=cell.ces_switch,
            energy_state=cell.energy_state,
            control=control,
        )
        self.emit(ind)
        self.ric.deliver(ind)

    def _submit_control(self, cmd) -> ControlOutcome:
        self._activity += 1
        return self.ric.submit_control(cmd)

    def _hook_a1_put(self, policy) -> None:
        self._activity += 1
        self.ric.a1_put(policy)

    def _hook_a1_delete(self, policy_id: str) -> None:
        self._activity += 1
        self.ric.a1_delete(policy_id)

    def _hook_o1_write(self, cell_id, attribute, value) -> None:
        self._activity += 1
        self.emit(O1Write(ts=self.t, cell=cell_id, attribute=attribute, value=value))
        self.ran.o1_write(cell_id, attribute, value)

    def _hook_e2_control(self, cell_id, control) -> None:
        self._activity += 1
        self.ric.submit_energy_control(cell_id, control)

    # -- the run ---------------------------------------------------------------

    def run(self) -> list[str]:
        sc = self.sc
        self.emit(
            ScenarioHeader(ts=0, scenario=sc.header_dict(), topology=sc.topology.to_dict())
        )
        if self.baseline is not None:
            self.emit(
                BaselineRecord(
                    ts=0,
                    energy_total_j=self.baseline[0],
                    energy_capacity_j=self.baseline[1],
                )
            )
        self._subscribe_apps()
        node_info = RcNodeInfo(
            ts=0,
            cells=tuple(
                (c, self.ran.cells[c].cgi, self.ran.cells[c].pci)
                for c in self.cell_order
            ),
        )
        self.emit(node_info)
        self.ric.deliver(node_info)

        g = sc.trace.granularity_s
        for k in range(sc.duration_intervals):
            self.t = k * g
            self._traffic_step(k)
            self._report_step(k)
            self._settle(k)
            self.emit(IntervalEnd(ts=self.t, index=k))
            self._integrate_energy(g)
            self._check_invariants()
        self.emit(EndRecord(ts=self.t, intervals=sc.duration_intervals))
        return self.lines

    def _subscribe_apps(self) -> None:
        xapp_kinds = {"kpm", "rc_measurement", "rc_ue_info", "rc_node_info"}
        xapp_kinds.add("a1_policy" if self.sc.mode == "a1" else "ccc_indication")
        self.ric.subscribe(self.xapp.APP_ID, xapp_kinds)
        rapp_kinds = {"kpm"}
        if self.sc.mode == "ccc":
            rapp_kinds.add("ccc_indication")
        self.ric.subscribe(self.rapp.APP_ID, rapp_kinds)

    # -- pipeline steps ----------------------------------------------------------

    def _traffic_step(self, k: int) -> None:
        sc = self.sc
        targets = {
            c: target_ue_count(
                sc.trace.util(c, k), self.ran.cells[c].prb_capacity, sc.ue_demand_prb
            )
            for c in self.cell_order
        }
        # departures across all anchors first: capacity they free is usable
        # by this interval's arrivals
        for cid in self.cell_order:
            pop = self.anchor_pop[cid]
            while len(pop) > targets[cid]:
                self._depart(pop.pop())
        for cid in self.cell_order:
            pop = self.anchor_pop[cid]
            for _ in range(targets[cid] - len(pop)):
                self._arrive(cid, pop)

    def _depart(self, ue_id: int) -> None:
        ue = self.ran.ues[ue_id]
        cell = ue.serving
        self.ran.detach(ue_id)
        self.emit(
            DepartureRecord(ts=self.t, ue=ue_id, cell=cell, demand_prb=ue.demand_prb)
        )
        info = RcUeInfo(
            ts=self.t,
            ue=ue_id,
            event="detach",
            cell=cell,
            demand_prb=ue.demand_prb,
            qos=ue.qos,
        )
        self.emit(info)
        self.ric.deliver(info)

    def _arrive(self, anchor: CellId, pop: list[int]) -> None:
        sc = self.sc
        ue_id = self.next_ue
        self.next_ue += 1
        u = hash_floats(sc.seed, anchor.site, anchor.sector, ue_id, n=3)
        site_cell = self.ran.cells[anchor]
        r = sc.placement_radius_m * math.sqrt(u[0])
        theta = 2.0 * math.pi * u[1]
        qos = QosClass.VOICE if u[2] < sc.voice_fraction else QosClass.BROADBAND
        ue = UE(
            id=ue_id,
            x=site_cell.x + r * math.cos(theta),
            y=site_cell.y + r * math.sin(theta),
            demand_prb=sc.ue_demand_prb,
            qos=qos,
        )
        meas = RcMeasurement(ts=self.t, ue=ue_id, rsrp=self.ran.measurement(ue))
        self.emit(meas)
        self.ric.deliver(meas)

        target = self.xapp.place_arrival(ue_id, anchor, ue.demand_prb, qos)
        reason = "no_candidate"
        if target is not None:
            result = self.ran.attach(ue, target)
            if result.ok:
                pop.append(ue_id)
                self.emit(
                    ArrivalRecord(
                        ts=self.t,
                        ue=ue_id,
                        anchor=anchor,
                        outcome="admitted",
                        cell=target,
                        reason=None,
                        demand_prb=ue.demand_prb,
                        qos=qos,
                    )
                )
                info = RcUeInfo(
                    ts=self.t,
                    ue=ue_id,
                    event="attach",
                    cell=target,
                    demand_prb=ue.demand_prb,
                    qos=qos,
                )
                self.emit(info)
                self.ric.deliver(info)
                return
            reason = result.value
        self.emit(
            ArrivalRecord(
                ts=self.t,
                ue=ue_id,
                anchor=anchor,
                outcome="blocked",
                cell=None,
                reason=reason,
                demand_prb=ue.demand_prb,
                qos=qos,
            )
        )
        self.xapp.forget_ue(ue_id)

    def _report_step(self, k: int) -> None:
        for cid in self.cell_order:
            cell = self.ran.cells[cid]
            self._emit_kpm(cell)
        self.rapp.step(self.t, k)

    def _emit_kpm(self, cell) -> None:
        kpm = KpmReport(
            ts=self.t,
            cell=cell.id,
            prb_utilization=cell.prb_used / cell.prb_capacity,
            rrc_count=cell.rrc_count,
        )
        self._kpm_snapshot[cell.id] = (cell.prb_used, cell.rrc_count)
        self.emit(kpm)
        self.ric.deliver(kpm)

    def _settle(self, k: int) -> None:
        """Bounded sub-epochs until no app has pending work for this interval."""
        for _ in range(self.sc.settle_subepochs):
            before = self._activity
            self.ran.finalize_all()
            for cid in self.cell_order:
                cell = self.ran.cells[cid]
                if self._kpm_snapshot[cid] != (cell.prb_used, cell.rrc_count):
                    self._emit_kpm(cell)
            self.xapp.retry_drains()
            if self._activity == before:
                return
        raise NonQuiescenceError(
            f"interval {k}: no quiescence after {self.sc.settle_subepochs} sub-epochs "
            f"(draining={sorted(c.key() for c in self.xapp.view.draining)})"
        )

    def _integrate_energy(self, granularity_s: int) -> None:
        for cid in self.cell_order:
            cell = self.ran.cells[cid]
            joules = interval_energy(cell, cell.power, granularity_s)
            self.energy_total += joules
            if self._capacity_role[cid]:
                self.energy_capacity += joules

    def _check_invariants(self) -> None:
        for cid in self.cell_order:
            cell = self.ran.cells[cid]
            if cell.prb_used != sum(cell.rrc_connected.values()):
                raise EngineError(f"{cid.key()}: PRB accounting out of sync")
            if (
                cell.energy_state is EnergyState.IS_ENERGY_SAVING
                and cell.rrc_connected
            ):
                raise EngineError(f"{cid.key()}: sleeping with users attached")


@dataclass
class RunResult:
    scenario: Scenario
    lines: list[str]
    metrics: "MetricsReport"
    log_path: Optional[Path] = None
    metrics_path: Optional[Path] = None

    @property
    def log_text(self) -> str:
        return "\n".join(self.lines) + "\n"


def run_scenario(scenario: Scenario, out_dir: Optional[str | Path] = None) -> RunResult:
    """Run a scenario end to end.

    When saving is enabled, an identical scenario with saving disabled runs
    first as the always-awake shadow pass; its energy becomes the baseline
    record embedded in the main log. Metrics are computed by replaying the
    freshly produced log, so `replay` is the single source of truth.
    """
    from .metrics import compute_metrics

    baseline = None
    if scenario.es_policy != "off":
        shadow = _Sim(scenario.with_es_off(), baseline=None)
        shadow.run()
        baseline = (shadow.energy_total, shadow.energy_capacity)
    lines = _Sim(scenario, baseline=baseline).run()
    metrics = compute_metrics(lines)
    result = RunResult(scenario=scenario, lines=lines, metrics=metrics)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.log_path = out / "events.jsonl"
        result.log_path.write_text(result.log_text)
        result.metrics_path = out / "metrics.json"
        result.metrics_path.write_text(metrics.to_json() + "\n")
    return result
