"""Message schemas and the JSON-lines envelope.

Every inter-component exchange and every loggable event is one JSON object
per line with a `type` discriminator and an integer `ts` in seconds. The
O-CES attribute names (cesSwitch, energySavingState, energySavingControl)
appear verbatim on the wire. decode(encode(m)) == m for every type; decode
never raises anything but DecodeError on bad input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .ran import CellId, CellRole, EnergyControl, EnergyState, O1Attribute, QosClass


class DecodeError(Exception):
    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


class PolicyError(Exception):
    pass


class UnknownCellError(PolicyError):
    pass


class CoverageForbiddenError(PolicyError):
    pass


class PolicyPreference(str, Enum):
    FORBID = "FORBID"
    AVOID = "AVOID"
    PREFER = "PREFER"
    SHALL = "SHALL"


# ---------------------------------------------------------------------------
# field codec helpers


def _req(fields: dict, key: str, path: str):
    if key not in fields:
        raise DecodeError(f"{path}.{key}", "missing field")
    return fields[key]


def _int(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise DecodeError(path, f"expected integer, got {v!r}")
    return v


def _num(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DecodeError(path, f"expected number, got {v!r}")
    return float(v)


def _str(v, path: str) -> str:
    if not isinstance(v, str):
        raise DecodeError(path, f"expected string, got {v!r}")
    return v


def _bool(v, path: str) -> bool:
    if not isinstance(v, bool):
        raise DecodeError(path, f"expected boolean, got {v!r}")
    return v


def _cell(v, path: str) -> CellId:
    if not isinstance(v, list) or len(v) != 3:
        raise DecodeError(path, f"expected [site, sector, band], got {v!r}")
    return CellId(_int(v[0], path), _int(v[1], path), _int(v[2], path))


def _cell_json(c: CellId) -> list[int]:
    return [c.site, c.sector, c.band]


def _enum(cls, v, path: str):
    try:
        return cls(_str(v, path))
    except ValueError:
        raise DecodeError(path, f"not a valid {cls.__name__}: {v!r}") from None


def _unit(v, path: str) -> float:
    u = _num(v, path)
    if not (0.0 <= u <= 1.0):
        raise DecodeError(path, f"{u} outside [0, 1]")
    return u


# ---------------------------------------------------------------------------
# message types


@dataclass(frozen=True)
class KpmReport:
    TYPE = "kpm"
    ts: int
    cell: CellId
    prb_utilization: float
    rrc_count: int

    def to_fields(self) -> dict:
        return {
            "cell": _cell_json(self.cell),
            "prb_utilization": self.prb_utilization,
            "rrc_count": self.rrc_count,
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "KpmReport":
        rrc = _int(_req(f, "rrc_count", path), f"{path}.rrc_count")
        if rrc < 0:
            raise DecodeError(f"{path}.rrc_count", "negative")
        return cls(
            ts=ts,
            cell=_cell(_req(f, "cell", path), f"{path}.cell"),
            prb_utilization=_unit(
                _req(f, "prb_utilization", path), f"{path}.prb_utilization"
            ),
            rrc_count=rrc,
        )


@dataclass(frozen=True)
class RcMeasurement:
    """E2 report carrying a UE's per-cell RSRP map."""

    TYPE = "rc_measurement"
    ts: int
    ue: int
    rsrp: dict[CellId, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.rsrp:
            raise ValueError("rsrp map must be non-empty")

    def to_fields(self) -> dict:
        return {
            "ue": self.ue,
            "rsrp": [[_cell_json(c), v] for c, v in sorted(self.rsrp.items())],
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "RcMeasurement":
        raw = _req(f, "rsrp", path)
        if not isinstance(raw, list) or not raw:
            raise DecodeError(f"{path}.rsrp", "expected non-empty list of pairs")
        rsrp = {}
        for i, pair in enumerate(raw):
            if not isinstance(pair, list) or len(pair) != 2:
                raise DecodeError(f"{path}.rsrp[{i}]", "expected [cell, dbm]")
            rsrp[_cell(pair[0], f"{path}.rsrp[{i}]")] = _num(
                pair[1], f"{path}.rsrp[{i}]"
            )
        return cls(ts=ts, ue=_int(_req(f, "ue", path), f"{path}.ue"), rsrp=rsrp)


@dataclass(frozen=True)
class RcNodeInfo:
    """E2 node inventory: CGI and PCI per cell."""

    TYPE = "rc_node_info"
    ts: int
    cells: tuple[tuple[CellId, str, int], ...]

    def to_fields(self) -> dict:
        return {
            "cells": [
                {"cell": _cell_json(c), "cgi": cgi, "pci": pci}
                for c, cgi, pci in self.cells
            ]
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "RcNodeInfo":
        raw = _req(f, "cells", path)
        if not isinstance(raw, list):
            raise DecodeError(f"{path}.cells", "expected list")
        cells = []
        for i, row in enumerate(raw):
            if not isinstance(row, dict):
                raise DecodeError(f"{path}.cells[{i}]", "expected object")
            p = f"{path}.cells[{i}]"
            cells.append(
                (
                    _cell(_req(row, "cell", p), f"{p}.cell"),
                    _str(_req(row, "cgi", p), f"{p}.cgi"),
                    _int(_req(row, "pci", p), f"{p}.pci"),
                )
            )
        return cls(ts=ts, cells=tuple(cells))


@dataclass(frozen=True)
class RcUeInfo:
    """E2 report of a UE attach/detach with the serving cell."""

    TYPE = "rc_ue_info"
    ts: int
    ue: int
    event: str  # "attach" | "detach"
    cell: CellId
    demand_prb: int
    qos: QosClass

    def to_fields(self) -> dict:
        return {
            "ue": self.ue,
            "event": self.event,
            "cell": _cell_json(self.cell),
            "demand_prb": self.demand_prb,
            "qos": self.qos.value,
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "RcUeInfo":
        event = _str(_req(f, "event", path), f"{path}.event")
        if event not in ("attach", "detach"):
            raise DecodeError(f"{path}.event", f"unknown event {event!r}")
        return cls(
            ts=ts,
            ue=_int(_req(f, "ue", path), f"{path}.ue"),
            event=event,
            cell=_cell(_req(f, "cell", path), f"{path}.cell"),
            demand_prb=_int(_req(f, "demand_prb", path), f"{path}.demand_prb"),
            qos=_enum(QosClass, _req(f, "qos", path), f"{path}.qos"),
        )


@dataclass(frozen=True)
class HandoverCommand:
    TYPE = "handover_command"
    ts: int
    ue: int
    source: CellId
    target: CellId

    def __post_init__(self) -> None:
        if self.source == self.target:
            raise ValueError("handover source and target must differ")

    def to_fields(self) -> dict:
        return {
            "ue": self.ue,
            "source": _cell_json(self.source),
            "target": _cell_json(self.target),
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "HandoverCommand":
        source = _cell(_req(f, "source", path), f"{path}.source")
        target = _cell(_req(f, "target", path), f"{path}.target")
        if source == target:
            raise DecodeError(f"{path}.target", "equals source")
        return cls(
            ts=ts,
            ue=_int(_req(f, "ue", path), f"{path}.ue"),
            source=source,
            target=target,
        )


@dataclass(frozen=True)
class CccIndication:
    """Notification that at least one O-CES attribute of a cell changed."""

    TYPE = "ccc_indication"
    ts: int
    cell: CellId
    ces_switch: bool
    energy_state: EnergyState
    control: Optional[EnergyControl] = None

    def to_fields(self) -> dict:
        return {
            "cell": _cell_json(self.cell),
            "cesSwitch": self.ces_switch,
            "energySavingState": self.energy_state.value,
            "energySavingControl": self.control.value if self.control else None,
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "CccIndication":
        raw_ctl = _req(f, "energySavingControl", path)
        control = (
            None
            if raw_ctl is None
            else _enum(EnergyControl, raw_ctl, f"{path}.energySavingControl")
        )
        return cls(
            ts=ts,
            cell=_cell(_req(f, "cell", path), f"{path}.cell"),
            ces_switch=_bool(_req(f, "cesSwitch", path), f"{path}.cesSwitch"),
            energy_state=_enum(
                EnergyState,
                _req(f, "energySavingState", path),
                f"{path}.energySavingState",
            ),
            control=control,
        )


@dataclass(frozen=True)
class TspPolicy:
    """Traffic-steering preference policy. Only FORBID is acted upon here;
    the other preferences parse and validate but steer nothing."""

    policy_id: str
    preference: PolicyPreference
    scope_cells: tuple[CellId, ...]

    def __post_init__(self) -> None:
        if not self.scope_cells:
            raise ValueError("scope_cells must be non-empty")
        if not self.policy_id:
            raise ValueError("policy_id must be non-empty")

    def to_json(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "preference": self.preference.value,
            "scope_cells": [_cell_json(c) for c in self.scope_cells],
        }

    @classmethod
    def from_json(cls, v, path: str) -> "TspPolicy":
        if not isinstance(v, dict):
            raise DecodeError(path, "expected object")
        raw_scope = _req(v, "scope_cells", path)
        if not isinstance(raw_scope, list) or not raw_scope:
            raise DecodeError(f"{path}.scope_cells", "expected non-empty list")
        return cls(
            policy_id=_str(_req(v, "policy_id", path), f"{path}.policy_id"),
            preference=_enum(
                PolicyPreference, _req(v, "preference", path), f"{path}.preference"
            ),
            scope_cells=tuple(
                _cell(c, f"{path}.scope_cells[{i}]") for i, c in enumerate(raw_scope)
            ),
        )


@dataclass(frozen=True)
class A1PolicyEvent:
    """Policy lifecycle record; doubles as the broker's change notification.

    live_forbidden is the forbid scope in force after the operation, so a
    subscriber can rebuild its view from any single event.
    """

    TYPE = "a1_policy"
    ts: int
    op: str  # "put" | "delete"
    policy_id: str
    policy: Optional[TspPolicy] = None
    live_forbidden: tuple[CellId, ...] = ()

    def to_fields(self) -> dict:
        return {
            "op": self.op,
            "policy_id": self.policy_id,
            "policy": self.policy.to_json() if self.policy else None,
            "live_forbidden": [_cell_json(c) for c in self.live_forbidden],
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "A1PolicyEvent":
        op = _str(_req(f, "op", path), f"{path}.op")
        if op not in ("put", "delete"):
            raise DecodeError(f"{path}.op", f"unknown op {op!r}")
        raw_policy = _req(f, "policy", path)
        raw_live = _req(f, "live_forbidden", path)
        if not isinstance(raw_live, list):
            raise DecodeError(f"{path}.live_forbidden", "expected list")
        return cls(
            ts=ts,
            op=op,
            policy_id=_str(_req(f, "policy_id", path), f"{path}.policy_id"),
            policy=(
                None if raw_policy is None else TspPolicy.from_json(raw_policy, f"{path}.policy")
            ),
            live_forbidden=tuple(
                _cell(c, f"{path}.live_forbidden[{i}]") for i, c in enumerate(raw_live)
            ),
        )


@dataclass(frozen=True)
class O1Write:
    TYPE = "o1_write"
    ts: int
    cell: CellId
    attribute: O1Attribute
    value: object  # EnergyState string or bool, matching the attribute

    def to_fields(self) -> dict:
        v = self.value.value if isinstance(self.value, Enum) else self.value
        return {
            "cell": _cell_json(self.cell),
            "attribute": self.attribute.value,
            "value": v,
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "O1Write":
        attribute = _enum(O1Attribute, _req(f, "attribute", path), f"{path}.attribute")
        raw = _req(f, "value", path)
        if attribute is O1Attribute.CES_SWITCH:
            value: object = _bool(raw, f"{path}.value")
        else:
            value = _enum(EnergyState, raw, f"{path}.value")
        return cls(
            ts=ts,
            cell=_cell(_req(f, "cell", path), f"{path}.cell"),
            attribute=attribute,
            value=value,
        )


@dataclass(frozen=True)
class AuditRecord:
    """One record per submitted handover control, whatever the outcome."""

    TYPE = "audit"
    ts: int
    ue: int
    source: CellId
    target: CellId
    outcome: str  # "success" | "denied" | "failed"
    reason: Optional[str]
    demand_prb: int

    def to_fields(self) -> dict:
        return {
            "ue": self.ue,
            "source": _cell_json(self.source),
            "target": _cell_json(self.target),
            "outcome": self.outcome,
            "reason": self.reason,
            "demand_prb": self.demand_prb,
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "AuditRecord":
        outcome = _str(_req(f, "outcome", path), f"{path}.outcome")
        if outcome not in ("success", "denied", "failed"):
            raise DecodeError(f"{path}.outcome", f"unknown outcome {outcome!r}")
        raw_reason = _req(f, "reason", path)
        return cls(
            ts=ts,
            ue=_int(_req(f, "ue", path), f"{path}.ue"),
            source=_cell(_req(f, "source", path), f"{path}.source"),
            target=_cell(_req(f, "target", path), f"{path}.target"),
            outcome=outcome,
            reason=None if raw_reason is None else _str(raw_reason, f"{path}.reason"),
            demand_prb=_int(_req(f, "demand_prb", path), f"{path}.demand_prb"),
        )


@dataclass(frozen=True)
class ArrivalRecord:
    """A connection attempt; blocked ones count against accessibility."""

    TYPE = "arrival"
    ts: int
    ue: int
    anchor: CellId
    outcome: str  # "admitted" | "blocked"
    cell: Optional[CellId]
    reason: Optional[str]
    demand_prb: int
    qos: QosClass

    def to_fields(self) -> dict:
        return {
            "ue": self.ue,
            "anchor": _cell_json(self.anchor),
            "outcome": self.outcome,
            "cell": None if self.cell is None else _cell_json(self.cell),
            "reason": self.reason,
            "demand_prb": self.demand_prb,
            "qos": self.qos.value,
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "ArrivalRecord":
        outcome = _str(_req(f, "outcome", path), f"{path}.outcome")
        if outcome not in ("admitted", "blocked"):
            raise DecodeError(f"{path}.outcome", f"unknown outcome {outcome!r}")
        raw_cell = _req(f, "cell", path)
        raw_reason = _req(f, "reason", path)
        return cls(
            ts=ts,
            ue=_int(_req(f, "ue", path), f"{path}.ue"),
            anchor=_cell(_req(f, "anchor", path), f"{path}.anchor"),
            outcome=outcome,
            cell=None if raw_cell is None else _cell(raw_cell, f"{path}.cell"),
            reason=None if raw_reason is None else _str(raw_reason, f"{path}.reason"),
            demand_prb=_int(_req(f, "demand_prb", path), f"{path}.demand_prb"),
            qos=_enum(QosClass, _req(f, "qos", path), f"{path}.qos"),
        )


@dataclass(frozen=True)
class DepartureRecord:
    TYPE = "departure"
    ts: int
    ue: int
    cell: CellId
    demand_prb: int

    def to_fields(self) -> dict:
        return {
            "ue": self.ue,
            "cell": _cell_json(self.cell),
            "demand_prb": self.demand_prb,
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "DepartureRecord":
        return cls(
            ts=ts,
            ue=_int(_req(f, "ue", path), f"{path}.ue"),
            cell=_cell(_req(f, "cell", path), f"{path}.cell"),
            demand_prb=_int(_req(f, "demand_prb", path), f"{path}.demand_prb"),
        )


@dataclass(frozen=True)
class EsDecision:
    """Per-sector saving-mode evaluation: observed load, prediction, chosen
    number of awake capacity carriers."""

    TYPE = "es_decision"
    ts: int
    site: int
    sector: int
    observed_util: float
    predicted_util: Optional[float]
    awake_capacity_count: int

    def to_fields(self) -> dict:
        return {
            "site": self.site,
            "sector": self.sector,
            "observed_util": self.observed_util,
            "predicted_util": self.predicted_util,
            "awake_capacity_count": self.awake_capacity_count,
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "EsDecision":
        raw_pred = _req(f, "predicted_util", path)
        return cls(
            ts=ts,
            site=_int(_req(f, "site", path), f"{path}.site"),
            sector=_int(_req(f, "sector", path), f"{path}.sector"),
            observed_util=_num(_req(f, "observed_util", path), f"{path}.observed_util"),
            predicted_util=(
                None if raw_pred is None else _num(raw_pred, f"{path}.predicted_util")
            ),
            awake_capacity_count=_int(
                _req(f, "awake_capacity_count", path), f"{path}.awake_capacity_count"
            ),
        )


@dataclass(frozen=True)
class DrainTimeoutRecord:
    TYPE = "drain_timeout"
    ts: int
    cell: CellId
    epochs: int
    mode: str

    def to_fields(self) -> dict:
        return {"cell": _cell_json(self.cell), "epochs": self.epochs, "mode": self.mode}

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "DrainTimeoutRecord":
        return cls(
            ts=ts,
            cell=_cell(_req(f, "cell", path), f"{path}.cell"),
            epochs=_int(_req(f, "epochs", path), f"{path}.epochs"),
            mode=_str(_req(f, "mode", path), f"{path}.mode"),
        )


@dataclass(frozen=True)
class SubscriptionRecord:
    TYPE = "subscription"
    ts: int
    app: str
    kinds: tuple[str, ...]
    cells: Optional[tuple[CellId, ...]] = None

    def to_fields(self) -> dict:
        return {
            "app": self.app,
            "kinds": list(self.kinds),
            "cells": None if self.cells is None else [_cell_json(c) for c in self.cells],
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "SubscriptionRecord":
        raw_kinds = _req(f, "kinds", path)
        if not isinstance(raw_kinds, list) or not raw_kinds:
            raise DecodeError(f"{path}.kinds", "expected non-empty list")
        raw_cells = _req(f, "cells", path)
        cells = None
        if raw_cells is not None:
            if not isinstance(raw_cells, list):
                raise DecodeError(f"{path}.cells", "expected list or null")
            cells = tuple(_cell(c, f"{path}.cells[{i}]") for i, c in enumerate(raw_cells))
        return cls(
            ts=ts,
            app=_str(_req(f, "app", path), f"{path}.app"),
            kinds=tuple(_str(k, f"{path}.kinds[{i}]") for i, k in enumerate(raw_kinds)),
            cells=cells,
        )


@dataclass(frozen=True)
class ScenarioHeader:
    """First log record: the resolved scenario plus the full topology, making
    a log self-contained for replay."""

    TYPE = "scenario"
    ts: int
    scenario: dict
    topology: dict

    def to_fields(self) -> dict:
        return {"scenario": self.scenario, "topology": self.topology}

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "ScenarioHeader":
        sc = _req(f, "scenario", path)
        topo = _req(f, "topology", path)
        if not isinstance(sc, dict) or not isinstance(topo, dict):
            raise DecodeError(path, "scenario and topology must be objects")
        return cls(ts=ts, scenario=sc, topology=topo)


@dataclass(frozen=True)
class BaselineRecord:
    """Energy of the always-awake shadow pass; absent when the run itself is
    the baseline (saving disabled)."""

    TYPE = "baseline"
    ts: int
    energy_total_j: float
    energy_capacity_j: float

    def to_fields(self) -> dict:
        return {
            "energy_total_j": self.energy_total_j,
            "energy_capacity_j": self.energy_capacity_j,
        }

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "BaselineRecord":
        return cls(
            ts=ts,
            energy_total_j=_num(_req(f, "energy_total_j", path), f"{path}.energy_total_j"),
            energy_capacity_j=_num(
                _req(f, "energy_capacity_j", path), f"{path}.energy_capacity_j"
            ),
        )


@dataclass(frozen=True)
class IntervalEnd:
    TYPE = "interval_end"
    ts: int
    index: int

    def to_fields(self) -> dict:
        return {"index": self.index}

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "IntervalEnd":
        return cls(ts=ts, index=_int(_req(f, "index", path), f"{path}.index"))


@dataclass(frozen=True)
class EndRecord:
    TYPE = "end"
    ts: int
    intervals: int

    def to_fields(self) -> dict:
        return {"intervals": self.intervals}

    @classmethod
    def from_fields(cls, ts: int, f: dict, path: str) -> "EndRecord":
        return cls(ts=ts, intervals=_int(_req(f, "intervals", path), f"{path}.intervals"))


MESSAGE_TYPES = (
    KpmReport,
    RcMeasurement,
    RcNodeInfo,
    RcUeInfo,
    HandoverCommand,
    CccIndication,
    A1PolicyEvent,
    O1Write,
    AuditRecord,
    ArrivalRecord,
    DepartureRecord,
    EsDecision,
    DrainTimeoutRecord,
    SubscriptionRecord,
    ScenarioHeader,
    BaselineRecord,
    IntervalEnd,
    EndRecord,
)

_REGISTRY = {cls.TYPE: cls for cls in MESSAGE_TYPES}


def encode(msg) -> str:
    """One JSON line per message, compact separators, stable field order."""
    body = {"type": msg.TYPE, "ts": msg.ts}
    body.update(msg.to_fields())
    return json.dumps(body, separators=(",", ":"), allow_nan=False)


def decode(line: str | bytes):
    """Parse one line back into its message type.

    Total: any malformed input raises DecodeError, nothing else.
    """
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("$", f"not utf-8: {exc}") from exc
    try:
        obj = json.loads(line)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise DecodeError("$", f"not JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise DecodeError("$", "expected a JSON object")
    kind = obj.get("type")
    cls = _REGISTRY.get(kind)
    if cls is None:
        raise DecodeError("$.type", f"unknown type {kind!r}")
    ts = obj.get("ts")
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise DecodeError("$.ts", f"expected integer, got {ts!r}")
    try:
        return cls.from_fields(ts, obj, f"$.{cls.TYPE}")
    except DecodeError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise DecodeError(f"$.{cls.TYPE}", str(exc)) from exc


def validate_policy(policy: TspPolicy, topology) -> None:
    """Reject policies scoping unknown cells or the coverage layer.

    Forbidding a coverage cell would leave its sector's users with no
    admissible target, so it is refused outright.
    """
    known = set(topology.cell_ids())
    for cid in policy.scope_cells:
        if cid not in known:
            raise UnknownCellError(f"policy {policy.policy_id}: unknown cell {cid.key()}")
    if policy.preference is PolicyPreference.FORBID:
        for cid in policy.scope_cells:
            if topology.band_config(cid.band).role is CellRole.COVERAGE:
                raise CoverageForbiddenError(
                    f"policy {policy.policy_id}: cannot forbid coverage cell {cid.key()}"
                )
