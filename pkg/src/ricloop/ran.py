"""Emulated RAN state: cells, UEs, the sleep-state machine, radio and power models.

The cell energy lifecycle follows the O-CES management attributes
(cesSwitch, energySavingState, energySavingControl). A cell is either
serving normally (isNotEnergySaving), draining toward sleep
(toBeEnergySaving), sleeping (isEnergySaving), or waking up
(toBeNotEnergySaving). Control writes request the transitional states;
only the node itself completes them, via finalize_sleep / finalize_wake.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple, Optional


class RanError(Exception):
    """Base class for RAN-side rule violations."""


class IllegalTransitionError(RanError):
    pass


class CesDisabledError(RanError):
    pass


class UnknownUeError(RanError):
    pass


class CellOccupiedError(RanError):
    """A sleep write targeted a cell that still has RRC connections."""


class EnergyState(str, Enum):
    """energySavingState values of the O-CES management function."""

    IS_NOT_ENERGY_SAVING = "isNotEnergySaving"
    TO_BE_ENERGY_SAVING = "toBeEnergySaving"
    IS_ENERGY_SAVING = "isEnergySaving"
    TO_BE_NOT_ENERGY_SAVING = "toBeNotEnergySaving"


class EnergyControl(str, Enum):
    """energySavingControl values: start or cancel energy saving."""

    TO_BE_ENERGY_SAVING = "toBeEnergySaving"
    TO_BE_NOT_ENERGY_SAVING = "toBeNotEnergySaving"


# Walkable edges of the sleep lifecycle. toBeEnergySaving -> toBeNotEnergySaving
# cancels a drain in progress; everything else is the normal cycle.
LEGAL_TRANSITIONS: dict[EnergyState, frozenset[EnergyState]] = {
    EnergyState.IS_NOT_ENERGY_SAVING: frozenset({EnergyState.TO_BE_ENERGY_SAVING}),
    EnergyState.TO_BE_ENERGY_SAVING: frozenset(
        {EnergyState.IS_ENERGY_SAVING, EnergyState.TO_BE_NOT_ENERGY_SAVING}
    ),
    EnergyState.IS_ENERGY_SAVING: frozenset({EnergyState.TO_BE_NOT_ENERGY_SAVING}),
    EnergyState.TO_BE_NOT_ENERGY_SAVING: frozenset({EnergyState.IS_NOT_ENERGY_SAVING}),
}


class CellRole(str, Enum):
    COVERAGE = "coverage"
    CAPACITY = "capacity"


class QosClass(str, Enum):
    BROADBAND = "broadband"
    VOICE = "voice"


class CellId(NamedTuple):
    """(site, sector, band) triple; unique per topology, orders lexicographically."""

    site: int
    sector: int
    band: int

    def key(self) -> str:
        return f"{self.site}-{self.sector}-{self.band}"

    def sector_id(self) -> tuple[int, int]:
        return (self.site, self.sector)


@dataclass(frozen=True)
class PowerModel:
    """Affine per-interval power draw: fixed cost while awake plus a per-PRB term."""

    p_active_w: float
    p_per_prb_w: float
    p_sleep_w: float

    def __post_init__(self) -> None:
        if self.p_active_w < 0 or self.p_per_prb_w < 0 or self.p_sleep_w < 0:
            raise ValueError("power values must be non-negative")
        if self.p_sleep_w >= self.p_active_w:
            raise ValueError("p_sleep_w must be below p_active_w")


@dataclass(frozen=True)
class RadioConfig:
    """Log-distance path-loss parameters shared by every cell."""

    tx_power_dbm: float = 30.0
    pl0_db: float = 60.0
    pathloss_exponent: float = 3.5
    reference_distance_m: float = 1.0
    measurement_radius_m: float = 1500.0


@dataclass
class Cell:
    """One carrier instance at one sector.

    rrc_connected maps attached UE id to its PRB demand so that releases
    restore the PRB budget without a registry lookup; prb_used always equals
    the sum of those demands.
    """

    id: CellId
    cgi: str
    pci: int
    role: CellRole
    x: float
    y: float
    azimuth_deg: float
    prb_capacity: int
    pathloss_offset_db: float
    power: PowerModel
    ces_switch: bool
    energy_state: EnergyState = EnergyState.IS_NOT_ENERGY_SAVING
    rrc_connected: dict[int, int] = field(default_factory=dict)
    prb_used: int = 0

    @property
    def rrc_count(self) -> int:
        return len(self.rrc_connected)

    @property
    def headroom(self) -> int:
        return self.prb_capacity - self.prb_used

    @property
    def awake(self) -> bool:
        return self.energy_state is EnergyState.IS_NOT_ENERGY_SAVING


@dataclass
class UE:
    id: int
    x: float
    y: float
    demand_prb: int
    qos: QosClass = QosClass.BROADBAND
    serving: Optional[CellId] = None

    def __post_init__(self) -> None:
        if self.demand_prb < 1:
            raise ValueError("demand_prb must be >= 1")


class AdmitResult(str, Enum):
    ADMITTED = "admitted"
    REJECTED_ENERGY_SAVING = "rejected_energy_saving"
    REJECTED_NO_CAPACITY = "rejected_no_capacity"

    @property
    def ok(self) -> bool:
        return self is AdmitResult.ADMITTED


def rsrp(ue: UE, cell: Cell, radio: RadioConfig) -> float:
    """Received power in dBm from `cell` at the UE position.

    Log-distance path loss with a per-band offset; distance clamps to 1 m so
    co-located endpoints stay finite. Deterministic and monotone
    non-increasing in distance.
    """
    d = max(math.hypot(ue.x - cell.x, ue.y - cell.y), 1.0)
    pl = radio.pl0_db + 10.0 * radio.pathloss_exponent * math.log10(
        d / radio.reference_distance_m
    )
    return radio.tx_power_dbm - pl - cell.pathloss_offset_db


def admit(cell: Cell, ue: UE) -> AdmitResult:
    """Attach `ue` to `cell` if the cell is awake and has PRB headroom.

    Rejections do not mutate anything; the caller records them as blocked
    attempts for accessibility accounting.
    """
    if ue.id in cell.rrc_connected:
        raise RanError(f"ue {ue.id} already attached to {cell.id.key()}")
    if cell.energy_state is not EnergyState.IS_NOT_ENERGY_SAVING:
        return AdmitResult.REJECTED_ENERGY_SAVING
    if cell.prb_used + ue.demand_prb > cell.prb_capacity:
        return AdmitResult.REJECTED_NO_CAPACITY
    cell.rrc_connected[ue.id] = ue.demand_prb
    cell.prb_used += ue.demand_prb
    ue.serving = cell.id
    return AdmitResult.ADMITTED


def release(cell: Cell, ue_id: int) -> int:
    """Detach a UE and return the PRB demand it freed."""
    try:
        demand = cell.rrc_connected.pop(ue_id)
    except KeyError:
        raise UnknownUeError(f"ue {ue_id} not attached to {cell.id.key()}") from None
    cell.prb_used -= demand
    return demand


def apply_energy_control(cell: Cell, control: EnergyControl) -> EnergyState:
    """Apply an energySavingControl write to the cell's state machine.

    Requires the cell's ES feature switch and a legal transition; the
    transitional target states are completed later by finalize_sleep or
    finalize_wake.
    """
    if not cell.ces_switch:
        raise CesDisabledError(f"cesSwitch is false on {cell.id.key()}")
    target = (
        EnergyState.TO_BE_ENERGY_SAVING
        if control is EnergyControl.TO_BE_ENERGY_SAVING
        else EnergyState.TO_BE_NOT_ENERGY_SAVING
    )
    if target not in LEGAL_TRANSITIONS[cell.energy_state]:
        raise IllegalTransitionError(
            f"{cell.id.key()}: {cell.energy_state.value} -> {target.value}"
        )
    cell.energy_state = target
    return target


def finalize_sleep(cell: Cell) -> EnergyState:
    """Complete toBeEnergySaving -> isEnergySaving once the cell is empty.

    No-op (never an error) outside that precondition, so the node can poll it.
    """
    if (
        cell.energy_state is EnergyState.TO_BE_ENERGY_SAVING
        and not cell.rrc_connected
    ):
        cell.energy_state = EnergyState.IS_ENERGY_SAVING
    return cell.energy_state


def finalize_wake(cell: Cell) -> EnergyState:
    """Complete toBeNotEnergySaving -> isNotEnergySaving (hardware wake is instant
    at this model's granularity). No-op outside that precondition."""
    if cell.energy_state is EnergyState.TO_BE_NOT_ENERGY_SAVING:
        cell.energy_state = EnergyState.IS_NOT_ENERGY_SAVING
    return cell.energy_state


def interval_energy(cell: Cell, model: PowerModel, interval_s: float) -> float:
    """Energy in joules consumed by the cell over one interval.

    Only a fully sleeping cell draws sleep power; the transitional states
    keep the hardware active.
    """
    if interval_s <= 0:
        raise ValueError("interval_s must be positive")
    if cell.energy_state is EnergyState.IS_ENERGY_SAVING:
        return model.p_sleep_w * interval_s
    return (model.p_active_w + model.p_per_prb_w * cell.prb_used) * interval_s


# Signature of the sink that receives O-CES attribute-change notifications:
# (cell, triggering control or None).
IndicationSink = Callable[[Cell, Optional[EnergyControl]], None]


class O1Attribute(str, Enum):
    ENERGY_SAVING_STATE = "energySavingState"
    CES_SWITCH = "cesSwitch"


class RanModel:
    """Mutable RAN built from a topology: cells plus the attached-UE registry.

    All mutation happens on the event-loop thread. Every O-CES attribute
    change is pushed to `indication_sink` so the broker can fan it out.
    """

    def __init__(self, topology) -> None:
        self.topology = topology
        self.radio: RadioConfig = topology.radio
        self.cells: dict[CellId, Cell] = topology.build_cells()
        self.cell_order: list[CellId] = sorted(self.cells)
        self.ues: dict[int, UE] = {}
        self.indication_sink: Optional[IndicationSink] = None
        # cells grouped per site: co-sited cells share one distance computation
        self._site_groups: list[tuple[float, float, list[tuple[CellId, float]]]] = []
        by_site: dict[int, list[tuple[CellId, float]]] = {}
        for cid in self.cell_order:
            cell = self.cells[cid]
            by_site.setdefault(cid.site, []).append((cid, cell.pathloss_offset_db))
        for site in sorted(by_site):
            first = self.cells[by_site[site][0][0]]
            self._site_groups.append((first.x, first.y, by_site[site]))

    def _notify(self, cell: Cell, control: Optional[EnergyControl]) -> None:
        if self.indication_sink is not None:
            self.indication_sink(cell, control)

    def measurement(self, ue: UE) -> dict[CellId, float]:
        """RSRP map of every cell within the measurement radius, in id order."""
        out: dict[CellId, float] = {}
        radio = self.radio
        r = radio.measurement_radius_m
        for x, y, members in self._site_groups:
            d = math.hypot(ue.x - x, ue.y - y)
            if d > r:
                continue
            pl = radio.pl0_db + 10.0 * radio.pathloss_exponent * math.log10(
                max(d, 1.0) / radio.reference_distance_m
            )
            for cid, offset in members:
                out[cid] = radio.tx_power_dbm - pl - offset
        return out

    def attach(self, ue: UE, cell_id: CellId) -> AdmitResult:
        res = admit(self.cells[cell_id], ue)
        if res.ok:
            self.ues[ue.id] = ue
        return res

    def detach(self, ue_id: int) -> CellId:
        ue = self.ues.pop(ue_id)
        if ue.serving is None:
            raise UnknownUeError(f"ue {ue_id} has no serving cell")
        cell_id = ue.serving
        release(self.cells[cell_id], ue_id)
        ue.serving = None
        return cell_id

    def handover(self, ue_id: int, source: CellId, target: CellId) -> AdmitResult:
        """Move a UE between cells; on admission failure it stays at the source."""
        ue = self.ues.get(ue_id)
        if ue is None or ue.serving != source:
            raise UnknownUeError(f"ue {ue_id} not served by {source.key()}")
        src = self.cells[source]
        demand = release(src, ue_id)
        res = admit(self.cells[target], ue)
        if not res.ok:
            src.rrc_connected[ue_id] = demand
            src.prb_used += demand
            ue.serving = source
        return res

    def control(self, cell_id: CellId, control: EnergyControl) -> EnergyState:
        cell = self.cells[cell_id]
        state = apply_energy_control(cell, control)
        self._notify(cell, control)
        return state

    def finalize_all(self) -> list[CellId]:
        """Node-side completion pass: empty draining cells fall asleep, waking
        cells come up. Returns the cells that changed state."""
        changed: list[CellId] = []
        for cid in self.cell_order:
            cell = self.cells[cid]
            if cell.energy_state is EnergyState.TO_BE_ENERGY_SAVING:
                if finalize_sleep(cell) is EnergyState.IS_ENERGY_SAVING:
                    changed.append(cid)
                    self._notify(cell, None)
            elif cell.energy_state is EnergyState.TO_BE_NOT_ENERGY_SAVING:
                finalize_wake(cell)
                changed.append(cid)
                self._notify(cell, None)
        return changed

    def o1_write(self, cell_id: CellId, attribute: O1Attribute, value) -> None:
        """Management-plane configuration write.

        A sleep write walks the legal path isNot -> toBe -> is in one step and
        therefore requires an empty cell; a wake write walks is -> toBeNot ->
        isNot. Identity writes are no-ops.
        """
        cell = self.cells[cell_id]
        if attribute is O1Attribute.CES_SWITCH:
            value = bool(value)
            if value and cell.role is CellRole.COVERAGE:
                raise RanError("coverage cells never enable energy saving")
            if cell.ces_switch != value:
                cell.ces_switch = value
                self._notify(cell, None)
            return

        state = EnergyState(value)
        if state is cell.energy_state:
            return
        if state is EnergyState.IS_ENERGY_SAVING:
            if cell.energy_state is not EnergyState.IS_NOT_ENERGY_SAVING:
                raise IllegalTransitionError(
                    f"o1 sleep from {cell.energy_state.value} on {cell_id.key()}"
                )
            if cell.rrc_connected:
                raise CellOccupiedError(
                    f"{cell_id.key()} still has {cell.rrc_count} connections"
                )
            if not cell.ces_switch:
                raise CesDisabledError(f"cesSwitch is false on {cell_id.key()}")
            cell.energy_state = EnergyState.TO_BE_ENERGY_SAVING
            self._notify(cell, None)
            cell.energy_state = EnergyState.IS_ENERGY_SAVING
            self._notify(cell, None)
        elif state is EnergyState.IS_NOT_ENERGY_SAVING:
            if cell.energy_state is not EnergyState.IS_ENERGY_SAVING:
                raise IllegalTransitionError(
                    f"o1 wake from {cell.energy_state.value} on {cell_id.key()}"
                )
            cell.energy_state = EnergyState.TO_BE_NOT_ENERGY_SAVING
            self._notify(cell, None)
            cell.energy_state = EnergyState.IS_NOT_ENERGY_SAVING
            self._notify(cell, None)
        else:
            raise IllegalTransitionError(
                f"o1 cannot request transitional state {state.value}"
            )
