"""Traffic Steering xApp.

Keeps a world view built purely from received messages (load reports, RSRP
measurements, UE attach/detach, policy events, O-CES indications), drains
cells that are forbidden or entering energy saving, and picks handover /
arrival targets by radio quality with load- and id-based tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .messages import (
    A1PolicyEvent,
    CccIndication,
    HandoverCommand,
    KpmReport,
    RcMeasurement,
    RcUeInfo,
)
from .ran import CellId, CellRole, EnergyState, QosClass
from .ric import ControlOutcome
from .topology import Topology


@dataclass(frozen=True)
class XappConfig:
    mode: str = "a1"  # "a1": react to policy events; "ccc": react to indications
    voice_coverage_margin_db: float = 6.0

    def __post_init__(self) -> None:
        if self.mode not in ("a1", "ccc"):
            raise ValueError(f"unknown mode {self.mode!r}")


class TsWorldView:
    """Message-derived picture of the network.

    assumed_prb tracks the load the xApp believes each cell carries: reset by
    every load report, adjusted optimistically as the xApp issues commands or
    sees attaches, so a burst of handovers within one epoch cannot overshoot
    a target's budget.
    """

    def __init__(self, topology: Topology) -> None:
        cells = topology.build_cells()
        self.capacity: dict[CellId, int] = {c: cells[c].prb_capacity for c in cells}
        self.role: dict[CellId, CellRole] = {c: cells[c].role for c in cells}
        self.assumed_prb: dict[CellId, float] = {c: 0.0 for c in cells}
        self.rrc: dict[CellId, int] = {c: 0 for c in cells}
        self.ue_rsrp: dict[int, dict[CellId, float]] = {}
        self.ue_serving: dict[int, CellId] = {}
        self.ue_demand: dict[int, int] = {}
        self.ue_qos: dict[int, QosClass] = {}
        self.serving_sets: dict[CellId, set[int]] = {c: set() for c in cells}
        self.forbidden: frozenset[CellId] = frozenset()
        self.energy_state: dict[CellId, EnergyState] = {}

    def state_of(self, cell: CellId) -> EnergyState:
        return self.energy_state.get(cell, EnergyState.IS_NOT_ENERGY_SAVING)

    @property
    def draining(self) -> set[CellId]:
        out = {
            c
            for c, s in self.energy_state.items()
            if s is EnergyState.TO_BE_ENERGY_SAVING
        }
        out.update(self.forbidden)
        return out

    def candidate(self, cell: CellId, demand_prb: int) -> bool:
        """May the cell take one more UE of this demand, as far as we know?"""
        if cell in self.forbidden:
            return False
        if self.state_of(cell) is not EnergyState.IS_NOT_ENERGY_SAVING:
            return False
        return self.assumed_prb[cell] + demand_prb <= self.capacity[cell]

    def utilization(self, cell: CellId) -> float:
        return self.assumed_prb[cell] / self.capacity[cell]

    def attached_to(self, cell: CellId) -> list[int]:
        return sorted(self.serving_sets[cell])


class TrafficSteeringXapp:
    APP_ID = "ts_xapp"

    def __init__(
        self,
        topology: Topology,
        cfg: XappConfig,
        submit: Callable[[HandoverCommand], ControlOutcome],
        clock: Callable[[], int],
    ) -> None:
        self.cfg = cfg
        self.view = TsWorldView(topology)
        self._submit = submit
        self._clock = clock
        self._sector_cells: dict[CellId, list[CellId]] = {}
        for cid in topology.cell_ids():
            self._sector_cells[cid] = topology.sector_cells(cid.site, cid.sector)

    # -- message handling ---------------------------------------------------

    def on_message(self, msg) -> None:
        if isinstance(msg, KpmReport):
            self.view.assumed_prb[msg.cell] = msg.prb_utilization * self.view.capacity[msg.cell]
            self.view.rrc[msg.cell] = msg.rrc_count
        elif isinstance(msg, RcMeasurement):
            self.view.ue_rsrp[msg.ue] = dict(msg.rsrp)
        elif isinstance(msg, RcUeInfo):
            self._on_ue_info(msg)
        elif isinstance(msg, CccIndication):
            self.on_ccc_indication(msg)
        elif isinstance(msg, A1PolicyEvent):
            self.on_policy_change(msg)

    def _on_ue_info(self, msg: RcUeInfo) -> None:
        if msg.event == "attach":
            self.view.ue_serving[msg.ue] = msg.cell
            self.view.ue_demand[msg.ue] = msg.demand_prb
            self.view.ue_qos[msg.ue] = msg.qos
            self.view.serving_sets[msg.cell].add(msg.ue)
            self.view.assumed_prb[msg.cell] += msg.demand_prb
        else:
            self.view.assumed_prb[msg.cell] -= msg.demand_prb
            self.forget_ue(msg.ue)

    def forget_ue(self, ue: int) -> None:
        serving = self.view.ue_serving.pop(ue, None)
        if serving is not None:
            self.view.serving_sets[serving].discard(ue)
        self.view.ue_demand.pop(ue, None)
        self.view.ue_qos.pop(ue, None)
        self.view.ue_rsrp.pop(ue, None)

    def on_policy_change(self, event: A1PolicyEvent) -> int:
        """Recompute the forbidden set; drain newly forbidden cells.

        Re-delivery of an unchanged scope drains nothing, and deleted scopes
        simply become selectable again.
        """
        new = frozenset(event.live_forbidden)
        newly = new - self.view.forbidden
        self.view.forbidden = new
        submitted = 0
        for cell in sorted(newly):
            submitted += self._submit_commands(self.drain(cell))
        return submitted

    def on_ccc_indication(self, ind: CccIndication) -> int:
        """Track O-CES state; a cell entering toBeEnergySaving gets drained,
        one back at isNotEnergySaving becomes selectable again."""
        previous = self.view.state_of(ind.cell)
        self.view.energy_state[ind.cell] = ind.energy_state
        if (
            ind.energy_state is EnergyState.TO_BE_ENERGY_SAVING
            and previous is not EnergyState.TO_BE_ENERGY_SAVING
        ):
            return self._submit_commands(self.drain(ind.cell))
        return 0

    # -- target selection ----------------------------------------------------

    def select_target(
        self,
        ue: int,
        exclude: frozenset[CellId] = frozenset(),
        candidates: Optional[Iterable[CellId]] = None,
    ) -> Optional[CellId]:
        """Best admissible cell for a UE.

        Highest RSRP wins; ties break on lower utilization, then lower cell
        id. Voice UEs divert to a coverage cell whenever one is within the
        configured margin of the best candidate.
        """
        rsrp = self.view.ue_rsrp.get(ue)
        if not rsrp:
            return None
        demand = self.view.ue_demand[ue]
        pool = rsrp.keys() if candidates is None else candidates
        viable = [
            c
            for c in pool
            if c in rsrp and c not in exclude and self.view.candidate(c, demand)
        ]
        if not viable:
            return None

        def rank(c: CellId):
            return (-rsrp[c], self.view.utilization(c), c)

        best = min(viable, key=rank)
        if self.view.ue_qos.get(ue) is QosClass.VOICE:
            margin = self.cfg.voice_coverage_margin_db
            coverage = [
                c
                for c in viable
                if self.view.role[c] is CellRole.COVERAGE
                and rsrp[c] >= rsrp[best] - margin
            ]
            if coverage:
                best = min(coverage, key=rank)
        return best

    def drain(self, cell: CellId) -> list[HandoverCommand]:
        """Commands that move every movable UE off the cell.

        UEs with no viable target are left attached and retried on the next
        report epoch. The view's assumed load is adjusted per command so one
        drain burst spreads according to real headroom.
        """
        commands: list[HandoverCommand] = []
        for ue in self.view.attached_to(cell):
            target = self.select_target(ue, exclude=frozenset({cell}))
            if target is None:
                continue
            demand = self.view.ue_demand[ue]
            self.view.assumed_prb[target] += demand
            self.view.assumed_prb[cell] -= demand
            commands.append(
                HandoverCommand(ts=self._clock(), ue=ue, source=cell, target=target)
            )
        return commands

    def place_arrival(
        self, ue: int, anchor: CellId, demand_prb: int, qos: QosClass
    ) -> Optional[CellId]:
        """Admission target for a new connection offered at `anchor`.

        The anchor takes it whenever it is selectable with headroom; a
        sleeping, draining, or full anchor redirects the arrival to the best
        cell of the same sector.
        """
        self.view.ue_demand[ue] = demand_prb
        self.view.ue_qos[ue] = qos
        if self.view.candidate(anchor, demand_prb):
            return anchor
        return self.select_target(
            ue, exclude=frozenset({anchor}), candidates=self._sector_cells[anchor]
        )

    # -- drain execution -------------------------------------------------------

    def _submit_commands(self, commands: list[HandoverCommand]) -> int:
        done = 0
        for cmd in commands:
            outcome = self._submit(cmd)
            if outcome.ok:
                self.view.ue_serving[cmd.ue] = cmd.target
                self.view.serving_sets[cmd.source].discard(cmd.ue)
                self.view.serving_sets[cmd.target].add(cmd.ue)
                done += 1
            else:
                demand = self.view.ue_demand[cmd.ue]
                self.view.assumed_prb[cmd.target] -= demand
                self.view.assumed_prb[cmd.source] += demand
        return done

    def retry_drains(self) -> int:
        """Re-drain every cell still in the draining set; returns the number
        of commands submitted (zero means the xApp is quiescent)."""
        submitted = 0
        for cell in sorted(self.view.draining):
            if self.view.attached_to(cell):
                commands = self.drain(cell)
                submitted += len(commands)
                self._submit_commands(commands)
        return submitted
