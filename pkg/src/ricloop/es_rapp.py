"""Energy Saving rApp.

Predicts near-term load per cell (seasonal-naive blended with a short EWMA),
chooses how many capacity carriers each sector keeps awake under a
hysteresis band with a minimum dwell, and executes sleep/wake either through
A1 FORBID policies plus O1 state writes ("a1" mode) or through
energySavingControl writes on the E2 node ("ccc" mode).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .messages import (
    CccIndication,
    DrainTimeoutRecord,
    EsDecision,
    KpmReport,
    PolicyPreference,
    TspPolicy,
)
from .ran import CellId, EnergyControl, EnergyState, O1Attribute
from .topology import Topology

DAY_S = 86400


class InsufficientHistoryError(Exception):
    pass


@dataclass(frozen=True)
class EsConfig:
    theta_off: float = 0.5
    theta_on: float = 0.8
    min_dwell_s: int = 1800
    horizon_intervals: int = 1
    drain_timeout_epochs: int = 8

    def __post_init__(self) -> None:
        if not (0.0 < self.theta_off < self.theta_on <= 1.0):
            raise ValueError("need 0 < theta_off < theta_on <= 1")
        if self.horizon_intervals < 1:
            raise ValueError("horizon_intervals must be >= 1")
        if self.drain_timeout_epochs < 1:
            raise ValueError("drain_timeout_epochs must be >= 1")


@dataclass(frozen=True)
class EsMode:
    """Saving mode of one sector: how many capacity carriers stay awake."""

    site: int
    sector: int
    awake_capacity_count: int


@dataclass(frozen=True)
class ScriptedAction:
    interval: int
    action: str  # "sleep" | "wake"
    cell: CellId


class LoadHistory:
    """Gap-free utilization samples per cell at trace granularity.

    Lists are trimmed in whole-day chunks so positional index modulo the
    per-day interval count always equals the time-of-day slot.
    """

    def __init__(self, granularity_s: int, capacity_days: int = 7) -> None:
        if DAY_S % granularity_s:
            raise ValueError("granularity must divide one day")
        self.granularity_s = granularity_s
        self.per_day = DAY_S // granularity_s
        self.capacity = capacity_days * self.per_day
        self.values: dict[CellId, list[float]] = {}
        self.length = 0

    def append_batch(self, utils: dict[CellId, float]) -> None:
        for cell, u in utils.items():
            self.values.setdefault(cell, []).append(u)
        self.length += 1
        if self.length > self.capacity:
            for vals in self.values.values():
                del vals[: self.per_day]
            self.length -= self.per_day

    def last(self, cell: CellId) -> float:
        return self.values[cell][-1]

    @property
    def warm(self) -> bool:
        return self.length >= self.per_day


def predict_cell(values: list[float], per_day: int, horizon_intervals: int) -> float:
    """Forecast the sample `horizon_intervals` ahead of the last one.

    Mean of all same-time-of-day samples, blended 0.5/0.5 with an EWMA
    (alpha 0.5) of the last four intervals. Output stays in [0, 1] because
    both parts are convex combinations of past samples.
    """
    n = len(values)
    if n < per_day:
        raise InsufficientHistoryError(f"{n} samples < one day ({per_day})")
    slot = (n + horizon_intervals - 1) % per_day
    seasonal_samples = values[slot::per_day]
    seasonal = sum(seasonal_samples) / len(seasonal_samples)
    tail = values[-4:]
    ewma = tail[0]
    for v in tail[1:]:
        ewma = 0.5 * v + 0.5 * ewma
    return 0.5 * seasonal + 0.5 * ewma


def predict(history: LoadHistory, horizon_intervals: int) -> dict[CellId, float]:
    """Per-cell forecast; any predictor mapping history to [0, 1] plugs in here."""
    return {
        cell: predict_cell(history.values[cell], history.per_day, horizon_intervals)
        for cell in sorted(history.values)
    }


def decide_mode(
    demand_prb: float,
    coverage_capacity: int,
    wake_order_capacities: list[int],
    current_k: int,
    cfg: EsConfig,
) -> int:
    """Smallest awake-carrier count whose projected utilization sits at or
    below theta_off; the count only grows when the current configuration is
    projected above theta_on (hysteresis)."""
    caps = [coverage_capacity]
    for c in wake_order_capacities:
        caps.append(caps[-1] + c)
    k_max = len(wake_order_capacities)

    k_star = k_max
    for k in range(k_max + 1):
        if demand_prb / caps[k] <= cfg.theta_off:
            k_star = k
            break
    if demand_prb / caps[current_k] > cfg.theta_on:
        return max(k_star, min(current_k + 1, k_max))
    if k_star < current_k:
        return k_star
    return current_k


@dataclass
class RappHooks:
    """Protocol surface the rApp drives: A1 and O1 northbound of the RIC,
    E2 energy control through it, plus the event-log emitter."""

    a1_put: Callable[[TspPolicy], None]
    a1_delete: Callable[[str], None]
    o1_write: Callable[[CellId, O1Attribute, object], None]
    e2_control: Callable[[CellId, EnergyControl], None]
    emit: Callable


@dataclass
class _Pending:
    kind: str  # "sleep" | "wake"
    policy_id: Optional[str] = None
    epochs: int = 0


class EnergySavingRapp:
    APP_ID = "es_rapp"

    def __init__(
        self,
        topology: Topology,
        cfg: EsConfig,
        mode: str,
        policy: str,
        granularity_s: int,
        hooks: RappHooks,
        clock: Callable[[], int],
        scripted: tuple[ScriptedAction, ...] = (),
    ) -> None:
        if mode not in ("a1", "ccc"):
            raise ValueError(f"unknown mode {mode!r}")
        if policy not in ("auto", "scripted", "off"):
            raise ValueError(f"unknown saving policy {policy!r}")
        self.topology = topology
        self.cfg = cfg
        self.mode = mode
        self.policy = policy
        self.hooks = hooks
        self.clock = clock
        self.scripted = scripted
        self.history = LoadHistory(granularity_s)
        self.sectors = topology.sectors()
        # static per-sector layout: sleep order is highest band first
        self._sleep_order = {
            s: topology.capacity_cells(*s) for s in self.sectors
        }
        self._sector_cells = {s: topology.sector_cells(*s) for s in self.sectors}
        self._coverage_cap = {}
        self._cell_cap = {}
        cells = topology.build_cells()
        for cid, cell in cells.items():
            self._cell_cap[cid] = cell.prb_capacity
        for s in self.sectors:
            self._coverage_cap[s] = cells[topology.coverage_cell(*s)].prb_capacity
        self._sector_total_cap = {
            s: sum(self._cell_cap[c] for c in self._sector_cells[s])
            for s in self.sectors
        }
        self.sector_k: dict[tuple[int, int], int] = {
            s: len(self._sleep_order[s]) for s in self.sectors
        }
        self.last_change: dict[tuple[int, int], Optional[int]] = {
            s: None for s in self.sectors
        }
        self.pending: dict[CellId, _Pending] = {}
        self.asleep: dict[CellId, Optional[str]] = {}
        self.last_rrc: dict[CellId, int] = {}
        self._staged: dict[CellId, float] = {}

    # -- message handling -----------------------------------------------------

    def on_message(self, msg) -> None:
        if isinstance(msg, KpmReport):
            self._staged[msg.cell] = msg.prb_utilization
            self.last_rrc[msg.cell] = msg.rrc_count
            self._monitor_drain(msg.cell)
        elif isinstance(msg, CccIndication):
            self._on_indication(msg)

    def _monitor_drain(self, cell: CellId) -> None:
        # a1-mode sleep completes once the monitored RRC count reaches zero
        p = self.pending.get(cell)
        if (
            p is not None
            and p.kind == "sleep"
            and self.mode == "a1"
            and self.last_rrc.get(cell) == 0
        ):
            self.hooks.o1_write(
                cell, O1Attribute.ENERGY_SAVING_STATE, EnergyState.IS_ENERGY_SAVING
            )
            self.asleep[cell] = p.policy_id
            del self.pending[cell]

    def _on_indication(self, ind: CccIndication) -> None:
        p = self.pending.get(ind.cell)
        if p is None:
            return
        if p.kind == "sleep" and ind.energy_state is EnergyState.IS_ENERGY_SAVING:
            self.asleep[ind.cell] = p.policy_id
            del self.pending[ind.cell]
        elif p.kind == "wake" and ind.energy_state is EnergyState.IS_NOT_ENERGY_SAVING:
            del self.pending[ind.cell]

    # -- the non-RT tick --------------------------------------------------------

    def step(self, t: int, interval_index: int) -> None:
        """Run once per interval after the report batch landed: commit history,
        age pending drains, fire scripted actions, then decide per sector."""
        self.history.append_batch(self._staged)
        self._staged = {}
        self._tick_pending(t)
        if self.policy == "scripted":
            self._run_scripted(t, interval_index)
        for sector in self.sectors:
            self._evaluate_sector(sector, t)

    def _tick_pending(self, t: int) -> None:
        for cell in sorted(self.pending):
            p = self.pending[cell]
            p.epochs += 1
            if p.kind == "sleep" and p.epochs >= self.cfg.drain_timeout_epochs:
                self._abort_sleep(cell, p, t)

    def _abort_sleep(self, cell: CellId, p: _Pending, t: int) -> None:
        """Drain never finished: restore the cell to service and back off."""
        self.hooks.emit(
            DrainTimeoutRecord(ts=t, cell=cell, epochs=p.epochs, mode=self.mode)
        )
        if self.mode == "a1":
            if p.policy_id is not None:
                self.hooks.a1_delete(p.policy_id)
        else:
            self.hooks.e2_control(cell, EnergyControl.TO_BE_NOT_ENERGY_SAVING)
        del self.pending[cell]
        sector = cell.sector_id()
        self.sector_k[sector] = min(
            self.sector_k[sector] + 1, len(self._sleep_order[sector])
        )
        self.last_change[sector] = t

    def _run_scripted(self, t: int, interval_index: int) -> None:
        for action in self.scripted:
            if action.interval != interval_index:
                continue
            sector = action.cell.sector_id()
            if action.action == "sleep":
                self._sleep_cell(action.cell)
                self.sector_k[sector] -= 1
            else:
                self._wake_cell(action.cell)
                self.sector_k[sector] += 1
            self.last_change[sector] = t

    def _evaluate_sector(self, sector: tuple[int, int], t: int) -> None:
        cells = self._sector_cells[sector]
        total_cap = self._sector_total_cap[sector]
        observed = (
            sum(self.history.last(c) * self._cell_cap[c] for c in cells) / total_cap
            if self.history.length
            else 0.0
        )
        current = self.sector_k[sector]
        predicted: Optional[float] = None

        if self.policy == "auto" and not any(c in self.pending for c in cells):
            try:
                preds = {
                    c: predict_cell(
                        self.history.values[c],
                        self.history.per_day,
                        self.cfg.horizon_intervals,
                    )
                    for c in cells
                }
            except (InsufficientHistoryError, KeyError):
                preds = None
            if preds is not None:
                demand = sum(preds[c] * self._cell_cap[c] for c in cells)
                predicted = demand / total_cap
                wake_caps = [
                    self._cell_cap[c] for c in reversed(self._sleep_order[sector])
                ]
                k = decide_mode(
                    demand, self._coverage_cap[sector], wake_caps, current, self.cfg
                )
                last = self.last_change[sector]
                if k != current and (last is None or t - last >= self.cfg.min_dwell_s):
                    self._execute(sector, k, t)
                    current = k

        self.hooks.emit(
            EsDecision(
                ts=t,
                site=sector[0],
                sector=sector[1],
                observed_util=observed,
                predicted_util=predicted,
                awake_capacity_count=current,
            )
        )

    def _execute(self, sector: tuple[int, int], target_k: int, t: int) -> None:
        current = self.sector_k[sector]
        sleep_order = self._sleep_order[sector]
        if target_k < current:
            awake = [c for c in sleep_order if c not in self.asleep and c not in self.pending]
            for cell in awake[: current - target_k]:
                self._sleep_cell(cell)
        else:
            sleeping = [c for c in reversed(sleep_order) if c in self.asleep]
            for cell in sleeping[: target_k - current]:
                self._wake_cell(cell)
        self.sector_k[sector] = target_k
        self.last_change[sector] = t

    def _sleep_cell(self, cell: CellId) -> None:
        if self.mode == "a1":
            policy_id = f"forbid-{cell.key()}"
            self.hooks.a1_put(
                TspPolicy(
                    policy_id=policy_id,
                    preference=PolicyPreference.FORBID,
                    scope_cells=(cell,),
                )
            )
            self.pending[cell] = _Pending(kind="sleep", policy_id=policy_id)
            # the policy delivery may already have drained the cell; if the
            # last report showed it empty the state write can go out now
            self._monitor_drain(cell)
        else:
            self.hooks.e2_control(cell, EnergyControl.TO_BE_ENERGY_SAVING)
            self.pending[cell] = _Pending(kind="sleep")

    def _wake_cell(self, cell: CellId) -> None:
        policy_id = self.asleep.pop(cell, None)
        if self.mode == "a1":
            self.hooks.o1_write(
                cell, O1Attribute.ENERGY_SAVING_STATE, EnergyState.IS_NOT_ENERGY_SAVING
            )
            if policy_id is not None:
                self.hooks.a1_delete(policy_id)
        else:
            self.hooks.e2_control(cell, EnergyControl.TO_BE_NOT_ENERGY_SAVING)
            self.pending[cell] = _Pending(kind="wake")
