"""Near-RT RIC broker: subscriptions, routing, the handover conflict guard,
and the A1 policy store.

The guard is deny-based: a control is rejected when its target cell is
forbidden by a live policy, not fully awake, or out of PRB headroom.
Every submitted control produces exactly one audit record.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .messages import (
    A1PolicyEvent,
    AuditRecord,
    HandoverCommand,
    PolicyPreference,
    SubscriptionRecord,
    TspPolicy,
    validate_policy,
)
from .ran import CellId, EnergyState, RanModel


class RicError(Exception):
    pass


class DuplicatePolicyIdError(RicError):
    pass


class UnknownPolicyIdError(RicError):
    pass


@dataclass(frozen=True)
class Subscription:
    app: str
    kinds: frozenset[str]
    cells: Optional[frozenset[CellId]] = None

    def __post_init__(self) -> None:
        if not self.kinds:
            raise ValueError("subscription needs at least one message kind")

    def matches(self, msg) -> bool:
        if msg.TYPE not in self.kinds:
            return False
        if self.cells is not None:
            cell = getattr(msg, "cell", None)
            if cell is not None and cell not in self.cells:
                return False
        return True


@dataclass
class ControlOutcome:
    status: str  # "success" | "denied" | "failed"
    reason: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "success"


class PolicyStore:
    def __init__(self) -> None:
        self.live: dict[str, TspPolicy] = {}

    def put(self, policy: TspPolicy) -> None:
        if policy.policy_id in self.live:
            raise DuplicatePolicyIdError(policy.policy_id)
        self.live[policy.policy_id] = policy

    def delete(self, policy_id: str) -> TspPolicy:
        try:
            return self.live.pop(policy_id)
        except KeyError:
            raise UnknownPolicyIdError(policy_id) from None

    def forbidden(self, cell: CellId) -> bool:
        return any(
            p.preference is PolicyPreference.FORBID and cell in p.scope_cells
            for p in self.live.values()
        )

    def forbidden_cells(self) -> tuple[CellId, ...]:
        cells = {
            c
            for p in self.live.values()
            if p.preference is PolicyPreference.FORBID
            for c in p.scope_cells
        }
        return tuple(sorted(cells))


class NearRtRic:
    """Broker between the emulated RAN and the apps.

    `emit` persists a record to the event log; `clock` supplies the current
    simulation time. Handlers registered per app receive routed messages in
    app-id order, so delivery is deterministic.
    """

    def __init__(self, ran: RanModel, emit: Callable, clock: Callable[[], int]) -> None:
        self.ran = ran
        self.emit = emit
        self.clock = clock
        self.policies = PolicyStore()
        self.subscriptions: list[Subscription] = []
        self.handlers: dict[str, Callable] = {}
        self._route_cache: dict[str, list[str]] = {}

    def register(self, app_id: str, handler: Callable) -> None:
        self.handlers[app_id] = handler

    def subscribe(
        self,
        app_id: str,
        kinds,
        cells: Optional[frozenset[CellId]] = None,
        record: bool = True,
    ) -> Subscription:
        sub = Subscription(app=app_id, kinds=frozenset(kinds), cells=cells)
        self.subscriptions.append(sub)
        self._route_cache.clear()
        if record:
            self.emit(
                SubscriptionRecord(
                    ts=self.clock(),
                    app=app_id,
                    kinds=tuple(sorted(sub.kinds)),
                    cells=None if cells is None else tuple(sorted(cells)),
                )
            )
        return sub

    def route(self, msg) -> list[str]:
        """App ids whose subscriptions match, in deterministic id order."""
        if not any(s.cells is not None for s in self.subscriptions):
            cached = self._route_cache.get(msg.TYPE)
            if cached is None:
                cached = sorted(
                    {s.app for s in self.subscriptions if msg.TYPE in s.kinds}
                )
                self._route_cache[msg.TYPE] = cached
            return cached
        return sorted({s.app for s in self.subscriptions if s.matches(msg)})

    def deliver(self, msg) -> list[str]:
        apps = self.route(msg)
        for app in apps:
            self.handlers[app](msg)
        return apps

    # -- E2 control -------------------------------------------------------

    def submit_control(self, cmd: HandoverCommand) -> ControlOutcome:
        """Guard, execute, and audit one handover control."""
        target = self.ran.cells.get(cmd.target)
        source = self.ran.cells.get(cmd.source)
        ue = self.ran.ues.get(cmd.ue)
        demand = ue.demand_prb if ue is not None else 0

        if target is None or source is None:
            outcome = ControlOutcome("denied", "unknown_cell")
        elif self.policies.forbidden(cmd.target):
            outcome = ControlOutcome("denied", "policy_forbidden")
        elif target.energy_state is not EnergyState.IS_NOT_ENERGY_SAVING:
            outcome = ControlOutcome("denied", "energy_state_conflict")
        elif ue is None or ue.serving != cmd.source:
            outcome = ControlOutcome("failed", "ue_not_at_source")
        elif target.prb_used + demand > target.prb_capacity:
            outcome = ControlOutcome("denied", "no_capacity")
        else:
            res = self.ran.handover(cmd.ue, cmd.source, cmd.target)
            if res.ok:
                outcome = ControlOutcome("success")
            else:
                outcome = ControlOutcome("failed", res.value)

        self.emit(
            AuditRecord(
                ts=self.clock(),
                ue=cmd.ue,
                source=cmd.source,
                target=cmd.target,
                outcome=outcome.status,
                reason=outcome.reason,
                demand_prb=demand,
            )
        )
        return outcome

    def submit_energy_control(self, cell_id: CellId, control) -> EnergyState:
        """Forward an energySavingControl write to the node; the resulting
        indication is fanned out by the node's sink."""
        return self.ran.control(cell_id, control)

    # -- A1 ----------------------------------------------------------------

    def a1_put(self, policy: TspPolicy) -> None:
        validate_policy(policy, self.ran.topology)
        self.policies.put(policy)
        event = A1PolicyEvent(
            ts=self.clock(),
            op="put",
            policy_id=policy.policy_id,
            policy=policy,
            live_forbidden=self.policies.forbidden_cells(),
        )
        self.emit(event)
        self.deliver(event)

    def a1_delete(self, policy_id: str) -> None:
        self.policies.delete(policy_id)
        event = A1PolicyEvent(
            ts=self.clock(),
            op="delete",
            policy_id=policy_id,
            policy=None,
            live_forbidden=self.policies.forbidden_cells(),
        )
        self.emit(event)
        self.deliver(event)
