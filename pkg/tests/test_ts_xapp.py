import pytest

from ricloop.messages import (
    A1PolicyEvent,
    CccIndication,
    KpmReport,
    PolicyPreference,
    RcMeasurement,
    RcUeInfo,
    TspPolicy,
)
from ricloop.ran import CellId, EnergyControl, EnergyState, QosClass
from ricloop.ric import ControlOutcome
from ricloop.topology import generate_topology
from ricloop.ts_xapp import TrafficSteeringXapp, XappConfig

COV0 = CellId(0, 0, 0)
CAP0 = CellId(0, 0, 1)
CAP0B = CellId(0, 0, 2)
COV1 = CellId(1, 0, 0)
CAP1 = CellId(1, 0, 1)


class SubmitStub:
    def __init__(self):
        self.commands = []
        self.fail_targets = set()

    def __call__(self, cmd):
        self.commands.append(cmd)
        if cmd.target in self.fail_targets:
            return ControlOutcome("denied", "no_capacity")
        return ControlOutcome("success")


@pytest.fixture
def xapp():
    topo = generate_topology(2, 2, 3)
    stub = SubmitStub()
    app = TrafficSteeringXapp(topo, XappConfig(mode="a1"), submit=stub, clock=lambda: 900)
    app.stub = stub
    return app


def feed_ue(app, ue, cell, rsrp, demand=5, qos=QosClass.BROADBAND):
    app.on_message(RcMeasurement(ts=0, ue=ue, rsrp=rsrp))
    app.on_message(
        RcUeInfo(ts=0, ue=ue, event="attach", cell=cell, demand_prb=demand, qos=qos)
    )


def policy_event(op, cells, policy_id="p1"):
    policy = (
        TspPolicy(policy_id, PolicyPreference.FORBID, tuple(cells)) if op == "put" else None
    )
    return A1PolicyEvent(
        ts=900, op=op, policy_id=policy_id, policy=policy,
        live_forbidden=tuple(cells) if op == "put" else (),
    )


def indication(cell, state, ces=True, control=None):
    return CccIndication(
        ts=900, cell=cell, ces_switch=ces, energy_state=state, control=control
    )


class TestSelectTarget:
    def test_strongest_wins(self, xapp):
        feed_ue(xapp, 1, CAP0, {CAP0B: -80.0, CAP1: -95.0})
        assert xapp.select_target(1) == CAP0B

    def test_draining_best_falls_to_second(self, xapp):
        feed_ue(xapp, 1, CAP0, {CAP0B: -80.0, CAP1: -95.0})
        xapp.on_message(indication(CAP0B, EnergyState.TO_BE_ENERGY_SAVING))
        assert xapp.select_target(1) == CAP1

    def test_all_full_returns_none(self, xapp):
        feed_ue(xapp, 1, CAP0, {CAP0B: -80.0, CAP1: -95.0})
        xapp.on_message(KpmReport(ts=0, cell=CAP0B, prb_utilization=1.0, rrc_count=20))
        xapp.on_message(KpmReport(ts=0, cell=CAP1, prb_utilization=1.0, rrc_count=20))
        assert xapp.select_target(1) is None

    def test_tie_breaks_on_load_then_id(self, xapp):
        feed_ue(xapp, 1, COV0, {CAP0B: -80.0, CAP1: -80.0})
        xapp.on_message(KpmReport(ts=0, cell=CAP0B, prb_utilization=0.5, rrc_count=10))
        xapp.on_message(KpmReport(ts=0, cell=CAP1, prb_utilization=0.2, rrc_count=4))
        assert xapp.select_target(1) == CAP1
        xapp.on_message(KpmReport(ts=0, cell=CAP1, prb_utilization=0.5, rrc_count=10))
        assert xapp.select_target(1) == CAP0B

    def test_voice_prefers_coverage_within_margin(self, xapp):
        feed_ue(xapp, 1, CAP0, {COV1: -84.0, CAP1: -80.0}, qos=QosClass.VOICE)
        assert xapp.select_target(1) == COV1

    def test_voice_ignores_coverage_outside_margin(self, xapp):
        feed_ue(xapp, 1, CAP0, {COV1: -90.0, CAP1: -80.0}, qos=QosClass.VOICE)
        assert xapp.select_target(1) == CAP1

    def test_no_measurement_returns_none(self, xapp):
        assert xapp.select_target(77) is None


class TestDrain:
    def test_drains_all_ues_to_best_target(self, xapp):
        for ue in range(10):
            feed_ue(xapp, ue, CAP0, {CAP0: -70.0, CAP1: -80.0, CAP0B: -92.0})
        commands = xapp.drain(CAP0)
        assert len(commands) == 10
        assert {c.target for c in commands} == {CAP1}
        assert [c.ue for c in commands] == sorted(c.ue for c in commands)

    def test_empty_cell_no_commands(self, xapp):
        assert xapp.drain(CAP0) == []

    def test_no_headroom_no_commands(self, xapp):
        feed_ue(xapp, 1, CAP0, {CAP0: -70.0, CAP1: -80.0})
        xapp.on_message(KpmReport(ts=0, cell=CAP1, prb_utilization=1.0, rrc_count=20))
        assert xapp.drain(CAP0) == []

    def test_batch_respects_target_budget(self, xapp):
        # target takes 100 PRB; 30 UEs x 5 PRB offered, only 20 fit
        for ue in range(30):
            feed_ue(xapp, ue, CAP0, {CAP0: -70.0, CAP1: -80.0})
        commands = xapp.drain(CAP0)
        assert len(commands) == 20

    def test_never_targets_draining_cells(self, xapp):
        xapp.on_message(indication(CAP1, EnergyState.TO_BE_ENERGY_SAVING))
        for ue in range(4):
            feed_ue(xapp, ue, CAP0, {CAP0: -70.0, CAP1: -80.0, CAP0B: -90.0})
        xapp.on_message(policy_event("put", [CAP0]))
        targeted = {c.target for c in xapp.stub.commands}
        assert targeted == {CAP0B}
        assert CAP1 not in targeted


class TestPolicyReactions:
    def test_new_forbid_triggers_drain(self, xapp):
        for ue in range(3):
            feed_ue(xapp, ue, CAP0, {CAP0: -70.0, CAP1: -80.0})
        xapp.on_message(policy_event("put", [CAP0]))
        assert len(xapp.stub.commands) == 3
        assert CAP0 in xapp.view.forbidden

    def test_delete_makes_cell_selectable(self, xapp):
        xapp.on_message(policy_event("put", [CAP0]))
        xapp.on_message(policy_event("delete", [], policy_id="p1"))
        assert CAP0 not in xapp.view.forbidden
        feed_ue(xapp, 9, COV0, {CAP0: -70.0})
        assert xapp.select_target(9) == CAP0

    def test_unchanged_scope_is_idempotent(self, xapp):
        for ue in range(3):
            feed_ue(xapp, ue, CAP0, {CAP0: -70.0, CAP1: -80.0})
        xapp.on_message(policy_event("put", [CAP0]))
        n = len(xapp.stub.commands)
        # same live scope delivered again: nothing newly forbidden
        xapp.on_message(policy_event("put", [CAP0], policy_id="p2"))
        assert len(xapp.stub.commands) == n


class TestCccReactions:
    def test_to_be_energy_saving_drains(self, xapp):
        for ue in range(2):
            feed_ue(xapp, ue, CAP0, {CAP0: -70.0, CAP1: -80.0})
        xapp.on_message(indication(CAP0, EnergyState.TO_BE_ENERGY_SAVING,
                                   control=EnergyControl.TO_BE_ENERGY_SAVING))
        assert len(xapp.stub.commands) == 2

    def test_wake_makes_cell_selectable(self, xapp):
        xapp.on_message(indication(CAP0, EnergyState.TO_BE_ENERGY_SAVING))
        xapp.on_message(indication(CAP0, EnergyState.IS_ENERGY_SAVING))
        xapp.on_message(indication(CAP0, EnergyState.TO_BE_NOT_ENERGY_SAVING))
        feed_ue(xapp, 9, COV0, {CAP0: -70.0})
        assert xapp.select_target(9) is None  # not selectable until fully awake
        xapp.on_message(indication(CAP0, EnergyState.IS_NOT_ENERGY_SAVING))
        assert xapp.select_target(9) == CAP0

    def test_ces_switch_only_change_no_drain(self, xapp):
        for ue in range(2):
            feed_ue(xapp, ue, CAP0, {CAP0: -70.0, CAP1: -80.0})
        xapp.on_message(indication(CAP0, EnergyState.IS_NOT_ENERGY_SAVING, ces=False))
        assert xapp.stub.commands == []

    def test_repeated_to_be_indication_no_duplicate_drain(self, xapp):
        for ue in range(2):
            feed_ue(xapp, ue, CAP0, {CAP0: -70.0, CAP1: -80.0})
        xapp.on_message(indication(CAP0, EnergyState.TO_BE_ENERGY_SAVING))
        n = len(xapp.stub.commands)
        xapp.on_message(indication(CAP0, EnergyState.TO_BE_ENERGY_SAVING, ces=False))
        assert len(xapp.stub.commands) == n


class TestPlacement:
    def test_anchor_first(self, xapp):
        xapp.view.ue_rsrp[1] = {COV0: -60.0, CAP0: -70.0}
        assert xapp.place_arrival(1, CAP0, 5, QosClass.BROADBAND) == CAP0

    def test_draining_anchor_redirects_within_sector(self, xapp):
        xapp.on_message(indication(CAP0, EnergyState.TO_BE_ENERGY_SAVING))
        xapp.view.ue_rsrp[1] = {COV0: -60.0, CAP0: -70.0, CAP0B: -75.0, CAP1: -65.0}
        # CAP1 is another sector: not a candidate for this arrival
        assert xapp.place_arrival(1, CAP0, 5, QosClass.BROADBAND) == COV0

    def test_full_sector_blocks(self, xapp):
        for cell in (COV0, CAP0, CAP0B):
            xapp.on_message(KpmReport(ts=0, cell=cell, prb_utilization=1.0, rrc_count=20))
        xapp.view.ue_rsrp[1] = {COV0: -60.0, CAP0: -70.0, CAP0B: -75.0}
        assert xapp.place_arrival(1, CAP0, 5, QosClass.BROADBAND) is None


def test_drain_termination_bound(xapp):
    """With a viable target each epoch, a drain finishes within the initial
    UE count of retry epochs."""
    for ue in range(6):
        feed_ue(xapp, ue, CAP0, {CAP0: -70.0, CAP1: -80.0})
    xapp.on_message(policy_event("put", [CAP0]))
    epochs = 0
    while xapp.view.attached_to(CAP0) and epochs < 6:
        xapp.retry_drains()
        epochs += 1
    assert not xapp.view.attached_to(CAP0)
