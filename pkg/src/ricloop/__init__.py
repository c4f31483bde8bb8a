"""Discrete-event simulator of a RIC-driven energy-saving / traffic-steering
control loop: an emulated multi-carrier RAN, a near-RT broker with a conflict
guard, a traffic-steering app, and an energy-saving app coordinated through
A1 policies or O-CES state-change indications."""

from .engine import (
    ConfigError,
    EngineError,
    NonQuiescenceError,
    RunResult,
    Scenario,
    build_scenario,
    load_scenario,
    run_scenario,
)
from .es_rapp import (
    EnergySavingRapp,
    EsConfig,
    EsMode,
    InsufficientHistoryError,
    LoadHistory,
    decide_mode,
    predict,
    predict_cell,
)
from .messages import (
    CccIndication,
    DecodeError,
    HandoverCommand,
    KpmReport,
    TspPolicy,
    decode,
    encode,
    validate_policy,
)
from .metrics import CorruptLogError, LogAudit, MetricsReport, audit_log, compute_metrics, replay
from .ran import (
    AdmitResult,
    Cell,
    CellId,
    CellRole,
    EnergyControl,
    EnergyState,
    PowerModel,
    QosClass,
    RadioConfig,
    RanModel,
    UE,
    admit,
    apply_energy_control,
    finalize_sleep,
    finalize_wake,
    interval_energy,
    release,
    rsrp,
)
from .ric import ControlOutcome, NearRtRic, PolicyStore, Subscription
from .topology import Topology, generate_topology, load_topology, save_topology
from .traffic import DiurnalConfig, TrafficTrace, load_trace, synth_diurnal, ue_events, write_trace
from .ts_xapp import TrafficSteeringXapp, TsWorldView, XappConfig

__version__ = "0.1.0"
