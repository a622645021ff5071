"""Blockchain-assisted maritime sulfur-emission compliance monitoring, simulated at desk scale."""

from .compliance import ComplianceResult, evaluate, evaluate_sulfur, sulfur_limit
from .consensus import Validator, ValidatorSet, detect_and_slash, select_proposer, slash, vote
from .contracts import CallContext, ContractWorld, GasReceipt, GasSchedule, Role, charge_gas, replay
from .geofence import DEFAULT_ATLAS, EcaAtlas, EcaRegion, is_in_eca, load_atlas
from .ledger import (
    Block,
    Chain,
    LedgerEntry,
    append_block,
    assemble_block,
    generate_compliance_id,
    load,
    persist,
    verify_chain,
)
from .model import (
    SULFUR_REGULATION,
    DataPoint,
    Digest,
    GeoPosition,
    SensorReading,
    VesselIdentity,
    canonical_encode,
    hash_data_point,
)
from .reporting import cost_report, render_csv, render_text
from .simnet import FleetScenario, Simulation, load_scenario, run_scenario
from .validation import (
    ConsistencyConfig,
    ConsistencyTracker,
    ValidationRules,
    mark_suspect,
    pair_consistency,
    validate,
    window_score,
)

__version__ = "0.1.0"
