"""Interest-scoped peer-to-peer replication with transactions and CRDTs.

Nodes replicate only the data regions they subscribe to and are permitted
to see. Transactions are narrowed to each receiver's interest during sync,
and the ``verify`` module checks recorded executions for atomicity, causal
consistency and convergence restricted to those interests.
"""

from .crdt import (
    CounterAdd,
    LwwRegister,
    ObjectStore,
    PnCounter,
    RegisterWrite,
    Schema,
    SchemaEntry,
    Timestamp,
    TypeMismatch,
    apply_mutation,
    merge_state,
    merge_store,
    read_value,
    state_leq,
)
from .model import (
    InterestSet,
    ObjectPath,
    OpId,
    Operation,
    Region,
    Relation,
    Transaction,
    TransactionId,
    VersionVector,
    classify_session,
    op_matches,
    region_intersection,
    region_relation,
    txn_project,
    vv_covers,
    vv_increment,
    vv_leq,
    vv_merge,
)
from .node import (
    CausalGap,
    EmptyTransaction,
    MalformedBatch,
    NodeState,
    OutOfInterest,
    ReplicationError,
    apply_batch,
    change_interest,
    execute_local_txn,
    state_hash,
)
from .report import build_report
from .scenarios import load_builtin
from .sim import (
    Footprint,
    ProtocolError,
    Scenario,
    ScenarioError,
    TopologySnapshot,
    detect_data_islands,
    load_scenario,
    run_scenario,
    scenario_topology,
    simulate,
)
from .sync import MetadataMode, SessionConfig, Summary, SyncBatch, compute_diff, run_session, validate_batch
from .trace import MalformedTrace, Trace
from .verify import (
    AbstractExecution,
    DisjointSession,
    Violation,
    build_execution,
    check_atomicity,
    check_cc,
    check_convergence,
    check_hierarchy,
    check_interest_config,
    check_intersection_atomicity,
    check_intersection_cc,
    expected_guarantees,
)
