"""plancache: a 2-gram plan-transition cache with an asynchronous
oracle updater, plus a deterministic multi-agent gridworld harness."""

from .cache import (
    CacheEntry,
    FieldSchema,
    FieldSpec,
    FormatError,
    MetadataRange,
    PlanCache,
    PlanStats,
    PrefillTransition,
    SchemaMismatch,
    StateVector,
)
from .gridworld import GRIDWORLD_SCHEMA, GridWorld, Observation, PlanInstance, world_from_scenario
from .metrics import (
    EpisodeReport,
    derive_report,
    derive_reports,
    extract_prefill,
    locality_table,
    plan_execution_accuracy,
)
from .planners import (
    CostModel,
    DelayedPlanner,
    LatencySpec,
    OracleUnavailable,
    PlannerRequest,
    PlannerResponse,
    RemotePlanner,
    ScriptedOracle,
    cost_of,
    scripted_plan,
)
from .plans import PlanId, PlanKind
from .strategies import StrategyConfig, run_batch, run_episode
from .trace import EventKind, TraceEvent, read_trace, write_trace
from .updater import CacheUpdater, Outcome, StaleResponse

__version__ = "0.1.0"
