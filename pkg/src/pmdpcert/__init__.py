"""Parametric-MDP verification workbench for the UAV/delivery-robot mission.

Builds gridworld scenarios as parametric MDPs, synthesizes risk-minimizing
policies for the until objective (deliver without a ground collision),
sweeps uncertain connection-loss/recovery parameters, and drives a staged
dynamic-certification ledger over use/context pairs.
"""

from .checker import (
    CheckResult,
    NonConvergence,
    Policy,
    PolicyIncomplete,
    SolverConfig,
    UntilProperty,
    evaluate_policy,
    max_until,
    prob0_max,
    prob1_max,
    simulate,
)
from .expr import (
    Const,
    ParameterRegion,
    Product,
    Sum,
    Var,
    check_distribution_row,
    evaluate,
    is_multi_affine,
    parse_expr,
)
from .model import (
    ConcreteMDP,
    PMDP,
    ParametricDistribution,
    ValuationOutOfRegion,
    instantiate,
    validate,
)
from .scenario import (
    CompositeState,
    Context,
    GridScenario,
    InvalidScenario,
    Mode,
    build_open,
    build_rooftop,
    decode,
    encode,
    reference_open,
    reference_rooftop,
)
from .sweep import (
    GridMode,
    RandomMode,
    SampleRecord,
    SweepResult,
    SweepSpec,
    TiedMode,
    evaluate_fixed_policy_sweep,
    read_csv,
    run_sweep,
    write_csv,
)
from .certify import (
    BaseModelSpec,
    CertificationHarness,
    ContextSpec,
    Ledger,
    LedgerEntry,
    NoFeasibleBound,
    Stage,
    Status,
    UseContextPair,
    Verdict,
    replay,
    suburban_context,
    urban_context,
)

__version__ = "0.1.0"
