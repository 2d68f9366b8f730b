"""Correct-by-construction system substitution over finite guarded-event machines."""

from .kernel import (
    CompoundState,
    GuardedEvent,
    Machine,
    Param,
    SystemDef,
    SystemsPartition,
    Valuation,
    VarDecl,
    enabled,
    initialize,
    step,
    variant_value,
)
from .obligations import (
    ObligationReport,
    RefinementLink,
    check_invariants,
    check_refinement,
    check_variant,
    reachable,
)
from .substitution import (
    AtStep,
    Manual,
    Policy,
    SubstitutionConfig,
    WhenPred,
    recover_state,
    run_scenario,
    switch,
    variant_match,
)

__version__ = "0.1.0"
