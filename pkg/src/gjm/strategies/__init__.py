"""Explicit attack strategies and their verification."""

from .core import (
    BoundViolatedError,
    Instrument,
    PartialParent,
    ReversalInvalidityError,
    Strategy,
    StrategyError,
    SupportViolationError,
    ValidityError,
    VerificationReport,
    mix_with_no_click,
    pp_to_strategy,
    pp_to_witness,
    randomize_to_deterministic,
    strategy_to_pp,
    validate_pp,
    verify_strategy,
)
from .generic import (
    strat_case_d_generic,
    strat_full_jm,
    strat_partial_input,
    strat_partial_outcome_generic,
)
from .qubit import (
    below_bound,
    strat_qubit_case_c,
    strat_qubit_case_c_optimal,
    strat_qubit_case_d,
)
from .io import dumps_strategy, loads_strategy, strategy_from_dict, strategy_to_dict
