from .formula import (
    BoxPredicate,
    Formula,
    Predicate,
    always,
    conj,
    disj,
    eventually,
    formula_horizon,
    implies,
    interval_endpoints,
    neg,
    pred,
    robustness_lipschitz_bound,
    to_text,
    true,
    until,
)
from .parser import STLSyntaxError, parse_formula
from .robustness import (
    HorizonError,
    NotAligned,
    Signal,
    UniformGridEvaluator,
    robustness,
    robustness_at,
    satisfies,
)
