"""Loop-free reward-program language over imaging primitives."""
from .builtins import REGISTRY, reference_card
from .errors import (
    DegenerateGeometry, DivisionByZero, EvalError, FuelExhausted, MissingReturn,
    MissingStoreKey, ParseError, RangeError, RewardLangError, RuntimeTypeError,
    UnboundVariable, WrongEntrypoint,
)
from .formatter import format_expr, format_program
from .interpreter import (
    DEFAULT_FUEL, CachedEvaluator, EvalContext, eval_check, eval_identify, eval_reward, evaluate,
)
from .parser import parse, tokenize
from .syntax import Kind, Program
from .values import Detection

__all__ = [
    "REGISTRY", "DEFAULT_FUEL", "CachedEvaluator", "DegenerateGeometry", "Detection",
    "DivisionByZero", "EvalContext", "EvalError", "FuelExhausted", "Kind", "MissingReturn",
    "MissingStoreKey", "ParseError", "Program", "RangeError", "RewardLangError",
    "RuntimeTypeError", "UnboundVariable", "WrongEntrypoint", "eval_check", "eval_identify",
    "eval_reward", "evaluate", "format_expr", "format_program", "parse", "reference_card", "tokenize",
]
