"""Normality-preserving selection rules on base-b digit streams."""

__version__ = "0.1.0"

from .digits import (
    DigitStream,
    from_digits,
    gen_champernowne,
    gen_constant,
    gen_periodic,
    gen_seeded_uniform,
    read_digit_file,
    write_digit_file,
)
from .rules import (
    Arithmetic,
    DfaPrefix,
    Leap,
    Modulo,
    PrefixDFA,
    RemoveTop,
    Selection,
    TwoSidedZero,
    parse_rule,
    select,
)

__all__ = [
    "Arithmetic",
    "DfaPrefix",
    "DigitStream",
    "Leap",
    "Modulo",
    "PrefixDFA",
    "RemoveTop",
    "Selection",
    "TwoSidedZero",
    "from_digits",
    "gen_champernowne",
    "gen_constant",
    "gen_periodic",
    "gen_seeded_uniform",
    "parse_rule",
    "read_digit_file",
    "select",
    "write_digit_file",
]
