"""Selection rules: one-pass transducers from a digit stream to {n_i}.

Every rule consumes the input once, left to right, and yields the selected
1-based positions together with the digit found there. Only
:class:`TwoSidedZero` needs to look one digit ahead.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .digits import DigitStream, from_digits


@dataclass(frozen=True)
class PrefixDFA:
    """Total DFA over the digits ``0 .. base-1``.

    ``transitions[q][d]`` is the successor of state ``q`` on digit ``d``.
    """

    start: int
    transitions: tuple[tuple[int, ...], ...]
    accepting: frozenset[int]

    def __post_init__(self):
        n = len(self.transitions)
        if n == 0:
            raise ValueError("DFA needs at least one state")
        width = len(self.transitions[0])
        if width < 2:
            raise ValueError("DFA alphabet must have at least 2 digits")
        for q, row in enumerate(self.transitions):
            if len(row) != width:
                raise ValueError(f"state {q} has {len(row)} successors, expected {width}")
            for t in row:
                if not 0 <= t < n:
                    raise ValueError(f"state {q} has successor {t} out of range")
        if not 0 <= self.start < n:
            raise ValueError(f"start state {self.start} out of range")
        if not all(0 <= q < n for q in self.accepting):
            raise ValueError("accepting state out of range")

    @property
    def base(self) -> int:
        return len(self.transitions[0])

    @property
    def n_states(self) -> int:
        return len(self.transitions)


def counter_dfa(base: int, k: int, m: int) -> PrefixDFA:
    """DFA accepting exactly the prefixes of length n-1 with n = k, k+m, k+2m, ...

    For k <= m this is the plain m-state cycle accepting residue k-1. For
    k > m a chain of k-1 lead-in states keeps n < k from being accepted.
    """
    if k <= m:
        trans = tuple(((q + 1) % m,) * base for q in range(m))
        return PrefixDFA(0, trans, frozenset({k - 1}))
    lead = k - 1
    rows = [(q + 1,) * base for q in range(lead)]
    rows += [(lead + (c + 1) % m,) * base for c in range(m)]
    return PrefixDFA(0, tuple(rows), frozenset({lead}))


def read_dfa_file(path: str | os.PathLike) -> PrefixDFA:
    """Parse ``states=<n> start=<id>`` / ``accepting=<ids>`` / successor rows."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if len(lines) < 2:
        raise ValueError(f"{path}: DFA file too short")
    m = re.fullmatch(r"states\s*=\s*(\d+)\s+start\s*=\s*(\d+)", lines[0])
    if m is None:
        raise ValueError(f"{path}: bad header line {lines[0]!r}")
    n, start = int(m.group(1)), int(m.group(2))
    m = re.fullmatch(r"accepting\s*=\s*([\d,\s]*)", lines[1])
    if m is None:
        raise ValueError(f"{path}: bad accepting line {lines[1]!r}")
    accepting = frozenset(int(t) for t in re.split(r"[,\s]+", m.group(1)) if t)
    rows = [tuple(int(t) for t in ln.split()) for ln in lines[2:]]
    if len(rows) != n:
        raise ValueError(f"{path}: expected {n} transition rows, found {len(rows)}")
    return PrefixDFA(start, tuple(rows), accepting)


def write_dfa_file(dfa: PrefixDFA, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"states={dfa.n_states} start={dfa.start}\n")
        fh.write("accepting=" + ",".join(map(str, sorted(dfa.accepting))) + "\n")
        for row in dfa.transitions:
            fh.write(" ".join(map(str, row)) + "\n")


# -- rules -----------------------------------------------------------------


class SelectionRule:
    """Base class. Subclasses implement :meth:`_scan`."""

    lookahead = 0
    #: fixed input base, or None if the rule works in any base
    input_base: int | None = None

    def output_base(self, input_base: int) -> int:
        return input_base

    def check_base(self, base: int) -> None:
        if self.input_base is not None and base != self.input_base:
            raise ValueError(
                f"{self.descriptor()} expects base {self.input_base}, stream has base {base}"
            )

    def iter_select(self, stream: DigitStream) -> Iterator[tuple[int, int]]:
        """Yield ``(n, a_n)`` for each selected position, in increasing order."""
        stream.require_finite()
        self.check_base(stream.base)
        return self._scan(iter(stream), stream.base)

    def _scan(self, digits: Iterator[int], base: int) -> Iterator[tuple[int, int]]:
        raise NotImplementedError

    def descriptor(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Arithmetic(SelectionRule):
    """Positions k, k+m, k+2m, ..."""

    k: int = 1
    m: int = 1

    def __post_init__(self):
        if self.k < 1 or self.m < 1:
            raise ValueError(f"arithmetic rule needs k >= 1 and m >= 1, got k={self.k}, m={self.m}")

    def _scan(self, digits, base):
        k, m = self.k, self.m
        for n, d in enumerate(digits, start=1):
            if n >= k and (n - k) % m == 0:
                yield n, d

    def descriptor(self) -> str:
        return f"arithmetic:k={self.k},m={self.m}"


@dataclass(frozen=True)
class Leap(SelectionRule):
    """n_{i+1} = n_i + 1 + a_{n_i}, starting from n_1."""

    n1: int = 1

    def __post_init__(self):
        if self.n1 < 1:
            raise ValueError(f"leap rule needs n1 >= 1, got {self.n1}")

    def _scan(self, digits, base):
        target = self.n1
        for n, d in enumerate(digits, start=1):
            if n == target:
                yield n, d
                target = n + 1 + d

    def descriptor(self) -> str:
        return f"leap:n1={self.n1}"


@dataclass(frozen=True)
class RemoveTop(SelectionRule):
    """Drop every digit equal to b-1; the survivors are read in base b-1."""

    def output_base(self, input_base: int) -> int:
        return input_base - 1

    def check_base(self, base: int) -> None:
        if base < 3:
            raise ValueError(f"remove_top needs input base >= 3, got {base}")

    def _scan(self, digits, base):
        top = base - 1
        for n, d in enumerate(digits, start=1):
            if d < top:
                yield n, d

    def descriptor(self) -> str:
        return "remove_top"


@dataclass(frozen=True)
class Modulo(SelectionRule):
    """Positions n whose prefix digit sum a_1 + ... + a_n is L mod N."""

    L: int = 0
    N: int = 2

    def __post_init__(self):
        if self.N < 2 or not 0 <= self.L < self.N:
            raise ValueError(f"modulo rule needs N >= 2 and 0 <= L < N, got L={self.L}, N={self.N}")

    def _scan(self, digits, base):
        L, N = self.L, self.N
        s = 0
        for n, d in enumerate(digits, start=1):
            s = (s + d) % N
            if s == L:
                yield n, d

    def descriptor(self) -> str:
        return f"modulo:L={self.L},N={self.N}"


@dataclass(frozen=True)
class DfaPrefix(SelectionRule):
    """Select n iff the DFA accepts a_1 ... a_{n-1}."""

    dfa: PrefixDFA = field(default=None)  # type: ignore[assignment]
    source_path: str | None = None

    def __post_init__(self):
        if self.dfa is None:
            raise ValueError("dfa rule needs a DFA")

    @property
    def input_base(self) -> int:  # type: ignore[override]
        return self.dfa.base

    def _scan(self, digits, base):
        trans, acc = self.dfa.transitions, self.dfa.accepting
        q = self.dfa.start
        for n, d in enumerate(digits, start=1):
            if q in acc:
                yield n, d
            q = trans[q][d]

    def descriptor(self) -> str:
        return f"dfa:{self.source_path}" if self.source_path else "dfa:<inline>"


@dataclass(frozen=True)
class TwoSidedZero(SelectionRule):
    """Select n >= 2 iff a_{n-1} = a_{n+1} = 0 (binary). Does not preserve normality."""

    lookahead = 1
    input_base = 2

    def _scan(self, digits, base):
        prev = cur = None
        for n, nxt in enumerate(digits, start=1):
            # n indexes the lookahead digit; decide position n-1
            if prev == 0 and nxt == 0:
                yield n - 1, cur
            prev, cur = cur, nxt

    def descriptor(self) -> str:
        return "two_sided_zero"


# -- running a rule ----------------------------------------------------------


@dataclass(frozen=True)
class Selection:
    indices: list[int]
    output: DigitStream
    input_positions_scanned: int

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def density(self) -> float:
        if self.input_positions_scanned == 0:
            return 0.0
        return len(self.indices) / self.input_positions_scanned


def select(rule: SelectionRule, stream: DigitStream) -> Selection:
    indices: list[int] = []
    out: list[int] = []
    for n, d in rule.iter_select(stream):
        indices.append(n)
        out.append(d)
    return Selection(indices, from_digits(rule.output_base(stream.base), out), len(stream))


_PARAM_RE = re.compile(r"([A-Za-z_]\w*)\s*=\s*(-?\d+)")


def _params(text: str, allowed: Iterable[str], descriptor: str) -> dict[str, int]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        m = _PARAM_RE.fullmatch(part)
        if m is None or m.group(1) not in allowed:
            raise ValueError(f"bad parameter {part!r} in rule {descriptor!r}")
        out[m.group(1)] = int(m.group(2))
    missing = set(allowed) - set(out)
    if missing:
        raise ValueError(f"rule {descriptor!r} missing parameter(s): {', '.join(sorted(missing))}")
    return out


def parse_rule(descriptor: str) -> SelectionRule:
    """Parse the rule grammar used by the CLI and pipeline configs.

    >>> parse_rule("modulo:L=0,N=3")
    Modulo(L=0, N=3)
    """
    name, _, rest = descriptor.strip().partition(":")
    if name == "arithmetic":
        return Arithmetic(**_params(rest, ("k", "m"), descriptor))
    if name == "leap":
        return Leap(**_params(rest, ("n1",), descriptor)) if rest else Leap()
    if name == "modulo":
        return Modulo(**_params(rest, ("L", "N"), descriptor))
    if name == "dfa":
        if not rest:
            raise ValueError("dfa rule needs a path: dfa:<path>")
        return DfaPrefix(read_dfa_file(rest), source_path=rest)
    if rest:
        raise ValueError(f"rule {name!r} takes no parameters")
    if name == "remove_top":
        return RemoveTop()
    if name == "two_sided_zero":
        return TwoSidedZero()
    raise ValueError(f"unknown rule {descriptor!r}")
