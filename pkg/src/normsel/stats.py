"""Overlapping block censuses and normality diagnostics.

Blocks are encoded as integers, most significant digit first, so the block
``(c_1, ..., c_j)`` in base b is ``c_1 b^{j-1} + ... + c_j``. Counts are kept
sparsely (only blocks that occur), which keeps large bases cheap.
"""

from __future__ import annotations

import csv
import os
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .automata import AugmentedAutomaton, AutomatonRun, visit_ratio
from .digits import DigitStream

DEFAULT_KMAX = 3
DEFAULT_THRESHOLDS = {1: 0.01, 2: 0.02}


class EmptyStreamError(ValueError):
    pass


def encode(block: Sequence[int], base: int) -> int:
    code = 0
    for d in block:
        code = code * base + int(d)
    return code


def decode(code: int, base: int, j: int) -> tuple[int, ...]:
    out = []
    for _ in range(j):
        code, r = divmod(code, base)
        out.append(r)
    return tuple(reversed(out))


@dataclass
class BlockCensus:
    """Counts of every overlapping block of length 1..kmax.

    ``head``/``tail`` keep the first and last ``kmax - 1`` digits so that two
    censuses of adjacent chunks can be merged exactly.
    """

    base: int
    kmax: int
    positions: int = 0
    counts: dict[int, Counter] = field(default_factory=dict)
    head: tuple[int, ...] = ()
    tail: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kmax < 1:
            raise ValueError("kmax must be >= 1")
        if self.base ** self.kmax >= 2**62:
            raise ValueError("base**kmax too large for integer block codes")
        for j in range(1, self.kmax + 1):
            self.counts.setdefault(j, Counter())

    def count(self, block: Sequence[int]) -> int:
        return self.counts[len(block)][encode(block, self.base)]

    def total(self, j: int) -> int:
        return sum(self.counts[j].values())

    def windows(self, j: int) -> int:
        """Number of length-j windows, max(positions - j + 1, 0)."""
        return max(self.positions - j + 1, 0)

    def frequency(self, block: Sequence[int]) -> float:
        w = self.windows(len(block))
        if w == 0:
            raise EmptyStreamError("no windows of this length")
        return self.count(block) / w

    def blocks(self, j: int) -> dict[tuple[int, ...], int]:
        return {decode(c, self.base, j): n for c, n in sorted(self.counts[j].items())}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BlockCensus):
            return NotImplemented
        return (
            self.base == other.base
            and self.kmax == other.kmax
            and self.positions == other.positions
            and all(+self.counts[j] == +other.counts[j] for j in self.counts)
            and self.head == other.head
            and self.tail == other.tail
        )


def _count_array(census: BlockCensus, arr: np.ndarray, first_new: int) -> None:
    """Add every block of ``arr`` that ends at index >= first_new."""
    b = census.base
    n = len(arr)
    for j in range(1, census.kmax + 1):
        if n < j:
            break
        codes = np.zeros(n - j + 1, dtype=np.int64)
        for t in range(j):
            codes = codes * b + arr[t : n - j + 1 + t]
        # block starting at i ends at i + j - 1
        lo = max(first_new - j + 1, 0)
        codes = codes[lo:]
        if len(codes):
            vals, cnts = np.unique(codes, return_counts=True)
            census.counts[j].update(dict(zip(vals.tolist(), cnts.tolist())))


def census(stream: DigitStream | Iterable[np.ndarray], kmax: int = DEFAULT_KMAX, base: int | None = None) -> BlockCensus:
    """Count every overlapping block of length 1..kmax in one streaming pass."""
    if isinstance(stream, DigitStream):
        stream.require_finite()
        base, chunks = stream.base, stream.chunks()
    else:
        if base is None:
            raise ValueError("base required when counting raw chunks")
        chunks = stream
    c = BlockCensus(base, kmax)
    keep = kmax - 1
    carry = np.zeros(0, dtype=np.int64)
    head: list[int] = []
    for chunk in chunks:
        chunk = np.asarray(chunk, dtype=np.int64)
        if not len(chunk):
            continue
        if len(head) < keep:
            head.extend(chunk[: keep - len(head)].tolist())
        arr = np.concatenate([carry, chunk])
        _count_array(c, arr, len(carry))
        c.positions += len(chunk)
        carry = arr[max(len(arr) - keep, 0) :] if keep else arr[:0]
    c.head = tuple(head)
    c.tail = tuple(carry.tolist())
    return c


def census_of(digits: Sequence[int], base: int, kmax: int = DEFAULT_KMAX) -> BlockCensus:
    return census([np.asarray(digits, dtype=np.int64)], kmax, base)


def merge(c1: BlockCensus, c2: BlockCensus, seam_digits: Sequence[int] | None = None) -> BlockCensus:
    """Census of the concatenation of the two chunks.

    ``seam_digits`` is the last kmax-1 digits of the first chunk followed by
    the first kmax-1 of the second; when omitted it is taken from the
    censuses' own head/tail. Only blocks crossing the seam are recounted.
    """
    if (c1.base, c1.kmax) != (c2.base, c2.kmax):
        raise ValueError("can only merge censuses with the same base and kmax")
    keep = c1.kmax - 1
    left, right = c1.tail, c2.head
    if seam_digits is not None:
        seam = tuple(int(d) for d in seam_digits)
        if seam != left + right:
            raise ValueError("seam digits do not match the chunk boundary")
    out = BlockCensus(c1.base, c1.kmax, c1.positions + c2.positions)
    for j in out.counts:
        out.counts[j] = c1.counts[j] + c2.counts[j]
    seam = left + right
    for j in range(2, c1.kmax + 1):
        for i in range(max(len(left) - j + 1, 0), len(left)):
            if i + j <= len(seam):
                out.counts[j][encode(seam[i : i + j], c1.base)] += 1
    out.head = (c1.head + c2.head)[:keep] if len(c1.head) < keep else c1.head
    out.tail = (c1.tail + c2.tail)[-keep:] if keep and len(c2.tail) < keep else c2.tail
    return out


def max_deviation(c: BlockCensus, j: int) -> float:
    """max over all b^j blocks of |frequency - b^-j|, unseen blocks included."""
    w = c.windows(j)
    if w == 0:
        raise EmptyStreamError("empty stream")
    expected = Fraction(1, c.base**j)
    worst = max((abs(Fraction(n, w) - expected) for n in c.counts[j].values()), default=Fraction(0))
    if len(c.counts[j]) < c.base**j:
        worst = max(worst, expected)
    return float(worst)


def chi_square(c: BlockCensus, j: int) -> float:
    """sum over all b^j blocks of (count - E)^2 / E with E = windows / b^j."""
    w = c.windows(j)
    if w == 0:
        raise EmptyStreamError("chi-square needs at least one window")
    cells = c.base**j
    # (n - w/cells)^2 / (w/cells) = (cells*n - w)^2 / (cells*w); exact integer numerator
    num = sum((cells * n - w) ** 2 for n in c.counts[j].values())
    num += (cells - len(c.counts[j])) * w * w
    return num / (cells * w)


@dataclass
class BlockStats:
    j: int
    max_deviation: float
    chi_square: float
    dof: int
    threshold: float | None = None

    @property
    def passed(self) -> bool | None:
        if self.threshold is None:
            return None
        return self.max_deviation < self.threshold


@dataclass
class NormalityReport:
    base: int
    kmax: int
    positions: int
    per_j: list[BlockStats]
    selection_density: float | None = None

    @property
    def consistent_with_normal(self) -> bool:
        return all(s.passed is not False for s in self.per_j)

    @property
    def verdict(self) -> str:
        return "consistent-with-normal" if self.consistent_with_normal else "non-normal"

    def to_json(self) -> dict:
        return {
            "base": self.base,
            "kmax": self.kmax,
            "positions": self.positions,
            "per_j": {
                str(s.j): {
                    "max_deviation": s.max_deviation,
                    "chi_square": s.chi_square,
                    "dof": s.dof,
                    "threshold": s.threshold,
                    "passed": s.passed,
                }
                for s in self.per_j
            },
            "selection_density": self.selection_density,
            "verdict": self.verdict,
        }


def report(c: BlockCensus, selection=None, thresholds: dict[int, float] | None = None) -> NormalityReport:
    """Deviation and chi-square for every block length, plus a verdict.

    A length is judged only if it has a threshold; the stream is
    ``consistent-with-normal`` when every judged length is below its threshold.
    """
    if c.positions == 0:
        raise EmptyStreamError("empty stream")
    if c.positions < c.kmax:
        raise EmptyStreamError(f"stream of {c.positions} digits is shorter than kmax={c.kmax}")
    thresholds = DEFAULT_THRESHOLDS if thresholds is None else thresholds
    per_j = [
        BlockStats(j, max_deviation(c, j), chi_square(c, j), c.base**j - 1, thresholds.get(j))
        for j in range(1, c.kmax + 1)
    ]
    density = None if selection is None else selection.density
    return NormalityReport(c.base, c.kmax, c.positions, per_j, density)


def write_census_csv(c: BlockCensus, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "length", "count", "frequency"])
        for j in range(1, c.kmax + 1):
            windows = c.windows(j)
            for block, n in c.blocks(j).items():
                w.writerow(["".join(map(str, block)) if c.base <= 10 else ",".join(map(str, block)), j, n, n / windows if windows else 0.0])


# -- rule output vs. automaton visit ratio -----------------------------------


@dataclass
class CrossCheck:
    k: int
    selection_count: int
    max_discrepancy: float
    bound: float
    worst_block: tuple[int, ...] | None
    per_block: dict[tuple[int, ...], tuple[float, Fraction]] = field(repr=False, default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.max_discrepancy <= self.bound

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "selection_count": self.selection_count,
            "max_discrepancy": self.max_discrepancy,
            "bound": self.bound,
            "worst_block": list(self.worst_block) if self.worst_block else None,
            "ok": self.ok,
        }


def cross_check_ratio(rule_census: BlockCensus, a: AugmentedAutomaton, run: AutomatonRun, warmup: int | None = None) -> CrossCheck:
    """Compare each length-k block's frequency in the rule output with the
    automaton's visit ratio target(s) / selection.

    The two agree up to boundary effects: the first k-1 selections see the
    all-zero start window, and the denominators differ by k-1. The allowed
    gap is (k + warmup) / selection_count with warmup defaulting to k.
    """
    k = a.k
    if k is None:
        raise ValueError("automaton has no block length")
    if rule_census.kmax < k:
        raise ValueError(f"rule census kmax={rule_census.kmax} < automaton k={k}")
    sel_count = run.selected_visits.steps
    if sel_count == 0:
        raise EmptyStreamError("no selections")
    warmup = k if warmup is None else warmup
    out_base = rule_census.base
    all_sel = list(a.selection)
    per_block = {}
    worst, worst_block = 0.0, None
    for code in range(out_base**k):
        s = decode(code, out_base, k)
        direct = rule_census.frequency(s) if rule_census.windows(k) else 0.0
        ratio = visit_ratio(run.selected_visits, a.target_states(s), all_sel)
        gap = abs(direct - float(ratio))
        per_block[s] = (direct, ratio)
        if gap > worst or worst_block is None:
            worst, worst_block = gap, s
    return CrossCheck(k, sel_count, worst, (k + warmup) / sel_count, worst_block, per_block)
