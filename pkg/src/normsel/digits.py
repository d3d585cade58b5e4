"""Base-b digit streams: generators, file I/O.

A :class:`DigitStream` is a restartable description of a digit sequence.
Iterating it (or calling :meth:`DigitStream.chunks`) regenerates the digits
from the source descriptor, so long streams never have to be held in memory.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from itertools import islice
from typing import Iterable, Iterator, Sequence

import numpy as np

CHUNK = 1 << 16
_ALPHABET = "0123456789abcdefghijklmnopqrstuvwxyz"
_HEADER_RE = re.compile(r"#\s*base\s*=\s*(\d+)\s*$")

# SplitMix64 constants (Steele, Lea & Flood 2014).
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


class DigitFileError(ValueError):
    """Malformed digit file; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _check_base(base: int) -> None:
    if not isinstance(base, (int, np.integer)) or base < 2:
        raise ValueError(f"base must be an integer >= 2, got {base!r}")


def _check_count(count: int | None) -> None:
    if count is not None and count < 0:
        raise ValueError(f"count must be >= 0, got {count}")


# -- sources ---------------------------------------------------------------
#
# Each source yields numpy int64 chunks for a given base. ``length`` is the
# number of digits to emit, or None for an unbounded stream.


def _to_digits(n: int, base: int) -> list[int]:
    out = []
    while n:
        n, r = divmod(n, base)
        out.append(r)
    out.reverse()
    return out


@dataclass(frozen=True)
class Champernowne:
    """Concatenation of 1, 2, 3, ... written in the stream base."""

    def chunks(self, base: int, length: int | None, size: int) -> Iterator[np.ndarray]:
        remaining = length
        buf: list[int] = []
        n = 1
        while remaining is None or remaining > 0:
            want = size if remaining is None else min(size, remaining)
            while len(buf) < want:
                buf.extend(_to_digits(n, base))
                n += 1
            yield np.array(buf[:want], dtype=np.int64)
            del buf[:want]
            if remaining is not None:
                remaining -= want

    def describe(self) -> str:
        return "champernowne"


@dataclass(frozen=True)
class Constant:
    digit: int

    def chunks(self, base: int, length: int | None, size: int) -> Iterator[np.ndarray]:
        remaining = length
        while remaining is None or remaining > 0:
            want = size if remaining is None else min(size, remaining)
            yield np.full(want, self.digit, dtype=np.int64)
            if remaining is not None:
                remaining -= want

    def describe(self) -> str:
        return f"constant(d={self.digit})"


@dataclass(frozen=True)
class Periodic:
    pattern: tuple[int, ...]

    def chunks(self, base: int, length: int | None, size: int) -> Iterator[np.ndarray]:
        pat = np.array(self.pattern, dtype=np.int64)
        offset = 0
        remaining = length
        while remaining is None or remaining > 0:
            want = size if remaining is None else min(size, remaining)
            yield pat[(offset + np.arange(want)) % len(pat)]
            offset = (offset + want) % len(pat)
            if remaining is not None:
                remaining -= want

    def describe(self) -> str:
        return "periodic(pattern=" + ",".join(map(str, self.pattern)) + ")"


def splitmix64(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs ``start .. start+count-1`` (0-based) of SplitMix64 seeded with ``seed``.

    Output i is ``mix(seed + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)`` where
    ``mix`` is the standard SplitMix64 finalizer (xor-shift 30/27/31 with the
    two odd multipliers above).
    """
    i = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + i * _GAMMA
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class SeededUniform:
    """i.i.d. control: digit i is SplitMix64 output i reduced mod base."""

    seed: int

    def chunks(self, base: int, length: int | None, size: int) -> Iterator[np.ndarray]:
        start = 0
        remaining = length
        while remaining is None or remaining > 0:
            want = size if remaining is None else min(size, remaining)
            raw = splitmix64(self.seed, start, want)
            yield (raw % np.uint64(base)).astype(np.int64)
            start += want
            if remaining is not None:
                remaining -= want

    def describe(self) -> str:
        return f"seeded-uniform(seed={self.seed})"


@dataclass(frozen=True)
class Literal:
    """An explicit, already materialized digit sequence."""

    digits: tuple[int, ...] = field(repr=False)

    def chunks(self, base: int, length: int | None, size: int) -> Iterator[np.ndarray]:
        arr = np.array(self.digits[:length], dtype=np.int64)
        for i in range(0, len(arr), size):
            yield arr[i : i + size]

    def describe(self) -> str:
        return "literal"


@dataclass(frozen=True)
class DigitFile:
    path: str

    def chunks(self, base: int, length: int | None, size: int) -> Iterator[np.ndarray]:
        buf: list[int] = []
        for d in _parse_digit_file(self.path)[1]:
            buf.append(d)
            if len(buf) == size:
                yield np.array(buf, dtype=np.int64)
                buf = []
        if buf:
            yield np.array(buf, dtype=np.int64)

    def describe(self) -> str:
        return f"file(path={self.path})"


# -- the stream ------------------------------------------------------------


@dataclass(frozen=True)
class DigitStream:
    """A base plus a restartable digit source.

    ``length`` is None for unbounded generators; everything that consumes a
    whole stream (selection, census, file writing) requires a finite length.
    """

    base: int
    source: Champernowne | Constant | Periodic | SeededUniform | Literal | DigitFile
    length: int | None

    def chunks(self, size: int = CHUNK) -> Iterator[np.ndarray]:
        return self.source.chunks(self.base, self.length, size)

    def __iter__(self) -> Iterator[int]:
        for chunk in self.chunks():
            yield from chunk.tolist()

    def __len__(self) -> int:
        if self.length is None:
            raise TypeError("unbounded stream has no length")
        return self.length

    def take(self, n: int) -> list[int]:
        return list(islice(iter(self), n))

    def to_list(self) -> list[int]:
        self.require_finite()
        return list(self)

    def to_array(self) -> np.ndarray:
        self.require_finite()
        parts = list(self.chunks())
        if not parts:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(parts)

    def require_finite(self) -> None:
        if self.length is None:
            raise ValueError("operation needs a finite stream")

    def describe(self) -> str:
        return self.source.describe()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DigitStream):
            return NotImplemented
        return (
            self.base == other.base
            and self.length == other.length
            and self.to_list() == other.to_list()
        )

    __hash__ = None  # type: ignore[assignment]


def gen_champernowne(base: int, count: int | None) -> DigitStream:
    _check_base(base)
    _check_count(count)
    return DigitStream(base, Champernowne(), count)


def gen_constant(base: int, d: int, count: int | None) -> DigitStream:
    _check_base(base)
    _check_count(count)
    if not 0 <= d < base:
        raise ValueError(f"digit {d} out of range for base {base}")
    return DigitStream(base, Constant(d), count)


def gen_periodic(base: int, pattern: Sequence[int], count: int | None) -> DigitStream:
    _check_base(base)
    _check_count(count)
    if len(pattern) == 0:
        raise ValueError("periodic pattern must be nonempty")
    bad = [d for d in pattern if not 0 <= d < base]
    if bad:
        raise ValueError(f"pattern digits {bad} out of range for base {base}")
    return DigitStream(base, Periodic(tuple(int(d) for d in pattern)), count)


def gen_seeded_uniform(base: int, seed: int, count: int | None) -> DigitStream:
    _check_base(base)
    _check_count(count)
    return DigitStream(base, SeededUniform(int(seed)), count)


def from_digits(base: int, digits: Iterable[int]) -> DigitStream:
    """Wrap an explicit digit sequence, validating every digit."""
    _check_base(base)
    ds = tuple(int(d) for d in digits)
    for i, d in enumerate(ds):
        if not 0 <= d < base:
            raise ValueError(f"digit {d} at position {i + 1} out of range for base {base}")
    return DigitStream(base, Literal(ds), len(ds))


# -- file format -----------------------------------------------------------
#
#   optional first line:  # base=<b>
#   b <= 36: one character per digit from 0-9a-z, newlines ignored
#   b  > 36: comma-separated decimal digits, newlines ignored


def _parse_digit_file(path: str | os.PathLike) -> tuple[int, Iterator[int]]:
    """Return (base, digit iterator). The iterator validates as it goes."""
    with open(path, encoding="ascii", errors="replace") as fh:
        first = fh.readline()
    base = 10
    has_header = first.startswith("#")
    if has_header:
        m = _HEADER_RE.match(first.rstrip("\r\n"))
        if m is None:
            raise DigitFileError(f"malformed header {first.rstrip()!r}", 1, 1)
        base = int(m.group(1))
        if base < 2:
            raise DigitFileError(f"base must be >= 2, got {base}", 1, 1)

    def digits() -> Iterator[int]:
        with open(path, encoding="ascii", errors="replace") as fh:
            for lineno, line in enumerate(fh, start=1):
                if lineno == 1 and has_header:
                    continue
                line = line.rstrip("\r\n")
                if base <= 36:
                    yield from _packed_line(line, lineno, base)
                else:
                    yield from _comma_line(line, lineno, base)

    return base, digits()


def _packed_line(line: str, lineno: int, base: int) -> Iterator[int]:
    for col, ch in enumerate(line, start=1):
        v = _ALPHABET.find(ch)
        if v < 0:
            raise DigitFileError(f"illegal character {ch!r}", lineno, col)
        if v >= base:
            raise DigitFileError(f"digit {ch!r} not valid in base {base}", lineno, col)
        yield v


def _comma_line(line: str, lineno: int, base: int) -> Iterator[int]:
    col = 1
    for tok in line.split(","):
        text = tok.strip()
        if text:
            if not text.isdigit():
                raise DigitFileError(f"illegal token {text!r}", lineno, col)
            v = int(text)
            if v >= base:
                raise DigitFileError(f"digit {v} not valid in base {base}", lineno, col)
            yield v
        col += len(tok) + 1


def read_digit_file(path: str | os.PathLike) -> DigitStream:
    """Open a digit file. The whole file is validated once up front."""
    base, it = _parse_digit_file(path)
    length = sum(1 for _ in it)
    return DigitStream(base, DigitFile(os.fspath(path)), length)


def write_digit_file(stream: DigitStream, path: str | os.PathLike, width: int = 100) -> None:
    stream.require_finite()
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# base={stream.base}\n")
        for chunk in stream.chunks():
            write_body(fh, chunk.tolist(), stream.base, width)


def write_body(fh, digits: list[int], base: int, width: int) -> None:
    if base <= 36:
        text = "".join(_ALPHABET[d] for d in digits)
        for i in range(0, len(text), width):
            fh.write(text[i : i + width] + "\n")
    else:
        per_line = max(1, width // 4)
        for i in range(0, len(digits), per_line):
            fh.write(",".join(map(str, digits[i : i + per_line])) + ",\n")
