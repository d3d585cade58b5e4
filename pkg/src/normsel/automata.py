"""Augmented (skew-product) automata over the base-b shift.

A state ``M`` is paired with the shift ``x -> bx mod 1``; reading the leading
digit ``j`` of ``x`` moves the automaton to ``delta(j, M)``. The product of
Lebesgue measure with the state weights is invariant exactly when each state's
in-flow ``sum(weight(M) / b)`` over incoming digit edges equals its own
weight, which is what :func:`check_measure_preservation` tests with exact
rationals.

Three builders reproduce the systems used for the leap, remove-top and
prefix-sum-modulo selection rules. Each one marks

* ``selection``: states whose visit marks a selected position, and
* ``target_block``: for states that can be visited at a selection, the block
  of the last ``k`` selected digits that the state remembers.

Run convention: step ``n`` reads ``a_n`` and the flags for position ``n`` are
taken from the state *after* the step. Under this convention all three
builders flag exactly the rule's selected positions, with no index offset.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Hashable, Iterable, Sequence

from .digits import DigitStream

Block = tuple[int, ...]


def shift(window: Block, j: int) -> Block:
    """[b_1..b_k], j -> [b_2..b_k, j]."""
    return window[1:] + (j,)


@dataclass(frozen=True)
class AugmentedAutomaton:
    base: int
    labels: tuple[Hashable, ...]
    #: table[m][j] = delta(j, m)
    table: tuple[tuple[int, ...], ...]
    weights: tuple[Fraction, ...]
    selection: frozenset[int]
    start: int = 0
    target_block: dict[int, Block] = field(default_factory=dict, compare=False)
    #: "state": a step is selected when it lands in ``selection``;
    #: "digit": when the digit read is below base-1 (remove-top system)
    selection_mode: str = "state"
    k: int | None = None
    kind: str = "custom"

    def __post_init__(self):
        n = len(self.labels)
        if len(self.table) != n or len(self.weights) != n:
            raise ValueError("labels, table and weights must have one entry per state")
        for m, row in enumerate(self.table):
            if len(row) != self.base:
                raise ValueError(f"state {m} has {len(row)} successors, expected {self.base}")
            if any(not 0 <= t < n for t in row):
                raise ValueError(f"state {m} has a successor out of range")
        if any(w <= 0 for w in self.weights):
            raise ValueError("state weights must be positive")
        if sum(self.weights, Fraction(0)) != 1:
            raise ValueError("state weights must sum to exactly 1")
        if not self.selection <= set(range(n)):
            raise ValueError("selection set is not a subset of the states")
        if not 0 <= self.start < n:
            raise ValueError("start state out of range")
        if self.selection_mode not in ("state", "digit"):
            raise ValueError(f"unknown selection mode {self.selection_mode!r}")

    def __len__(self) -> int:
        return len(self.labels)

    def delta(self, j: int, m: int) -> int:
        return self.table[m][j]

    def index(self, label: Hashable) -> int:
        return self.labels.index(label)

    def run_string(self, m: int, digits: Iterable[int]) -> int:
        for j in digits:
            m = self.table[m][j]
        return m

    def target_states(self, block: Sequence[int]) -> list[int]:
        block = tuple(block)
        return [m for m, s in self.target_block.items() if s == block]


def _uniform(n: int) -> tuple[Fraction, ...]:
    return (Fraction(1, n),) * n


# -- builders --------------------------------------------------------------


def build_leap_automaton(b: int, k: int) -> AugmentedAutomaton:
    """States (l, w) with w in {0..b-1}^k and 0 <= l <= w_k.

    While l >= 1 the digit is skipped and l counts down; at l = 0 the digit
    is recorded into the window and becomes the new countdown.
    """
    if b < 2 or k < 1:
        raise ValueError(f"leap automaton needs b >= 2, k >= 1, got b={b}, k={k}")
    labels = [(l, w) for w in product(range(b), repeat=k) for l in range(w[-1] + 1)]
    idx = {lab: i for i, lab in enumerate(labels)}
    table = []
    for l, w in labels:
        if l >= 1:
            table.append((idx[(l - 1, w)],) * b)
        else:
            table.append(tuple(idx[(j, shift(w, j))] for j in range(b)))
    selection = frozenset(i for i, (l, w) in enumerate(labels) if l == w[-1])
    return AugmentedAutomaton(
        base=b,
        labels=tuple(labels),
        table=tuple(table),
        weights=_uniform(len(labels)),
        selection=selection,
        start=idx[(0, (0,) * k)],
        target_block={i: labels[i][1] for i in selection},
        k=k,
        kind="leap",
    )


def build_remove_automaton(b: int, k: int) -> AugmentedAutomaton:
    """States are windows w in {0..b-2}^k; the top digit b-1 leaves w unchanged."""
    if b < 3 or k < 1:
        raise ValueError(f"remove automaton needs b >= 3, k >= 1, got b={b}, k={k}")
    labels = list(product(range(b - 1), repeat=k))
    idx = {w: i for i, w in enumerate(labels)}
    table = [
        tuple(idx[shift(w, j)] if j < b - 1 else idx[w] for j in range(b)) for w in labels
    ]
    return AugmentedAutomaton(
        base=b,
        labels=tuple(labels),
        table=tuple(table),
        weights=_uniform(len(labels)),
        selection=frozenset(range(len(labels))),
        start=idx[(0,) * k],
        target_block={i: w for i, w in enumerate(labels)},
        selection_mode="digit",
        k=k,
        kind="remove",
    )


def build_modulo_automaton(b: int, k: int, N: int, L: int) -> AugmentedAutomaton:
    """States (l, w): l is the running digit sum mod N, w the last k digits
    read at steps where the sum landed on L."""
    if b < 2 or k < 1 or N < 2 or not 0 <= L < N:
        raise ValueError(f"modulo automaton needs b>=2, k>=1, N>=2, 0<=L<N; got {b}, {k}, {N}, {L}")
    labels = [(l, w) for l in range(N) for w in product(range(b), repeat=k)]
    idx = {lab: i for i, lab in enumerate(labels)}
    table = []
    for l, w in labels:
        row = []
        for j in range(b):
            nl = (l + j) % N
            row.append(idx[(nl, shift(w, j) if nl == L else w)])
        table.append(tuple(row))
    selection = frozenset(i for i, (l, _) in enumerate(labels) if l == L)
    return AugmentedAutomaton(
        base=b,
        labels=tuple(labels),
        table=tuple(table),
        weights=_uniform(len(labels)),
        selection=selection,
        start=idx[(0, (0,) * k)],
        target_block={i: labels[i][1] for i in selection},
        k=k,
        kind="modulo",
    )


# -- transitivity ----------------------------------------------------------


@dataclass(frozen=True)
class TraversalCertificate:
    from_state: int
    to_state: int
    string: tuple[int, ...]
    method: str = "bfs"

    def verify(self, a: AugmentedAutomaton) -> bool:
        return a.run_string(self.from_state, self.string) == self.to_state


def _certified(a, m1, m2, string, method) -> TraversalCertificate:
    cert = TraversalCertificate(m1, m2, tuple(string), method)
    if not cert.verify(a):
        raise AssertionError(f"{method} string does not drive {a.labels[m1]} to {a.labels[m2]}")
    return cert


def _bfs_tree(a: AugmentedAutomaton, src: int) -> list[tuple[int, int] | None]:
    """parent[m] = (predecessor, digit); parent[src] = (-1, -1); None if unreachable."""
    parent: list[tuple[int, int] | None] = [None] * len(a)
    parent[src] = (-1, -1)
    queue = deque([src])
    while queue:
        m = queue.popleft()
        for j, t in enumerate(a.table[m]):
            if parent[t] is None:
                parent[t] = (m, j)
                queue.append(t)
    return parent


def _path(parent, dst: int) -> list[int]:
    out = []
    m = dst
    while parent[m] != (-1, -1):
        m, j = parent[m]
        out.append(j)
    out.reverse()
    return out


def shortest_traversing_string(a: AugmentedAutomaton, m1: int, m2: int) -> TraversalCertificate | None:
    parent = _bfs_tree(a, m1)
    if parent[m2] is None:
        return None
    return _certified(a, m1, m2, _path(parent, m2), "bfs")


@dataclass
class TransitivityResult:
    transitive: bool
    unreachable_pair: tuple[int, int] | None
    certificates: dict[tuple[int, int], TraversalCertificate] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.transitive


def check_transitivity(a: AugmentedAutomaton, witnesses: bool = True) -> TransitivityResult:
    """Every ordered state pair must be joined by some digit string.

    With ``witnesses`` a shortest (BFS) certificate is returned for every pair;
    that costs O(|M|^2) memory, so large automata should pass False, which
    only runs a forward and a backward search from state 0.
    """
    n = len(a)
    if not witnesses:
        fwd = _bfs_tree(a, 0)
        missing = next((m for m in range(n) if fwd[m] is None), None)
        if missing is not None:
            return TransitivityResult(False, (0, missing))
        preds: list[list[int]] = [[] for _ in range(n)]
        for m, row in enumerate(a.table):
            for t in set(row):
                preds[t].append(m)
        seen = [False] * n
        seen[0] = True
        stack = [0]
        while stack:
            for p in preds[stack.pop()]:
                if not seen[p]:
                    seen[p] = True
                    stack.append(p)
        missing = next((m for m in range(n) if not seen[m]), None)
        if missing is not None:
            return TransitivityResult(False, (missing, 0))
        return TransitivityResult(True, None)

    certs = {}
    for m1 in range(n):
        parent = _bfs_tree(a, m1)
        for m2 in range(n):
            if parent[m2] is None:
                return TransitivityResult(False, (m1, m2))
            certs[(m1, m2)] = _certified(a, m1, m2, _path(parent, m2), "bfs")
    return TransitivityResult(True, None, certs)


def leap_formula_string(b: int, k: int, M1: tuple, M2: tuple) -> list[int]:
    """[1^l, b'_1, 1^{b'_1}, ..., b'_k, 1^{b'_k - l'}] for M1 = (l, w), M2 = (l', w')."""
    l, _ = M1
    l2, w2 = M2
    out = [1] * l
    for i, d in enumerate(w2):
        out.append(d)
        out.extend([1] * (d if i < k - 1 else d - l2))
    return out


def traversing_string_leap(b: int, k: int, M1: tuple, M2: tuple) -> TraversalCertificate:
    a = _leap_cache(b, k)
    return _certified(a, a.index(M1), a.index(M2), leap_formula_string(b, k, M1, M2), "formula")


def modulo_formula_string(b: int, k: int, N: int, L: int, M1: tuple, M2: tuple) -> list[int]:
    """Literal published form: [1^{(l - b'_1) mod N}, b'_1, 1^{-b'_2 mod N}, b'_2, ..., b'_k, 1^{(l' - L) mod N}]."""
    l, _ = M1
    l2, w2 = M2
    return _modulo_string((l - w2[0]) % N, w2, N, (l2 - L) % N)


def modulo_corrected_string(b: int, k: int, N: int, L: int, M1: tuple, M2: tuple) -> list[int]:
    """Same shape, with the lead-in run of ones sized to land the sum on L.

    From running sum l, r ones followed by b'_1 reach L iff r = L - l - b'_1
    (mod N). Shifts caused on the way there are overwritten by the k later
    shifts, and the remaining runs never pass through L.
    """
    l, _ = M1
    l2, w2 = M2
    return _modulo_string((L - l - w2[0]) % N, w2, N, (l2 - L) % N)


def _modulo_string(lead: int, w2: Sequence[int], N: int, tail: int) -> list[int]:
    out = [1] * lead + [w2[0]]
    for d in w2[1:]:
        out.extend([1] * ((-d) % N))
        out.append(d)
    out.extend([1] * tail)
    return out


def traversing_string_modulo(b: int, k: int, N: int, L: int, M1: tuple, M2: tuple) -> TraversalCertificate:
    """Published formula if it simulates correctly, else the corrected
    formula, else a BFS witness. ``method`` on the result says which."""
    a = _modulo_cache(b, k, N, L)
    m1, m2 = a.index(M1), a.index(M2)
    for method, fn in (("formula", modulo_formula_string), ("corrected", modulo_corrected_string)):
        string = fn(b, k, N, L, M1, M2)
        if a.run_string(m1, string) == m2:
            return _certified(a, m1, m2, string, method)
    cert = shortest_traversing_string(a, m1, m2)
    if cert is None:
        raise AssertionError(f"no traversing string from {M1} to {M2}")
    return cert


_CACHE: dict[tuple, AugmentedAutomaton] = {}


def _leap_cache(b: int, k: int) -> AugmentedAutomaton:
    key = ("leap", b, k)
    if key not in _CACHE:
        _CACHE[key] = build_leap_automaton(b, k)
    return _CACHE[key]


def _modulo_cache(b: int, k: int, N: int, L: int) -> AugmentedAutomaton:
    key = ("modulo", b, k, N, L)
    if key not in _CACHE:
        _CACHE[key] = build_modulo_automaton(b, k, N, L)
    return _CACHE[key]


# -- measure preservation --------------------------------------------------


@dataclass
class MeasureResult:
    preserved: bool
    violating_state: int | None
    inflow: list[Fraction]
    in_degree: list[int]

    def __bool__(self) -> bool:
        return self.preserved


def check_measure_preservation(a: AugmentedAutomaton) -> MeasureResult:
    """Balance every state: sum over edges (j, M) -> M' of weight(M)/b == weight(M')."""
    n, b = len(a), a.base
    inflow = [Fraction(0)] * n
    indeg = [0] * n
    for m, row in enumerate(a.table):
        share = a.weights[m] / b
        for t in row:
            inflow[t] += share
            indeg[t] += 1
    bad = next((m for m in range(n) if inflow[m] != a.weights[m]), None)
    return MeasureResult(bad is None, bad, inflow, indeg)


def uniform_indegree_criterion(a: AugmentedAutomaton) -> bool:
    """With uniform weights, balance holds iff every in-degree equals b."""
    return all(d == a.base for d in check_measure_preservation(a).in_degree)


# -- running alongside a stream --------------------------------------------


@dataclass
class StateVisitCensus:
    counts: list[int]
    steps: int

    def total(self, states: Iterable[int]) -> int:
        return sum(self.counts[m] for m in states)


@dataclass
class AutomatonRun:
    """Result of driving an automaton with a digit stream.

    ``visits`` counts the state after every step; ``selected_visits`` counts
    it only on selected steps. ``selected_steps[i]`` is the 1-based position of
    the i-th selection and ``selected_states[i]`` the state reached there.
    """

    visits: StateVisitCensus
    selected_visits: StateVisitCensus
    selected_steps: list[int]
    selected_states: list[int]
    final_state: int

    def target_steps(self, a: AugmentedAutomaton, block: Sequence[int]) -> list[int]:
        targets = set(a.target_states(block))
        return [n for n, m in zip(self.selected_steps, self.selected_states) if m in targets]


def run_with_automaton(
    a: AugmentedAutomaton, stream: DigitStream, start_state: int | None = None
) -> AutomatonRun:
    if stream.base != a.base:
        raise ValueError(f"automaton base {a.base} does not match stream base {stream.base}")
    stream.require_finite()
    table = a.table
    n_states = len(a)
    counts = [0] * n_states
    sel_counts = [0] * n_states
    steps: list[int] = []
    states: list[int] = []
    m = a.start if start_state is None else start_state
    n = 0
    if a.selection_mode == "digit":
        top = a.base - 1
        for n, j in enumerate(stream, start=1):
            m = table[m][j]
            counts[m] += 1
            if j < top:
                sel_counts[m] += 1
                steps.append(n)
                states.append(m)
    else:
        is_sel = [i in a.selection for i in range(n_states)]
        for n, j in enumerate(stream, start=1):
            m = table[m][j]
            counts[m] += 1
            if is_sel[m]:
                sel_counts[m] += 1
                steps.append(n)
                states.append(m)
    return AutomatonRun(
        StateVisitCensus(counts, n), StateVisitCensus(sel_counts, len(steps)), steps, states, m
    )


def visit_ratio(census: StateVisitCensus, target_states: Iterable[int], selection_states: Iterable[int]) -> Fraction:
    den = census.total(selection_states)
    if den == 0:
        raise ZeroDivisionError("no visits to the selection states")
    return Fraction(census.total(target_states), den)


def measure_ratio(a: AugmentedAutomaton, target_states: Iterable[int], selection_states: Iterable[int]) -> Fraction:
    """The same ratio taken under the invariant weights instead of visit counts."""
    num = sum((a.weights[m] for m in target_states), Fraction(0))
    den = sum((a.weights[m] for m in selection_states), Fraction(0))
    return num / den


# -- export format ---------------------------------------------------------
#
#   base=<b> states=<n> start=<id>
#   <id> <label> <num>/<den> <selected 0|1>     (n lines)
#   <succ_0> ... <succ_{b-1}>                  (n lines)


def format_label(label: Hashable) -> str:
    if isinstance(label, tuple) and len(label) == 2 and isinstance(label[1], tuple):
        return f"{label[0]};" + ",".join(map(str, label[1]))
    if isinstance(label, tuple):
        return ",".join(map(str, label))
    text = str(label)
    if not text or any(c.isspace() for c in text):
        raise ValueError(f"label {label!r} cannot be exported")
    return text


def write_automaton_file(a: AugmentedAutomaton, path: str | os.PathLike) -> None:
    if a.selection_mode != "state":
        raise ValueError("only state-selected automata can be exported")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"base={a.base} states={len(a)} start={a.start}\n")
        for m, (lab, w) in enumerate(zip(a.labels, a.weights)):
            fh.write(f"{m} {format_label(lab)} {w.numerator}/{w.denominator} {int(m in a.selection)}\n")
        for row in a.table:
            fh.write(" ".join(map(str, row)) + "\n")


def read_automaton_file(path: str | os.PathLike) -> AugmentedAutomaton:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty automaton file")
    try:
        head = dict(tok.split("=", 1) for tok in lines[0])
        b, n, start = int(head["base"]), int(head["states"]), int(head["start"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: bad header {' '.join(lines[0])!r}") from exc
    if len(lines) != 1 + 2 * n:
        raise ValueError(f"{path}: expected {1 + 2 * n} lines, found {len(lines)}")
    labels, weights, selection = [], [], set()
    for m, toks in enumerate(lines[1 : n + 1]):
        if len(toks) != 4 or int(toks[0]) != m or toks[3] not in ("0", "1"):
            raise ValueError(f"{path}: bad state line {' '.join(toks)!r}")
        labels.append(toks[1])
        weights.append(Fraction(toks[2]))
        if toks[3] == "1":
            selection.add(m)
    table = tuple(tuple(int(t) for t in toks) for toks in lines[n + 1 :])
    return AugmentedAutomaton(
        base=b,
        labels=tuple(labels),
        table=table,
        weights=tuple(weights),
        selection=frozenset(selection),
        start=start,
    )


def verification_report(a: AugmentedAutomaton) -> dict:
    """JSON-ready summary of both hypotheses."""
    trans = check_transitivity(a, witnesses=False)
    meas = check_measure_preservation(a)
    return {
        "transitive": trans.transitive,
        "unreachable_pair": None
        if trans.unreachable_pair is None
        else [format_label(a.labels[m]) for m in trans.unreachable_pair],
        "measure_preserved": meas.preserved,
        "violating_state": None
        if meas.violating_state is None
        else format_label(a.labels[meas.violating_state]),
        "state_count": len(a),
        "selection_count": len(a.selection),
    }
