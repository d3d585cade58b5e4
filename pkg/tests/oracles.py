"""Reference computations that deliberately avoid the package's own code paths."""

from collections import Counter
from fractions import Fraction

import numpy as np

SEED = 20161


def champernowne_str(base, count):
    """Concatenate numpy.base_repr strings; independent of the chunked generator."""
    parts, total, i = [], 0, 1
    while total < count:
        r = np.base_repr(i, base)
        parts.append(r)
        total += len(r)
        i += 1
    return [int(ch, 36) for ch in "".join(parts)[:count]]


def splitmix64_scalar(seed, count):
    mask = (1 << 64) - 1
    state = seed & mask
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


def brute_blocks(digits, j):
    """Sliding-window block counts by direct slicing."""
    return Counter(tuple(digits[i : i + j]) for i in range(len(digits) - j + 1))


def brute_select(kind, digits, base, **kw):
    """Index sets straight from each rule's defining predicate (whole sequence in hand)."""
    n_total = len(digits)
    a = [None] + list(digits)  # 1-based
    if kind == "arithmetic":
        k, m = kw["k"], kw["m"]
        return list(range(k, n_total + 1, m))
    if kind == "leap":
        out, n = [], kw.get("n1", 1)
        while n <= n_total:
            out.append(n)
            n = n + 1 + a[n]
        return out
    if kind == "remove_top":
        return [n for n in range(1, n_total + 1) if a[n] != base - 1]
    if kind == "modulo":
        L, N = kw["L"], kw["N"]
        return [n for n in range(1, n_total + 1) if sum(a[1 : n + 1]) % N == L] if n_total < 2000 else _modulo_fast(digits, L, N)
    if kind == "two_sided_zero":
        return [n for n in range(2, n_total) if a[n - 1] == 0 and a[n + 1] == 0]
    raise ValueError(kind)


def _modulo_fast(digits, L, N):
    sums = np.cumsum(np.asarray(digits, dtype=np.int64)) % N
    return (np.nonzero(sums == L)[0] + 1).tolist()


def _solve(A, rhs):
    """Exact Gauss-Jordan elimination over Fractions."""
    n = len(A)
    M = [list(row) + [r] for row, r in zip(A, rhs)]
    for c in range(n):
        piv = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        M[c] = [x / M[c][c] for x in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [row[-1] for row in M]


def two_sided_zero_oracle():
    """Exact limiting statistics of the two-sided-zero rule on i.i.d. fair bits.

    Markov chain on (last output digit, a_{n-1}, a_n); one step reveals a_{n+1}
    and decides whether n is selected. Returns (selection density,
    P(output digit = 0), P(consecutive output pair = 00)).
    """
    states = [(o, p, c) for o in (0, 1) for p in (0, 1) for c in (0, 1)]
    idx = {s: i for i, s in enumerate(states)}
    n = len(states)
    P = [[Fraction(0)] * n for _ in range(n)]
    for o, p, c in states:
        for d in (0, 1):
            nxt_o = c if (p == 0 and d == 0) else o
            P[idx[(o, p, c)]][idx[(nxt_o, c, d)]] += Fraction(1, 2)
    # pi (P - I) = 0, sum(pi) = 1
    A = [[P[s][t] - (1 if s == t else 0) for s in range(n)] for t in range(n)]
    A[-1] = [Fraction(1)] * n
    pi = _solve(A, [Fraction(0)] * (n - 1) + [Fraction(1)])
    sel = sel0 = sel00 = Fraction(0)
    for (o, p, c), w in zip(states, pi):
        if p == 0:
            mass = w / 2  # a_{n+1} = 0
            sel += mass
            if c == 0:
                sel0 += mass
                if o == 0:
                    sel00 += mass
    return sel, sel0 / sel, sel00 / sel

