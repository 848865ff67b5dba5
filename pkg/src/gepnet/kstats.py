"""Unbiased cumulant estimators (k-statistics) of arbitrary order.

The order-r k-statistic is the unique symmetric polynomial in the sample
whose expectation equals the population cumulant kappa_r.  Rather than
transcribing the classical order-by-order formulas, the coefficients of the
power-sum expansion k_r = sum_{partitions pi of r} c_pi prod_j S_{pi_j} are
solved exactly:

  * E[prod_j S_{a_j}] expands over set partitions of the index slots into
    falling factorials of n times raw-moment monomials;
  * kappa_r expands over integer partitions with the Moebius coefficients
    (-1)^(b-1) (b-1)!;
  * matching monomials gives a linear system over the rationals, solved with
    Fraction arithmetic per sample size n (cached).

k-statistics of order >= 2 are translation invariant, so the data is
centered before evaluation; every partition containing a part equal to one
then drops out (S_1 = 0), which also removes the numerically dangerous
near-cancelling terms.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def integer_partitions(r: int) -> tuple[tuple[int, ...], ...]:
    """All partitions of r as descending tuples."""
    if r == 0:
        return ((),)
    out = []

    def rec(remaining, max_part, prefix):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for p in range(min(remaining, max_part), 0, -1):
            rec(remaining - p, p, prefix + [p])

    rec(r, r, [])
    return tuple(out)


def _set_partitions(k: int):
    """Set partitions of range(k) as tuples of blocks (restricted growth)."""
    if k == 0:
        yield ()
        return

    def rec(i, blocks):
        if i == k:
            yield tuple(tuple(b) for b in blocks)
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


@lru_cache(maxsize=None)
def _partition_count(pi: tuple[int, ...]) -> int:
    """Number of set partitions of {1..sum(pi)} with block sizes pi."""
    r = sum(pi)
    total = math.factorial(r)
    for p in pi:
        total //= math.factorial(p)
    mult: dict[int, int] = {}
    for p in pi:
        mult[p] = mult.get(p, 0) + 1
    for m in mult.values():
        total //= math.factorial(m)
    return total


@lru_cache(maxsize=None)
def _power_sum_expectation(pi: tuple[int, ...]):
    """E[prod_j S_{pi_j}] as {moment-partition: polynomial-in-n coefficients}.

    The value of the falling factorial n^(b) is deferred; entries map the
    sorted tuple of merged exponents to the number of blocks b (coefficient
    n^(b) with multiplicity counted).
    """
    k = len(pi)
    out: dict[tuple[int, ...], dict[int, int]] = {}
    for blocks in _set_partitions(k):
        merged = tuple(sorted((sum(pi[i] for i in block) for block in blocks), reverse=True))
        slot = out.setdefault(merged, {})
        slot[len(blocks)] = slot.get(len(blocks), 0) + 1
    return out


def _falling(n: int, b: int) -> int:
    total = 1
    for i in range(b):
        total *= n - i
    return total


@lru_cache(maxsize=None)
def kstat_coefficients(r: int, n: int) -> tuple[tuple[tuple[int, ...], Fraction], ...]:
    """Exact power-sum coefficients of the order-r k-statistic at sample size n."""
    if n < r:
        raise ValueError(f"order-{r} k-statistic needs at least {r} samples")
    pis = integer_partitions(r)
    index = {pi: i for i, pi in enumerate(pis)}
    size = len(pis)
    A = [[Fraction(0)] * size for _ in range(size)]
    for j, pi in enumerate(pis):
        for merged, bcounts in _power_sum_expectation(pi).items():
            for b, count in bcounts.items():
                A[index[merged]][j] += Fraction(count * _falling(n, b))
    rhs = [Fraction(0)] * size
    for pi in pis:
        sign = -1 if (len(pi) % 2 == 0) else 1
        rhs[index[pi]] = Fraction(sign * math.factorial(len(pi) - 1) * _partition_count(pi))

    # Gaussian elimination over Fractions
    cols = list(range(size))
    for col in range(size):
        pivot = next(row for row in range(col, size) if A[row][col] != 0)
        A[col], A[pivot] = A[pivot], A[col]
        rhs[col], rhs[pivot] = rhs[pivot], rhs[col]
        inv = 1 / A[col][col]
        A[col] = [v * inv for v in A[col]]
        rhs[col] *= inv
        for row in range(size):
            if row != col and A[row][col] != 0:
                factor = A[row][col]
                A[row] = [a - factor * b for a, b in zip(A[row], A[col])]
                rhs[row] -= factor * rhs[col]
    return tuple((pis[i], rhs[i]) for i in cols if rhs[i] != 0)


def k_statistic(data: np.ndarray, order: int) -> float:
    """Unbiased estimate of the order-r cumulant of a scalar sample."""
    x = np.asarray(data, dtype=float).ravel()
    n = x.size
    coeffs = kstat_coefficients(order, n)
    if order >= 2:
        x = x - x.mean()
    powers = {}
    total = 0.0
    for pi, c in coeffs:
        if order >= 2 and 1 in pi:
            continue  # centered data: S_1 = 0
        term = float(c)
        for p in pi:
            if p not in powers:
                powers[p] = float(np.sum(x ** p))
            term *= powers[p]
        total += term
    return total
