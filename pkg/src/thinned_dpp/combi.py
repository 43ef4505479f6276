"""Exact combinatorics over integer compositions.

All values are :class:`fractions.Fraction` or ``int``; floating point only
appears at the boundary with the numeric modules.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, prod
from typing import Callable, Iterable, Sequence

import numpy as np

MAX_ORDER = 12


class CompositionRangeError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Composition:
    """Ordered tuple of positive integers."""

    parts: tuple[int, ...]

    def __post_init__(self):
        if len(self.parts) == 0 or any(int(k) < 1 for k in self.parts):
            raise ValueError(f"invalid composition {self.parts!r}")
        object.__setattr__(self, "parts", tuple(int(k) for k in self.parts))

    @property
    def n(self) -> int:
        return sum(self.parts)

    @property
    def length(self) -> int:
        return len(self.parts)

    def partial_sums(self) -> tuple[int, ...]:
        """k_1, k_1 + k_2, ..., excluding the full sum."""
        out, s = [], 0
        for k in self.parts[:-1]:
            s += k
            out.append(s)
        return tuple(out)

    def __iter__(self):
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)

    def __repr__(self):
        return f"Composition{self.parts}"


def _check_order(n: int, upper: int = MAX_ORDER) -> int:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= upper:
        raise CompositionRangeError(f"order n={n!r} outside supported range [1, {upper}]")
    return int(n)


@lru_cache(maxsize=None)
def _compositions(n: int) -> tuple[Composition, ...]:
    # bit i of the mask set -> cut after position i+1; lexicographic sort afterwards
    out = []
    for mask in range(2 ** (n - 1)):
        parts, run = [], 1
        for i in range(n - 1):
            if mask >> i & 1:
                parts.append(run)
                run = 1
            else:
                run += 1
        parts.append(run)
        out.append(Composition(tuple(parts)))
    return tuple(sorted(out))


def compositions(n: int) -> list[Composition]:
    """All 2**(n-1) compositions of ``n`` in lexicographic order."""
    return list(_compositions(_check_order(n)))


def multinomial(k: Composition | Sequence[int]) -> int:
    parts = tuple(k)
    n = sum(parts)
    if n > MAX_ORDER:
        raise OverflowError(f"multinomial of order {n} exceeds supported bound {MAX_ORDER}")
    return factorial(n) // prod(factorial(p) for p in parts)


@lru_cache(maxsize=None)
def _gamma(n: int, m: int) -> Fraction:
    total = Fraction(0)
    for k in _compositions(n):
        ell = k.length
        total += Fraction((-1) ** ell, ell) * comb(ell, m) * multinomial(k)
    return total


def gamma_coeff(n: int, m: int) -> Fraction:
    """The coefficient gamma^n_m = sum_k (-1)^l / l * C(l, m) * M(k)."""
    n = _check_order(n)
    if not 0 <= m <= n:
        raise CompositionRangeError(f"m={m} outside [0, {n}]")
    return _gamma(n, int(m))


@dataclass(frozen=True)
class UpsilonMap:
    """Weight map on compositions.

    ``m == 0`` is the plain Soshnikov weight; ``m >= 1`` is the thinning
    correction of order m, normalized so that the weights of every order
    sum to zero.
    """

    m: int = 0

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be >= 0")

    def __call__(self, k: Composition) -> Fraction:
        return upsilon(self, k)

    @property
    def label(self) -> str:
        return "Upsilon0" if self.m == 0 else f"Upsilon{self.m}"


UPSILON0 = UpsilonMap(0)


def upsilon(ups: UpsilonMap, k: Composition | Sequence[int]) -> Fraction:
    if not isinstance(k, Composition):
        k = Composition(tuple(k))
    ell = k.length
    base = Fraction((-1) ** ell, ell) * multinomial(k)
    if ups.m == 0:
        return base
    if ell == 1:
        return Fraction(-(1 if ups.m == 1 else 0)) - (gamma_coeff(k.n, ups.m) if ups.m <= k.n else 0)
    return base * comb(ell, ups.m)


def upsilon_weights(ups: UpsilonMap, n: int) -> list[tuple[Composition, Fraction]]:
    return [(k, upsilon(ups, k)) for k in compositions(n)]


def upsilon_apply(ups: UpsilonMap, f: Callable, x: Sequence) -> float:
    """Evaluate sum_k Upsilon(k) prod_j f(x_j)^{k_j} at the point ``x`` of length n."""
    n = len(x)
    fx = [f(xi) for xi in x]
    total = 0.0
    for k, w in upsilon_weights(ups, n):
        term = float(w)
        for j, kj in enumerate(k.parts):
            term = term * fx[j] ** kj
        total = total + term
    return total


@lru_cache(maxsize=None)
def _rv_sum(n: int) -> Fraction:
    total = Fraction(0)
    for k in _compositions(n):
        parts, ell = k.parts, k.length
        inner = 0
        # indices r, s are 1-based in the definition; r starts at 2
        for r in range(2, ell + 1):
            for s in range(r + 1, ell + 1):
                inner += parts[r - 1] * parts[s - 1]
            inner += parts[r - 1] * (parts[r - 1] - n)
        total += upsilon(UPSILON0, k) * inner
    return -total


def rv_sum(n: int) -> Fraction:
    """The composition double sum which equals 1 at n = 2 and 0 otherwise."""
    return _rv_sum(_check_order(n, 10))


def gamma_from_generating_function(nmax: int) -> dict[tuple[int, int], Fraction]:
    """gamma^n_m read off n! [x^n q^m] of -log(1 + (1+q)(e^x - 1)).

    Independent of the composition sum: the series is expanded with exact
    rational coefficients as a bivariate truncated power series.
    """
    # y = e^x - 1 as a series in x with coefficients Fraction, no q dependence
    y = [Fraction(0)] + [Fraction(1, factorial(j)) for j in range(1, nmax + 1)]

    def mul(a, b):
        out = [[Fraction(0)] * (nmax + 1) for _ in range(nmax + 1)]
        for i, row in enumerate(a):
            for m, c in enumerate(row):
                if c == 0:
                    continue
                for j in range(nmax + 1 - i):
                    for mm in range(nmax + 1 - m):
                        d = b[j][mm]
                        if d:
                            out[i + j][m + mm] += c * d
        return out

    # u = (1 + q) y as array[x power][q power]
    u = [[Fraction(0)] * (nmax + 1) for _ in range(nmax + 1)]
    for i in range(nmax + 1):
        u[i][0] = y[i]
        if nmax >= 1:
            u[i][1] = y[i]
    # -log(1 + u) = sum_l (-1)^l u^l / l; u has no constant term so l <= nmax
    res = [[Fraction(0)] * (nmax + 1) for _ in range(nmax + 1)]
    power = u
    for ell in range(1, nmax + 1):
        coef = Fraction((-1) ** ell, ell)
        for i in range(nmax + 1):
            for m in range(nmax + 1):
                res[i][m] += coef * power[i][m]
        power = mul(power, u)
    return {(n, m): res[n][m] * factorial(n) for n in range(1, nmax + 1) for m in range(0, n + 1)}


def identity_report(nmax: int = 10, gf_nmax: int = 8) -> list[tuple[str, bool]]:
    """Run every exact identity; returns (label, passed) pairs."""
    checks: list[tuple[str, bool]] = []
    for n in range(2, nmax + 1):
        checks.append((f"sum Upsilon0 over k|-{n} = 0", sum(upsilon(UPSILON0, k) for k in compositions(n)) == 0))
    for n in range(1, nmax + 1):
        for m in range(1, n + 1):
            s = sum(upsilon(UpsilonMap(m), k) for k in compositions(n))
            checks.append((f"sum Upsilon{m} over k|-{n} = 0", s == 0))
    for n in range(1, nmax + 1):
        # the composition sum gives gamma^1_0 = -1 (the generating function is -x at q = 0)
        checks.append((f"gamma^{n}_0 = -delta_1(n)", gamma_coeff(n, 0) == (-1 if n == 1 else 0)))
        checks.append((f"gamma^{n}_1 = (-1)^n", gamma_coeff(n, 1) == (-1) ** n))
    gf = gamma_from_generating_function(gf_nmax)
    for (n, m), val in gf.items():
        checks.append((f"gamma^{n}_{m} = generating function", gamma_coeff(n, m) == val))
    for n in range(1, nmax + 1):
        checks.append((f"rv_sum({n}) = delta_2(n)", rv_sum(n) == (1 if n == 2 else 0)))
    for n in range(1, nmax + 1):
        cs = compositions(n)
        ok = len(cs) == 2 ** (n - 1) and len(set(cs)) == len(cs) and all(k.n == n for k in cs)
        checks.append((f"|compositions({n})| = 2^{n - 1}", ok))
    return checks


def iter_weighted(ups: UpsilonMap, n: int) -> Iterable[tuple[tuple[int, ...], float]]:
    """(parts, float weight) pairs, skipping zero weights."""
    for k, w in upsilon_weights(ups, n):
        if w != 0:
            yield k.parts, float(w)


__all__ = [
    "Composition",
    "CompositionRangeError",
    "MAX_ORDER",
    "UPSILON0",
    "UpsilonMap",
    "compositions",
    "gamma_coeff",
    "gamma_from_generating_function",
    "identity_report",
    "iter_weighted",
    "multinomial",
    "rv_sum",
    "upsilon",
    "upsilon_apply",
    "upsilon_weights",
]
