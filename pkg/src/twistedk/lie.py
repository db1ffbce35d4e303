"""Root data of type A_n, the Weyl dimension formula and level-k congruences."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce


@dataclass(frozen=True)
class RootSystemA:
    """A_n realised in R^{n+1}: simple roots e_i - e_{i+1}, weights projected to sum zero."""

    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")

    @property
    def ambient(self) -> int:
        return self.rank + 1

    @cached_property
    def simple_roots(self) -> tuple[tuple[Fraction, ...], ...]:
        out = []
        for i in range(self.rank):
            v = [Fraction(0)] * self.ambient
            v[i], v[i + 1] = Fraction(1), Fraction(-1)
            out.append(tuple(v))
        return tuple(out)

    @cached_property
    def fundamental_weights(self) -> tuple[tuple[Fraction, ...], ...]:
        n1 = self.ambient
        out = []
        for i in range(1, self.rank + 1):
            out.append(tuple(Fraction(1 if a < i else 0) - Fraction(i, n1) for a in range(n1)))
        return tuple(out)

    @cached_property
    def positive_roots(self) -> tuple[tuple[Fraction, ...], ...]:
        out = []
        for a, b in itertools.combinations(range(self.ambient), 2):
            v = [Fraction(0)] * self.ambient
            v[a], v[b] = Fraction(1), Fraction(-1)
            out.append(tuple(v))
        return tuple(out)

    @cached_property
    def weyl_vector(self) -> tuple[Fraction, ...]:
        return self.weight([1] * self.rank)

    def weight(self, coeffs) -> tuple[Fraction, ...]:
        """Vector of the weight sum_i coeffs[i] * lambda_i."""
        if len(coeffs) != self.rank:
            raise ValueError(f"expected {self.rank} coefficients")
        out = [Fraction(0)] * self.ambient
        for c, lam in zip(coeffs, self.fundamental_weights):
            for a in range(self.ambient):
                out[a] += c * lam[a]
        return tuple(out)


def inner(u, v) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def weyl_dim(rs: RootSystemA, coeffs) -> int:
    """prod over positive roots of <w + rho, a> / <rho, a>, in exact arithmetic."""
    coeffs = [int(c) for c in coeffs]
    if any(c < 0 for c in coeffs):
        raise ValueError("weight must be dominant")
    w = rs.weight(coeffs)
    rho = rs.weyl_vector
    shifted = tuple(a + b for a, b in zip(w, rho))
    num = Fraction(1)
    for alpha in rs.positive_roots:
        num *= inner(shifted, alpha) / inner(rho, alpha)
    if num.denominator != 1:
        raise ArithmeticError(f"non-integral dimension {num}")
    return int(num)


def subsets(rank: int):
    for size in range(1, rank + 1):
        yield from itertools.combinations(range(1, rank + 1), size)


def level_weight(rank: int, k: int, subset) -> list[int]:
    """Coefficients of k * sum_{i in subset} lambda_i (1-based indices)."""
    coeffs = [0] * rank
    for i in subset:
        if not 1 <= i <= rank:
            raise ValueError(f"index {i} outside 1..{rank}")
        coeffs[i - 1] = k
    return coeffs


def congruence_table(rs: RootSystemA, k: int) -> list[tuple[tuple[int, ...], int]]:
    return [(s, weyl_dim(rs, level_weight(rs.rank, k, s))) for s in subsets(rs.rank)]


def cyclic_order_bound(rs: RootSystemA, k: int) -> int:
    """gcd of dim V(k sum_I lambda_i) - 1 over all nonempty subsets I."""
    if k < 1:
        raise ValueError("k must be positive")
    return reduce(math.gcd, (dim - 1 for _, dim in congruence_table(rs, k)), 0)


def known_cyclic_order(rank: int, k: int) -> int | None:
    """Orders quoted for SU(2) (all k) and SU(3) (even k); None when not known."""
    if rank == 1:
        return k
    if rank == 2 and k % 2 == 0:
        return k // 2
    return None


class InadmissibleError(ValueError):
    pass


def su3_brane_degree_check(k: int, j: Fraction | float | str) -> tuple[int, int]:
    """Return (2(2j+1) mod bound, bound) for an admissible SU(3) brane (k, j)."""
    j = Fraction(j)
    two_j = 2 * j
    if two_j.denominator != 1 or two_j < 0:
        raise InadmissibleError("2j must be a nonnegative integer")
    if two_j > k - 3:
        raise InadmissibleError(f"need 2j <= k - 3 = {k - 3}")
    integral = j.denominator == 1
    if integral != ((k - 3) % 2 == 0):
        raise InadmissibleError("j must be an integer exactly when k - 3 is even")
    bound = cyclic_order_bound(RootSystemA(2), k)
    return int(2 * (two_j + 1)) % bound, bound
