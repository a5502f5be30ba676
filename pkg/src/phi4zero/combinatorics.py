"""Odd-part decompositions and their weights for the B and C terms.

A level ``n`` (odd) of the hierarchy couples to

* pairs ``(j1, j2)`` with ``j1`` odd, ``j2`` even and ``>= 2``, ``j1 + j2 = n``,
  weighted by ``n! / (j1! j2!)``;
* unordered triples ``{i1, i2, i3}`` of odd parts summing to ``n``, weighted
  by ``n! / (i1! i2! i3! sigma)`` where ``sigma`` is the product of the
  factorials of the part multiplicities.

The pair domain excludes ``j2 = 0``: with it the n = 3 equation would carry
``12 Lambda H^2`` instead of the ``9 Lambda H^2`` that the closed-form
``delta_3'`` update requires. See ``docs/derivation.md``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "PairPartition",
    "TriplePartition",
    "LevelTable",
    "enumerate_pair_partitions",
    "enumerate_triple_partitions",
    "symmetry_factor",
    "multinomial_weight",
    "level_table",
]


@dataclass(frozen=True)
class PairPartition:
    j1: int
    j2: int
    weight: float


@dataclass(frozen=True)
class TriplePartition:
    parts: tuple[int, int, int]
    sigma_sym: int
    weight: float


def _check_level(n: int) -> None:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError(f"level must be an integer, got {n!r}")
    if n < 3 or n % 2 == 0:
        raise ValueError(f"level must be odd and >= 3, got {n}")


def symmetry_factor(parts) -> int:
    """Product of factorials of the multiplicities of ``parts`` (3 entries)."""
    parts = tuple(parts)
    if len(parts) != 3:
        raise ValueError(f"expected exactly 3 parts, got {len(parts)}")
    return math.prod(math.factorial(m) for m in Counter(parts).values())


def multinomial_weight(n: int, parts, sigma: int = 1) -> float:
    """Return ``n! / (prod(p!) * sigma)`` evaluated in log space.

    Raises
    ------
    ValueError
        If the parts do not sum to ``n`` or ``sigma < 1``.
    OverflowError
        If the result does not fit in a double.
    """
    parts = list(parts)
    if sum(parts) != n:
        raise ValueError(f"parts {parts} do not sum to {n}")
    if sigma < 1:
        raise ValueError("sigma must be >= 1")
    log_w = math.lgamma(n + 1) - math.log(sigma)
    for p in parts:
        log_w -= math.lgamma(p + 1)
    # math.exp raises OverflowError on its own past ~709.78
    return math.exp(log_w)


@lru_cache(maxsize=None)
def _pairs(n: int) -> tuple[PairPartition, ...]:
    return tuple(
        PairPartition(j1, n - j1, multinomial_weight(n, (j1, n - j1)))
        for j1 in range(1, n - 1, 2)
    )


@lru_cache(maxsize=None)
def _triples(n: int) -> tuple[TriplePartition, ...]:
    out = []
    for a in range(1, n + 1, 2):
        for b in range(a, n + 1, 2):
            c = n - a - b
            if c < b:
                break
            if c % 2 == 0:
                continue
            s = symmetry_factor((a, b, c))
            out.append(TriplePartition((a, b, c), s, multinomial_weight(n, (a, b, c), s)))
    return tuple(out)


def enumerate_pair_partitions(n: int) -> list[PairPartition]:
    """All ``(j1, j2)`` with ``j1`` odd, ``j2`` even ``>= 2``, ascending in ``j1``."""
    _check_level(n)
    return list(_pairs(int(n)))


def enumerate_triple_partitions(n: int) -> list[TriplePartition]:
    """All multisets of three odd parts summing to ``n``, lexicographic by sorted parts."""
    _check_level(n)
    return list(_triples(int(n)))


@dataclass(frozen=True)
class LevelTable:
    """Index arrays into a component vector for one level.

    Component ``H^{k+1}`` (``k`` odd) lives at array index ``(k - 1) // 2``.
    """

    n: int
    pair_hi: np.ndarray  # index of H^{j2+2}
    pair_lo: np.ndarray  # index of H^{j1+1}
    pair_w: np.ndarray
    tri_a: np.ndarray
    tri_b: np.ndarray
    tri_c: np.ndarray
    tri_w: np.ndarray


def _frozen(a) -> np.ndarray:
    arr = np.asarray(a)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def level_table(n: int) -> LevelTable:
    _check_level(n)
    pairs = _pairs(int(n))
    triples = _triples(int(n))
    return LevelTable(
        n=int(n),
        pair_hi=_frozen(np.array([p.j2 // 2 for p in pairs], dtype=np.intp)),
        pair_lo=_frozen(np.array([(p.j1 - 1) // 2 for p in pairs], dtype=np.intp)),
        pair_w=_frozen(np.array([p.weight for p in pairs], dtype=float)),
        tri_a=_frozen(np.array([(t.parts[0] - 1) // 2 for t in triples], dtype=np.intp)),
        tri_b=_frozen(np.array([(t.parts[1] - 1) // 2 for t in triples], dtype=np.intp)),
        tri_c=_frozen(np.array([(t.parts[2] - 1) // 2 for t in triples], dtype=np.intp)),
        tri_w=_frozen(np.array([t.weight for t in triples], dtype=float)),
    )
