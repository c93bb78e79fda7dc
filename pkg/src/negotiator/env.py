"""Multi-issue bargaining environment.

Three item types (books, hats, balls) are divided between two agents with
private integer valuations.  Each agent's valuation totals 10 points against
the item pool.  If the two final claims conflict, both agents score zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

ITEM_NAMES = ("book", "hat", "ball")
N_ITEM_TYPES = 3
TOTAL_VALUE = 10


class ScenarioSamplingError(RuntimeError):
    """Raised when rejection sampling exhausts its attempt budget."""


@dataclass(frozen=True)
class ItemPool:
    counts: tuple[int, int, int]

    @property
    def total(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class Valuation:
    values: tuple[int, int, int]


@dataclass(frozen=True)
class Allocation:
    take: tuple[int, int, int]

    def complement(self, pool: ItemPool) -> "Allocation":
        return Allocation(tuple(c - t for c, t in zip(pool.counts, self.take)))

    def feasible(self, pool: ItemPool) -> bool:
        return all(0 <= t <= c for t, c in zip(self.take, pool.counts))


@dataclass(frozen=True)
class Selection:
    """Either a claim of items or an explicit walk-away (no agreement)."""

    allocation: Optional[Allocation] = None

    @classmethod
    def claim(cls, take: tuple[int, int, int]) -> "Selection":
        return cls(Allocation(tuple(take)))

    @classmethod
    def no_agreement(cls) -> "Selection":
        return cls(None)

    @property
    def is_claim(self) -> bool:
        return self.allocation is not None


@dataclass(frozen=True)
class Scenario:
    pool: ItemPool
    valuation_a: Valuation
    valuation_b: Valuation


@dataclass(frozen=True)
class DealOutcome:
    agreed: bool
    reward_a: int
    reward_b: int
    pareto_optimal: Optional[bool] = None


@dataclass(frozen=True)
class GeneratorConfig:
    total_min: int = 5
    total_max: int = 7
    per_type_min: int = 1
    per_type_max: int = 4
    max_attempts: int = 10_000


def validate_scenario(s: Scenario) -> list[str]:
    """Return a list of constraint violations; empty means valid."""
    violations = []
    for name, val in (("valuation_a", s.valuation_a), ("valuation_b", s.valuation_b)):
        total = sum(c * v for c, v in zip(s.pool.counts, val.values))
        if total != TOTAL_VALUE:
            violations.append(f"{name} totals {total} against the pool, expected {TOTAL_VALUE}")
    for i, item in enumerate(ITEM_NAMES):
        if s.valuation_a.values[i] == 0 and s.valuation_b.values[i] == 0:
            violations.append(f"{item} has zero value to both agents")
    if not any(a > 0 and b > 0 for a, b in zip(s.valuation_a.values, s.valuation_b.values)):
        violations.append("no item type is valued by both agents")
    return violations


def _valid_pools(cfg: GeneratorConfig) -> list[tuple[int, int, int]]:
    rng_range = range(cfg.per_type_min, cfg.per_type_max + 1)
    return [
        c
        for c in itertools.product(rng_range, repeat=N_ITEM_TYPES)
        if cfg.total_min <= sum(c) <= cfg.total_max
    ]


def _valuations_for_pool(counts: tuple[int, int, int]) -> list[tuple[int, int, int]]:
    """All integer valuations v with dot(counts, v) == 10 and 0 <= v_i <= 10."""
    out = []
    c0, c1, c2 = counts
    for v0 in range(0, TOTAL_VALUE + 1):
        if c0 * v0 > TOTAL_VALUE:
            break
        for v1 in range(0, TOTAL_VALUE + 1):
            rem = TOTAL_VALUE - c0 * v0 - c1 * v1
            if rem < 0:
                break
            if c2 > 0:
                if rem % c2 == 0 and rem // c2 <= TOTAL_VALUE:
                    out.append((v0, v1, rem // c2))
            elif rem == 0:
                out.append((v0, v1, 0))
    return out


def sample_scenario(rng: np.random.Generator, cfg: GeneratorConfig = GeneratorConfig()) -> Scenario:
    """Rejection-sample a scenario satisfying all validity constraints."""
    pools = _valid_pools(cfg)
    for _ in range(cfg.max_attempts):
        if not pools:
            break
        counts = pools[rng.integers(len(pools))]
        vals = _valuations_for_pool(counts)
        if not vals:
            continue
        val_a = vals[rng.integers(len(vals))]
        val_b = vals[rng.integers(len(vals))]
        s = Scenario(ItemPool(counts), Valuation(val_a), Valuation(val_b))
        if not validate_scenario(s):
            return s
    raise ScenarioSamplingError(
        f"no valid scenario found in {cfg.max_attempts} attempts; config likely infeasible"
    )


def enumerate_allocations(pool: ItemPool) -> list[Allocation]:
    """Every feasible take for one agent, lexicographic order."""
    return [
        Allocation(take)
        for take in itertools.product(*(range(c + 1) for c in pool.counts))
    ]


def score(v: Valuation, a: Allocation) -> int:
    return sum(val * t for val, t in zip(v.values, a.take))


def is_pareto_optimal(s: Scenario, alloc_a: Allocation) -> bool:
    """True iff no feasible split strictly improves one agent without hurting the other."""
    sa = score(s.valuation_a, alloc_a)
    sb = score(s.valuation_b, alloc_a.complement(s.pool))
    for cand in enumerate_allocations(s.pool):
        ca = score(s.valuation_a, cand)
        cb = score(s.valuation_b, cand.complement(s.pool))
        if ca >= sa and cb >= sb and (ca > sa or cb > sb):
            return False
    return True


def resolve(
    pool: ItemPool,
    sel_a: Selection,
    sel_b: Selection,
    val_a: Valuation,
    val_b: Valuation,
) -> DealOutcome:
    """Resolve both final claims; conflicting or missing claims score zero."""
    if sel_a.is_claim and sel_b.is_claim:
        take_a, take_b = sel_a.allocation.take, sel_b.allocation.take
        if all(a + b == c for a, b, c in zip(take_a, take_b, pool.counts)):
            ra = score(val_a, sel_a.allocation)
            rb = score(val_b, sel_b.allocation)
            scen = Scenario(pool, val_a, val_b)
            return DealOutcome(True, ra, rb, is_pareto_optimal(scen, sel_a.allocation))
    return DealOutcome(False, 0, 0, None)


def format_scenario(s: Scenario) -> str:
    """One-line text form: interleaved pool counts / agent-A values, then agent-B values."""
    left = " ".join(
        f"{c} {v}" for c, v in zip(s.pool.counts, s.valuation_a.values)
    )
    right = " ".join(str(v) for v in s.valuation_b.values)
    return f"{left} | {right}"


def parse_scenario(line: str) -> Scenario:
    """Parse the one-line text form; accepts per-type counts in [0, 7]."""
    try:
        left, right = line.split("|")
        lnums = [int(tok) for tok in left.split()]
        rnums = [int(tok) for tok in right.split()]
    except ValueError as exc:
        raise ValueError(f"malformed scenario line: {line!r}") from exc
    if len(lnums) != 6 or len(rnums) != 3:
        raise ValueError(f"malformed scenario line: {line!r}")
    counts = tuple(lnums[0::2])
    val_a = tuple(lnums[1::2])
    if any(c < 0 or c > 7 for c in counts) or sum(counts) < 1 or sum(counts) > 7:
        raise ValueError(f"pool counts out of range: {counts}")
    return Scenario(ItemPool(counts), Valuation(val_a), Valuation(tuple(rnums)))
