"""A tour of the bargaining environment.

Two agents split a small pool of books, hats, and balls.  Each agent has a
private integer valuation over the item types that dots to exactly 10 against
the pool, so a perfectly selfish agent can score at most 10.  If the final
claims conflict, both sides walk away with nothing.

Run with:  python3 demos/bargaining_environment_tour.py
"""

import numpy as np

from negotiator import (
    Allocation,
    Selection,
    enumerate_allocations,
    format_scenario,
    is_pareto_optimal,
    resolve,
    sample_scenario,
    score,
)

rng = np.random.default_rng(7)

# ---------------------------------------------------------------------------
# Sampling scenarios
# ---------------------------------------------------------------------------
print("Three random scenarios (pool/own-values | partner-values):")
for _ in range(3):
    print("  ", format_scenario(sample_scenario(rng)))

s = sample_scenario(np.random.default_rng(0))
print("\nWorking scenario:", format_scenario(s))
print("pool counts:", s.pool.counts)
print("agent A values:", s.valuation_a.values, "-> dot with pool =",
      sum(c * v for c, v in zip(s.pool.counts, s.valuation_a.values)))
print("agent B values:", s.valuation_b.values)

# ---------------------------------------------------------------------------
# Enumerating every possible split
# ---------------------------------------------------------------------------
allocations = enumerate_allocations(s.pool)
expected = np.prod([c + 1 for c in s.pool.counts])
print(f"\n{len(allocations)} possible splits (product of counts+1 = {expected})")

# Score every split from both sides and find the Pareto-optimal ones.
frontier = [a for a in allocations if is_pareto_optimal(s, a)]
print(f"{len(frontier)} of them are Pareto optimal:")
for a in frontier:
    ra = score(s.valuation_a, a)
    rb = score(s.valuation_b, a.complement(s.pool))
    print(f"   A takes {a.take}  ->  rewards ({ra}, {rb})")

# ---------------------------------------------------------------------------
# Resolving final claims
# ---------------------------------------------------------------------------
best = max(frontier, key=lambda a: score(s.valuation_a, a))
outcome = resolve(
    s.pool,
    Selection(best),
    Selection(best.complement(s.pool)),
    s.valuation_a,
    s.valuation_b,
)
print("\nCompatible claims:", outcome)

greedy = Allocation(s.pool.counts)  # both agents claim everything
outcome = resolve(s.pool, Selection(greedy), Selection(greedy),
                  s.valuation_a, s.valuation_b)
print("Conflicting claims:", outcome, " <- both sides get zero")
