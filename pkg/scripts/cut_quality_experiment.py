#!/usr/bin/env python3
"""Measure cut selection against exhaustive search on random instances.

This experiment motivated replacing one-step greedy refinement with the
exact budgeted antichain DP: the greedy stalls on plateaus where divergent
children cancel, bottoming out around 26% of the optimum; the DP matches
the exhaustive optimum everywhere.

Usage: python scripts/cut_quality_experiment.py [n_instances] [seed]
"""

import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from oracles import best_cut_exhaustive, random_stats_instance  # noqa: E402


def one_step_greedy(stats, budget):
    """The naive variant kept for comparison: expand only while a single
    replacement strictly improves the objective."""
    active_roots = [r for r in stats.hierarchy.roots if stats.patients_for(r)]
    cut = set(active_roots)
    while True:
        best = None
        for node_id in sorted(cut):
            kids = stats.active_children(node_id)
            if not kids or len(cut) - 1 + len(kids) > budget:
                continue
            delta = sum(stats._score(k) for k in kids) - stats._score(node_id)
            if delta <= 0:
                continue
            if best is None or delta > best[0]:
                best = (delta, node_id, kids)
        if best is None:
            return tuple(sorted(cut))
        _, node_id, kids = best
        cut.remove(node_id)
        cut.update(kids)


def main(n_instances: int, seed: int) -> None:
    rng = random.Random(seed)
    stats_rows = []
    checked = 0
    while checked < n_instances:
        instance = random_stats_instance(rng)
        if instance is None:
            continue
        hierarchy, aligned, stats, budget = instance
        best, _ = best_cut_exhaustive(hierarchy, stats, budget)
        if best <= 1e-12:
            continue
        dp = sum(stats._score(n) for n in stats.select_cut(budget)) / best
        greedy = sum(stats._score(n) for n in one_step_greedy(stats, budget)) / best
        stats_rows.append((dp, greedy))
        checked += 1
    dp_ratios = sorted(r[0] for r in stats_rows)
    greedy_ratios = sorted(r[1] for r in stats_rows)
    below = sum(1 for r in greedy_ratios if r < 0.9)
    print(f"instances: {checked} (seed {seed})")
    print(f"exact DP      : worst {dp_ratios[0]:.6f}, "
          f"median {dp_ratios[len(dp_ratios) // 2]:.6f}")
    print(f"1-step greedy : worst {greedy_ratios[0]:.6f}, "
          f"median {greedy_ratios[len(greedy_ratios) // 2]:.6f}, "
          f"{below} below 0.9 ({100 * below / checked:.1f}%)")


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 12345
    main(n, seed)
