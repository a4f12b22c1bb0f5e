"""Per-node support, outcome correlation, child-divergence scent, and
budgeted hierarchy cuts over an aligned cohort.

Correlation is the phi coefficient of the 2x2 table (node presence in a
patient's window x outcome label); positive values mean association with
the positive label. The displayed cut is the hierarchy antichain covering
all observed types that maximizes the summed support x |correlation| of
its nodes within a node budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .hierarchy import TypeHierarchy
from .model import CohortscopeError, EventType
from .query import AlignedCohort


class EmptyAlignedCohortError(CohortscopeError):
    pass


class DegenerateOutcomeError(CohortscopeError):
    pass


class BudgetTooSmallError(CohortscopeError):
    def __init__(self, budget: int, minimum_feasible: int) -> None:
        super().__init__(
            f"budget too small: {budget} given, minimum feasible is "
            f"{minimum_feasible}"
        )
        self.budget = budget
        self.minimum_feasible = minimum_feasible


class CutEditError(CohortscopeError):
    """A drill-down or roll-up precondition failed."""


@dataclass(frozen=True)
class ScatterPoint:
    node_id: str
    label: str
    support: float
    correlation: float
    scent: float
    patient_count: int
    has_children: bool

    def to_json_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "label": self.label,
            "support": self.support,
            "correlation": self.correlation,
            "scent": self.scent,
            "patient_count": self.patient_count,
            "has_children": self.has_children,
        }


def phi_from_counts(a: int, b: int, c: int, d: int) -> float:
    """Phi coefficient of the table [[a, b], [c, d]] with rows = presence and
    columns = positive/negative outcome; 0 when any margin is empty."""
    denom = (a + b) * (c + d) * (a + c) * (b + d)
    if denom == 0:
        return 0.0
    return (a * d - b * c) / math.sqrt(denom)


def scent(child_correlations: Iterable[float]) -> float:
    """Spread of child correlations; 0 with fewer than two children."""
    corrs = list(child_correlations)
    if len(corrs) < 2:
        return 0.0
    return max(corrs) - min(corrs)


class AlignedStats:
    """Statistics context binding a hierarchy, an aligned cohort, and labels.

    All computations are pure over immutable inputs; per-node results are
    memoized.
    """

    def __init__(
        self,
        hierarchy: TypeHierarchy,
        aligned: AlignedCohort,
        labels: Mapping[str, bool],
    ) -> None:
        self.hierarchy = hierarchy
        self.aligned = aligned
        self.labels = labels
        self._patients_by_type: dict[EventType, set[str]] = {}
        for pid, stream in aligned.streams.items():
            for ev in stream.events:
                self._patients_by_type.setdefault(ev.event_type, set()).add(pid)
        self._positives: frozenset[str] | None = None
        self._n_matched = len(aligned.matched_patient_ids)
        self._patients_cache: dict[str, frozenset[str]] = {}
        self._corr_cache: dict[str, float] = {}

    def _matched_positives(self) -> frozenset[str]:
        if self._positives is None:
            missing = [
                pid for pid in self.aligned.matched_patient_ids
                if pid not in self.labels
            ]
            if missing:
                raise CohortscopeError(
                    f"no outcome label for matched patients: {missing[:5]}"
                )
            self._positives = frozenset(
                pid
                for pid in self.aligned.matched_patient_ids
                if self.labels[pid]
            )
        return self._positives

    def patients_for(self, node_id: str) -> frozenset[str]:
        """Matched patients with at least one retained event under the node.

        Aggregation is the union of per-type patient sets, never a sum, so
        shared patients are not double counted.
        """
        cached = self._patients_cache.get(node_id)
        if cached is None:
            acc: set[str] = set()
            for et in self.hierarchy.leaf_types(node_id):
                acc |= self._patients_by_type.get(et, set())
            cached = self._patients_cache[node_id] = frozenset(acc)
        return cached

    def support(self, node_id: str) -> float:
        if self._n_matched == 0:
            raise EmptyAlignedCohortError("empty aligned cohort")
        return len(self.patients_for(node_id)) / self._n_matched

    def correlation(self, node_id: str) -> float:
        cached = self._corr_cache.get(node_id)
        if cached is not None:
            return cached
        positives = self._matched_positives()
        n_pos = len(positives)
        if n_pos == 0 or n_pos == self._n_matched:
            raise DegenerateOutcomeError(
                "degenerate outcome: need at least one positive and one "
                "negative matched patient"
            )
        present = self.patients_for(node_id)
        a = len(present & positives)
        b = len(present) - a
        c = n_pos - a
        d = self._n_matched - a - b - c
        value = phi_from_counts(a, b, c, d)
        self._corr_cache[node_id] = value
        return value

    def active_children(self, node_id: str) -> list[str]:
        return [
            c for c in self.hierarchy.node(node_id).children if self.patients_for(c)
        ]

    def scent_of(self, node_id: str) -> float:
        return scent(self.correlation(c) for c in self.active_children(node_id))

    def point(self, node_id: str) -> ScatterPoint:
        node = self.hierarchy.node(node_id)
        return ScatterPoint(
            node_id=node_id,
            label=node.label,
            support=self.support(node_id),
            correlation=self.correlation(node_id),
            scent=self.scent_of(node_id),
            patient_count=len(self.patients_for(node_id)),
            has_children=bool(self.active_children(node_id)),
        )

    def points_for(self, cut: Iterable[str]) -> list[ScatterPoint]:
        return [self.point(n) for n in sorted(cut)]

    def _score(self, node_id: str) -> float:
        return self.support(node_id) * abs(self.correlation(node_id))

    def minimum_budget(self) -> int:
        return sum(1 for r in self.hierarchy.roots if self.patients_for(r))

    def select_cut(self, budget: int) -> tuple[str, ...]:
        """Refine the root antichain into the covering cut that maximizes
        the summed support x |correlation| within the node budget.

        Computed exactly by bottom-up refinement tables over active
        subtrees (a simple tree knapsack); a one-step greedy descent gets
        trapped below plateaus where divergent children cancel, exactly the
        structures worth surfacing. Ties prefer the coarser node, so
        refinements that cannot change the objective stay aggregated.
        """
        active_roots = [r for r in self.hierarchy.roots if self.patients_for(r)]
        minimum = len(active_roots)
        if budget < minimum:
            raise BudgetTooSmallError(budget, minimum)
        if not active_roots:
            return ()

        # tables[n]: node-count k -> (best objective, cut) covering n's
        # active subtree with exactly-dominant k (dominated sizes pruned)
        tables: dict[str, dict[int, tuple[float, tuple[str, ...]]]] = {}
        stack: list[tuple[str, bool]] = [(r, False) for r in reversed(active_roots)]
        while stack:
            node_id, ready = stack.pop()
            if not ready:
                stack.append((node_id, True))
                for c in reversed(self.active_children(node_id)):
                    stack.append((c, False))
                continue
            kids = self.active_children(node_id)
            self_entry = (self._score(node_id), (node_id,))
            if not kids:
                tables[node_id] = {1: self_entry}
                continue
            combo: dict[int, tuple[float, tuple[str, ...]]] = {0: (0.0, ())}
            for c in kids:
                combo = _merge_tables(combo, tables[c], budget)
            # a single node can also cover the subtree; prefer it on ties
            current = combo.get(1)
            if current is None or self_entry[0] >= current[0] - 1e-15:
                combo[1] = self_entry
            tables[node_id] = _prune_dominated(combo)

        total: dict[int, tuple[float, tuple[str, ...]]] = {0: (0.0, ())}
        for r in active_roots:
            total = _merge_tables(total, tables[r], budget)
        best_k = max(total, key=lambda k: (total[k][0], -k))
        return tuple(sorted(total[best_k][1]))

    def drill_down(self, cut: Iterable[str], node_id: str) -> tuple[str, ...]:
        """Replace a cut node by its nonzero-support children."""
        cut_set = set(cut)
        if node_id not in cut_set:
            raise CutEditError(f"node not in current cut: {node_id}")
        if not self.hierarchy.node(node_id).children:
            raise CutEditError(f"cannot expand leaf: {node_id}")
        kids = self.active_children(node_id)
        if not kids:
            raise CutEditError(f"cannot expand {node_id}: no children with support")
        cut_set.remove(node_id)
        cut_set.update(kids)
        return tuple(sorted(cut_set))

    def roll_up(self, cut: Iterable[str], node_id: str) -> tuple[str, ...]:
        """Replace a node's children (all of which must be in the cut) by the
        node itself; inverse of drill_down."""
        cut_set = set(cut)
        kids = self.active_children(node_id)
        if not kids:
            raise CutEditError(f"cannot roll up into {node_id}: no active children")
        missing = [k for k in kids if k not in cut_set]
        if missing:
            raise CutEditError(
                f"cannot roll up into {node_id}: children not in cut: "
                + ", ".join(missing)
            )
        cut_set.difference_update(kids)
        cut_set.add(node_id)
        return tuple(sorted(cut_set))


def _merge_tables(
    left: dict[int, tuple[float, tuple[str, ...]]],
    right: dict[int, tuple[float, tuple[str, ...]]],
    budget: int,
) -> dict[int, tuple[float, tuple[str, ...]]]:
    out: dict[int, tuple[float, tuple[str, ...]]] = {}
    for k1, (o1, c1) in left.items():
        for k2, (o2, c2) in right.items():
            k = k1 + k2
            if k > budget:
                continue
            current = out.get(k)
            if current is None or o1 + o2 > current[0] + 1e-15:
                out[k] = (o1 + o2, c1 + c2)
    return _prune_dominated(out)


def _prune_dominated(
    table: dict[int, tuple[float, tuple[str, ...]]],
) -> dict[int, tuple[float, tuple[str, ...]]]:
    out: dict[int, tuple[float, tuple[str, ...]]] = {}
    best = float("-inf")
    for k in sorted(table):
        obj, cut = table[k]
        if obj > best + 1e-15 or not out:
            out[k] = (obj, cut)
            best = max(best, obj)
    return out


def is_antichain(hierarchy: TypeHierarchy, cut: Iterable[str]) -> bool:
    cut_set = set(cut)
    for node_id in cut_set:
        cursor = hierarchy.node(node_id).parent
        while cursor is not None:
            if cursor in cut_set:
                return False
            cursor = hierarchy.nodes[cursor].parent
    return True


def covers_observed(
    hierarchy: TypeHierarchy, cut: Iterable[str], aligned: AlignedCohort
) -> bool:
    covered: set[EventType] = set()
    for node_id in cut:
        covered |= hierarchy.leaf_types(node_id)
    return aligned.observed_types() <= covered


def support(node_id: str, aligned: AlignedCohort, hierarchy: TypeHierarchy) -> float:
    return AlignedStats(hierarchy, aligned, {}).support(node_id)


def correlation(
    node_id: str,
    aligned: AlignedCohort,
    hierarchy: TypeHierarchy,
    labels: Mapping[str, bool],
) -> float:
    return AlignedStats(hierarchy, aligned, labels).correlation(node_id)


def select_cut(
    hierarchy: TypeHierarchy,
    aligned: AlignedCohort,
    labels: Mapping[str, bool],
    budget: int,
) -> tuple[tuple[str, ...], list[ScatterPoint]]:
    stats = AlignedStats(hierarchy, aligned, labels)
    cut = stats.select_cut(budget)
    return cut, stats.points_for(cut)


def drill_down(
    cut: Iterable[str],
    node_id: str,
    hierarchy: TypeHierarchy,
    aligned: AlignedCohort,
    labels: Mapping[str, bool],
) -> tuple[str, ...]:
    return AlignedStats(hierarchy, aligned, labels).drill_down(cut, node_id)
