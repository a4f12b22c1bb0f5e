"""Navigable event-type forest merging vocabulary edges, manual supplements,
and per-category/per-imputation-method lab subtypes.

Every event type observed in a dataset maps to exactly one node; types with
no edge in either source hang under a synthetic ``UNMAPPED/<class>`` root so
novel codes stay visible instead of silently vanishing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .imputation import Category, CategorizedLabEvent, parse_lab_code
from .model import CohortscopeError, EventType, Provenance

logger = logging.getLogger(__name__)


class HierarchyError(CohortscopeError):
    pass


class HierarchyCycleError(HierarchyError):
    pass


class UnknownNodeError(HierarchyError):
    pass


@dataclass(frozen=True)
class Edge:
    parent_system: str
    parent_code: str
    child_system: str
    child_code: str
    child_label: str


def read_edge_file(path: Path) -> list[Edge]:
    """Parse a tab-separated edge file: parent_class, parent_code,
    child_class, child_code, child_label."""
    edges = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise HierarchyError(
                    f"{path}:{lineno}: expected 5 tab-separated fields, "
                    f"got {len(fields)}"
                )
            edges.append(Edge(*fields))
    return edges


def write_edge_file(path: Path, edges: Iterable[Edge]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# parent_class\tparent_code\tchild_class\tchild_code\tchild_label\n")
        for e in edges:
            fh.write(
                f"{e.parent_system}\t{e.parent_code}\t{e.child_system}"
                f"\t{e.child_code}\t{e.child_label}\n"
            )


@dataclass(frozen=True)
class TypeNode:
    node_id: str
    label: str
    event_type: EventType | None
    parent: str | None
    children: tuple[str, ...]


_PROVENANCE_LABEL = {
    Provenance.RAW: "observed range",
    Provenance.LOCAL_IMPUTED: "patient-imputed range",
    Provenance.GLOBAL_IMPUTED: "population-imputed range",
}


def _node_id(system: str, code: str) -> str:
    return f"{system}/{code}"


class _Node:
    """Mutable node used during construction."""

    __slots__ = ("node_id", "label", "event_type", "parent", "children")

    def __init__(self, node_id, label, event_type=None, parent=None):
        self.node_id = node_id
        self.label = label
        self.event_type = event_type
        self.parent = parent
        self.children: list[str] = []


class TypeHierarchy:
    """Immutable forest over event types; build via build_hierarchy()."""

    def __init__(
        self,
        nodes: dict[str, TypeNode],
        roots: tuple[str, ...],
        index: dict[EventType, str],
    ) -> None:
        self.nodes = nodes
        self.roots = roots
        self.index = index
        self._leaf_types: dict[str, frozenset[EventType]] = self._compute_leaf_types()

    def _compute_leaf_types(self) -> dict[str, frozenset[EventType]]:
        acc: dict[str, set[EventType]] = {nid: set() for nid in self.nodes}
        for et, nid in self.index.items():
            cursor: str | None = nid
            while cursor is not None:
                acc[cursor].add(et)
                cursor = self.nodes[cursor].parent
        return {nid: frozenset(types) for nid, types in acc.items()}

    def node(self, node_id: str) -> TypeNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"no such node: {node_id}") from None

    def parent_of(self, node_id: str) -> TypeNode | None:
        parent = self.node(node_id).parent
        return None if parent is None else self.nodes[parent]

    def children_of(self, node_id: str) -> list[TypeNode]:
        return [self.nodes[c] for c in self.node(node_id).children]

    def leaf_types(self, node_id: str) -> frozenset[EventType]:
        self.node(node_id)
        return self._leaf_types[node_id]

    def node_for_type(self, event_type: EventType) -> TypeNode | None:
        nid = self.index.get(event_type)
        return None if nid is None else self.nodes[nid]

    def search(self, query: str) -> list[TypeNode]:
        """Case-insensitive substring match over labels, shortest label first."""
        if not query:
            return []
        needle = query.lower()
        hits = [n for n in self.nodes.values() if needle in n.label.lower()]
        hits.sort(key=lambda n: (len(n.label), n.label, n.node_id))
        return hits


def navigate(
    hierarchy: TypeHierarchy, node_id: str, direction: str
) -> TypeNode | None | list[TypeNode]:
    """Step to a node's parent (None at a root) or its ordered children."""
    if direction == "parent":
        return hierarchy.parent_of(node_id)
    if direction == "children":
        return hierarchy.children_of(node_id)
    raise ValueError(f"direction must be 'parent' or 'children', got {direction!r}")


class _Builder:
    def __init__(self) -> None:
        self.nodes: dict[str, _Node] = {}
        self.index: dict[EventType, str] = {}
        # (system, code) -> source that assigned the parent ("manual"/"vocab")
        self._parent_source: dict[str, str] = {}

    @classmethod
    def from_hierarchy(cls, hierarchy: TypeHierarchy) -> "_Builder":
        b = cls()
        for nid, node in hierarchy.nodes.items():
            n = _Node(nid, node.label, node.event_type, node.parent)
            n.children = list(node.children)
            b.nodes[nid] = n
        b.index = dict(hierarchy.index)
        return b

    def ensure(
        self, system: str, code: str, label: str | None = None
    ) -> _Node:
        nid = _node_id(system, code)
        node = self.nodes.get(nid)
        if node is None:
            node = _Node(nid, label or code, EventType(system=system, code=code))
            self.nodes[nid] = node
        elif label:
            node.label = label
        return node

    def add_edge(self, edge: Edge, source: str) -> None:
        parent = self.ensure(edge.parent_system, edge.parent_code)
        child_id = _node_id(edge.child_system, edge.child_code)
        existing = self.nodes.get(child_id)
        if existing is not None and existing.parent is not None:
            if existing.parent == parent.node_id:
                if edge.child_label and self._parent_source[child_id] == source:
                    existing.label = edge.child_label
                return
            if self._parent_source[child_id] == source:
                logger.warning(
                    "ignoring extra parent %s for %s (keeping %s)",
                    parent.node_id,
                    child_id,
                    existing.parent,
                )
            else:
                # manual edges are processed first, so a conflicting
                # assignment can only lose to an earlier manual one
                logger.warning(
                    "parent conflict for %s: manual says %s, vocabulary says %s "
                    "(manual wins)",
                    child_id,
                    existing.parent,
                    parent.node_id,
                )
            return
        child = self.ensure(edge.child_system, edge.child_code, edge.child_label)
        child.parent = parent.node_id
        parent.children.append(child_id)
        self._parent_source[child_id] = source

    def _check_acyclic(self) -> None:
        settled: set[str] = set()
        for start in self.nodes:
            path: list[str] = []
            seen: set[str] = set()
            cursor: str | None = start
            while cursor is not None and cursor not in settled:
                if cursor in seen:
                    cycle = path[path.index(cursor):] + [cursor]
                    raise HierarchyCycleError(
                        "cycle in type hierarchy: " + " -> ".join(cycle)
                    )
                seen.add(cursor)
                path.append(cursor)
                cursor = self.nodes[cursor].parent
            settled.update(path)

    def unmapped_root(self, system: str) -> _Node:
        nid = f"UNMAPPED/{system}"
        node = self.nodes.get(nid)
        if node is None:
            node = _Node(nid, f"Unmapped {system} codes")
            self.nodes[nid] = node
        return node

    def attach_leaf(self, parent: _Node, node_id: str, label: str,
                    event_type: EventType | None) -> _Node:
        node = self.nodes.get(node_id)
        if node is None:
            node = _Node(node_id, label, event_type, parent.node_id)
            self.nodes[node_id] = node
            parent.children.append(node_id)
        return node

    def ensure_lab_chain(
        self, loinc_code: str, category: Category, provenance: Provenance
    ) -> _Node:
        """Lab node -> category node -> provenance leaf (or a single
        no-range leaf for UNCATEGORIZED), mirroring how analysts drill
        from a test to its imputation methods."""
        lab = self.nodes.get(_node_id("LOINC", loinc_code))
        if lab is None:
            lab = self.attach_leaf(
                self.unmapped_root("LOINC"),
                _node_id("LOINC", loinc_code),
                loinc_code,
                EventType(system="LOINC", code=loinc_code),
            )
        if (
            lab.event_type is not None
            and self.index.get(lab.event_type) == lab.node_id
        ):
            # the bare code itself is observed: re-home those events to a
            # leaf so the category children about to be added stay disjoint
            direct = self.attach_leaf(
                lab, f"{lab.node_id}/direct", f"{lab.label} (this code)",
                lab.event_type,
            )
            self.index[lab.event_type] = direct.node_id
        if category is Category.UNCATEGORIZED:
            return self.attach_leaf(
                lab,
                f"{lab.node_id}:UNCATEGORIZED",
                f"{lab.label}: no reference range",
                EventType(system="LOINC", code=f"{loinc_code}:UNCATEGORIZED"),
            )
        cat_node = self.attach_leaf(
            lab,
            f"{lab.node_id}:{category.value}",
            f"{lab.label}: {category.value.lower()}",
            EventType(system="LOINC", code=f"{loinc_code}:{category.value}"),
        )
        leaf_code = f"{loinc_code}:{category.value}:{provenance.value}"
        return self.attach_leaf(
            cat_node,
            f"LOINC/{leaf_code}",
            f"{lab.label}: {category.value.lower()} ({_PROVENANCE_LABEL[provenance]})",
            EventType(system="LOINC", code=leaf_code),
        )

    def attach_observed(self, event_type: EventType) -> None:
        if event_type in self.index:
            return
        lab = parse_lab_code(event_type)
        if lab is not None:
            leaf = self.ensure_lab_chain(*lab)
            self.index[event_type] = leaf.node_id
            return
        nid = _node_id(event_type.system, event_type.code)
        node = self.nodes.get(nid)
        if node is None:
            node = self.attach_leaf(
                self.unmapped_root(event_type.system),
                nid,
                event_type.code,
                event_type,
            )
        if node.children:
            # interior node with directly-coded events: give those events
            # their own leaf so sibling leaf sets stay disjoint under drill-down
            leaf = self.attach_leaf(
                node, f"{nid}/direct", f"{node.label} (this code)", event_type
            )
            self.index[event_type] = leaf.node_id
        else:
            node.event_type = event_type
            self.index[event_type] = nid

    def freeze(self) -> TypeHierarchy:
        self._check_acyclic()
        frozen: dict[str, TypeNode] = {}
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            children = tuple(
                sorted(set(n.children), key=lambda c: (self.nodes[c].event_type.code
                                                       if self.nodes[c].event_type
                                                       else c, c))
            )
            frozen[nid] = TypeNode(
                node_id=nid,
                label=n.label,
                event_type=n.event_type,
                parent=n.parent,
                children=children,
            )
        roots = tuple(nid for nid in sorted(frozen) if frozen[nid].parent is None)
        return TypeHierarchy(frozen, roots, dict(self.index))


def build_hierarchy(
    vocab_edges: Sequence[Edge],
    manual_edges: Sequence[Edge],
    observed_types: Iterable[EventType],
) -> TypeHierarchy:
    """Merge manual edges over vocabulary edges and attach every observed type.

    Manual edges win parent conflicts. The result is independent of edge
    row order up to the documented first-edge-wins rule for multi-parent
    rows within one source.
    """
    builder = _Builder()
    for edge in manual_edges:
        builder.add_edge(edge, "manual")
    for edge in vocab_edges:
        builder.add_edge(edge, "vocab")
    for et in sorted(observed_types):
        builder.attach_observed(et)
    return builder.freeze()


def insert_imputation_subtypes(
    hierarchy: TypeHierarchy, labs: Iterable[CategorizedLabEvent]
) -> TypeHierarchy:
    """Add category and imputation-method subtype nodes for each lab present.

    Idempotent: re-inserting the same labs returns an identical hierarchy.
    """
    triples = sorted(
        {(lab.loinc_code, lab.category, lab.provenance) for lab in labs},
        key=lambda t: (t[0], t[1].value, t[2].value),
    )
    builder = _Builder.from_hierarchy(hierarchy)
    for loinc_code, category, provenance in triples:
        leaf = builder.ensure_lab_chain(loinc_code, category, provenance)
        if leaf.event_type is not None:
            builder.index.setdefault(leaf.event_type, leaf.node_id)
    return builder.freeze()
