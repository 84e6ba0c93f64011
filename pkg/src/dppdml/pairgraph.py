"""Undirected graph model of a pairwise dataset.

Every labelled pair (feature difference + same/different flag) becomes an
edge between its two participants; the structural queries needed by the
privacy-distance computation (degrees, components, removal effects) live
here. Graphs are immutable: mutating operations return new graphs, so all
queries are safe to run concurrently.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateEdge,
    MissingEdge,
    ParseError,
    SelfLoop,
    UnknownNode,
)

NodeId = str | int

RELATION_KINDS = ("transitive", "intransitive")


@dataclass(frozen=True, eq=False)
class PairwiseDatum:
    """One labelled pair: participants i, j; feature difference; binary label.

    ``y == 0`` marks a same-class pair, ``y == 1`` a different-class pair.
    """

    i: NodeId
    j: NodeId
    delta_x: np.ndarray
    y: int

    def __post_init__(self):
        if self.i == self.j:
            raise SelfLoop(f"pair ({self.i}, {self.j}) is a self-loop")
        if self.y not in (0, 1):
            raise ValueError(f"pair label must be 0 or 1, got {self.y!r}")
        dx = np.asarray(self.delta_x, dtype=float)
        if dx.ndim != 1:
            raise DimensionMismatch(f"delta_x must be 1-D, got shape {dx.shape}")
        if not np.all(np.isfinite(dx)):
            raise ValueError(f"pair ({self.i}, {self.j}) has non-finite features")
        dx.setflags(write=False)
        object.__setattr__(self, "delta_x", dx)

    @property
    def dim(self) -> int:
        return self.delta_x.shape[0]

    def key(self) -> tuple[NodeId, NodeId]:
        """Unordered endpoint pair in a canonical order."""
        a, b = self.i, self.j
        return (a, b) if _node_sort_key(a) <= _node_sort_key(b) else (b, a)


def _node_sort_key(n: NodeId):
    # ints sort before strings so mixed id types stay orderable
    return (0, n, "") if isinstance(n, int) else (1, 0, str(n))


class PairGraph:
    """Simple undirected graph whose edges carry pairwise data.

    Node ids are opaque; internally they are normalised to dense indices in
    order of first appearance, which fixes all tie-breaking (flow augmenting
    order, reductions) deterministically for a given input order.
    """

    def __init__(
        self,
        pairs: Sequence[PairwiseDatum],
        relation_kind: str = "transitive",
        extra_nodes: Iterable[NodeId] = (),
    ):
        if relation_kind not in RELATION_KINDS:
            raise ValueError(
                f"relation_kind must be one of {RELATION_KINDS}, got {relation_kind!r}"
            )
        self.relation_kind = relation_kind
        self._order: list[NodeId] = []
        self._index: dict[NodeId, int] = {}
        dim: int | None = None
        for p in pairs:
            if dim is None:
                dim = p.dim
            elif p.dim != dim:
                raise DimensionMismatch(
                    f"pair ({p.i}, {p.j}) has dimension {p.dim}, expected {dim}"
                )
            self._intern(p.i)
            self._intern(p.j)
        for n in extra_nodes:
            self._intern(n)
        self._dim = dim
        self._adj: list[dict[int, PairwiseDatum]] = [dict() for _ in self._order]
        self._edges: dict[tuple[int, int], PairwiseDatum] = {}
        for p in pairs:
            a, b = self._index[p.i], self._index[p.j]
            key = (a, b) if a < b else (b, a)
            if key in self._edges:
                raise DuplicateEdge(f"duplicate pair on ({p.i}, {p.j})")
            self._edges[key] = p
            self._adj[a][b] = p
            self._adj[b][a] = p

    def _intern(self, n: NodeId) -> int:
        idx = self._index.get(n)
        if idx is None:
            idx = len(self._order)
            self._index[n] = idx
            self._order.append(n)
        return idx

    # --- basic accessors -------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self._order)

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    @property
    def dim(self) -> int | None:
        """Feature dimension, or None for an edgeless graph."""
        return self._dim

    def nodes(self) -> list[NodeId]:
        return list(self._order)

    def node_index(self, n: NodeId) -> int:
        try:
            return self._index[n]
        except KeyError:
            raise UnknownNode(f"node {n!r} not in graph") from None

    def node_id(self, idx: int) -> NodeId:
        return self._order[idx]

    def has_node(self, n: NodeId) -> bool:
        return n in self._index

    def pairs(self) -> list[PairwiseDatum]:
        """Edge payloads in deterministic (index-sorted) order."""
        return [self._edges[k] for k in sorted(self._edges)]

    def edge_keys(self) -> list[tuple[NodeId, NodeId]]:
        return [
            (self._order[a], self._order[b]) for a, b in sorted(self._edges)
        ]

    def has_edge(self, u: NodeId, v: NodeId) -> bool:
        if u not in self._index or v not in self._index:
            return False
        a, b = self._index[u], self._index[v]
        return ((a, b) if a < b else (b, a)) in self._edges

    def neighbors(self, n: NodeId) -> list[NodeId]:
        idx = self.node_index(n)
        return [self._order[m] for m in sorted(self._adj[idx])]

    def neighbor_indices(self, idx: int) -> list[int]:
        return sorted(self._adj[idx])

    def iter_edge_indices(self) -> Iterator[tuple[int, int]]:
        return iter(sorted(self._edges))

    # --- structural queries ----------------------------------------------

    def degree(self, n: NodeId) -> int:
        """Number of edges incident to ``n``."""
        return len(self._adj[self.node_index(n)])

    def component_count(self) -> int:
        """Number of connected components, counting isolated nodes."""
        return len(self.components())

    def components(self) -> list[list[int]]:
        """Connected components as sorted index lists, ordered by smallest member."""
        n = self.num_nodes
        seen = [False] * n
        comps: list[list[int]] = []
        for start in range(n):
            if seen[start]:
                continue
            stack = [start]
            seen[start] = True
            comp = []
            while stack:
                v = stack.pop()
                comp.append(v)
                for w in self._adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        stack.append(w)
            comp.sort()
            comps.append(comp)
        return comps

    def component_increase_on_removal(self, n: NodeId) -> int:
        """How many extra components deleting ``n`` (with its edges) creates.

        An isolated node only disappears, so the count is floored at zero.
        """
        idx = self.node_index(n)
        if not self._adj[idx]:
            return 0
        before = self.component_count()
        after = self._count_components_without(idx)
        return max(0, after - before)

    def _count_components_without(self, skip: int) -> int:
        n = self.num_nodes
        seen = [False] * n
        seen[skip] = True
        count = 0
        for start in range(n):
            if seen[start]:
                continue
            count += 1
            stack = [start]
            seen[start] = True
            while stack:
                v = stack.pop()
                for w in self._adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        stack.append(w)
        return count

    # --- derived graphs ---------------------------------------------------

    def remove_edges(self, edge_set: Iterable[tuple[NodeId, NodeId]]) -> "PairGraph":
        """New graph with the given edges absent; the node set is unchanged."""
        drop: set[tuple[int, int]] = set()
        for u, v in edge_set:
            a, b = self.node_index(u), self.node_index(v)
            key = (a, b) if a < b else (b, a)
            if key not in self._edges:
                raise MissingEdge(f"edge ({u!r}, {v!r}) not in graph")
            drop.add(key)
        kept = [self._edges[k] for k in sorted(self._edges) if k not in drop]
        return PairGraph(kept, self.relation_kind, extra_nodes=self._order)

    def without_node(self, n: NodeId) -> "PairGraph":
        """New graph with ``n`` and its incident edges removed."""
        idx = self.node_index(n)
        kept = [
            self._edges[k] for k in sorted(self._edges) if idx not in k
        ]
        others = [m for m in self._order if m != n]
        return PairGraph(kept, self.relation_kind, extra_nodes=others)


def build_graph(
    pairs: Sequence[PairwiseDatum],
    relation_kind: str = "transitive",
    extra_nodes: Iterable[NodeId] = (),
) -> PairGraph:
    """Build the pair graph for a dataset.

    Rejects self-loops, duplicate unordered pairs, and mixed feature
    dimensions. ``extra_nodes`` adds individuals that appear in no pair;
    they stay isolated and never affect the privacy distance.
    """
    return PairGraph(pairs, relation_kind, extra_nodes=extra_nodes)


# --- pairs file format ----------------------------------------------------
#
# One row per pair: i, j, y, dx_1, ..., dx_d. Header row optional.


def _looks_like_header(row: Sequence[str]) -> bool:
    if len(row) < 4:
        return False
    try:
        float(row[2])
        float(row[3])
    except ValueError:
        return True
    return False


def _parse_node_id(cell: str) -> NodeId:
    cell = cell.strip()
    try:
        return int(cell)
    except ValueError:
        return cell


def read_pairs_file(path, delimiter: str = ",") -> list[PairwiseDatum]:
    """Read pairwise data from delimited text (``i, j, y, dx_1, ..., dx_d``)."""
    pairs: list[PairwiseDatum] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if rownum == 1 and _looks_like_header(row):
                continue
            if len(row) < 4:
                raise ParseError(
                    f"row {rownum}: expected at least 4 columns, got {len(row)}",
                    row=rownum,
                )
            i = _parse_node_id(row[0])
            j = _parse_node_id(row[1])
            try:
                y = int(float(row[2]))
            except ValueError:
                raise ParseError(
                    f"row {rownum}, col 3: label {row[2]!r} is not numeric",
                    row=rownum,
                    col=3,
                ) from None
            feats = []
            for colnum, cell in enumerate(row[3:], start=4):
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"row {rownum}, col {colnum}: feature {cell!r} is not numeric",
                        row=rownum,
                        col=colnum,
                    ) from None
            try:
                pairs.append(PairwiseDatum(i, j, np.array(feats), y))
            except (SelfLoop, ValueError) as exc:
                raise ParseError(f"row {rownum}: {exc}", row=rownum) from exc
    return pairs


def write_pairs_file(path, pairs: Sequence[PairwiseDatum], delimiter: str = ",",
                     header: bool = True) -> None:
    """Write pairwise data in the format ``read_pairs_file`` accepts."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        if header:
            d = pairs[0].dim if pairs else 0
            writer.writerow(["i", "j", "y"] + [f"dx_{k + 1}" for k in range(d)])
        for p in pairs:
            writer.writerow([p.i, p.j, p.y] + [repr(float(v)) for v in p.delta_x])
