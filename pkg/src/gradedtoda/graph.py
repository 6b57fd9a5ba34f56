"""Weighted Z-graded graphs restricted to finite rank windows.

A graph is a set of vertices with integer ranks and directed edges that
always go from rank ``n`` to rank ``n + 1``.  Vertices carry a mass
``mu_v`` and edges a measure ``mu_e``; both are normalised per transversal
layer.  Infinite graphs are represented by their restriction to an inclusive
window ``(n_min, n_max)`` of ranks.

Vertex ordering is fixed once, by ``(rank, id)``, and defines the index used
by every matrix in the package.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Any, Iterable, Mapping

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    BadParams,
    Disconnected,
    EdgeRankViolation,
    GraphSpecError,
    NonContiguousWindow,
    NonPositiveMeasure,
    UnknownFamily,
    UnknownVertex,
)

DEFAULT_TOL = 1e-12
DEFAULT_DELTA = 1e-8

BUILTIN_FAMILIES = ("path", "ladder", "diamond", "periodic")


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


class GradedGraph:
    """Immutable weighted Z-graded graph on a finite window.

    Use :func:`build_graph` or :func:`builtin_graph` rather than calling the
    constructor directly; the constructor trusts its input.
    """

    def __init__(self, vertices, rank, edges, mu_v, mu_e):
        self.vertices = tuple(vertices)
        self.rank = dict(rank)
        self.edges = tuple(edges)
        self.mu_v = dict(mu_v)
        self.mu_e = dict(mu_e)

        ranks = [self.rank[x] for x in self.vertices]
        self.window = (min(ranks), max(ranks))
        self.index = {x: i for i, x in enumerate(self.vertices)}

        self.ranks = _frozen(np.array(ranks, dtype=int))
        self.mass = _frozen(np.array([self.mu_v[x] for x in self.vertices], dtype=float))
        self.src = _frozen(np.array([self.index[x] for x, _ in self.edges], dtype=int))
        self.dst = _frozen(np.array([self.index[y] for _, y in self.edges], dtype=int))
        self.edge_mass = _frozen(np.array([self.mu_e[e] for e in self.edges], dtype=float))

        n_min, n_max = self.window
        self.layers = tuple(
            _frozen(np.flatnonzero(self.ranks == n)) for n in range(n_min, n_max + 1)
        )
        # edges between layer k and k+1, k counted from n_min
        edge_rank = self.ranks[self.src] if self.edges else np.zeros(0, dtype=int)
        self.edge_layers = tuple(
            _frozen(np.flatnonzero(edge_rank == n)) for n in range(n_min, n_max)
        )
        nv = len(self.vertices)
        self.deg_plus = _frozen(np.bincount(self.src, minlength=nv))
        self.deg_minus = _frozen(np.bincount(self.dst, minlength=nv))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_layers(self) -> int:
        return self.window[1] - self.window[0] + 1

    def sites(self) -> np.ndarray:
        """Integer sites of the window, in chain order."""
        return np.arange(self.window[0], self.window[1] + 1)

    def layer(self, n: int) -> tuple:
        if not self.window[0] <= n <= self.window[1]:
            return ()
        return tuple(self.vertices[i] for i in self.layers[n - self.window[0]])

    def edge_id(self, k: int) -> str:
        x, y = self.edges[k]
        return f"{x}->{y}"

    @cached_property
    def has_kernel(self) -> bool:
        """True if some layer has more than one vertex (Ker P is nontrivial)."""
        return any(len(layer) > 1 for layer in self.layers)

    @cached_property
    def measure_balanced(self) -> bool:
        return validate(self).measure_balance

    def __repr__(self):
        return (
            f"GradedGraph(|V|={self.n_vertices}, |E|={self.n_edges}, "
            f"window={self.window})"
        )

    def __eq__(self, other):
        if not isinstance(other, GradedGraph):
            return NotImplemented
        return (
            self.vertices == other.vertices
            and self.edges == other.edges
            and self.rank == other.rank
            and self.mu_v == other.mu_v
            and self.mu_e == other.mu_e
        )

    __hash__ = object.__hash__


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _parse_vertices(raw) -> dict[str, int]:
    rank = {}
    for item in raw:
        if isinstance(item, Mapping):
            vid, r = item["id"], item["rank"]
        else:
            vid, r = item
        vid = str(vid)
        if vid in rank:
            raise GraphSpecError(f"duplicate vertex {vid!r}")
        if int(r) != r:
            raise GraphSpecError(f"rank of {vid!r} is not an integer: {r!r}")
        rank[vid] = int(r)
    if not rank:
        raise GraphSpecError("graph has no vertices")
    return rank


def _parse_edges(raw) -> list[tuple[str, str, float | None]]:
    edges = []
    for item in raw:
        if isinstance(item, Mapping):
            x, y, m = item["from"], item["to"], item.get("mu_e")
        else:
            x, y, *rest = item
            m = rest[0] if rest else None
        edges.append((str(x), str(y), None if m is None else float(m)))
    return edges


def build_graph(spec: Mapping[str, Any]) -> GradedGraph:
    """Build a graph from a structured description.

    ``spec`` holds ``vertices`` (``{"id", "rank"}`` records or ``(id, rank)``
    pairs), ``edges`` (``{"from", "to", "mu_e"?}`` records or tuples) and an
    optional ``mu_v`` mapping.  Missing vertex masses default to
    ``1 / |layer|``; missing edge measures default to ``1 / #edges`` of their
    layer pair.
    """
    rank = _parse_vertices(spec.get("vertices", ()))
    raw_edges = _parse_edges(spec.get("edges", ()))

    present = sorted(set(rank.values()))
    if present != list(range(present[0], present[-1] + 1)):
        missing = sorted(set(range(present[0], present[-1] + 1)) - set(present))
        raise NonContiguousWindow(f"ranks {missing} have no vertices")

    seen = set()
    for x, y, m in raw_edges:
        for v in (x, y):
            if v not in rank:
                raise UnknownVertex(f"edge ({x}, {y}) uses unknown vertex {v!r}")
        if rank[y] != rank[x] + 1:
            raise EdgeRankViolation(
                f"edge ({x}, {y}) goes from rank {rank[x]} to rank {rank[y]}"
            )
        if (x, y) in seen:
            raise GraphSpecError(f"duplicate edge ({x}, {y})")
        seen.add((x, y))
        if m is not None and not m > 0:
            raise NonPositiveMeasure(f"mu_e({x}, {y}) = {m} is not positive")

    vertices = sorted(rank, key=lambda v: (rank[v], v))
    index = {v: i for i, v in enumerate(vertices)}

    if len(vertices) > 1:
        rows = [index[x] for x, _, _ in raw_edges]
        cols = [index[y] for _, y, _ in raw_edges]
        adj = coo_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(vertices),) * 2
        )
        ncomp, _ = connected_components(adj, directed=True, connection="weak")
        if ncomp > 1:
            raise Disconnected(f"undirected skeleton has {ncomp} components")

    layer_size = defaultdict(int)
    for v in vertices:
        layer_size[rank[v]] += 1
    mu_v_raw = {str(k): float(v) for k, v in (spec.get("mu_v") or {}).items()}
    for v in mu_v_raw:
        if v not in rank:
            raise UnknownVertex(f"mu_v given for unknown vertex {v!r}")
    mu_v = {}
    for v in vertices:
        m = mu_v_raw.get(v, 1.0 / layer_size[rank[v]])
        if not m > 0:
            raise NonPositiveMeasure(f"mu_v({v}) = {m} is not positive")
        mu_v[v] = m

    pair_size = defaultdict(int)
    for x, _, _ in raw_edges:
        pair_size[rank[x]] += 1
    edges = sorted(((x, y) for x, y, _ in raw_edges), key=lambda e: (index[e[0]], index[e[1]]))
    given = {(x, y): m for x, y, m in raw_edges}
    mu_e = {}
    for x, y in edges:
        m = given[(x, y)]
        mu_e[(x, y)] = 1.0 / pair_size[rank[x]] if m is None else m

    return GradedGraph(vertices, rank, edges, mu_v, mu_e)


def load_graph_file(path) -> GradedGraph:
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphSpecError(f"{path}: not valid JSON ({exc})") from exc
    try:
        return build_graph(spec)
    except (KeyError, TypeError) as exc:
        raise GraphSpecError(f"{path}: malformed graph description ({exc!r})") from exc


def graph_to_spec(graph: GradedGraph) -> dict:
    """Inverse of :func:`build_graph` (explicit measures included)."""
    return {
        "vertices": [{"id": v, "rank": graph.rank[v]} for v in graph.vertices],
        "edges": [
            {"from": x, "to": y, "mu_e": graph.mu_e[(x, y)]} for x, y in graph.edges
        ],
        "mu_v": {v: graph.mu_v[v] for v in graph.vertices},
    }


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------

def _layer_ids(n: int, size: int) -> list[str]:
    if size == 1:
        return [str(n)]
    width = len(str(size))
    return [f"{n}w{i:0{width}d}" for i in range(1, size + 1)]


def _from_layers(window, sizes, connect) -> GradedGraph:
    """Assemble a graph from per-rank layer sizes and a local wiring rule.

    ``connect(n, i, j)`` says whether vertex ``i`` of layer ``n`` is joined to
    vertex ``j`` of layer ``n + 1`` (0-based positions).
    """
    n_min, n_max = window
    ids = {n: _layer_ids(n, sizes(n)) for n in range(n_min, n_max + 1)}
    vertices = [(v, n) for n in ids for v in ids[n]]
    edges = [
        (ids[n][i], ids[n + 1][j])
        for n in range(n_min, n_max)
        for i, j in product(range(len(ids[n])), range(len(ids[n + 1])))
        if connect(n, i, j)
    ]
    return build_graph({"vertices": vertices, "edges": edges})


def _diamond_cell(level: int):
    """Layer sizes and wiring of one level-``level`` diamond.

    Level 0 is a single edge; each refinement doubles all ranks and replaces
    every edge by two parallel paths of length two.  Returns the layer sizes
    over ranks ``0..2**level`` and the set of ``(rank, i, j)`` triples saying
    that position ``i`` at that rank joins position ``j`` one rank up.
    """
    rank = {0: 0, 1: 1}
    edges = [(0, 1)]
    for _ in range(level):
        rank = {v: 2 * r for v, r in rank.items()}
        refined = []
        for u, v in edges:
            for _branch in range(2):
                m = len(rank)
                rank[m] = rank[u] + 1
                refined += [(u, m), (m, v)]
        edges = refined
    layers = defaultdict(list)
    for v in sorted(rank):
        layers[rank[v]].append(v)
    position = {v: i for r in layers for i, v in enumerate(layers[r])}
    sizes = [len(layers[r]) for r in range(2**level + 1)]
    wiring = {(rank[u], position[u], position[v]) for u, v in edges}
    return sizes, wiring


def builtin_graph(
    name: str,
    window: tuple[int, int] | None = None,
    *,
    level: int | None = None,
    period: int | None = None,
    doubled: Iterable[int] = (0,),
) -> GradedGraph:
    """One of the built-in families restricted to ``window``.

    ``path``
        Z itself.
    ``ladder``
        Z with the ranks in ``doubled`` split into two vertices ``{n}w1``,
        ``{n}w2`` (the default doubles rank 0).
    ``diamond``
        Diamond hierarchical graphs of the given ``level`` glued end to end,
        junctions at multiples of ``2**level``.  Without a window, one cell
        ``[0, 2**level]``.
    ``periodic``
        ``period=2``: every layer has two vertices, joined completely from even
        ranks and by a perfect matching from odd ranks.  ``period=4``: layer
        sizes cycle 1, 2, 4, 2 with a split-then-merge binary wiring.

    All measures follow the uniform per-layer rule.
    """
    if name not in BUILTIN_FAMILIES:
        raise UnknownFamily(f"unknown family {name!r}; choose from {BUILTIN_FAMILIES}")

    if name == "diamond":
        if level is None or int(level) < 1:
            raise BadParams("diamond needs level >= 1")
        level = int(level)
        if window is None:
            window = (0, 2**level)
    if window is None:
        raise BadParams(f"{name} needs a window")
    n_min, n_max = (int(w) for w in window)
    if n_max <= n_min:
        raise BadParams(f"window {window} must contain at least two ranks")
    window = (n_min, n_max)

    try:
        if name == "path":
            return _from_layers(window, lambda n: 1, lambda n, i, j: True)

        if name == "ladder":
            dbl = {int(d) for d in doubled}
            return _from_layers(
                window, lambda n: 2 if n in dbl else 1, lambda n, i, j: True
            )

        if name == "diamond":
            sizes, cell_edges = _diamond_cell(level)
            span = 2**level
            return _from_layers(
                window,
                lambda n: sizes[n % span],
                lambda n, i, j: (n % span, i, j) in cell_edges,
            )

        if period == 2:
            return _from_layers(
                window, lambda n: 2, lambda n, i, j: n % 2 == 0 or i == j
            )
        if period == 4:
            cycle = (1, 2, 4, 2)

            def connect(n, i, j):
                r = n % 4
                if r == 1:
                    return j // 2 == i
                if r == 2:
                    return i // 2 == j
                return True

            return _from_layers(window, lambda n: cycle[n % 4], connect)
        raise BadParams(f"periodic family supports period 2 or 4, got {period!r}")
    except Disconnected as exc:
        raise BadParams(f"{name} restricted to {window} is disconnected") from exc


def shift_vertex(graph: GradedGraph, x: str, k: int) -> str | None:
    """Vertex ``k`` ranks away from ``x`` at the same position in its layer.

    For the periodic built-ins (and diamonds, with ``k`` a multiple of the
    cell length) this is the translation automorphism.  Returns ``None`` when
    the target rank lies outside the window.
    """
    if x not in graph.index:
        raise UnknownVertex(x)
    n = graph.rank[x]
    source = graph.layer(n)
    target = graph.layer(n + k)
    if not target:
        return None
    if len(target) != len(source):
        raise BadParams(f"layers {n} and {n + k} have different sizes")
    return target[source.index(x)]


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class Violation:
    check: str
    item: str
    residual: float


@dataclass
class ValidationReport:
    graded: bool
    layer_prob_v: bool
    layer_prob_e: bool
    measure_balance: bool
    combinatorics_balance: bool
    mass_lower_bound: bool
    delta: float
    min_mass: float
    violations: list[Violation] = field(default_factory=list)

    FLAGS = (
        "graded",
        "layer_prob_v",
        "layer_prob_e",
        "measure_balance",
        "combinatorics_balance",
        "mass_lower_bound",
    )

    @property
    def ok(self) -> bool:
        return all(getattr(self, f) for f in self.FLAGS)

    def to_dict(self) -> dict:
        out = {f: getattr(self, f) for f in self.FLAGS}
        out.update(
            ok=self.ok,
            delta=self.delta,
            min_mass=self.min_mass,
            violations=[v.__dict__ for v in self.violations],
        )
        return out


def validate(
    graph: GradedGraph, delta: float = DEFAULT_DELTA, tol: float = DEFAULT_TOL
) -> ValidationReport:
    """Check the measure assumptions on every vertex, edge and layer.

    Measure balance at the window's first layer only checks the out-edge
    identity (its in-edges lie outside the window); the last layer only
    checks the in-edge identity.
    """
    bad: list[Violation] = []
    n_min, n_max = graph.window

    graded = True
    for x, y in graph.edges:
        if graph.rank[y] != graph.rank[x] + 1:
            graded = False
            bad.append(Violation("graded", f"{x}->{y}", float(graph.rank[y] - graph.rank[x] - 1)))

    layer_prob_v = True
    for k, layer in enumerate(graph.layers):
        r = float(graph.mass[layer].sum() - 1.0)
        if abs(r) > tol:
            layer_prob_v = False
            bad.append(Violation("layer_prob_v", f"layer {n_min + k}", r))

    layer_prob_e = True
    combinatorics = True
    for k, eidx in enumerate(graph.edge_layers):
        w = graph.edge_mass[eidx]
        r = float(w.sum() - 1.0)
        if abs(r) > tol:
            layer_prob_e = False
            bad.append(Violation("layer_prob_e", f"layers {n_min + k}->{n_min + k + 1}", r))
        if len(w) and w.max() - w.min() > tol:
            combinatorics = False
            bad.append(
                Violation(
                    "combinatorics_balance",
                    f"layers {n_min + k}->{n_min + k + 1}",
                    float(w.max() - w.min()),
                )
            )

    nv = graph.n_vertices
    out_sum = np.bincount(graph.src, weights=graph.edge_mass, minlength=nv)
    in_sum = np.bincount(graph.dst, weights=graph.edge_mass, minlength=nv)
    balance = True
    for i, x in enumerate(graph.vertices):
        n = graph.rank[x]
        if n_min == n_max:
            break
        if n < n_max:
            r = float(out_sum[i] - graph.mass[i])
            if abs(r) > tol:
                balance = False
                bad.append(Violation("measure_balance_out", x, r))
        if n > n_min:
            r = float(in_sum[i] - graph.mass[i])
            if abs(r) > tol:
                balance = False
                bad.append(Violation("measure_balance_in", x, r))

    min_mass = float(graph.mass.min())
    lower = min_mass >= delta
    if not lower:
        for i in np.flatnonzero(graph.mass < delta):
            bad.append(Violation("mass_lower_bound", graph.vertices[i], float(graph.mass[i] - delta)))

    return ValidationReport(
        graded=graded,
        layer_prob_v=layer_prob_v,
        layer_prob_e=layer_prob_e,
        measure_balance=balance,
        combinatorics_balance=combinatorics,
        mass_lower_bound=lower,
        delta=delta,
        min_mass=min_mass,
        violations=bad,
    )


def transversal_degrees(graph: GradedGraph, x: str) -> tuple[int, int]:
    """``(deg_minus, deg_plus)``: number of edges into / out of ``x``."""
    try:
        i = graph.index[x]
    except KeyError:
        raise UnknownVertex(x) from None
    return int(graph.deg_minus[i]), int(graph.deg_plus[i])
