"""Weighted l2 spaces on graded graphs, averaging, and Jacobi lifting.

Graph functions are numpy vectors indexed by ``graph.vertices``; chain
functions are vectors indexed by the window sites ``n_min..n_max``.  The
averaging operator ``P`` sums a graph function over each layer with weights
``mu_v``; its adjoint ``P*`` copies a chain value onto every vertex of the
corresponding layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigvalsh, eigvalsh_tridiagonal

from .errors import (
    DimensionMismatch,
    MeasureBalanceViolated,
    NotWeightedSelfAdjoint,
    SeparationViolated,
    WindowMismatch,
    ZeroOffDiagonal,
)
from .graph import GradedGraph

SELF_ADJOINT_RTOL = 1e-10
SEPARATION_TOL = 1e-10


def _graph_vector(psi, graph: GradedGraph, name="psi") -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (graph.n_vertices,):
        raise DimensionMismatch(
            f"{name} has shape {psi.shape}, graph has {graph.n_vertices} vertices"
        )
    return psi


def _chain_vector(phi, graph: GradedGraph, name="phi") -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (graph.n_layers,):
        raise WindowMismatch(
            f"{name} has shape {phi.shape}, window {graph.window} has {graph.n_layers} sites"
        )
    return phi


def inner_product(psi, phi, graph: GradedGraph) -> float:
    """Weighted inner product sum_x psi(x) phi(x) mu_v(x)."""
    psi = _graph_vector(psi, graph)
    phi = _graph_vector(phi, graph, "phi")
    return float(np.sum(psi * phi * graph.mass))


def average(psi, graph: GradedGraph) -> np.ndarray:
    psi = _graph_vector(psi, graph)
    return np.bincount(
        graph.ranks - graph.window[0], weights=psi * graph.mass, minlength=graph.n_layers
    )


def coaverage(phi, graph: GradedGraph) -> np.ndarray:
    phi = _chain_vector(phi, graph)
    return phi[graph.ranks - graph.window[0]]


def radial_project(psi, graph: GradedGraph) -> np.ndarray:
    return coaverage(average(psi, graph), graph)


def averaging_matrix(graph: GradedGraph) -> np.ndarray:
    """Dense matrix of P, shape (n_layers, n_vertices)."""
    P = np.zeros((graph.n_layers, graph.n_vertices))
    P[graph.ranks - graph.window[0], np.arange(graph.n_vertices)] = graph.mass
    return P


def coaveraging_matrix(graph: GradedGraph) -> np.ndarray:
    """Dense matrix of P*, shape (n_vertices, n_layers)."""
    Ps = np.zeros((graph.n_vertices, graph.n_layers))
    Ps[np.arange(graph.n_vertices), graph.ranks - graph.window[0]] = 1.0
    return Ps


def projection_matrix(graph: GradedGraph) -> np.ndarray:
    return coaveraging_matrix(graph) @ averaging_matrix(graph)


@dataclass(frozen=True)
class JacobiOperator1D:
    """Symmetric tridiagonal operator on the sites of ``window``.

    ``a[k]`` is the coupling between sites ``n_min + k`` and ``n_min + k + 1``;
    ``b[k]`` the diagonal at site ``n_min + k``.
    """

    a: np.ndarray
    b: np.ndarray
    window: tuple[int, int]

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float).reshape(-1)
        n_min, n_max = (int(w) for w in self.window)
        m = n_max - n_min + 1
        if m < 1 or b.shape != (m,) or a.shape != (m - 1,):
            raise DimensionMismatch(
                f"window {self.window} needs {m} diagonal and {m - 1} off-diagonal "
                f"entries, got {b.size} and {a.size}"
            )
        if np.any(a == 0):
            raise ZeroOffDiagonal(f"a vanishes at bond index {np.flatnonzero(a == 0)}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "window", (n_min, n_max))

    @property
    def size(self) -> int:
        return self.b.size

    @classmethod
    def from_dense(cls, M, window) -> "JacobiOperator1D":
        M = np.asarray(M, dtype=float)
        return cls(np.diag(M, 1).copy(), np.diag(M).copy(), window)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.b) + np.diag(self.a, 1) + np.diag(self.a, -1)

    def spectrum(self) -> np.ndarray:
        if self.size == 1:
            return self.b.copy()
        return eigvalsh_tridiagonal(self.b, self.a)


class LiftedOperator:
    """Sparse operator on graph functions, tied to its graph."""

    def __init__(self, matrix, graph: GradedGraph):
        M = sp.csr_matrix(matrix, dtype=float)
        if M.shape != (graph.n_vertices, graph.n_vertices):
            raise DimensionMismatch(
                f"operator shape {M.shape} does not match {graph.n_vertices} vertices"
            )
        self.matrix = M
        self.graph = graph

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def apply(self, psi) -> np.ndarray:
        return self.matrix @ _graph_vector(psi, self.graph)

    def __matmul__(self, psi):
        return self.apply(psi)

    def respects_adjacency(self, tol: float = 0.0) -> bool:
        return _respects_adjacency(self.to_dense(), self.graph, tol)

    def coo_records(self):
        """(row id, col id, value) triples, row-major."""
        C = self.matrix.tocoo()
        order = np.lexsort((C.col, C.row))
        v = self.graph.vertices
        return [(v[C.row[k]], v[C.col[k]], float(C.data[k])) for k in order]


def _respects_adjacency(M: np.ndarray, graph: GradedGraph, tol: float) -> bool:
    allowed = np.eye(graph.n_vertices, dtype=bool)
    allowed[graph.src, graph.dst] = True
    allowed[graph.dst, graph.src] = True
    return bool(np.all(np.abs(M[~allowed]) <= tol))


def lift_jacobi(J: JacobiOperator1D, graph: GradedGraph) -> LiftedOperator:
    """Lift a chain Jacobi operator to the graph.

    Diagonal entries copy ``b`` along ranks; the entry along an edge, read
    from vertex ``x``, is the chain coupling of that bond scaled by
    ``mu_e / mu_v(x)``.
    """
    if J.window != graph.window:
        raise WindowMismatch(f"operator window {J.window} != graph window {graph.window}")
    if not graph.measure_balanced:
        raise MeasureBalanceViolated("lifting requires the Measure Balance assumption")
    n_min = graph.window[0]
    s, d, w = graph.src, graph.dst, graph.edge_mass
    bond = J.a[graph.ranks[s] - n_min] if graph.n_edges else np.zeros(0)
    nv = graph.n_vertices
    rows = np.concatenate([np.arange(nv), s, d])
    cols = np.concatenate([np.arange(nv), d, s])
    vals = np.concatenate(
        [J.b[graph.ranks - n_min], w / graph.mass[s] * bond, w / graph.mass[d] * bond]
    )
    return LiftedOperator(sp.coo_matrix((vals, (rows, cols)), shape=(nv, nv)), graph)


def kernel_basis(graph: GradedGraph) -> np.ndarray:
    """Weighted-orthonormal basis of Ker P, as columns.

    For a layer ``x_1..x_k`` the spanning vectors are
    ``e_{x_1}/mu(x_1) - e_{x_i}/mu(x_i)``, each of zero layer average, fed
    through modified Gram-Schmidt in the weighted inner product.
    """
    cols = []
    mass = graph.mass
    for layer in graph.layers:
        if len(layer) < 2:
            continue
        first = layer[0]
        block = []
        for xi in layer[1:]:
            v = np.zeros(graph.n_vertices)
            v[first] = 1.0 / mass[first]
            v[xi] = -1.0 / mass[xi]
            for u in block:
                v -= np.sum(u * v * mass) * u
            v /= np.sqrt(np.sum(v * v * mass))
            block.append(v)
        cols.extend(block)
    if not cols:
        return np.zeros((graph.n_vertices, 0))
    return np.column_stack(cols)


def radial_basis(graph: GradedGraph) -> np.ndarray:
    """Layer indicators; weighted-orthonormal because each layer has mass 1."""
    return coaveraging_matrix(graph)


@dataclass
class SeparationReport:
    kernel_invariant: bool
    radial_invariant: bool
    kernel_residual: float
    radial_residual: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.kernel_invariant and self.radial_invariant


def check_spectral_separation(H: LiftedOperator, tol: float = SEPARATION_TOL) -> SeparationReport:
    """Test invariance of Ker P and of the radial subspace under ``H``.

    The kernel residual is the largest radial component of ``H v`` over the
    kernel basis; the radial residual is the largest non-radial component of
    ``H r`` over layer indicators.  Both are max-norms.
    """
    g = H.graph
    Proj = projection_matrix(g)
    A = H.to_dense()
    B = kernel_basis(g)
    k_res = float(np.abs(Proj @ (A @ B)).max()) if B.shape[1] else 0.0
    HR = A @ radial_basis(g)
    r_res = float(np.abs(HR - Proj @ HR).max()) if HR.size else 0.0
    return SeparationReport(k_res <= tol, r_res <= tol, k_res, r_res, tol)


def restrict_to_kernel(H: LiftedOperator, tol: float = SEPARATION_TOL) -> np.ndarray:
    """Matrix of ``H`` restricted to Ker P in the :func:`kernel_basis` basis."""
    rep = check_spectral_separation(H, tol)
    if not rep.kernel_invariant:
        raise SeparationViolated(f"Ker P is not invariant (residual {rep.kernel_residual:.3g})")
    B = kernel_basis(H.graph)
    return B.T @ (H.graph.mass[:, None] * (H.to_dense() @ B))


def weighted_symmetric_form(H: LiftedOperator, rtol: float = SELF_ADJOINT_RTOL) -> np.ndarray:
    """``D^{1/2} H D^{-1/2}``, after checking weighted self-adjointness."""
    A = H.to_dense()
    mass = H.graph.mass
    W = mass[:, None] * A
    scale = max(1.0, float(np.abs(W).max()) if W.size else 0.0)
    asym = float(np.abs(W - W.T).max()) if W.size else 0.0
    if asym > rtol * scale:
        raise NotWeightedSelfAdjoint(f"mu_x H(x,y) - mu_y H(y,x) reaches {asym:.3g}")
    root = np.sqrt(mass)
    S = root[:, None] * A / root[None, :]
    return 0.5 * (S + S.T)


def spectrum(H: LiftedOperator) -> np.ndarray:
    S = weighted_symmetric_form(H)
    if S.size == 0:
        return np.zeros(0)
    return eigvalsh(S)
