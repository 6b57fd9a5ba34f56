"""Chain Lax pairs, radial Lax operators on graphs, and the no-lift check.

On a window the chain Lax matrix ``L`` is the Jacobi matrix of the Flaschka
data and ``P = triu(L, 1) - tril(L, -1)``.  With open ends the finite
system ``dL/dt = [P, L]`` is exactly the open Toda flow, so the spectrum of
``L`` is conserved.

On a graph the radial Lax operator is ``P_rad = P* P_Z P``.  Along any flow
lifted from the chain, ``dH/dt Proj = [P_rad, H]`` where ``H`` is the lifted
Jacobi operator; the unprojected identity fails whenever the diagonal on a
layer with nontrivial Ker P changes in time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh

from .dynamics import (
    FlaschkaState,
    PhaseState,
    Potential,
    chain_flaschka,
    integrate,
    phase_to_flaschka,
    simulate_phase,
    toda_potential,
)
from .errors import DimensionMismatch, StructureLost, TooFewSamples, TrivialKernel, WindowMismatch
from .graph import GradedGraph
from .operators import (
    JacobiOperator1D,
    _respects_adjacency,
    averaging_matrix,
    coaveraging_matrix,
    lift_jacobi,
    restrict_to_kernel,
)

log = logging.getLogger(__name__)

STRUCTURE_TOL = 1e-9
CONSTANCY_TOL = 1e-7
VARIATION_TOL = 1e-3


def skew_part(L: np.ndarray) -> np.ndarray:
    """Strict upper triangle minus strict lower triangle."""
    return np.triu(L, 1) - np.tril(L, -1)


@dataclass(frozen=True)
class LaxPair1D:
    L: JacobiOperator1D
    P: np.ndarray

    @property
    def window(self):
        return self.L.window

    def commutator(self) -> np.ndarray:
        Lm = self.L.to_dense()
        return self.P @ Lm - Lm @ self.P


def lax_pair(J: JacobiOperator1D) -> LaxPair1D:
    return LaxPair1D(J, skew_part(J.to_dense()))


def lax_from_flaschka(fstate: FlaschkaState, window) -> LaxPair1D:
    """Lax pair of chain Flaschka data; ``a`` has one entry per bond."""
    return lax_pair(JacobiOperator1D(fstate.a, fstate.b, window))


# ---------------------------------------------------------------------------
# chain Lax flow
# ---------------------------------------------------------------------------

@dataclass
class LaxTrajectory:
    times: np.ndarray
    L: np.ndarray  # (n_samples, m, m)
    window: tuple

    def ab(self):
        """Flaschka series ``(a, b)`` read off the band of ``L``."""
        m = self.L.shape[1]
        idx = np.arange(m)
        return self.L[:, idx[:-1], idx[1:]], self.L[:, idx, idx]

    def spectra(self) -> np.ndarray:
        return np.array([eigvalsh(0.5 * (M + M.T)) for M in self.L])

    def traces(self) -> np.ndarray:
        return np.trace(self.L, axis1=1, axis2=2)


def _off_band(L: np.ndarray) -> float:
    m = L.shape[-1]
    if m < 3:
        return 0.0
    mask = np.abs(np.subtract.outer(np.arange(m), np.arange(m))) > 1
    return float(np.abs(L[..., mask]).max())


def lax_flow(
    init: LaxPair1D,
    t_end: float,
    h: float,
    stride: int = 1,
    bound: float = 1e6,
    structure_tol: float = STRUCTURE_TOL,
) -> LaxTrajectory:
    """RK4 on ``dL/dt = [P(L), L]`` with ``P`` rebuilt at every stage."""
    m = init.L.size

    def field(y):
        L = y.reshape(m, m)
        P = skew_part(L)
        return (P @ L - L @ P).ravel()

    tr = integrate(field, init.L.to_dense().ravel(), t_end, h, stride, bound)
    Ls = tr.states.reshape(-1, m, m)
    for k, M in enumerate(Ls):
        off = _off_band(M)
        if off > structure_tol:
            raise StructureLost(f"off-band entry {off:.3g} at t = {tr.times[k]:.6g}")
    return LaxTrajectory(tr.times, Ls, init.window)


# ---------------------------------------------------------------------------
# radial Lax operator
# ---------------------------------------------------------------------------

@dataclass
class RadialLaxOperator:
    matrix: np.ndarray
    graph: GradedGraph
    respects_adjacency: bool

    def skew_defect(self) -> float:
        """max |D P_rad + (D P_rad)^T|, zero for weighted skew-adjointness."""
        W = self.graph.mass[:, None] * self.matrix
        return float(np.abs(W + W.T).max()) if W.size else 0.0


def radial_lax(pair: LaxPair1D, graph: GradedGraph) -> RadialLaxOperator:
    if pair.window != graph.window:
        raise WindowMismatch(f"Lax pair window {pair.window} != graph window {graph.window}")
    M = coaveraging_matrix(graph) @ pair.P @ averaging_matrix(graph)
    return RadialLaxOperator(M, graph, _respects_adjacency(M, graph, 0.0))


# ---------------------------------------------------------------------------
# radial Lax identity along sampled trajectories
# ---------------------------------------------------------------------------

def _chain_series(graph: GradedGraph, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = graph.n_layers
    if a.shape[1:] == (graph.n_edges,) and b.shape[1:] == (graph.n_vertices,):
        return chain_flaschka(graph, a, b)
    if a.shape[1:] == (m - 1,) and b.shape[1:] == (m,):
        return a, b
    raise DimensionMismatch(
        f"Flaschka series of width ({a.shape[-1]}, {b.shape[-1]}) fits neither the graph "
        f"nor its chain"
    )


def _derivative_weights(t_prev, t, t_next):
    h1, h2 = t - t_prev, t_next - t
    return (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)))


@dataclass
class RadialLaxResiduals:
    times: np.ndarray
    projected: np.ndarray
    full: np.ndarray

    @property
    def max_projected(self) -> float:
        return float(self.projected.max())

    @property
    def max_full(self) -> float:
        return float(self.full.max())


def radial_lax_residuals(
    graph: GradedGraph, times, a, b, boundary: str = "open", pot: Potential | None = None
) -> RadialLaxResiduals:
    """Residuals of the radial Lax identity at interior sample times.

    ``a``, ``b`` are Flaschka series on the graph or on its chain.  The time
    derivative of the lifted operator uses the three-point formula on the
    (possibly uneven) sample grid.  ``projected`` is
    ``max |dH/dt Proj - [P_rad, H]|`` and ``full`` is
    ``max |dH/dt - [P_rad, H]|``.

    With ``boundary="tension"`` the chain commutator also carries the frozen
    bonds just outside the window (coupling ``U'(0)/2``), which adds
    ``-2 a_g^2`` and ``+2 a_g^2`` to the first and last diagonal entries.
    """
    if boundary not in ("open", "tension"):
        raise ValueError(f"unknown boundary {boundary!r}")
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise TooFewSamples(f"need at least 3 samples, got {times.size}")
    a_z, b_z = _chain_series(graph, a, b)
    Pm, Ps = averaging_matrix(graph), coaveraging_matrix(graph)
    Proj = Ps @ Pm
    ghost = np.zeros((graph.n_layers, graph.n_layers))
    if boundary == "tension":
        a_g = 0.5 * float((pot or toda_potential()).U1(0.0))
        ghost[0, 0] -= 2 * a_g**2
        ghost[-1, -1] += 2 * a_g**2
    ghost = Ps @ ghost @ Pm

    def lifted(k):
        return lift_jacobi(JacobiOperator1D(a_z[k], b_z[k], graph.window), graph).to_dense()

    H = [lifted(0), lifted(1)]
    proj_res, full_res = [], []
    for k in range(1, times.size - 1):
        H.append(lifted(k + 1))
        w0, w1, w2 = _derivative_weights(times[k - 1], times[k], times[k + 1])
        dH = w0 * H[0] + w1 * H[1] + w2 * H[2]
        Pz = skew_part(JacobiOperator1D(a_z[k], b_z[k], graph.window).to_dense())
        Prad = Ps @ Pz @ Pm
        comm = Prad @ H[1] - H[1] @ Prad + ghost
        proj_res.append(np.abs(dH @ Proj - comm).max())
        full_res.append(np.abs(dH - comm).max())
        H.pop(0)
    return RadialLaxResiduals(times[1:-1], np.array(proj_res), np.array(full_res))


def verify_radial_lax(graph: GradedGraph, traj, boundary: str = "open") -> float:
    """Max projected residual along a Flaschka trajectory (graph or chain)."""
    return radial_lax_residuals(graph, traj.times, traj.a, traj.b, boundary).max_projected


# ---------------------------------------------------------------------------
# no-lift obstruction
# ---------------------------------------------------------------------------

@dataclass
class NoLiftReport:
    times: np.ndarray
    kernel_layers: tuple
    kernel_spectra: np.ndarray  # (n_samples, dim Ker P)
    radial_spectra: np.ndarray  # (n_samples, n_layers)
    b_layers: np.ndarray  # chain b at kernel_layers, (n_samples, len(kernel_layers))
    kernel_variation: float
    radial_drift: float
    var_tol: float
    const_tol: float
    a_chain: np.ndarray = field(repr=False, default=None)
    b_chain: np.ndarray = field(repr=False, default=None)

    @property
    def obstructed(self) -> bool:
        return self.kernel_variation > self.var_tol and self.radial_drift <= self.const_tol


def no_lift_demo(
    graph: GradedGraph,
    init: PhaseState,
    t_end: float,
    h: float,
    stride: int = 1,
    pot: Potential | None = None,
    boundary: str = "open",
    var_tol: float = VARIATION_TOL,
    const_tol: float = CONSTANCY_TOL,
) -> NoLiftReport:
    """Track the Ker P spectrum and the radial spectrum along a graph flow.

    The flow is integrated in phase space, reduced radially to chain
    Flaschka data, and lifted back to ``H(t)``.  The radial spectrum is that
    of ``P H P*``; the kernel spectrum is that of ``H`` restricted to Ker P.
    ``kernel_variation`` is the largest range (max minus min over time) of
    a sorted kernel eigenvalue, ``radial_drift`` the largest deviation of a
    sorted radial eigenvalue from its initial value.
    """
    if not graph.has_kernel:
        raise TrivialKernel("every layer is a single vertex, Ker P = {0}")
    pot = pot or toda_potential()
    traj = simulate_phase(graph, init, pot, t_end, h, stride, boundary=boundary)
    ftraj = phase_to_flaschka(graph, traj, pot)
    a_z, b_z = chain_flaschka(graph, ftraj.a, ftraj.b)

    Pm, Ps = averaging_matrix(graph), coaveraging_matrix(graph)
    ker, rad = [], []
    for k in range(len(traj.times)):
        H = lift_jacobi(JacobiOperator1D(a_z[k], b_z[k], graph.window), graph)
        K = restrict_to_kernel(H)
        ker.append(eigvalsh(0.5 * (K + K.T)))
        R = Pm @ H.to_dense() @ Ps
        rad.append(eigvalsh(0.5 * (R + R.T)))
    ker, rad = np.array(ker), np.array(rad)

    layers = tuple(
        graph.window[0] + i for i, layer in enumerate(graph.layers) if len(layer) > 1
    )
    b_layers = b_z[:, [n - graph.window[0] for n in layers]]
    variation = float((ker.max(axis=0) - ker.min(axis=0)).max())
    drift = float(np.abs(rad - rad[0]).max())
    log.info("no-lift: kernel variation %.3g, radial drift %.3g", variation, drift)
    return NoLiftReport(
        traj.times, layers, ker, rad, b_layers, variation, drift, var_tol, const_tol, a_z, b_z
    )
