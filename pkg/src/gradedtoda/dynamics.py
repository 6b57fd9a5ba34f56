"""Hamiltonian lattice dynamics on graded graphs.

Phase space is ``(q, p)`` per vertex with Hamiltonian

    H = sum_x p(x)^2 / (2 mu_v(x)) + sum_(x,y) mu_e(x,y) U(q(y) - q(x)).

Flaschka coordinates are ``a = U'(dq/2)/2`` per edge and
``b = -p/(2 mu_v)`` per vertex.

Truncating an infinite graph to a window removes the edges that leave it.
Two boundary rules are offered:

``"tension"``
    each missing edge is replaced by a spring frozen at zero strain, so the
    boundary layers feel the constant force ``U'(0)`` they would feel in
    equilibrium.  Constant displacements stay fixed, and profiles that are
    flat near the window ends evolve as on the infinite graph.
``"open"``
    missing edges exert no force (free ends).  On the path this is the open
    lattice, whose finite Lax pair is exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    BlowUp,
    DimensionMismatch,
    InverseDomainError,
    MassBelowDelta,
    MeasureBalanceViolated,
    NonFiniteField,
    WindowMismatch,
)
from .graph import DEFAULT_DELTA, GradedGraph, builtin_graph
from .operators import average, coaverage

log = logging.getLogger(__name__)

BOUNDARIES = ("tension", "open")
DEFAULT_BOUNDARY = "tension"
DEFAULT_BOUND = 1e6


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    name: str
    U: Callable
    U1: Callable
    U2: Callable
    inv_U1: Optional[Callable] = None
    is_toda: bool = False


def _toda_inv(s):
    s = np.asarray(s, dtype=float)
    if np.any(~(s < 0)):
        raise InverseDomainError("inverse of U' = -exp(-r) needs strictly negative input")
    out = -np.log(-s)
    return float(out) if out.ndim == 0 else out


def toda_potential() -> Potential:
    """U(r) = exp(-r) - 1."""
    return Potential(
        name="toda",
        U=lambda r: np.exp(-np.asarray(r, dtype=float)) - 1.0,
        U1=lambda r: -np.exp(-np.asarray(r, dtype=float)),
        U2=lambda r: np.exp(-np.asarray(r, dtype=float)),
        inv_U1=_toda_inv,
        is_toda=True,
    )


def harmonic_potential(k: float = 1.0) -> Potential:
    """U(r) = k r^2 / 2, the linear chain."""
    if not k > 0:
        raise ValueError("spring constant must be positive")
    return Potential(
        name="harmonic",
        U=lambda r: 0.5 * k * np.asarray(r, dtype=float) ** 2,
        U1=lambda r: k * np.asarray(r, dtype=float),
        U2=lambda r: k * np.ones_like(np.asarray(r, dtype=float)),
        inv_U1=lambda s: np.asarray(s, dtype=float) / k,
    )


POTENTIALS = {"toda": toda_potential, "harmonic": harmonic_potential}


def get_potential(name: str) -> Potential:
    try:
        return POTENTIALS[name]()
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; choose from {sorted(POTENTIALS)}") from None


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

@dataclass
class PhaseState:
    q: np.ndarray
    p: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.q.shape != self.p.shape or self.q.ndim != 1:
            raise DimensionMismatch(f"q {self.q.shape} and p {self.p.shape} differ")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])


@dataclass
class FlaschkaState:
    a: np.ndarray
    b: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])


def equilibrium_state(graph: GradedGraph, q0: float = 0.0) -> PhaseState:
    return PhaseState(np.full(graph.n_vertices, float(q0)), np.zeros(graph.n_vertices))


def _check_phase(graph: GradedGraph, state: PhaseState):
    if state.q.shape != (graph.n_vertices,):
        raise DimensionMismatch(
            f"state has {state.q.size} entries, graph has {graph.n_vertices} vertices"
        )


def _check_flaschka(graph: GradedGraph, fstate: FlaschkaState):
    if fstate.a.shape != (graph.n_edges,) or fstate.b.shape != (graph.n_vertices,):
        raise DimensionMismatch(
            f"Flaschka state ({fstate.a.size}, {fstate.b.size}) does not match "
            f"graph ({graph.n_edges} edges, {graph.n_vertices} vertices)"
        )


def _check_boundary(boundary: str):
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")


def _edge_layer_masks(graph: GradedGraph):
    first = graph.layers[0]
    last = graph.layers[-1]
    return first, last


# ---------------------------------------------------------------------------
# Hamiltonian and vector fields
# ---------------------------------------------------------------------------

def hamiltonian(
    graph: GradedGraph, state: PhaseState, pot: Potential, boundary: str = DEFAULT_BOUNDARY
) -> float:
    """Energy of ``state``.

    With the tension boundary the frozen springs act as a constant external
    force on the end layers, which adds the matching linear term.
    """
    _check_phase(graph, state)
    _check_boundary(boundary)
    q, p = state.q, state.p
    kinetic = np.sum(p * p / (2.0 * graph.mass))
    strain = q[graph.dst] - q[graph.src]
    energy = kinetic + np.sum(graph.edge_mass * pot.U(strain))
    if boundary == "tension":
        f0 = float(pot.U1(0.0))
        first, last = _edge_layer_masks(graph)
        energy += f0 * (
            np.sum(graph.mass[first] * q[first]) - np.sum(graph.mass[last] * q[last])
        )
    return float(energy)


def make_phase_field(
    graph: GradedGraph,
    pot: Potential,
    boundary: str = DEFAULT_BOUNDARY,
    delta: float = DEFAULT_DELTA,
) -> Callable[[np.ndarray], np.ndarray]:
    """Vector field on the stacked vector ``[q, p]``."""
    _check_boundary(boundary)
    if graph.mass.min() < delta:
        raise MassBelowDelta(f"min mu_v = {graph.mass.min():.3g} < delta = {delta:.3g}")
    nv = graph.n_vertices
    s, d, w, mass = graph.src, graph.dst, graph.edge_mass, graph.mass
    extra = np.zeros(nv)
    if boundary == "tension":
        f0 = float(pot.U1(0.0))
        first, last = _edge_layer_masks(graph)
        extra[first] -= mass[first] * f0
        extra[last] += mass[last] * f0

    def field(y):
        q, p = y[:nv], y[nv:]
        force = w * pot.U1(q[d] - q[s])
        dp = np.bincount(s, weights=force, minlength=nv) - np.bincount(
            d, weights=force, minlength=nv
        )
        return np.concatenate([p / mass, dp + extra])

    return field


def eom_vector_field(
    graph: GradedGraph,
    state: PhaseState,
    pot: Potential,
    boundary: str = DEFAULT_BOUNDARY,
    delta: float = DEFAULT_DELTA,
):
    """Return ``(dq, dp)`` at ``state``."""
    _check_phase(graph, state)
    out = make_phase_field(graph, pot, boundary, delta)(state.as_vector())
    return out[: graph.n_vertices], out[graph.n_vertices :]


def flaschka_forward(graph: GradedGraph, state: PhaseState, pot: Potential) -> FlaschkaState:
    _check_phase(graph, state)
    strain = state.q[graph.dst] - state.q[graph.src]
    a = 0.5 * pot.U1(strain / 2.0)
    b = -state.p / (2.0 * graph.mass)
    return FlaschkaState(np.asarray(a, dtype=float), b, state.time)


def make_flaschka_field(
    graph: GradedGraph,
    pot: Potential,
    boundary: str = DEFAULT_BOUNDARY,
    fast: Optional[bool] = None,
) -> Callable[[np.ndarray], np.ndarray]:
    """Vector field on the stacked vector ``[a, b]``.

    ``fast`` selects the closed Toda form; by default it is used whenever the
    potential is Toda.  Otherwise ``pot.inv_U1`` is required.
    """
    _check_boundary(boundary)
    if fast is None:
        fast = pot.is_toda
    if not fast and pot.inv_U1 is None:
        raise InverseDomainError(f"potential {pot.name!r} has no inverse of U'")
    ne, nv = graph.n_edges, graph.n_vertices
    s, d, w, mass = graph.src, graph.dst, graph.edge_mass, graph.mass
    ws, wd = w / mass[s], w / mass[d]
    extra = np.zeros(nv)
    if boundary == "tension":
        f0 = float(pot.U1(0.0))
        first, last = _edge_layer_masks(graph)
        extra[first] += 0.5 * f0
        extra[last] -= 0.5 * f0

    if fast:

        def field(y):
            a, b = y[:ne], y[ne:]
            da = a * (b[d] - b[s])
            a2 = 2.0 * a * a
            db = np.bincount(s, weights=ws * a2, minlength=nv) - np.bincount(
                d, weights=wd * a2, minlength=nv
            )
            return np.concatenate([da, db + extra])

    else:

        def field(y):
            a, b = y[:ne], y[ne:]
            half = pot.inv_U1(2.0 * a)
            da = -0.5 * pot.U2(half) * (b[d] - b[s])
            f = pot.U1(2.0 * half)
            db = 0.5 * (
                np.bincount(d, weights=wd * f, minlength=nv)
                - np.bincount(s, weights=ws * f, minlength=nv)
            )
            return np.concatenate([da, db + extra])

    return field


def flaschka_vector_field(
    graph: GradedGraph,
    fstate: FlaschkaState,
    pot: Potential,
    boundary: str = DEFAULT_BOUNDARY,
    fast: Optional[bool] = None,
):
    """Return ``(da, db)`` at ``fstate``."""
    _check_flaschka(graph, fstate)
    out = make_flaschka_field(graph, pot, boundary, fast)(fstate.as_vector())
    return out[: graph.n_edges], out[graph.n_edges :]


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n_samples, dim)
    steps: int = 0

    def __len__(self):
        return len(self.times)


def integrate(
    field: Callable[[np.ndarray], np.ndarray],
    init,
    t_end: float,
    h: float,
    stride: int = 1,
    bound: float = DEFAULT_BOUND,
    t0: float = 0.0,
) -> Trajectory:
    """Classical fixed-step RK4 from ``t0`` to ``t_end``.

    The last step is shortened so the final sample sits exactly at ``t_end``;
    samples are kept every ``stride`` steps and at the end.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    if t_end < t0:
        raise ValueError("t_end must not precede the start time")
    if int(stride) < 1:
        raise ValueError("stride must be >= 1")
    stride = int(stride)
    y = np.array(init.as_vector() if hasattr(init, "as_vector") else init, dtype=float)
    if not np.all(np.isfinite(field(y))):
        raise NonFiniteField("vector field is not finite at the initial state")

    span = t_end - t0
    n_steps = int(math.ceil(span / h - 1e-9)) if span > 0 else 0
    times, samples = [t0], [y.copy()]
    t = t0
    for k in range(1, n_steps + 1):
        dt = min(h, t_end - t) if k == n_steps else h
        k1 = field(y)
        k2 = field(y + 0.5 * dt * k1)
        k3 = field(y + 0.5 * dt * k2)
        k4 = field(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t_end if k == n_steps else t0 + k * h
        if not np.all(np.isfinite(y)):
            raise NonFiniteField(f"state became non-finite at t = {t:.6g}")
        if np.abs(y).max() > bound:
            log.warning("blow-up at t=%.6g", t)
            raise BlowUp(
                f"|state| exceeded {bound:g} at t = {t:.6g}",
                t_last=times[-1],
                trajectory=Trajectory(np.array(times), np.array(samples), k - 1),
            )
        if k % stride == 0 or k == n_steps:
            times.append(t)
            samples.append(y.copy())
    return Trajectory(np.array(times), np.array(samples), n_steps)


@dataclass
class PhaseTrajectory:
    times: np.ndarray
    q: np.ndarray  # (n_samples, n_vertices)
    p: np.ndarray

    def state(self, k: int) -> PhaseState:
        return PhaseState(self.q[k], self.p[k], float(self.times[k]))


@dataclass
class FlaschkaTrajectory:
    times: np.ndarray
    a: np.ndarray  # (n_samples, n_edges)
    b: np.ndarray  # (n_samples, n_vertices)

    def state(self, k: int) -> FlaschkaState:
        return FlaschkaState(self.a[k], self.b[k], float(self.times[k]))

    def __len__(self):
        return len(self.times)


def simulate_phase(
    graph: GradedGraph,
    init: PhaseState,
    pot: Potential,
    t_end: float,
    h: float,
    stride: int = 1,
    boundary: str = DEFAULT_BOUNDARY,
    bound: float = DEFAULT_BOUND,
    delta: float = DEFAULT_DELTA,
) -> PhaseTrajectory:
    _check_phase(graph, init)
    field_ = make_phase_field(graph, pot, boundary, delta)
    tr = integrate(field_, init, init.time + t_end, h, stride, bound, t0=init.time)
    nv = graph.n_vertices
    return PhaseTrajectory(tr.times, tr.states[:, :nv], tr.states[:, nv:])


def simulate_flaschka(
    graph: GradedGraph,
    init: FlaschkaState,
    pot: Potential,
    t_end: float,
    h: float,
    stride: int = 1,
    boundary: str = DEFAULT_BOUNDARY,
    bound: float = DEFAULT_BOUND,
    fast: Optional[bool] = None,
) -> FlaschkaTrajectory:
    _check_flaschka(graph, init)
    field_ = make_flaschka_field(graph, pot, boundary, fast)
    tr = integrate(field_, init, init.time + t_end, h, stride, bound, t0=init.time)
    ne = graph.n_edges
    return FlaschkaTrajectory(tr.times, tr.states[:, :ne], tr.states[:, ne:])


def phase_to_flaschka(graph: GradedGraph, traj: PhaseTrajectory, pot: Potential) -> FlaschkaTrajectory:
    strain = traj.q[:, graph.dst] - traj.q[:, graph.src]
    a = 0.5 * pot.U1(strain / 2.0)
    b = -traj.p / (2.0 * graph.mass[None, :])
    return FlaschkaTrajectory(traj.times, np.asarray(a, dtype=float), b)


# ---------------------------------------------------------------------------
# radial lifts
# ---------------------------------------------------------------------------

def chain_graph(window) -> GradedGraph:
    """The path graph on ``window``; chain dynamics are graph dynamics on it."""
    return builtin_graph("path", window)


def lift_radial_state(chain_q, chain_p, graph: GradedGraph, time: float = 0.0) -> PhaseState:
    """Copy a chain state onto the graph with ``p = mu_v * chain_p``."""
    chain_q = np.asarray(chain_q, dtype=float)
    chain_p = np.asarray(chain_p, dtype=float)
    if chain_q.shape != (graph.n_layers,) or chain_p.shape != (graph.n_layers,):
        raise WindowMismatch(
            f"chain data of length {chain_q.size}/{chain_p.size} for window {graph.window}"
        )
    if not graph.measure_balanced:
        raise MeasureBalanceViolated("radial lifts require the Measure Balance assumption")
    return PhaseState(
        coaverage(chain_q, graph), graph.mass * coaverage(chain_p, graph), time
    )


def radial_reduce(graph: GradedGraph, state: PhaseState):
    """Chain ``(q, p)`` obtained by averaging ``q`` and the velocity ``p / mu_v``."""
    _check_phase(graph, state)
    return average(state.q, graph), average(state.p / graph.mass, graph)


def radial_spread(graph: GradedGraph, values) -> float:
    """Largest same-layer difference ``max |f(x) - f(y)|``."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    spread = 0.0
    for layer in graph.layers:
        if len(layer) > 1:
            block = values[:, layer]
            spread = max(spread, float((block.max(axis=1) - block.min(axis=1)).max()))
    return spread


def chain_flaschka(graph: GradedGraph, a, b):
    """Radial reduction of Flaschka data to the chain.

    ``a`` per edge is summed against ``mu_e`` over each layer pair and ``b`` is
    averaged; radial data passes through unchanged.  Accepts single states or
    sample stacks (leading time axis).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n_min = graph.window[0]
    bond = graph.ranks[graph.src] - n_min
    nb = graph.n_layers - 1
    P = np.zeros((nb, graph.n_edges))
    P[bond, np.arange(graph.n_edges)] = graph.edge_mass
    Pv = np.zeros((graph.n_layers, graph.n_vertices))
    Pv[graph.ranks - n_min, np.arange(graph.n_vertices)] = graph.mass
    return a @ P.T, b @ Pv.T
