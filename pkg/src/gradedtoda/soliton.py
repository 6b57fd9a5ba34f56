"""Closed-form N-soliton solutions of the Toda chain and their radial lifts.

With ``omega_i = sigma_i sinh(kappa_i)`` the soliton matrix is

    C(n, t)_ij = sqrt(g_i g_j) / (1 - s_i s_j exp(-(k_i + k_j)))
                 * exp(-(k_i + k_j) n - (omega_i + omega_j) t)

and ``q(n, t) = q0 - log det(1 + C(n, t)) + log det(1 + C(n - 1, t))``.
Each component travels towards ``-sigma_i * infinity`` with speed
``sinh(kappa_i) / kappa_i``.

Log-determinants are evaluated in factored form so that entries never
overflow: with ``x_i = -k_i n - omega_i t + log(g_i) / 2`` and
``E = diag(exp(-max(x, 0)))``, ``F = diag(exp(min(x, 0)))``,

    det(1 + C) = exp(2 sum max(x, 0)) det(E^2 + F K F),

where ``K`` is the ``x``-independent kernel above.  The resolvent
``G = (1 + C)^{-1} = E (E^2 + F K F)^{-1} E`` gives the time derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.optimize import brentq

from .errors import BadParams, SingularDeterminant
from .graph import GradedGraph


@dataclass(frozen=True)
class SolitonParams:
    kappa: tuple
    gamma: tuple
    sigma: tuple
    q0: float = 0.0

    def __post_init__(self):
        k = tuple(float(v) for v in np.atleast_1d(self.kappa))
        g = tuple(float(v) for v in np.atleast_1d(self.gamma))
        s = tuple(int(v) for v in np.atleast_1d(self.sigma))
        if not len(k) == len(g) == len(s):
            raise BadParams(f"kappa, gamma, sigma lengths differ: {len(k)}, {len(g)}, {len(s)}")
        if any(not v > 0 for v in k):
            raise BadParams("kappa must be positive")
        if any(not v > 0 for v in g):
            raise BadParams("gamma must be positive")
        if any(v not in (1, -1) for v in s):
            raise BadParams("sigma entries must be +1 or -1")
        object.__setattr__(self, "kappa", k)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "q0", float(self.q0))

    @property
    def N(self) -> int:
        return len(self.kappa)

    @classmethod
    def centered(cls, kappa, sigma, centers, q0: float = 0.0) -> "SolitonParams":
        """Choose ``gamma`` so that component ``i`` alone has its kink at
        ``centers[i]`` at ``t = 0`` (diagonal entry of C equal to one there)."""
        k = np.atleast_1d(np.asarray(kappa, dtype=float))
        c = np.broadcast_to(np.asarray(centers, dtype=float), k.shape)
        gamma = -np.expm1(-2.0 * k) * np.exp(2.0 * k * c)
        return cls(tuple(k), tuple(gamma), tuple(np.atleast_1d(sigma)), q0)

    @property
    def omega(self) -> np.ndarray:
        return np.asarray(self.sigma) * np.sinh(np.asarray(self.kappa))

    def speeds(self) -> np.ndarray:
        """Signed velocities of the individual components (sites per time)."""
        k = np.asarray(self.kappa)
        return -np.asarray(self.sigma) * np.sinh(k) / k


def _kernel(params: SolitonParams) -> np.ndarray:
    k = np.asarray(params.kappa)
    s = np.asarray(params.sigma, dtype=float)
    return 1.0 / (1.0 - np.outer(s, s) * np.exp(-(k[:, None] + k[None, :])))


def _exponents(params: SolitonParams, n, t) -> np.ndarray:
    k = np.asarray(params.kappa)
    return -k * n - params.omega * t + 0.5 * np.log(np.asarray(params.gamma))


def cn_matrix(params: SolitonParams, n: int, t: float) -> np.ndarray:
    """The soliton matrix C(n, t), evaluated directly."""
    if params.N == 0:
        return np.zeros((0, 0))
    x = _exponents(params, n, t)
    return _kernel(params) * np.exp(x[:, None] + x[None, :])


def _logdet_and_resolvent(params: SolitonParams, n, t, K):
    x = _exponents(params, n, t)
    pos = np.maximum(x, 0.0)
    E = np.exp(-pos)
    F = np.exp(np.minimum(x, 0.0))
    M = np.diag(E * E) + F[:, None] * K * F[None, :]
    try:
        fac = cho_factor(M, lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(fac[0])))
        Minv_E = cho_solve(fac, np.diag(E))
    except LinAlgError:
        sign, logdet = np.linalg.slogdet(M)
        if not sign > 0:
            raise SingularDeterminant(f"det(1 + C) is not positive at n={n}, t={t}") from None
        Minv_E = np.linalg.solve(M, np.diag(E))
    G = E[:, None] * Minv_E
    return 2.0 * pos.sum() + logdet, G


def _log_tau(params: SolitonParams, sites, t, order: int = 0):
    """``log det(1 + C(n, t))`` and its first ``order`` time derivatives."""
    sites = np.asarray(sites)
    out = np.zeros((order + 1, sites.size))
    if params.N == 0:
        return out
    K = _kernel(params)
    w = params.omega
    for j, n in enumerate(sites):
        L, G = _logdet_and_resolvent(params, n, t, K)
        out[0, j] = L
        if order >= 1:
            g = np.diag(G)
            out[1, j] = -2.0 * np.sum(w * (1.0 - g))
        if order >= 2:
            GWG = np.einsum("ik,k,ki->i", G, w, G)
            out[2, j] = 2.0 * np.sum(w * (2.0 * w * g - 2.0 * GWG))
    return out


def _chain_derivatives(params: SolitonParams, sites, t, order: int):
    sites = np.asarray(sites, dtype=float)
    tau = _log_tau(params, np.concatenate([[sites[0] - 1], sites]), t, order)
    return -(tau[:, 1:] - tau[:, :-1])


def soliton_q(params: SolitonParams, n: int, t: float) -> float:
    return float(params.q0 + _chain_derivatives(params, [n], t, 0)[0, 0])


def soliton_state(params: SolitonParams, window, t: float = 0.0):
    """Chain ``(q, p)`` on the sites of ``window`` at time ``t``."""
    sites = np.arange(int(window[0]), int(window[1]) + 1)
    d = _chain_derivatives(params, sites, t, 1)
    return params.q0 + d[0], d[1]


def soliton_acceleration(params: SolitonParams, window, t: float = 0.0) -> np.ndarray:
    """Analytic ``d p / d t`` on the sites of ``window``."""
    sites = np.arange(int(window[0]), int(window[1]) + 1)
    return _chain_derivatives(params, sites, t, 2)[2]


def soliton_residual(
    params: SolitonParams, window, t: float = 0.0, method: str = "analytic", h: float = 1e-6
) -> float:
    """Max over interior sites of the defect in the Toda chain equation."""
    n_min, n_max = int(window[0]), int(window[1])
    if n_max - n_min < 2:
        raise BadParams("window needs at least one interior site")
    q, _ = soliton_state(params, window, t)
    if method == "analytic":
        pdot = soliton_acceleration(params, window, t)
    elif method == "fd":
        pdot = (soliton_state(params, window, t + h)[1] - soliton_state(params, window, t - h)[1]) / (2 * h)
    else:
        raise ValueError(f"unknown method {method!r}")
    r = np.diff(q)
    rhs = -np.exp(-r[1:]) + np.exp(-r[:-1])
    return float(np.abs(pdot[1:-1] - rhs).max())


def soliton_phase_state(params: SolitonParams, graph: GradedGraph, t: float = 0.0):
    """Radial lift of the soliton onto ``graph`` at time ``t``."""
    from .dynamics import lift_radial_state

    q, p = soliton_state(params, graph.window, t)
    return lift_radial_state(q, p, graph, time=t)


def crossing_time(params: SolitonParams, n: int, level: float, t_lo: float, t_hi: float, samples: int = 2001) -> float:
    """First time in ``[t_lo, t_hi]`` at which ``q(n, t)`` crosses ``level``."""
    ts = np.linspace(t_lo, t_hi, samples)
    vals = np.array([soliton_q(params, n, t) for t in ts]) - level
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if idx.size == 0:
        raise BadParams(f"q({n}, t) never crosses {level} on [{t_lo}, {t_hi}]")
    i = idx[0]
    return float(brentq(lambda s: soliton_q(params, n, s) - level, ts[i], ts[i + 1], xtol=1e-14, rtol=1e-14))


def measure_speed(
    params: SolitonParams, sites=(0, -10), level: float | None = None, t_range=(-50.0, 50.0)
) -> float:
    """Speed of the kink from the times it crosses ``level`` at two sites.

    ``level`` defaults to the midpoint ``q0 + sum(kappa)`` of the profile.
    Returns the unsigned speed in sites per unit time.
    """
    if level is None:
        level = params.q0 + float(np.sum(params.kappa))
    n_a, n_b = sites
    t_a = crossing_time(params, n_a, level, *t_range)
    t_b = crossing_time(params, n_b, level, *t_range)
    if t_a == t_b:
        raise BadParams("crossing times coincide; choose different sites")
    return abs((n_b - n_a) / (t_b - t_a))
