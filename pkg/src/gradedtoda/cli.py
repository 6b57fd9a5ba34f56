"""Command-line entry point: ``graded-toda <subcommand> [options]``.

Exit codes: 0 success, 1 runtime or assumption failure, 2 usage or parse
error.  ``GRADED_TODA_LOG`` sets the log level (error, warn, info, debug).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import re
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from .dynamics import (
    BOUNDARIES,
    POTENTIALS,
    PhaseState,
    chain_graph,
    equilibrium_state,
    get_potential,
    hamiltonian,
    lift_radial_state,
    phase_to_flaschka,
    radial_reduce,
    radial_spread,
    simulate_phase,
)
from .errors import BadParams, BlowUp, GradedTodaError, GraphSpecError
from .graph import BUILTIN_FAMILIES, GradedGraph, builtin_graph, load_graph_file, validate
from .lax import lax_pair, no_lift_demo, radial_lax, radial_lax_residuals
from .operators import (
    JacobiOperator1D,
    averaging_matrix,
    coaveraging_matrix,
    lift_jacobi,
    projection_matrix,
    restrict_to_kernel,
    spectrum,
)
from .soliton import SolitonParams, soliton_phase_state, soliton_state

log = logging.getLogger("gradedtoda")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
PROGRAM = "graded-toda"


class UsageError(Exception):
    """Bad configuration detected after argument parsing (exit 2)."""


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def parse_window(text) -> tuple[int, int]:
    if isinstance(text, (list, tuple)) and len(text) == 2:
        return int(text[0]), int(text[1])
    m = re.fullmatch(r"\s*(-?\d+)\s*:\s*(-?\d+)\s*", str(text))
    if not m:
        raise argparse.ArgumentTypeError(f"window must look like a:b, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in re.split(r"[,:]", str(text)) if v.strip()]


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in re.split(r"[,:]", str(text)) if v.strip()]


def parse_soliton_spec(text: str) -> tuple[SolitonParams, dict]:
    """``N=2,kappa=1:1.5,gamma=1:1,sigma=+1:-1,q0=0`` (``center`` may replace ``gamma``)."""
    fields = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"soliton field {part!r} is not key=value")
        k, v = part.split("=", 1)
        fields[k.strip()] = v.strip()
    unknown = set(fields) - {"N", "kappa", "gamma", "sigma", "q0", "center"}
    if unknown:
        raise UsageError(f"unknown soliton fields {sorted(unknown)}")
    return soliton_from_fields(fields), fields


def soliton_from_fields(fields: dict) -> SolitonParams:
    try:
        kappa = _float_list(fields.get("kappa", "1"))
        n = int(fields.get("N", len(kappa)))
        sigma = _int_list(fields.get("sigma", ":".join(["1"] * n)))
        q0 = float(fields.get("q0", 0.0))
        if len(kappa) == 1 and n > 1:
            kappa = kappa * n
        if len(sigma) == 1 and n > 1:
            sigma = sigma * n
        if "center" in fields:
            if "gamma" in fields:
                raise UsageError("give either gamma or center, not both")
            center = _float_list(fields["center"])
            params = SolitonParams.centered(kappa, sigma, center if len(center) > 1 else center * n, q0)
        else:
            gamma = _float_list(fields.get("gamma", ":".join(["1"] * n)))
            if len(gamma) == 1 and n > 1:
                gamma = gamma * n
            params = SolitonParams(tuple(kappa), tuple(gamma), tuple(sigma), q0)
    except (ValueError, BadParams) as exc:
        raise UsageError(f"bad soliton specification: {exc}") from exc
    if params.N != n:
        raise UsageError(f"N={n} but {params.N} components were given")
    return params


@dataclass
class InitSpec:
    kind: str  # equilibrium | soliton | chain | vertex | random
    soliton: Optional[SolitonParams] = None
    data: Optional[dict] = None
    amp: float = 0.1
    seed: int = 0
    q0: float = 0.0

    def chain_state(self, window):
        m = window[1] - window[0] + 1
        if self.kind == "equilibrium":
            return np.full(m, self.q0), np.zeros(m)
        if self.kind == "soliton":
            return soliton_state(self.soliton, window, 0.0)
        if self.kind == "chain":
            q = np.asarray(self.data["chain_q"], dtype=float)
            p = np.asarray(self.data.get("chain_p", np.zeros(m)), dtype=float)
            if q.shape != (m,) or p.shape != (m,):
                raise UsageError(f"chain data length {q.size} does not match window {window}")
            return q, p
        raise UsageError(f"initial condition {self.kind!r} is not given at the chain level")

    def phase_state(self, graph: GradedGraph) -> PhaseState:
        if self.kind == "equilibrium":
            return equilibrium_state(graph, self.q0)
        if self.kind == "soliton":
            return soliton_phase_state(self.soliton, graph, 0.0)
        if self.kind == "chain":
            q, p = self.chain_state(graph.window)
            return lift_radial_state(q, p, graph)
        if self.kind == "random":
            rng = np.random.default_rng(self.seed)
            q = rng.uniform(-self.amp, self.amp, graph.n_vertices)
            p = rng.uniform(-self.amp, self.amp, graph.n_vertices) * graph.mass
            return PhaseState(q, p)
        q = self.data["q"]
        p = self.data.get("p", [0.0] * graph.n_vertices if not isinstance(q, dict) else {})
        return PhaseState(_per_vertex(q, graph, "q"), _per_vertex(p, graph, "p"))


def _per_vertex(values, graph: GradedGraph, name: str) -> np.ndarray:
    if isinstance(values, dict):
        unknown = set(map(str, values)) - set(graph.vertices)
        if unknown:
            raise UsageError(f"{name} given for unknown vertices {sorted(unknown)}")
        return np.array([float(values.get(v, 0.0)) for v in graph.vertices])
    arr = np.asarray(values, dtype=float)
    if arr.shape != (graph.n_vertices,):
        raise UsageError(f"{name} has {arr.size} entries, graph has {graph.n_vertices} vertices")
    return arr


def parse_init(text: str, seed: int = 0) -> InitSpec:
    text = str(text).strip()
    if text == "equilibrium" or text.startswith("equilibrium:"):
        q0 = float(text.split("q0=")[1]) if "q0=" in text else 0.0
        return InitSpec("equilibrium", q0=q0)
    if text.startswith("soliton:") or text == "soliton":
        params, _ = parse_soliton_spec(text.partition(":")[2])
        return InitSpec("soliton", soliton=params)
    if text == "random" or text.startswith("random:"):
        amp = float(text.split("amp=")[1]) if "amp=" in text else 0.1
        return InitSpec("random", amp=amp, seed=seed)
    try:
        with open(text) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"initial condition {text!r} is neither a keyword nor a file") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{text}: not valid JSON ({exc})") from exc
    if "soliton" in data:
        fields = {k: (":".join(map(str, v)) if isinstance(v, list) else str(v)) for k, v in data["soliton"].items()}
        return InitSpec("soliton", soliton=soliton_from_fields(fields))
    if "chain_q" in data:
        return InitSpec("chain", data=data)
    if "q" in data:
        return InitSpec("vertex", data=data)
    raise UsageError(f"{text}: expected keys 'q', 'chain_q' or 'soliton'")


def resolve_graph(args) -> GradedGraph:
    if args.graph and args.builtin:
        raise UsageError("give either --graph or --builtin, not both")
    if args.graph:
        return load_graph_file(args.graph)
    if not args.builtin:
        raise UsageError("a graph is required: --graph PATH or --builtin NAME --window a:b")
    window = parse_window(args.window) if args.window is not None else None
    return builtin_graph(
        args.builtin,
        window,
        level=args.level,
        period=args.period,
        doubled=_int_list(args.doubled),
    )


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

IGNORED_IN_HASH = {"out", "config", "func", "format"}


def config_dict(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in IGNORED_IN_HASH}


def header(args) -> dict:
    cfg = config_dict(args)
    blob = json.dumps(cfg, sort_keys=True, default=str)
    return {
        "program": PROGRAM,
        "version": __version__,
        "config_sha256": hashlib.sha256(blob.encode()).hexdigest(),
        "config": cfg,
    }


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _jsonable(v):
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        v = float(v)
    if isinstance(v, float) and not np.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def emit(args, columns, rows, summary: Optional[dict] = None, error: Optional[dict] = None):
    hdr = header(args)
    buf = io.StringIO()
    if args.format == "json":
        doc = {"header": hdr, "columns": list(columns), "records": [dict(zip(columns, r)) for r in rows]}
        if summary is not None:
            doc["summary"] = summary
        if error is not None:
            doc["error"] = error
        json.dump(_jsonable(doc), buf, indent=1, sort_keys=False, default=str)
        buf.write("\n")
    else:
        buf.write(f"# {PROGRAM} {__version__}\n")
        buf.write(f"# config_sha256: {hdr['config_sha256']}\n")
        buf.write(f"# config: {json.dumps(hdr['config'], sort_keys=True, default=str)}\n")
        if error is not None:
            buf.write("# error: " + " ".join(f"{k}={_fmt(v)}" for k, v in error.items()) + "\n")
        if columns:
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        if summary is not None:
            buf.write("# summary: " + " ".join(f"{k}={_fmt(v)}" for k, v in summary.items()) + "\n")
    text = buf.getvalue()
    if args.out in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    graph = resolve_graph(args)
    rep = validate(graph, delta=args.delta, tol=args.tol)
    rows = [(flag, "*", "pass" if getattr(rep, flag) else "fail", "") for flag in rep.FLAGS]
    rows += [(v.check, v.item, "fail", v.residual) for v in rep.violations]
    emit(args, ["check", "item", "status", "residual"], rows, summary={"ok": rep.ok, "violations": len(rep.violations)})
    return 0 if rep.ok else 1


def _run_common(args):
    if not args.step > 0:
        raise UsageError("--step must be positive")
    if args.t_end < 0:
        raise UsageError("--t-end must be non-negative")
    if args.stride < 1:
        raise UsageError("--stride must be >= 1")
    if args.boundary not in BOUNDARIES:
        raise UsageError(f"--boundary must be one of {BOUNDARIES}")
    try:
        pot = get_potential(args.potential)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return pot, parse_init(args.init, args.seed)


def cmd_simulate(args) -> int:
    graph = resolve_graph(args)
    pot, init = _run_common(args)
    state = init.phase_state(graph)
    traj = simulate_phase(graph, state, pot, args.t_end, args.step, args.stride, boundary=args.boundary, bound=args.bound)
    energies = [hamiltonian(graph, traj.state(k), pot, args.boundary) for k in range(len(traj.times))]
    summary = {
        "samples": len(traj.times),
        "energy_drift": float(np.abs(np.array(energies) - energies[0]).max()),
        "radial_spread": radial_spread(graph, traj.q),
    }
    if args.variables == "phase":
        rows = [
            (t, v, traj.q[k, i], traj.p[k, i])
            for k, t in enumerate(traj.times)
            for i, v in enumerate(graph.vertices)
        ]
        emit(args, ["t", "vertex_id", "q", "p"], rows, summary)
        return 0
    ftraj = phase_to_flaschka(graph, traj, pot)
    if args.variables == "a":
        rows = [
            (t, graph.edge_id(e), ftraj.a[k, e])
            for k, t in enumerate(traj.times)
            for e in range(graph.n_edges)
        ]
        emit(args, ["t", "edge_id", "a"], rows, summary)
    else:
        rows = [
            (t, v, ftraj.b[k, i])
            for k, t in enumerate(traj.times)
            for i, v in enumerate(graph.vertices)
        ]
        emit(args, ["t", "vertex_id", "b"], rows, summary)
    return 0


def cmd_soliton(args) -> int:
    fields = {k: getattr(args, k) for k in ("N", "kappa", "gamma", "sigma", "q0", "center") if getattr(args, k) is not None}
    params = soliton_from_fields({k: str(v) for k, v in fields.items()})
    if args.builtin or args.graph:
        graph = resolve_graph(args)
        st = soliton_phase_state(params, graph, args.t)
        rows = [(v, graph.rank[v], st.q[i], st.p[i]) for i, v in enumerate(graph.vertices)]
        emit(args, ["vertex_id", "rank", "q", "p"], rows, {"N": params.N, "t": args.t})
        return 0
    if args.window is None:
        raise UsageError("soliton needs --window a:b (or a graph)")
    window = parse_window(args.window)
    q, p = soliton_state(params, window, args.t)
    rows = [(n, q[k], p[k]) for k, n in enumerate(range(window[0], window[1] + 1))]
    emit(args, ["n", "q", "p"], rows, {"N": params.N, "t": args.t})
    return 0


def cmd_lift_compare(args) -> int:
    graph = resolve_graph(args)
    pot, init = _run_common(args)
    chain_q, chain_p = init.chain_state(graph.window)
    path = chain_graph(graph.window)
    kw = dict(boundary=args.boundary, bound=args.bound)
    chain = simulate_phase(path, PhaseState(chain_q, chain_p), pot, args.t_end, args.step, args.stride, **kw)
    lifted0 = lift_radial_state(chain_q, chain_p, graph)
    gtraj = simulate_phase(graph, lifted0, pot, args.t_end, args.step, args.stride, **kw)

    rows = []
    for k, t in enumerate(gtraj.times):
        ref = lift_radial_state(chain.q[k], chain.p[k], graph)
        d_chain = max(np.abs(gtraj.q[k] - ref.q).max(), np.abs(gtraj.p[k] - ref.p).max())
        if init.kind == "soliton":
            exact = soliton_phase_state(init.soliton, graph, t)
            d_exact = max(np.abs(gtraj.q[k] - exact.q).max(), np.abs(gtraj.p[k] - exact.p).max())
        else:
            d_exact = float("nan")
        spread = max(radial_spread(graph, gtraj.q[k]), radial_spread(graph, gtraj.p[k] / graph.mass))
        rows.append((t, d_chain, d_exact, spread))
    arr = np.array([r[1:] for r in rows], dtype=float)
    max_chain = float(arr[:, 0].max())
    max_exact = float(np.nanmax(arr[:, 1])) if init.kind == "soliton" else float("nan")
    worst = max_exact if init.kind == "soliton" else max_chain
    summary = {
        "max_discrepancy": worst,
        "max_discrepancy_chain": max_chain,
        "max_discrepancy_closed_form": max_exact,
        "max_radial_spread": float(arr[:, 2].max()),
        "tol": args.tol,
        "ok": bool(worst <= args.tol),
    }
    emit(args, ["t", "discrepancy_chain", "discrepancy_closed_form", "radial_spread"], rows, summary)
    return 0 if summary["ok"] else 1


def cmd_lax_check(args) -> int:
    graph = resolve_graph(args)
    pot, init = _run_common(args)
    state = init.phase_state(graph)
    rep = no_lift_demo(graph, state, args.t_end, args.step, args.stride, pot=pot, boundary=args.boundary)
    res = radial_lax_residuals(graph, rep.times, rep.a_chain, rep.b_chain, args.boundary, pot) if len(rep.times) >= 3 else None
    nan = float("nan")
    m, kdim = rep.radial_spectra.shape[1], rep.kernel_spectra.shape[1]
    columns = ["t"] + [f"radial_{i}" for i in range(m)] + [f"kernel_{i}" for i in range(kdim)]
    columns += ["residual_projected", "residual_full"]
    rows = []
    for k, t in enumerate(rep.times):
        rp = rf = nan
        if res is not None and 0 < k < len(rep.times) - 1:
            rp, rf = res.projected[k - 1], res.full[k - 1]
        rows.append((t, *rep.radial_spectra[k], *rep.kernel_spectra[k], rp, rf))
    summary = {
        "obstructed": rep.obstructed,
        "kernel_variation": rep.kernel_variation,
        "radial_drift": rep.radial_drift,
        "max_residual_projected": res.max_projected if res is not None else nan,
        "max_residual_full": res.max_full if res is not None else nan,
    }
    emit(args, columns, rows, summary)
    return 0


def _operator_data(args, graph: GradedGraph):
    """Chain Jacobi data from --init (radially reduced) or constants."""
    if args.init is None:
        m = graph.n_layers
        return JacobiOperator1D(np.full(m - 1, args.alpha), np.full(m, args.beta), graph.window)
    pot = get_potential(args.potential)
    state = parse_init(args.init, args.seed).phase_state(graph)
    q, p = radial_reduce(graph, state)
    a = 0.5 * pot.U1(np.diff(q) / 2.0)
    return JacobiOperator1D(a, -p / 2.0, graph.window)


def cmd_dump_operator(args) -> int:
    graph = resolve_graph(args)
    v = graph.vertices
    sites = [str(n) for n in graph.sites()]
    if args.operator in ("lifted", "radial-lax"):
        J = _operator_data(args, graph)
        if args.operator == "lifted":
            M = lift_jacobi(J, graph).to_dense()
        else:
            M = radial_lax(lax_pair(J), graph).matrix
        rid, cid = v, v
    elif args.operator == "proj":
        M, rid, cid = projection_matrix(graph), v, v
    elif args.operator == "average":
        M, rid, cid = averaging_matrix(graph), sites, v
    else:
        M, rid, cid = coaveraging_matrix(graph), v, sites
    rows = [(rid[i], cid[j], M[i, j]) for i, j in zip(*np.nonzero(M))]
    emit(args, ["row", "col", "value"], rows, {"shape": f"{M.shape[0]}x{M.shape[1]}", "nnz": len(rows)})
    return 0


def cmd_spectrum(args) -> int:
    graph = resolve_graph(args)
    H = lift_jacobi(_operator_data(args, graph), graph)
    if args.kernel:
        K = restrict_to_kernel(H)
        ev = np.linalg.eigvalsh(0.5 * (K + K.T)) if K.size else np.zeros(0)
    else:
        ev = spectrum(H)
    emit(args, ["index", "eigenvalue"], list(enumerate(ev)), {"count": len(ev)})
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _graph_options(p):
    g = p.add_argument_group("graph")
    g.add_argument("--graph", metavar="PATH", help="JSON graph description")
    g.add_argument("--builtin", choices=BUILTIN_FAMILIES, help="built-in family")
    g.add_argument("--window", metavar="A:B", help="inclusive rank window")
    g.add_argument("--level", type=int, help="diamond level")
    g.add_argument("--period", type=int, help="periodic family period (2 or 4)")
    g.add_argument("--doubled", default="0", help="ladder ranks with two vertices, comma separated")


def _output_options(p):
    o = p.add_argument_group("output")
    o.add_argument("--out", default="-", help="output path, '-' for stdout")
    o.add_argument("--format", choices=("csv", "json"), default="csv")
    o.add_argument("--config", metavar="PATH", help="JSON file with option defaults")
    o.add_argument("--seed", type=int, default=0)


def _run_options(p, boundary="tension"):
    r = p.add_argument_group("integration")
    r.add_argument("--init", default="equilibrium", help="equilibrium | soliton:k=v,... | random[:amp=x] | file.json")
    r.add_argument("--potential", default="toda", choices=sorted(POTENTIALS))
    r.add_argument("--t-end", dest="t_end", type=float, default=1.0)
    r.add_argument("--step", type=float, default=1e-3)
    r.add_argument("--stride", type=int, default=1)
    r.add_argument("--boundary", choices=BOUNDARIES, default=boundary)
    r.add_argument("--bound", type=float, default=1e6, help="blow-up bound on any state component")


def build_parser():
    parser = argparse.ArgumentParser(prog=PROGRAM, description="Toda-type lattice dynamics on graded graphs")
    parser.add_argument("--version", action="version", version=f"{PROGRAM} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("validate", cmd_validate, "check the measure assumptions of a graph")
    _graph_options(p)
    _output_options(p)
    p.add_argument("--delta", type=float, default=1e-8, help="uniform mass lower bound")
    p.add_argument("--tol", type=float, default=1e-12)

    p = add("simulate", cmd_simulate, "integrate the equations of motion on a graph")
    _graph_options(p)
    _output_options(p)
    _run_options(p)
    p.add_argument("--variables", choices=("phase", "a", "b"), default="phase")

    p = add("soliton", cmd_soliton, "evaluate the N-soliton on a chain window or a graph")
    _graph_options(p)
    _output_options(p)
    p.add_argument("--N", type=int)
    p.add_argument("--kappa", default="1")
    p.add_argument("--gamma")
    p.add_argument("--sigma")
    p.add_argument("--center", help="kink positions, replaces --gamma")
    p.add_argument("--q0", type=float, default=0.0)
    p.add_argument("--t", type=float, default=0.0)

    p = add("lift-compare", cmd_lift_compare, "compare graph dynamics with the lifted chain dynamics")
    _graph_options(p)
    _output_options(p)
    _run_options(p)
    p.add_argument("--tol", type=float, default=1e-6)

    p = add("lax-check", cmd_lax_check, "radial Lax identity and Ker P spectrum along a flow")
    _graph_options(p)
    _output_options(p)
    _run_options(p, boundary="open")

    for name, func, help_ in (
        ("dump-operator", cmd_dump_operator, "write an operator in coordinate format"),
        ("spectrum", cmd_spectrum, "eigenvalues of the lifted Jacobi operator"),
    ):
        p = add(name, func, help_)
        _graph_options(p)
        _output_options(p)
        p.add_argument("--init", default=None, help="state whose Flaschka data defines the operator")
        p.add_argument("--potential", default="toda", choices=sorted(POTENTIALS))
        p.add_argument("--alpha", type=float, default=-0.5, help="constant off-diagonal")
        p.add_argument("--beta", type=float, default=0.0, help="constant diagonal")
        if name == "dump-operator":
            p.add_argument(
                "--operator", choices=("lifted", "radial-lax", "proj", "average", "coaverage"), default="lifted"
            )
        else:
            p.add_argument("--kernel", action="store_true", help="restrict to Ker P first")
    return parser, subs


_NEGATIVE = re.compile(r"^-[\d.]")


def _join_negative_values(argv):
    """Let option values start with '-' (e.g. ``--window -5:5``)."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def parse_args(argv):
    parser, subs = build_parser()
    argv = _join_negative_values(list(argv))
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        known = set(vars(args)) - {"func", "command"}
        unknown = set(cfg) - known
        if unknown:
            parser.error(f"unknown config keys {sorted(unknown)}")
        for k in ("window",):
            if isinstance(cfg.get(k), list):
                cfg[k] = f"{cfg[k][0]}:{cfg[k][1]}"
        subs[args.command].set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _setup_logging():
    level = LOG_LEVELS.get(os.environ.get("GRADED_TODA_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except BlowUp as exc:
        log.error("blow-up: %s", exc)
        emit(args, [], [], error={"type": "BlowUp", "message": str(exc), "t_last": exc.t_last})
        return 1
    except (UsageError, GraphSpecError, BadParams, argparse.ArgumentTypeError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        emit(args, [], [], error={"type": type(exc).__name__, "message": str(exc)})
        return 2
    except GradedTodaError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        emit(args, [], [], error={"type": type(exc).__name__, "message": str(exc)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
