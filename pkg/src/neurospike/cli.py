"""Simulate, design and certify spiking (LIF) controllers for linear plants.

Exit codes: 0 success, 2 invalid input, 3 numerical failure or jump limit,
4 infeasible design, 5 certification failed, 6 I/O failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _backend, analysis, lif, plotting, traceio
from .errors import ConfigurationError, ContractError, DesignError, NumericalFailure, PreconditionError

log = logging.getLogger("neurospike")

EXIT_OK, EXIT_CONFIG, EXIT_SIM, EXIT_DESIGN, EXIT_CERT, EXIT_IO = 0, 2, 3, 4, 5, 6

REFERENCE_FIG3 = {"ultimate_bound": 0.375, "min_interspike_all": 0.005, "min_interspike_steady": 0.341}
FIG3_TOL = {"ultimate_bound": 0.02, "min_interspike_all": 5e-4, "min_interspike_steady": 0.02}


class CLIError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(analysis._dumps(obj) + "\n")
    return path


def _versions() -> dict:
    return {"neurospike": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "backend": _backend.DEFAULT_BACKEND}


def _load_scenario(arg: str, args) -> tuple:
    if arg in lif.BUILTIN_SCENARIOS:
        sc = lif.builtin_scenario(arg)
        source = {"name": arg, "path": None}
    else:
        path = Path(arg)
        if not path.exists():
            raise ConfigurationError(f"{arg}: no such scenario file or built-in scenario")
        sc = lif.load_scenario(path)
        source = {"name": sc.name or path.stem, "path": str(path), "file_sha256": _file_digest(path)}
    sc = _apply_overrides(sc, args)
    source["hash"] = sc.digest()
    return sc, source


def _apply_overrides(sc, args):
    sc = sc.with_solver(h=getattr(args, "h", None), t_end=getattr(args, "t_end", None),
                        j_max=getattr(args, "jmax", None))
    if getattr(args, "seed", None) is not None:
        sc = sc.with_seed(args.seed)
    return sc


def _stats(trace, t_cut) -> dict:
    try:
        ub = analysis.ultimate_bound_estimate(trace, t_cut)
    except ContractError:
        ub = None
    return {
        "jump_count": len(trace.jumps),
        "t_cut": t_cut,
        "ultimate_bound": ub,
        "min_interspike_all": analysis.min_interspike(trace, 0.0),
        "min_interspike_steady": analysis.min_interspike(trace, t_cut),
        "termination": trace.termination,
        "t_final": float(trace.t[-1]),
    }


def _run(sc, backend=None):
    try:
        return lif.simulate_scenario(sc, backend), None
    except NumericalFailure as exc:
        return exc.trace, exc


def _export(trace, out: Path, stem: str = "") -> dict:
    out.mkdir(parents=True, exist_ok=True)
    p = stem + "_" if stem else ""
    return {
        "trace_csv": str(traceio.write_trace_csv(trace, out / f"{p}trace.csv")),
        "events_csv": str(traceio.write_events_csv(trace, out / f"{p}events.csv")),
    }


def cmd_simulate(args) -> int:
    t_start = time.perf_counter()
    sc, source = _load_scenario(args.scenario, args)
    trace, failure = _run(sc, args.backend)
    out = Path(args.out)
    outputs = _export(trace, out)
    if args.svg:
        outputs["state_svg"] = str(plotting.state_plot(out / "state.svg", [(sc.name, trace, "#1f4e9c")],
                                                       title=f"State x ({sc.name})"))
        outputs["input_svg"] = str(plotting.input_plot(out / "input.svg", [(sc.name, trace, sc.neurons, "#1f4e9c")],
                                                       title=f"Spiking input u ({sc.name})"))
    t_cut = args.t_cut if args.t_cut is not None else sc.solver.t_end / 2
    summary = _stats(trace, t_cut)
    verdict = None
    if args.certify:
        cert = _read_certificate(args.certify)
        report = analysis.certify_trace(trace, cert, event_tol_state=sc.solver.event_tol_state,
                                        event_tol_time=sc.solver.event_tol_time)
        outputs["report_json"] = str(_write_json(out / "report.json", report.to_dict()))
        verdict = report.ok
    summary["certified"] = verdict
    manifest = {
        "command": "simulate",
        "scenario": source,
        "solver": sc.solver.to_dict(),
        "outputs": outputs,
        "versions": _versions(),
        "runtime_s": time.perf_counter() - t_start,
        "summary": summary,
    }
    outputs["manifest_json"] = str(out / "manifest.json")
    _write_json(out / "manifest.json", manifest)
    ub = summary["ultimate_bound"]
    mi = summary["min_interspike_all"]
    print(f"{sc.name}: {summary['jump_count']} jumps, ultimate bound "
          f"{'n/a' if ub is None else format(ub, '.6g')} (t >= {t_cut:g}), min inter-spike "
          f"{'n/a' if mi is None else format(mi, '.6g')}, termination {trace.termination}")
    if failure is not None:
        raise CLIError(EXIT_SIM, f"numerical failure: {failure}; termination {trace.termination}")
    if trace.termination != "time_horizon":
        raise CLIError(EXIT_SIM, f"simulation stopped early: termination {trace.termination}")
    return EXIT_OK


def _read_certificate(path) -> analysis.StabilityCertificate:
    try:
        return analysis.StabilityCertificate.from_dict(json.loads(Path(path).read_text()))
    except (json.JSONDecodeError, TypeError, ValueError, ContractError) as exc:
        raise ConfigurationError(f"{path}: invalid certificate ({exc})") from exc


def cmd_design(args) -> int:
    if (args.psi is None) == (args.rho is None):
        raise ConfigurationError("give exactly one of --psi or --rho")
    if args.alpha is None:
        raise ConfigurationError("--alpha is required")
    rho = args.rho
    if args.psi is not None:
        try:
            rho = analysis.solve_rho_for_roa(args.b * args.c * args.alpha, args.psi * args.c)
        except PreconditionError as exc:
            raise ConfigurationError(str(exc)) from exc
    if args.a is None or args.mu is None:
        raise ConfigurationError("--a and --mu are required to complete the design")
    if not 0 < rho < 1:
        raise DesignError(f"infeasible design: rho={rho} outside (0, 1)", "0 < rho < 1")
    s_min = analysis.sigma_lower_bound(rho)
    sigma = args.sigma if args.sigma is not None else 0.5 * (s_min + 1.0)
    print(f"admissible sigma interval: [{s_min:.17g}, 1)", file=sys.stderr)
    cert = analysis.design_certificate(args.a, args.alpha, args.mu, rho, sigma, args.delta, b=args.b, c=args.c)
    text = cert.to_json()
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "certificate.json").write_text(text + "\n")
    return EXIT_OK


def cmd_certify(args) -> int:
    trace = traceio.read_trace_csv(args.trace)
    cert = _read_certificate(args.cert)
    if trace.n_x != 1:
        raise ConfigurationError("certification needs a scalar trace")
    report = analysis.certify_trace(trace, cert, args.x0, event_tol_state=args.tol_state,
                                    event_tol_time=args.tol_time)
    text = report.to_json()
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text + "\n")
    if not report.ok:
        v = report.violations[0]
        raise CLIError(EXIT_CERT, f"certification failed: {v.quantity} at t={v.t:.6g}, j={v.j}: "
                                  f"observed {v.observed:.6g}, allowed {v.allowed:.6g}")
    return EXIT_OK


def cmd_reproduce_fig3(args) -> int:
    t_start = time.perf_counter()
    out = Path(args.out)
    kw = {}
    if args.h is not None:
        kw["h"] = args.h
    if args.t_end is not None:
        kw["t_end"] = args.t_end
    if args.jmax is not None:
        kw["j_max"] = args.jmax
    nominal = lif.fig3_nominal(**kw)
    noisy = lif.fig3_noisy_asym(seed=args.seed if args.seed is not None else 1, **kw)
    results = {}
    outputs = {}
    for key, sc in (("nominal", nominal), ("noisy", noisy)):
        trace, failure = _run(sc, args.backend)
        if failure is not None:
            raise CLIError(EXIT_SIM, f"{sc.name}: numerical failure: {failure}")
        results[key] = (sc, trace)
        for k, v in _export(trace, out / key).items():
            outputs[f"{key}_{k}"] = v
    colors = {"nominal": "#1f4e9c", "noisy": "#c0392b"}
    outputs["state_svg"] = str(plotting.state_plot(
        out / "fig3_state.svg", [(sc.name, tr, colors[k]) for k, (sc, tr) in results.items()], title="State x"))
    outputs["input_svg"] = str(plotting.input_plot(
        out / "fig3_input.svg", [(sc.name, tr, sc.neurons, colors[k]) for k, (sc, tr) in results.items()],
        title="Spiking input u"))
    t_cut = nominal.solver.t_end / 2
    stats = {k: _stats(tr, t_cut) for k, (sc, tr) in results.items()}
    summary = {key: stats["nominal"][key] for key in REFERENCE_FIG3}
    summary.update({"t_cut": t_cut, "nominal": stats["nominal"], "noisy": stats["noisy"],
                    "seed": noisy.disturbance.seed})
    outputs["summary_json"] = str(_write_json(out / "summary.json", summary))
    rows = ["statistic,reference,simulated,tolerance,within_tolerance"]
    for key, ref in REFERENCE_FIG3.items():
        sim = summary[key]
        ok = sim is not None and abs(sim - ref) <= FIG3_TOL[key]
        rows.append(f"{key},{ref!r},{traceio.fmt(sim) if sim is not None else ''},{FIG3_TOL[key]!r},{ok}")
    (out / "comparison.csv").write_text("\n".join(rows) + "\n")
    outputs["comparison_csv"] = str(out / "comparison.csv")
    outputs["manifest_json"] = str(out / "manifest.json")
    manifest = {
        "command": "reproduce-fig3",
        "scenario": {k: {"name": sc.name, "hash": sc.digest()} for k, (sc, _) in results.items()},
        "solver": nominal.solver.to_dict(),
        "outputs": outputs,
        "versions": _versions(),
        "runtime_s": time.perf_counter() - t_start,
        "summary": summary,
    }
    _write_json(out / "manifest.json", manifest)
    print("\n".join(rows))
    return EXIT_OK


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--h", type=float, default=None, help="integration step [s]")
    p.add_argument("--t-end", type=float, default=None, help="simulation horizon [s]")
    p.add_argument("--jmax", type=int, default=None, help="jump limit")
    p.add_argument("--seed", type=int, default=None, help="seed for disturbance/noise signals")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neurospike", description=__doc__.splitlines()[0],
                                     epilog="\n".join(__doc__.splitlines()[2:4]))
    parser.add_argument("--version", action="version", version=f"neurospike {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[_global_flags()], help="run a scenario and export CSV/JSON/SVG")
    s.add_argument("scenario", help=f"scenario JSON path or built-in name ({', '.join(lif.BUILTIN_SCENARIOS)})")
    s.add_argument("--svg", action="store_true", help="also write state and input plots")
    s.add_argument("--certify", metavar="CERT_JSON", help="certify the trace against a certificate")
    s.add_argument("--t-cut", type=float, default=None, help="steady-state window start (default t_end/2)")
    s.add_argument("--backend", choices=("compiled", "python"), default=None)
    s.set_defaults(func=cmd_simulate, out="neurospike-out")

    d = sub.add_parser("design", parents=[_global_flags()], help="design a certificate from the stability conditions")
    d.add_argument("--a", type=float, default=None, help="plant pole (> 0)")
    d.add_argument("--alpha", type=float, default=None, help="spike amplitude")
    d.add_argument("--mu", type=float, default=None, help="leak rate")
    d.add_argument("--psi", type=float, default=None, help="desired certified radius")
    d.add_argument("--rho", type=float, default=None, help="design parameter in (0, 1)")
    d.add_argument("--sigma", type=float, default=None, help="initial-condition fraction")
    d.add_argument("--delta", type=float, default=None, help="threshold (default: largest admissible)")
    d.add_argument("--b", type=float, default=1.0, help="plant input gain")
    d.add_argument("--c", type=float, default=1.0, help="plant output gain")
    d.set_defaults(func=cmd_design)

    c = sub.add_parser("certify", parents=[_global_flags()], help="check a trace CSV against a certificate")
    c.add_argument("--trace", required=True, help="trace CSV written by simulate")
    c.add_argument("--cert", required=True, help="certificate JSON written by design")
    c.add_argument("--x0", type=float, default=None, help="initial state (default: first sample)")
    c.add_argument("--tol-state", type=float, default=1e-9)
    c.add_argument("--tol-time", type=float, default=1e-12)
    c.set_defaults(func=cmd_certify)

    r = sub.add_parser("reproduce-fig3", parents=[_global_flags()], help="run both reference scenarios and plot them")
    r.add_argument("--backend", choices=("compiled", "python"), default=None)
    r.set_defaults(func=cmd_reproduce_fig3, out="fig3")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DESIGN
    except (ConfigurationError, ContractError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIM
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
