"""Command-line entry point: ``entangle <command> ...``.

Every command prints a JSON report (or writes it with ``--out``) that embeds
a run manifest. Exit codes: 0 success, 1 error, 2 activation not found.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .activation import (
    ActivationBudget,
    activation_condition,
    run_activation_experiment,
    witness_from_rho,
)
from .activation.core import as_rho, rho_dims
from .activation.families import certify_decomposition, certify_separable_floor
from .activation.probes import threshold_suite
from .filters import SeesawConfig, e_d_seesaw, f_d_from_e
from .states import StateSpec
from .teleport_sim import TeleportConfig, average_fidelity_mc, standard_fidelity_closed_form
from .tensor_core import load_density, matrix_to_dict, save_matrix

EXIT_OK, EXIT_ERROR, EXIT_NOT_FOUND = 0, 1, 2


def default_seed() -> int:
    return int(os.environ.get("ENTANGLE_SEED", 0))


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _spec_files(*specs) -> list[str]:
    out = []
    for s in specs:
        if isinstance(s, StateSpec) and s.kind == "file":
            out.append(s.params["path"])
        elif isinstance(s, str):
            out.append(s)
    return out


def manifest(args: argparse.Namespace, files: list[str], wall: float) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func",)}
    config = {k: (str(v) if isinstance(v, (StateSpec, Path)) else v) for k, v in config.items()}
    return {
        "command": args.command,
        "config": config,
        "seed": args.seed,
        "toolkit_version": __version__,
        "wall_clock_s": wall,
        "input_digests": {f: _digest(f) for f in files},
    }


def _flatten(obj, prefix="") -> dict:
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}{k}."))
    elif isinstance(obj, list):
        out[prefix[:-1]] = json.dumps(obj)
    else:
        out[prefix[:-1]] = obj
    return out


def _emit(report: dict, args: argparse.Namespace) -> None:
    text = json.dumps(report, indent=2, default=_json_default)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.csv:
        flat = _flatten(json.loads(text))
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(flat))
            w.writeheader()
            w.writerow(flat)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _seesaw_cfg(args) -> SeesawConfig:
    return SeesawConfig(restarts=args.restarts, max_iterations=args.max_iterations,
                        tolerance=args.tolerance, seed=args.seed, threads=args.threads)


# -- commands ---------------------------------------------------------------------

def cmd_edist(args) -> tuple[int, dict, list[str]]:
    rho = args.state.build()
    res = e_d_seesaw(rho, args.d, _seesaw_cfg(args))
    e = min(max(res.e_lower, 1 / args.d), 1.0)
    report = {"state": str(args.state), "d": args.d, "F_d": f_d_from_e(e, args.d),
              "distillable_hint": bool(res.e_lower > 1 / args.d + 1e-6), **res.to_dict()}
    return EXIT_OK, report, _spec_files(args.state)


def cmd_activate(args) -> tuple[int, dict, list[str]]:
    sigma = args.sigma.build()
    budget = ActivationBudget(restarts=args.restarts, max_iterations=args.max_iterations, seed=args.seed,
                              threads=args.threads, max_dim=args.max_dim, design=args.design,
                              witness_samples=args.witness_samples, noise=args.noise)
    out = run_activation_experiment(sigma, args.lam, args.d, args.family, budget)
    report = {"sigma": str(args.sigma), **out.to_dict(), "budget": budget.to_dict()}
    if out.found and args.write_rho:
        save_matrix(args.write_rho, out.rho)
        report["rho_path"] = args.write_rho
    return (EXIT_OK if out.found else EXIT_NOT_FOUND), report, _spec_files(args.sigma)


def _load_rho(text: str, d: int):
    path = Path(text)
    if path.exists():
        return as_rho(load_density(path), d), [text]
    spec = StateSpec.parse(text)
    return as_rho(spec.build(), d), _spec_files(spec)


def cmd_witness(args) -> tuple[int, dict, list[str]]:
    rho, files = _load_rho(args.rho, args.d)
    sigma_spec = StateSpec.parse(args.sigma) if "=" in args.sigma else StateSpec("file", {"path": args.sigma})
    sigma = sigma_spec.build()
    cert = certify_separable_floor(rho, args.lam, args.d)
    if not cert.valid and rho_dims(rho, args.d) == (3, 3) and args.d == 2:
        cert = certify_decomposition(rho, args.lam, args.d)
    wit = witness_from_rho(rho, args.lam, args.d, cert)
    value = wit.value(sigma.matrix)
    report = {
        "lambda": args.lam, "d": args.d, "certificate": cert.to_dict(),
        "witness_value": value, "detected": bool(value < 0),
        "activation_condition": activation_condition(rho, sigma, args.lam, args.d),
        "min_over_products": wit.min_over_products(args.samples, args.seed),
        "witness": matrix_to_dict(wit.w),
    }
    return EXIT_OK, report, files + _spec_files(sigma_spec)


def cmd_teleport_sim(args) -> tuple[int, dict, list[str]]:
    rho = args.resource.build()
    d = int(round(np.sqrt(rho.dim)))
    report = {"resource": str(args.resource), "mode": args.mode, "d": d}
    if args.mode == "conclusive":
        res = e_d_seesaw(rho, d, _seesaw_cfg(args))
        cfg = TeleportConfig(d=d, n_samples=args.samples, seed=args.seed, mode="conclusive", filter=res.best_filter)
        report["e_lower"] = res.e_lower
    else:
        cfg = TeleportConfig(d=d, n_samples=args.samples, seed=args.seed)
        report["predicted"] = standard_fidelity_closed_form(rho.normalize(), d)
    out = average_fidelity_mc(rho.normalize() if args.mode == "standard" else rho, cfg)
    report.update(out.to_dict())
    return EXIT_OK, report, _spec_files(args.resource)


def cmd_lemma_check(args) -> tuple[int, dict, list[str]]:
    summary = threshold_suite(args.lam, args.d, args.trials, args.seed)
    report = {"d": args.d, "lambda": args.lam, **summary.to_dict()}
    return (EXIT_OK if summary.counterexamples == 0 else EXIT_ERROR), report, []


def cmd_export_state(args) -> tuple[int, dict, list[str]]:
    rho = args.state.build()
    save_matrix(args.path, rho)
    return EXIT_OK, {"state": str(args.state), "path": args.path, "dim": rho.dim}, _spec_files(args.state)


# -- parser -----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Argument errors exit with 1 so that 2 stays reserved for "not found"."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _state(text: str) -> StateSpec:
    try:
        return StateSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=default_seed(), help="RNG seed (default: env ENTANGLE_SEED or 0)")
    p.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", help="also write a flat one-row CSV projection")


def _add_seesaw(p: argparse.ArgumentParser, restarts: int = 64) -> None:
    p.add_argument("--restarts", type=int, default=restarts)
    p.add_argument("--max-iterations", type=int, default=500)
    p.add_argument("--tolerance", type=float, default=1e-9)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="entangle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("edist", help="seesaw lower bound on E_d and the conclusive fidelity F_d")
    p.add_argument("--state", type=_state, required=True, help="kind=K,key=val,...")
    p.add_argument("--d", type=int, default=2)
    _add_seesaw(p)
    _add_common(p)
    p.set_defaults(func=cmd_edist)

    p = sub.add_parser("activate", help="search for rho with E_d(rho) <= lambda < E_d(rho (x) sigma)")
    p.add_argument("--sigma", type=_state, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--family", default="auto", choices=["auto", "separable-floor", "choi-flagged"])
    p.add_argument("--design", action="store_true", help="also propose family weights by semidefinite programming")
    p.add_argument("--noise", type=float, default=0.02, help="white-noise weight mixed into the family")
    p.add_argument("--max-dim", type=int, default=1024, help="dimension cap for the joint state")
    p.add_argument("--witness-samples", type=int, default=10_000)
    p.add_argument("--write-rho", help="save the certified rho in matrix JSON format")
    _add_seesaw(p, restarts=16)
    _add_common(p)
    p.set_defaults(func=cmd_activate)

    p = sub.add_parser("witness", help="witness built from a certified rho, evaluated on sigma")
    p.add_argument("--rho", required=True, help="matrix JSON path or state spec")
    p.add_argument("--sigma", required=True, help="matrix JSON path or state spec")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--samples", type=int, default=10_000)
    _add_common(p)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("teleport-sim", help="Monte Carlo teleportation fidelity over a resource")
    p.add_argument("--resource", type=_state, required=True)
    p.add_argument("--samples", type=int, default=20_000)
    p.add_argument("--mode", choices=["standard", "conclusive"], default="standard")
    _add_seesaw(p)
    _add_common(p)
    p.set_defaults(func=cmd_teleport_sim)

    p = sub.add_parser("lemma-check", help="random probe of the threshold-operator lemma")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    _add_common(p)
    p.set_defaults(func=cmd_lemma_check)

    p = sub.add_parser("export-state", help="write a state spec to a matrix JSON file")
    p.add_argument("--state", type=_state, required=True)
    p.add_argument("--path", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_export_state)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        code, report, files = args.func(args)
    except Exception as exc:  # report every failure as exit 1 without a partial report
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report["manifest"] = manifest(args, files, time.perf_counter() - t0)
    _emit(report, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
