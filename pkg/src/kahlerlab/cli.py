"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 a check failed,
3 a solver or flow error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import verify as V
from .config import Config, RunManifest, config_from_dict, config_schema, load_config
from .errors import ConfigError, KahlerLabError
from .flow import contraction_experiment, run_flow
from .geodesic import continuation_solve, distance_error_bar, measure_distance, write_path
from .grid import GridSpec, read_field, write_field
from .kahler import make_metric
from .npc import cat0_check, distance_derivative_check, jacobi_experiment, random_potential
from .report import ExperimentReport

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_SOLVER = 0, 1, 2, 3

POTENTIAL_HELP = "zero | const:C | cos:A | random:SEED[:AMPLITUDE[:K]] | file:PATH"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_potential(spec: str, cfg: Config):
    """Build a potential from a command-line spec."""
    N = cfg.grid.N
    g = GridSpec(N)
    kind, _, arg = spec.partition(":")
    try:
        if kind == "zero" and not arg:
            return g.zeros()
        if kind == "const":
            return g.zeros() + float(arg)
        if kind == "cos":
            x, _ = g.coords()
            return float(arg) * np.cos(2 * np.pi * x)
        if kind == "random":
            parts = arg.split(":")
            seed = int(parts[0])
            amp = float(parts[1]) if len(parts) > 1 else cfg.experiment.amplitudes[0]
            K = int(parts[2]) if len(parts) > 2 else cfg.experiment.max_wavenumber
            return random_potential(seed, amp, K, N)
        if kind == "file" and arg:
            f = read_field(arg)
            if f.shape != (N, N):
                raise UsageError(f"{spec}: field is {f.shape[0]}x{f.shape[1]}, grid.N is {N}")
            return f
    except (ValueError, IndexError, OSError) as exc:
        raise UsageError(f"bad potential {spec!r}: {exc}") from None
    raise UsageError(f"bad potential {spec!r}; expected {POTENTIAL_HELP}")


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.+-]+", "-", text).strip("-")


def _common_options(p, default):
    p.add_argument("--config", default=default, help="JSON config file (unknown keys rejected)")
    p.add_argument("--out", default=default, help="output directory (default: $MNPL_OUT, then io.out_dir)")
    p.add_argument("--N", type=int, default=default, help="override grid.N")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kahlerlab", description="Geodesics, Calabi flow and comparison geometry on the flat torus.")
    _common_options(p, None)
    # the same options are accepted after the subcommand; SUPPRESS keeps them
    # from overwriting values given before it
    common = _Parser(add_help=False)
    _common_options(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    for name in ("geodesic", "distance"):
        s = add(name, help=f"{name} between two potentials")
        s.add_argument("--from", dest="src", required=True, help=POTENTIAL_HELP)
        s.add_argument("--to", dest="dst", required=True, help=POTENTIAL_HELP)
        s.add_argument("--eps", type=float, help="override path.eps_target")

    s = add("flow", help="run the Calabi flow")
    s.add_argument("--init", required=True, help=POTENTIAL_HELP)
    s.add_argument("--ds", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--sample-every", type=int)

    s = add("triangle", help="CAT(0) comparison on a seeded triangle")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)

    for name, text in (("jacobi", "Jacobi-field convexity on a seeded family"),
                       ("contract", "distance contraction under the flow for a seeded pair"),
                       ("derivcheck", "first variation of distance for a seeded endpoint motion")):
        s = add(name, help=text)
        s.add_argument("--seed", type=int, required=True)

    s = add("verify", help="run a verification tier")
    tier = s.add_mutually_exclusive_group()
    tier.add_argument("--quick", dest="tier", action="store_const", const="quick")
    tier.add_argument("--full", dest="tier", action="store_const", const="full")
    tier.add_argument("--extended", dest="tier", action="store_const", const="extended")
    s.set_defaults(tier="quick")
    return p


def _resolve_config(args) -> Config:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    data = cfg.model_dump()
    if args.N is not None:
        data["grid"]["N"] = args.N
    if getattr(args, "tier", None) == "quick" and args.N is None and not args.config:
        data["grid"]["N"] = 16
    if getattr(args, "eps", None) is not None:
        data["path"]["eps_target"] = args.eps
    for key in ("ds", "steps", "sample_every"):
        if getattr(args, key, None) is not None:
            data["flow"][key] = getattr(args, key)
    if args.out:
        data["io"]["out_dir"] = args.out
    return config_from_dict(data)


def _output_dir(args, cfg: Config) -> Path:
    return Path(args.out) if args.out else cfg.output_dir()


class _Run:
    """Serialized writes into the output directory plus the manifest."""

    def __init__(self, out: Path, manifest: RunManifest, tag: str):
        self.out = out
        self.manifest = manifest
        self.tag = tag

    def write_json(self, name: str, payload: dict) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        self.manifest.add_file(path)
        return path

    def write_with(self, name: str, writer) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        writer(path)
        self.manifest.add_file(path)
        return path

    def finish(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest.write(self.out / f"manifest_{self.tag}.json")


def _emit(run: _Run, report: ExperimentReport, name: str) -> int:
    payload = report.to_dict()
    print(json.dumps(payload, indent=2, sort_keys=True))
    run.write_json(name, payload)
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_geodesic(args, cfg, run):
    a, b = parse_potential(args.src, cfg), parse_potential(args.dst, cfg)
    opts = cfg.solve_options()
    with run.manifest.stage("solve"):
        path, diag = continuation_solve(a, b, opts)
    bar = distance_error_bar(diag)
    tag = f"{_slug(args.src)}_to_{_slug(args.dst)}"
    summary = {"from": args.src, "to": args.dst, "N": cfg.grid.N, "M": path.M, "eps": path.eps,
               "length": diag.length, "error_bar": bar, "energy_spread": diag.energy_spread,
               "min_rho": diag.min_rho, "newton_iterations": diag.newton_iterations,
               "ladder": [list(x) for x in diag.ladder]}
    run.write_json(f"geodesic_{tag}.json", summary)
    run.write_with(f"geodesic_{tag}.path", lambda p: write_path(p, path))
    print(f"length {diag.length:.12g} ± {bar:.3g}  (N={cfg.grid.N}, M={path.M}, eps={path.eps:g})")
    return EXIT_OK


def cmd_distance(args, cfg, run):
    a, b = parse_potential(args.src, cfg), parse_potential(args.dst, cfg)
    with run.manifest.stage("solve"):
        res = measure_distance(a, b, cfg.solve_options())
    tag = f"{_slug(args.src)}_to_{_slug(args.dst)}"
    run.write_json(f"distance_{tag}.json", {"from": args.src, "to": args.dst, "N": cfg.grid.N,
                                            "eps": cfg.path.eps_target, "distance": res.length,
                                            "error_bar": res.error_bar})
    print(f"{res.length:.12g} ± {res.error_bar:.3g}")
    return EXIT_OK


def cmd_flow(args, cfg, run):
    phi = parse_potential(args.init, cfg)
    make_metric(phi)
    f = cfg.flow
    with run.manifest.stage("flow"):
        traj = run_flow(phi, f.ds, f.steps, f.sample_every, f.flow_mono_tol)
    tag = _slug(args.init)
    run.write_with(f"flow_{tag}.csv", traj.write_csv)
    if cfg.io.dump_fields:
        run.write_with(f"flow_{tag}_final.mnpl", lambda p: write_field(p, traj.states[-1]))
    print(f"s={traj.times[-1]:g}  calabi {traj.calabi_energy[0]:.6g} -> {traj.calabi_energy[-1]:.6g}  "
          f"k_energy {traj.k_energy[0]:.6g} -> {traj.k_energy[-1]:.6g}")
    return EXIT_OK


def _experiment_inputs(cfg, seed):
    return {"seed": seed, "N": cfg.grid.N, "M": cfg.solve_options().time_steps(cfg.grid.N), "eps": cfg.path.eps_target}


def cmd_triangle(args, cfg, run):
    e = cfg.experiment
    A, B, C = V.triangle_vertices(args.seed, e.amplitudes[0], e.max_wavenumber, cfg.grid.N)
    with run.manifest.stage("triangle"):
        r = cat0_check(A, B, C, args.lam, cfg.solve_options())
    report = r.to_report({"seed": args.seed, "amplitude": e.amplitudes[0], "max_wavenumber": e.max_wavenumber})
    code = _emit(run, report, f"triangle_seed{args.seed}_lam{args.lam:g}.json")
    if r.budget > e.cat0_tol:
        print(f"budget {r.budget:.3g} exceeds cat0_tol {e.cat0_tol:g}", file=sys.stderr)
        code = EXIT_CHECK
    return code


def cmd_jacobi(args, cfg, run):
    P, Q, step = V.jacobi_family(args.seed, cfg.grid.N)
    with run.manifest.stage("jacobi"):
        r = jacobi_experiment(P, Q, len(Q) // 2, 1, cfg.path.eps_target, cfg.solve_options(), s_step=step)
    report = r.to_report(_experiment_inputs(cfg, args.seed))
    return _emit(run, report, f"jacobi_seed{args.seed}.json")


def cmd_contract(args, cfg, run):
    N = cfg.grid.N
    a = random_potential(500 + args.seed, 1.0, 1, N)
    b = random_potential(600 + args.seed, 1.0, 1, N)
    f = cfg.flow
    with run.manifest.stage("contract"):
        r = contraction_experiment(a, b, f.ds, f.steps, f.sample_every, cfg.solve_options(),
                                   inputs={"seed": args.seed})
    return _emit(run, r, f"contract_seed{args.seed}.json")


def cmd_derivcheck(args, cfg, run):
    e = cfg.experiment
    c0, c1 = V.endpoint_motion(args.seed, e.delta_s, cfg.grid.N)
    with run.manifest.stage("derivcheck"):
        r = distance_derivative_check(c0, c1, cfg.path.eps_target, e.delta_s, cfg.solve_options(),
                                      rel_tol=e.derivcheck_rel_tol)
    r.inputs["seed"] = args.seed
    return _emit(run, r, f"derivcheck_seed{args.seed}.json")


def cmd_verify(args, cfg, run):
    checks = V.TIERS[args.tier](cfg.grid.N)
    results = []
    for check in checks:
        res = check()
        run.manifest.stages[f"{res.criterion} {res.name}"] = res.seconds
        print(res.line(), flush=True)
        results.append(res)
    passed = all(r.passed for r in results)
    run.write_json(f"verify_{args.tier}.json", {
        "tier": args.tier, "N": cfg.grid.N, "pass": passed,
        "checks": [{"criterion": r.criterion, "name": r.name, "pass": r.passed,
                    "detail": ExperimentReport("", quantities=r.detail).to_dict()["quantities"]}
                   for r in results],
    })
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if passed else EXIT_CHECK


COMMANDS = {
    "geodesic": cmd_geodesic, "distance": cmd_distance, "flow": cmd_flow, "triangle": cmd_triangle,
    "jacobi": cmd_jacobi, "contract": cmd_contract, "derivcheck": cmd_derivcheck, "verify": cmd_verify,
}


def _usage_exit(parser, message) -> int:
    print(message, file=sys.stderr)
    print(parser.format_usage(), file=sys.stderr)
    print("config schema:", file=sys.stderr)
    print(config_schema(), file=sys.stderr)
    return EXIT_USAGE


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _resolve_config(args)
        # validate potential specs before anything is written
        for key in ("src", "dst", "init"):
            if getattr(args, key, None) is not None:
                parse_potential(getattr(args, key), cfg)
        if args.command == "triangle" and not 0.0 <= args.lam <= 1.0:
            raise UsageError("--lambda must lie in [0, 1]")
    except UsageError as exc:
        return _usage_exit(parser, str(exc))
    except ConfigError as exc:
        return _usage_exit(parser, "\n".join(["configuration errors:"] + [f"  {p}" for p in exc.problems]))

    seed = getattr(args, "seed", None)
    tag = args.command if seed is None else f"{args.command}_seed{seed}"
    run = _Run(_output_dir(args, cfg), RunManifest(cfg, args.command), tag)
    try:
        code = COMMANDS[args.command](args, cfg, run)
    except UsageError as exc:
        return _usage_exit(parser, str(exc))
    except KahlerLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    run.finish()
    return code


def main(argv=None) -> None:
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
