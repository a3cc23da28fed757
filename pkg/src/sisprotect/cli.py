"""Command line interface.

Subcommands: ``gen`` writes an instance file, ``simulate`` runs one
closed-loop trajectory, ``sweep`` runs a mu ensemble and writes the raw
and stats CSVs, ``verify`` runs the randomized self-checks.

Exit codes: 0 success, 1 verification failure, 2 bad usage or
parameters, 3 I/O problems.  Output paths are probed before any
simulation starts so long runs cannot die on an unwritable target.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .controller import ControllerConfig, run_closed_loop
from .errors import ParameterError, ParseError, SolverError
from .experiments import (
    DEFAULT_MU_GRID,
    SweepSpec,
    format_raw_csv,
    run_sweep,
    write_sweep_csvs,
)
from .instance import InstanceSpec, build_instance, read_instance, write_instance
from .verify import run_verify

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _spec_from_args(args) -> InstanceSpec:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON in {args.config}: {e.msg}", offset=e.pos) from None
        try:
            return InstanceSpec(
                n=int(doc["n"]),
                edge_prob=float(doc["edge_prob"]),
                cost_support=tuple(float(c) for c in doc["cost_support"]),
                recovery_pmf=tuple(float(m) for m in doc["recovery_pmf"]),
                init_infected_frac=float(doc["init_infected_frac"]),
                seed=int(doc["seed"]),
            )
        except KeyError as e:
            raise ParameterError(f"config missing field {e.args[0]!r}") from None
    required = ("n", "edge_prob", "cost_support", "recovery_pmf")
    for name in required:
        if getattr(args, name.replace("-", "_")) is None:
            raise ParameterError(f"--{name.replace('_', '-')} is required without --config")
    return InstanceSpec(
        n=args.n,
        edge_prob=args.edge_prob,
        cost_support=args.cost_support,
        recovery_pmf=args.recovery_pmf,
        init_infected_frac=args.init_infected_frac,
        seed=args.seed,
    )


def _check_writable(path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    if not os.path.isdir(directory):
        raise OSError(f"output directory does not exist: {directory}")
    if os.path.exists(path):
        if not os.access(path, os.W_OK):
            raise OSError(f"output path not writable: {path}")
    elif not os.access(directory, os.W_OK):
        raise OSError(f"output directory not writable: {directory}")


def _cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    _check_writable(args.out)
    instance = build_instance(spec)
    write_instance(instance, args.out)
    print(f"wrote instance: n={instance.n} edges={instance.graph.m} -> {args.out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    instance = read_instance(args.instance)
    _check_writable(args.out)
    config = ControllerConfig(
        mu=args.mu,
        solver_tol=args.solver_tol,
        tail_tol=args.tail_tol,
        max_steps=args.max_steps,
    )
    record = run_closed_loop(instance, config, args.seed)
    rows = [
        (args.mu, 0, s.t, s.infected, s.protected, s.stage_cost, s.protect_all_cost, s.objective)
        for s in record.steps
    ]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_raw_csv(rows))
    print(f"run finished: terminal={record.terminal} steps={len(record.steps)} -> {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    instance = None
    inst_spec = None
    if args.instance:
        instance = read_instance(args.instance)
    else:
        inst_spec = _spec_from_args(args)
    spec = SweepSpec(
        instance=inst_spec,
        mu_values=args.mu_values,
        runs_per_mu=args.runs_per_mu,
        master_seed=args.master_seed,
        solver_tol=args.solver_tol,
        tail_tol=args.tail_tol,
        max_steps=args.max_steps,
    )
    raw_path = args.out_prefix + "_raw.csv"
    stats_path = args.out_prefix + "_stats.csv"
    _check_writable(raw_path)
    _check_writable(stats_path)
    result = run_sweep(spec, jobs=args.jobs, instance=instance)
    write_sweep_csvs(result, raw_path, stats_path)
    extinct = sum(1 for t in result.terminals.values() if t == "extinct")
    print(
        f"sweep finished: {len(spec.mu_values)} mu values x {spec.runs_per_mu} runs, "
        f"{extinct}/{len(result.terminals)} extinct -> {raw_path}, {stats_path}"
    )
    return EXIT_OK


def _cmd_verify(args) -> int:
    report = run_verify(level=args.level, seed=args.seed)
    for s in report.suites:
        status = "ok" if s.ok else "FAILED"
        extra = f" ({s.detail})" if s.detail else ""
        print(f"{s.name}: {status}, checked={s.checked}, failures={s.failures}, worst_slack={s.worst_slack:.3e}{extra}")
    if not report.ok:
        print("verification FAILED", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    print("verification passed")
    return EXIT_OK


def _add_instance_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with the instance spec fields")
    p.add_argument("--n", type=int, help="number of nodes")
    p.add_argument("--edge-prob", type=float, dest="edge_prob", help="edge probability")
    p.add_argument("--cost-support", type=_floats, dest="cost_support", help="comma-separated cost values")
    p.add_argument("--recovery-pmf", type=_floats, dest="recovery_pmf", help="comma-separated recovery pmf")
    p.add_argument(
        "--init-infected-frac", type=float, dest="init_infected_frac", default=0.1,
        help="fraction of nodes initially infected (default 0.1)",
    )
    p.add_argument("--seed", type=int, default=0, help="instance generation seed (default 0)")


def _add_controller_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver-tol", type=float, default=1e-9, dest="solver_tol")
    p.add_argument("--tail-tol", type=float, default=1e-12, dest="tail_tol")
    p.add_argument("--max-steps", type=int, default=200, dest="max_steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sisprotect",
        description="Closed-loop epidemic protection via exact submodular minimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate an instance file")
    _add_instance_spec_args(p_gen)
    p_gen.add_argument("--out", required=True, help="output instance path")
    p_gen.set_defaults(func=_cmd_gen)

    p_sim = sub.add_parser("simulate", help="run one closed-loop trajectory")
    p_sim.add_argument("--instance", required=True, help="instance file from gen")
    p_sim.add_argument("--mu", type=float, required=True)
    p_sim.add_argument("--seed", type=int, default=0, help="dynamics seed (default 0)")
    _add_controller_args(p_sim)
    p_sim.add_argument("--out", required=True, help="output raw CSV path")
    p_sim.set_defaults(func=_cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run a mu ensemble")
    p_sweep.add_argument("--instance", help="instance file (otherwise spec flags are used)")
    _add_instance_spec_args(p_sweep)
    p_sweep.add_argument(
        "--mu-values", type=_floats, dest="mu_values", default=DEFAULT_MU_GRID,
        help="comma-separated mu grid (default %s)" % ",".join(str(m) for m in DEFAULT_MU_GRID),
    )
    p_sweep.add_argument("--runs-per-mu", type=int, default=100, dest="runs_per_mu")
    p_sweep.add_argument("--master-seed", type=int, default=0, dest="master_seed")
    p_sweep.add_argument("--jobs", type=int, default=1)
    _add_controller_args(p_sweep)
    p_sweep.add_argument("--out-prefix", required=True, dest="out_prefix")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_ver = sub.add_parser("verify", help="run randomized self-checks")
    p_ver.add_argument("--level", choices=("quick", "full"), default="quick")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ParameterError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
