"""Command line driver: convergence studies and the selftest battery.

    dirichlet-control study --omega-num 3 --omega-den 4 --levels 4 --out run.csv
    dirichlet-control selftest

The study subcommand writes the CSV (re-flushed per level), prints it to
stdout, renders a log-log figure next to the CSV unless --no-plot is given,
and optionally exports per-level VTK files.  Exit code 0 on success, 1 on
any error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .selftest import run_selftest
from .study import StudyConfig, render_figure, run_study


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dirichlet-control",
        description="Dirichlet boundary control of the Poisson equation on "
                    "prism domains: convergence studies against the exact "
                    "benchmark solution.")
    sub = parser.add_subparsers(dest="command", required=True)

    st = sub.add_parser("study", help="run a mesh-refinement convergence study")
    st.add_argument("--omega-num", type=int, default=3,
                    help="numerator of omega as a multiple of pi (default 3)")
    st.add_argument("--omega-den", type=int, default=4,
                    help="denominator of omega as a multiple of pi (default 4)")
    st.add_argument("--levels", type=int, default=4,
                    help="number of refinement levels, >= 2 (default 4)")
    st.add_argument("--base-level", type=int, default=1,
                    help="coarsest mesh level of the sequence (default 1)")
    st.add_argument("--concept", choices=("p1", "variational"), default="p1",
                    help="control discretization concept (default p1)")
    st.add_argument("--alpha", type=float, default=1.0,
                    help="control cost weight (default 1.0; the exact "
                         "benchmark solution corresponds to alpha = 1)")
    st.add_argument("--qa", type=float, default=-math.inf,
                    help="lower control bound (default -inf)")
    st.add_argument("--qb", type=float, default=math.inf,
                    help="upper control bound (default +inf)")
    st.add_argument("--perturb", type=float, default=0.0,
                    help="interior vertex perturbation sigma in [0, 0.3]")
    st.add_argument("--seed", type=int, default=0,
                    help="seed for mesh perturbation (default 0)")
    st.add_argument("--kappa", type=float, default=1.0,
                    help="weight parameter for diagnostics (default 1.0)")
    st.add_argument("--out", type=Path, default=Path("study.csv"),
                    help="CSV output path (default study.csv)")
    st.add_argument("--vtk-dir", type=Path, default=None,
                    help="directory for per-level VTK exports (optional)")
    st.add_argument("--no-plot", action="store_true",
                    help="skip rendering the log-log error figure")

    sub.add_parser("selftest", help="run the fast invariant check battery")
    return parser


def _run_study_command(args) -> int:
    config = StudyConfig(
        omega_num=args.omega_num, omega_den=args.omega_den, levels=args.levels,
        concept=args.concept, alpha=args.alpha, q_a=args.qa, q_b=args.qb,
        perturb_sigma=args.perturb, seed=args.seed, kappa=args.kappa,
        out=args.out, vtk_dir=args.vtk_dir, plot=not args.no_plot,
        base_level=args.base_level)
    records = run_study(config)
    sys.stdout.write(Path(config.out).read_text())
    if config.plot:
        figure = render_figure(records, config)
        print(f"figure written to {figure}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "selftest":
        return 1 if run_selftest() else 0
    try:
        return _run_study_command(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
