"""Command line interface.

Exit codes: 0 on success, 1 on invalid input, 2 on numerical failure.
"""

import argparse
import csv
import io
import logging
import sys

import numpy as np

from . import asymptotics
from .exceptions import MCARMAError, ValidationError
from .objectives import ParamSpace
from .study import StudyConfig, estimate_once, read_config, run_study, simulate_from_config
from .zoo import FAMILIES, default_driver, get_family

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _floats(s):
    return [float(x) for x in s.replace("[", "").replace("]", "").replace(",", " ").split()]


def _ints(s):
    return [int(x) for x in _floats(s)]


def build_parser():
    p = _Parser(prog="mcarma-whittle", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate one sample path to CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)

    e = sub.add_parser("estimate", help="estimate parameters from a CSV path")
    e.add_argument("--data", required=True)
    e.add_argument("--family", required=True, choices=sorted(FAMILIES))
    e.add_argument("--estimator", default="whittle", choices=["whittle", "adjusted", "qmle"])
    e.add_argument("--delta", type=float, default=1.0)
    e.add_argument("--start", type=_floats, nargs="+")
    e.add_argument("--level", type=float, default=0.95)
    e.add_argument("--no-intervals", action="store_true")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")

    st = sub.add_parser("study", help="Monte-Carlo study with a CSV report")
    st.add_argument("--config", required=True)
    st.add_argument("--out")
    st.add_argument("--seed", type=int)
    st.add_argument("--threads", type=int)
    st.add_argument("--replicates", type=int)
    st.add_argument("--sizes", type=_ints)

    a = sub.add_parser("asymptotics", help="analytic limit covariances as CSV")
    a.add_argument("--family", required=True, choices=sorted(FAMILIES))
    a.add_argument("--theta0", type=_floats, nargs="+",
                   help="values separated by spaces, or --theta0=a,b,c")
    a.add_argument("--driver", default="brownian", choices=["brownian", "nig"])
    a.add_argument("--delta", type=float, default=1.0)
    a.add_argument("--estimator", default="whittle", choices=["whittle", "adjusted"])
    a.add_argument("--mc-samples", type=int, default=10**6)
    a.add_argument("--nodes", type=int, default=asymptotics.DEFAULT_NODES)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out")
    return p


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_simulate(args):
    path = simulate_from_config(read_config(args.config), seed=args.seed)
    path.to_csv(args.out)


def _cmd_estimate(args):
    start = None if args.start is None else np.concatenate(args.start)
    outcome = estimate_once(args.data, args.family, args.estimator, start=start,
                            delta=args.delta, level=args.level, seed=args.seed,
                            intervals=not args.no_intervals)
    _emit(outcome.to_csv(), args.out)


def _cmd_study(args):
    cfg = StudyConfig.from_mapping(read_config(args.config), seed=args.seed,
                                   threads=args.threads, replicates=args.replicates,
                                   sample_sizes=args.sizes, output=args.out)
    report = run_study(cfg)
    if not cfg.output_path:
        sys.stdout.write(report.to_csv())


def _matrix_rows(name, M):
    return [[name, i + 1, j + 1, format(float(M[i, j]), ".10g")]
            for i in range(M.shape[0]) for j in range(M.shape[1])]


def _cmd_asymptotics(args):
    fam = get_family(args.family)
    theta0 = fam.default_theta0 if args.theta0 is None else np.concatenate(args.theta0)
    space = ParamSpace.from_family(fam, args.delta)
    sm = space.sampled(theta0, innovations=True)
    driver = default_driver(fam, args.driver, sm.model.sigma_L)
    method = asymptotics.GAUSSIAN_ANALYTIC if driver.is_gaussian else asymptotics.MONTE_CARLO
    fm = asymptotics.fourth_moment(sm, driver, method, mc_samples=args.mc_samples, seed=args.seed)
    rows = []
    if args.estimator == "adjusted":
        H, S, _, _ = asymptotics.adjusted_parts(space, theta0, fm, args.nodes)
        Hi = np.linalg.inv(H)
        rows += _matrix_rows("sigma_hessian_adjusted", H)
        rows += _matrix_rows("sigma_score_adjusted", S)
        rows += _matrix_rows("sigma_W_adjusted", Hi @ S @ Hi)
    else:
        cov = asymptotics.sigma_W(space, theta0, fm, args.nodes)
        rows += _matrix_rows("sigma_hessian", cov.sigma_hessian)
        rows += _matrix_rows("sigma_score", cov.sigma_score)
        rows += _matrix_rows("sigma_W", cov.sigma_W)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["matrix", "row", "col", "value"])
    w.writerows(rows)
    _emit(buf.getvalue(), args.out)


COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "study": _cmd_study,
    "asymptotics": _cmd_asymptotics,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except MCARMAError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
