"""Command-line entry point.

    penaltydd solve CONFIG [--out DIR] [--seed N] [--max-iter N]
    penaltydd sweep-gamma CONFIG ...
    penaltydd sweep-penalty CONFIG ...
    penaltydd compare-schemes CONFIG ...
    penaltydd oracle CONFIG ...

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import experiments as ex
from .config import load_config
from .ddm import DivergenceError, SchemeConfig, run_scheme
from .fem import ConfigError, SolverError
from .material import MaterialError
from .mesh import MeshError

log = logging.getLogger("penaltydd")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_SOLVER = 0, 2, 3, 4

PROFILE_FIELDS = ["s", "x1", "gap", "un_lower", "un_upper", "sigma", "sigma_norm"]


def _solve(run, out, seed):
    spec = run.spec
    setup = ex.prepare(spec)
    if run.inject > 0:
        cfg = SchemeConfig(theta=setup.theta, gamma=run.gamma, policy=run.policy, eps_u=spec.eps_u,
                           max_iter=spec.max_iter, error_injection=(run.inject, seed))
        state, report = run_scheme(setup.problems, setup.pairs, cfg, setup.initial)
    else:
        state, report = ex.run(setup, run.policy, run.gamma)
    report.to_csv(os.path.join(out, "history.csv"))
    pair = setup.pairs[0]
    un_a, un_b = pair.traces(state.u)
    s, sigma = ex.stress_profile(setup, state)
    try:
        sn = ex.normalized_stress(spec, sigma)
    except ValueError:
        sn = np.full_like(sigma, np.nan)
    rows = [dict(zip(PROFILE_FIELDS, vals)) for vals in
            zip(s, pair.x[:, 0], pair.gap, un_a, un_b[pair.pairing], sigma, sn)]
    ex.write_csv(rows, os.path.join(out, "profile.csv"), PROFILE_FIELDS)
    print(f"{run.policy.label()} gamma={run.gamma:g} theta={setup.theta:.6g}: "
          f"{report.iterations} iterations, converged={report.converged}")
    if not report.converged:
        raise DivergenceError(report.iterations, f"no convergence within {spec.max_iter} iterations", report)


def _sweep_gamma(run, out):
    res = ex.sweep_gamma(run.spec, run.schemes, run.gammas, out=out)
    for name, (g, m) in res.best.items():
        print(f"{name:18s} gamma_opt={g:.2f} iterations={m}")


def _sweep_penalty(run, out):
    rows = ex.sweep_penalty(run.spec, run.cs, run.densities, gamma=run.gamma, policy=run.policy, out=out)
    for r in rows:
        print(f"c={r['c']:g} density={r['density']}: max penetration {r['max_penetration']:.3e}, "
              f"L2 distance {r['l2_distance']:.3e}, {r['iterations']} iterations")


def _compare(run, out):
    setup = ex.prepare(run.spec)
    res = ex.sweep_gamma(run.spec, run.schemes, run.gammas, setup=setup, out=out)
    _, summary = ex.compare_schemes(run.spec, res.best, run.schemes, run.eps_list, setup=setup, out=out)
    for name, fit in summary.items():
        print(f"{name:18s} gamma={res.best[name][0]:.2f} slope={fit['slope']:.2f} R2={fit['r2']:.3f}")


def _oracle(run, out):
    o = ex.reference_oracle(run.spec)
    ex.write_csv(o.rows(), os.path.join(out, "oracle.csv"), ["s", "sigma", "sigma_norm"])
    print(f"oracle: density {o.spec.density}, theta {o.theta:.4g}, "
          f"contact zone ends at s={ex.contact_zone_end(o.s, o.sigma):.4f}")


COMMANDS = {
    "solve": "run one scheme and write history.csv and profile.csv",
    "sweep-gamma": "iterations against gamma for every scheme",
    "sweep-penalty": "penetration and oracle distance against c and mesh density",
    "compare-schemes": "iterations against stopping tolerance at each scheme's best gamma",
    "oracle": "fine reference contact stress profile",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="penaltydd", description=__doc__.splitlines()[0] or None)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="INI configuration file")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=0, help="seed for injected errors")
        p.add_argument("--max-iter", type=int, default=None, help="override [scheme] max_iter")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = load_config(args.config, overrides={"max_iter": args.max_iter, "seed": args.seed})
        os.makedirs(args.out, exist_ok=True)
        if args.command == "solve":
            _solve(run, args.out, args.seed)
        elif args.command == "sweep-gamma":
            _sweep_gamma(run, args.out)
        elif args.command == "sweep-penalty":
            _sweep_penalty(run, args.out)
        elif args.command == "compare-schemes":
            _compare(run, args.out)
        else:
            _oracle(run, args.out)
    except (ConfigError, MaterialError, MeshError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SolverError, ex.OracleError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
