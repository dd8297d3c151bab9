"""Command line interface: ``driverselect <verb> [options]``.

Verbs
-----
generate        draw a random graph and write it as an edge list
select          run one selection method on one problem and print a JSON result
correlate       FLP-cost correlation sweep (CSV, JSON manifest, SVG)
compare         head-to-head comparison over many realizations
check-ilp-size  nonzero count of the p-median ILP constraint matrix

Exit status
-----------
0  success
2  configuration error
3  numerical failure
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, NumericalError
from .experiments import (
    ExperimentConfig,
    check_ilp_size,
    emit_outputs,
    run_correlation,
    run_headtohead,
    run_method,
)
from .graph import FAMILIES, edge_list_text, gen_graph, read_edge_list, write_edge_list
from .selectors import METHODS, SelectionProblem

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
FORMATS = ("csv", "json", "svg")


def _family_params(args) -> dict:
    params = {}
    if args.kav is not None:
        params["k_av"] = args.kav
    if args.k is not None:
        params["k"] = args.k
    if args.rewire is not None:
        params["rewire"] = args.rewire
    if args.exponent is not None:
        params["exponent"] = args.exponent
    if not params:
        params = {"k": 6} if args.family == "k_regular" else {"k_av": 6}
    return params


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated integers: {text!r}") from exc


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers: {text!r}") from exc


def _add_graph_args(p, n=50):
    g = p.add_argument_group("graph")
    g.add_argument("--family", choices=FAMILIES, default="erdos_renyi")
    g.add_argument("--n", type=int, default=n, help="number of nodes")
    g.add_argument("--kav", type=float, help="average degree (erdos_renyi, watts_strogatz, power_law_config)")
    g.add_argument("--k", type=int, help="degree of k_regular graphs")
    g.add_argument("--rewire", type=float, help="Watts-Strogatz rewiring probability")
    g.add_argument("--exponent", type=float, help="power-law exponent (default 3)")
    g.add_argument("--directed", action="store_true")
    g.add_argument("--gamma", type=float, default=1.0, help="coupling weight")
    g.add_argument("--nu", type=float, default=None,
                   help="self-damping (default gamma * (max in-degree + 1))")
    g.add_argument("--seed", type=int, default=0)


def _add_problem_args(p, p_default=20, m_default=10, tf_default=1.0):
    g = p.add_argument_group("problem")
    g.add_argument("--p", type=int, default=p_default, help="number of targets")
    g.add_argument("--m", type=int, default=m_default, help="number of drivers")
    g.add_argument("--tf", type=float, default=tf_default, help="horizon; 'inf' accepted")


def _add_output_args(p):
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--format", action="append", choices=FORMATS, dest="formats",
                   help="output format; repeat for several (default: all)")
    p.add_argument("--n-jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driverselect", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    gen = sub.add_parser("generate", help="write a random graph as an edge list")
    _add_graph_args(gen)
    gen.add_argument("--out", default=None, help="edge-list file or directory (default: stdout)")

    sel = sub.add_parser("select", help="run one method on one problem")
    _add_graph_args(sel)
    _add_problem_args(sel)
    sel.add_argument("--graph", type=Path, help="edge-list file instead of a random graph")
    sel.add_argument("--targets", type=_int_list, help="comma separated targets (default: random p-subset)")
    sel.add_argument("--method", choices=METHODS, default="flp")
    sel.add_argument("--iterations", type=int, default=200, help="LPGM iterations")
    sel.add_argument("--epsilon", type=float, default=None, help="hill-climb window half-width")
    sel.add_argument("--out", default=None, help="directory for result.json (default: stdout)")

    for verb, helptext, n, p_, m, reals in (
        ("correlate", "FLP-cost correlation sweep", 300, 100, 33, 1),
        ("compare", "head-to-head comparison", 50, 20, 10, 200),
    ):
        sp = sub.add_parser(verb, help=helptext)
        _add_graph_args(sp, n=n)
        _add_problem_args(sp, p_default=p_, m_default=m)
        sp.add_argument("--method", action="append", choices=METHODS, dest="methods",
                        help="method to run; repeat for several")
        sp.add_argument("--realizations", type=int, default=reals)
        sp.add_argument("--manifest", type=Path, help="rerun the config stored in a manifest.json")
        if verb == "correlate":
            sp.add_argument("--grid", type=_float_list, help="comma separated target FLP costs")
            sp.add_argument("--grid-points", type=int, default=20)
            sp.add_argument("--climbs", type=int, default=5, help="hill climbs per grid value")
            sp.add_argument("--epsilon", type=float, default=None)
        else:
            sp.add_argument("--iterations", type=int, default=200, help="LPGM iterations")
            sp.add_argument("--bins", type=int, default=20)
        _add_output_args(sp)

    ilp = sub.add_parser("check-ilp-size", help="p-median ILP constraint nonzeros")
    ilp.add_argument("--n", type=int, required=True)
    ilp.add_argument("--p", type=int, required=True)
    return parser


def _graph(args):
    if getattr(args, "graph", None) is not None:
        g = read_edge_list(args.graph)
        if args.nu is not None or args.gamma != 1.0:
            g = g.with_weights(gamma=args.gamma, nu=args.nu)
        return g
    return gen_graph(args.family, args.n, _family_params(args), args.directed, args.seed,
                     args.gamma, args.nu)


def _cmd_generate(args) -> int:
    g = _graph(args)
    if args.out is None:
        sys.stdout.write(edge_list_text(g))
        return EXIT_OK
    out = Path(args.out)
    if out.is_dir() or args.out.endswith(("/", "\\")):
        out.mkdir(parents=True, exist_ok=True)
        out = out / "graph.txt"
    write_edge_list(g, out)
    print(out)
    return EXIT_OK


def _cmd_select(args) -> int:
    g = _graph(args)
    if args.targets is not None:
        targets = args.targets
    else:
        if not 1 <= args.p <= g.n:
            raise ConfigError(f"need 1 <= p <= n, got p={args.p}, n={g.n}")
        targets = np.random.default_rng([args.seed, 1]).choice(g.n, size=args.p, replace=False)
    problem = SelectionProblem(g, targets, args.m, args.tf, args.seed)
    config = ExperimentConfig(n=g.n, p=len(problem.targets), m=args.m, t_f=args.tf,
                              gamma=g.gamma, nu=g.nu, realizations=1, seed=args.seed,
                              methods=(args.method,), epsilon=args.epsilon,
                              lpgm={"n_iter": args.iterations})
    result = run_method(problem, args.method, config)
    payload = {
        "graph": {"n": g.n, "edges": g.n_edges, "gamma": g.gamma, "nu": g.nu,
                  "directed": g.directed},
        "targets": list(problem.targets),
        "m": problem.m,
        "t_f": repr(problem.horizon) if math.isinf(problem.horizon) else problem.horizon,
        "seed": args.seed,
        "result": result.to_dict(),
    }
    text = json.dumps(payload, indent=2, default=_json_default) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "result.json").write_text(text, encoding="utf-8")
        print(out / "result.json")
    return EXIT_OK


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _experiment_config(args, verb) -> ExperimentConfig:
    if args.manifest is not None:
        try:
            manifest = json.loads(args.manifest.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read manifest {args.manifest}: {exc}") from exc
        config = ExperimentConfig.from_dict(manifest["config"])
        if args.out is not None:
            config.out = args.out
        return config
    methods = tuple(args.methods) if args.methods else ("greedy", "flp")
    common = dict(
        family=args.family, params=_family_params(args), directed=args.directed,
        n=args.n, p=args.p, m=args.m, t_f=args.tf, gamma=args.gamma, nu=args.nu,
        realizations=args.realizations, seed=args.seed, methods=methods,
        n_jobs=args.n_jobs, out=args.out,
    )
    if verb == "correlate":
        return ExperimentConfig(grid=args.grid, grid_points=args.grid_points,
                                climbs=args.climbs, epsilon=args.epsilon, **common)
    return ExperimentConfig(bins=args.bins, lpgm={"n_iter": args.iterations}, **common)


def _cmd_experiment(args, verb) -> int:
    config = _experiment_config(args, verb)
    table = run_correlation(config) if verb == "correlate" else run_headtohead(config)
    out = config.out or f"{verb}_out"
    paths = emit_outputs(table, out, tuple(args.formats or FORMATS))
    if verb == "correlate":
        summary = {"fits": table.fits, "grid": list(table.grid), "epsilon": table.epsilon}
    else:
        summary = {"fractions": table.fractions, "excluded": table.excluded}
    print(json.dumps(summary, indent=2))
    for path in paths:
        print(path)
    return EXIT_OK


def _cmd_check_ilp(args) -> int:
    count = check_ilp_size(args.n, args.p)
    expected = args.n + 3 * args.n * args.p
    print(json.dumps({"n": args.n, "p": args.p, "nonzeros": count, "n_plus_3np": expected}))
    return EXIT_OK if count == expected else EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "generate":
            return _cmd_generate(args)
        if args.verb == "select":
            return _cmd_select(args)
        if args.verb in ("correlate", "compare"):
            return _cmd_experiment(args, args.verb)
        return _cmd_check_ilp(args)
    except ConfigError as exc:
        print(f"driverselect: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"driverselect: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
