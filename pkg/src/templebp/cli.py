"""Command-line entry point: ``templebp {run,converge,conserve,network,demo-impossibility}``."""
import argparse
import json
import os
import sys

import numpy as np

from . import harness, network
from .model import Model


def _model_from_args(args):
    if args.model is None:
        return None
    return Model.from_name(args.model, args.gamma, args.vref)


def _common(p):
    p.add_argument("--model", choices=["arz", "arz_log", "sedimentation"],
                   help="override the case's closure")
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--vref", type=float, default=1.0)
    p.add_argument("--cfl", type=float, default=harness.DEFAULT_CFL)
    p.add_argument("--tfinal", type=float, help="end time (default: the case's)")
    p.add_argument("--mode", choices=["local", "global"], default="local")
    p.add_argument("--limiter", choices=["on", "off"], default="on")
    p.add_argument("--out", help="output directory for CSV and summary files")


def _print(obj):
    print(json.dumps(obj, indent=2, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))


def cmd_run(args):
    _, summary = harness.run_case(
        args.case, args.N, limiter=args.limiter == "on", mode=args.mode, mesh=args.mesh,
        cfl=args.cfl, t_end=args.tfinal, model=_model_from_args(args), out_dir=args.out,
        wall_limit=args.wall_limit)
    _print(summary.to_dict())
    return 0 if summary.passed else 1


def cmd_converge(args):
    rep = harness.convergence_study(args.case, args.N or (20, 40, 80, 160), args.ref,
                                    fld=args.field, limiter=args.limiter == "on",
                                    mode=args.mode, cfl=args.cfl, t_end=args.tfinal)
    out = rep.to_dict()
    _print(out)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"{args.case}_convergence.json"), "w") as fh:
            json.dump(out, fh, indent=2)
    return 0


def cmd_conserve(args):
    _, summary = harness.run_case(args.case, args.N, limiter=args.limiter == "on",
                                  mode=args.mode, cfl=args.cfl, t_end=args.tfinal,
                                  model=_model_from_args(args), out_dir=args.out)
    _print({"case": args.case, "N": summary.n, "err_Jphi": summary.err_Jphi_unweighted,
            "err_Jphi_weighted": summary.err_Jphi, "err_Jy_weighted": summary.err_Jy,
            "completed": summary.completed})
    return 0 if summary.passed else 1


def cmd_network(args):
    if args.config:
        cfg = network.load_config(args.config)
    else:
        cfg = network.PRESETS[args.preset]()
    if args.tfinal is not None:
        cfg["t_end"] = args.tfinal
    cfg["cfl"] = args.cfl
    net, t_end = network.network_from_config(cfg, n_override=args.N, mode=args.mode,
                                             limiter=args.limiter == "on")
    error = None
    try:
        net.run(t_end)
    except (network.RoadError, RuntimeError) as err:
        error = str(err)
    summary = net.summary()
    summary["error"] = error
    ok = error is None and all(
        r.max_box_excess <= harness.BOUND_TOL and r.min_phi > 0 and r.max_phi < 1 and r.fallbacks == 0
        for r in net.reports.values())
    summary["passed"] = ok
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for rid in net.roads:
            prof = net.road_profile(rid)
            cols = ["x", "phi", "v", "k", "J"]
            np.savetxt(os.path.join(args.out, f"road{rid}.csv"),
                       np.column_stack([prof[c] for c in cols]), delimiter=",",
                       header=",".join(cols), comments="", fmt="%.17g")
        with open(os.path.join(args.out, "network_summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2, default=float)
    _print(summary)
    return 0 if ok else 1


def cmd_demo(args):
    model = Model.from_name(args.model or "arz", args.gamma, args.vref)
    rep = harness.impossibility_demo(model, args.phi_left, args.phi_right, args.v, args.N,
                                     args.steps)
    _print(rep)
    return 0 if rep["fixed_mesh_overshoot"] > 1e-6 and rep["moving_mesh_overshoot"] <= 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="templebp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one catalog case")
    p.add_argument("case", choices=sorted(harness.CATALOG))
    p.add_argument("--N", type=int)
    p.add_argument("--mesh", choices=["moving", "fixed"], default="moving")
    p.add_argument("--wall-limit", type=float, help="stop after this many seconds")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("converge", help="error and order study against a fine run")
    p.add_argument("case", choices=sorted(harness.CATALOG))
    p.add_argument("--N", type=int, nargs="+")
    p.add_argument("--ref", type=int, default=2560)
    p.add_argument("--field", choices=["k", "v", "phi"], default="k")
    _common(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("conserve", help="conservation error of J phi on a periodic case")
    p.add_argument("case", choices=sorted(harness.CATALOG))
    p.add_argument("--N", type=int)
    _common(p)
    p.set_defaults(func=cmd_conserve)

    p = sub.add_parser("network", help="run a road network")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", choices=sorted(network.PRESETS), default="diverging")
    g.add_argument("--config", help="JSON network configuration")
    p.add_argument("--N", type=int, help="nodes per road (overrides the configuration)")
    _common(p)
    p.set_defaults(func=cmd_network)

    p = sub.add_parser("demo-impossibility", help="fixed vs moving mesh velocity overshoot")
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--phi-left", type=float, default=0.8)
    p.add_argument("--phi-right", type=float, default=0.1)
    p.add_argument("--v", type=float, default=0.4)
    _common(p)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
