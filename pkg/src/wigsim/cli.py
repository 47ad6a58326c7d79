"""Command-line entry point.

Subcommands: ``simulate``, ``params``, ``oracle-compare`` and ``scan-spats``.
Reports are JSON documents on stdout. Exit codes: 0 success, 2 invalid input,
3 resource or accuracy limits, 4 no oracle for the configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import oracle as orc
from . import states as st
from .config import build_run_config, load_config
from .discretization import DEFAULT_MEMORY_CAP, resource_estimate
from .errors import ConfigError, DomainError, WigsimError
from .sampler import Simulator, write_outcomes


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    return str(obj)


def _emit(report, path=None):
    text = json.dumps(report, indent=2, default=_json_default)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _condition_rows(params):
    rows = []
    for c in params.conditions:
        if c.passed:
            status = "PASS"
        else:
            status = "UNVERIFIED" if params.mode == "practical" else "FAIL"
        rows.append({"number": c.number, "name": c.name, "status": status, "passed": c.passed, "detail": c.detail})
    return rows


def _params_block(params, memory_cap):
    d = params.to_dict()
    d.pop("conditions")
    d["lambda"] = d.pop("lam")
    d["resources"] = resource_estimate(params, memory_cap)
    return d


def _table(params, memory_cap) -> str:
    est = resource_estimate(params, memory_cap)
    lines = [
        f"mode              {params.mode}",
        f"epsilon           {params.epsilon:.6g}",
        f"Gamma             {params.gamma:.6g}  (= {params.gamma_ratio} delta)",
        f"delta             {params.delta:.6g}  (bound {params.delta_bound:.6g})",
        f"|A|               {params.area:.6g}  (bound {params.area_bound:.6g}, side {params.side:.6g})",
        f"oracle_tol        {params.oracle_tol:.6g}",
        f"affine budget     {params.affine_precision:.6g}  (rounding bound {params.affine_error:.3e})",
        f"beta              {params.beta:.6g}",
        f"Lambda            {params.lam:.6g}",
        f"cells per grid    {params.cells}  ({est['storage']}, {est['memory_bytes']:.3g} bytes)",
        "conditions:",
    ]
    for row in _condition_rows(params):
        lines.append(f"  {row['number']}. {row['name']:<30} {row['status']:<10} {row['detail']}")
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    run = build_run_config(cfg, seed=args.seed)
    sim = Simulator(run, memory_cap=args.memory_cap)
    result = sim.run_ensemble(threads=args.threads)
    write_outcomes(result, args.out, args.format)
    _emit({
        "params": _params_block(run.params, args.memory_cap),
        "conditions": _condition_rows(run.params),
        "summary": {"seed": run.seed, "output": args.out, "format": args.format, **result.summary()},
    }, args.report)
    return 0


def cmd_params(args) -> int:
    cfg = load_config(args.config)
    run = build_run_config(cfg)
    print(_table(run.params, args.memory_cap), file=sys.stderr)
    _emit({"params": _params_block(run.params, args.memory_cap), "conditions": _condition_rows(run.params)},
          args.out)
    return 0


def compare(run, result, threads=1):
    """Empirical Gamma-histogram versus the reference law for ``run``; returns the comparison block."""
    states, amap, spec, p = run.states, run.circuit, run.measurement, run.params
    mean, cov = orc.gaussian_output_law([w.covariance for w in states], [w.mean for w in states], amap, spec)
    half = orc.default_half_bins(cov, p.gamma)
    reference = orc.oracle_distribution(states, amap, spec, p.gamma, mean, half)
    empirical = orc.histogram(result, p.gamma, mean, half)
    one, tv = orc.tv_distance(empirical, reference)
    worst, where = orc.max_bin_deviation(empirical, reference)
    B = len(empirical.bins)
    N = result.outcomes.shape[0]
    threshold = p.epsilon + 2 * math.sqrt(B / N)
    return {
        "oracle": reference.meta.get("method", "quadrature"),
        "one_norm": one,
        "tv": tv,
        "max_bin_deviation": worst,
        "max_bin_index": list(where) if where is not None else None,
        "occupied_bins": B,
        "region_half_bins": half.tolist(),
        "samples": N,
        "epsilon": p.epsilon,
        "threshold": threshold,
        "empirical_tail": empirical.tail,
        "oracle_tail": reference.tail,
        "verdict": "PASS" if one <= threshold else "FAIL",
    }


def cmd_oracle_compare(args) -> int:
    cfg = load_config(args.config)
    run = build_run_config(cfg, seed=args.seed)
    sim = Simulator(run, memory_cap=args.memory_cap)
    result = sim.run_ensemble(threads=args.threads)
    comparison = compare(run, result)
    _emit({
        "params": _params_block(run.params, args.memory_cap),
        "conditions": _condition_rows(run.params),
        "summary": {"seed": run.seed, **result.summary()},
        "comparison": comparison,
    }, args.out)
    return 0


def _range(text, name):
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"expected a:b, got {text!r}", path=name) from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ConfigError(f"invalid range {text!r}", path=name)
    return lo, hi


def spats_scan_rows(nbar_range, efficiency_range, steps):
    """Rows ``(nbar, efficiency, W(0,0), is_positive, fidelity, P(0,0))`` on a regular grid."""
    if steps < 1:
        raise ConfigError("steps must be >= 1", path="steps")
    if nbar_range[0] < 0:
        raise ConfigError("nbar must be >= 0", path="nbar")
    if efficiency_range[0] < 0 or efficiency_range[1] > 1:
        raise ConfigError("efficiency must lie in [0, 1]", path="efficiency")
    rows = []
    for n in np.linspace(*nbar_range, steps):
        for eta in np.linspace(*efficiency_range, steps):
            spec = st.SpatsSpec(float(n), float(eta))
            try:
                p0 = float(st.lespats_p_function(spec, 0.0, 0.0))
            except DomainError:
                p0 = float("nan")
            rows.append((float(n), float(eta), st.lespats_origin(spec), st.is_positive_wigner(spec),
                         st.fidelity_to_vacuum(spec), p0))
    return rows


def cmd_scan_spats(args) -> int:
    nbar, eff, steps = (0.0, 10.0), (0.0, 1.0), 50
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read scan config: {exc}") from None
        nbar = tuple(doc.get("nbar", nbar))
        eff = tuple(doc.get("efficiency", eff))
        steps = doc.get("steps", steps)
    if args.nbar:
        nbar = _range(args.nbar, "nbar")
    if args.efficiency:
        eff = _range(args.efficiency, "efficiency")
    if args.steps is not None:
        steps = args.steps
    if not isinstance(steps, int) or len(nbar) != 2 or len(eff) != 2:
        raise ConfigError("scan needs nbar and efficiency pairs and an integer step count")
    rows = spats_scan_rows(nbar, eff, steps)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["nbar", "efficiency", "wigner_origin", "is_positive", "fidelity_to_vacuum", "p_origin"])
        for n, eta, w0, pos, fid, p0 in rows:
            writer.writerow([repr(n), repr(eta), repr(w0), str(pos).lower(), repr(fid), repr(p0)])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wigsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=False, out_help="report path"):
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out", required=out_required, help=out_help)
        p.add_argument("--memory-cap", type=int, default=DEFAULT_MEMORY_CAP,
                       help="largest grid (cells) stored explicitly; larger grids are streamed")

    p = sub.add_parser("simulate", help="sample outcomes and write them to a file")
    common(p, True, "outcome file")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--report", help="also write the JSON report here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("params", help="resolve discretization parameters and check the error-budget conditions")
    common(p)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("oracle-compare", help="compare sampled outcomes with a reference distribution")
    common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_oracle_compare)

    p = sub.add_parser("scan-spats", help="tabulate LESPATS negativity and vacuum fidelity")
    p.add_argument("--config", help="JSON with nbar [a, b], efficiency [a, b], steps")
    p.add_argument("--nbar", help="range a:b")
    p.add_argument("--efficiency", help="range a:b")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_scan_spats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 1 << 64:
        print("error: --seed must be in [0, 2^64)", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except WigsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
