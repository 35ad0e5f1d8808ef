"""Command-line front end.

Every run writes a CSV with fixed per-subcommand columns plus a JSON sidecar
holding the resolved configuration, seed, artifact version and wall time.
Identical (config, seed) re-runs produce byte-identical CSV bodies; only the
sidecar's wall time differs.  Exit codes: 0 success, 2 invalid configuration,
3 inconclusive critical-point search.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .betac import audit_lower_bound, bisect_betac
from .coalescent import run_final_batch, run_gillespie
from .lattice import ModelParams
from .momentode import merge_identity, critical_dim_amplitude, flow_log_integral, \
    flow_log_integral_quadrature, decay_recursion_check
from .oracle import exact_coalescent_law, exact_moments, \
    initial_partition_for_masses, lattice_for_masses
from .percsim import sizes_batch, two_point_mc
from .renorm import iterate_renorm
from .rng import default_seed
from .stats import cluster_moments, lp_normalized, tail_curve

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3


def _parse_beta(value: str):
    if value == "auto":
        return "auto"
    try:
        beta = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"beta must be a number or 'auto', got {value!r}")
    if beta < 0 or not math.isfinite(beta):
        raise argparse.ArgumentTypeError("beta must be finite and >= 0")
    return beta


def _parse_int_list(value: str) -> list[int]:
    return [int(x) for x in value.split(",") if x]


def _parse_float_list(value: str) -> list[float]:
    return [float(x) for x in value.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="hierperc", description=__doc__)
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, beta: bool = True):
        p.add_argument("--d", type=int, default=1)
        p.add_argument("--L", type=int, default=2)
        p.add_argument("--alpha", type=float, required=True)
        if beta:
            p.add_argument("--beta", type=_parse_beta, default="auto")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", type=Path, default=Path("runs"))
        p.add_argument("--config", type=Path, default=None,
                       help="key=value file whose entries override flags")
        p.add_argument("--tolerance", type=float, default=0.05,
                       help="relative bracket width for beta=auto")

    p = sub.add_parser("betac", help="bracket the critical coupling")
    common(p, beta=False)
    p.add_argument("--budget", type=int, default=2_000_000)
    p.add_argument("--reps", type=int, default=256)
    p.add_argument("--window", type=_parse_int_list, default=[8, 11])
    p.add_argument("--audit-reps", type=int, default=0,
                   help="if > 0, run the lower-bound audit at the upper endpoint")

    p = sub.add_parser("sample", help="draw cluster-size configurations")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--periodic", action="store_true")

    p = sub.add_parser("moments", help="cluster moments E|K_n|^p")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=_parse_int_list, default=[1, 2, 3])
    p.add_argument("--reps", type=int, default=512)

    p = sub.add_parser("tail", help="cluster-volume survival curve")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=1024)
    p.add_argument("--picks", type=int, default=16, help="size-biased picks per replica")

    p = sub.add_parser("sizebias", help="size-biased moment estimates")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=_parse_int_list, default=[1, 2, 3])
    p.add_argument("--reps", type=int, default=1024)

    p = sub.add_parser("lpnorm", help="normalized l^p power sums across scales")
    common(p)
    p.add_argument("--n", type=_parse_int_list, required=True, help="comma list of scales")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--reps", type=int, default=256)

    p = sub.add_parser("twopoint", help="pair connection probabilities")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=10000)
    p.add_argument("--distances", type=_parse_int_list, default=None,
                   help="ultrametric exponents h (distance L^h); default 1..n")

    p = sub.add_parser("coalescent", help="standalone multiplicative coalescent")
    common(p, beta=False)
    p.add_argument("--masses", type=_parse_float_list, required=True)
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--mode", choices=["final", "gillespie"], default="final")

    p = sub.add_parser("renorm", help="iterate the renormalization map")
    common(p)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--draws", type=int, default=1000)

    p = sub.add_parser("verify", help="run the oracle/identity suite")
    common(p, beta=False)

    return top


def _apply_config_file(args: argparse.Namespace) -> None:
    """Apply key=value overrides from --config; file entries win over flags."""
    if getattr(args, "config", None) is None:
        return
    text = args.config.read_text()
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{args.config}:{line_no}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if not hasattr(args, key):
            raise ValueError(f"{args.config}:{line_no}: unknown key {key!r}")
        current = getattr(args, key)
        if key == "beta":
            setattr(args, key, _parse_beta(value))
        elif isinstance(current, bool):
            setattr(args, key, value.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(args, key, int(value))
        elif isinstance(current, float):
            setattr(args, key, float(value))
        elif isinstance(current, list):
            setattr(args, key, _parse_int_list(value) if current and isinstance(current[0], int)
                    else _parse_float_list(value))
        elif isinstance(current, Path):
            setattr(args, key, Path(value))
        else:
            setattr(args, key, value)


def _resolve_beta(args: argparse.Namespace, params: ModelParams, outdir: Path) -> tuple[float, dict]:
    """Resolve --beta, running (and caching) the bracket search for 'auto'."""
    if args.beta != "auto":
        return float(args.beta), {"beta_source": "explicit"}
    key = f"betac_cache_d{params.d}_L{params.L}_a{params.alpha:g}_tol{args.tolerance:g}.json"
    cache = outdir / key
    if cache.exists():
        data = json.loads(cache.read_text())
        return float(data["midpoint"]), {"beta_source": "cache", "bracket": data}
    bracket = bisect_betac(params, args.tolerance, args.seed)
    data = {
        "lower": bracket.lower, "upper": bracket.upper, "midpoint": bracket.midpoint,
        "relative_width": bracket.relative_width, "conclusive": bracket.conclusive,
        "seed": args.seed, "tolerance": args.tolerance,
    }
    outdir.mkdir(parents=True, exist_ok=True)
    cache.write_text(json.dumps(data, indent=2))
    if not bracket.conclusive:
        raise InconclusiveError("critical-point search exhausted its budget", data)
    return bracket.midpoint, {"beta_source": "bisection", "bracket": data}


class InconclusiveError(RuntimeError):
    def __init__(self, message: str, data: dict):
        super().__init__(message)
        self.data = data


def _write_outputs(outdir: Path, command: str, columns: list[str], rows: list[list],
                   config: dict, extras: dict, started: float) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{command}.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)
    sidecar = {
        "command": command,
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "config": config,
        "wall_time_s": time.time() - started,
    }
    sidecar.update(extras)
    (outdir / f"{command}.json").write_text(json.dumps(sidecar, indent=2, default=str))


def _fmt(x: float) -> str:
    return repr(float(x))


def cli_dispatch(argv: list[str] | None = None) -> int:
    """Parse, run, write outputs; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    started = time.time()
    try:
        _apply_config_file(args)
        if args.seed is None:
            args.seed = default_seed()
        if args.command == "verify":
            return _cmd_verify(args, started)
        params = ModelParams(args.d, args.L, args.alpha, 0.0)
        handler = {
            "betac": _cmd_betac,
            "sample": _cmd_sample,
            "moments": _cmd_moments,
            "tail": _cmd_tail,
            "sizebias": _cmd_sizebias,
            "lpnorm": _cmd_lpnorm,
            "twopoint": _cmd_twopoint,
            "coalescent": _cmd_coalescent,
            "renorm": _cmd_renorm,
        }[args.command]
        return handler(args, params, started)
    except InconclusiveError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _config_dict(args: argparse.Namespace) -> dict:
    skip = {"config", "out"}
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in sorted(vars(args).items()) if k not in skip}


def _cmd_betac(args, params, started) -> int:
    bracket = bisect_betac(
        params, args.tolerance, args.seed,
        window=(args.window[0], args.window[-1]), reps=args.reps, budget=args.budget,
    )
    rows = [
        [_fmt(p.beta), _fmt(p.slope), _fmt(p.se), p.window[0], p.window[1], p.reps, p.verdict]
        for p in bracket.probes
    ]
    extras = {
        "bracket": {
            "lower": bracket.lower, "upper": bracket.upper,
            "midpoint": bracket.midpoint, "relative_width": bracket.relative_width,
            "conclusive": bracket.conclusive, "budget_used": bracket.budget_used,
        }
    }
    if args.audit_reps > 0:
        window = range(max(args.window[0], 4), args.window[-1] + 1, 2)
        extras["lower_bound_audit"] = audit_lower_bound(
            params, bracket.upper, window, args.audit_reps, args.seed + 1
        )
    _write_outputs(args.out, "betac", ["beta", "slope", "se", "n_lo", "n_hi", "reps", "verdict"],
                   rows, _config_dict(args), extras, started)
    if not bracket.conclusive:
        print("inconclusive: budget exhausted before reaching tolerance", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _cmd_sample(args, params, started) -> int:
    beta, extras = _resolve_beta(args, params, args.out)
    p = params.with_beta(beta)
    batch = sizes_batch(p, args.n, args.reps, args.seed, powers=(2, 3), periodic=args.periodic)
    rows = [
        [r, _fmt(batch.largest[r]), _fmt(batch.power_sums[2][r]), _fmt(batch.power_sums[3][r]),
         int(batch.cluster_count[r])]
        for r in range(args.reps)
    ]
    _write_outputs(args.out, "sample", ["replica", "largest", "sum_sq", "sum_cube", "clusters"],
                   rows, _config_dict(args), {**extras, "beta": beta}, started)
    return EXIT_OK


def _cmd_moments(args, params, started) -> int:
    beta, extras = _resolve_beta(args, params, args.out)
    p = params.with_beta(beta)
    powers = tuple(sorted({q + 1 for q in args.p}))
    batch = sizes_batch(p, args.n, args.reps, args.seed, powers=powers)
    t_n = p.time_horizon(args.n)
    rows = []
    for q in args.p:
        est = cluster_moments(batch, q, p)
        rows.append([args.n, _fmt(t_n), q, _fmt(est.mean), _fmt(est.stderr), est.count])
    _write_outputs(args.out, "moments", ["n", "t", "p", "estimate", "stderr", "replicas"],
                   rows, _config_dict(args), {**extras, "beta": beta}, started)
    return EXIT_OK


def _cmd_tail(args, params, started) -> int:
    beta, extras = _resolve_beta(args, params, args.out)
    p = params.with_beta(beta)
    batch = sizes_batch(p, args.n, args.reps, args.seed, powers=(), n_picks=args.picks)
    samples = batch.picks.ravel()
    top = max(samples.max(), 2.0)
    grid = np.unique(np.round(np.geomspace(1, top, 40)).astype(int))
    curve = tail_curve(samples, grid)
    rows = [
        [int(k), _fmt(s), _fmt(lo), _fmt(hi), curve.n_samples]
        for k, s, lo, hi in zip(curve.grid, curve.survival, curve.ci_low, curve.ci_high)
    ]
    extras.update({"beta": beta, "slope": curve.slope, "slope_se": curve.slope_se})
    _write_outputs(args.out, "tail", ["k", "survival", "ci_low", "ci_high", "n_samples"],
                   rows, _config_dict(args), extras, started)
    return EXIT_OK


def _cmd_sizebias(args, params, started) -> int:
    beta, extras = _resolve_beta(args, params, args.out)
    p = params.with_beta(beta)
    max_p = max(args.p)
    powers = tuple(range(2, max_p + 3))
    batch = sizes_batch(p, args.n, args.reps, args.seed, powers=powers)
    moments = {q: cluster_moments(batch, q, p).mean for q in range(1, max_p + 2)}
    rows = []
    for q in args.p:
        val = moments[q + 1] * moments[1] ** (q - 1) / moments[2] ** q
        rows.append([q, _fmt(val), args.reps])
    _write_outputs(args.out, "sizebias", ["p", "estimate", "replicas"],
                   rows, _config_dict(args), {**extras, "beta": beta}, started)
    return EXIT_OK


def _cmd_lpnorm(args, params, started) -> int:
    beta, extras = _resolve_beta(args, params, args.out)
    p = params.with_beta(beta)
    rows = []
    need_multisets = not float(args.p).is_integer()
    for n in args.n:
        batch = sizes_batch(
            p, n, args.reps, args.seed + n,
            powers=(int(args.p),) if not need_multisets else (),
            keep_multisets=need_multisets,
        )
        est = lp_normalized(batch, args.p, p)
        rows.append([n, _fmt(args.p), _fmt(est.mean), _fmt(est.stderr), est.count])
    _write_outputs(args.out, "lpnorm", ["n", "p", "estimate", "stderr", "replicas"],
                   rows, _config_dict(args), {**extras, "beta": beta}, started)
    return EXIT_OK


def _cmd_twopoint(args, params, started) -> int:
    beta, extras = _resolve_beta(args, params, args.out)
    p = params.with_beta(beta)
    hs = args.distances if args.distances else list(range(1, args.n + 1))
    pairs = [(0, p.branching ** (h - 1)) for h in hs]
    if args.workers > 1:
        # pairs carry their own seeds, so assignment to workers is free
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = [
                pool.submit(two_point_mc, p, args.n, [pair], args.reps, args.seed + k)
                for k, pair in enumerate(pairs)
            ]
            ests = [f.result()[0] for f in futures]
    else:
        ests = two_point_mc(p, args.n, pairs, args.reps, args.seed)
    rows = [
        [int(p.L ** h), _fmt(e.mean), _fmt(e.stderr), e.count]
        for h, e in zip(hs, ests)
    ]
    _write_outputs(args.out, "twopoint", ["distance", "frequency", "stderr", "replicas"],
                   rows, _config_dict(args), {**extras, "beta": beta}, started)
    return EXIT_OK


def _cmd_coalescent(args, params, started) -> int:
    masses = args.masses
    rows = []
    if args.mode == "final":
        draws = run_final_batch(masses, args.duration, args.reps, args.seed)
        for r, d in enumerate(draws):
            rows.append([r, _fmt(np.sum(d * d)), _fmt(d.max()), d.size])
    else:
        for r in range(args.reps):
            st = run_gillespie(masses, args.duration, args.seed + r)
            arr = st.sizes.as_array()
            rows.append([r, _fmt(np.sum(arr * arr)), _fmt(arr.max()), arr.size])
    _write_outputs(args.out, "coalescent", ["replica", "sum_sq", "largest", "clusters"],
                   rows, _config_dict(args), {}, started)
    return EXIT_OK


def _cmd_renorm(args, params, started) -> int:
    beta, extras = _resolve_beta(args, params, args.out)
    traj = iterate_renorm(params, beta, args.steps, args.draws, args.seed)
    rows = [
        [s["step"], _fmt(s["mean_sum_sq"]), _fmt(s["largest_q50"]), _fmt(s["largest_q90"]),
         _fmt(s["mass_deficit"])]
        for s in traj.steps
    ]
    _write_outputs(args.out, "renorm",
                   ["step", "mean_sum_sq", "largest_q50", "largest_q90", "mass_deficit"],
                   rows, _config_dict(args), {**extras, "beta": beta}, started)
    return EXIT_OK


def _cmd_verify(args, started) -> int:
    """Fast ground-truth suite: analytic identities plus oracle consistency."""
    checks: list[tuple[str, bool, str]] = []

    def record(name: str, ok: bool, detail: str = ""):
        checks.append((name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")

    # double-factorial merge identity, exact integers
    ok = all(merge_identity(n)[0] == merge_identity(n)[1] for n in range(2, 31))
    record("double-factorial identity n=2..30", ok)

    from .momentode import double_factorial_egf
    egf = double_factorial_egf(0.2, 30)
    target = 1 - math.sqrt(1 - 0.4)
    record("generating function at x=0.2", abs(egf - target) < 1e-8, f"err={abs(egf-target):.2e}")

    p = ModelParams(args.d, args.L, args.alpha, 1.0)
    err = max(
        abs(flow_log_integral(t, 5, p) - flow_log_integral_quadrature(t, 5, p))
        for t in np.linspace(0, p.time_horizon(5), 7)
    )
    record("flow integral vs quadrature", err <= 1e-10, f"err={err:.2e}")

    try:
        p_crit = ModelParams(args.d, args.L, args.d / 3.0, 1.0)
        critical_dim_amplitude(p_crit, 1.0)
        record("critical amplitude self-check", True)
    except AssertionError as exc:
        record("critical amplitude self-check", False, str(exc))

    from .lattice import periodic_constant
    try:
        periodic_constant(p)
        record("periodic constant partial-sum check", True)
    except AssertionError as exc:
        record("periodic constant partial-sum check", False, str(exc))

    check = decay_recursion_check(1.0, 0.5, 2.0, [0.0] * 10000, 10000)
    record("decay recursion gamma=2", abs(check - 1) < 0.02, f"value={check:.4f}")

    # small coalescent: uniformization vs two-stage closed form
    lat = lattice_for_masses((1, 1, 1))
    law = exact_coalescent_law(lat, initial_partition_for_masses([1, 1, 1]), 1.0)
    merged = exact_moments(lat, law, 0.0)  # E[number of blocks]
    p_all = sum(w for part, w in zip(lat.partitions, law) if len(part) == 1)
    closed = 1 - 3 * math.exp(-2.0) + 2 * math.exp(-3.0)
    record("3-singleton full-merge law", abs(p_all - closed) < 1e-9,
           f"err={abs(p_all-closed):.2e}")
    record("law normalization", abs(float(np.sum(law)) - 1) < 1e-9, f"blocks={merged:.6f}")

    rows = [[name, int(ok), detail] for name, ok, detail in checks]
    _write_outputs(args.out, "verify", ["check", "ok", "detail"], rows,
                   _config_dict(args), {"all_pass": all(ok for _, ok, _ in checks)}, started)
    return EXIT_OK if all(ok for _, ok, _ in checks) else 1


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
