"""Command-line front end: ``netkit rate | max-distance | finite-size | verify | mc-sample``."""

from __future__ import annotations

import argparse
import ast
import csv
import dataclasses
import io
import json
import math
import operator
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import montecarlo as mc
from . import network as nw
from . import rates as rt
from . import verify as vf
from .errors import NetkitError

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _count(text: str) -> int:
    """Positive integer; accepts scientific notation such as 1e6."""
    v = _float(text)
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def _increasing(values: list, text: str) -> list:
    if not values:
        raise argparse.ArgumentTypeError(f"empty list: {text!r}")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError(f"values must be strictly increasing: {text!r}")
    return values


def float_list(text: str) -> list[float]:
    return _increasing([_float(t) for t in text.split(",") if t.strip()], text)


def count_list(text: str) -> list[int]:
    return _increasing([_count(t) for t in text.split(",") if t.strip()], text)


def grid(text: str) -> list[float]:
    """``start:stop:step`` with the stop included (up to rounding)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}")
    start, stop, step = (_float(p) for p in parts)
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"need step > 0 and stop >= start, got {text!r}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    # rounding to 12 digits keeps 0.1-type steps free of representation noise
    return _increasing([round(start + k * step, 12) for k in range(n)], text)


def decades(text: str) -> list[float]:
    """``lo:hi`` block-size decades, e.g. 1e6:1e12; a plain list is also accepted."""
    if ":" not in text:
        return float_list(text)
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    lo, hi = (math.log10(_float(p)) for p in parts)
    if lo != round(lo) or hi != round(hi) or hi < lo:
        raise argparse.ArgumentTypeError(f"decade bounds must be increasing powers of ten, got {text!r}")
    return [10.0**k for k in range(int(lo), int(hi) + 1)]


_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.FloorDiv: operator.floordiv,
}


def _eval_size(node, n: int):
    if isinstance(node, ast.Expression):
        return _eval_size(node.body, n)
    if isinstance(node, ast.Constant) and isinstance(node.value, int):
        return node.value
    if isinstance(node, ast.Name) and node.id == "N":
        return n
    if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval_size(node.left, n), _eval_size(node.right, n))
    raise ValueError


@dataclasses.dataclass(frozen=True)
class SplitExpr:
    """``A,B`` where each side is an integer or an arithmetic expression in N (``N/2-1``)."""

    a: str
    b: str

    def resolve(self, n: int) -> tuple[int, int]:
        out = []
        for side in (self.a, self.b):
            try:
                v = _eval_size(ast.parse(side, mode="eval"), n)
            except (ValueError, SyntaxError, ZeroDivisionError):
                raise UsageError(f"bad split expression {side!r}") from None
            if v != int(v):
                raise UsageError(f"split expression {side!r} is not an integer for N={n}")
            out.append(int(v))
        return out[0], out[1]


def split_expr(text: str) -> SplitExpr:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise argparse.ArgumentTypeError(f"expected A,B, got {text!r}")
    expr = SplitExpr(*parts)
    expr.resolve(100)
    return expr


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    if not math.isfinite(v):
        return fmt(v)
    return float(format(v, ".10g"))


def render(rows: list[dict], columns: list[str], fmt_name: str, comment: str) -> str:
    buf = io.StringIO()
    if fmt_name == "csv":
        buf.write(f"# netkit {__version__} {comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])
    else:
        for r in rows:
            rec = {"schema_version": SCHEMA_VERSION}
            rec.update({c: _json_value(r.get(c)) for c in columns})
            buf.write(json.dumps(rec, sort_keys=False) + "\n")
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def pmap(fn, items) -> list:
    """Map in parallel; results come back in input order."""
    items = list(items)
    workers = min(mc.default_workers(), max(len(items), 1))
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def make_spec(args, n: int, nbar: float) -> rt.ProtocolSpec:
    n_a = n_b = None
    if args.protocol.endswith("secret-sharing"):
        if args.split is None:
            raise UsageError(f"--split is required for {args.protocol}")
        n_a, n_b = args.split.resolve(n)
        try:
            nw.split(n_a, n_b, nw.network(n, 1.0, 1.0))
        except NetkitError as exc:
            raise UsageError(str(exc)) from None
    elif args.split is not None:
        raise UsageError(f"--split only applies to secret-sharing protocols, not {args.protocol}")
    return rt.ProtocolSpec(args.protocol, n, n_a, n_b, nbar)


def fs_params(args, block_size: float | None = None) -> rt.FiniteSizeParams:
    return rt.FiniteSizeParams(
        ec_efficiency=args.xi,
        block_size=block_size if block_size is not None else args.block_size,
        bits=args.bits,
        delta_s=args.delta_s,
        delta_ec=args.delta_ec,
        delta_pe=args.delta_pe,
        success_prob=args.p,
        log_base=args.log_base,
    )


def distance_points(args) -> list[tuple[float, float]]:
    """(d_km, eta) pairs from --distance, --distance-grid or --eta."""
    att = args.attenuation
    given = [x for x in (args.distance, args.distance_grid, args.eta) if x is not None]
    if len(given) > 1:
        raise UsageError("give only one of --distance, --distance-grid, --eta")
    if args.eta is not None:
        for e in args.eta:
            if not 0 < e <= 1:
                raise UsageError(f"--eta values must lie in (0, 1], got {e}")
        # increasing eta means decreasing distance; keep the user's grid order
        return [(-10.0 * math.log10(e) / att if att > 0 else 0.0, e) for e in args.eta]
    ds = given[0] if given else [0.0]
    if ds[0] < 0:
        raise UsageError("distances must be non-negative")
    return [(d, rt.eta_from_distance(d, att)) for d in ds]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

RATE_COLUMNS = ["protocol", "n", "n_a", "n_b", "nbar", "d_km", "d_m", "eta", "mu_star", "I", "chi", "rate", "plob"]


def cmd_rate(args) -> int:
    points = distance_points(args)
    jobs = [
        (make_spec(args, n, nbar), d, eta)
        for n in args.n
        for nbar in args.nbar
        for d, eta in points
    ]

    def row(job):
        spec, d, eta = job
        if args.mu is not None:
            rep, mu = rt.protocol_rate(spec, args.mu, eta), args.mu
        else:
            mu, rep = rt.optimize_mu(spec, eta)
        r = {
            "protocol": spec.protocol,
            "n": spec.n_users,
            "n_a": spec.n_a,
            "n_b": spec.n_b,
            "nbar": spec.nbar,
            "d_km": d,
            "d_m": d * 1000.0,
            "eta": eta,
            "mu_star": mu,
            "I": rep.mutual_info,
            "chi": rep.holevo,
            "rate": rep.rate,
            "plob": rt.plob_bound(eta),
        }
        if args.finite_size:
            r["r_n"] = rt.finite_size_rate(rep.mutual_info, rep.holevo, fs_params(args))
        return r

    rows = pmap(row, jobs)
    cols = RATE_COLUMNS + (["r_n"] if args.finite_size else [])
    comment = (
        "rate table; d_km [km], d_m [m], eta [1], mu_star [shot-noise units], "
        "I, chi, rate, plob" + (", r_n" if args.finite_size else "") + " [bit/use]"
    )
    emit(render(rows, cols, args.format, comment), args.out)
    return EXIT_OK


def cmd_max_distance(args) -> int:
    jobs = [make_spec(args, n, nbar) for nbar in args.nbar for n in args.n]

    def row(spec):
        d = rt.max_distance(spec, d_max=args.d_max, tol=args.tol, mu=args.mu, attenuation_db_per_km=args.attenuation)
        return {
            "protocol": spec.protocol,
            "n": spec.n_users,
            "n_a": spec.n_a,
            "n_b": spec.n_b,
            "nbar": spec.nbar,
            "d_max_km": d,
            "d_max_m": d * 1000.0,
        }

    rows = pmap(row, jobs)
    cols = ["protocol", "n", "n_a", "n_b", "nbar", "d_max_km", "d_max_m"]
    emit(render(rows, cols, args.format, "max-distance table; d_max_km [km], d_max_m [m]"), args.out)
    return EXIT_OK


def cmd_finite_size(args) -> int:
    if len(args.n) != 1 or len(args.nbar) != 1:
        raise UsageError("finite-size takes a single --n and a single --nbar")
    (d, eta), *rest = distance_points(args)
    if rest:
        raise UsageError("finite-size takes a single distance")
    spec = make_spec(args, args.n[0], args.nbar[0])
    if args.mu is not None:
        mu, rep = args.mu, rt.protocol_rate(spec, args.mu, eta)
    else:
        mu, rep = rt.optimize_mu(spec, eta)
    sizes = args.block_sizes if args.block_sizes is not None else [args.block_size]
    base = {"protocol": spec.protocol, "n": spec.n_users, "nbar": spec.nbar, "d_km": d, "mu_star": mu}
    rows = []
    for size in sizes:
        r = rt.finite_size_rate(rep.mutual_info, rep.holevo, fs_params(args, size))
        rows.append({**base, "kind": "finite", "block_size": size, "r": r})
    asym = args.xi * rep.mutual_info - rep.holevo
    rows.append({**base, "kind": "asymptotic", "block_size": math.inf, "r": asym})
    cols = ["protocol", "n", "nbar", "d_km", "mu_star", "kind", "block_size", "r"]
    comment = "finite-size table; d_km [km], mu_star [shot-noise units], block_size [uses], r [bit/use]"
    emit(render(rows, cols, args.format, comment), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = vf.run_all(args.shots, args.seed, perturb=args.perturb, monte_carlo=not args.no_monte_carlo)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name} value={fmt(c.value)} threshold={fmt(c.threshold)}")
    if args.out:
        recs = [{"schema_version": SCHEMA_VERSION, **{k: _json_value(v) for k, v in c.record().items()}} for c in checks]
        Path(args.out).write_text("".join(json.dumps(r) + "\n" for r in recs), encoding="utf-8")
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print("failed invariants: " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_mc_sample(args) -> int:
    if len(args.n) != 1 or len(args.nbar) != 1:
        raise UsageError("mc-sample takes a single --n and a single --nbar")
    (d, eta), *rest = distance_points(args)
    if rest:
        raise UsageError("mc-sample takes a single distance")
    mu = args.mu if args.mu is not None else 20.0
    cfg = nw.network(args.n[0], mu, eta, args.nbar[0])
    run = mc.sample_protocol(cfg, args.shots, args.seed, bob_detection=args.bob_detection)
    stats = mc.verify_conditional_cm(cfg, args.shots, args.seed, run=run)
    if args.save_outcomes:
        np.savez(args.save_outcomes, gamma=run.gamma, beta=run.beta)
    n = cfg.n_users
    labels = [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
    rows = []
    for i in range(2 * n):
        for j in range(i, 2 * n):
            rows.append(
                {
                    "row": labels[i],
                    "col": labels[j],
                    "empirical": stats.empirical_cov[i, j],
                    "analytic": stats.analytic_cov[i, j],
                    "std_error": stats.standard_errors[i, j],
                    "z": stats.z_scores[i, j],
                }
            )
    meta = run.metadata
    comment = (
        f"mc-sample n={n} mu={fmt(mu)} eta={fmt(eta)} nbar={fmt(cfg.link.nbar)} shots={args.shots} "
        f"seed={args.seed} detection={args.bob_detection} rng={meta['rng']} numpy={meta['numpy']}; "
        "conditional covariance entries [shot-noise units]"
    )
    if args.format == "jsonl":
        for r in rows:
            r.update(shots=args.shots, seed=args.seed, rng=meta["rng"], numpy=meta["numpy"])
        cols = ["row", "col", "empirical", "analytic", "std_error", "z", "shots", "seed", "rng", "numpy"]
    else:
        cols = ["row", "col", "empirical", "analytic", "std_error", "z"]
    emit(render(rows, cols, args.format, comment), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--out", help="write the table here instead of standard output")


def _network_opts(p: argparse.ArgumentParser, n_default: str = "2") -> None:
    p.add_argument("--protocol", choices=rt.PROTOCOLS, default="conference")
    p.add_argument("--n", type=count_list, default=n_default, help="number of users, comma list")
    p.add_argument("--split", type=split_expr, help="ensemble sizes A,B; may use N, e.g. N/2-1,N/2")
    p.add_argument("--nbar", type=float_list, default="0", help="thermal photons per link, comma list")
    p.add_argument("--mu", type=_float, help="fix the modulation variance instead of optimising it")
    p.add_argument("--attenuation", type=_float, default=0.2, help="fiber loss in dB/km (default 0.2)")


def _distance_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--distance", type=float_list, help="distances in km, comma list")
    p.add_argument("--distance-grid", type=grid, help="start:stop:step in km")
    p.add_argument("--eta", type=float_list, help="transmissivities instead of distances")


def _fs_opts(p: argparse.ArgumentParser) -> None:
    d = rt.FiniteSizeParams()
    p.add_argument("--xi", type=_float, default=d.ec_efficiency, help="reconciliation efficiency")
    p.add_argument("--bits", type=_count, default=d.bits, help="bits per quadrature")
    p.add_argument("--delta-s", type=_float, default=d.delta_s)
    p.add_argument("--delta-ec", type=_float, default=d.delta_ec)
    p.add_argument("--delta-pe", type=_float, default=d.delta_pe)
    p.add_argument("--p", type=_float, default=d.success_prob, help="success probability")
    p.add_argument("--block-size", type=_float, default=d.block_size)
    p.add_argument("--log-base", type=_float, default=d.log_base)


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="netkit", description="Key rates of CV-MDI star networks.")
    parser.add_argument("--version", action="version", version=f"netkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("rate", help="key-rate table over distance, N and nbar")
    _common(p)
    _network_opts(p)
    _distance_opts(p)
    _fs_opts(p)
    p.add_argument("--finite-size", action="store_true", help="add the composable finite-size column r_n")
    p.set_defaults(func=cmd_rate)
    subs["rate"] = p

    p = sub.add_parser("max-distance", help="maximum distance with a positive rate, per N")
    _common(p)
    _network_opts(p, n_default="2,5,10,20,50")
    p.add_argument("--d-max", type=_float, default=500.0, help="upper end of the search bracket in km")
    p.add_argument("--tol", type=_float, default=1e-4, help="bisection tolerance in km")
    p.set_defaults(func=cmd_max_distance)
    subs["max-distance"] = p

    p = sub.add_parser("finite-size", help="finite-size rate over block sizes")
    _common(p)
    _network_opts(p, n_default="10")
    _distance_opts(p)
    _fs_opts(p)
    p.add_argument("--block-sizes", type=decades, default="1e6:1e12", help="lo:hi decades or comma list")
    p.set_defaults(func=cmd_finite_size)
    subs["finite-size"] = p

    p = sub.add_parser("verify", help="closed-form, oracle and Monte Carlo cross-checks")
    _common(p)
    p.add_argument("--shots", type=_count, default=10**6)
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--no-monte-carlo", action="store_true", help="skip the sampling checks")
    p.add_argument("--perturb", type=_float, default=0.0, help="test mode: offset added to the closed-form CM")
    p.set_defaults(func=cmd_verify)
    subs["verify"] = p

    p = sub.add_parser("mc-sample", help="sample the protocol and compare conditional covariances")
    _common(p)
    _network_opts(p, n_default="3")
    _distance_opts(p)
    p.add_argument("--shots", type=_count, default=10**5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bob-detection", choices=("heterodyne", "none"), default="heterodyne")
    p.add_argument("--save-outcomes", help="write raw outcomes to this .npz file")
    p.set_defaults(func=cmd_mc_sample)
    subs["mc-sample"] = p
    return parser, subs


def read_config(path: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _apply_config(sub: argparse.ArgumentParser, cfg: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        a = actions.get(key)
        if a is None or key in ("help", "config"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(a, argparse._StoreTrueAction):
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {key!r} expects a boolean, got {value!r}")
            defaults[key] = value.lower() in ("true", "1", "yes")
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)


def main(argv: list[str] | None = None) -> int:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.config:
            _apply_config(subs[args.command], read_config(args.config))
            args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, OSError) as exc:
        print(f"netkit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NetkitError as exc:
        print(f"netkit: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
