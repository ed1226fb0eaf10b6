"""Command-line front end: ``rmtlab <command> [flags]``.

Flags may also come from a flat ``key=value`` file given with ``--config``
(``#`` starts a comment); flags on the command line win. Whenever ``--out``
is given, the resolved configuration is written there as ``config.txt``.
Exit status: 0 on success, 1 on a runtime error, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import integrate

from . import eigen, experiments, semicircle, walks
from .entries import RADEMACHER, parse_distribution
from .errors import RmtLabError
from .profiles import (
    band_profile,
    clique_union_profile,
    full_wigner_profile,
    random_regular_profile,
    save_profile,
    validate,
)
from .sampler import read_matrix_csv, sample_matrix, write_dense_csv, write_triplets_csv

COMMANDS = ("profile", "sample", "spectrum", "esd", "moments", "gap", "sweep", "verify")

DEFAULTS = {
    "n": None,
    "d": None,
    "w": None,
    "dist": "gaussian",
    "profile": "full",
    "length": 6,
    "trials": 5,
    "delta": 0.1,
    "seed": 0,
    "trial": 0,
    "out": None,
    "threads": 1,
    "graph": "clique",
    "input": None,
    "experiment": "bulk",
    "n_list": None,
    "d_rule": "fixed",
    "epsilon": None,
    "method": "auto",
    "bins": 50,
    "range": "-2.5,2.5",
    "timing": False,
}


class UsageError(Exception):
    pass


def _dist(text: str):
    try:
        return parse_distribution(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _n_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n list {text!r}") from None


def _range(text: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"range must be 'a,b', got {text!r}") from None
    return a, b


def _flag(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


CONVERTERS = {
    "n": int,
    "d": int,
    "w": int,
    "length": int,
    "trials": int,
    "trial": int,
    "seed": int,
    "threads": int,
    "bins": int,
    "delta": float,
    "epsilon": float,
    "timing": _flag,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    add = common.add_argument
    sup = argparse.SUPPRESS
    add("--n", type=int, default=sup, help="dimension")
    add("--d", type=int, default=sup, help="degree / clique size minus one")
    add("--w", type=int, default=sup, help="band half-width")
    add("--dist", default=sup, help="gaussian | rademacher | uniform | weibull:<beta>")
    add("--profile", default=sup, choices=experiments.PROFILES)
    add("--length", type=int, default=sup, help="walk length 2k")
    add("--trials", type=int, default=sup)
    add("--trial", type=int, default=sup, help="trial index for single samples")
    add("--delta", type=float, default=sup, help="outlier margin above 2")
    add("--epsilon", type=float, default=sup)
    add("--seed", type=int, default=sup, help="master seed")
    add("--out", default=sup, help="output directory")
    add("--threads", type=int, default=sup)
    add("--config", default=None, help="key=value config file")
    add("--graph", default=sup, choices=("clique", "tree"))
    add("--input", default=sup, help="matrix CSV (dense or i,j,value triplets)")
    add("--experiment", default=sup, choices=("bulk", "absence", "presence", "moments"))
    add("--n-list", dest="n_list", default=sup, help="comma-separated dimensions")
    add("--d-rule", dest="d_rule", default=sup, help="fixed | log:<c> | log2")
    add("--method", default=sup, choices=("auto", "dense", "lanczos", "blocks"))
    add("--bins", type=int, default=sup)
    add("--range", default=sup, help="histogram range 'a,b'")
    add("--timing", action="store_true", default=sup, help="record wall_ms in sweep CSV")

    parser = argparse.ArgumentParser(prog="rmtlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "profile": "build and validate a variance profile",
        "sample": "draw one matrix X = Sigma o W",
        "spectrum": "eigenvalues of a sampled or stored matrix",
        "esd": "ESD histogram and KS distance to the semicircle",
        "moments": "local moment of a rooted clique or tree by walk enumeration",
        "gap": "clique minus tree local moment",
        "sweep": "run a Monte-Carlo experiment",
        "verify": "check the built-in golden values",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def read_config(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        if value == "":
            out[key] = None
            continue
        conv = CONVERTERS.get(key, str)
        try:
            out[key] = conv(value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            cfg.update(read_config(args.config))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    cfg.update({k: v for k, v in vars(args).items() if k in DEFAULTS})
    try:
        cfg["dist_obj"] = _dist(cfg["dist"])
        cfg["range"] = _range(cfg["range"]) if isinstance(cfg["range"], str) else cfg["range"]
        if cfg["n_list"] is not None and isinstance(cfg["n_list"], str):
            cfg["n_list"] = _n_list(cfg["n_list"])
    except argparse.ArgumentTypeError as exc:
        raise UsageError(str(exc)) from None
    if cfg["threads"] < 1:
        raise UsageError("--threads must be at least 1")
    cfg["command"] = args.command
    return cfg


def write_resolved(cfg: dict, out: Path) -> None:
    lines = [f"# rmtlab {cfg['command']}"]
    for key in DEFAULTS:
        v = cfg[key]
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{key}={'' if v is None else v}")
    (out / "config.txt").write_text("\n".join(lines) + "\n")


def fmt(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _need(cfg, *keys):
    missing = [k for k in keys if cfg[k] is None]
    if missing:
        raise UsageError(f"{cfg['command']} needs --{', --'.join(m.replace('_', '-') for m in missing)}")


def _profile(cfg):
    _need(cfg, "n")
    n, kind = cfg["n"], cfg["profile"]
    if kind == "full":
        return full_wigner_profile(n)
    if kind == "band":
        _need(cfg, "w")
        return band_profile(n, cfg["w"])
    _need(cfg, "d")
    if kind == "clique":
        return clique_union_profile(n, cfg["d"])
    return random_regular_profile(n, cfg["d"], cfg["seed"])


def _matrix(cfg):
    if cfg["input"] is not None:
        return read_matrix_csv(cfg["input"])
    return sample_matrix(
        _profile(cfg), cfg["dist_obj"], cfg["seed"], cfg["trial"], cfg["threads"]
    ).values


def cmd_profile(cfg, out):
    prof = _profile(cfg)
    report = validate(prof)
    print(f"kind={prof.kind} n={prof.n} sigma_star={fmt(prof.sigma_star)}")
    print(f"max_row_deviation={fmt(report.max_row_deviation)}")
    print("valid" if report.passed else "invalid: " + "; ".join(report.failures()))
    if out is not None:
        save_profile(prof, out / "profile.json", out / "profile.csv")
    return 0 if report.passed else 1


def cmd_sample(cfg, out):
    prof = _profile(cfg)
    x = sample_matrix(prof, cfg["dist_obj"], cfg["seed"], cfg["trial"], cfg["threads"])
    if out is None:
        raise UsageError("sample needs --out")
    if prof.kind == "full":
        write_dense_csv(x, out / "matrix.csv")
    else:
        write_triplets_csv(x, out / "matrix.csv")
    print(out / "matrix.csv")
    return 0


def cmd_spectrum(cfg, out):
    spec = eigen.eig_sym(_matrix(cfg))
    if out is not None:
        spec.write_csv(out / "spectrum.csv")
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["index", "eigenvalue"])
        for i, lam in enumerate(spec.eigenvalues):
            w.writerow([i, fmt(lam)])
    print(f"lambda_max={fmt(spec.lambda_max)} lambda_min={fmt(spec.lambda_min)}", file=sys.stderr)
    return 0


def cmd_esd(cfg, out):
    spec = eigen.eig_sym(_matrix(cfg))
    hist = eigen.esd_histogram(spec, cfg["bins"], cfg["range"])
    ks = semicircle.ks_distance(spec)
    if out is not None:
        spec.write_csv(out / "spectrum.csv")
        hist.write_csv(out / "esd.csv")
        xs = np.linspace(-2.0, 2.0, 401)
        with open(out / "semicircle.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "density", "cdf"])
            for x, f, c in zip(xs, semicircle.density(xs), semicircle.cdf(xs)):
                w.writerow([fmt(x), fmt(f), fmt(c)])
    print(f"ks={fmt(ks)} outside={fmt(hist.outside)}")
    return 0


def cmd_moments(cfg, out):
    _need(cfg, "d")
    d, length = cfg["d"], cfg["length"]
    graph = walks.clique(d) if cfg["graph"] == "clique" else walks.truncated_tree(d, length // 2)
    report = walks.moment_report(graph, length, cfg["dist_obj"])
    print(f"{fmt(report.moment_value)} ({report.even_walks} even walks / {d ** (length // 2)})")
    if out is not None:
        (out / "moments.json").write_text(json.dumps(report.to_json(), indent=2) + "\n")
    return 0


def cmd_gap(cfg, out):
    _need(cfg, "d")
    print(fmt(walks.moment_gap(cfg["d"], cfg["length"], cfg["dist_obj"])))
    return 0


def cmd_sweep(cfg, out):
    n_list = cfg["n_list"] or ((cfg["n"],) if cfg["n"] is not None else None)
    if n_list is None:
        raise UsageError("sweep needs --n-list or --n")
    try:
        config = experiments.SweepConfig(
            n_list=n_list,
            profile=cfg["profile"],
            dist=cfg["dist"],
            d_rule=cfg["d_rule"],
            d=cfg["d"],
            w=cfg["w"],
            trials=cfg["trials"],
            delta=cfg["delta"],
            master_seed=cfg["seed"],
            epsilon=cfg["epsilon"],
            threads=cfg["threads"],
            method=cfg["method"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if cfg["experiment"] == "moments":
        table = experiments.run_moment_convergence(config)
        if out is not None:
            experiments.write_moment_table(table, out / "moments.csv")
        for r in table:
            exact = fmt(r.exact) if r.exact is not None else "-"
            print(f"n={r.n} 2k={r.length} mc={fmt(r.mc_mean)} se={fmt(r.mc_se)} exact={exact} catalan={r.catalan}")
        return 0
    result = experiments.EXPERIMENTS[cfg["experiment"]](config)
    if out is not None:
        result.write_csv(out / "sweep.csv", include_timing=cfg["timing"])
        result.write_summary(out / "summary.json")
    else:
        result.write_csv(sys.stdout, include_timing=cfg["timing"])
    return 0


def golden_checks():
    """(name, passed, detail) for each built-in golden value."""
    checks = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        checks.append((name, bool(ok), detail))

    def density_at_zero():
        v = semicircle.density(0.0)
        return abs(v - 1 / math.pi) <= 1e-15, fmt(v)

    def cdf_quadrature():
        xs = np.linspace(-2.0, 2.0, 101)
        err = max(
            abs(semicircle.cdf(x) - integrate.quad(semicircle.density, -2.0, x, epsabs=1e-13)[0])
            for x in xs
        )
        return err <= 1e-10, f"max error {err:.3g}"

    def catalan():
        got = [semicircle.moment(k) for k in (2, 4, 6, 8)]
        return got == [1, 2, 5, 14], str(got)

    def clique_moment():
        r = walks.moment_report(walks.clique(3), 6, RADEMACHER)
        return r.moment_value == Fraction(31, 9) and r.even_walks == 93, f"{fmt(r.moment_value)}, {r.even_walks} even walks"

    def tree_moment():
        r = walks.moment_report(walks.truncated_tree(3, 3), 6, RADEMACHER)
        return r.moment_value == Fraction(29, 9) and r.even_walks == 87, f"{fmt(r.moment_value)}, {r.even_walks} even walks"

    def gap_formula():
        bad = [d for d in range(2, 7) if walks.moment_gap(d, 6, RADEMACHER) != Fraction(d * (d - 1), d**3)]
        return not bad and walks.moment_gap(3, 6, RADEMACHER) == Fraction(2, 9), f"mismatch at {bad}" if bad else "d = 2..6"

    def k5():
        spec = eigen.eig_sym(np.ones((5, 5)) - np.eye(5))
        err = np.max(np.abs(spec.eigenvalues - np.array([4.0, -1, -1, -1, -1])))
        return err <= 1e-10, f"max error {err:.3g}"

    check("semicircle density(0) = 1/pi", density_at_zero)
    check("semicircle cdf vs quadrature", cdf_quadrature)
    check("Catalan moments 1, 2, 5, 14", catalan)
    check("clique(3) 6th moment 31/9", clique_moment)
    check("tree(3) 6th moment 29/9", tree_moment)
    check("clique-tree gap d(d-1)/d^3", gap_formula)
    check("K5 spectrum {4, -1 x4}", k5)
    return checks


def cmd_verify(cfg, out):
    checks = golden_checks()
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name} ({detail})")
    if out is not None:
        with open(out / "verify.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["check", "status", "detail"])
            for name, ok, detail in checks:
                w.writerow([name, "PASS" if ok else "FAIL", detail])
    return 0 if all(ok for _, ok, _ in checks) else 1


HANDLERS = {
    "profile": cmd_profile,
    "sample": cmd_sample,
    "spectrum": cmd_spectrum,
    "esd": cmd_esd,
    "moments": cmd_moments,
    "gap": cmd_gap,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        out = None
        if cfg["out"] is not None:
            out = Path(cfg["out"])
            out.mkdir(parents=True, exist_ok=True)
            write_resolved(cfg, out)
        return HANDLERS[args.command](cfg, out)
    except UsageError as exc:
        print(f"rmtlab {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (RmtLabError, ValueError, RuntimeError, OSError) as exc:
        print(f"rmtlab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
