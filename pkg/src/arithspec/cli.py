"""Command-line interface: ``arithspec <command> [options]``.

Every command resolves its configuration (built-in defaults, then an
optional JSON config file, then flags), validates the spectral parameters,
and writes JSON or CSV with the resolved config and its sha256 in the header.
Timings go to stderr so output files stay byte-identical between runs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__
from . import asymptotics as asy
from . import beurling as beu
from .checks import CHECKS, SUITES, run_suite
from .errors import ArithSpecError, InputError
from .ledger import LocalTable, counting, cross_validate, enumerate_above, product_constant
from .local import DEFAULT_EPS, default_threads, local_spectra
from .numtheory import SpectralParams

DEFAULTS = {
    "t": None,
    "rho": None,
    "sigma": None,
    "tau": None,
    "mode": None,
    "eps": DEFAULT_EPS,
    "threads": None,
    "format": None,
    "output": None,
    "p": "2",
    "k_max": 8,
    "lambda_star": 1e-9,
    "p_max": 100000,
    "x_grid": None,
    "s_grid": None,
    "N": None,
    "m": 10,
    "x": 1e6,
    "primes": None,
    "suite": "default",
    "only": None,
}

_COMMON = ("t", "rho", "sigma", "tau", "mode", "eps", "format")
# config keys that affect each command's output
COMMAND_KEYS = {
    "local": _COMMON + ("p", "k_max"),
    "global": _COMMON + ("lambda_star", "p_max", "N", "m"),
    "counting": _COMMON + ("lambda_star", "p_max", "x_grid"),
    "kappa": _COMMON + ("lambda_star", "p_max", "k_max"),
    "zeta": _COMMON + ("s_grid", "p_max"),
    "beurling": _COMMON + ("x", "x_grid", "p_max", "primes"),
    "validate": _COMMON + ("suite", "only"),
}

# per-command output format when --format is not given
DEFAULT_FORMAT = {"local": "json", "global": "csv", "counting": "csv", "kappa": "json",
                  "zeta": "csv", "beurling": "csv", "validate": "json"}


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _clean(obj):
    """Make an object JSON-safe: numpy scalars to Python, non-finite reals to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def parse_grid(spec: str | None, default: str) -> np.ndarray:
    """Grid from ``a,b,c`` or ``lin:start:stop:num`` or ``log:start:stop:num``."""
    spec = spec or default
    try:
        if spec.startswith(("lin:", "log:")):
            kind, a, b, n = spec.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ValueError
            return np.linspace(a, b, n) if kind == "lin" else np.geomspace(a, b, n)
        grid = np.array([float(v) for v in spec.split(",") if v.strip()])
        if grid.size == 0:
            raise ValueError
        return grid
    except ValueError:
        raise InputError(f"cannot parse grid {spec!r}; use a,b,c or lin|log:start:stop:num") from None


def _int_list(spec: str, name: str) -> list[int]:
    try:
        return [int(v) for v in str(spec).split(",") if v.strip()]
    except ValueError:
        raise InputError(f"{name} must be a comma-separated list of integers, got {spec!r}") from None


def resolve_params(cfg: dict) -> SpectralParams:
    if cfg["sigma"] is not None or cfg["tau"] is not None:
        if cfg["t"] is not None or cfg["rho"] is not None:
            raise InputError("give either (t, rho) or (sigma, tau), not both")
        if cfg["sigma"] is None or cfg["tau"] is None:
            raise InputError("sigma and tau must be given together")
        p = SpectralParams.from_sigma_tau(cfg["sigma"], cfg["tau"])
        return SpectralParams(p.t, p.rho, cfg["mode"]) if cfg["mode"] else p
    t = 1.0 if cfg["t"] is None else float(cfg["t"])
    rho = 3.0 if cfg["rho"] is None else float(cfg["rho"])
    return SpectralParams(t, rho, cfg["mode"])


def _header(cfg: dict, params: SpectralParams) -> dict:
    resolved = {k: cfg[k] for k in COMMAND_KEYS[cfg["command"]]}
    resolved["command"] = cfg["command"]
    resolved["params"] = params.as_dict()
    resolved = _clean(resolved)
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return {"tool": "arithspec", "version": __version__, "config": resolved,
            "config_sha256": hashlib.sha256(blob.encode()).hexdigest()}


def _render_json(header: dict, result) -> str:
    return json.dumps(_clean({"header": header, "result": result}), indent=2) + "\n"


def _render_csv(header: dict, meta: dict, columns: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {json.dumps(_clean(header), sort_keys=True)}\n")
    for k, v in meta.items():
        buf.write(f"# {k}: {json.dumps(_clean(v))}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _emit(text: str, cfg: dict) -> None:
    if cfg["output"]:
        with open(cfg["output"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _render(cfg, header, result, meta, columns, rows) -> str:
    if cfg["format"] == "json":
        if columns is not None:
            result = dict(result or meta)
            result["columns"] = columns
            result["rows"] = [list(r) for r in rows]
        return _render_json(header, result)
    if columns is None:
        raise InputError(f"{cfg['command']} produces a single object; use --format json")
    return _render_csv(header, meta, columns, rows)


# -- commands ----------------------------------------------------------------


def cmd_local(cfg, params):
    ps = _int_list(cfg["p"], "p")
    specs = local_spectra(ps, params, eps=cfg["eps"], k_max=int(cfg["k_max"]), threads=cfg["threads"])
    out = [s.as_dict() for s in specs]
    if len(out) == 1:
        out = out[0]
    rows = []
    for s in specs:
        for k, lam in enumerate(s.enumeration):
            rows.append((int(s.p), k, lam, s.trunc_bound, s.rel_err[k], s.resolved[k], s.converged[k]))
    cols = ["p", "k", "lambda", "trunc_bound", "rel_err", "resolved", "converged"]
    if cfg["format"] == "json":
        return out, None, None, None
    return None, {"K": [s.K for s in specs]}, cols, rows


def _ledger(cfg, params):
    return enumerate_above(params, float(cfg["lambda_star"]), P_max=int(cfg["p_max"]), eps=cfg["eps"],
                           threads=cfg["threads"])


def _ledger_meta(L):
    return {"N_enum": L.N, "threshold": L.threshold, "product_constant": L.product_constant,
            "product_remainder": L.product_remainder, "tail_constant": L.tail_constant,
            "tail_sum_bound": L.tail_sum_bound(), "max_trunc_bound": L.max_trunc_bound,
            "max_rel_err": L.max_rel_err}


def cmd_global(cfg, params):
    L = _ledger(cfg, params)
    meta = _ledger_meta(L)
    if cfg["N"] is not None:
        meta["cross_validation"] = cross_validate(params, int(cfg["N"]), int(cfg["m"]), L).as_dict()
    n = np.arange(1, L.N + 1)
    rows = zip(n, L.values, np.sign(L.values).astype(np.int64), L.omega)
    return None, meta, ["n", "value", "sign", "omega"], rows


def cmd_counting(cfg, params):
    L = _ledger(cfg, params)
    x = parse_grid(cfg["x_grid"], f"log:10:{0.999 / L.threshold:.17g}:25")
    cc = counting(L, x)
    meta = _ledger_meta(L)
    for name, f in (("fit_plus", cc.fit_plus), ("fit_minus", cc.fit_minus)):
        meta[name] = {"slope": f.slope, "prefactor": f.prefactor, "residual": f.residual, "points": f.points}
    return None, meta, ["x", "mu_plus", "mu_minus"], zip(cc.x, cc.mu_plus, cc.mu_minus)


def cmd_kappa(cfg, params):
    P = int(cfg["p_max"])
    table = LocalTable.build(params, P, depth_for=max(2, 2 ** int(cfg["k_max"])), eps=cfg["eps"],
                             threads=cfg["threads"])
    ledger = _ledger(cfg, params) if cfg["lambda_star"] else None
    k = asy.kappa(params, P_max=P, k_max=int(cfg["k_max"]), ledger=ledger, table=table)
    pc = product_constant(params, P, table=table)
    out = k.as_dict()
    out.update({"product_constant": pc.C, "product_remainder": pc.remainder, "decay": params.decay})
    if ledger is not None:
        for b in ("plus", "minus") if params.indefinite else ("plus",):
            out[f"fit_{b}"] = asy.fit_power_law(ledger, b).as_dict()
    return out, None, None, None


def cmd_zeta(cfg, params):
    P = int(cfg["p_max"])
    d = params.decay
    s = parse_grid(cfg["s_grid"], f"lin:{1 / d + asy.S_MARGIN:.17g}:1:10")
    table = LocalTable.build(params, P, eps=cfg["eps"], threads=cfg["threads"])
    prof = asy.spectral_zeta(params, s, P_max=P, table=table)
    cols = ["s", "f", "h", "f_tilde", "h_tilde", "f_remainder", "h_remainder"]
    rows = [[r[c] for c in cols] for r in prof.as_rows()]
    if params.indefinite:
        data = asy.EulerData(table, P)
        cols += ["f1", "h1"]
        for r, x in zip(rows, s):
            r += [asy.f1_product(data, x).value, asy.h1_product(data, x).value]
    return None, {"P_max": P, "abscissa": 1 / d}, cols, rows


def cmd_beurling(cfg, params):
    X = float(cfg["x"])
    meta = {"X": X}
    if cfg["primes"]:
        try:
            primes = sorted(float(v) for v in str(cfg["primes"]).split(","))
        except ValueError:
            raise InputError(f"cannot parse primes {cfg['primes']!r}") from None
        system = beu.generate_integers(primes, X)
    else:
        P = max(int(cfg["p_max"]), int(X))
        table = LocalTable.build(params, P, eps=cfg["eps"], threads=cfg["threads"])
        g = beu.spectral_beurling_primes(params, P, table=table)
        system = beu.spectral_system(params, X, P_max=P, table=table)
        dev = np.abs(g.deviation)
        meta.update({"P_max": P, "primes_used": int(np.sum(g.r <= X)), "residue_c1": beu.residue(g),
                     "max_deviation_p_ge_100": float(dev[g.p >= 100].max()) if np.any(g.p >= 100) else None})
    meta["integers"] = len(system)
    x = parse_grid(cfg["x_grid"], f"log:1:{X:.17g}:{max(2, int(math.ceil(math.log10(X))) * 4 + 1)}")
    N, M = beu.counting(system, x)
    return None, meta, ["x", "N", "M", "N_over_x", "M_over_x"], zip(x, N, M, N / x, M / x)


def cmd_validate(cfg, params):
    only = cfg["only"].split(",") if cfg["only"] else None
    if only:
        unknown = [k for k in only if k not in CHECKS]
        if unknown:
            raise InputError(f"unknown check(s) {unknown}; choose from {list(CHECKS)}")
    elif cfg["suite"] not in SUITES:
        raise InputError(f"unknown suite {cfg['suite']!r}; choose from {list(SUITES)}")
    results = run_suite(cfg["suite"], only=only, params=params, threads=cfg["threads"])
    # the table shares stdout with the JSON only when the JSON goes to a file
    table = sys.stdout if cfg["output"] else sys.stderr
    width = max(len(r.title) for r in results)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.key:>3}  {r.title:<{width}}", file=table)
        print(f"  check {r.key}: {r.runtime:.2f} s (limit {r.limit:g} s)", file=sys.stderr)
    out = {"passed": all(r.passed for r in results), "checks": [r.as_dict() for r in results]}
    return out, None, None, None


HANDLERS = {"local": cmd_local, "global": cmd_global, "counting": cmd_counting, "kappa": cmd_kappa,
            "zeta": cmd_zeta, "beurling": cmd_beurling, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON file of option values; flags override it")
    common.add_argument("--t", type=float, help="weight exponent t (indefinite mode: t > 0)")
    common.add_argument("--rho", type=float, help="homogeneity degree rho")
    common.add_argument("--sigma", type=float, help="legacy parametrization sigma")
    common.add_argument("--tau", type=float, help="legacy parametrization tau")
    common.add_argument("--mode", choices=["indefinite", "legacy"])
    common.add_argument("--eps", type=float, help="truncation tolerance for local sections")
    common.add_argument("--threads", type=int, help="worker cap (default: $ARITHSPEC_THREADS or all cores)")
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--format", choices=["json", "csv"])

    parser = argparse.ArgumentParser(prog="arithspec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"arithspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("local", parents=[common], help="local spectra of E_p", argument_default=S)
    p.add_argument("--p", help="prime base or comma-separated list")
    p.add_argument("--k-max", "--kmax", dest="k_max", type=int, help="deepest index that must converge")

    ledger_opts = argparse.ArgumentParser(add_help=False, argument_default=S)
    ledger_opts.add_argument("--lambda-star", type=float, help="enumerate all |lambda| above this")
    ledger_opts.add_argument("--p-max", type=int, help="primes used for the product constant")

    p = sub.add_parser("global", parents=[common, ledger_opts], help="eigenvalue ledger", argument_default=S)
    p.add_argument("--N", type=int, help="also cross-validate against the N x N section")
    p.add_argument("--m", type=int, help="number of extreme eigenvalues to cross-validate")

    p = sub.add_parser("counting", parents=[common, ledger_opts], help="counting functions mu+(x), mu-(x)",
                       argument_default=S)
    p.add_argument("--x-grid", help="a,b,c or lin|log:start:stop:num")

    p = sub.add_parser("kappa", parents=[common, ledger_opts], help="asymptotic prefactor", argument_default=S)
    p.add_argument("--k-max", "--kmax", dest="k_max", type=int)

    p = sub.add_parser("zeta", parents=[common], help="spectral zeta functions", argument_default=S)
    p.add_argument("--s-grid", help="a,b,c or lin|log:start:stop:num")
    p.add_argument("--p-max", type=int, help="Euler product cutoff")

    p = sub.add_parser("beurling", parents=[common], help="generalized prime system", argument_default=S)
    p.add_argument("--x", type=float, help="generate integers up to X")
    p.add_argument("--x-grid", help="a,b,c or lin|log:start:stop:num")
    p.add_argument("--p-max", type=int)
    p.add_argument("--primes", help="explicit ascending prime list instead of the spectral one")

    p = sub.add_parser("validate", parents=[common], help="run the acceptance checks", argument_default=S)
    p.add_argument("--suite", choices=sorted(SUITES))
    p.add_argument("--only", help="comma-separated check keys, e.g. 1,2,6")
    return parser


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InputError("config file must hold a JSON object")
    out = {}
    for k, v in data.items():
        key = k.replace("-", "_")
        if key not in DEFAULTS:
            raise InputError(f"unknown config key {k!r}")
        out[key] = v
    return out


def resolve_config(ns: argparse.Namespace) -> dict:
    flags = vars(ns).copy()
    command = flags.pop("command")
    cfg = dict(DEFAULTS)
    if "config" in flags:
        cfg.update(load_config(flags.pop("config")))
    cfg.update(flags)
    cfg["command"] = command
    if cfg["format"] is None:
        cfg["format"] = DEFAULT_FORMAT[command]
    if cfg["threads"] is None:
        cfg["threads"] = default_threads()
    if int(cfg["threads"]) < 1:
        raise InputError("--threads must be >= 1")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = resolve_config(ns)
        params = resolve_params(cfg)
        result, meta, cols, rows = HANDLERS[cfg["command"]](cfg, params)
        header = _header(cfg, params)
        _emit(_render(cfg, header, result, meta, cols, rows), cfg)
    except ArithSpecError as exc:
        print(f"arithspec {ns.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"arithspec {ns.command}: numeric error: {exc}", file=sys.stderr)
        return 1
    print(f"arithspec {cfg['command']}: done in {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    if cfg["command"] == "validate" and not result["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
