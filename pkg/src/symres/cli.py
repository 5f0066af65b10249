"""Config-driven runner: ``symres <command> --config exp.toml --out results/``.

Every command writes ``report.json`` (deterministic bytes for a fixed config
and seed), ``summary.txt`` and ``provenance.json`` (config hash, versions,
wall time).  Exit status: 0 when every verdict passes, 1 on a failed check,
2 on a usage or configuration error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import tempfile
import time
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import scipy
import sympy as sp

from . import __version__

COMMANDS = ("fibre-suite", "identity-suite", "assemble", "resonance-scan", "pipeline-thm")
EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


# ---------------------------------------------------------------------------
# helpers


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [_jsonable(x.real), _jsonable(x.imag)]
    if isinstance(x, sp.Basic):
        return str(x)
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_config(path: str | None) -> tuple[dict, str]:
    if path is None:
        return {}, hashlib.sha256(b"").hexdigest()
    raw = Path(path).read_bytes()
    try:
        cfg = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        line, col = getattr(exc, "lineno", None), getattr(exc, "colno", None)
        where = f"line {line}, column {col}: " if line is not None else ""
        raise ConfigError(f"{path}: {where}{getattr(exc, 'msg', exc)}") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 ({exc})") from exc
    return cfg, hashlib.sha256(raw).hexdigest()


def _positive(cfg: dict, key: str, default):
    val = cfg.get(key, default)
    if not isinstance(val, (int, float)) or isinstance(val, bool) or val <= 0:
        raise ConfigError(f"{key} must be a positive number, got {val!r}")
    return val


def _int(cfg: dict, key: str, default, lo: int = 0):
    val = cfg.get(key, default)
    if not isinstance(val, int) or isinstance(val, bool) or val < lo:
        raise ConfigError(f"{key} must be an integer >= {lo}, got {val!r}")
    return val


# ---------------------------------------------------------------------------
# commands; each returns (report dict, verdicts dict, summary text)


def cmd_fibre_suite(cfg: dict, args) -> tuple:
    from .checks import adjoint_symbol_checks, constant_checks, fibre_suite, golden_checks

    m_max = _int(cfg, "m_max", 3)
    dim_max = _int(cfg, "dim_max", 3, lo=1)
    checks = fibre_suite(m_max, dim_max)
    if cfg.get("blocks", True):
        checks += constant_checks() + golden_checks() + adjoint_symbol_checks(_int(cfg, "adjoint_m_max", 4))
    report = {"m_max": m_max, "dim_max": dim_max, "checks": [c.to_json() for c in checks]}
    verdicts = {c.name: c.passed for c in checks}
    summary = "\n".join(f"{'PASS' if c.passed else 'FAIL'}  {c.name}" for c in checks)
    return report, verdicts, summary


def cmd_identity_suite(cfg: dict, args) -> tuple:
    from .geometry import Chart
    from .geometry.metrics import make_metric
    from .geometry.suite import identity_suite

    metric = make_metric(cfg.get("metric", {"kind": "hyperbolic", "dim": 2}))
    ch = cfg.get("chart", {})
    dim = metric.dim
    chart = Chart(tuple(ch.get("lo", [-1.0, 0.5][:dim])), tuple(ch.get("hi", [1.0, 2.5][:dim])),
                  tuple(ch.get("N", [33] * dim)), tuple(ch.get("periodic", [False] * dim)),
                  _int(ch, "order", 2, lo=2))
    rep = identity_suite(metric, chart, levels=_int(cfg, "levels", 3, lo=1), identities=cfg.get("identities"),
                         tol=_positive(cfg, "tol", 1e-4), seed=args.seed, threads=args.threads,
                         allow_non_einstein=bool(cfg.get("allow_non_einstein", False)))
    verdicts = {f"{r.identity} k={r.rank}": r.passed for r in rep.results}
    return rep.to_json(), verdicts, rep.table()


def cmd_assemble(cfg: dict, args) -> tuple:
    from .blocks import (assemble_ambient_Q, assemble_indicial_Q, build_scale_change, load_golden,
                         restrict_tracefree, scale_change_equal)

    m = _int(cfg, "m", 2)
    n = cfg.get("n", "n")
    n = sp.Symbol("n", positive=True) if n == "n" else sp.Integer(_int(cfg, "n", 1, lo=1))
    sign = cfg.get("trace_sign", -1)
    if sign not in (-1, 1):
        raise ConfigError("trace_sign must be +1 or -1")
    B = {"ambient": assemble_ambient_Q(m, n), "indicial": assemble_indicial_Q(m, n)}
    if m >= 2:
        B["indicial_tracefree"] = restrict_tracefree(B["indicial"], sign=sign)
    J = build_scale_change(m)
    report = {"m": m, "n": str(n), "trace_sign": sign, "blocks": {k: v.to_json() for k, v in B.items()},
              "J": [[str(J.coefficient(r, c)) for c in range(m, -1, -1)] for r in range(m, -1, -1)]}
    verdicts = {}
    if m == 2 and n == sp.Symbol("n", positive=True) and cfg.get("compare_golden", True):
        g = load_golden()
        verdicts = {f"golden {k}": g[k].equals(v) for k, v in B.items()}
        verdicts["golden J"] = scale_change_equal(g["J"], J)
    summary = "\n\n".join(f"[{k}]\n{v.pretty()}" for k, v in B.items()) + "\n\n[J]\n" + J.pretty()
    if verdicts:
        summary += "\n\n" + "\n".join(f"{'PASS' if ok else 'FAIL'}  {k}" for k, ok in verdicts.items())
    return report, verdicts, summary


def cmd_resonance_scan(cfg: dict, args) -> tuple:
    from .resonator import mode_reduce, reports_to_csv, reports_to_svg, resonance_scan

    base = cfg.get("base", "H2")
    m = _int(cfg, "m", 0)
    modes = cfg.get("modes", [0])
    window = cfg.get("lambda_window", [-3.75, -0.25, -0.25, 0.25])
    if len(window) != 4 or not (window[0] < window[1] and window[2] <= window[3]):
        raise ConfigError("lambda_window must be [re_lo, re_hi, im_lo, im_hi] with lo < hi")
    N = _int(cfg, "N", 200, lo=16)
    th = cfg.get("thresholds", {})
    shape = tuple(cfg.get("scan_shape", [11, 3]))
    reps = []
    for ell in modes:
        reps.append(resonance_scan(mode_reduce(base, m, ell), window, N=N, method=cfg.get("method", "ultraspherical"),
                                   shape=shape, sigma_threshold=_positive(th, "sigma_min", 1e-10),
                                   match_tol=_positive(th, "match", 1e-3), refine_tol=_positive(th, "refinement", 1e-4),
                                   visibility_tol=_positive(th, "visibility", 0.1), threads=args.threads))
    report = {"base": base, "m": m, "window": window, "reports": [r.to_json() for r in reps]}
    verdicts = {f"mode {r.mode}: detectors agree": not r.rejected for r in reps}
    if "clean_above" in cfg:
        lam0 = float(cfg["clean_above"])
        verdicts["no poles right of clean_above"] = all(p.lam.real <= lam0 for r in reps for p in r.poles)
    extra = {"poles.csv": reports_to_csv(reps)}
    if cfg.get("svg", True):
        extra["poles.svg"] = reports_to_svg(reps)
    lines = []
    for r in reps:
        poles = ", ".join(f"{p.lam.real:+.6f}{p.lam.imag:+.6f}i (x{p.multiplicity})" for p in r.poles) or "none"
        lines.append(f"mode {r.mode}: poles {poles}; hidden {len(r.hidden)}; rejected {len(r.rejected)}")
    return report, verdicts, "\n".join(lines), extra


def cmd_pipeline_thm(cfg: dict, args) -> tuple:
    from .resonator import decoupling_pipeline

    lam = cfg.get("lambda", 8.0)
    res = decoupling_pipeline(complex(lam), ell=_int(cfg, "ell", 2), N=_int(cfg, "N", 320, lo=16),
                              method=cfg.get("method", "ultraspherical"))
    report = res.to_json()
    verdicts = res.checks()
    summary = "\n".join(f"{k:<24} {v}" for k, v in sorted(report.items()) if not isinstance(v, dict))
    return report, verdicts, summary


HANDLERS = {"fibre-suite": cmd_fibre_suite, "identity-suite": cmd_identity_suite, "assemble": cmd_assemble,
            "resonance-scan": cmd_resonance_scan, "pipeline-thm": cmd_pipeline_thm}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symres", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML experiment file")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--backend", choices=("rational", "float"), default="rational")
    p.add_argument("--seed", type=int, default=0)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    if args.threads < 1 or not 0 <= args.seed < 2 ** 64:
        print("symres: --threads must be >= 1 and --seed a u64", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        cfg, digest = load_config(args.config)
        section = cfg.get(args.command.replace("-", "_"), cfg)
        np.random.seed(args.seed % 2 ** 32)
        out = HANDLERS[args.command](section, args)
    except (ConfigError, OSError) as exc:
        print(f"symres: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # module errors are reported, not swallowed
        print(f"symres: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report, verdicts, summary = out[:3]
    extra = out[3] if len(out) > 3 else {}
    passed = all(verdicts.values())
    outdir = Path(args.out)
    body = {"command": args.command, "backend": args.backend, "seed": args.seed, "config_sha256": digest,
            "verdicts": verdicts, "passed": passed, "result": report}
    write_atomic(outdir / "report.json", dumps(body))
    for name, text in extra.items():
        write_atomic(outdir / name, text)
    write_atomic(outdir / "summary.txt", f"{args.command}: {'PASS' if passed else 'FAIL'}\n{summary}\n")
    prov = {"config": args.config, "config_sha256": digest, "seed": args.seed, "backend": args.backend,
            "threads": args.threads, "wall_time_s": round(time.perf_counter() - t0, 3),
            "versions": {"symres": __version__, "python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__, "sympy": sp.__version__}}
    write_atomic(outdir / "provenance.json", dumps(prov))
    print(f"{args.command}: {'PASS' if passed else 'FAIL'} ({outdir})")
    return EXIT_PASS if passed else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
