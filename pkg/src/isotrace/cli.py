"""Command line driver.

Usage::

    isotrace MODE --config experiment.json --out results/ [--threads N] [--seed S]

``MODE`` is one of spectrum, trace, predict, compare, equiv, crossmodel. The
configuration is a JSON object; see README.md for every key. Exit status is
0 on success, 2 for configuration or computation errors and 3 when a
reported criterion fails.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import tempfile
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__, families, kernels
from . import pipelines as pl
from .asymptotics import singularity_prediction
from .errors import ConfigError, IsotraceError
from .morse import find_critical_points
from .symbols import COMPLEX, REAL, InvariantSymbol, PhasePolynomial
from .trace import GaussianWindow, LevelSpectrumSource, windowed_transform
from .hermite import average_operator, make_order1_perturbation

MODES = ("spectrum", "trace", "predict", "compare", "equiv", "crossmodel")

EXIT_OK, EXIT_ERROR, EXIT_CRITERION = 0, 2, 3

DEFAULTS: Dict[str, Any] = {
    "d": 2,
    "perturbation": "none",
    "symbol": None,
    "rotation_seed": None,
    "N_max": 2,
    "N_list": None,
    "k": 1,
    "k0": 1,
    "t": 2 * math.pi,
    "window_width": 0.35,
    "lambda_grid": {"start": 1000.0, "stop": 10000.0, "num": 64, "spacing": "log"},
    "r": [0.5, 1.0],
    "a": [0.0, 0.7],
    "sign_flag": "auto",
    "phase_flag": "auto",
    "fs_calibration": "auto",
    "fs_normalization": "kahler",
    "method": "auto",
    "seed": 0,
    "threads": 1,
    "mode": None,
}

SPACINGS = ("log", "linear", "sqrt")


# ---------------------------------------------------------------------------
# config


def _terms_from_records(records, d, problems, where):
    terms = {}
    if not isinstance(records, list) or not records:
        problems.append(f"{where}: 'terms' must be a non-empty list")
        return terms
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            problems.append(f"{where}.terms[{i}]: must be an object")
            continue
        a, b = rec.get("alpha"), rec.get("beta")
        if not (isinstance(a, list) and isinstance(b, list) and len(a) == d and len(b) == d
                and all(isinstance(v, int) and v >= 0 for v in a + b)):
            problems.append(f"{where}.terms[{i}]: alpha/beta must be non-negative integer lists of length {d}")
            continue
        re_, im_ = rec.get("re", 0.0), rec.get("im", 0.0)
        if not all(isinstance(v, (int, float)) for v in (re_, im_)):
            problems.append(f"{where}.terms[{i}]: re/im must be numbers")
            continue
        c = complex(re_, im_)
        terms[(tuple(a), tuple(b))] = c.real if c.imag == 0 else c
    return terms


def validate_config(raw: Dict[str, Any], mode: Optional[str] = None) -> Dict[str, Any]:
    """Merge defaults and check every field; raises one ``ConfigError`` listing all problems."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    problems: List[str] = []
    unknown = sorted(set(raw) - set(DEFAULTS) - {"out"})
    if unknown:
        problems.append(f"unknown keys: {unknown}")
    cfg = copy.deepcopy(DEFAULTS)
    cfg.update({k: v for k, v in raw.items() if k in DEFAULTS})
    cfg["lambda_grid"] = {**DEFAULTS["lambda_grid"], **(raw.get("lambda_grid") or {})}
    cfg["mode"] = mode or cfg["mode"]
    if cfg["mode"] not in MODES:
        problems.append(f"mode must be one of {MODES}")
    d = cfg["d"]
    if not (isinstance(d, int) and 1 <= d <= 4):
        problems.append("d must be an integer in 1..4")
        d = 2
    for key in ("N_max", "k", "k0", "seed", "threads"):
        if not isinstance(cfg[key], int):
            problems.append(f"{key} must be an integer")
    if isinstance(cfg["N_max"], int) and cfg["N_max"] < 0:
        problems.append("N_max must be non-negative")
    if isinstance(cfg["threads"], int) and cfg["threads"] < 1:
        problems.append("threads must be >= 1")
    for key in ("k", "k0"):
        if cfg[key] == 0 and cfg["mode"] in ("trace", "predict", "compare", "equiv"):
            problems.append(f"{key} must be nonzero")
    if cfg["N_list"] is not None and not (isinstance(cfg["N_list"], list) and cfg["N_list"]
                                          and all(isinstance(n, int) and n > 0 for n in cfg["N_list"])):
        problems.append("N_list must be a list of positive integers")
    w = cfg["window_width"]
    if not isinstance(w, (int, float)) or w <= 0:
        problems.append("window_width must be a positive number")
    elif w > GaussianWindow.max_width():
        problems.append(f"window_width {w} leaks into neighbouring singularities (max {GaussianWindow.max_width():.4f})")
    g = cfg["lambda_grid"]
    if g["spacing"] not in SPACINGS:
        problems.append(f"lambda_grid.spacing must be one of {SPACINGS}")
    if not (isinstance(g["num"], int) and g["num"] >= 2):
        problems.append("lambda_grid.num must be an integer >= 2")
    if not (isinstance(g["start"], (int, float)) and isinstance(g["stop"], (int, float)) and 0 < g["start"] < g["stop"]):
        problems.append("lambda_grid needs 0 < start < stop")
    for key in ("r", "a"):
        v = cfg[key]
        if isinstance(v, (int, float)):
            cfg[key] = [v]
        elif not (isinstance(v, list) and v and all(isinstance(x, (int, float)) for x in v)):
            problems.append(f"{key} must be a number or list of numbers")
    if cfg["sign_flag"] not in ("auto", 1, -1):
        problems.append("sign_flag must be 'auto', 1 or -1")
    if cfg["phase_flag"] not in ("auto", "statement", "proof"):
        problems.append("phase_flag must be 'auto', 'statement' or 'proof'")
    fc = cfg["fs_calibration"]
    if not (fc == "auto" or (isinstance(fc, (int, float)) and fc > 0)):
        problems.append("fs_calibration must be 'auto' or a positive number")
    if cfg["fs_normalization"] not in ("kahler", "round"):
        problems.append("fs_normalization must be 'kahler' or 'round'")
    if cfg["method"] not in ("auto", "modes", "eigh"):
        problems.append("method must be 'auto', 'modes' or 'eigh'")
    if not isinstance(cfg["t"], (int, float)) or cfg["t"] == 0:
        problems.append("t must be a nonzero number")
    if cfg["rotation_seed"] is not None and not isinstance(cfg["rotation_seed"], int):
        problems.append("rotation_seed must be an integer or null")

    # perturbation and symbol
    pert = cfg["perturbation"]
    if isinstance(pert, str):
        if pert != "none" and pert not in families.PERTURBATIONS:
            problems.append(f"perturbation must be 'none', one of {sorted(families.PERTURBATIONS)} or a term table")
        elif pert != "none" and d != 2:
            problems.append("named perturbations are defined for d = 2")
    elif isinstance(pert, dict):
        kind = pert.get("kind", "real")
        if kind not in (REAL, COMPLEX):
            problems.append("perturbation.kind must be 'real' or 'complex'")
        terms = _terms_from_records(pert.get("terms"), d, problems, "perturbation")
        if terms and kind in (REAL, COMPLEX):
            p = PhasePolynomial(kind, d, terms)
            if p.degree() > 2:
                problems.append("perturbation must have degree <= 2")
            if not p.is_real(tol=1e-12 * max(p.coefficient_scale(), 1e-300)):
                problems.append("perturbation must be real-valued")
    else:
        problems.append("perturbation must be 'none', a name or an object")
    sym = cfg["symbol"]
    if sym is not None:
        if isinstance(sym, str):
            if sym not in ("height", "height_quadratic"):
                problems.append("symbol must be 'height', 'height_quadratic' or a coefficient table")
        elif isinstance(sym, dict):
            sd = sym.get("d", d)
            if sd != d:
                problems.append("symbol.d must match d")
            terms = _terms_from_records(sym.get("terms"), d, problems, "symbol")
            k = sym.get("k")
            if terms:
                try:
                    InvariantSymbol(d, k if isinstance(k, int) else -1, terms, sym.get("isotropic_order", 0))
                except (ValueError, TypeError) as e:
                    problems.append(f"symbol: {e}")
        else:
            problems.append("symbol must be a name or an object")
    if cfg["mode"] == "compare" and sym is None and pert == "none":
        problems.append("compare needs a symbol or a perturbation")
    if cfg["mode"] == "crossmodel" and pert == "none":
        problems.append("crossmodel needs a perturbation")
    if cfg["mode"] == "predict" and sym is None and pert == "none":
        problems.append("predict needs a symbol or a perturbation")
    if problems:
        raise ConfigError("invalid configuration: " + "; ".join(problems))
    return cfg


def perturbation_of(cfg) -> Optional[PhasePolynomial]:
    p = cfg["perturbation"]
    if p == "none":
        return None
    if isinstance(p, str):
        return families.PERTURBATIONS[p]()
    terms = _terms_from_records(p["terms"], cfg["d"], [], "perturbation")
    return PhasePolynomial(p.get("kind", REAL), cfg["d"], terms)


def symbol_of(cfg) -> Optional[InvariantSymbol]:
    s = cfg["symbol"]
    if s is None:
        return None
    if s == "height":
        H = families.height(cfg["d"])
    elif s == "height_quadratic":
        H = families.height_quadratic(d=cfg["d"])
    else:
        terms = _terms_from_records(s["terms"], cfg["d"], [], "symbol")
        H = InvariantSymbol(cfg["d"], s["k"], terms, s.get("isotropic_order", 0))
    if cfg["rotation_seed"] is not None:
        H = families.rotated(H, cfg["rotation_seed"])
    return H


def lambda_grid(cfg) -> np.ndarray:
    g = cfg["lambda_grid"]
    a, b, n = float(g["start"]), float(g["stop"]), int(g["num"])
    if g["spacing"] == "log":
        return np.geomspace(a, b, n)
    if g["spacing"] == "linear":
        return np.linspace(a, b, n)
    return np.linspace(math.sqrt(a), math.sqrt(b), n) ** 2


# ---------------------------------------------------------------------------
# output


def _clean(obj):
    """Make an object JSON-safe and deterministic."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _clean(obj.real), "im": _clean(obj.imag)}
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


TRACE_HEADER = ["k", "lambda", "re", "im", "abs", "arg", "tail_bound"]
SPECTRUM_HEADER = ["d", "N", "index", "eigenvalue"]


# ---------------------------------------------------------------------------
# runners


def _criterion(name, passed, measured, threshold):
    return {"name": name, "passed": bool(passed), "measured": measured, "threshold": threshold}


def _crit_search(H, cfg):
    return find_critical_points(H, seed=cfg["seed"], fs_normalization=cfg["fs_normalization"])


def _fs_factor(cfg, H, crits, cal):
    if cfg["fs_calibration"] == "auto":
        c = pl.calibrate_fs(H, crits, t=cfg["t"])
        cal["fs"] = c
        return c["factor"]
    cal["fs"] = {"factor": float(cfg["fs_calibration"]), "source": "config"}
    return float(cfg["fs_calibration"])


def _phase_flag(cfg, window, cal):
    if cfg["phase_flag"] == "auto":
        c = pl.calibrate_phase_flag(window)
        cal["phase"] = c
        return c["phase_flag"]
    cal["phase"] = {"phase_flag": cfg["phase_flag"], "source": "config"}
    return cfg["phase_flag"]


def run(cfg: Dict[str, Any], out_dir: str, timer: Optional[pl.StageTimer] = None) -> Dict[str, Any]:
    """Run one validated experiment and write its outputs. Returns the report."""
    timer = timer or pl.StageTimer()
    mode = cfg["mode"]
    files: Dict[str, str] = {}
    results: Dict[str, Any] = {}
    criteria: List[dict] = []
    cal: Dict[str, Any] = {}
    window = GaussianWindow(cfg["window_width"])
    q = perturbation_of(cfg)
    H = symbol_of(cfg)
    d = cfg["d"]

    if mode == "spectrum":
        with timer("spectrum"):
            rows = pl.spectrum_rows(q, d, cfg["N_max"], cfg["method"], cfg["threads"])
        files["spectrum.csv"] = csv_text(SPECTRUM_HEADER, rows)
        results["count"] = len(rows)

    elif mode == "trace":
        lam = lambda_grid(cfg)
        n_max = cfg["N_max"]
        B = None if q is None else average_operator(make_order1_perturbation(q), n_max)
        src = LevelSpectrumSource(B, d, n_max, cfg["method"], label="none" if q is None else "quadratic")
        with timer("transform"):
            T = windowed_transform(src, cfg["k"], window, lam)
        files["trace.csv"] = csv_text(TRACE_HEADER, T.rows())
        results["max_tail_bound"] = float(np.max(T.tail_bound))
        results["meta"] = T.meta

    elif mode == "predict":
        if H is None:
            H = families.orbit_symbol(q)
        with timer("critical_points"):
            crits = _crit_search(H, cfg)
        flag = _phase_flag(cfg, window, cal)
        pred = singularity_prediction(crits, cfg["k"], d, phase_flag=flag)
        results["critical_points"] = pl.crit_table(crits)
        results["prediction"] = pred.to_dict()
        results["modulus_identity_max_error"] = max(
            abs(t.gamma.__abs__() - (math.pi * abs(cfg["k"])) ** (-(d - 1)) * c.hess_det ** -0.5)
            for t, c in zip(pred.terms, crits))
        files["predict.json"] = json_text(results)

    elif mode == "compare":
        if H is not None:
            Ns = cfg["N_list"] or [256, 512, 1024, 2048, 4096]
            with timer("toeplitz_traces"):
                crits = _crit_search(H, cfg)
                _fs_factor(cfg, H, crits, cal)
                r = pl.tr_comparison(H, Ns, cfg["t"], cfg["seed"], cal["fs"])
            results["block_trace"] = r
            files["compare_block_trace.csv"] = csv_text(
                ["N", "measured_re", "measured_im", "predicted_re", "predicted_im", "rel_error"],
                [[x["N"], x["measured_re"], x["measured_im"], x["predicted_re"], x["predicted_im"], x["rel_error"]]
                 for x in r["rows"]])
            criteria.append(_criterion("block_trace_slope", -0.75 <= r["slope"] <= -0.3, r["slope"], [-0.75, -0.3]))
            criteria.append(_criterion("block_trace_final_error", r["rows"][-1]["rel_error"] < 0.15,
                                       r["rows"][-1]["rel_error"], 0.15))
        if q is not None:
            lam = lambda_grid(cfg)
            H1 = families.orbit_symbol(q)
            with timer("calibration"):
                c1 = _crit_search(H1, cfg)
                fs = _fs_factor(cfg, H1, c1, cal) if "fs" not in cal else cal["fs"]["factor"]
                flag = _phase_flag(cfg, window, cal)
            with timer("singularity"):
                s = pl.singularity_comparison(q, cfg["N_max"], lam, cfg["k"], window, cfg["seed"], fs, flag)
            T = s.pop("transform")
            P = s.pop("predicted")
            results["singularity"] = s
            files["compare_singularity.csv"] = csv_text(
                ["lambda", "measured_re", "measured_im", "predicted_re", "predicted_im", "tail_bound"],
                [[float(l), v.real, v.imag, p.real, p.imag, float(tb)]
                 for l, v, p, tb in zip(T.lambda_grid, T.values, P, T.tail_bound)])
            criteria.append(_criterion("envelope_error", s["envelope_rel_error"] < 0.15, s["envelope_rel_error"], 0.15))
            criteria.append(_criterion("beat_frequency_error", s["beat_rel_error"] < 0.02, s["beat_rel_error"], 0.02))

    elif mode == "equiv":
        lam = lambda_grid(cfg)
        rows = []
        checks = []
        with timer("equiv"):
            for r in cfg["r"]:
                for a in cfg["a"]:
                    e = pl.equiv_check(float(r), float(a), lam, k0=cfg["k0"], d=d, window=window)
                    checks.append(e)
                    rows.extend([float(r), float(a), l, m, er] for l, m, er in
                                zip(e["lambda"], e["modulus_times_lambda_r"], e["errors"]))
                    tag = f"r={r},a={a}"
                    criteria.append(_criterion(f"modulus_{tag}", e["final_modulus_error"] < 0.1,
                                               e["final_modulus_error"], 0.1))
                    if "slope" in e:
                        criteria.append(_criterion(f"rate_{tag}", e["slope"] <= -0.35, e["slope"], -0.35))
                    if a != 0:
                        sf = e["sign_calibration"]["sign_flag"]
                        criteria.append(_criterion(f"unique_sign_{tag}", sf in (1, -1), sf, "exactly one"))
        flags = sorted({c["sign_calibration"]["sign_flag"] for c in checks if c["a"] != 0} - {None})
        cal["sign"] = {"sign_flag": flags[0] if len(flags) == 1 else flags, "source": cfg["sign_flag"]}
        if cfg["sign_flag"] != "auto":
            cal["sign"]["override"] = cfg["sign_flag"]
        results["checks"] = checks
        files["equiv.csv"] = csv_text(["r", "a", "lambda", "modulus_times_lambda_r", "error"], rows)

    elif mode == "crossmodel":
        Ns = cfg["N_list"] or [64, 128, 256, 512, 1024]
        with timer("crossmodel"):
            r = pl.crossmodel_check(q, Ns)
        results["crossmodel"] = r
        files["crossmodel.csv"] = csv_text(["N", "deviation"], list(zip(r["Ns"], r["deviation"])))
        criteria.append(_criterion("deviation_slope", r["slope"] <= -0.4, r["slope"], -0.4))

    report = {
        "mode": mode,
        "version": __version__,
        "config": {k: v for k, v in cfg.items()},
        "calibration": cal,
        "results": results,
        "criteria": criteria,
        "passed": all(c["passed"] for c in criteria),
        "kernel_backend": kernels.BACKEND,
        "outputs": sorted(list(files) + ["report.json", "timings.json"]),
    }
    files["report.json"] = json_text(report)
    # timings vary between runs and live outside the reproducible report
    files["timings.json"] = json_text({"stages_seconds": timer.stages})
    for name, text in files.items():
        atomic_write(os.path.join(out_dir, name), text)
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isotrace", description="Trace asymptotics experiments for perturbed isotropic oscillators")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", metavar="PATH", help="JSON experiment file (defaults are used when omitted)")
    p.add_argument("--out", metavar="DIR", default=None, help="output directory (default: config 'out' or ./out)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for level maps")
    p.add_argument("--seed", type=int, default=None, help="seed for the critical-point multistart")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw: Dict[str, Any] = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as f:
                    raw = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read config: {e}") from e
        if args.threads is not None:
            raw["threads"] = args.threads
        if args.seed is not None:
            raw["seed"] = args.seed
        out = args.out or (raw.get("out") if isinstance(raw, dict) else None) or "out"
        cfg = validate_config(raw, args.mode)
        report = run(cfg, out)
    except ConfigError as e:
        print(json.dumps({"error": "config", "message": str(e)}), file=sys.stderr)
        return EXIT_ERROR
    except (IsotraceError, ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return EXIT_ERROR
    for c in report["criteria"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: measured={c['measured']} threshold={c['threshold']}")
    print(f"wrote {len(report['outputs'])} files to {out}")
    return EXIT_OK if report["passed"] else EXIT_CRITERION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
