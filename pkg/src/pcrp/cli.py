"""``pcrp`` command-line entry point.

Sub-commands:

    prior-profile  per-table seating probabilities for a population vector
    validate       growth-law checks of the Powered CRP, CSV + summary
    fit            collapsed Gibbs clustering of a point CSV
    score          agreement metrics between two partition CSVs
    gen            write a synthetic dataset

Any flag may also come from a JSON file given with ``--config``; keys are
the flag names without dashes (``psi_scale``, ``out_dir`` ...). Flags on the
command line win over the file.

Exit codes: 0 success, 1 a tolerance check failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from . import datasets
from .exceptions import InputError, NumericalError, ParameterDomainError
from .igmm import NIWParams, StoppingRule, fit
from .metrics import score_all
from .prior_process import ProcessSpec, predictive_probs
from .proposition_lab import CSV_COLUMNS, DEFAULT_R_VALUES, validate_r

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

class UsageError(Exception):
    pass


# -- argument parsing ------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _count(text: str) -> int:
    # accepts 1e5 as well as 100000
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


# built-in defaults; the config file and then explicit flags override them
DEFAULTS = {
    "process": "powered", "alpha": 1.0, "beta": 0.5, "r": None, "n": 100_000, "runs": 100,
    "seed": 0, "out_dir": ".", "data": None, "generator": None, "param": [],
    "populations": "1,2,3,5,8,13", "mu0": None, "kappa0": 0.01, "psi_scale": 1.0, "nu0": None,
    "max_sweeps": 1000, "stability_tol": 1e-4, "window": 20, "n_init": 3, "out": None,
    "partition_a": None, "partition_b": None,
}


def _add_process_flags(p):
    p.add_argument("--process", choices=["crp", "py", "uniform", "powered"])
    p.add_argument("--alpha", type=float, help="concentration (default 1)")
    p.add_argument("--beta", type=float, help="Pitman-Yor discount (default 0.5)")


def _add_common(p):
    p.add_argument("--config", help="JSON file of flag values")
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    sup = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="pcrp", description="Powered Chinese Restaurant Process toolkit",
                                     argument_default=sup)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prior-profile", argument_default=sup,
                       help="seating probabilities of fixed populations for several r")
    _add_common(p)
    _add_process_flags(p)
    p.add_argument("--r", type=_float_list, help="powers, comma-separated (default 0,0.5,1,2)")
    p.add_argument("--populations", help="table populations, comma-separated")
    p.add_argument("--out-dir", dest="out_dir")

    p = sub.add_parser("validate", argument_default=sup,
                       help="run the proposition checks and write validate.csv")
    _add_common(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--r", type=_float_list, help="powers, comma-separated")
    p.add_argument("--n", type=_count, help="customers per run (default 1e5)")
    p.add_argument("--runs", type=int, help="independent runs (default 100)")
    p.add_argument("--out-dir", dest="out_dir")

    p = sub.add_parser("fit", argument_default=sup, help="cluster a point CSV with collapsed Gibbs")
    _add_common(p)
    _add_process_flags(p)
    p.add_argument("--r", type=_float_list, help="power of the Powered CRP (default 1)")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="point CSV (id,x0,...[,label])")
    src.add_argument("--generator", choices=sorted(datasets.GENERATORS),
                     help="fit a freshly generated dataset instead")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="generator parameter")
    p.add_argument("--mu0", type=_float_list, help="prior mean, comma-separated (default data mean)")
    p.add_argument("--kappa0", type=float)
    p.add_argument("--psi-scale", dest="psi_scale", type=float,
                   help="prior scale matrix = psi_scale * diag(data variance)")
    p.add_argument("--nu0", type=float, help="prior degrees of freedom (default D + 2)")
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int)
    p.add_argument("--stability-tol", dest="stability_tol", type=float)
    p.add_argument("--window", type=int, help="stopping-rule window in sweeps")
    p.add_argument("--n-init", dest="n_init", type=int, help="independent chains (default 3)")
    p.add_argument("--out-dir", dest="out_dir")

    p = sub.add_parser("score", argument_default=sup, help="compare two partition CSVs")
    _add_common(p)
    p.add_argument("partition_a")
    p.add_argument("partition_b")
    p.add_argument("--out", help="write the JSON here instead of stdout")

    p = sub.add_parser("gen", argument_default=sup, help="write a synthetic dataset CSV")
    _add_common(p)
    p.add_argument("generator", choices=sorted(datasets.GENERATORS))
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="generator parameter")
    p.add_argument("--out", help="output CSV (default <out-dir>/<generator>.csv)")
    p.add_argument("--out-dir", dest="out_dir")
    return parser


def resolve_config(argv=None) -> dict:
    """Merge built-in defaults, the optional JSON config and explicit flags."""
    ns = vars(build_parser().parse_args(argv))
    cfg = dict(DEFAULTS)
    path = ns.pop("config", None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(from_file, dict):
            raise UsageError(f"config {path} must hold a JSON object")
        unknown = sorted(set(from_file) - set(DEFAULTS) - {"verbose"})
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for key in ("r", "mu0"):
            if isinstance(from_file.get(key), (int, float)):
                from_file[key] = [from_file[key]]
            elif isinstance(from_file.get(key), str):
                try:
                    from_file[key] = _float_list(from_file[key])
                except argparse.ArgumentTypeError as exc:
                    raise UsageError(f"config key {key!r}: {exc}") from None
        cfg.update(from_file)
    cfg.update(ns)
    return _coerce(cfg)


_FLOAT_KEYS = ("alpha", "beta", "kappa0", "psi_scale", "stability_tol")
_INT_KEYS = ("runs", "seed", "max_sweeps", "window", "n_init")


def _coerce(cfg: dict) -> dict:
    # config-file values arrive untyped; reject bad ones before any work starts
    try:
        for key in _FLOAT_KEYS:
            cfg[key] = float(cfg[key])
        for key in _INT_KEYS:
            cfg[key] = int(cfg[key])
        cfg["n"] = _count(cfg["n"])
        if cfg["nu0"] is not None:
            cfg["nu0"] = float(cfg["nu0"])
        for key in ("r", "mu0"):
            if cfg[key] is not None:
                cfg[key] = [float(v) for v in cfg[key]]
    except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(f"bad configuration value: {exc}") from None
    return cfg


# -- shared builders ---------------------------------------------------------

def make_spec(cfg: dict, r: float | None = None) -> ProcessSpec:
    kind = cfg["process"]
    alpha = float(cfg["alpha"])
    if kind == "crp":
        return ProcessSpec.crp(alpha)
    if kind == "py":
        return ProcessSpec.pitman_yor(alpha, float(cfg["beta"]))
    if kind == "uniform":
        return ProcessSpec.uniform(alpha)
    if kind == "powered":
        return ProcessSpec.powered(1.0 if r is None else float(r), alpha)
    raise UsageError(f"unknown process {kind!r}")


def _single_r(cfg: dict) -> float | None:
    rs = cfg.get("r")
    if rs is None:
        return None
    if len(rs) != 1:
        raise UsageError("fit takes a single --r value")
    return rs[0]


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = str(item).partition("=")
        if not sep or not key:
            raise UsageError(f"generator parameter must look like key=value, got {item!r}")
        try:
            out[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            out[key.strip()] = value
    return out


def _generate(name: str, cfg: dict) -> datasets.LabeledDataset:
    params = _parse_params(cfg.get("param"))
    params.setdefault("seed", cfg["seed"])
    try:
        return datasets.GENERATORS[name](**params)
    except TypeError as exc:
        raise UsageError(f"bad parameters for generator {name!r}: {exc}") from None


def _out_dir(cfg: dict) -> str:
    path = cfg["out_dir"]
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(obj, path: str | None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _num(x) -> str:
    x = float(x)
    return "" if math.isnan(x) else repr(x)


# -- commands ----------------------------------------------------------------

def cmd_prior_profile(cfg: dict) -> int:
    try:
        pops = [int(p) for p in str(cfg["populations"]).split(",") if p.strip()]
    except ValueError:
        raise UsageError("--populations must be comma-separated integers") from None
    if not pops or min(pops) < 1:
        raise UsageError("--populations needs at least one positive count")
    if cfg["process"] == "powered":
        specs = [make_spec(cfg, r) for r in (cfg["r"] or [0.0, 0.5, 1.0, 2.0])]
    else:
        specs = [make_spec(cfg)]
    rows = []
    for spec in specs:
        probs = predictive_probs(pops, spec)
        existing = probs[:-1] / probs[:-1].sum()
        for k, n_k in enumerate(pops):
            rows.append((spec.label(), spec.power, k, n_k, probs[k], existing[k]))
        rows.append((spec.label(), spec.power, "new", 0, probs[-1], ""))
    path = os.path.join(_out_dir(cfg), "prior_profile.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("process", "r", "table", "population", "probability", "probability_existing"))
        for row in rows:
            w.writerow([_num(v) if isinstance(v, float) else v for v in row])
    print(f"wrote {path}")
    return EXIT_OK


def cmd_validate(cfg: dict) -> int:
    rs = cfg["r"] or list(DEFAULT_R_VALUES)
    n, runs = int(cfg["n"]), int(cfg["runs"])
    if n < 100:
        raise UsageError("--n must be at least 100")
    if runs < 1:
        raise UsageError("--runs must be at least 1")
    for r in rs:
        ProcessSpec.powered(r, float(cfg["alpha"]))
    results = [validate_r(r, n, runs, int(cfg["seed"]), float(cfg["alpha"])) for r in rs]
    out = _out_dir(cfg)
    with open(os.path.join(out, "validate.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for res in results:
            for row in res.rows():
                w.writerow([_num(row[0]), row[1], *(_num(v) for v in row[2:])])
    checks = [c for res in results for c in res.checks]
    summary = {
        "n": n, "runs": runs, "seed": int(cfg["seed"]), "alpha": float(cfg["alpha"]),
        "statistical_checks": "skipped (runs=1)" if runs < 2 else "evaluated",
        "checks": [{"name": c.name, "r": c.r, "value": float(c.value), "target": c.target,
                    "passed": c.passed} for c in checks],
    }
    _write_json(summary, os.path.join(out, "validate_summary.json"))
    for c in checks:
        status = "SKIP" if c.passed is None else ("PASS" if c.passed else "FAIL")
        print(f"{status}  r={c.r:<4g} {c.name:<24} {c.value:.4g}  (target {c.target})")
    if runs < 2:
        print("runs=1: standard errors undefined, statistical checks skipped")
    return EXIT_FAILED if any(c.passed is False for c in checks) else EXIT_OK


def _prior_for(points: np.ndarray, cfg: dict) -> NIWParams:
    mu0 = cfg.get("mu0")
    if mu0 is not None and len(mu0) != points.shape[1]:
        raise UsageError(f"--mu0 has {len(mu0)} entries, data has {points.shape[1]} columns")
    return NIWParams.default_for(points, kappa0=float(cfg["kappa0"]), nu0=cfg.get("nu0"),
                                 psi_scale=float(cfg["psi_scale"]), mu0=mu0)


def cmd_fit(cfg: dict) -> int:
    spec = make_spec(cfg, _single_r(cfg))
    if cfg.get("data"):
        ds = datasets.load_csv(cfg["data"])
    elif cfg.get("generator"):
        ds = _generate(cfg["generator"], cfg)
    else:
        raise UsageError("fit needs --data or --generator")
    prior = _prior_for(ds.points, cfg)
    stop = StoppingRule(window=int(cfg["window"]), tol=float(cfg["stability_tol"]),
                        max_sweeps=int(cfg["max_sweeps"]))
    n_init = int(cfg["n_init"])
    if n_init < 1:
        raise UsageError("--n-init must be >= 1")
    res = fit(ds.points, prior, spec, stop, seed=int(cfg["seed"]), n_init=n_init)
    out = _out_dir(cfg)
    with open(os.path.join(out, "partition.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("point_id", "label"))
        for i, lab in enumerate(res.partition.labels.tolist()):
            w.writerow((i, lab))
    with open(os.path.join(out, "trace.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iteration", "log_likelihood", "K"))
        for it, ll, k in res.trace_rows():
            w.writerow((it, repr(ll), k))
    metrics_path = os.path.join(out, "metrics.json")
    if ds.labels is not None:
        scores = score_all(ds.labels, res.partition.labels)
        scores.update(log_joint=res.log_joint, converged=res.converged, sweeps=int(res.iterations.size),
                      process=spec.label())
        _write_json(scores, metrics_path)
    elif os.path.exists(metrics_path):
        os.remove(metrics_path)    # a stale file would pass for this run's scores
    print(f"{spec.label()}: K={res.n_clusters} log_joint={res.log_joint:.4f} "
          f"sweeps={res.iterations.size} converged={res.converged}")
    return EXIT_OK


def _read_partition(path: str) -> np.ndarray:
    if not os.path.exists(path):
        raise InputError(f"{path}: no such file")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    if header[-1] != "label":
        raise InputError(f"{path}: line 1: last column must be 'label'")
    ids, labels = [], []
    for line_no, row in enumerate(rows[1:], start=2):
        try:
            ids.append(int(row[0]))
            labels.append(int(row[-1]))
        except (ValueError, IndexError):
            raise InputError(f"{path}: line {line_no}: expected integer id and label") from None
    ids_arr = np.asarray(ids)
    if np.unique(ids_arr).size != ids_arr.size:
        raise InputError(f"{path}: duplicate point ids")
    return np.asarray(labels, dtype=np.int64)[np.argsort(ids_arr, kind="stable")]


def cmd_score(cfg: dict) -> int:
    a = _read_partition(cfg["partition_a"])
    b = _read_partition(cfg["partition_b"])
    if a.size != b.size:
        raise InputError(f"partitions have different lengths ({a.size} vs {b.size})")
    _write_json(score_all(a, b), cfg.get("out"))
    return EXIT_OK


def cmd_gen(cfg: dict) -> int:
    ds = _generate(cfg["generator"], cfg)
    path = cfg.get("out") or os.path.join(_out_dir(cfg), f"{cfg['generator']}.csv")
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    datasets.save_csv(ds, path)
    print(f"wrote {path} ({ds.n} points, {ds.n_clusters} clusters)")
    return EXIT_OK


COMMANDS = {
    "prior-profile": cmd_prior_profile,
    "validate": cmd_validate,
    "fit": cmd_fit,
    "score": cmd_score,
    "gen": cmd_gen,
}


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
    except UsageError as exc:
        print(f"pcrp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:      # argparse already printed the message
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if cfg.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[cfg["command"]](cfg)
    except (UsageError, InputError, ParameterDomainError) as exc:
        print(f"pcrp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"pcrp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
