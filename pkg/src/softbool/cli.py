"""Command line interface: ``softbool predict | sim | fit | validate``.

Exit codes: 0 success, 1 failed validation, 2 invalid input, 3 refused fit.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .branching import BranchingParams, progeny_batch
from .estimate import (CHUNK, FitRefused, SurvivalCurve, default_workers,
                       fit_tail, run_cluster_experiment, run_degree_experiment,
                       run_powerful_event_experiment, run_progeny_experiment)
from .graph import DEFAULT_BUDGET
from .model import ModelParams, predict

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DEFAULT_SEED = 20240601
STATISTICS = ("diameter", "size", "degree", "event", "branching")
EXIT_INVALID = 2
EXIT_REFUSED = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything needed to reproduce one simulation run."""

    beta: float = 0.05
    gamma: float = 0.5
    alpha: float = 0.0
    delta: float = 2.0
    dim: int = 1
    box_side: float = 4.0e4
    trials: int = 10**5
    seed: int = DEFAULT_SEED
    statistic: str = "diameter"
    window: Optional[list] = None
    origin_mark: object = "random"
    margin: Optional[float] = None
    budget: int = DEFAULT_BUDGET
    workers: int = 0
    method: str = "LogLogOLS"
    tolerance: float = 0.1
    cap: int = 10**6
    ms: Optional[list] = None
    out_dir: str = "run"
    per_trial_csv: bool = True

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.beta, self.gamma, self.alpha, self.delta, self.dim)

    @property
    def effective_margin(self) -> float:
        return self.box_side / 8.0 if self.margin is None else self.margin

    @property
    def effective_workers(self) -> int:
        return self.workers if self.workers > 0 else default_workers()

    def validate(self) -> "RunConfig":
        """Check every field before any sampling starts."""
        try:
            self.params
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.statistic not in STATISTICS:
            raise ConfigError(f"statistic must be one of {STATISTICS}")
        if self.trials < 0:
            raise ConfigError("trials must be nonnegative")
        if not self.box_side > 0:
            raise ConfigError("box_side must be positive")
        if not 0 <= self.effective_margin < self.box_side / 2:
            raise ConfigError("margin must lie in [0, box_side/2)")
        if self.budget < 1 or self.cap < 1:
            raise ConfigError("budget and cap must be positive")
        if self.origin_mark != "random":
            try:
                u = float(self.origin_mark)
            except (TypeError, ValueError):
                raise ConfigError("origin_mark must be 'random' or a number in (0, 1)") from None
            if not 0 < u < 1:
                raise ConfigError("origin_mark must lie in (0, 1)")
            self.origin_mark = u
        if self.window is not None:
            if len(self.window) != 2 or not 0 < self.window[0] < self.window[1]:
                raise ConfigError("window must be [lo, hi] with 0 < lo < hi")
        if self.method not in ("LogLogOLS", "Hill"):
            raise ConfigError("method must be LogLogOLS or Hill")
        if self.ms is not None and (len(self.ms) < 2 or min(self.ms) <= 1):
            raise ConfigError("ms needs at least two values above 1")
        if self.statistic == "branching":
            try:
                BranchingParams(self.beta, self.gamma, self.delta, self.dim, self.cap)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        return self


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name, value):
    if value is None:
        return None
    if name in ("dim", "trials", "seed", "budget", "workers", "cap"):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{name} must be an integer")
        return value
    if name in ("beta", "gamma", "alpha", "delta", "box_side", "margin", "tolerance"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    if name in ("window", "ms"):
        return [float(v) for v in value]
    if name == "per_trial_csv":
        return bool(value)
    if name == "origin_mark":
        return value if value == "random" else float(value)
    return str(value)


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    out = {}
    for k, v in raw.items():
        if k not in FIELDS:
            raise ConfigError(f"unknown config key {k!r}")
        out[k] = _coerce(k, v)
    return out


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot write {v!r}")


def dump_config(cfg: RunConfig) -> str:
    """Flat TOML with round-trip floats; unset optional fields are omitted."""
    lines = []
    for name in FIELDS:
        v = getattr(cfg, name)
        if v is not None:
            lines.append(f"{name} = {_toml_value(v)}")
    return "\n".join(lines) + "\n"


# -- output helpers -----------------------------------------------------------------


def _json(obj) -> str:
    def default(o):
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o))

    return json.dumps(obj, indent=2, default=default, allow_nan=True)


def _fail(msg: str, code: int) -> int:
    print(_json({"error": msg, "exit_code": code}), file=sys.stderr)
    return code


# -- predict ---------------------------------------------------------------------


def cmd_predict(args) -> int:
    try:
        p = ModelParams(args.beta, args.gamma, args.alpha, args.delta, args.dim)
    except ValueError as e:
        return _fail(str(e), EXIT_INVALID)
    print(_json(predict(p).to_dict()))
    return 0


# -- sim ---------------------------------------------------------------------------


def _target(cfg: RunConfig) -> Optional[float]:
    pred = predict(cfg.params)
    if cfg.statistic == "diameter":
        return pred.diameter_exponent
    if cfg.statistic == "size":
        return pred.size_exponent
    if cfg.statistic == "degree":
        return 1.0 / cfg.gamma if cfg.gamma > 0 else None
    if cfg.statistic == "branching":
        return 1.0 / cfg.gamma - 1.0 if cfg.gamma > 0 else None
    return (1.0 - cfg.gamma) * pred.zeta if pred.zeta else None


def _summary(cfg, seed_from_flag, fit, extra):
    target = _target(cfg)
    verdict = None
    if fit is not None and target is not None:
        verdict = "PASS" if abs(fit["exponent"] - target) <= cfg.tolerance else "FAIL"
    return {
        "statistic": cfg.statistic,
        "seed": cfg.seed,
        "seed_source": "flag or config" if seed_from_flag else "default",
        "config": dataclasses.asdict(cfg),
        "prediction": predict(cfg.params).to_dict(),
        "target_exponent": target,
        "estimate": fit,
        "tolerance": cfg.tolerance,
        "verdict": verdict,
        **extra,
    }


def _write_branching_csv(cfg: RunConfig, path: Path) -> None:
    bp = BranchingParams(cfg.beta, cfg.gamma, cfg.delta, cfg.dim, cfg.cap)
    rm = -1.0 if cfg.origin_mark == "random" else float(cfg.origin_mark)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "progeny", "capped"])
        for s in range(0, cfg.trials, CHUNK):
            n = min(CHUNK, cfg.trials - s)
            out, capped = progeny_batch(cfg.seed, s, n, bp, rm)
            w.writerows(zip(range(s, s + n), out.tolist(), capped.astype(int).tolist()))


def _curve_for(cfg: RunConfig) -> SurvivalCurve:
    w = cfg.effective_workers
    if cfg.statistic in ("diameter", "size"):
        pred = predict(cfg.params)
        need = pred.diameter_exponent if cfg.statistic == "diameter" else pred.size_exponent
        if need is None and cfg.beta > 0:
            raise ConfigError(f"no {cfg.statistic} exponent is predicted for these parameters")
        d, s = run_cluster_experiment(cfg.params, cfg.box_side, cfg.trials, cfg.seed,
                                      cfg.origin_mark, cfg.effective_margin, cfg.budget, w)
        return d if cfg.statistic == "diameter" else s
    if cfg.statistic == "degree":
        return run_degree_experiment(cfg.params, cfg.box_side, cfg.trials, cfg.seed,
                                     cfg.origin_mark, w)
    bp = BranchingParams(cfg.beta, cfg.gamma, cfg.delta, cfg.dim, cfg.cap)
    return run_progeny_experiment(bp, cfg.trials, cfg.seed, cfg.origin_mark, w)


def _sim_event(cfg: RunConfig, seed_from_flag: bool) -> int:
    ms = cfg.ms or [100.0 * 2.0 ** (k / 2.0) for k in range(14)]
    try:
        est = run_powerful_event_experiment(cfg.params, cfg.box_side, cfg.trials, ms, cfg.seed,
                                            cfg.origin_mark, cfg.effective_workers)
    except ValueError as e:
        return _fail(str(e), EXIT_INVALID)
    if est.fit is None:
        print(_json(_summary(cfg, seed_from_flag, None, {"refused": "no events at some m"})))
        return EXIT_REFUSED
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lo, hi = est.ci
    with open(out / "event.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "frequency", "ci_low", "ci_high", "hits"])
        for row in zip(est.ms, est.frequency, lo, hi, est.hits):
            w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])),
                        repr(float(row[3])), int(row[4])])
    fit = est.fit.to_dict()
    (out / "fit.json").write_text(_json(fit) + "\n")
    summary = _summary(cfg, seed_from_flag, fit, {"files": ["event.csv", "fit.json"], "trials": cfg.trials})
    (out / "summary.json").write_text(_json(summary) + "\n")
    print(_json(summary))
    return 0


def cmd_sim(args) -> int:
    try:
        cfg, seed_from_flag = config_from_args(args)
    except ConfigError as e:
        return _fail(str(e), EXIT_INVALID)
    if cfg.statistic == "event":
        return _sim_event(cfg, seed_from_flag)
    try:
        curve = _curve_for(cfg)
    except ValueError as e:
        return _fail(str(e), EXIT_INVALID)
    try:
        fit = fit_tail(curve, cfg.window, cfg.method, seed=cfg.seed)
    except FitRefused as e:
        print(_json(_summary(cfg, seed_from_flag, None,
                             {"refused": f"{type(e).__name__}: {e}", "trials": cfg.trials})))
        return EXIT_REFUSED
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curve.to_csv(out / "curve.csv")
    curve.samples_to_csv(out / "samples.csv")
    (out / "fit.json").write_text(_json(fit.to_dict()) + "\n")
    (out / "config.toml").write_text(dump_config(cfg))
    files = ["curve.csv", "samples.csv", "fit.json", "config.toml"]
    if cfg.statistic == "branching" and cfg.per_trial_csv:
        _write_branching_csv(cfg, out / "branching.csv")
        files.append("branching.csv")
    extra = {
        "files": files,
        "trials": curve.trials,
        "safe_max": curve.safe_max,
        "discrete": curve.discrete,
        "censored_fraction": curve.censored_fraction,
        "cross_check": fit.cross_check,
        "run_stats": curve.meta,
    }
    summary = _summary(cfg, seed_from_flag, fit.to_dict(), extra)
    (out / "summary.json").write_text(_json(summary) + "\n")
    print(_json(summary))
    return 0


# -- fit -----------------------------------------------------------------------------

_STAT_NAMES = {"diameter": "DiameterPowD", "size": "ClusterSize", "degree": "Degree",
               "branching": "Progeny"}


def cmd_fit(args) -> int:
    run = Path(args.run)
    try:
        summary = json.loads((run / "summary.json").read_text())
        stat = _STAT_NAMES[summary["statistic"]]
        curve = SurvivalCurve.from_samples_csv(run / "samples.csv", stat, summary["trials"],
                                               safe_max=float(summary["safe_max"]),
                                               discrete=bool(summary["discrete"]))
    except (OSError, KeyError, ValueError) as e:
        return _fail(f"cannot read run directory: {e}", EXIT_INVALID)
    window = args.window or summary["config"].get("window")
    try:
        fit = fit_tail(curve, window, args.method, seed=args.seed)
    except FitRefused as e:
        return _fail(f"{type(e).__name__}: {e}", EXIT_REFUSED)
    except ValueError as e:
        return _fail(str(e), EXIT_INVALID)
    text = _json(fit.to_dict())
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


# -- validate -------------------------------------------------------------------------


def cmd_validate(args) -> int:
    from .validation import run_checks

    results = run_checks(args.level, args.only)
    if args.report:
        Path(args.report).write_text(_json([dataclasses.asdict(r) for r in results]) + "\n")
    failed = [r.check_id for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed" +
          (f"; failed: {', '.join(failed)}" if failed else ""))
    return 1 if failed else 0


# -- argument parsing ------------------------------------------------------------------


def _add_model_flags(p, required: bool):
    p.add_argument("--beta", type=float, required=required)
    p.add_argument("--gamma", type=float, required=required)
    p.add_argument("--alpha", type=float, default=0.0 if required else None)
    p.add_argument("--delta", type=float, required=required)
    p.add_argument("--dim", type=int, required=required)


def _origin(s):
    return s if s == "random" else float(s)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="softbool", description="Soft Boolean model simulations")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="regime and predicted exponents as JSON")
    _add_model_flags(p, True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sim", help="run a Monte Carlo experiment")
    p.add_argument("statistic", choices=STATISTICS)
    p.add_argument("--config", help="flat TOML file; flags override its values")
    _add_model_flags(p, False)
    p.add_argument("--box-side", dest="box_side", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--window", type=float, nargs=2)
    p.add_argument("--origin-mark", dest="origin_mark", type=_origin)
    p.add_argument("--margin", type=float)
    p.add_argument("--budget", type=int)
    p.add_argument("--workers", type=int, help="0 = available parallelism")
    p.add_argument("--method", choices=("LogLogOLS", "Hill"))
    p.add_argument("--tolerance", type=float)
    p.add_argument("--cap", type=int)
    p.add_argument("--ms", type=float, nargs="+")
    p.add_argument("--out", dest="out_dir")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("fit", help="refit a finished run")
    p.add_argument("run", help="run directory written by 'sim'")
    p.add_argument("--window", type=float, nargs=2)
    p.add_argument("--method", choices=("LogLogOLS", "Hill"), default="LogLogOLS")
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", help="run the oracle and acceptance checks")
    p.add_argument("level", choices=("fast", "full"))
    p.add_argument("--only", nargs="+")
    p.add_argument("--report")
    p.set_defaults(func=cmd_validate)
    return ap


def config_from_args(args) -> tuple:
    """Merge defaults, the config file and flags (flags win)."""
    values = {}
    if args.config:
        try:
            values.update(load_config(args.config))
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"cannot read config: {e}") from None
    for name in FIELDS:
        v = getattr(args, name, None)
        if v is not None and name != "statistic":
            values[name] = _coerce(name, v)
    values["statistic"] = args.statistic
    seed_given = "seed" in values
    return RunConfig(**values).validate(), seed_given


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
