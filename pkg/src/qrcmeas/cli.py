"""Command-line experiment runner.

Subcommands ``narma``, ``csv``, ``sweep``, ``tipc`` and ``baseline`` each
write a self-describing artifact directory::

    features.csv      reservoir features (washout rows dropped)
    predictions.csv   target and prediction on the test window
    metrics.json      scalar results
    capacity.json     TIPC reports (tipc and sweep only)
    config.json       the resolved config; ``--config config.json`` replays it

Every file is written to a temporary name and then renamed into place, and
JSON is emitted with sorted keys, so identical configs give identical bytes.
On failure the exit code is nonzero and a JSON error object goes to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from ._accel import backend
from .readout import RCOND, evaluate, fit, nmse_paper, predict
from .reservoir import MODES, ReservoirConfig, run
from .tasks import NarmaSpec, gen_input, gen_narma, iid_input, load_csv
from .tipc import compute_tipc

TASKS = ("narma2", "narma5", "narma10", "csv")
INPUT_KINDS = ("symmetric", "asymmetric")
ECHO_ONLY_KEYS = ("command", "backend")  # written to config.json, ignored on replay
NOISE_LABELS = {
    "ensemble": "none: exact outcome-averaged evolution",
    "trajectory": "finite-shot sampling noise",
    "baseline": "none: exact evolution without ancillas",
}


# --------------------------------------------------------------------------- #
# Config                                                                      #
# --------------------------------------------------------------------------- #


@dataclass
class TipcOptions:
    length: int = 1000
    washout: int = 100
    inputs: tuple[str, ...] = INPUT_KINDS
    max_degree: int = 3
    max_delay: int = 10
    state_mix: bool = True
    mix_degree: int = 1
    p: float = 0.05
    correction: str = "none"
    mode: str | None = "ensemble"  # None: use the reservoir's mode

    def __post_init__(self):
        self.inputs = tuple(self.inputs)
        bad = [k for k in self.inputs if k not in INPUT_KINDS]
        if bad or not self.inputs:
            raise ValueError(f"tipc inputs must be a non-empty subset of {INPUT_KINDS}")
        if self.length < 2 or not 0 <= self.washout:
            raise ValueError("tipc length must be >= 2 and washout >= 0")
        if self.mode is not None and self.mode not in MODES:
            raise ValueError(f"tipc mode must be one of {MODES} or null")


@dataclass
class ExperimentConfig:
    """Everything a run needs. ``seed`` and ``mode`` live in ``reservoir``.

    ``split`` is (washout, train_end, test_end): rows ``[washout, train_end)``
    train the readout and ``[train_end, test_end)`` test it. ``scales``, if
    set, is searched for the input scale on the last ``validation`` rows of
    the training window before the final fit.
    """

    task: str = "narma2"
    reservoir: ReservoirConfig = field(default_factory=ReservoirConfig)
    length: int = 100
    split: tuple[int, int, int] | None = (10, 80, 100)
    trials: int = 10
    scales: tuple[float, ...] | None = None
    validation: int = 14
    strengths: tuple[float, ...] = tuple(float(s) for s in range(11))
    tipc: TipcOptions = field(default_factory=TipcOptions)
    csv_path: str | None = None
    normalize: bool = False
    rcond: float = RCOND
    ridge: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.strengths = tuple(float(s) for s in self.strengths)
        if any(not 0.0 <= s <= 10.0 for s in self.strengths):
            raise ValueError("strengths must lie in [0, 10]")
        if self.scales is not None:
            self.scales = tuple(float(a) for a in self.scales)
            if not self.scales:
                raise ValueError("scales must be non-empty when given")
        if self.split is not None:
            self.split = tuple(int(i) for i in self.split)
            w, tr, te = self.split
            if not 0 <= w < tr < te:
                raise ValueError(f"invalid split {self.split}")
            if self.task != "csv" and te > self.length:
                raise ValueError(f"split end {te} exceeds length {self.length}")
        elif self.task != "csv":
            raise ValueError("split is required for NARMA tasks")
        if self.task == "csv" and not self.csv_path:
            raise ValueError("task 'csv' needs csv_path")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reservoir"] = self.reservoir.to_dict()
        d["tipc"] = asdict(self.tipc)
        for key in ("split", "scales", "strengths"):
            if d[key] is not None:
                d[key] = list(d[key])
        d["tipc"]["inputs"] = list(d["tipc"]["inputs"])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = {k: v for k, v in data.items() if k not in ECHO_ONLY_KEYS}
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "reservoir" in data:
            data["reservoir"] = ReservoirConfig.from_dict(data["reservoir"])
        if "tipc" in data:
            data["tipc"] = TipcOptions(**data["tipc"])
        return cls(**data)


# --------------------------------------------------------------------------- #
# Output                                                                      #
# --------------------------------------------------------------------------- #


def _fmt(x) -> str:
    return repr(float(x))


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if not isinstance(v, (int, np.integer)) else str(v) for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_artifacts(out_dir: str | Path, files: dict[str, str]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(files):
        write_atomic(out / name, files[name])
        written.append(out / name)
    return written


# --------------------------------------------------------------------------- #
# Experiments                                                                 #
# --------------------------------------------------------------------------- #


def _pool_map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _trial(args):
    u, y, split, rcfg, rcond, ridge = args
    features, _ = run(u, rcfg)
    w, tr, te = split
    model = fit(features.values[w:tr], y[w:tr], rcond=rcond, ridge=ridge, train_range=(w, tr))
    y_hat = predict(model, features.values)
    report = evaluate(y[tr:te], y_hat[tr:te])
    return features.values, y_hat, report


def _summary(values) -> dict:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"mean": mean, "std": std, "band_2sigma": [mean - 2 * std, mean + 2 * std]}


def mean_predictor(y, split) -> dict:
    """Errors of predicting the training-window mean everywhere."""
    w, tr, te = split
    guess = np.full(te - tr, float(np.mean(y[w:tr])))
    rep = evaluate(y[tr:te], guess)
    return {"nmse_paper": rep.nmse, "dtw": rep.dtw}


def tune_scale(u, y, split, rcfg: ReservoirConfig, scales, validation: int, rcond=RCOND, ridge=0.0):
    """Pick the input scale with the lowest error on a holdout inside training.

    The holdout is the last ``validation`` rows of the training window, so
    the test window never influences the choice. Ties keep the earlier scale.
    """
    w, tr, _ = split
    if not 0 < validation < tr - w - 1:
        raise ValueError("validation holdout must leave at least 2 training rows")
    inner = (w, tr - validation, tr)
    errors = {}
    for a in scales:
        _, _, rep = _trial((u, y, inner, rcfg.replace(input_scale=float(a)), rcond, ridge))
        errors[float(a)] = rep.nmse
    best = min(errors, key=lambda a: (errors[a], list(errors).index(a)))
    return best, errors


def _series(cfg: ExperimentConfig):
    """(t, u, y, split, extra metadata) for the configured task."""
    if cfg.task == "csv":
        bundle = load_csv(cfg.csv_path, normalize=cfg.normalize, split=cfg.split)
        split = (bundle.washout, bundle.train_end, bundle.test_end)
        return bundle.t, bundle.u, bundle.y, split, bundle.metadata
    u = gen_input(cfg.length)
    y = gen_narma(u, NarmaSpec.named(cfg.task))
    return np.arange(cfg.length, dtype=float), u, y, cfg.split, {}


def run_prediction(cfg: ExperimentConfig) -> dict:
    """Fit and test the readout over ``cfg.trials`` seeds.

    Trial i uses reservoir seed ``seed + i``. Returns arrays and a metrics
    dict ready for serialisation.
    """
    t, u, y, split, meta = _series(cfg)
    w, tr, te = split
    rcfg = cfg.reservoir
    scale_search = None
    if cfg.scales is not None:
        best, errors = tune_scale(u, y, split, rcfg, cfg.scales, cfg.validation, cfg.rcond, cfg.ridge)
        rcfg = rcfg.replace(input_scale=best)
        scale_search = {"validation_rows": cfg.validation, "errors": {repr(a): e for a, e in errors.items()}}
    seeds = [rcfg.seed + i for i in range(cfg.trials)]
    jobs = [(u, y, split, rcfg.replace(seed=s), cfg.rcond, cfg.ridge) for s in seeds]
    results = _pool_map(_trial, jobs, cfg.workers)
    preds = np.array([r[1] for r in results])
    reports = [r[2] for r in results]
    metrics = {
        "task": cfg.task,
        "mode": rcfg.mode,
        "noise": NOISE_LABELS[rcfg.mode],
        "input_scale": rcfg.input_scale,
        "split": list(split),
        "trials": [{"seed": s, **rep.to_dict()} for s, rep in zip(seeds, reports)],
        "aggregate": {
            "nmse_paper": _summary([r.nmse for r in reports]),
            "dtw": _summary([r.dtw for r in reports]),
        },
        "mean_predictor": mean_predictor(y, split),
    }
    if scale_search is not None:
        metrics["scale_search"] = scale_search
    if meta:
        metrics["data"] = meta
    return {
        "t": t,
        "u": u,
        "y": y,
        "split": split,
        "features": results[0][0],
        "predictions": preds,
        "metrics": metrics,
        "reservoir": rcfg,
    }


def prediction_files(res: dict, column_names: list[str]) -> dict[str, str]:
    w, tr, te = res["split"]
    t = res["t"]
    feats = res["features"]
    preds = res["predictions"]
    mean = preds.mean(axis=0)
    std = preds.std(axis=0, ddof=1) if preds.shape[0] > 1 else np.zeros_like(mean)
    feature_rows = ([t[i], *feats[i]] for i in range(w, te))
    pred_rows = (
        [t[i], res["y"][i], mean[i], mean[i] - 2 * std[i], mean[i] + 2 * std[i]] for i in range(tr, te)
    )
    return {
        "features.csv": _csv_text(["t", *column_names], feature_rows),
        "predictions.csv": _csv_text(["t", "y", "y_hat", "y_hat_lo", "y_hat_hi"], pred_rows),
        "metrics.json": _json_text(res["metrics"]),
    }


def _column_names(n_blocks: int) -> list[str]:
    return [f"z_b{b}_a{i}" for b in range(n_blocks) for i in (0, 1)] + ["bias"]


def run_tipc(cfg: ExperimentConfig, rcfg: ReservoirConfig | None = None) -> dict:
    """TIPC of the reservoir under i.i.d. uniform input, per input kind.

    Symmetric input is drawn on [-1, 1] and asymmetric input on [0, 1], from
    a generator seeded by the reservoir seed.
    """
    opts = cfg.tipc
    rcfg = rcfg or cfg.reservoir
    if opts.mode is not None:
        rcfg = rcfg.replace(mode=opts.mode)
    out = {}
    for kind in opts.inputs:
        rng = np.random.default_rng([rcfg.seed, INPUT_KINDS.index(kind)])
        u = iid_input(opts.washout + opts.length, kind == "symmetric", rng)
        features, _ = run(u, rcfg)
        states = features.states[opts.washout :]
        report = compute_tipc(
            states,
            u[opts.washout :],
            max_degree=opts.max_degree,
            max_delay=opts.max_delay,
            state_mix=opts.state_mix,
            mix_degree=opts.mix_degree,
            p=opts.p,
            correction=opts.correction,
        )
        out[kind] = {"report": report, "u": u, "states": features.states}
    return out


def parity_summary(report) -> dict:
    """Surviving input-only capacities split by parity of the total input degree."""
    odd = [(t.label, c) for t, c in report.surviving() if t.input_order % 2 == 1]
    even = [(t.label, c) for t, c in report.surviving() if t.input_order % 2 == 0]
    return {
        "odd_count": len(odd),
        "even_count": len(even),
        "odd_total": float(sum(c for _, c in odd)),
        "even_total": float(sum(c for _, c in even)),
    }


def _tipc_metrics(report) -> dict:
    return {
        "total": report.total,
        "time_invariant_total": report.time_invariant_total,
        "time_variant_total": report.time_variant_total,
        "richness": report.richness,
        "rank": report.rank,
        "threshold": report.threshold,
        "parity": parity_summary(report),
    }


def tipc_files(cfg: ExperimentConfig, res: dict) -> dict[str, str]:
    first = res[cfg.tipc.inputs[0]]
    n_blocks = first["states"].shape[1] // 2
    names = _column_names(n_blocks)[:-1]
    w = cfg.tipc.washout
    rows = ([i, first["u"][i], *first["states"][i]] for i in range(w, len(first["u"])))
    return {
        "features.csv": _csv_text(["t", "u", *names], rows),
        "capacity.json": _json_text({k: v["report"].to_dict() for k, v in res.items()}),
        "metrics.json": _json_text(
            {"mode": cfg.tipc.mode or cfg.reservoir.mode, **{k: _tipc_metrics(v["report"]) for k, v in res.items()}}
        ),
    }


def bias_only_error(y, split) -> float:
    """Test error of a least-squares fit on a constant column only."""
    w, tr, te = split
    model = fit(np.ones((tr - w, 1)), y[w:tr])
    return nmse_paper(y[tr:te], predict(model, np.ones((te - tr, 1))))


def run_sweep(cfg: ExperimentConfig) -> dict:
    """Prediction metrics and TIPC totals at every coupling strength."""
    rows = []
    capacity = {}
    split = None
    y = None
    for s in cfg.strengths:
        sub = replace(cfg, reservoir=cfg.reservoir.with_strength(s))
        res = run_prediction(sub)
        split, y = res["split"], res["y"]
        agg = res["metrics"]["aggregate"]
        tipc = run_tipc(sub, res["reservoir"])
        totals = {k: v["report"].total for k, v in tipc.items()}
        capacity[repr(float(s))] = {k: v["report"].to_dict() for k, v in tipc.items()}
        rows.append(
            {
                "strength": s,
                "nmse_paper": agg["nmse_paper"]["mean"],
                "nmse_paper_std": agg["nmse_paper"]["std"],
                "dtw": agg["dtw"]["mean"],
                "dtw_std": agg["dtw"]["std"],
                "c_tot": totals,
            }
        )
    strengths = np.array([r["strength"] for r in rows])
    errors = np.array([r["nmse_paper"] for r in rows])
    summary = {
        "rows": rows,
        "mode": cfg.reservoir.mode,
        "noise": NOISE_LABELS[cfg.reservoir.mode],
        "bias_only_nmse_paper": bias_only_error(y, split),
        "error_rank": {repr(float(s)): int(r) for s, r in zip(strengths, np.argsort(np.argsort(errors, kind="stable")))},
    }
    if len(rows) > 2:
        rho, pval = stats.spearmanr(strengths, errors)
        summary["spearman_strength_vs_nmse"] = {"rho": float(rho), "p_value": float(pval)}
    summary["c_tot_argmax"] = {}
    for kind in cfg.tipc.inputs:
        totals = np.array([r["c_tot"][kind] for r in rows])
        i = int(np.argmax(totals))
        summary["c_tot_argmax"][kind] = {
            "strength": float(strengths[i]),
            "interior": bool(strengths.min() < strengths[i] < strengths.max()),
        }
    return {"summary": summary, "capacity": capacity}


def sweep_files(res: dict) -> dict[str, str]:
    rows = res["summary"]["rows"]
    kinds = sorted(rows[0]["c_tot"])
    table = (
        [r["strength"], r["nmse_paper"], r["nmse_paper_std"], r["dtw"], r["dtw_std"], *(r["c_tot"][k] for k in kinds)]
        for r in rows
    )
    header = ["strength", "nmse_paper", "nmse_paper_std", "dtw", "dtw_std", *(f"c_tot_{k}" for k in kinds)]
    return {
        "sweep.csv": _csv_text(header, table),
        "metrics.json": _json_text(res["summary"]),
        "capacity.json": _json_text(res["capacity"]),
    }


# --------------------------------------------------------------------------- #
# Entry point                                                                 #
# --------------------------------------------------------------------------- #


class _JsonErrorParser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("UsageError", message)
        sys.exit(2)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _JsonErrorParser(prog="qrcmeas", description="Quantum reservoir experiments with repeated ancilla readout.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seed", type=int, help="reservoir seed (overrides config)")
    common.add_argument("--mode", choices=MODES, help="evolution mode (overrides config)")
    common.add_argument("--out", type=Path, default=Path("out"), help="artifact directory (default: out)")
    common.add_argument("--workers", type=int, help="process pool size for trials")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_JsonErrorParser)

    p = sub.add_parser("narma", parents=[common], help="NARMA prediction")
    p.add_argument("--task", choices=TASKS[:-1])
    p.add_argument("--trials", type=int)
    p = sub.add_parser("baseline", parents=[common], help="NARMA prediction without mid-circuit readout")
    p.add_argument("--task", choices=TASKS[:-1])
    p = sub.add_parser("csv", parents=[common], help="prediction on a t,u,y CSV file")
    p.add_argument("path", type=Path)
    p.add_argument("--normalize", action="store_true", help="min-max scale the input column")
    p = sub.add_parser("sweep", parents=[common], help="coupling-strength sweep")
    p.add_argument("--trials", type=int)
    p = sub.add_parser("tipc", parents=[common], help="temporal information processing capacity")
    p.add_argument("--input", choices=(*INPUT_KINDS, "both"), default=None)
    p.add_argument("--bonferroni", action="store_true", help="divide p by the number of basis terms")
    return parser


def resolve_config(args) -> ExperimentConfig:
    data = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    cfg = ExperimentConfig.from_dict(data)
    rcfg = cfg.reservoir
    if args.seed is not None:
        rcfg = rcfg.replace(seed=args.seed)
    if args.mode is not None:
        rcfg = rcfg.replace(mode=args.mode)
    changes: dict = {"reservoir": rcfg}
    if args.workers is not None:
        changes["workers"] = args.workers
    if getattr(args, "task", None):
        changes["task"] = args.task
    if getattr(args, "trials", None):
        changes["trials"] = args.trials
    if args.command == "baseline":
        changes["reservoir"] = rcfg.replace(mode="baseline")
        changes["trials"] = 1
    if args.command == "csv":
        changes.update(task="csv", csv_path=str(args.path), normalize=args.normalize or cfg.normalize)
        if not data.get("split"):
            changes["split"] = None
    elif cfg.task == "csv" and "task" not in changes:
        changes["task"] = "narma2"
    if args.command == "tipc":
        opts = cfg.tipc
        if args.input:
            opts = replace(opts, inputs=INPUT_KINDS if args.input == "both" else (args.input,))
        if args.bonferroni:
            opts = replace(opts, correction="bonferroni")
        if args.mode is not None:
            opts = replace(opts, mode=args.mode)
        changes["tipc"] = opts
    return replace(cfg, **changes)


def execute(cfg: ExperimentConfig, command: str, out_dir: Path) -> list[Path]:
    if command in ("narma", "baseline", "csv"):
        res = run_prediction(cfg)
        files = prediction_files(res, _column_names(cfg.reservoir.n_blocks))
    elif command == "tipc":
        files = tipc_files(cfg, run_tipc(cfg))
    elif command == "sweep":
        files = sweep_files(run_sweep(cfg))
    else:
        raise ValueError(f"unknown command {command!r}")
    files["config.json"] = _json_text({"command": command, "backend": backend(), **cfg.to_dict()})
    return write_artifacts(out_dir, files)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        written = execute(cfg, args.command, args.out)
    except (ValueError, TypeError, OSError, ArithmeticError, json.JSONDecodeError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
