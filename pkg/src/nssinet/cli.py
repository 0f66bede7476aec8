"""nssinet command line.

Each invocation writes one run directory holding its outputs and a
``manifest.json`` (command, resolved config, seeds, artifacts, timing).
Passing a manifest back through ``--config`` replays the run.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .adversarial import assemble, predict_proba, save_state, train, write_loss_csv
from .cohort import (Domain, balanced_sample, channel_names, load_cohort, make_folds,
                     split_source)
from .config import ConfigError, RunConfig, load_config
from .evaluation.cv import CVReport, generator_config_for, run_cv
from .evaluation.metrics import accuracy, confusion
from .evaluation.sweeps import SweepTable, ablate, ratio_sweep, sampling_robustness, weight_sweep
from .evaluation.topo import ChannelImportanceMap, channel_importance, render_svg
from .runtime import configure
from .synthgen import default_channel_names, generate_cohort, save_synthetic

log = logging.getLogger("nssinet")

COMMANDS = ("synth", "train", "cv", "ablate", "sweep-ratio", "sweep-weights", "sampling",
            "channels", "report")
MANIFEST = "manifest.json"
DEFAULT_ROOT = "runs"


class RunError(RuntimeError):
    pass


# cohort ---------------------------------------------------------------------

def _full_cohort(cfg: RunConfig):
    if cfg.cohort.path:
        path = Path(cfg.cohort.path)
        if not (path / "manifest.json").exists() and not path.name.endswith(".json"):
            raise ConfigError(f"cohort.path {path} has no manifest.json")
        return load_cohort(path), channel_names(path)
    subjects, _ = generate_cohort(cfg.synth)
    return subjects, default_channel_names(cfg.synth.channels)


def _cohort(cfg: RunConfig):
    subjects, names = _full_cohort(cfg)
    if cfg.cohort.balance:
        subjects = list(balanced_sample(subjects, cfg.cohort.sampling_seed,
                                        cfg.cohort.quota_female, cfg.cohort.quota_male).subjects)
    return subjects, names


# commands -------------------------------------------------------------------

def cmd_synth(cfg: RunConfig, run: Path, jobs: int) -> list[str]:
    subjects, gt = generate_cohort(cfg.synth)
    save_synthetic(subjects, gt, run / "cohort")
    return ["cohort/manifest.json", "cohort/ground_truth.json"]


def cmd_train(cfg: RunConfig, run: Path, jobs: int) -> list[str]:
    subjects, _ = _cohort(cfg)
    plan = make_folds(subjects, cfg.cv.k, cfg.seed, stratify=cfg.cv.stratify)
    if not 0 <= cfg.train_run.fold < cfg.cv.k:
        raise ConfigError(f"train_run.fold must lie in [0, {cfg.cv.k})")
    tr, te = plan.folds[cfg.train_run.fold]
    asg = split_source(tr, cfg.cv.tau, cfg.seed, target=te)
    data = assemble(subjects, asg, cfg.cv.window_seconds, cfg.cv.normalize)
    gen_config = generator_config_for(subjects, cfg.cv)
    state, records = train(data, gen_config, cfg.train, cfg.weights, seed=cfg.seed)
    save_state(state, run / "checkpoint.nssi", gen_config, {"seed": cfg.seed})
    write_loss_csv(records, run / "losses.csv")
    test = data.select(data.domain == Domain.T.index)
    pred = (predict_proba(state, test.x) > 0.5).astype(int)
    summary = {"fold": cfg.train_run.fold, "target_accuracy": accuracy(pred, test.truth),
               "n_target": len(test), "n_labeled": int((data.domain == 0).sum()),
               "confusion": [c.to_dict() for c in confusion(pred, test.truth, test.gender)],
               "labeled_subjects": sorted(asg.labeled_source),
               "unlabeled_subjects": sorted(asg.unlabeled_source),
               "target_subjects": sorted(asg.target)}
    _write_json(run / "train_summary.json", summary)
    return ["checkpoint.nssi", "losses.csv", "train_summary.json"]


def _write_cv(report: CVReport, run: Path) -> list[str]:
    report.save(run / "cv_report.json")
    with (run / "cv_folds.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fold", "accuracy", "sample_accuracy", "subject_accuracy", "n_samples"])
        for f in report.folds:
            w.writerow([f.fold, f.accuracy, f.sample_accuracy, f.subject_accuracy,
                        len(f.predictions)])
    _write_confusion(report, run / "confusion.csv")
    with (run / "losses.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fold", "epoch", "L_signal", "L_gender", "L_disc", "L_disease", "total"])
        for f in report.folds:
            for row in f.losses:
                w.writerow([f.fold, int(row[0])] + [repr(float(v)) for v in row[1:]])
    return ["cv_report.json", "cv_folds.csv", "confusion.csv", "losses.csv"]


def _write_confusion(report: CVReport, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "tp", "tn", "fp", "fn", "tp_rate", "tn_rate", "fp_rate", "fn_rate"])
        for c in report.confusion():
            w.writerow([c.group, c.tp, c.tn, c.fp, c.fn, c.tp_rate, c.tn_rate, c.fp_rate,
                        c.fn_rate])


def cmd_cv(cfg: RunConfig, run: Path, jobs: int) -> list[str]:
    subjects, _ = _cohort(cfg)
    report = run_cv(subjects, cfg.train, cfg.weights, cfg.cv, cfg.seed, jobs)
    return _write_cv(report, run)


def _write_sweep(table: SweepTable, run: Path, stem: str) -> list[str]:
    table.save(run / f"{stem}.json", run / f"{stem}.csv")
    return [f"{stem}.json", f"{stem}.csv"]


def cmd_ablate(cfg: RunConfig, run: Path, jobs: int) -> list[str]:
    subjects, _ = _cohort(cfg)
    table = ablate(subjects, cfg.train, cfg.weights, cfg.ablate.variants, cfg.cv, cfg.seed, jobs)
    return _write_sweep(table, run, "ablation")


def cmd_sweep_ratio(cfg: RunConfig, run: Path, jobs: int) -> list[str]:
    subjects, _ = _cohort(cfg)
    table = ratio_sweep(subjects, cfg.sweep_ratio.taus, cfg.train, cfg.weights, cfg.cv, cfg.seed,
                        jobs)
    return _write_sweep(table, run, "sweep_ratio")


def cmd_sweep_weights(cfg: RunConfig, run: Path, jobs: int) -> list[str]:
    subjects, _ = _cohort(cfg)
    table = weight_sweep(subjects, cfg.sweep_weights.ratios, cfg.train, cfg.weights.lam, cfg.cv,
                         cfg.seed, jobs)
    return _write_sweep(table, run, "sweep_weights")


def cmd_sampling(cfg: RunConfig, run: Path, jobs: int) -> list[str]:
    subjects, _ = _full_cohort(cfg)
    table = sampling_robustness(subjects, cfg.sampling.rounds, cfg.train, cfg.weights, cfg.cv,
                                cfg.seed, cfg.sampling.seeds, cfg.cohort.quota_female,
                                cfg.cohort.quota_male, jobs)
    return _write_sweep(table, run, "sampling")


def cmd_channels(cfg: RunConfig, run: Path, jobs: int) -> list[str]:
    from dataclasses import replace
    subjects, names = _cohort(cfg)
    train_cfg = replace(cfg.train, epochs=cfg.channels.epochs)
    cmap = channel_importance(subjects, train_cfg, cfg.weights, cfg.cv, names, cfg.seed, jobs,
                              channels=cfg.channels.channels, contrast=cfg.channels.contrast)
    return _write_channels(cmap, run)


def _write_channels(cmap: ChannelImportanceMap, run: Path) -> list[str]:
    cmap.save_json(run / "channel_importance.json")
    cmap.to_csv(run / "channel_importance.csv")
    out = ["channel_importance.json", "channel_importance.csv"]
    for g in cmap.scores:
        cmap.to_svg(run / f"topo_{g}.svg", g)
        out.append(f"topo_{g}.svg")
    return out


HANDLERS: dict[str, Callable[[RunConfig, Path, int], list[str]]] = {
    "synth": cmd_synth, "train": cmd_train, "cv": cmd_cv, "ablate": cmd_ablate,
    "sweep-ratio": cmd_sweep_ratio, "sweep-weights": cmd_sweep_weights,
    "sampling": cmd_sampling, "channels": cmd_channels,
}


# report ---------------------------------------------------------------------

def cmd_report(run_dir: Path, out: Path | None) -> list[str]:
    manifest_path = run_dir / MANIFEST
    if not manifest_path.is_file():
        raise ConfigError(f"no manifest found in {run_dir}")
    manifest = json.loads(manifest_path.read_text())
    out = out or run_dir / "report"
    out.mkdir(parents=True, exist_ok=True)
    cmd = manifest["command"]
    written = []
    summary: dict = {"command": cmd, "run": str(run_dir), "status": manifest.get("status")}
    if (run_dir / "cv_report.json").exists():
        report = CVReport.load(run_dir / "cv_report.json")
        summary["cv"] = report.summary()
        _write_confusion(report, out / "confusion.csv")
        written.append("confusion.csv")
    for stem in ("ablation", "sweep_ratio", "sweep_weights", "sampling"):
        if (run_dir / f"{stem}.json").exists():
            table = SweepTable.from_dict(json.loads((run_dir / f"{stem}.json").read_text()))
            table.to_csv(out / f"{stem}.csv")
            summary[stem] = [{"point": r.point, **r.report.summary(), "reference": r.reference}
                             for r in table.rows]
            written.append(f"{stem}.csv")
    if (run_dir / "channel_importance.json").exists():
        cmap = ChannelImportanceMap.from_dict(
            json.loads((run_dir / "channel_importance.json").read_text()))
        for g, scores in cmap.scores.items():
            (out / f"topo_{g}.svg").write_text(render_svg(cmap.channels, scores,
                                                          title=f"channel importance ({g})"))
            written.append(f"topo_{g}.svg")
        cmap.to_csv(out / "channel_importance.csv")
        written.append("channel_importance.csv")
        summary["channels"] = {"ranking": cmap.ranking, "low_contrast": cmap.low_contrast}
    if (run_dir / "train_summary.json").exists():
        summary["train"] = json.loads((run_dir / "train_summary.json").read_text())
    _write_json(out / "summary.json", summary)
    written.append("summary.json")
    return written


# plumbing -------------------------------------------------------------------

def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _config_digest(command: str, cfg: RunConfig) -> str:
    blob = json.dumps({"command": command, "config": cfg.to_dict()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def run_directory(command: str, cfg: RunConfig, out: str | None) -> Path:
    if out:
        return Path(out)
    root = Path(os.environ.get("NSSINET_OUT_ROOT") or DEFAULT_ROOT)
    return root / f"{command}-{_config_digest(command, cfg)}"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nssinet", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"nssinet {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "report":
            sp.add_argument("run_dir", type=Path, help="run directory holding a manifest")
            sp.add_argument("--out", default=None, help="bundle directory (default RUN/report)")
        else:
            sp.add_argument("--config", default=None, help="JSON config or run manifest")
            sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
            sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
            sp.add_argument("--out", default=None, help="run directory")
            sp.add_argument("--deterministic", action=argparse.BooleanOptionalAction,
                            default=True, help="deterministic single-threaded kernels")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            written = cmd_report(args.run_dir, Path(args.out) if args.out else None)
            print("\n".join(written))
            return 0
        return _run(args)
    except ConfigError as e:
        print(f"nssinet: configuration error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime failures get exit code 2
        log.debug("failure", exc_info=True)
        print(f"nssinet: {args.command} failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


def _run(args) -> int:
    cfg = load_config(args.config, args.seed)
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    run = run_directory(args.command, cfg, args.out)
    if (run / MANIFEST).exists():
        raise RunError(f"{run} already holds a run; run directories are immutable")
    run.mkdir(parents=True, exist_ok=True)
    configure(args.deterministic)
    manifest = {
        "command": args.command, "config_path": str(args.config) if args.config else None,
        "config": cfg.to_dict(), "seed": cfg.seed, "jobs": args.jobs,
        "deterministic": args.deterministic, "version": __version__,
        "python": platform.python_version(), "numpy": np.__version__,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    try:
        import torch
        manifest["torch"] = torch.__version__
        manifest["artifacts"] = HANDLERS[args.command](cfg, run, args.jobs)
        manifest["status"] = "ok"
    except BaseException as e:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(e).__name__}: {e}"
        raise
    finally:
        manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        _write_json(run / MANIFEST, manifest)
    print(run)
    return 0


if __name__ == "__main__":
    sys.exit(main())
