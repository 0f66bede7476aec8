"""Experiment drivers built on ``run_cv``: ablations, labeled-ratio and
loss-weight sweeps, and repeated balanced sampling.

Every driver fixes the fold plan and seeds across its axis, so rows differ
only in the swept setting. Reference accuracies from a private clinical
cohort are attached to rows as ``reference`` metadata; synthetic runs are not
expected to reproduce them.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from ..adversarial import LossWeights, TrainConfig
from ..cohort import BalancedCohort, Subject, balanced_sample, make_folds, split_source
from ..runtime import derive_seed
from .cv import CVReport, CVSettings, FoldRunner, run_cv, train_fold

SAMPLING = 21


@dataclass(frozen=True)
class Variant:
    name: str
    use_signal: bool = True
    use_gender: bool = True
    use_domain: bool = True
    domain_mode: str = "three_way"
    group: str = "ablation"
    reference: tuple[float, float] | None = None

    def apply(self, config: TrainConfig, weights: LossWeights) -> tuple[TrainConfig, LossWeights]:
        config = replace(config, use_signal=self.use_signal, use_gender=self.use_gender,
                         use_domain=self.use_domain, domain_mode=self.domain_mode)
        weights = replace(weights, beta=weights.beta if self.use_gender else 0.0,
                          delta=weights.delta if self.use_domain else 0.0)
        return config, weights

    @property
    def key(self) -> tuple:
        return (self.use_signal, self.use_gender, self.use_domain, self.domain_mode)


# Single-head ablations followed by the discriminator combinations; the
# disease head is always on. Reference values are clinical mean (std) in %.
VARIANTS: tuple[Variant, ...] = (
    Variant("no_signal", use_signal=False, reference=(65.47, 10.22)),
    Variant("no_gender", use_gender=False, reference=(66.63, 9.66)),
    Variant("no_domain", use_domain=False, reference=(64.30, 9.88)),
    Variant("traditional_domain", domain_mode="two_way", reference=(67.17, 12.99)),
    Variant("full", reference=(70.00, 13.90)),
    Variant("signal+disease", use_gender=False, use_domain=False, group="combination",
            reference=(62.72, math.nan)),
    Variant("signal+gender+disease", use_domain=False, group="combination",
            reference=(64.30, math.nan)),
    Variant("gender+domain+disease", use_signal=False, group="combination",
            reference=(65.47, math.nan)),
    Variant("signal+gender+domain+disease", group="combination", reference=(70.00, math.nan)),
)
VARIANT_NAMES = tuple(v.name for v in VARIANTS)

WEIGHT_RATIOS: tuple[tuple[float, float, float, float], ...] = (
    (1, 1, 1, 1), (1, 1, 1, 2), (1, 1, 2, 1), (1, 2, 1, 1), (2, 1, 1, 1))
WEIGHT_REFERENCE = {(1, 1, 1, 1): (70.00, 13.90), (1, 1, 1, 2): (65.12, 9.07),
                    (1, 1, 2, 1): (69.10, 10.18), (1, 2, 1, 1): (69.11, 13.93),
                    (2, 1, 1, 1): (63.56, 8.73)}

TAU_GRID = (5, 10, 15, 25, 35, 45, 55, 65, 75, 85)
RATIO_REFERENCE = {5: 50.97, 10: 65.71, 75: 70.00}
SAMPLING_REFERENCE = {"min_mean": 65.21, "max_mean": 70.48, "min_std": 13.18, "max_std": 14.59}


@dataclass
class SweepRow:
    point: str
    params: dict
    report: CVReport
    reference: dict = field(default_factory=dict)

    def flat(self) -> dict:
        row = {"point": self.point, **{f"param_{k}": v for k, v in self.params.items()}}
        row.update(self.report.summary())
        row.update({f"reference_{k}": v for k, v in self.reference.items()})
        return row


@dataclass
class SweepTable:
    axis: str
    rows: list[SweepRow]

    @property
    def plan_digests(self) -> set[str]:
        return {r.report.plan_digest for r in self.rows}

    def to_dict(self) -> dict:
        return {"axis": self.axis,
                "rows": [{"point": r.point, "params": r.params, "reference": r.reference,
                          "report": r.report.to_dict()} for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepTable":
        return cls(d["axis"], [SweepRow(r["point"], r["params"], CVReport.from_dict(r["report"]),
                                        r.get("reference", {})) for r in d["rows"]])

    def save(self, json_path: str | Path, csv_path: str | Path | None = None) -> None:
        Path(json_path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))
        if csv_path is not None:
            self.to_csv(csv_path)

    def to_csv(self, path: str | Path) -> Path:
        rows = [r.flat() for r in self.rows]
        keys = list(dict.fromkeys(k for r in rows for k in r))
        with Path(path).open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            w.writerows(rows)
        return Path(path)


def _subjects(cohort) -> list[Subject]:
    return list(cohort.subjects if isinstance(cohort, BalancedCohort) else cohort)


def resolve_variants(names: Sequence[str] | None) -> list[Variant]:
    if names is None:
        return list(VARIANTS)
    table = {v.name: v for v in VARIANTS}
    unknown = [n for n in names if n not in table]
    if unknown:
        raise ValueError(f"unknown ablation variant(s) {unknown}; known: {list(table)}")
    return [table[n] for n in names]


def ablate(cohort, base_config: TrainConfig, weights: LossWeights = LossWeights(),
           variants: Sequence[str] | None = None, settings: CVSettings = CVSettings(),
           seed: int = 0, jobs: int = 1, runner: FoldRunner = train_fold) -> SweepTable:
    """One CV report per variant. Variants with identical settings share a run."""
    subjects = _subjects(cohort)
    plan = make_folds(subjects, settings.k, seed, stratify=settings.stratify)
    cache: dict[tuple, CVReport] = {}
    rows = []
    for v in resolve_variants(variants):
        if v.key not in cache:
            cfg, w = v.apply(base_config, weights)
            cache[v.key] = run_cv(subjects, cfg, w, settings, seed, jobs, runner, plan)
        ref = {"mean": v.reference[0], "std": v.reference[1]} if v.reference else {}
        rows.append(SweepRow(v.name, {"signal": v.use_signal, "gender": v.use_gender,
                                      "domain": v.use_domain, "domain_mode": v.domain_mode,
                                      "group": v.group}, cache[v.key], ref))
    return SweepTable("variant", rows)


def ratio_sweep(cohort, taus: Sequence[float] = TAU_GRID, config: TrainConfig = TrainConfig(),
                weights: LossWeights = LossWeights(), settings: CVSettings = CVSettings(),
                seed: int = 0, jobs: int = 1, runner: FoldRunner = train_fold) -> SweepTable:
    subjects = _subjects(cohort)
    plan = make_folds(subjects, settings.k, seed, stratify=settings.stratify)
    for tau in taus:
        if not 0 < tau <= 100:
            raise ValueError(f"tau must lie in (0, 100], got {tau}")
        for tr, te in plan.folds:
            # raises with advice when floor(tau * n) is zero
            split_source(tr, tau, 0, target=te)
    rows = []
    for tau in taus:
        report = run_cv(subjects, config, weights, replace(settings, tau=float(tau)), seed, jobs,
                        runner, plan)
        ref = {"mean": RATIO_REFERENCE[tau]} if tau in RATIO_REFERENCE else {}
        rows.append(SweepRow(f"{tau:g}", {"tau": float(tau)}, report, ref))
    return SweepTable("tau", rows)


def weight_sweep(cohort, ratios: Sequence[Sequence[float]] = WEIGHT_RATIOS,
                 config: TrainConfig = TrainConfig(), lam: float = 1.0,
                 settings: CVSettings = CVSettings(), seed: int = 0, jobs: int = 1,
                 runner: FoldRunner = train_fold) -> SweepTable:
    subjects = _subjects(cohort)
    plan = make_folds(subjects, settings.k, seed, stratify=settings.stratify)
    rows = []
    for ratio in ratios:
        if len(ratio) != 4:
            raise ValueError(f"weight ratio {ratio} needs 4 entries (alpha, beta, delta, theta)")
        if any(r < 0 for r in ratio):
            raise ValueError(f"weight ratio {ratio} has a negative entry")
        w = LossWeights(*map(float, ratio), lam=lam)
        report = run_cv(subjects, config, w, settings, seed, jobs, runner, plan)
        key = tuple(int(r) if float(r).is_integer() else r for r in ratio)
        ref = WEIGHT_REFERENCE.get(key)
        rows.append(SweepRow(":".join(f"{r:g}" for r in ratio),
                             {"alpha": w.alpha, "beta": w.beta, "delta": w.delta, "theta": w.theta},
                             report, {"mean": ref[0], "std": ref[1]} if ref else {}))
    return SweepTable("weights", rows)


def sampling_robustness(full_cohort: Sequence[Subject], rounds: int = 5,
                        config: TrainConfig = TrainConfig(), weights: LossWeights = LossWeights(),
                        settings: CVSettings = CVSettings(), seed: int = 0,
                        seeds: Sequence[int] | None = None, quota_female: int = 18,
                        quota_male: int = 12, jobs: int = 1,
                        runner: FoldRunner = train_fold) -> SweepTable:
    """Redraw the balanced cohort each round and rerun the whole CV.

    ``seeds`` overrides the per-round sampling seeds (equal seeds give equal
    rounds). Training seeds stay fixed at ``seed``.
    """
    if rounds < 2:
        raise ValueError("sampling_robustness needs at least 2 rounds")
    seeds = list(seeds) if seeds is not None else [derive_seed(seed, r, SAMPLING)
                                                   for r in range(rounds)]
    if len(seeds) != rounds:
        raise ValueError(f"{len(seeds)} sampling seeds given for {rounds} rounds")
    rows = []
    for r, s in enumerate(seeds):
        bal = balanced_sample(full_cohort, s, quota_female, quota_male)
        report = run_cv(bal.subjects, config, weights, settings, seed, jobs, runner)
        rows.append(SweepRow(str(r), {"round": r, "sampling_seed": int(s)}, report,
                             dict(SAMPLING_REFERENCE)))
    return SweepTable("round", rows)
