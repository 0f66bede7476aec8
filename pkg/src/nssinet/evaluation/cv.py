"""Semi-supervised cross-subject k-fold cross-validation.

Per fold the held-out subjects form the target domain T, the remaining
subjects are split into labeled (S_l) and unlabeled (S_u) source by
``split_source``, the full model is trained transductively, and accuracy is
measured on T.

Seeds are derived from ``(seed, fold)`` only, so sweeps that vary a single
setting (tau, loss weights, ablation) share folds, source splits and
initializations.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..adversarial import LossWeights, TrainConfig, assemble, predict_proba, train
from ..cohort import (NORMALIZATIONS, BalancedCohort, Domain, DomainAssignment, FoldPlan, Subject,
                      make_folds, split_source)
from ..netcore import GeneratorConfig
from ..runtime import configure, derive_seed
from .metrics import ConfusionMatrix, accuracy, confusion, subject_vote

log = logging.getLogger(__name__)

# salt values for derive_seed so that split and init streams never coincide
SPLIT, INIT = 11, 12


class FoldError(RuntimeError):
    def __init__(self, fold: int, cause: BaseException):
        super().__init__(f"fold {fold} failed: {type(cause).__name__}: {cause}")
        self.fold = fold


@dataclass(frozen=True)
class CVSettings:
    k: int = 10
    tau: float = 75.0
    window_seconds: float = 1.0
    normalize: str = "sample"
    vote: bool = False
    stratify: bool = True

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if not 0 < self.tau <= 100:
            raise ValueError(f"tau must lie in (0, 100], got {self.tau}")
        if self.normalize not in NORMALIZATIONS:
            raise ValueError(f"normalize must be one of {NORMALIZATIONS}")


@dataclass
class FoldContext:
    fold: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    assignment: DomainAssignment
    gen_config: GeneratorConfig
    train_config: TrainConfig
    weights: LossWeights
    settings: CVSettings
    seed: int


@dataclass
class FoldResult:
    fold: int
    test_subjects: list[str]
    accuracy: float
    sample_accuracy: float
    subject_accuracy: float
    predictions: list[int]
    labels: list[int]
    genders: list[int]
    subjects: list[str]
    losses: list[list[float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FoldResult":
        return cls(**d)


@dataclass
class CVReport:
    folds: list[FoldResult]
    config: dict
    seeds: dict
    plan_digest: str

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([f.accuracy for f in self.folds])

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        # population standard deviation over folds
        return float(np.std(self.accuracies))

    def confusion(self) -> list[ConfusionMatrix]:
        pred = np.concatenate([f.predictions for f in self.folds]).astype(int)
        lab = np.concatenate([f.labels for f in self.folds]).astype(int)
        gen = np.concatenate([f.genders for f in self.folds]).astype(int)
        return confusion(pred, lab, gen)

    def summary(self) -> dict:
        out = {"mean": self.mean, "std": self.std, "n_folds": len(self.folds)}
        for cm in self.confusion():
            out[f"{cm.group}_tp_rate"] = cm.tp_rate
            out[f"{cm.group}_tn_rate"] = cm.tn_rate
        return out

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std,
                "accuracies": self.accuracies.tolist(),
                "confusion": [c.to_dict() for c in self.confusion()],
                "folds": [f.to_dict() for f in self.folds],
                "config": self.config, "seeds": self.seeds, "plan_digest": self.plan_digest}

    @classmethod
    def from_dict(cls, d: dict) -> "CVReport":
        return cls([FoldResult.from_dict(f) for f in d["folds"]], d["config"], d["seeds"],
                   d["plan_digest"])

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=True))
        return path

    @classmethod
    def load(cls, path: str | Path) -> "CVReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generator_config_for(subjects: Sequence[Subject], settings: CVSettings) -> GeneratorConfig:
    t = subjects[0].trials[0]
    points = settings.window_seconds * t.rate
    if abs(points - round(points)) > 1e-9:
        raise ValueError(f"window {settings.window_seconds}s does not give whole samples")
    return GeneratorConfig(channels=t.n_channels, points=int(round(points)))


def train_fold(subjects: Sequence[Subject], ctx: FoldContext) -> FoldResult:
    """Default fold runner: full adversarial training, evaluation on T."""
    data = assemble(subjects, ctx.assignment, ctx.settings.window_seconds, ctx.settings.normalize)
    state, records = train(data, ctx.gen_config, ctx.train_config, ctx.weights, seed=ctx.seed)
    test = data.select(data.domain == Domain.T.index)
    prob = predict_proba(state, test.x)
    return fold_result(ctx, prob, test.truth, test.gender, test.subject,
                       [r.row() for r in records])


def fold_result(ctx: FoldContext, prob, truth, gender, subject, losses=()) -> FoldResult:
    pred = (np.asarray(prob) > 0.5).astype(int)
    truth = np.asarray(truth).astype(int)
    subject = np.asarray(subject)
    ids, votes = subject_vote(prob, subject)
    subj_truth = [int(truth[subject == s][0]) for s in ids]
    s_acc, v_acc = accuracy(pred, truth), accuracy(votes, subj_truth)
    return FoldResult(ctx.fold, sorted(ctx.test_ids), v_acc if ctx.settings.vote else s_acc,
                      s_acc, v_acc, pred.tolist(), truth.tolist(),
                      np.asarray(gender).astype(int).tolist(), subject.tolist(),
                      [list(map(float, r)) for r in losses])


FoldRunner = Callable[[Sequence[Subject], FoldContext], FoldResult]


def _run_one(args) -> FoldResult:
    runner, subjects, ctx = args
    try:
        return runner(subjects, ctx)
    except Exception as e:
        raise FoldError(ctx.fold, e) from e


def _worker_init(deterministic: bool) -> None:
    configure(deterministic, threads=1)


def fold_contexts(subjects: Sequence[Subject], plan: FoldPlan, train_config: TrainConfig,
                  weights: LossWeights, settings: CVSettings, seed: int,
                  folds: Sequence[int] | None = None) -> list[FoldContext]:
    gen_config = generator_config_for(subjects, settings)
    out = []
    for i, (tr, te) in enumerate(plan.folds):
        if folds is not None and i not in folds:
            continue
        asg = split_source(tr, settings.tau, derive_seed(seed, i, SPLIT), target=te)
        out.append(FoldContext(i, tuple(tr), tuple(te), asg, gen_config, train_config,
                               weights, settings, derive_seed(seed, i, INIT)))
    return out


def run_cv(subjects: BalancedCohort | Sequence[Subject], train_config: TrainConfig,
           weights: LossWeights = LossWeights(), settings: CVSettings = CVSettings(),
           seed: int = 0, jobs: int = 1, runner: FoldRunner = train_fold,
           plan: FoldPlan | None = None, folds: Sequence[int] | None = None,
           deterministic: bool = True) -> CVReport:
    """Cross-validate. ``folds`` restricts the run to a subset of fold ids."""
    if isinstance(subjects, BalancedCohort):
        subjects = subjects.subjects
    subjects = list(subjects)
    plan = plan or make_folds(subjects, settings.k, seed, stratify=settings.stratify)
    if plan.k != settings.k:
        raise ValueError(f"fold plan has k={plan.k}, settings ask for k={settings.k}")
    ctxs = fold_contexts(subjects, plan, train_config, weights, settings, seed, folds)
    tasks = [(runner, subjects, c) for c in ctxs]
    if jobs > 1 and len(tasks) > 1:
        import multiprocessing as mp
        with ProcessPoolExecutor(min(jobs, len(tasks)), mp_context=mp.get_context("spawn"),
                                 initializer=_worker_init, initargs=(deterministic,)) as ex:
            results = list(ex.map(_run_one, tasks))
    else:
        results = []
        for t in tasks:
            results.append(_run_one(t))
            log.info("fold %d: accuracy %.4f", results[-1].fold, results[-1].accuracy)
    config = {"train": train_config.to_dict(), "weights": asdict(weights),
              "cv": asdict(settings), "generator": ctxs[0].gen_config.to_dict() if ctxs else {}}
    seeds = {"seed": seed, "folds": {str(c.fold): {"split": derive_seed(seed, c.fold, SPLIT),
                                                   "init": c.seed} for c in ctxs}}
    return CVReport(results, config, seeds, plan.digest())


def constant_runner(value: int) -> FoldRunner:
    """A runner that predicts ``value`` for every target sample (a control)."""
    return _Constant(int(value))


@dataclass(frozen=True)
class _Constant:
    value: int

    def __call__(self, subjects: Sequence[Subject], ctx: FoldContext) -> FoldResult:
        test = [s for s in subjects if s.id in set(ctx.test_ids)]
        truth, gender, subj = [], [], []
        for s in test:
            n = sum(int(t.duration // ctx.settings.window_seconds) for t in s.trials)
            truth += [s.disease.label] * n
            gender += [1 if s.gender.value == "male" else 0] * n
            subj += [s.id] * n
        prob = np.full(len(truth), float(self.value))
        return fold_result(ctx, prob, truth, gender, subj)

