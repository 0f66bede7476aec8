"""Subjects, trials and samples; preprocessing, balanced sampling and folds.

Every operation here is a pure function of its inputs and seed. Subjects are
split into folds, labeled/unlabeled sources and targets at subject
granularity, never by sample.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import signal

__all__ = [
    "Gender", "Disease", "Domain", "CohortError", "ManifestError",
    "Trial", "Subject", "Sample", "BalancedCohort", "DomainAssignment",
    "FoldPlan", "resample", "segment", "balanced_sample", "make_folds",
    "split_source", "save_cohort", "load_cohort", "zscore", "stack_samples",
]

MANIFEST_FORMAT = "nssinet-cohort/1"


class CohortError(ValueError):
    pass


class ManifestError(CohortError):
    pass


class Gender(str, enum.Enum):
    MALE = "male"
    FEMALE = "female"


class Disease(str, enum.Enum):
    DN_PLUS = "DN_plus"
    DN_MINUS = "DN_minus"

    @property
    def label(self) -> int:
        return 1 if self is Disease.DN_PLUS else 0


class Domain(str, enum.Enum):
    S_L = "S_l"
    S_U = "S_u"
    T = "T"

    @property
    def index(self) -> int:
        return _DOMAIN_ORDER.index(self)


_DOMAIN_ORDER = (Domain.S_L, Domain.S_U, Domain.T)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float32, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Trial:
    """One continuous recording, ``data`` is [channels, samples] in microvolts."""

    data: np.ndarray
    rate: int

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
            raise CohortError(f"trial data must be a non-empty 2-D array, got shape {data.shape}")
        if int(self.rate) != self.rate or self.rate <= 0:
            raise CohortError(f"rate must be a positive integer, got {self.rate}")
        if not np.all(np.isfinite(data)):
            raise CohortError("trial data contains non-finite values")
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "rate", int(self.rate))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.rate

    def __eq__(self, other):
        if not isinstance(other, Trial):
            return NotImplemented
        return self.rate == other.rate and np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class Subject:
    id: str
    gender: Gender
    disease: Disease
    trials: tuple[Trial, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gender", Gender(self.gender))
        object.__setattr__(self, "disease", Disease(self.disease))
        object.__setattr__(self, "trials", tuple(self.trials))

    def with_trials(self, trials: Iterable[Trial]) -> "Subject":
        return Subject(self.id, self.gender, self.disease, tuple(trials))


@dataclass(frozen=True, eq=False)
class Sample:
    x: np.ndarray
    subject_id: str
    gender: Gender
    disease: Disease
    domain_tag: Domain | None = None


@dataclass(frozen=True)
class BalancedCohort:
    dn_plus: tuple[Subject, ...]
    dn_minus: tuple[Subject, ...]
    sampling_seed: int

    @property
    def subjects(self) -> tuple[Subject, ...]:
        return self.dn_plus + self.dn_minus

    def ids(self) -> set[str]:
        return {s.id for s in self.subjects}


@dataclass(frozen=True)
class DomainAssignment:
    labeled_source: frozenset[str]
    unlabeled_source: frozenset[str]
    target: frozenset[str]
    tau_percent: float

    def __post_init__(self):
        for name in ("labeled_source", "unlabeled_source", "target"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        sl, su, t = self.labeled_source, self.unlabeled_source, self.target
        if sl & su or sl & t or su & t:
            raise CohortError("domain sets must be pairwise disjoint")

    def domain_of(self, subject_id: str) -> Domain:
        if subject_id in self.labeled_source:
            return Domain.S_L
        if subject_id in self.unlabeled_source:
            return Domain.S_U
        if subject_id in self.target:
            return Domain.T
        raise KeyError(f"subject {subject_id!r} is not part of this assignment")

    def domain_label_of(self, sample: Sample) -> np.ndarray:
        """One-hot over (S_l, S_u, T)."""
        onehot = np.zeros(3)
        onehot[self.domain_of(sample.subject_id).index] = 1.0
        return onehot

    @property
    def source(self) -> frozenset[str]:
        return self.labeled_source | self.unlabeled_source


@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    seed: int

    def digest(self) -> str:
        blob = json.dumps([self.k, self.seed, self.folds]).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------- preprocessing

def _dc_normalized_lowpass(up: int, down: int, beta: float = 5.0) -> np.ndarray:
    # Windowed-sinc prototype with every polyphase branch rescaled to unit DC gain.
    max_rate = max(up, down)
    half_len = 10 * max_rate
    h = signal.firwin(2 * half_len + 1, 1.0 / max_rate, window=("kaiser", beta))
    for phase in range(up):
        h[phase::up] /= h[phase::up].sum() * up
    return h


def resample(trial: Trial, to_rate: int) -> Trial:
    """Anti-aliased polyphase downsampling to ``to_rate`` (e.g. 500 -> 384 Hz)."""
    if int(to_rate) != to_rate or to_rate <= 0:
        raise CohortError(f"to_rate must be a positive integer, got {to_rate}")
    to_rate = int(to_rate)
    if to_rate > trial.rate:
        raise CohortError(f"upsampling is unsupported ({trial.rate} -> {to_rate} Hz)")
    if to_rate == trial.rate:
        return trial
    n_out = Fraction(trial.n_samples * to_rate, trial.rate)
    if n_out.denominator != 1:
        raise CohortError(
            f"{trial.n_samples} samples at {trial.rate} Hz do not give an integer "
            f"length at {to_rate} Hz")
    g = math.gcd(to_rate, trial.rate)
    up, down = to_rate // g, trial.rate // g
    h = _dc_normalized_lowpass(up, down)
    out = signal.resample_poly(trial.data.astype(np.float64), up, down, axis=1,
                               window=h, padtype="line")
    assert out.shape[1] == int(n_out)
    return Trial(out, to_rate)


def segment(trial: Trial, window_seconds: float, subject: Subject | None = None,
            domain: Domain | None = None) -> list[Sample]:
    """Cut a trial into consecutive non-overlapping windows; a partial tail is dropped."""
    width = Fraction(window_seconds).limit_denominator(10**6) * trial.rate
    if width.denominator != 1 or width <= 0:
        raise CohortError(f"window of {window_seconds} s is not a whole number of samples "
                          f"at {trial.rate} Hz")
    width = int(width)
    if width > trial.n_samples:
        raise CohortError(f"window ({width} samples) is longer than the trial "
                          f"({trial.n_samples} samples)")
    sid = subject.id if subject else ""
    gender = subject.gender if subject else None
    disease = subject.disease if subject else None
    out = []
    for i in range(trial.n_samples // width):
        x = trial.data[:, i * width:(i + 1) * width]
        out.append(Sample(x, sid, gender, disease, domain))
    return out


NORMALIZATIONS = ("channel", "sample", "none")


def zscore(x: np.ndarray, mode: str = "channel", eps: float = 1e-8) -> np.ndarray:
    """Standardize samples [N, C, P].

    ``channel``: every channel of every sample over time. ``sample``: every
    sample over channels and time jointly, which keeps relative channel power.
    """
    if mode == "none":
        return x
    if mode == "channel":
        axes = (-1,)
    elif mode == "sample":
        axes = (-2, -1)
    else:
        raise CohortError(f"unknown normalization {mode!r}; expected one of {NORMALIZATIONS}")
    mu = x.mean(axis=axes, keepdims=True)
    sd = x.std(axis=axes, keepdims=True)
    return ((x - mu) / (sd + eps)).astype(x.dtype, copy=False)


def stack_samples(samples: Sequence[Sample], normalize: str = "channel") -> np.ndarray:
    """Samples -> float32 array [N, 1, C, P] ready for the generator."""
    x = np.stack([s.x for s in samples]).astype(np.float32)
    return zscore(x, normalize)[:, None]


# ---------------------------------------------------------------- sampling

def _cell(subjects: Iterable[Subject], disease: Disease, gender: Gender) -> list[Subject]:
    return sorted((s for s in subjects if s.disease is disease and s.gender is gender),
                  key=lambda s: s.id)


def balanced_sample(cohort: Sequence[Subject], seed: int, quota_female: int = 18,
                    quota_male: int = 12) -> BalancedCohort:
    """Draw ``quota_female`` + ``quota_male`` subjects per disease group at random.

    Cells holding exactly their quota are taken whole.
    """
    ids = [s.id for s in cohort]
    if len(set(ids)) != len(ids):
        raise CohortError("subject ids must be unique")
    rng = np.random.default_rng(seed)
    groups = {}
    for disease in (Disease.DN_PLUS, Disease.DN_MINUS):
        chosen = []
        for gender, quota in ((Gender.FEMALE, quota_female), (Gender.MALE, quota_male)):
            cell = _cell(cohort, disease, gender)
            if len(cell) < quota:
                raise CohortError(f"cell {disease.value}/{gender.value} has {len(cell)} "
                                  f"subjects, quota is {quota}")
            pick = rng.choice(len(cell), size=quota, replace=False)
            chosen.extend(cell[i] for i in sorted(pick))
        groups[disease] = tuple(chosen)
    return BalancedCohort(groups[Disease.DN_PLUS], groups[Disease.DN_MINUS], seed)


def make_folds(subjects: BalancedCohort | Sequence[Subject], k: int, seed: int,
               stratify: bool = True) -> FoldPlan:
    """Subject-disjoint k-fold plan, stratified by disease then gender.

    Subjects are dealt greedily to the fold with the fewest test subjects, then
    the fewest of the same disease, then of the same gender; remaining ties go
    to a seeded fold order.
    """
    if isinstance(subjects, BalancedCohort):
        subjects = subjects.subjects
    subjects = sorted(subjects, key=lambda s: s.id)
    n = len(subjects)
    if k < 2:
        raise CohortError("k must be at least 2")
    if k > n:
        raise CohortError(f"k={k} exceeds the number of subjects ({n})")
    rng = np.random.default_rng(seed)
    rank = rng.permutation(k)
    size = np.zeros(k, int)
    by_disease = {d: np.zeros(k, int) for d in Disease}
    by_gender = {g: np.zeros(k, int) for g in Gender}
    test = [[] for _ in range(k)]

    if stratify:
        cells = [_cell(subjects, d, g) for d in Disease for g in Gender]
    else:
        cells = [subjects]
    for cell in cells:
        for i in rng.permutation(len(cell)):
            s = cell[i]
            if stratify:
                keys = [(size[f], by_disease[s.disease][f], by_gender[s.gender][f], rank[f])
                        for f in range(k)]
            else:
                keys = [(size[f], rank[f]) for f in range(k)]
            f = min(range(k), key=keys.__getitem__)
            test[f].append(s.id)
            size[f] += 1
            by_disease[s.disease][f] += 1
            by_gender[s.gender][f] += 1

    all_ids = [s.id for s in subjects]
    folds = []
    for f in range(k):
        held = set(test[f])
        folds.append((tuple(i for i in all_ids if i not in held), tuple(sorted(held))))
    return FoldPlan(k, tuple(folds), seed)


def split_source(train_subjects: Iterable[str], tau_percent: float, seed: int,
                 target: Iterable[str] = ()) -> DomainAssignment:
    """Assign floor(tau% of the training subjects) to the labeled source at random."""
    if not 0 < tau_percent <= 100:
        raise CohortError(f"tau must lie in (0, 100], got {tau_percent}")
    train = sorted(set(train_subjects))
    n_labeled = math.floor(Fraction(tau_percent).limit_denominator(10**6) * len(train) / 100)
    if n_labeled == 0:
        raise CohortError(f"tau={tau_percent}% of {len(train)} subjects labels nobody; "
                          "use a larger tau")
    order = np.random.default_rng(seed).permutation(len(train))
    labeled = {train[i] for i in order[:n_labeled]}
    unlabeled = set(train) - labeled
    return DomainAssignment(frozenset(labeled), frozenset(unlabeled), frozenset(target),
                            float(tau_percent))


# ---------------------------------------------------------------- storage

def save_cohort(cohort: Sequence[Subject], path: str | Path, name: str = "cohort",
                channel_names: Sequence[str] | None = None) -> Path:
    """Write ``manifest.json`` plus one little-endian float32 file per subject."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    trials = [t for s in cohort for t in s.trials]
    if not trials:
        raise CohortError("cannot save a cohort without trials")
    rate, n_ch, n_samp = trials[0].rate, trials[0].n_channels, trials[0].n_samples
    for t in trials:
        if (t.rate, t.n_channels, t.n_samples) != (rate, n_ch, n_samp):
            raise CohortError("all trials must share rate, channel count and length")
    if channel_names is None:
        channel_names = [f"ch{i}" for i in range(n_ch)]
    if len(channel_names) != n_ch:
        raise CohortError("channel_names length does not match the channel count")
    entries = []
    for s in cohort:
        fname = f"{s.id}.f32"
        block = np.stack([t.data for t in s.trials]).astype("<f4")
        (path / fname).write_bytes(block.tobytes(order="C"))
        entries.append({"id": s.id, "gender": s.gender.value, "disease": s.disease.value,
                        "n_trials": len(s.trials), "file": fname})
    manifest = {"format": MANIFEST_FORMAT, "name": name, "rate": rate, "channels": n_ch,
                "channel_names": list(channel_names), "trial_samples": n_samp,
                "subjects": entries}
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return path


def read_manifest(path: str | Path) -> dict:
    path = Path(path)
    mpath = path / "manifest.json" if path.is_dir() else path
    try:
        manifest = json.loads(mpath.read_text())
    except FileNotFoundError:
        raise ManifestError(f"no manifest at {mpath}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from None
    for key in ("rate", "channels", "channel_names", "trial_samples", "subjects"):
        if key not in manifest:
            raise ManifestError(f"manifest is missing {key!r}")
    if len(manifest["channel_names"]) != manifest["channels"]:
        raise ManifestError("channel_names length does not match channels")
    return manifest


def load_cohort(path: str | Path) -> list[Subject]:
    """Read a cohort directory written by :func:`save_cohort`."""
    path = Path(path)
    manifest = read_manifest(path)
    root = path if path.is_dir() else path.parent
    rate, n_ch, n_samp = manifest["rate"], manifest["channels"], manifest["trial_samples"]
    subjects, seen = [], set()
    for entry in manifest["subjects"]:
        sid = entry["id"]
        if sid in seen:
            raise ManifestError(f"duplicate subject id {sid!r}")
        seen.add(sid)
        try:
            gender, disease = Gender(entry["gender"]), Disease(entry["disease"])
        except ValueError as exc:
            raise ManifestError(f"subject {sid}: {exc}") from None
        raw = np.frombuffer((root / entry["file"]).read_bytes(), dtype="<f4")
        n_trials = entry["n_trials"]
        expected = n_trials * n_ch * n_samp
        if raw.size != expected:
            # Try to name the offending axis: channels first, then samples.
            detail = ""
            if n_trials and raw.size % (n_trials * n_samp) == 0:
                detail = f" ({raw.size // (n_trials * n_samp)} channel rows, manifest says {n_ch})"
            raise ManifestError(f"subject {sid}: shape mismatch, file holds {raw.size} values, "
                                f"manifest implies {expected}{detail}")
        block = raw.reshape(n_trials, n_ch, n_samp)
        trials = []
        for j in range(n_trials):
            if not np.all(np.isfinite(block[j])):
                raise ManifestError(f"subject {sid}, trial {j}: non-finite values")
            trials.append(Trial(block[j], rate))
        subjects.append(Subject(sid, gender, disease, tuple(trials)))
    return subjects


def channel_names(path: str | Path) -> list[str]:
    return list(read_manifest(path)["channel_names"])
