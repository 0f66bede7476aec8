"""Synthetic EEG cohorts with planted class, gender, subject and domain effects.

Signal model, per subject and trial::

    x = M_g @ diag(gains) @ (noise_1f + sum_e osc_e)

where ``osc_e`` is a band-limited oscillation on the effect's channels whose
amplitude is multiplied by ``1 + amplitude`` for the affected group (DN+ for
the class effect), ``gains`` are per-subject log-normal channel gains and
``M_g`` is the channel mixing of the subject's domain group.

Planted parameters are drawn from ``spec.seed``; the noise realisation comes
from the seed passed to :func:`rerender`, so the same ground truth can be
re-rendered with fresh noise.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .cohort import Disease, Gender, Subject, Trial, save_cohort

__all__ = ["Effect", "SynthSpec", "PlantedGroundTruth", "generate_cohort", "rerender",
           "band_limited", "colored_noise", "save_synthetic", "load_ground_truth"]


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class Effect:
    channels: tuple[int, ...] = (3,)
    band: tuple[float, float] = (8.0, 13.0)
    amplitude: float = 1.0
    # rms of the unscaled oscillation, relative to the unit-variance background
    base: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "band", tuple(float(b) for b in self.band))


@dataclass(frozen=True)
class SynthSpec:
    n_per_cell: int = 15
    channels: int = 8
    rate: int = 384
    trials_per_subject: int = 35
    trial_seconds: float = 5.0
    class_effect: Effect = Effect()
    gender_effect: Effect = Effect(channels=(6,), band=(18.0, 25.0), amplitude=1.0)
    gender_affected: Gender = Gender.FEMALE
    subject_sigma: float = 0.1
    domain_shift: float = 0.0
    n_domain_groups: int = 3
    noise_exponent: float = 1.0
    noise_amplitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("class_effect", "gender_effect"):
            value = getattr(self, name)
            if isinstance(value, dict):
                object.__setattr__(self, name, Effect(**value))
        object.__setattr__(self, "gender_affected", Gender(self.gender_affected))

    def validate(self) -> None:
        counts = dict(n_per_cell=self.n_per_cell, channels=self.channels, rate=self.rate,
                      trials_per_subject=self.trials_per_subject,
                      n_domain_groups=self.n_domain_groups)
        for name, value in counts.items():
            if int(value) != value or value < 1:
                raise SynthError(f"{name} must be a positive integer, got {value}")
        n = self.trial_seconds * self.rate
        if n != int(n) or n < 1:
            raise SynthError("trial_seconds * rate must be a positive integer")
        for name in ("subject_sigma", "domain_shift", "noise_amplitude"):
            if getattr(self, name) < 0:
                raise SynthError(f"{name} must be non-negative")
        for name in ("class_effect", "gender_effect"):
            e = getattr(self, name)
            lo, hi = e.band
            if e.amplitude < 0 or e.base < 0:
                raise SynthError(f"{name}: amplitudes must be non-negative")
            if not 0 < lo < hi < self.rate / 2:
                raise SynthError(f"{name}: band {e.band} must lie inside (0, {self.rate / 2}) Hz")
            if any(not 0 <= c < self.channels for c in e.channels):
                raise SynthError(f"{name}: channel index out of range")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gender_affected"] = self.gender_affected.value
        return d


@dataclass
class SubjectTruth:
    id: str
    disease: Disease
    gender: Gender
    domain_group: int
    gains: np.ndarray          # [C]
    class_scale: float
    gender_scale: float


@dataclass
class PlantedGroundTruth:
    spec: SynthSpec
    subjects: list[SubjectTruth]
    mixing: np.ndarray          # [groups, C, C]

    def group_of(self) -> dict[str, int]:
        return {s.id: s.domain_group for s in self.subjects}

    def to_json(self) -> str:
        return json.dumps({
            "spec": self.spec.to_dict(),
            "subjects": [{"id": s.id, "disease": s.disease.value, "gender": s.gender.value,
                          "domain_group": s.domain_group, "gains": s.gains.tolist(),
                          "class_scale": s.class_scale, "gender_scale": s.gender_scale}
                         for s in self.subjects],
            "mixing": self.mixing.tolist(),
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "PlantedGroundTruth":
        d = json.loads(text)
        spec_d = dict(d["spec"])
        for name in ("class_effect", "gender_effect"):
            spec_d[name] = Effect(**spec_d[name])
        spec = SynthSpec(**spec_d)
        subjects = [SubjectTruth(s["id"], Disease(s["disease"]), Gender(s["gender"]),
                                 s["domain_group"], np.array(s["gains"]), s["class_scale"],
                                 s["gender_scale"]) for s in d["subjects"]]
        return cls(spec, subjects, np.array(d["mixing"]))


def colored_noise(rng: np.random.Generator, shape: tuple[int, int], exponent: float) -> np.ndarray:
    """Unit-variance (in expectation) noise with a 1/f**exponent power spectrum."""
    n = shape[-1]
    spec = np.fft.rfft(rng.standard_normal(shape), axis=-1)
    f = np.arange(spec.shape[-1], dtype=float)
    shaping = np.zeros_like(f)
    shaping[1:] = f[1:] ** (-exponent / 2.0)
    scale = np.sqrt(n / (2.0 * np.sum(shaping ** 2)))
    return np.fft.irfft(spec * shaping * scale, n=n, axis=-1)


def band_limited(rng: np.random.Generator, shape: tuple[int, int], band: tuple[float, float],
                 rate: float) -> np.ndarray:
    """Unit-variance (in expectation) Gaussian process confined to ``band`` Hz."""
    n = shape[-1]
    spec = np.fft.rfft(rng.standard_normal(shape), axis=-1)
    freqs = np.fft.rfftfreq(n, 1.0 / rate)
    mask = (freqs >= band[0]) & (freqs <= band[1])
    k = int(mask.sum())
    if k == 0:
        raise SynthError(f"band {band} holds no frequency bin at n={n}, rate={rate}")
    return np.fft.irfft(spec * mask * np.sqrt(n / (2.0 * k)), n=n, axis=-1)


def _draw_truth(spec: SynthSpec) -> PlantedGroundTruth:
    spec.validate()
    rng = np.random.default_rng([spec.seed, 0x5EED])
    C, G = spec.channels, spec.n_domain_groups
    mixing = np.empty((G, C, C))
    for g in range(G):
        q, _ = np.linalg.qr(rng.standard_normal((C, C)))
        # identity perturbed toward a random rotation, strength-scaled
        mixing[g] = np.eye(C) + spec.domain_shift * (q - np.eye(C))
    subjects = []
    cells = [(d, g) for d in (Disease.DN_PLUS, Disease.DN_MINUS)
             for g in (Gender.FEMALE, Gender.MALE)]
    idx = 0
    for disease, gender in cells:
        groups = rng.permutation(np.arange(spec.n_per_cell) % G)
        for j in range(spec.n_per_cell):
            gains = np.exp(spec.subject_sigma * rng.standard_normal(C))
            cs = 1.0 + spec.class_effect.amplitude if disease is Disease.DN_PLUS else 1.0
            gs = 1.0 + spec.gender_effect.amplitude if gender is spec.gender_affected else 1.0
            subjects.append(SubjectTruth(f"S{idx:03d}", disease, gender, int(groups[j]),
                                         gains, cs, gs))
            idx += 1
    return PlantedGroundTruth(spec, subjects, mixing)


def _render_subject(truth: SubjectTruth, gt: PlantedGroundTruth, seed: int,
                    index: int) -> Subject:
    spec = gt.spec
    rng = np.random.default_rng([seed, index])
    n = int(round(spec.trial_seconds * spec.rate))
    C = spec.channels
    trials = []
    for _ in range(spec.trials_per_subject):
        x = spec.noise_amplitude * colored_noise(rng, (C, n), spec.noise_exponent)
        for effect, scale in ((spec.class_effect, truth.class_scale),
                              (spec.gender_effect, truth.gender_scale)):
            if not effect.channels:
                continue
            osc = band_limited(rng, (len(effect.channels), n), effect.band, spec.rate)
            x[list(effect.channels)] += effect.base * scale * osc
        x = gt.mixing[truth.domain_group] @ (truth.gains[:, None] * x)
        trials.append(Trial(x.astype(np.float32), spec.rate))
    return Subject(truth.id, truth.gender, truth.disease, tuple(trials))


def rerender(ground_truth: PlantedGroundTruth, seed: int) -> list[Subject]:
    """Render the cohort described by ``ground_truth`` with noise seeded by ``seed``."""
    return [_render_subject(s, ground_truth, seed, i)
            for i, s in enumerate(ground_truth.subjects)]


def generate_cohort(spec: SynthSpec) -> tuple[list[Subject], PlantedGroundTruth]:
    gt = _draw_truth(spec)
    return rerender(gt, spec.seed), gt


def default_channel_names(n: int) -> list[str]:
    from .evaluation.topo import MONTAGE_63
    if n <= 8:
        pick = ["Fz", "C3", "Cz", "C4", "Pz", "O1", "Oz", "O2"]
        return pick[:n]
    if n <= len(MONTAGE_63):
        return list(MONTAGE_63)[:n]
    return [f"ch{i}" for i in range(n)]


def save_synthetic(cohort: Sequence[Subject], gt: PlantedGroundTruth, path: str | Path,
                   name: str = "synthetic") -> Path:
    path = save_cohort(cohort, path, name=name,
                       channel_names=default_channel_names(gt.spec.channels))
    (path / "ground_truth.json").write_text(gt.to_json())
    return path


def load_ground_truth(path: str | Path) -> PlantedGroundTruth:
    path = Path(path)
    if path.is_dir():
        path = path / "ground_truth.json"
    return PlantedGroundTruth.from_json(path.read_text())
