"""Per-channel importance: retrain on each channel alone, score by CV accuracy,
min-max normalize across channels, and lay the scores out on the scalp."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from ..adversarial import LossWeights, TrainConfig
from ..cohort import BalancedCohort, Subject, Trial
from .cv import CVSettings, FoldRunner, run_cv, train_fold
from .metrics import GROUPS

log = logging.getLogger(__name__)


def _load_montage() -> dict[str, tuple[float, float]]:
    text = resources.files("nssinet.data").joinpath("montage_1020.csv").read_text()
    rows = list(csv.DictReader(text.splitlines()))
    return {r["channel"]: (float(r["x"]), float(r["y"])) for r in rows}


COORDINATES = _load_montage()
MONTAGE_63: tuple[str, ...] = tuple(COORDINATES)


def normalize_scores(raw: Sequence[float], contrast: float = 0.05) -> tuple[np.ndarray, bool]:
    """Min-max scaling that ignores NaN entries.

    All-equal inputs map to 0.5. The flag is set when the raw range is below
    ``contrast``, i.e. the map should not be read as a ranking.
    """
    raw = np.asarray(raw, dtype=float)
    ok = ~np.isnan(raw)
    out = np.full(raw.shape, np.nan)
    if not ok.any():
        return out, True
    lo, hi = raw[ok].min(), raw[ok].max()
    if hi == lo:
        out[ok] = 0.5
    else:
        out[ok] = (raw[ok] - lo) / (hi - lo)
    return out, bool(hi - lo < contrast)


@dataclass
class ChannelImportanceMap:
    channels: list[str]
    raw: dict[str, list[float]]          # group -> per-channel accuracy
    scores: dict[str, list[float]]       # group -> normalized score
    low_contrast: dict[str, bool]
    missing: dict[str, str] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def ranking(self) -> list[str]:
        s = np.nan_to_num(np.asarray(self.scores["all"], dtype=float), nan=-1.0)
        return [self.channels[i] for i in np.argsort(-s, kind="stable")]

    def to_dict(self) -> dict:
        return {"channels": self.channels, "raw": self.raw, "scores": self.scores,
                "low_contrast": self.low_contrast, "missing": self.missing, "config": self.config}

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelImportanceMap":
        return cls(d["channels"], d["raw"], d["scores"], d["low_contrast"], d.get("missing", {}),
                   d.get("config", {}))

    def save_json(self, path: str | Path) -> Path:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))
        return Path(path)

    def to_csv(self, path: str | Path) -> Path:
        groups = [g for g in GROUPS if g in self.scores]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["channel", "score"] + [f"{g}_score" for g in groups[1:]]
                       + [f"{g}_accuracy" for g in groups])
            for i, ch in enumerate(self.channels):
                w.writerow([ch] + [self.scores[g][i] for g in groups]
                           + [self.raw[g][i] for g in groups])
        return Path(path)

    def to_svg(self, path: str | Path, group: str = "all") -> Path:
        Path(path).write_text(render_svg(self.channels, self.scores[group],
                                         title=f"channel importance ({group})"))
        return Path(path)


def _colour(v: float) -> str:
    if math.isnan(v):
        return "#bbbbbb"
    # blue (low) to red (high) through white
    if v < 0.5:
        t = v / 0.5
        r, g, b = int(255 * t), int(255 * t), 255
    else:
        t = (v - 0.5) / 0.5
        r, g, b = 255, int(255 * (1 - t)), int(255 * (1 - t))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(channels: Sequence[str], scores: Sequence[float], size: int = 420,
               title: str = "") -> str:
    c, rad = size / 2, size * 0.42
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<circle cx="{c}" cy="{c}" r="{rad:.1f}" fill="none" stroke="black"/>',
             f'<polygon points="{c - 12},{c - rad + 2} {c},{c - rad - 16} {c + 12},{c - rad + 2}" '
             'fill="none" stroke="black"/>']
    if title:
        parts.append(f'<text x="6" y="16" font-size="12">{title}</text>')
    for ch, v in zip(channels, scores):
        if ch not in COORDINATES:
            continue
        x, y = COORDINATES[ch]
        px, py = c + x * rad, c - y * rad
        v = float(v)
        parts.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="9" fill="{_colour(v)}" '
                     f'stroke="#333"><title>{ch}: {v:.3f}</title></circle>')
        parts.append(f'<text x="{px:.1f}" y="{py + 20:.1f}" font-size="8" '
                     f'text-anchor="middle">{ch}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def single_channel(subjects: Sequence[Subject], channel: int) -> list[Subject]:
    return [s.with_trials(Trial(t.data[channel:channel + 1], t.rate) for t in s.trials)
            for s in subjects]


def channel_importance(cohort, config: TrainConfig = TrainConfig(epochs=20),
                       weights: LossWeights = LossWeights(), settings: CVSettings = CVSettings(),
                       channel_names: Sequence[str] | None = None, seed: int = 0, jobs: int = 1,
                       runner: FoldRunner = train_fold, channels: Sequence[int] | None = None,
                       contrast: float = 0.05) -> ChannelImportanceMap:
    """Cross-validated accuracy of a model that sees one channel at a time.

    Every channel gets a fresh model and the same folds and seeds. A failing
    channel is recorded in ``missing`` and scored NaN.
    """
    subjects = list(cohort.subjects if isinstance(cohort, BalancedCohort) else cohort)
    n_ch = subjects[0].trials[0].n_channels
    names = list(channel_names) if channel_names else [f"ch{i}" for i in range(n_ch)]
    if len(names) != n_ch:
        raise ValueError(f"{len(names)} channel names for {n_ch} channels")
    chosen = list(range(n_ch)) if channels is None else list(channels)
    raw = {g: [math.nan] * len(chosen) for g in GROUPS}
    missing = {}
    for j, c in enumerate(chosen):
        try:
            report = run_cv(single_channel(subjects, c), config, weights, settings, seed, jobs,
                            runner)
        except Exception as e:  # a failed channel must not sink the map
            log.warning("channel %s failed: %s", names[c], e)
            missing[names[c]] = f"{type(e).__name__}: {e}"
            continue
        raw["all"][j] = report.mean
        for cm in report.confusion():
            if cm.group != "all":
                raw[cm.group][j] = cm.accuracy
        log.info("channel %s: accuracy %.4f", names[c], report.mean)
    scores, flags = {}, {}
    for g in GROUPS:
        s, flags[g] = normalize_scores(raw[g], contrast)
        scores[g] = s.tolist()
    cfg = {"train": config.to_dict(), "cv": settings.__dict__.copy(), "seed": seed,
           "weights": weights.__dict__.copy()}
    return ChannelImportanceMap([names[c] for c in chosen], raw, scores, flags, missing, cfg)
