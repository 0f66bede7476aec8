"""Accuracy and grouped confusion matrices (DN+ is the positive class)."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

GROUPS = ("all", "female", "male")


@dataclass(frozen=True)
class ConfusionMatrix:
    group: str
    tp: int
    tn: int
    fp: int
    fn: int

    def _rate(self, a: int, b: int) -> float:
        return a / (a + b) if a + b else math.nan

    @property
    def tp_rate(self) -> float:
        return self._rate(self.tp, self.fn)

    @property
    def fn_rate(self) -> float:
        return self._rate(self.fn, self.tp)

    @property
    def tn_rate(self) -> float:
        return self._rate(self.tn, self.fp)

    @property
    def fp_rate(self) -> float:
        return self._rate(self.fp, self.tn)

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n if self.n else math.nan

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(tp_rate=self.tp_rate, fn_rate=self.fn_rate, tn_rate=self.tn_rate,
                 fp_rate=self.fp_rate, accuracy=self.accuracy)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConfusionMatrix":
        return cls(d["group"], int(d["tp"]), int(d["tn"]), int(d["fp"]), int(d["fn"]))

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.group != self.group:
            raise ValueError(f"cannot add {self.group} and {other.group} matrices")
        return ConfusionMatrix(self.group, self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)


def _gender_mask(genders, which: str) -> np.ndarray:
    g = np.asarray(genders)
    if g.dtype.kind in "iub":
        return g == (1 if which == "male" else 0)
    return np.array([str(v).lower() == which for v in g])


def confusion(predictions: Sequence[int], labels: Sequence[int],
              genders: Sequence | None = None) -> list[ConfusionMatrix]:
    """Matrices for all samples and, when ``genders`` is given, each gender.

    ``genders`` may be 1/0 (male/female) or the strings "male"/"female".
    Groups without samples are left out.
    """
    pred = np.asarray(predictions).astype(int)
    lab = np.asarray(labels).astype(int)
    if pred.shape != lab.shape:
        raise ValueError("predictions and labels are not aligned")
    masks = {"all": np.ones(len(lab), bool)}
    if genders is not None:
        if len(genders) != len(lab):
            raise ValueError("genders are not aligned with labels")
        masks["female"] = _gender_mask(genders, "female")
        masks["male"] = _gender_mask(genders, "male")
    out = []
    for group, m in masks.items():
        if not m.any():
            log.info("confusion: group %s has no samples, omitted", group)
            continue
        p, y = pred[m], lab[m]
        out.append(ConfusionMatrix(group, int(((p == 1) & (y == 1)).sum()),
                                   int(((p == 0) & (y == 0)).sum()),
                                   int(((p == 1) & (y == 0)).sum()),
                                   int(((p == 0) & (y == 1)).sum())))
    return out


def accuracy(predictions, labels) -> float:
    pred, lab = np.asarray(predictions), np.asarray(labels)
    if len(lab) == 0:
        return math.nan
    return float(np.mean(pred == lab))


def subject_vote(probabilities, subjects, threshold: float = 0.5):
    """Majority vote per subject; ties go to DN+. Returns (ids, predictions)."""
    prob = np.asarray(probabilities)
    subj = np.asarray(subjects)
    ids = sorted(set(subj.tolist()))
    votes = [int(np.mean(prob[subj == s] > threshold) >= 0.5) for s in ids]
    return ids, np.array(votes, dtype=int)
