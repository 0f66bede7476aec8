"""Reference classifiers that do not involve the adversarial model.

``bandpower_cv`` is a log band-power logistic regression run on the same
cross-subject folds as ``run_cv``; on planted data it bounds what any model
can reach. ``probe_accuracy`` trains a fresh linear probe on frozen features
and reports subject-grouped cross-validated accuracy.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.signal import periodogram
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import GroupKFold
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from ..cohort import FoldPlan, Subject, make_folds, segment, stack_samples

BANDS = ((1.0, 4.0), (4.0, 8.0), (8.0, 13.0), (13.0, 18.0), (18.0, 25.0), (25.0, 40.0))


def bandpower_features(x: np.ndarray, rate: float,
                       bands: Sequence[tuple[float, float]] = BANDS) -> np.ndarray:
    """Log mean periodogram power per channel and band: [N, C * len(bands)]."""
    x = np.asarray(x, dtype=np.float64)
    x = x.reshape(x.shape[0], -1, x.shape[-1])
    f, p = periodogram(x, fs=rate, axis=-1)
    cols = [np.log(p[..., (f >= lo) & (f < hi)].mean(axis=-1) + 1e-12) for lo, hi in bands]
    return np.stack(cols, axis=-1).reshape(x.shape[0], -1)


def _subject_samples(subjects: Sequence[Subject], window_seconds: float, normalize: str):
    samples = []
    for s in subjects:
        for t in s.trials:
            samples.extend(segment(t, window_seconds, s))
    x = stack_samples(samples, normalize)
    y = np.array([s.disease.label for s in samples])
    ids = np.array([s.subject_id for s in samples])
    return x, y, ids


def _classifier(seed: int = 0):
    return make_pipeline(StandardScaler(), LogisticRegression(max_iter=5000, random_state=seed))


def bandpower_cv(subjects: Sequence[Subject], plan: FoldPlan | None = None, k: int = 10,
                 seed: int = 0, window_seconds: float = 1.0,
                 normalize: str = "sample") -> np.ndarray:
    """Per-fold sample accuracy of the band-power logistic oracle."""
    subjects = list(subjects)
    plan = plan or make_folds(subjects, k, seed)
    x, y, ids = _subject_samples(subjects, window_seconds, normalize)
    feats = bandpower_features(x, subjects[0].trials[0].rate)
    accs = []
    for tr, te in plan.folds:
        mtr, mte = np.isin(ids, tr), np.isin(ids, te)
        clf = _classifier(seed).fit(feats[mtr], y[mtr])
        accs.append(float(np.mean(clf.predict(feats[mte]) == y[mte])))
    return np.array(accs)


def probe_accuracy(features: np.ndarray, target: np.ndarray, groups: np.ndarray,
                   n_splits: int = 5, seed: int = 0) -> float:
    """Mean held-out accuracy of a linear probe; folds never split a group."""
    features = np.asarray(features, dtype=np.float64).reshape(len(features), -1)
    target, groups = np.asarray(target), np.asarray(groups)
    n_splits = min(n_splits, len(np.unique(groups)))
    scores = []
    for tr, te in GroupKFold(n_splits).split(features, target, groups):
        clf = _classifier(seed).fit(features[tr], target[tr])
        scores.append(float(np.mean(clf.predict(features[te]) == target[te])))
    return float(np.mean(scores))
