import numpy as np
import pytest
from scipy import stats
from scipy.signal import periodogram

from nssinet.cohort import Disease, Gender
from nssinet.synthgen import (Effect, PlantedGroundTruth, SynthError, SynthSpec, band_limited,
                              colored_noise, generate_cohort, load_ground_truth, rerender,
                              save_synthetic)

SMALL = dict(n_per_cell=8, channels=4, rate=128, trials_per_subject=2, trial_seconds=4.0,
             gender_effect=Effect((2,), (18, 25), 1.0))


def _band_power(subjects, ch, band, rate):
    out = []
    for s in subjects:
        x = np.concatenate([t.data[ch] for t in s.trials])
        f, p = periodogram(x, fs=rate)
        out.append(p[(f >= band[0]) & (f <= band[1])].mean())
    return np.array(out)


def _by(subjects, disease):
    return [s for s in subjects if s.disease is disease]


def test_planted_power_ratio_near_four():
    # amplitude 1 doubles the oscillation, so in-band power roughly quadruples
    spec = SynthSpec(**SMALL, class_effect=Effect((1,), (8, 13), 1.0), subject_sigma=0.0, seed=2)
    subs, _ = generate_cohort(spec)
    plus = _band_power(_by(subs, Disease.DN_PLUS), 1, (8, 13), spec.rate).mean()
    minus = _band_power(_by(subs, Disease.DN_MINUS), 1, (8, 13), spec.rate).mean()
    assert 3.5 <= plus / minus <= 4.5


def test_zero_amplitude_has_no_group_difference():
    spec = SynthSpec(**SMALL, class_effect=Effect((1,), (8, 13), 0.0), seed=4)
    subs, _ = generate_cohort(spec)
    a = _band_power(_by(subs, Disease.DN_PLUS), 1, (8, 13), spec.rate)
    b = _band_power(_by(subs, Disease.DN_MINUS), 1, (8, 13), spec.rate)
    assert stats.ttest_ind(np.log(a), np.log(b), equal_var=False).pvalue > 0.01


def test_gender_effect_lands_on_affected_group():
    spec = SynthSpec(**SMALL, seed=5)
    subs, gt = generate_cohort(spec)
    fem = _band_power([s for s in subs if s.gender is Gender.FEMALE], 2, (18, 25), spec.rate)
    male = _band_power([s for s in subs if s.gender is Gender.MALE], 2, (18, 25), spec.rate)
    assert fem.mean() > 2.5 * male.mean()
    assert all(t.gender_scale == 2.0 for t in gt.subjects if t.gender is Gender.FEMALE)


def test_cell_counts_and_domain_groups():
    spec = SynthSpec(**SMALL, n_domain_groups=3, seed=0)
    subs, gt = generate_cohort(spec)
    assert len(subs) == 32
    for d in Disease:
        for g in Gender:
            assert sum(s.disease is d and s.gender is g for s in subs) == 8
    counts = np.bincount(list(gt.group_of().values()))
    assert counts.max() - counts.min() <= 4


def test_rerender_keeps_truth_changes_noise():
    spec = SynthSpec(**SMALL, seed=1)
    subs, gt = generate_cohort(spec)
    same = rerender(gt, 1)
    other = rerender(gt, 2)
    assert all(a.trials == b.trials for a, b in zip(subs, same))
    assert not any(a.trials == b.trials for a, b in zip(subs, other))


def test_noise_generators_unit_variance():
    rng = np.random.default_rng(0)
    assert colored_noise(rng, (64, 1024), 1.0).var() == pytest.approx(1.0, rel=0.1)
    x = band_limited(rng, (64, 1024), (8, 13), 128)
    assert x.var() == pytest.approx(1.0, rel=0.1)
    f, p = periodogram(x, fs=128, axis=-1)
    assert p[:, (f < 7.5) | (f > 13.5)].max() < 1e-20


def test_domain_shift_mixes_channels():
    spec = SynthSpec(**SMALL, domain_shift=1.0, seed=3)
    _, gt = generate_cohort(spec)
    assert not np.allclose(gt.mixing[0], np.eye(4))
    _, gt0 = generate_cohort(SynthSpec(**SMALL, seed=3))
    np.testing.assert_array_equal(gt0.mixing, np.broadcast_to(np.eye(4), gt0.mixing.shape))


def test_ground_truth_round_trip(tmp_path):
    subs, gt = generate_cohort(SynthSpec(**SMALL, seed=6))
    save_synthetic(subs, gt, tmp_path / "c")
    back = load_ground_truth(tmp_path / "c")
    assert isinstance(back, PlantedGroundTruth) and back.spec == gt.spec
    np.testing.assert_array_equal(back.mixing, gt.mixing)
    assert all(a.trials == b.trials for a, b in zip(subs, rerender(back, 6)))


def test_invalid_spec():
    with pytest.raises(SynthError):
        SynthSpec(**{**SMALL, "channels": 4}, class_effect=Effect((9,))).validate()
