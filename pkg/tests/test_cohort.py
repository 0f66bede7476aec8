import numpy as np
import pytest

from nssinet.cohort import (CohortError, Disease, Domain, DomainAssignment, Gender, ManifestError,
                            Subject, Trial, balanced_sample, load_cohort, make_folds, resample,
                            save_cohort, segment, split_source, stack_samples, zscore)


def _subjects(n_per_cell, trials=1, n=128, rate=64):
    rng = np.random.default_rng(0)
    out, i = [], 0
    for d in Disease:
        for g in Gender:
            for _ in range(n_per_cell):
                tr = tuple(Trial(rng.normal(size=(2, n)), rate) for _ in range(trials))
                out.append(Subject(f"S{i:03d}", g, d, tr))
                i += 1
    return out


def test_resample_500_to_384():
    t = Trial(np.random.default_rng(0).normal(size=(3, 2500)), 500)
    r = resample(t, 384)
    assert r.rate == 384 and r.data.shape == (3, 1920)


def test_resample_identity_and_constant():
    t = Trial(np.full((2, 2500), 7.0), 500)
    assert resample(t, 500) is t
    r = resample(t, 384)
    np.testing.assert_allclose(r.data, 7.0, atol=1e-4)


def test_resample_keeps_low_frequency_tone():
    s = np.arange(5000) / 500
    t = Trial(np.sin(2 * np.pi * 10 * s)[None], 500)
    r = resample(t, 384).data[0]
    ref = np.sin(2 * np.pi * 10 * np.arange(3840) / 384)
    assert np.max(np.abs(r[200:-200] - ref[200:-200])) < 1e-2


def test_resample_errors():
    t = Trial(np.zeros((1, 1001)), 500)
    with pytest.raises(CohortError, match="integer"):
        resample(t, 384)
    with pytest.raises(CohortError, match="upsampling"):
        resample(t, 1000)


def test_segment_drops_partial_tail():
    t = Trial(np.arange(2 * 10, dtype=float).reshape(2, 10), 4)
    parts = segment(t, 1.0)
    assert len(parts) == 2
    np.testing.assert_array_equal(parts[1].x, t.data[:, 4:8])
    with pytest.raises(CohortError, match="longer"):
        segment(t, 5.0)
    with pytest.raises(CohortError, match="whole number"):
        segment(t, 0.3)


def test_zscore_modes():
    x = np.random.default_rng(0).normal(3, 2, size=(4, 3, 50)).astype(np.float32)
    x[:, 0] *= 5
    c = zscore(x, "channel")
    np.testing.assert_allclose(c.mean(-1), 0, atol=1e-5)
    np.testing.assert_allclose(c.std(-1), 1, atol=1e-4)
    s = zscore(x, "sample")
    np.testing.assert_allclose(s.std(axis=(-2, -1)), 1, atol=1e-4)
    # relative channel power survives sample normalization
    assert (s[:, 0].std(-1) > 2 * s[:, 1].std(-1)).all()
    assert zscore(x, "none") is x
    with pytest.raises(CohortError, match="normalization"):
        zscore(x, "global")


def test_stack_samples_shape():
    subs = _subjects(1, n=128)
    x = stack_samples(segment(subs[0].trials[0], 1.0, subs[0]), "sample")
    assert x.shape == (2, 1, 2, 64) and x.dtype == np.float32


def test_trial_rejects_bad_data():
    with pytest.raises(CohortError, match="non-finite"):
        Trial(np.array([[0.0, np.nan]]), 10)
    with pytest.raises(CohortError, match="2-D"):
        Trial(np.zeros(5), 10)
    with pytest.raises(CohortError, match="rate"):
        Trial(np.zeros((1, 5)), 0)


def test_balanced_sample_quotas():
    subs = _subjects(20)
    bal = balanced_sample(subs, 3)
    for group in (bal.dn_plus, bal.dn_minus):
        assert sum(s.gender is Gender.FEMALE for s in group) == 18
        assert sum(s.gender is Gender.MALE for s in group) == 12
    assert balanced_sample(subs, 3) == bal
    with pytest.raises(CohortError, match="quota"):
        balanced_sample(_subjects(10), 0)


def test_folds_partition_subjects():
    subs = _subjects(15)
    plan = make_folds(subs, 10, 0)
    tests = [set(te) for _, te in plan.folds]
    assert set().union(*tests) == {s.id for s in subs}
    assert sum(map(len, tests)) == len(subs)
    for tr, te in plan.folds:
        assert not set(tr) & set(te) and len(te) == 6
    assert make_folds(subs, 10, 0).digest() == plan.digest()
    assert make_folds(subs, 10, 1).digest() != plan.digest()
    with pytest.raises(CohortError):
        make_folds(subs, 1, 0)


def test_split_source_counts():
    ids = [f"S{i}" for i in range(54)]
    a = split_source(ids, 75, 0, target=["T1"])
    assert len(a.labeled_source) == 40 and len(a.unlabeled_source) == 14
    assert a.domain_of("T1") is Domain.T
    assert len(split_source(ids, 10, 0).labeled_source) == 5
    with pytest.raises(CohortError, match="labels nobody"):
        split_source(ids[:5], 5, 0)
    with pytest.raises(CohortError, match="disjoint"):
        DomainAssignment({"a"}, {"a"}, set(), 50)


def test_save_load_round_trip(tmp_path):
    subs = _subjects(2, trials=2)
    save_cohort(subs, tmp_path / "c", channel_names=["Fz", "Cz"])
    back = load_cohort(tmp_path / "c")
    assert [s.id for s in back] == [s.id for s in subs]
    for a, b in zip(subs, back):
        assert a.trials == b.trials and a.gender is b.gender and a.disease is b.disease


def test_load_reports_shape_mismatch(tmp_path):
    subs = _subjects(1)
    save_cohort(subs, tmp_path / "c")
    f = tmp_path / "c" / "S000.f32"
    f.write_bytes(f.read_bytes() + np.zeros(128, "<f4").tobytes())
    with pytest.raises(ManifestError, match="3 channel rows"):
        load_cohort(tmp_path / "c")
    with pytest.raises(ManifestError, match="no manifest"):
        load_cohort(tmp_path / "missing")
