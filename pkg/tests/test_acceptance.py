"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (visible with ``pytest -v``)
before asserting. Run only this file with ``pytest tests/test_acceptance.py -v``.
"""
import json
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import torch

import test_properties
from conftest import TINY_CONFIG
from gradcases import GENERATOR_LOSSES, HEAD_LOSSES, TOL, losses, make_setup
from nssinet.adversarial import (LossWeights, TrainConfig, assemble, extract_features, loss_disease,
                                 loss_domain, loss_gan, loss_gender, total_loss, train)
from nssinet.cli import COMMANDS, main
from nssinet.cohort import DomainAssignment, make_folds
from nssinet.config import load_config
from nssinet.evaluation import CVReport, CVSettings, bandpower_cv, channel_importance
from nssinet.evaluation.baseline import probe_accuracy
from nssinet.evaluation.cv import generator_config_for
from nssinet.evaluation.sweeps import TAU_GRID, VARIANT_NAMES, WEIGHT_RATIOS, SweepTable
from nssinet.netcore import GeneratorConfig, build_generator, check_gradients, parameter_table
from nssinet.synthgen import Effect, SynthSpec, generate_cohort
from reference_table import REPORTED_TOTAL, ARCHITECTURE_ROWS

ROOT = Path(__file__).resolve().parents[1]
SMALL_SYNTH = ROOT / "configs" / "small_synth.json"

# domain-invariance probe (criterion 7)
INVARIANCE_SPEC = SynthSpec(n_per_cell=15, channels=8, trials_per_subject=2, trial_seconds=5.0,
                            domain_shift=0.5, class_effect=Effect((3,), (8.0, 13.0), 2.0),
                            seed=7)
INVARIANCE_TRAIN = TrainConfig(epochs=40)
INVARIANCE_WEIGHTS = LossWeights(delta=5.0, lam=1.0)
INVARIANCE_SEEDS = (0, 1, 2)

# channel localization (criterion 8)
LOCALIZATION_CHANNEL = 3
LOCALIZATION_TRAIN = TrainConfig(epochs=15)
LOCALIZATION_SETTINGS = CVSettings(k=5)
LOCALIZATION_SEEDS = (0, 1, 2, 3, 4)


@pytest.fixture
def verdict(capsys):
    def report(criterion: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
        assert ok, detail
    return report


def test_1_parameter_exactness(verdict):
    t = time.perf_counter()
    gen = build_generator(GeneratorConfig(channels=63, points=384))
    ours = {row: n for row, _, n in parameter_table(gen)}
    wrong = [(row, ours.get(row), n) for row, _, _, n in ARCHITECTURE_ROWS if ours.get(row) != n]
    total = sum(p.numel() for p in gen.parameters() if p.requires_grad)
    elapsed = time.perf_counter() - t
    ok = not wrong and total == REPORTED_TOTAL and elapsed < 1.0
    verdict(1, ok, f"{len(ARCHITECTURE_ROWS) - len(wrong)}/{len(ARCHITECTURE_ROWS)} rows match; total {total:,} "
                   f"vs required {REPORTED_TOTAL:,} (row sum {sum(r[3] for r in ARCHITECTURE_ROWS):,}); "
                   f"{elapsed:.2f}s")


def test_2_shape_exactness(verdict):
    t = time.perf_counter()
    gen = build_generator(GeneratorConfig(channels=63, points=384))
    mismatched = []
    for batch in (1, 3):
        trace = gen(torch.randn(batch, 1, 63, 384), dropout_seed=0)
        mismatched += [(batch, row) for row, _, shape, _ in ARCHITECTURE_ROWS
                       if trace.shapes.get(row) != (batch, *shape)]
    elapsed = time.perf_counter() - t
    verdict(2, not mismatched and elapsed < 5.0,
            f"{2 * len(ARCHITECTURE_ROWS) - len(mismatched)}/{2 * len(ARCHITECTURE_ROWS)} batched shapes match; "
            f"{elapsed:.2f}s")


def test_3_gradient_correctness(verdict):
    t = time.perf_counter()
    gen, heads, *data = make_setup()
    failures, checked = [], 0
    for loss_name in GENERATOR_LOSSES:
        res = check_gradients(lambda: losses(gen, heads, *data)[loss_name],
                              list(gen.named_parameters()), n_coords=20, rtol=TOL)
        checked += len(res)
        failures += [(loss_name, k, v.rel_error) for k, v in res.items() if not v.passed]
    for head, loss_name in HEAD_LOSSES:
        res = check_gradients(lambda: losses(gen, heads, *data)[loss_name], heads.named(head),
                              n_coords=20, rtol=TOL)
        checked += len(res)
        failures += [(loss_name, k, v.rel_error) for k, v in res.items() if v.rel_error >= TOL]
    elapsed = time.perf_counter() - t
    verdict(3, not failures and elapsed < 120,
            f"{checked - len(failures)}/{checked} (loss, tensor) checks within {TOL:g}; "
            f"{elapsed:.1f}s; failures {failures[:3]}")


def test_4_analytic_loss_values(verdict):
    half = lambda n: torch.full((n,), 0.5, dtype=torch.float64)  # noqa: E731
    n = 48
    errs = {
        "gan": abs(loss_gan(half(n), half(n)).item() + 2 * math.log(2)),
        "gender": abs(loss_gender(half(30), half(18)).item() - n * math.log(2)),
        "domain": abs(loss_domain(torch.full((n, 3), 1 / 3, dtype=torch.float64),
                                  torch.nn.functional.one_hot(torch.arange(n) % 3, 3).double())
                      .item() - n * math.log(3)),
        "disease": abs(loss_disease(half(n), (torch.arange(n) % 2).double()).item()
                       - n * math.log(2)),
    }
    rng = np.random.default_rng(0)
    comps = rng.normal(size=4) * 10
    w = LossWeights(*rng.uniform(0, 3, size=4))
    additive = abs(total_loss(tuple(comps), w)
                   - (w.alpha * comps[0] + w.beta * comps[1] + w.delta * comps[2]
                      + w.theta * comps[3]))
    ok = max(errs.values()) < 1e-6 and additive < 1e-9
    verdict(4, ok, f"max closed-form error {max(errs.values()):.2e}; additivity {additive:.1e}")


def test_5_protocol_invariants(verdict):
    t = time.perf_counter()
    props = [test_properties.test_folds_partition_subjects,
             test_properties.test_domain_sets_are_disjoint_subject_level,
             test_properties.test_balanced_sampling_quotas,
             test_properties.test_stratified_folds_balance_disease,
             test_properties.test_disease_head_gets_no_gradient_from_unlabeled_or_target]
    failures = []
    for prop in props:
        try:
            prop()
        except Exception as e:  # report every property, not just the first
            failures.append(f"{prop.__name__}: {type(e).__name__}")
    elapsed = time.perf_counter() - t
    cases = test_properties.CASES * len(props)
    verdict(5, not failures and cases >= 1000 and elapsed < 60,
            f"{cases} randomized cases, {len(failures)} failing properties {failures}; "
            f"{elapsed:.1f}s")


def test_6_planted_signal_learning(verdict, tmp_path):
    t = time.perf_counter()
    out = tmp_path / "cv"
    code = main(["cv", "--config", str(SMALL_SYNTH), "--out", str(out)])
    elapsed = time.perf_counter() - t
    report = CVReport.load(out / "cv_report.json") if code == 0 else None
    cfg = load_config(SMALL_SYNTH)
    subjects, _ = generate_cohort(cfg.synth)
    plan = make_folds(subjects, cfg.cv.k, cfg.seed)
    oracle = bandpower_cv(subjects, plan, cfg.cv.k, cfg.seed, cfg.cv.window_seconds,
                          cfg.cv.normalize).mean()
    mean = report.mean if report else float("nan")
    ok = code == 0 and mean >= 0.85 and oracle >= 0.95 and elapsed <= 30 * 60
    verdict(6, ok, f"CV mean accuracy {mean:.4f} (>= 0.85); band-power oracle {oracle:.4f} "
                   f"(>= 0.95); {len(subjects)} subjects; {elapsed / 60:.1f} min single-threaded")


def _probe(seed: int, adversarial: bool) -> float:
    subjects, gt = generate_cohort(INVARIANCE_SPEC)
    groups = gt.group_of()
    sets = [[s for s, g in groups.items() if g == d] for d in range(3)]
    data = assemble(subjects, DomainAssignment(*sets, 75.0), 1.0, "sample")
    gen_config = generator_config_for(subjects, CVSettings())
    if adversarial:
        config, weights = INVARIANCE_TRAIN, INVARIANCE_WEIGHTS
    else:
        config = replace(INVARIANCE_TRAIN, use_gender=False, use_domain=False)
        weights = replace(INVARIANCE_WEIGHTS, beta=0.0, delta=0.0)
    state, _ = train(data, gen_config, config, weights, seed=seed)
    return probe_accuracy(extract_features(state, data.x), data.domain, data.subject)


def test_7_domain_invariance(verdict):
    t = time.perf_counter()
    adv = [_probe(s, True) for s in INVARIANCE_SEEDS]
    abl = [_probe(s, False) for s in INVARIANCE_SEEDS]
    chance = 1 / 3
    adv_m, abl_m = float(np.mean(adv)), float(np.mean(abl))
    ok = abs(adv_m - chance) <= 0.15 and abl_m - chance >= 0.30
    verdict(7, ok, f"probe on adversarial features {adv_m:.3f} {np.round(adv, 3).tolist()} "
                   f"(need within 0.15 of 0.333); beta=delta=0 {abl_m:.3f} "
                   f"{np.round(abl, 3).tolist()} (need >= 0.633); "
                   f"{(time.perf_counter() - t) / 60:.1f} min")


def test_8_channel_localization(verdict):
    t = time.perf_counter()
    hits, tops = 0, []
    for seed in LOCALIZATION_SEEDS:
        spec = SynthSpec(n_per_cell=10, channels=8, trials_per_subject=1, trial_seconds=4.0,
                         class_effect=Effect((LOCALIZATION_CHANNEL,), (8.0, 13.0), 2.0),
                         seed=100 + seed)
        subjects, _ = generate_cohort(spec)
        cmap = channel_importance(subjects, LOCALIZATION_TRAIN, LossWeights(),
                                  LOCALIZATION_SETTINGS, seed=seed)
        score = cmap.scores["all"][LOCALIZATION_CHANNEL]
        tops.append(cmap.ranking[0])
        hits += int(score == 1.0 and cmap.ranking[0] == f"ch{LOCALIZATION_CHANNEL}")
    verdict(8, hits >= 4, f"planted channel ch{LOCALIZATION_CHANNEL} ranked first with score "
                          f"1.0 in {hits}/{len(LOCALIZATION_SEEDS)} seeds (top: {tops}); "
                          f"{(time.perf_counter() - t) / 60:.1f} min")


def _numeric_outputs(run: Path) -> dict[str, bytes]:
    out = {}
    for p in sorted(run.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            out[str(p.relative_to(run))] = p.read_bytes()
    m = json.loads((run / "manifest.json").read_text())
    for volatile in ("started", "finished"):
        m.pop(volatile, None)
    out["manifest.json"] = json.dumps(m, sort_keys=True).encode()
    return out


def test_9_determinism(verdict, tmp_path):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps(TINY_CONFIG))
    differing = []
    for cmd in [c for c in COMMANDS if c != "report"]:
        runs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{cmd}-{rep}"
            assert main([cmd, "--config", str(cfg), "--out", str(out), "--deterministic"]) == 0
            runs.append(_numeric_outputs(out))
        if runs[0] != runs[1]:
            differing.append(cmd)
    for rep in ("a", "b"):
        assert main(["report", str(tmp_path / f"cv-{rep}"), "--out",
                     str(tmp_path / f"report-{rep}")]) == 0
    if (tmp_path / "report-a" / "summary.json").read_text().replace("cv-a", "cv-b") != \
            (tmp_path / "report-b" / "summary.json").read_text():
        differing.append("report")
    verdict(9, not differing, f"{len(COMMANDS)} subcommands run twice; differing: "
                              f"{differing or 'none'}")


def test_10_harness_completeness(verdict, tmp_path):
    config = json.loads(json.dumps(TINY_CONFIG))
    # 28 subjects, 21 per training fold: 5% of them still labels one subject
    config["synth"]["n_per_cell"] = 7
    config["sweep_ratio"] = {"taus": list(TAU_GRID)}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(config))
    tables = {}
    for cmd, stem in (("ablate", "ablation"), ("sweep-weights", "sweep_weights"),
                      ("sweep-ratio", "sweep_ratio")):
        out = tmp_path / cmd
        assert main([cmd, "--config", str(path), "--out", str(out)]) == 0
        tables[cmd] = SweepTable.from_dict(json.loads((out / f"{stem}.json").read_text()))
    ablation = [r.point for r in tables["ablate"].rows]
    weights = [tuple(r.params[k] for k in ("alpha", "beta", "delta", "theta"))
               for r in tables["sweep-weights"].rows]
    taus = [r.params["tau"] for r in tables["sweep-ratio"].rows]
    expected_ablation = ["no_signal", "no_gender", "no_domain", "traditional_domain", "full",
                         "signal+disease", "signal+gender+disease", "gender+domain+disease",
                         "signal+gender+domain+disease"]
    ok = (ablation == expected_ablation == list(VARIANT_NAMES)
          and weights == [tuple(map(float, r)) for r in WEIGHT_RATIOS]
          and taus == [float(t) for t in TAU_GRID] and min(taus) == 5 and max(taus) == 85)
    verdict(10, ok, f"ablate rows {len(ablation)} (5 ablations + 4 combinations), sweep-weights rows "
                    f"{len(weights)}, sweep-ratio rows {len(taus)} over {taus[0]:g}..{taus[-1]:g}%")
