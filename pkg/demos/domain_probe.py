"""How much domain information survives in the latent features?

Builds a cohort whose three subject groups see different channel mixings,
uses the groups as labeled source, unlabeled source and target, and fits a
fresh linear probe to the frozen features of two models: one trained with
the gender and domain adversaries and one with both switched off.

    python demos/domain_probe.py [epochs]
"""
import sys
from dataclasses import replace

from nssinet.adversarial import LossWeights, TrainConfig, assemble, extract_features, train
from nssinet.cohort import DomainAssignment
from nssinet.evaluation.baseline import bandpower_features, probe_accuracy
from nssinet.evaluation.cv import CVSettings, generator_config_for
from nssinet.runtime import configure
from nssinet.synthgen import Effect, SynthSpec, generate_cohort


def main(epochs: int = 40):
    configure(deterministic=True)
    spec = SynthSpec(n_per_cell=15, channels=8, trials_per_subject=2, trial_seconds=5.0,
                     domain_shift=0.5, class_effect=Effect((3,), (8.0, 13.0), 2.0), seed=7)
    subjects, truth = generate_cohort(spec)
    groups = truth.group_of()
    sets = [[s for s, g in groups.items() if g == d] for d in range(3)]
    data = assemble(subjects, DomainAssignment(*sets, 75.0), 1.0, "sample")
    print("probe on raw band power:",
          round(probe_accuracy(bandpower_features(data.x, spec.rate), data.domain,
                               data.subject), 3))

    gen_config = generator_config_for(subjects, CVSettings())
    base = TrainConfig(epochs=epochs)
    for name, config, weights in (
            ("adversarial", base, LossWeights(delta=5.0)),
            ("beta=delta=0", replace(base, use_gender=False, use_domain=False),
             LossWeights(beta=0.0, delta=0.0))):
        state, _ = train(data, gen_config, config, weights, seed=0)
        acc = probe_accuracy(extract_features(state, data.x), data.domain, data.subject)
        print(f"probe on {name} features: {acc:.3f} (chance 0.333)")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 40)
