import pytest

from nssinet.runtime import configure
from nssinet.synthgen import Effect, SynthSpec, generate_cohort


def pytest_configure(config):
    configure(deterministic=True)


@pytest.fixture(scope="session")
def tiny_cohort():
    """24 subjects, 4 channels, 2 s trials at 64 Hz: fast enough for training tests."""
    spec = SynthSpec(n_per_cell=6, channels=4, rate=64, trials_per_subject=1, trial_seconds=2,
                     class_effect=Effect((1,), (8, 13), 2.0), gender_effect=Effect((2,), (18, 25), 1.0),
                     seed=3)
    subjects, _ = generate_cohort(spec)
    return subjects


TINY_CONFIG = {
    "seed": 0,
    "synth": {"n_per_cell": 4, "channels": 2, "rate": 64, "trials_per_subject": 1,
              "trial_seconds": 2.0,
              "class_effect": {"channels": [0], "band": [8.0, 13.0], "amplitude": 2.0},
              "gender_effect": {"channels": [1], "band": [18.0, 25.0], "amplitude": 1.0},
              "seed": 1},
    "cohort": {"quota_female": 2, "quota_male": 1},
    "train": {"epochs": 1, "head_hidden": 8},
    "cv": {"k": 4},
    "sweep_ratio": {"taus": [25, 75]},
    "sampling": {"rounds": 2},
    "channels": {"epochs": 1},
}


@pytest.fixture
def tiny_config(tmp_path):
    """A config every subcommand finishes in seconds."""
    import json
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return path
