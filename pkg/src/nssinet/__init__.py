"""Semi-supervised multi-concept adversarial EEG classification on synthetic cohorts."""

__version__ = "0.1.0"
