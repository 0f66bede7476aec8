"""Loss terms of the multi-concept objective.

GAN and reconstruction terms are batch means; the gender, domain and disease
cross-entropies are batch sums. Probabilities are clamped to [1e-7, 1 - 1e-7]
before any log.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import torch

log = logging.getLogger(__name__)

EPS = 1e-7


class LossContractError(ValueError):
    pass


def _clamp(p: torch.Tensor) -> torch.Tensor:
    return p.clamp(EPS, 1 - EPS)


def loss_gan(d_real: torch.Tensor, d_fake: torch.Tensor) -> torch.Tensor:
    """mean log D(X) + mean log(1 - D(G(X))); the discriminator ascends this."""
    return torch.log(_clamp(d_real)).mean() + torch.log(1 - _clamp(d_fake)).mean()


def loss_reconstruction(x: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    """Squared L2 error per sample, averaged over the batch."""
    if x.shape != x_hat.shape:
        raise LossContractError(f"shape mismatch {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    return (x - x_hat).pow(2).reshape(x.shape[0], -1).sum(dim=1).mean()


def loss_signal(x: torch.Tensor, x_hat: torch.Tensor, d_real: torch.Tensor,
                d_fake: torch.Tensor, lam: float) -> tuple[torch.Tensor, torch.Tensor]:
    """(generator term, discriminator term) of the signal min-max.

    The generator uses the non-saturating surrogate -mean log D(G(X)).
    """
    disc = -loss_gan(d_real, d_fake)
    gen = -torch.log(_clamp(d_fake)).mean()
    if lam:
        gen = gen + lam * loss_reconstruction(x, x_hat)
    return gen, disc


def loss_gender(e_male: torch.Tensor, e_female: torch.Tensor) -> torch.Tensor:
    """-sum log e(O_male) - sum log(1 - e(O_female)); ``e`` is P(male)."""
    if e_male.numel() == 0 or e_female.numel() == 0:
        log.debug("degenerate batch: %d male, %d female samples", e_male.numel(), e_female.numel())
    return -torch.log(_clamp(e_male)).sum() - torch.log(1 - _clamp(e_female)).sum()


def loss_domain(d_probs: torch.Tensor, onehot: torch.Tensor) -> torch.Tensor:
    """Categorical cross-entropy summed over the batch."""
    if d_probs.shape != onehot.shape:
        raise LossContractError("domain probabilities and labels differ in shape")
    ones = onehot.sum(dim=-1)
    if not (torch.all((onehot == 0) | (onehot == 1)) and torch.all(ones == 1)):
        raise LossContractError("domain labels are not one-hot")
    if d_probs.numel() and not torch.allclose(d_probs.sum(dim=-1), torch.ones_like(ones), atol=1e-5):
        raise LossContractError("domain probabilities do not sum to 1")
    return -(onehot * torch.log(_clamp(d_probs))).sum()


def loss_disease(f_probs: torch.Tensor, y: torch.Tensor, domains=None) -> torch.Tensor:
    """Binary cross-entropy summed over labeled-source samples only.

    ``domains`` (domain indices or tags), when given, must all be the labeled
    source.
    """
    if domains is not None:
        from ..cohort import Domain
        idx = [d.index if isinstance(d, Domain) else int(d) for d in domains]
        if any(i != Domain.S_L.index for i in idx):
            raise LossContractError("disease loss received samples outside the labeled source")
    if f_probs.shape != y.shape:
        raise LossContractError("disease predictions and labels differ in shape")
    p = _clamp(f_probs)
    y = y.to(p.dtype)
    return -(y * torch.log(p) + (1 - y) * torch.log(1 - p)).sum()


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    delta: float = 1.0
    theta: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "delta", "theta", "lam"):
            v = getattr(self, name)
            if not (v >= 0 and v != float("inf")):
                raise ValueError(f"loss weight {name} must be finite and non-negative, got {v}")

    @classmethod
    def ratio(cls, a, b, d, t, lam: float = 1.0) -> "LossWeights":
        return cls(a, b, d, t, lam)


def total_loss(components, weights: LossWeights):
    """alpha*L_signal + beta*L_gender + delta*L_disc + theta*L_disease."""
    signal, gender, disc, disease = components
    return (weights.alpha * signal + weights.beta * gender + weights.delta * disc
            + weights.theta * disease)
