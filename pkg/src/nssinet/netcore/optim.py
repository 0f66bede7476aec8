from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
import torch


def rmsprop_step(params, grads, state, lr: float, decay: float = 0.99, epsilon: float = 1e-8,
                 weight_decay: float = 0.0, decay_mask: Sequence[bool] | None = None):
    """One RMSprop update on parallel lists of arrays (numpy or torch).

    The L2 term ``weight_decay * p`` is folded into the gradient before the
    squared-gradient accumulator and the step see it. Returns new
    ``(params, state)``; the inputs are not modified.
    """
    if lr <= 0:
        raise ValueError("lr must be positive")
    if decay_mask is None:
        decay_mask = [True] * len(params)
    new_p, new_s = [], []
    for p, g, s, use_wd in zip(params, grads, state, decay_mask, strict=True):
        if p.shape != g.shape or p.shape != s.shape:
            raise ValueError(f"shape mismatch: param {tuple(p.shape)}, grad {tuple(g.shape)}, "
                             f"state {tuple(s.shape)}")
        if weight_decay and use_wd:
            g = g + weight_decay * p
        s = decay * s + (1 - decay) * g * g
        sqrt = torch.sqrt if isinstance(s, torch.Tensor) else np.sqrt
        new_p.append(p - lr * g / (sqrt(s) + epsilon))
        new_s.append(s)
    return new_p, new_s


class RMSprop:
    """In-place RMSprop over torch parameters; L2 applies to weights only."""

    def __init__(self, named_params: Iterable[tuple[str, torch.nn.Parameter]], lr: float = 1e-3,
                 decay: float = 0.99, epsilon: float = 1e-8, weight_decay: float = 0.0):
        self.named = list(named_params)
        self.lr, self.decay, self.epsilon, self.weight_decay = lr, decay, epsilon, weight_decay
        self.state = [torch.zeros_like(p) for _, p in self.named]
        self.decay_mask = [is_weight(n, p) for n, p in self.named]

    @property
    def params(self) -> list[torch.nn.Parameter]:
        return [p for _, p in self.named]

    @torch.no_grad()
    def step(self, grads: Sequence[torch.Tensor]) -> None:
        params = [p.detach() for p in self.params]
        new_p, self.state = rmsprop_step(params, list(grads), self.state, self.lr, self.decay,
                                         self.epsilon, self.weight_decay, self.decay_mask)
        for p, v in zip(self.params, new_p):
            p.copy_(v)


def is_weight(name: str, p: torch.Tensor) -> bool:
    # biases and BatchNorm affine parameters (1-D) are exempt from L2
    return "bias" not in name.rsplit(".", 1)[-1] and p.dim() > 1
