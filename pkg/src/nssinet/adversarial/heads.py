from __future__ import annotations

import torch
from torch import nn

from ..netcore.layers import uniform_fan_in_


class MLPHead(nn.Module):
    """input -> hidden ReLU -> logits."""

    def __init__(self, in_features: int, out_features: int, hidden: int = 64):
        super().__init__()
        self.fc1 = nn.Linear(in_features, hidden)
        self.fc2 = nn.Linear(hidden, out_features)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(torch.relu(self.fc1(x.flatten(1))))

    def probabilities(self, x: torch.Tensor) -> torch.Tensor:
        logits = self(x)
        if logits.shape[-1] == 1:
            return torch.sigmoid(logits).squeeze(-1)
        return torch.softmax(logits, dim=-1)


class Heads(nn.Module):
    """The four discriminator / classifier heads.

    ``signal`` judges real vs reconstructed EEG, ``gender`` outputs
    P(male), ``domain`` a softmax over the domains and ``disease`` P(DN+).
    """

    def __init__(self, flat_size: int, signal_size: int, n_domains: int = 3, hidden: int = 64):
        super().__init__()
        self.signal = MLPHead(signal_size, 1, hidden)
        self.gender = MLPHead(flat_size, 1, hidden)
        self.domain = MLPHead(flat_size, n_domains, hidden)
        self.disease = MLPHead(flat_size, 1, hidden)

    def reset_parameters(self, seed: int) -> None:
        g = torch.Generator().manual_seed(int(seed))
        for m in self.modules():
            if isinstance(m, nn.Linear):
                uniform_fan_in_(m.weight, m.in_features, g)
                nn.init.zeros_(m.bias)

    def named(self, head: str) -> list[tuple[str, nn.Parameter]]:
        return [(f"{head}.{n}", p) for n, p in getattr(self, head).named_parameters()]


def build_heads(flat_size: int, signal_size: int, n_domains: int = 3, hidden: int = 64,
                seed: int = 0, dtype: torch.dtype = torch.float32) -> Heads:
    heads = Heads(flat_size, signal_size, n_domains, hidden)
    heads.reset_parameters(seed)
    return heads.to(dtype)
