"""Layers the generator needs beyond stock torch: index-recording max pooling
along time, a bidirectional GRU with explicit gate weights, seeded dropout."""
from __future__ import annotations

import math
from typing import NamedTuple

import torch
from torch import nn


class IndexMismatchError(ValueError):
    pass


def max_pool(x: torch.Tensor, width: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Non-overlapping max pooling over the last axis.

    Returns the pooled values and the absolute position of each maximum in the
    input's last axis. Ties go to the lowest index.
    """
    t = x.shape[-1]
    if t % width:
        raise ValueError(f"pool width {width} does not divide length {t}")
    windows = x.reshape(*x.shape[:-1], t // width, width)
    # torch.argmax returns the first maximal index on ties
    local = windows.argmax(dim=-1)
    y = windows.gather(-1, local.unsqueeze(-1)).squeeze(-1)
    offsets = torch.arange(0, t, width, device=x.device)
    return y, local + offsets


def max_unpool(y: torch.Tensor, indices: torch.Tensor, width: int) -> torch.Tensor:
    """Place ``y`` at ``indices`` in a zero tensor ``width`` times longer."""
    if indices.shape != y.shape:
        raise IndexMismatchError(f"indices shape {tuple(indices.shape)} does not match "
                                 f"values shape {tuple(y.shape)}")
    m = y.shape[-1]
    window = torch.div(indices, width, rounding_mode="floor")
    if not torch.equal(window, torch.arange(m, device=y.device).expand_as(indices)):
        raise IndexMismatchError("indices do not come from a pool of this width and length")
    out = y.new_zeros(*y.shape[:-1], m * width)
    return out.scatter(-1, indices, y)


class GRUWeights(NamedTuple):
    """Gate blocks are stacked (reset, update, candidate) along the first axis."""
    weight_ih: torch.Tensor   # [3H, In]
    weight_hh: torch.Tensor   # [3H, H]
    bias_ih: torch.Tensor     # [3H]
    bias_hh: torch.Tensor     # [3H]


def gru_scan(w: GRUWeights, seq: torch.Tensor, reverse: bool = False) -> torch.Tensor:
    """Run one GRU direction over ``seq`` [B, M, In] from a zero state.

    r = sig(W_ir x + b_ir + W_hr h + b_hr)
    z = sig(W_iz x + b_iz + W_hz h + b_hz)
    n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
    h = (1 - z) * n + z * h
    """
    hidden = w.weight_hh.shape[1]
    b, m, _ = seq.shape
    gx = seq @ w.weight_ih.T + w.bias_ih          # all input projections at once
    h = seq.new_zeros(b, hidden)
    steps = range(m - 1, -1, -1) if reverse else range(m)
    out = [None] * m
    for t in steps:
        gh = h @ w.weight_hh.T + w.bias_hh
        xr, xz, xn = gx[:, t].chunk(3, dim=-1)
        hr, hz, hn = gh.chunk(3, dim=-1)
        r = torch.sigmoid(xr + hr)
        z = torch.sigmoid(xz + hz)
        n = torch.tanh(xn + r * hn)
        h = (1 - z) * n + z * h
        out[t] = h
    return torch.stack(out, dim=1)


def bigru_forward(weights: tuple[GRUWeights, GRUWeights], seq: torch.Tensor) -> torch.Tensor:
    """Bidirectional GRU: [.., M, In] -> [.., M, 2H], forward block first.

    The backward direction reads the sequence in reverse and its outputs are
    re-aligned to forward time.
    """
    squeeze = seq.dim() == 2
    if squeeze:
        seq = seq.unsqueeze(0)
    if seq.dim() != 3:
        raise ValueError(f"expected [B, M, In] or [M, In], got {tuple(seq.shape)}")
    fwd, bwd = weights
    if seq.shape[-1] != fwd.weight_ih.shape[1]:
        raise ValueError("input width does not match the GRU input weights")
    out = torch.cat([gru_scan(fwd, seq), gru_scan(bwd, seq, reverse=True)], dim=-1)
    return out.squeeze(0) if squeeze else out


class BiGRU(nn.Module):
    """Single-layer bidirectional GRU, 2 * 3H * (In + H + 2) parameters."""

    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.input_size, self.hidden_size = input_size, hidden_size
        for d in ("fwd", "bwd"):
            self.register_parameter(f"weight_ih_{d}", nn.Parameter(torch.empty(3 * hidden_size, input_size)))
            self.register_parameter(f"weight_hh_{d}", nn.Parameter(torch.empty(3 * hidden_size, hidden_size)))
            self.register_parameter(f"bias_ih_{d}", nn.Parameter(torch.empty(3 * hidden_size)))
            self.register_parameter(f"bias_hh_{d}", nn.Parameter(torch.empty(3 * hidden_size)))

    def direction(self, d: str) -> GRUWeights:
        return GRUWeights(getattr(self, f"weight_ih_{d}"), getattr(self, f"weight_hh_{d}"),
                          getattr(self, f"bias_ih_{d}"), getattr(self, f"bias_hh_{d}"))

    def forward(self, seq: torch.Tensor) -> torch.Tensor:
        return bigru_forward((self.direction("fwd"), self.direction("bwd")), seq)


def dropout_mask(shape, p: float, generator: torch.Generator, dtype, device=None) -> torch.Tensor:
    """Inverted-dropout mask: entries are 0 or 1/(1-p)."""
    keep = torch.rand(shape, generator=generator, device=device) >= p
    return keep.to(dtype) / (1.0 - p)


def uniform_fan_in_(tensor: torch.Tensor, fan_in: int, generator: torch.Generator) -> None:
    bound = 1.0 / math.sqrt(fan_in)
    with torch.no_grad():
        tensor.copy_(torch.rand(tensor.shape, generator=generator, dtype=tensor.dtype) * 2 * bound - bound)
