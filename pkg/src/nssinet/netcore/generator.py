"""CNN encoder -> BiGRU bottleneck -> mirrored decoder.

Rows follow the reference layer table (ids ``1-1`` .. ``1-25``); with 63
channels at 384 points per second the per-row output shapes and parameter
counts reproduce it exactly.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from .layers import BiGRU, dropout_mask, max_pool, max_unpool, uniform_fan_in_

__all__ = ["ConfigError", "NonFiniteError", "GeneratorConfig", "ForwardTrace", "Generator",
           "build_generator", "parameter_table", "unflatten", "ROW_TYPES"]


class ConfigError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


def _finite(t: torch.Tensor) -> bool:
    # one reduction on the fast path; a huge but finite sum can overflow, so
    # confirm elementwise before reporting
    if torch.isfinite(t.detach().sum()):
        return True
    return bool(torch.isfinite(t.detach()).all())


@dataclass(frozen=True)
class GeneratorConfig:
    channels: int = 63
    points: int = 384
    f1: int = 16
    f2: int = 32
    pool1: int = 4
    pool2: int = 8
    gru_hidden: int = 16
    feature_width: int = 16
    dropout: float = 0.25
    activation: str = "elu"

    def __post_init__(self):
        if self.channels < 1:
            raise ConfigError("channels must be >= 1")
        if self.points % (self.pool1 * self.pool2):
            raise ConfigError(f"points={self.points} is not divisible by "
                              f"pool1*pool2={self.pool1 * self.pool2}")
        if self.kernel1 % 2 == 0 or self.kernel2 % 2 == 0:
            raise ConfigError("temporal kernels must be odd; points must be a multiple of 16")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.activation not in ("elu", "none"):
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def kernel1(self) -> int:
        return self.points // 2 + 1

    @property
    def kernel2(self) -> int:
        return self.points // 8 + 1

    @property
    def seq_len(self) -> int:
        return self.points // (self.pool1 * self.pool2)

    @property
    def flat_size(self) -> int:
        return self.seq_len * self.feature_width

    def to_dict(self) -> dict:
        return asdict(self)


# (row id, layer type) in execution order
ROW_TYPES = [
    ("1-1", "Conv2d"), ("1-2", "BatchNorm2d"), ("1-3", "Conv2d"), ("1-4", "BatchNorm2d"),
    ("1-5", "MaxPool2d"), ("1-6", "Dropout"), ("1-7", "Conv2d"), ("1-8", "Conv2d"),
    ("1-9", "BatchNorm2d"), ("1-10", "MaxPool2d"), ("1-11", "Linear"), ("1-12", "GRU"),
    ("1-13", "Linear"), ("1-14", "Linear"), ("1-15", "GRU"), ("1-16", "Linear"),
    ("1-17", "MaxUnpool2d"), ("1-18", "ConvTranspose2d"), ("1-19", "ConvTranspose2d"),
    ("1-20", "BatchNorm2d"), ("1-21", "Dropout"), ("1-22", "MaxUnpool2d"),
    ("1-23", "ConvTranspose2d"), ("1-24", "BatchNorm2d"), ("1-25", "ConvTranspose2d"),
]


@dataclass
class ForwardTrace:
    feature_map: torch.Tensor       # [B, f1, 1, M] encoder output
    bigru_concat: torch.Tensor      # [B, M, 2H]
    latent: torch.Tensor            # [B, M, F]
    flat: torch.Tensor              # [B, M*F]
    reconstruction: torch.Tensor    # [B, 1, C, P]
    pool_indices: tuple[torch.Tensor, torch.Tensor]
    dropout_masks: tuple[torch.Tensor | None, torch.Tensor | None]
    shapes: dict[str, tuple[int, ...]] = field(default_factory=dict)


def unflatten(flat: torch.Tensor, seq_len: int, width: int) -> torch.Tensor:
    return flat.reshape(flat.shape[0], seq_len, width)


class Generator(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        c = config
        self.config = c
        k1, k2 = c.kernel1, c.kernel2
        self.conv1 = nn.Conv2d(1, c.f1, (1, k1), padding=(0, k1 // 2))
        self.bn1 = nn.BatchNorm2d(c.f1)
        self.conv2 = nn.Conv2d(c.f1, c.f2, (c.channels, 1))
        self.bn2 = nn.BatchNorm2d(c.f2)
        self.conv3 = nn.Conv2d(c.f2, c.f2, (1, k2), padding=(0, k2 // 2), groups=c.f2)
        self.conv4 = nn.Conv2d(c.f2, c.f1, 1)
        self.bn3 = nn.BatchNorm2d(c.f1)
        self.lin_in = nn.Linear(c.f1, c.feature_width)
        self.gru_enc = BiGRU(c.feature_width, c.gru_hidden)
        self.lin_latent = nn.Linear(2 * c.gru_hidden, c.feature_width)
        self.lin_dec = nn.Linear(c.feature_width, 2 * c.gru_hidden)
        self.gru_dec = BiGRU(2 * c.gru_hidden, c.gru_hidden)
        self.lin_out = nn.Linear(2 * c.gru_hidden, c.f1)
        self.deconv4 = nn.ConvTranspose2d(c.f1, c.f2, 1)
        self.deconv3 = nn.ConvTranspose2d(c.f2, c.f2, (1, k2), padding=(0, k2 // 2), groups=c.f2)
        self.bn4 = nn.BatchNorm2d(c.f2)
        self.deconv2 = nn.ConvTranspose2d(c.f2, c.f1, (c.channels, 1))
        self.bn5 = nn.BatchNorm2d(c.f1)
        self.deconv1 = nn.ConvTranspose2d(c.f1, 1, (1, k1), padding=(0, k1 // 2))
        self.check_finite = True

    # row id -> module holding that row's parameters (parameter-free rows map to None)
    def row_modules(self) -> dict[str, nn.Module | None]:
        return {
            "1-1": self.conv1, "1-2": self.bn1, "1-3": self.conv2, "1-4": self.bn2,
            "1-5": None, "1-6": None, "1-7": self.conv3, "1-8": self.conv4, "1-9": self.bn3,
            "1-10": None, "1-11": self.lin_in, "1-12": self.gru_enc, "1-13": self.lin_latent,
            "1-14": self.lin_dec, "1-15": self.gru_dec, "1-16": self.lin_out, "1-17": None,
            "1-18": self.deconv4, "1-19": self.deconv3, "1-20": self.bn4, "1-21": None,
            "1-22": None, "1-23": self.deconv2, "1-24": self.bn5, "1-25": self.deconv1,
        }

    def reset_parameters(self, seed: int) -> None:
        g = torch.Generator().manual_seed(int(seed))
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                fan_in = m.in_channels // m.groups * m.kernel_size[0] * m.kernel_size[1]
                uniform_fan_in_(m.weight, fan_in, g)
                nn.init.zeros_(m.bias)
            elif isinstance(m, nn.ConvTranspose2d):
                fan_in = m.in_channels // m.groups * m.kernel_size[0] * m.kernel_size[1]
                uniform_fan_in_(m.weight, fan_in, g)
                nn.init.zeros_(m.bias)
            elif isinstance(m, nn.Linear):
                uniform_fan_in_(m.weight, m.in_features, g)
                nn.init.zeros_(m.bias)
            elif isinstance(m, nn.BatchNorm2d):
                m.reset_running_stats()
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)
            elif isinstance(m, BiGRU):
                for d in ("fwd", "bwd"):
                    w = m.direction(d)
                    uniform_fan_in_(w.weight_ih, m.input_size, g)
                    uniform_fan_in_(w.weight_hh, m.hidden_size, g)
                    nn.init.zeros_(w.bias_ih)
                    nn.init.zeros_(w.bias_hh)

    def _act(self, x):
        return F.elu(x) if self.config.activation == "elu" else x

    def _drop(self, x, gen):
        if not self.training or self.config.dropout == 0:
            return x, None
        mask = dropout_mask(x.shape, self.config.dropout, gen, x.dtype, x.device)
        return x * mask, mask

    def forward(self, x: torch.Tensor, dropout_seed: int | None = None) -> ForwardTrace:
        c = self.config
        if x.dim() != 4 or tuple(x.shape[1:]) != (1, c.channels, c.points):
            raise ValueError(f"expected input [B, 1, {c.channels}, {c.points}], "
                             f"got {tuple(x.shape)}")
        gen = torch.Generator()
        if dropout_seed is None:
            gen.seed()
        else:
            gen.manual_seed(int(dropout_seed))
        shapes: dict[str, tuple[int, ...]] = {"input": tuple(x.shape)}

        def rec(row, t):
            shapes[row] = tuple(t.shape)
            if self.check_finite and not _finite(t):
                raise NonFiniteError(f"non-finite values after layer {row} ({dict(ROW_TYPES)[row]})")
            return t

        if self.check_finite and not _finite(x):
            raise NonFiniteError("non-finite values in the input")
        h = rec("1-1", self.conv1(x))
        h = rec("1-2", self.bn1(h))
        h = rec("1-3", self.conv2(h))
        h = rec("1-4", self.bn2(h))
        h = self._act(h)
        h, idx1 = max_pool(h, c.pool1)
        rec("1-5", h)
        h, mask1 = self._drop(h, gen)
        rec("1-6", h)
        h = rec("1-7", self.conv3(h))
        h = rec("1-8", self.conv4(h))
        h = rec("1-9", self.bn3(h))
        h = self._act(h)
        feat, idx2 = max_pool(h, c.pool2)
        rec("1-10", feat)

        seq = feat.squeeze(2).transpose(1, 2)                  # [B, M, f1]
        seq = rec("1-11", self.lin_in(seq))
        a = rec("1-12", self.gru_enc(seq))
        y = rec("1-13", self.lin_latent(a))
        flat = y.reshape(y.shape[0], -1)

        d = rec("1-14", self.lin_dec(y))
        d = rec("1-15", self.gru_dec(d))
        d = rec("1-16", self.lin_out(d))
        d = d.transpose(1, 2).unsqueeze(2)                     # [B, f1, 1, M]
        d = rec("1-17", max_unpool(d, idx2, c.pool2))
        d = rec("1-18", self.deconv4(d))
        d = rec("1-19", self.deconv3(d))
        d = rec("1-20", self.bn4(d))
        d = self._act(d)
        d, mask2 = self._drop(d, gen)
        rec("1-21", d)
        d = rec("1-22", max_unpool(d, idx1, c.pool1))
        d = rec("1-23", self.deconv2(d))
        d = rec("1-24", self.bn5(d))
        d = self._act(d)
        out = rec("1-25", self.deconv1(d))
        return ForwardTrace(feat, a, y, flat, out, (idx1, idx2), (mask1, mask2), shapes)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        """Flat latent features in eval mode, without gradients."""
        was = self.training
        self.eval()
        try:
            with torch.no_grad():
                return self(x).flat
        finally:
            self.train(was)


def build_generator(config: GeneratorConfig, seed: int = 0,
                    dtype: torch.dtype = torch.float32) -> Generator:
    gen = Generator(config)
    gen.reset_parameters(seed)
    return gen.to(dtype)


def parameter_table(gen: Generator) -> list[tuple[str, str, int]]:
    """(row id, layer type, trainable parameter count) for every row."""
    mods = gen.row_modules()
    rows = []
    for row, kind in ROW_TYPES:
        m = mods[row]
        n = 0 if m is None else sum(p.numel() for p in m.parameters() if p.requires_grad)
        rows.append((row, kind, n))
    return rows
