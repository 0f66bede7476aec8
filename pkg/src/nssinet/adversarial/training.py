"""Semi-supervised adversarial training.

Each step runs one generator forward pass on a mixed batch of labeled source
(S_l), unlabeled source (S_u) and target (T) samples, then

1. updates every active head on its own loss against detached features
   (disease head on S_l samples only);
2. updates the generator on
   ``alpha*L_signal -/+ beta*L_gender - delta*L_disc + theta*L_disease``
   evaluated with the freshly updated heads. The gender sign is ``-`` in
   ``invariance`` mode and ``+`` in ``cooperative`` mode.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np
import torch

from ..cohort import Domain, DomainAssignment, Subject, segment, stack_samples
from ..netcore import (Generator, GeneratorConfig, RMSprop, build_generator, gradients)
from ..netcore.checkpoint import save_checkpoint
from .heads import Heads, build_heads
from .losses import (LossWeights, loss_disease, loss_domain, loss_gender,
                     loss_signal)

log = logging.getLogger(__name__)

__all__ = ["TrainConfig", "DomainData", "Batch", "TrainState", "LossRecord", "TrainingError",
           "TrainingDiverged", "assemble", "init_state", "train_step", "train",
           "predict_proba", "write_loss_csv"]

DTYPES = {"float32": torch.float32, "float64": torch.float64}


class TrainingError(RuntimeError):
    pass


class TrainingDiverged(TrainingError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch: int = 48
    composition: tuple[int, int, int] = (16, 16, 16)
    epochs: int = 80
    l2: float = 1e-5
    dropout: float = 0.25
    rms_decay: float = 0.99
    rms_epsilon: float = 1e-8
    adversarial_mode: str = "invariance"
    transductive: bool = True
    use_signal: bool = True
    use_gender: bool = True
    use_domain: bool = True
    domain_mode: str = "three_way"
    head_hidden: int = 64
    activation: str = "elu"
    dtype: str = "float32"
    seed: int = 0
    divergence_factor: float = 1e3

    def __post_init__(self):
        object.__setattr__(self, "composition", tuple(int(c) for c in self.composition))
        if sum(self.composition) != self.batch or len(self.composition) != 3:
            raise ValueError(f"composition {self.composition} must have 3 parts summing "
                             f"to batch={self.batch}")
        if min(self.composition) < 0 or self.composition[0] < 1:
            raise ValueError("composition needs at least one labeled sample per batch")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.adversarial_mode not in ("invariance", "cooperative"):
            raise ValueError(f"unknown adversarial_mode {self.adversarial_mode!r}")
        if self.domain_mode not in ("three_way", "two_way"):
            raise ValueError(f"unknown domain_mode {self.domain_mode!r}")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype must be one of {sorted(DTYPES)}")

    @property
    def n_domains(self) -> int:
        return 3 if self.domain_mode == "three_way" else 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["composition"] = list(self.composition)
        return d


@dataclass
class DomainData:
    """Model-ready samples. ``label`` is -1 outside the labeled source;
    ``truth`` keeps every sample's disease label for evaluation only."""

    x: np.ndarray            # [N, 1, C, P] float32
    domain: np.ndarray       # [N] 0 = S_l, 1 = S_u, 2 = T
    gender: np.ndarray       # [N] 1 = male
    label: np.ndarray        # [N] 1 = DN+, 0 = DN-, -1 unknown
    truth: np.ndarray        # [N]
    subject: np.ndarray      # [N] subject ids

    def __len__(self):
        return len(self.domain)

    def select(self, mask) -> "DomainData":
        return DomainData(self.x[mask], self.domain[mask], self.gender[mask],
                          self.label[mask], self.truth[mask], self.subject[mask])


def assemble(subjects: Sequence[Subject], assignment: DomainAssignment,
             window_seconds: float = 1.0, normalize: str = "channel") -> DomainData:
    """Segment every trial of the assigned subjects and tag samples by domain."""
    samples, dom = [], []
    for s in sorted(subjects, key=lambda s: s.id):
        try:
            d = assignment.domain_of(s.id)
        except KeyError:
            continue
        for t in s.trials:
            seg = segment(t, window_seconds, s, d)
            samples.extend(seg)
            dom.extend([d.index] * len(seg))
    if not samples:
        raise TrainingError("no samples for this assignment")
    dom = np.array(dom, dtype=np.int64)
    truth = np.array([s.disease.label for s in samples], dtype=np.int64)
    label = np.where(dom == Domain.S_L.index, truth, -1)
    gender = np.array([1 if s.gender.value == "male" else 0 for s in samples], dtype=np.int64)
    subject = np.array([s.subject_id for s in samples])
    return DomainData(stack_samples(samples, normalize), dom, gender, label, truth, subject)


@dataclass
class Batch:
    x: torch.Tensor
    domain: torch.Tensor
    gender: torch.Tensor
    label: torch.Tensor

    @classmethod
    def from_data(cls, data: DomainData, idx: np.ndarray, dtype=torch.float32) -> "Batch":
        return cls(torch.from_numpy(data.x[idx]).to(dtype), torch.from_numpy(data.domain[idx]),
                   torch.from_numpy(data.gender[idx]), torch.from_numpy(data.label[idx]))


@dataclass
class LossRecord:
    epoch: int
    signal: float
    gender: float
    disc: float
    disease: float
    total: float

    @staticmethod
    def header() -> list[str]:
        return ["epoch", "L_signal", "L_gender", "L_disc", "L_disease", "total"]

    def row(self) -> list:
        return [self.epoch, self.signal, self.gender, self.disc, self.disease, self.total]


@dataclass
class TrainState:
    generator: Generator
    heads: Heads
    gen_opt: RMSprop
    head_opts: dict[str, RMSprop]
    config: TrainConfig
    step: int = 0

    def modules(self) -> dict[str, torch.nn.Module]:
        return {"generator": self.generator, "heads": self.heads}


def init_state(gen_config: GeneratorConfig, config: TrainConfig,
               seed: int | None = None) -> TrainState:
    seed = config.seed if seed is None else seed
    gs, hs = np.random.SeedSequence([seed, 1]).generate_state(2)
    dtype = DTYPES[config.dtype]
    gen_config = replace(gen_config, dropout=config.dropout, activation=config.activation)
    gen = build_generator(gen_config, int(gs), dtype)
    heads = build_heads(gen_config.flat_size, gen_config.channels * gen_config.points,
                        config.n_domains, config.head_hidden, int(hs), dtype)
    opt = dict(lr=config.lr, decay=config.rms_decay, epsilon=config.rms_epsilon,
               weight_decay=config.l2)
    gen_opt = RMSprop(gen.named_parameters(), **opt)
    head_opts = {h: RMSprop(heads.named(h), **opt)
                 for h in ("signal", "gender", "domain", "disease")}
    return TrainState(gen, heads, gen_opt, head_opts, config)


def domain_targets(domain: torch.Tensor, mode: str, dtype=torch.float32) -> torch.Tensor:
    if mode == "two_way":
        # labeled and unlabeled source merged into one source domain
        domain = (domain == Domain.T.index).long()
        n = 2
    else:
        n = 3
    return torch.nn.functional.one_hot(domain, n).to(dtype)


def active_heads(config: TrainConfig, weights: LossWeights) -> dict[str, bool]:
    return {
        "signal": config.use_signal and weights.alpha > 0,
        "gender": config.use_gender and weights.beta > 0,
        "domain": config.use_domain and weights.delta > 0,
        "disease": weights.theta > 0,
    }


def _head_losses(heads: Heads, batch: Batch, recon, flat, config: TrainConfig):
    """Per-head classification losses; ``recon``/``flat`` decide what is attached."""
    male = batch.gender == 1
    lab = batch.domain == Domain.S_L.index
    e = heads.gender.probabilities(flat)
    gender = loss_gender(e[male], e[~male])
    d = heads.domain.probabilities(flat)
    disc = loss_domain(d, domain_targets(batch.domain, config.domain_mode, d.dtype))
    f = heads.disease.probabilities(flat[lab])
    disease = loss_disease(f, batch.label[lab])
    return gender, disc, disease


def train_step(state: TrainState, batch: Batch, weights: LossWeights,
               dropout_seed: int = 0) -> LossRecord:
    config = state.config
    lab = batch.domain == Domain.S_L.index
    if (batch.label[lab] < 0).any():
        raise TrainingError("a labeled-source sample is missing its disease label")
    active = active_heads(config, weights)
    gen, heads = state.generator, state.heads
    gen.train()
    trace = gen(batch.x, dropout_seed=dropout_seed)
    recon, flat = trace.reconstruction, trace.flat

    # (a) heads, on detached generator outputs
    r_det, f_det = recon.detach(), flat.detach()
    if active["signal"]:
        _, disc_term = loss_signal(batch.x, r_det, heads.signal.probabilities(batch.x),
                                   heads.signal.probabilities(r_det), 0.0)
        _step(state.head_opts["signal"], disc_term)
    g_loss, d_loss, f_loss = _head_losses(heads, batch, r_det, f_det, config)
    for name, loss in (("gender", g_loss), ("domain", d_loss), ("disease", f_loss)):
        if active[name]:
            _step(state.head_opts[name], loss, retain=True)

    # (b) generator, against the updated heads
    d_fake = heads.signal.probabilities(recon)
    adv, _ = loss_signal(batch.x, recon, d_fake.detach(), d_fake, 0.0)
    recon_term = weights.lam * (batch.x - recon).pow(2).reshape(len(recon), -1).sum(1).mean()
    l_signal = (adv if config.use_signal else 0.0 * adv) + recon_term
    l_gender, l_disc, l_disease = _head_losses(heads, batch, recon, flat, config)
    sign_gender = -1.0 if config.adversarial_mode == "invariance" else 1.0
    objective = recon.new_zeros(())
    if weights.alpha:
        objective = objective + weights.alpha * l_signal
    if active["gender"]:
        objective = objective + sign_gender * weights.beta * l_gender
    if active["domain"]:
        objective = objective - weights.delta * l_disc
    if active["disease"]:
        objective = objective + weights.theta * l_disease
    grads = gradients(objective, list(gen.named_parameters()))
    state.gen_opt.step([grads[n] for n, _ in gen.named_parameters()])
    state.step += 1

    comps = [float(v.detach()) if torch.is_tensor(v) else float(v) for v in (l_signal, l_gender, l_disc, l_disease)]
    total = (weights.alpha * comps[0] + weights.beta * comps[1] + weights.delta * comps[2]
             + weights.theta * comps[3])
    return LossRecord(-1, *comps, total)


def _step(opt: RMSprop, loss: torch.Tensor, retain: bool = False) -> None:
    grads = gradients(loss, opt.named, retain_graph=retain)
    opt.step([grads[n] for n, _ in opt.named])


def _cycle(rng: np.random.Generator, idx: np.ndarray) -> Iterator[int]:
    while True:
        for i in rng.permutation(idx):
            yield int(i)


def _quotas(config: TrainConfig, counts: tuple[int, int, int]) -> tuple[int, int, int]:
    q_l, q_u, q_t = config.composition
    n_l, n_u, n_t = counts
    if n_u == 0:
        q_l, q_u = q_l + q_u, 0
    if n_t == 0:
        q_l, q_t = q_l + q_t, 0
    return q_l, q_u, q_t


def train(data: DomainData, gen_config: GeneratorConfig, config: TrainConfig,
          weights: LossWeights, seed: int | None = None,
          on_epoch: Callable[[LossRecord], None] | None = None,
          state: TrainState | None = None) -> tuple[TrainState, list[LossRecord]]:
    """Run ``config.epochs`` epochs; one epoch is one pass over the S_l samples."""
    seed = config.seed if seed is None else seed
    if not config.transductive:
        data = data.select(data.domain != Domain.T.index)
    state = state or init_state(gen_config, config, seed)
    dtype = DTYPES[config.dtype]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    pools = [np.flatnonzero(data.domain == d) for d in range(3)]
    if len(pools[0]) == 0:
        raise TrainingError("no labeled-source samples")
    q_l, q_u, q_t = _quotas(config, tuple(len(p) for p in pools))
    streams = [_cycle(rng, pools[1]) if q_u else None, _cycle(rng, pools[2]) if q_t else None]
    steps = math.ceil(len(pools[0]) / q_l)
    records, initial = [], None
    for epoch in range(config.epochs):
        order = rng.permutation(pools[0])
        acc = np.zeros(5)
        for s in range(steps):
            idx = list(order[s * q_l:(s + 1) * q_l])
            if q_u:
                idx += [next(streams[0]) for _ in range(q_u)]
            if q_t:
                idx += [next(streams[1]) for _ in range(q_t)]
            batch = Batch.from_data(data, np.array(idx), dtype)
            rec = train_step(state, batch, weights, dropout_seed=int(rng.integers(2**31)))
            if initial is None:
                initial = rec.total
            elif initial > 0 and rec.total > config.divergence_factor * initial:
                raise TrainingDiverged(f"total loss {rec.total:.4g} exceeded "
                                       f"{config.divergence_factor:g} x initial {initial:.4g} "
                                       f"at epoch {epoch}, step {s}")
            acc += [rec.signal, rec.gender, rec.disc, rec.disease, rec.total]
        acc /= steps
        m = LossRecord(epoch, *acc[:4], total=0.0)
        m.total = (weights.alpha * m.signal + weights.beta * m.gender + weights.delta * m.disc
                   + weights.theta * m.disease)
        records.append(m)
        log.debug("epoch %d: %s", epoch, m)
        if on_epoch:
            on_epoch(m)
    return state, records


@torch.no_grad()
def predict_proba(state: TrainState, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """P(DN+) per sample, eval mode."""
    gen, heads = state.generator, state.heads
    gen.eval()
    dtype = DTYPES[state.config.dtype]
    out = []
    for i in range(0, len(x), batch_size):
        flat = gen(torch.from_numpy(x[i:i + batch_size]).to(dtype)).flat
        out.append(heads.disease.probabilities(flat).double().numpy())
    gen.train()
    return np.concatenate(out) if out else np.zeros(0)


@torch.no_grad()
def extract_features(state: TrainState, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    gen = state.generator
    dtype = DTYPES[state.config.dtype]
    out = [gen.encode(torch.from_numpy(x[i:i + batch_size]).to(dtype)).double().numpy()
           for i in range(0, len(x), batch_size)]
    return np.concatenate(out)


def write_loss_csv(records: Sequence[LossRecord], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LossRecord.header())
        for r in records:
            w.writerow([r.epoch] + [repr(float(v)) for v in r.row()[1:]])
    return path


def save_state(state: TrainState, path: str | Path, gen_config: GeneratorConfig,
               seeds: dict | None = None) -> Path:
    cfg = {"generator": gen_config.to_dict(), "train": state.config.to_dict()}
    return save_checkpoint(path, state.modules(), cfg, seeds)
