"""Reverse-mode gradients with finiteness checks, plus a finite-difference oracle."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch

GradientSet = dict


class NonFiniteGradientError(FloatingPointError):
    pass


def gradients(loss: torch.Tensor, named_params: Sequence[tuple[str, torch.Tensor]],
              retain_graph: bool = False) -> GradientSet:
    """Gradient of a scalar ``loss`` for every named parameter.

    Parameters the loss does not reach get an exact zero tensor.
    """
    names = [n for n, _ in named_params]
    params = [p for _, p in named_params]
    if loss.requires_grad:
        grads = torch.autograd.grad(loss, params, retain_graph=retain_graph, allow_unused=True)
    else:
        grads = [None] * len(params)
    out = {}
    for n, p, g in zip(names, params, grads):
        g = torch.zeros_like(p) if g is None else g
        if not torch.isfinite(g).all():
            raise NonFiniteGradientError(f"non-finite gradient for parameter {n!r}")
        out[n] = g
    return out


def finite_difference(fn: Callable[[], float], tensor: torch.Tensor, coords: Sequence[tuple],
                      step: float = 1e-5) -> np.ndarray:
    """Central differences of ``fn()`` w.r.t. selected entries of ``tensor``."""
    out = []
    with torch.no_grad():
        for c in coords:
            orig = tensor[c].item()
            tensor[c] = orig + step
            hi = float(fn())
            tensor[c] = orig - step
            lo = float(fn())
            tensor[c] = orig
            out.append((hi - lo) / (2 * step))
    return np.array(out)


def random_coords(tensor: torch.Tensor, n: int, rng: np.random.Generator) -> list[tuple]:
    flat = rng.choice(tensor.numel(), size=min(n, tensor.numel()), replace=False)
    return [tuple(int(i) for i in np.unravel_index(f, tuple(tensor.shape))) for f in flat]


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> float:
    """||a - n|| / max(||a||, ||n||) over the checked coordinates."""
    num = np.linalg.norm(analytic - numeric)
    den = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(num / den)


@dataclass(frozen=True)
class GradCheck:
    rel_error: float
    abs_error: float
    analytic_norm: float
    numeric_norm: float
    passed: bool


def check_gradients(fn: Callable[[], torch.Tensor], named_params, n_coords: int = 20,
                    step: float = 1e-5, seed: int = 0, rtol: float = 1e-4,
                    zero_atol: float = 1e-6) -> dict[str, GradCheck]:
    """Compare autograd with central differences on random coordinates of each tensor.

    A tensor passes when the relative error is below ``rtol``. Gradients that
    are exactly zero by construction (a bias feeding straight into
    BatchNorm) leave central differences with nothing but roundoff, so such
    tensors pass when the numeric gradient stays below ``zero_atol``.
    ``fn`` must be deterministic (fixed dropout masks, double precision).
    """
    rng = np.random.default_rng(seed)
    grads = gradients(fn(), named_params)
    out = {}
    for name, p in named_params:
        coords = random_coords(p, n_coords, rng)
        analytic = np.array([grads[name][c].item() for c in coords])
        numeric = finite_difference(lambda: fn().item(), p, coords, step)
        rel = relative_error(analytic, numeric)
        a_norm, n_norm = float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric))
        structural_zero = a_norm < 1e-12
        passed = n_norm < zero_atol if structural_zero else rel < rtol
        out[name] = GradCheck(rel, float(np.linalg.norm(analytic - numeric)), a_norm, n_norm,
                              passed)
    return out
