"""Process-wide execution settings."""
from __future__ import annotations

import numpy as np
import torch


def configure(deterministic: bool = True, threads: int | None = None) -> None:
    """Pin torch to deterministic kernels and (by default) a single thread.

    Summation order inside multi-threaded kernels varies with the thread
    count, so bit-exact replays need the same ``threads`` every time.
    """
    if deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(threads or 1)
    elif threads:
        torch.set_num_threads(threads)


def derive_seed(*parts: int) -> int:
    """A 31-bit seed derived from an integer path, e.g. (run seed, fold)."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0] >> 1)
