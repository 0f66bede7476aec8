import numpy as np
import pytest
import torch

from nssinet.adversarial import TrainConfig, init_state, save_state
from nssinet.netcore import GeneratorConfig
from nssinet.netcore.checkpoint import CheckpointError, load_into, read_checkpoint, save_checkpoint


def _state(seed):
    return init_state(GeneratorConfig(channels=4, points=64), TrainConfig(head_hidden=8), seed)


def test_round_trip_is_bit_exact(tmp_path):
    a = _state(0)
    gc = GeneratorConfig(channels=4, points=64)
    path = save_state(a, tmp_path / "m.nssi", gc, {"train": 0})
    header, tensors = read_checkpoint(path)
    assert header["seeds"] == {"train": 0}
    assert header["config"]["generator"]["channels"] == 4
    b = _state(1)
    load_into(b.modules(), tensors)
    for name, mod in a.modules().items():
        sa, sb = mod.state_dict(), b.modules()[name].state_dict()
        assert sa.keys() == sb.keys()
        for k in sa:
            assert torch.equal(sa[k], sb[k]), k


def test_outputs_match_after_reload(tmp_path):
    a = _state(0)
    path = save_state(a, tmp_path / "m.nssi", GeneratorConfig(channels=4, points=64))
    b = _state(5)
    load_into(b.modules(), read_checkpoint(path)[1])
    x = torch.randn(3, 1, 4, 64)
    a.generator.eval(), b.generator.eval()
    assert torch.equal(a.generator(x).flat, b.generator(x).flat)


def test_rejects_foreign_and_truncated_files(tmp_path):
    bad = tmp_path / "x.bin"
    bad.write_bytes(b"not a checkpoint at all")
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        read_checkpoint(bad)
    good = save_checkpoint(tmp_path / "l.nssi", {"lin": torch.nn.Linear(2, 2)}, {})
    good.write_bytes(good.read_bytes() + b"\0" * 8)
    with pytest.raises(CheckpointError, match="trailing"):
        read_checkpoint(good)


def test_missing_tensor_is_named(tmp_path):
    path = save_checkpoint(tmp_path / "l.nssi", {"lin": torch.nn.Linear(2, 2)}, {})
    _, tensors = read_checkpoint(path)
    del tensors["lin.bias"]
    with pytest.raises(CheckpointError, match="lin.bias"):
        load_into({"lin": torch.nn.Linear(2, 2)}, tensors)


def test_float32_values_survive_float64_storage(tmp_path):
    lin = torch.nn.Linear(3, 1)
    with torch.no_grad():
        lin.weight.copy_(torch.tensor([[np.float32(0.1), -1e-30, 3.4e38]]))
    _, tensors = read_checkpoint(save_checkpoint(tmp_path / "l.nssi", {"lin": lin}, {}))
    other = torch.nn.Linear(3, 1)
    load_into({"lin": other}, tensors)
    assert torch.equal(other.weight, lin.weight)
