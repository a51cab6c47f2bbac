import numpy as np
import pytest

from bfssl import checkpoint
from bfssl.errors import ArchitectureMismatch
from bfssl.nn import Mlp


def test_roundtrip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    actor = Mlp([4, 8, 6], rng=rng)
    vec = rng.normal(size=17)
    path = tmp_path / "agent.bin"
    checkpoint.save(path, {"actor": actor, "extra": vec}, meta={"seed": 3})
    entries, meta = checkpoint.load(path)
    assert meta == {"seed": 3}
    assert entries["actor"].same_architecture(actor)
    assert entries["actor"].get_flat().tobytes() == actor.get_flat().tobytes()
    assert entries["extra"].tobytes() == vec.tobytes()


def test_load_actor_checks(tmp_path):
    actor = Mlp([4, 8, 6], rng=np.random.default_rng(1))
    path = tmp_path / "a.bin"
    checkpoint.save(path, {"actor": actor})
    assert checkpoint.load_actor(path, expected=actor.copy()).same_architecture(actor)
    with pytest.raises(ArchitectureMismatch):
        checkpoint.load_actor(path, expected=Mlp([4, 9, 6]))
    with pytest.raises(ArchitectureMismatch):
        checkpoint.load_actor(path, name="critic")


def test_corrupt_files(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nope" + bytes(20))
    with pytest.raises(ArchitectureMismatch):
        checkpoint.load(bad)
    good = tmp_path / "g.bin"
    checkpoint.save(good, {"v": np.ones(3)})
    good.write_bytes(good.read_bytes() + b"\0" * 8)
    with pytest.raises(ArchitectureMismatch):
        checkpoint.load(good)
