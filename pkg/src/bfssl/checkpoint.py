"""Versioned binary parameter dumps.

Layout: 4-byte magic, little-endian uint32 format version, uint32 header
length, a UTF-8 JSON header, then every entry's values as raw '<f8' in
header order. Float64 throughout, so a round trip is bit-exact.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ArchitectureMismatch
from .nn import Mlp

MAGIC = b"BFSP"
VERSION = 1


def save(path, entries: dict, meta: dict | None = None):
    """Write named ``Mlp`` networks and/or flat vectors to ``path``."""
    header = {"entries": [], "meta": meta or {}}
    blobs = []
    for name, obj in entries.items():
        if isinstance(obj, Mlp):
            vec = obj.get_flat()
            header["entries"].append({"name": name, "kind": "mlp", "sizes": list(obj.sizes),
                                      "activations": list(obj.activations), "count": int(vec.size)})
        else:
            vec = np.asarray(obj, dtype=float).ravel()
            header["entries"].append({"name": name, "kind": "vector", "count": int(vec.size)})
        blobs.append(vec.astype("<f8").tobytes())
    raw = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", VERSION, len(raw)) + raw)
        for b in blobs:
            fh.write(b)


def load(path):
    """Return (entries, meta); networks come back as ``Mlp`` objects."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ArchitectureMismatch(f"{path}: not a parameter checkpoint")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise ArchitectureMismatch(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[12:12 + hlen])
    off = 12 + hlen
    out = {}
    for e in header["entries"]:
        n = e["count"]
        vec = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(float)
        off += 8 * n
        if e["kind"] == "mlp":
            net = Mlp(e["sizes"], e["activations"], rng=np.random.default_rng(0))
            net.set_flat(vec)
            out[e["name"]] = net
        else:
            out[e["name"]] = vec
    if off != len(data):
        raise ArchitectureMismatch(f"{path}: {len(data) - off} trailing bytes")
    return out, header["meta"]


def load_actor(path, expected: Mlp | None = None, name: str = "actor") -> Mlp:
    entries, _ = load(path)
    if name not in entries or not isinstance(entries[name], Mlp):
        raise ArchitectureMismatch(f"{path}: no network named {name!r}")
    net = entries[name]
    if expected is not None and not net.same_architecture(expected):
        raise ArchitectureMismatch(f"checkpoint network {net.sizes} != expected {expected.sizes}")
    return net
