"""DAFR checkpoint files.

Layout (little-endian)::

    b"DAFR" | version u16 | header_len u32 | header JSON (utf-8) | f32 payloads

The header lists every tensor (name, shape) in payload order together with
the iteration counter, the training config echo, dataset digests and the
FNV-1a digest of the payload.
"""

import json
import os
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from .config import TrainConfig

MAGIC = b"DAFR"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


class AblationMismatchWarning(UserWarning):
    pass


@dataclass
class TrainState:
    params: dict  # name -> float32 array (detector and domain heads)
    buffers: dict  # name -> momentum buffer
    iteration: int
    config: TrainConfig
    digests: dict = field(default_factory=dict)

    def copy(self):
        return TrainState({k: v.copy() for k, v in self.params.items()},
                          {k: v.copy() for k, v in self.buffers.items()},
                          self.iteration, self.config, dict(self.digests))


def save_checkpoint(state, path):
    entries = [("param", k, v) for k, v in state.params.items()]
    entries += [("momentum", k, v) for k, v in state.buffers.items()]
    payload = b"".join(np.ascontiguousarray(v, dtype="<f4").tobytes() for _, _, v in entries)
    header = {
        "tensors": [{"kind": kind, "name": k, "shape": list(v.shape)} for kind, k, v in entries],
        "iteration": state.iteration,
        "config": state.config.to_dict(),
        "digests": state.digests,
        "payload_digest": f"{kernels.fnv1a64(payload):016x}",
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HI", VERSION, len(hb)))
        f.write(hb)
        f.write(payload)
    os.replace(tmp, path)


def read_header(path):
    with open(path, "rb") as f:
        head = f.read(10)
        if len(head) < 10 or head[:4] != MAGIC:
            raise CheckpointError(f"{path}: not a DAFR checkpoint")
        version, hlen = struct.unpack("<HI", head[4:])
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        hb = f.read(hlen)
    if len(hb) != hlen:
        raise CheckpointError(f"{path}: truncated header")
    try:
        return json.loads(hb.decode("utf-8")), 10 + hlen
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header") from exc


def load_checkpoint(path, expect_ablation=None):
    """Read a checkpoint; refuses truncated or corrupted files.

    When ``expect_ablation`` (an AblationMask) differs from the stored one the
    state still loads but an :class:`AblationMismatchWarning` is issued.
    """
    header, off = read_header(path)
    with open(path, "rb") as f:
        f.seek(off)
        payload = f.read()
    sizes = [4 * int(np.prod(t["shape"], dtype=np.int64)) for t in header["tensors"]]
    if len(payload) != sum(sizes):
        raise CheckpointError(f"{path}: payload has {len(payload)} bytes, expected {sum(sizes)} (truncated?)")
    if f"{kernels.fnv1a64(payload):016x}" != header["payload_digest"]:
        raise CheckpointError(f"{path}: payload digest mismatch")
    params, buffers = {}, {}
    pos = 0
    for t, n in zip(header["tensors"], sizes):
        arr = np.frombuffer(payload, dtype="<f4", count=n // 4, offset=pos).reshape(t["shape"])
        pos += n
        (params if t["kind"] == "param" else buffers)[t["name"]] = arr.astype(np.float32)
    config = TrainConfig.from_dict(header["config"])
    if expect_ablation is not None and expect_ablation != config.ablation:
        warnings.warn(f"checkpoint was trained with ablation {config.ablation.label()!r}, "
                      f"expected {expect_ablation.label()!r}", AblationMismatchWarning, stacklevel=2)
    return TrainState(params, buffers, header["iteration"], config, header.get("digests", {}))


def checkpoint_digest(path):
    with open(path, "rb") as f:
        return f"{kernels.fnv1a64(f.read()):016x}"
