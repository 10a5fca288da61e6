"""SHPW dataset files and their JSON manifests.

Layout (little-endian)::

    b"SHPW" | version u16 | header_len u32 | header JSON (utf-8)
    per sample: image f32[C*H*W] | n_boxes u16 | boxes f32[n*4] | labels u16[n] | domain u8

The header holds the generating spec, the sample count and the image shape.
The manifest sidecar (``<path>.json``) records the 64-bit FNV-1a digest of
everything after the header.
"""

import json
import os
import struct

import numpy as np

from .. import kernels
from .render import DatasetSpec, Sample, render_scene

MAGIC = b"SHPW"
VERSION = 1


class DatasetFormatError(ValueError):
    pass


class Dataset:
    """In-memory dataset: the DatasetSpec that generated it, its samples and digest."""

    def __init__(self, spec, samples, digest=None):
        self.spec = spec
        self.samples = list(samples)
        self.digest = digest if digest is not None else payload_digest(self.samples)

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def __iter__(self):
        return iter(self.samples)

    @property
    def digest_hex(self):
        return f"{self.digest:016x}"


def _sample_bytes(s):
    n = len(s.boxes)
    if n > 0xFFFF:
        raise DatasetFormatError("too many boxes for a u16 count")
    return b"".join([
        s.image.astype("<f4").tobytes(),
        struct.pack("<H", n),
        s.boxes.astype("<f4").tobytes(),
        s.labels.astype("<u2").tobytes(),
        struct.pack("<B", s.domain),
    ])


def payload_digest(samples):
    h = 0xCBF29CE484222325
    for s in samples:
        h = kernels.fnv1a64(_sample_bytes(s), h)
    return h


def generate(spec):
    return Dataset(spec, [render_scene(spec, i) for i in range(spec.num_images)])


def write_dataset(dataset, path):
    """Write the dataset file and its manifest; returns the manifest dict."""
    samples = dataset.samples
    shape = list(samples[0].image.shape) if samples else [3, dataset.spec.output_size, dataset.spec.output_size]
    for s in samples:
        if list(s.image.shape) != shape:
            raise DatasetFormatError("all images in a dataset file must share one shape")
    header = json.dumps({"spec": dataset.spec.to_dict(), "count": len(samples), "image_shape": shape},
                        sort_keys=True).encode("utf-8")
    h = 0xCBF29CE484222325
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HI", VERSION, len(header)))
        f.write(header)
        for s in samples:
            chunk = _sample_bytes(s)
            h = kernels.fnv1a64(chunk, h)
            f.write(chunk)
    os.replace(tmp, path)
    manifest = {
        "format": "SHPW",
        "version": VERSION,
        "spec": dataset.spec.to_dict(),
        "count": len(samples),
        "image_shape": shape,
        "digest": f"{h:016x}",
    }
    with open(manifest_path(path), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    dataset.digest = h
    return manifest


def manifest_path(path):
    return f"{path}.json"


def read_dataset(path, verify=True):
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 10 or buf[:4] != MAGIC:
        raise DatasetFormatError(f"{path}: not a SHPW dataset file")
    version, hlen = struct.unpack_from("<HI", buf, 4)
    if version != VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    off = 10
    try:
        header = json.loads(buf[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetFormatError(f"{path}: corrupt header") from exc
    off += hlen
    payload_start = off
    spec = DatasetSpec.from_dict(header["spec"])
    C, H, W = header["image_shape"]
    npix = C * H * W
    samples = []
    try:
        for _ in range(header["count"]):
            img = np.frombuffer(buf, dtype="<f4", count=npix, offset=off).reshape(C, H, W)
            off += 4 * npix
            (n,) = struct.unpack_from("<H", buf, off)
            off += 2
            boxes = np.frombuffer(buf, dtype="<f4", count=4 * n, offset=off).reshape(n, 4)
            off += 16 * n
            labels = np.frombuffer(buf, dtype="<u2", count=n, offset=off)
            off += 2 * n
            (domain,) = struct.unpack_from("<B", buf, off)
            off += 1
            samples.append(Sample(img.astype(np.float32), boxes.astype(np.float32),
                                  labels.astype(np.int64), domain))
    except (ValueError, struct.error) as exc:
        raise DatasetFormatError(f"{path}: truncated dataset file") from exc
    if off != len(buf):
        raise DatasetFormatError(f"{path}: trailing bytes after {header['count']} samples")
    digest = kernels.fnv1a64(buf[payload_start:])
    if verify and os.path.exists(manifest_path(path)):
        with open(manifest_path(path)) as f:
            expected = json.load(f).get("digest")
        if expected is not None and expected != f"{digest:016x}":
            raise DatasetFormatError(f"{path}: digest mismatch with manifest")
    return Dataset(spec, samples, digest)


def make_dataset(spec, path=None):
    """Render every sample of ``spec``; write file and manifest when ``path`` is given."""
    ds = generate(spec)
    if path is not None:
        write_dataset(ds, path)
    return ds
