"""ShapeWorld synthetic scenes with controllable domain shift."""

from .io import (
    Dataset,
    DatasetFormatError,
    generate,
    make_dataset,
    manifest_path,
    payload_digest,
    read_dataset,
    write_dataset,
)
from .render import (
    CLASS_COLORS,
    SHAPES,
    DatasetSpec,
    Sample,
    ShiftSpec,
    UnlabeledSample,
    apply_shift,
    layout_objects,
    render_clean,
    render_scene,
    rescale_sample,
)
from .rng import SplitMix64, derive_seed, mix64
from .shifts import STYLE_REMIX, apply_fog, apply_style_shift, depth_ramp, rescale_image

__all__ = [
    "CLASS_COLORS",
    "SHAPES",
    "STYLE_REMIX",
    "Dataset",
    "DatasetFormatError",
    "DatasetSpec",
    "Sample",
    "ShiftSpec",
    "SplitMix64",
    "UnlabeledSample",
    "apply_fog",
    "apply_shift",
    "apply_style_shift",
    "depth_ramp",
    "derive_seed",
    "generate",
    "layout_objects",
    "make_dataset",
    "manifest_path",
    "mix64",
    "payload_digest",
    "read_dataset",
    "render_clean",
    "render_scene",
    "rescale_image",
    "rescale_sample",
    "write_dataset",
]
