"""ShapeWorld: deterministic synthetic detection scenes."""

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import TargetLabelError
from .rng import SplitMix64, derive_seed
from .shifts import apply_fog, apply_style_shift, rescale_boxes, rescale_image, upsample_bilinear

SHAPES = ("circle", "square", "triangle", "diamond")
CLASS_COLORS = np.array([
    [0.85, 0.20, 0.20],
    [0.20, 0.75, 0.25],
    [0.25, 0.30, 0.90],
    [0.90, 0.80, 0.20],
])
SHIFT_KINDS = ("none", "style", "fog", "scale")
MAX_OVERLAP_IOU = 0.3
COLOR_JITTER = 0.2  # per-instance, per-channel uniform offset
PLACEMENT_TRIES = 100

_STREAM_LAYOUT = 1
_STREAM_TEXTURE = 2
_STREAM_STYLE = 3


@dataclass(frozen=True)
class ShiftSpec:
    kind: str = "none"
    intensity: float = 0.0
    scale_factor: float = 1.0

    def __post_init__(self):
        if self.kind not in SHIFT_KINDS:
            raise ValueError(f"unknown shift kind {self.kind!r}")
        if not 0 <= self.intensity <= 1:
            raise ValueError("shift intensity must lie in [0, 1]")
        if self.scale_factor <= 0:
            raise ValueError("scale factor must be positive")

    @property
    def effective_scale(self):
        """Resize factor of a scale shift: 1 at intensity 0, ``scale_factor`` at 1."""
        if self.kind != "scale":
            return 1.0
        return 1.0 + self.intensity * (self.scale_factor - 1.0)


@dataclass(frozen=True)
class DatasetSpec:
    num_images: int = 100
    image_size: int = 64
    num_classes: int = 3
    objects_per_image: tuple = (1, 4)
    object_size_range: tuple = (12, 24)
    shift: ShiftSpec = field(default_factory=ShiftSpec)
    seed: int = 0
    domain: int = 0

    def __post_init__(self):
        lo, hi = self.objects_per_image
        smin, smax = self.object_size_range
        if self.num_images < 0:
            raise ValueError("num_images must be non-negative")
        if not 1 <= self.num_classes <= len(SHAPES):
            raise ValueError(f"num_classes must be in 1..{len(SHAPES)}")
        if not 1 <= lo <= hi:
            raise ValueError("objects_per_image must be a range 1 <= lo <= hi")
        if not 2 <= smin <= smax <= self.image_size:
            raise ValueError("object_size_range must lie within the image")
        if self.domain not in (0, 1):
            raise ValueError("domain must be 0 (source) or 1 (target)")

    def to_dict(self):
        d = asdict(self)
        d["objects_per_image"] = list(self.objects_per_image)
        d["object_size_range"] = list(self.object_size_range)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["shift"] = ShiftSpec(**d.get("shift", {}))
        d["objects_per_image"] = tuple(d.get("objects_per_image", (1, 4)))
        d["object_size_range"] = tuple(d.get("object_size_range", (12, 24)))
        return cls(**d)

    @property
    def output_size(self):
        f = self.shift.effective_scale
        return int(round(self.image_size * f)) if f != 1 else self.image_size


class Sample:
    """One image [3, H, W] in [0, 1] with its boxes [N, 4], labels [N] and domain."""

    __slots__ = ("image", "boxes", "labels", "domain")

    def __init__(self, image, boxes, labels, domain=0):
        self.image = np.ascontiguousarray(image, dtype=np.float32)
        self.boxes = np.asarray(boxes, dtype=np.float32).reshape(-1, 4)
        self.labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        self.domain = int(domain)
        if len(self.boxes) != len(self.labels):
            raise ValueError("boxes and labels differ in length")

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return (self.domain == other.domain
                and np.array_equal(self.image, other.image)
                and np.array_equal(self.boxes, other.boxes)
                and np.array_equal(self.labels, other.labels))

    def __repr__(self):
        return f"Sample(image={self.image.shape}, objects={len(self.boxes)}, domain={self.domain})"

    def unlabeled(self):
        return UnlabeledSample(self.image, self.domain)


class UnlabeledSample:
    """Image-only view of a sample; any annotation access is counted and refused."""

    __slots__ = ("image", "domain", "label_reads")

    def __init__(self, image, domain=1):
        self.image = image
        self.domain = int(domain)
        self.label_reads = 0

    @property
    def boxes(self):
        self.label_reads += 1
        raise TargetLabelError("target-domain boxes are hidden from training")

    @property
    def labels(self):
        self.label_reads += 1
        raise TargetLabelError("target-domain labels are hidden from training")

    def __repr__(self):
        return f"UnlabeledSample(image={self.image.shape}, domain={self.domain})"


def _shape_mask(kind, cx, cy, size, height, width):
    ys = np.arange(height)[:, None] + 0.5
    xs = np.arange(width)[None, :] + 0.5
    h = size / 2.0
    if kind == "circle":
        return (xs - cx) ** 2 + (ys - cy) ** 2 <= h * h
    if kind == "square":
        return (np.abs(xs - cx) <= h) & (np.abs(ys - cy) <= h)
    if kind == "diamond":
        return np.abs(xs - cx) + np.abs(ys - cy) <= h
    if kind == "triangle":
        # apex at the top centre, base along the bottom edge of the box
        top = cy - h
        rel = (ys - top) / size  # 0 at apex, 1 at base
        return (ys >= top) & (ys <= cy + h) & (np.abs(xs - cx) <= rel * h)
    raise ValueError(f"unknown shape {kind!r}")


def _background(rng, size):
    base = rng.uniform(0.35, 0.55)
    tint = rng.uniform_array(3, -0.05, 0.05)
    coarse = rng.uniform_array(3 * 36, -0.12, 0.12).reshape(3, 6, 6)
    fine = rng.uniform_array(3 * size * size, -0.03, 0.03).reshape(3, size, size)
    img = base + tint[:, None, None] + upsample_bilinear(coarse, size, size) + fine
    return img


def _box_iou(a, b):
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def layout_objects(spec, index):
    """Object list [(class, cx, cy, size, color)] for one scene, before any shift."""
    rng = SplitMix64(derive_seed(spec.seed, index, _STREAM_LAYOUT))
    S = spec.image_size
    lo, hi = spec.objects_per_image
    smin, smax = spec.object_size_range
    n = rng.randint(lo, hi)
    placed = []
    for _ in range(n):
        cls = rng.randint(1, spec.num_classes)
        size = rng.uniform(smin, smax)
        jitter = rng.uniform_array(3, -COLOR_JITTER, COLOR_JITTER)
        for _try in range(PLACEMENT_TRIES):
            cx = rng.uniform(size / 2, S - size / 2)
            cy = rng.uniform(size / 2, S - size / 2)
            box = (cx - size / 2, cy - size / 2, cx + size / 2, cy + size / 2)
            if all(_box_iou(box, p[4]) <= MAX_OVERLAP_IOU for p in placed):
                color = np.clip(CLASS_COLORS[cls - 1] + jitter, 0, 1)
                placed.append((cls, cx, cy, size, box, color))
                break
    return placed


def render_clean(spec, index):
    """Render scene ``index`` without any domain shift."""
    S = spec.image_size
    tex = SplitMix64(derive_seed(spec.seed, index, _STREAM_TEXTURE))
    img = _background(tex, S)
    boxes, labels = [], []
    for cls, cx, cy, size, box, color in layout_objects(spec, index):
        mask = _shape_mask(SHAPES[cls - 1], cx, cy, size, S, S)
        shade = 1.0 + tex.uniform_array(S * S, -0.04, 0.04).reshape(S, S)
        img = np.where(mask[None], color[:, None, None] * shade[None], img)
        boxes.append(box)
        labels.append(cls)
    img = np.clip(img, 0.0, 1.0).astype(np.float32)
    return Sample(img, np.asarray(boxes, dtype=np.float64).reshape(-1, 4), labels, spec.domain)


def apply_shift(sample, shift, seed):
    """Return ``sample`` with ``shift`` applied (boxes move only for scale shifts)."""
    if shift.kind == "none" or shift.intensity == 0:
        return Sample(sample.image.copy(), sample.boxes.copy(), sample.labels.copy(), sample.domain)
    if shift.kind == "style":
        img = apply_style_shift(sample.image, shift.intensity, seed=seed)
        return Sample(img, sample.boxes.copy(), sample.labels.copy(), sample.domain)
    if shift.kind == "fog":
        img = apply_fog(sample.image, shift.intensity)
        return Sample(img, sample.boxes.copy(), sample.labels.copy(), sample.domain)
    return rescale_sample(sample, shift.effective_scale)


def rescale_sample(sample, factor):
    """Resize image and multiply every box coordinate by ``factor``."""
    if factor == 1:
        return Sample(sample.image.copy(), sample.boxes.copy(), sample.labels.copy(), sample.domain)
    return Sample(rescale_image(sample.image, factor), rescale_boxes(sample.boxes, factor),
                  sample.labels.copy(), sample.domain)


def render_scene(spec, index):
    """Deterministic sample ``index`` of the dataset described by ``spec``."""
    if not 0 <= index < spec.num_images:
        raise IndexError(f"sample index {index} outside 0..{spec.num_images - 1}")
    clean = render_clean(spec, index)
    return apply_shift(clean, spec.shift, derive_seed(spec.seed, index, _STREAM_STYLE))
