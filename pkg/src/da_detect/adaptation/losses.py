"""Domain classification losses, the consistency regulariser and the total objective."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad

DEFAULT_LAMBDA = 0.1


class EmptyInstanceWarning(UserWarning):
    """No ROIs reached the instance-level loss; it contributes zero."""


def _check_labels(labels):
    for d in labels:
        if d not in (0, 1):
            raise ValueError(f"domain labels must be 0 (source) or 1 (target), got {d!r}")


def _zero():
    return ad.Tensor(np.zeros((), dtype=np.float32))


def image_domain_loss(prob_maps, labels, reduction="mean"):
    """Cross-entropy of every per-activation domain prediction.

    All activations of all images are pooled into one reduction. ``"mean"``
    divides by the total activation count; ``"sum"`` keeps the raw sum.
    """
    prob_maps = list(prob_maps)
    labels = list(labels)
    if not prob_maps:
        raise ValueError("image_domain_loss needs at least one probability map")
    if len(prob_maps) != len(labels):
        raise ValueError("one domain label per probability map")
    _check_labels(labels)
    logits = ad.concat([ad.reshape(m.logits, (-1,)) for m in prob_maps])
    y = np.concatenate([np.full(m.num_activations, d, dtype=np.float64) for m, d in zip(prob_maps, labels)])
    return ad.sigmoid_cross_entropy(logits, y, reduction=reduction)


def instance_domain_loss(probs, labels, reduction="mean"):
    """Cross-entropy of every per-ROI domain prediction, pooled over images.

    Zero ROIs in total yields a zero loss and an :class:`EmptyInstanceWarning`.
    """
    probs = list(probs)
    labels = list(labels)
    if len(probs) != len(labels):
        raise ValueError("one domain label per image")
    _check_labels(labels)
    parts = [(p, d) for p, d in zip(probs, labels) if len(p)]
    if not parts:
        warnings.warn("instance_domain_loss received no ROIs", EmptyInstanceWarning, stacklevel=2)
        return _zero()
    logits = ad.concat([p.logits for p, _ in parts])
    y = np.concatenate([np.full(len(p), d, dtype=np.float64) for p, d in parts])
    return ad.sigmoid_cross_entropy(logits, y, reduction=reduction)


def consistency_loss(prob_maps, instance_probs, reduction="mean", stop_image_grad=False):
    """Distance between each ROI's domain probability and its image's mean.

    For image i the image-level probability is the mean of its map; every ROI
    j contributes ``|mean_i - p_ij|``. Gradients reach both heads unless
    ``stop_image_grad`` treats the image mean as a constant.
    """
    prob_maps = list(prob_maps)
    instance_probs = list(instance_probs)
    if len(prob_maps) != len(instance_probs):
        raise ValueError("one probability map per set of instance probabilities")
    terms = []
    for m, inst in zip(prob_maps, instance_probs):
        if len(inst) == 0:
            continue
        img_mean = ad.mean(m.probs)
        if stop_image_grad:
            img_mean = ad.Tensor(img_mean.data.copy())
        terms.append(ad.abs(ad.sub(img_mean, inst.probs)))
    if not terms:
        return _zero()
    diffs = ad.concat(terms)
    return ad.mean(diffs) if reduction == "mean" else ad.sum(diffs)


@dataclass(frozen=True)
class AblationMask:
    use_img: bool = True
    use_ins: bool = True
    use_cst: bool = True

    @classmethod
    def parse(cls, text):
        """Parse ``"img,ins,cst"`` or ``"img+ins"`` lists; ``""``, ``none`` and ``baseline`` disable all."""
        text = (text or "").strip().lower()
        if text in ("none", "baseline"):
            text = ""
        items = {t.strip() for t in text.replace("+", ",").split(",") if t.strip()}
        aliases = {"cons": "cst"}
        items = {aliases.get(t, t) for t in items}
        unknown = items - {"img", "ins", "cst"}
        if unknown:
            raise ValueError(f"unknown ablation component(s): {', '.join(sorted(unknown))}")
        return cls("img" in items, "ins" in items, "cst" in items)

    def label(self):
        parts = [n for n, on in (("img", self.use_img), ("ins", self.use_ins), ("cst", self.use_cst)) if on]
        return "+".join(parts) if parts else "baseline"

    def as_text(self):
        return ",".join(n for n, on in (("img", self.use_img), ("ins", self.use_ins), ("cst", self.use_cst)) if on)

    @property
    def any(self):
        return self.use_img or self.use_ins or self.use_cst


@dataclass
class LossBreakdown:
    l_rpn: float
    l_roi: float
    l_img: float
    l_ins: float
    l_cst: float
    total: float
    lam: float = DEFAULT_LAMBDA
    tensor: object = field(default=None, repr=False, compare=False)

    def recompute(self):
        return self.l_rpn + self.l_roi + self.lam * (self.l_img + self.l_ins + self.l_cst)

    def as_row(self):
        return [self.l_rpn, self.l_roi, self.l_img, self.l_ins, self.l_cst, self.total]


def _value(x):
    if x is None:
        return 0.0
    return float(x.item()) if isinstance(x, ad.Tensor) else float(x)


def total_loss(det, l_img, l_ins, l_cst, lam=DEFAULT_LAMBDA, mask=None):
    """Combine detection and adaptation terms: det + lam * (img + ins + cst).

    ``det`` is ``(l_rpn, l_roi)`` or ``None`` when no source image is present.
    Terms switched off by ``mask`` are excluded and reported as 0. The
    returned breakdown carries the differentiable total in ``.tensor`` when
    any input is a tensor.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    mask = mask or AblationMask()
    l_rpn, l_roi = det if det is not None else (None, None)
    l_img = l_img if mask.use_img else None
    l_ins = l_ins if mask.use_ins else None
    l_cst = l_cst if mask.use_cst else None

    tensor = None
    for part, w in ((l_rpn, 1.0), (l_roi, 1.0), (l_img, lam), (l_ins, lam), (l_cst, lam)):
        if part is None:
            continue
        term = part * w if w != 1.0 else part
        tensor = term if tensor is None else tensor + term
    values = [_value(v) for v in (l_rpn, l_roi, l_img, l_ins, l_cst)]
    if isinstance(tensor, ad.Tensor):
        total = float(tensor.item())
    else:
        total = values[0] + values[1] + lam * (values[2] + values[3] + values[4])
        tensor = None
    return LossBreakdown(*values, total=total, lam=lam, tensor=tensor)
