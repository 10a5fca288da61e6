"""Image-level and instance-level domain classifiers behind gradient reversal."""

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..detector.model import he_normal


@dataclass
class DomainProbMap:
    """Per-activation domain logits [1, 1, Hf, Wf]; ``probs`` is their sigmoid."""

    logits: ad.Tensor
    _probs: ad.Tensor = field(default=None, repr=False)

    @property
    def probs(self):
        if self._probs is None:
            self._probs = ad.sigmoid(self.logits)
        return self._probs

    @classmethod
    def from_probs(cls, p, requires_grad=False):
        """Build from probabilities via their logits (for fixtures and diagnostics)."""
        p = np.asarray(p, dtype=np.float64)
        logit = np.log(p) - np.log1p(-p)
        return cls(ad.Tensor(logit.astype(np.float32).reshape(1, 1, *p.shape[-2:]),
                             requires_grad=requires_grad))

    @property
    def num_activations(self):
        return self.logits.size


@dataclass
class InstanceDomainProbs:
    """Per-ROI domain logits [R]; ``probs`` is their sigmoid."""

    logits: ad.Tensor
    _probs: ad.Tensor = field(default=None, repr=False)

    @property
    def probs(self):
        if self._probs is None:
            self._probs = ad.sigmoid(self.logits)
        return self._probs

    @classmethod
    def from_probs(cls, p, requires_grad=False):
        p = np.asarray(p, dtype=np.float64).reshape(-1)
        logit = np.log(p) - np.log1p(-p)
        return cls(ad.Tensor(logit.astype(np.float32), requires_grad=requires_grad))

    def __len__(self):
        return self.logits.size


def init_head_params(rng, feat_channels=64, inst_dim=128, hidden=32):
    def param(name, arr):
        return name, ad.Tensor(arr, requires_grad=True, name=name)

    items = [
        param("da.img.conv1.w", he_normal(rng, (hidden, feat_channels, 1, 1), feat_channels)),
        param("da.img.conv1.b", np.zeros(hidden, np.float32)),
        param("da.img.conv2.w", (rng.standard_normal((1, hidden, 1, 1)) * 0.01).astype(np.float32)),
        param("da.img.conv2.b", np.zeros(1, np.float32)),
        param("da.ins.fc1.w", he_normal(rng, (inst_dim, hidden), inst_dim)),
        param("da.ins.fc1.b", np.zeros(hidden, np.float32)),
        param("da.ins.fc2.w", (rng.standard_normal((hidden, 1)) * 0.01).astype(np.float32)),
        param("da.ins.fc2.b", np.zeros(1, np.float32)),
    ]
    return dict(items)


class DomainHeads:
    """The two adversarial domain classifiers.

    The image-level head is a patch classifier: two 1x1 convolutions give one
    prediction per feature-map activation. The instance-level head is a small
    MLP on the ROI feature vectors. Both inputs pass through
    :func:`~da_detect.autodiff.grad_reverse` first, so minimising the domain
    loss trains the heads while pushing the shared features the other way.
    """

    def __init__(self, feat_channels=64, inst_dim=128, hidden=32, seed=0, params=None):
        self.params = params if params is not None else init_head_params(
            np.random.default_rng(seed), feat_channels, inst_dim, hidden)

    def image_level(self, features, reverse=True):
        p = self.params
        x = ad.grad_reverse(features) if reverse else features
        x = ad.relu(ad.conv2d(x, p["da.img.conv1.w"], p["da.img.conv1.b"], 1, 0))
        return DomainProbMap(ad.conv2d(x, p["da.img.conv2.w"], p["da.img.conv2.b"], 1, 0))

    def instance_level(self, roi_features, reverse=True):
        p = self.params
        x = ad.grad_reverse(roi_features) if reverse else roi_features
        x = ad.relu(ad.linear(x, p["da.ins.fc1.w"], p["da.ins.fc1.b"]))
        logits = ad.linear(x, p["da.ins.fc2.w"], p["da.ins.fc2.b"])
        return InstanceDomainProbs(ad.reshape(logits, (-1,)))
