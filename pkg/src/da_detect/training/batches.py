"""Mixed source/target batches."""

import numpy as np

from ..synthdata.render import UnlabeledSample
from ..synthdata.rng import derive_seed

_SOURCE_STREAM = 11
_TARGET_STREAM = 12


def epoch_order(n, seed, epoch, stream):
    """Permutation of ``range(n)`` for one epoch; a pure function of its arguments."""
    rng = np.random.default_rng(derive_seed(seed, epoch, stream))
    return rng.permutation(n)


def _pick(n, seed, it, stream):
    epoch, pos = divmod(it, n)
    return int(epoch_order(n, seed, epoch, stream)[pos])


def compose_batch(source_ds, target_ds, it, seed=0):
    """One labelled source sample and one unlabelled target sample for iteration ``it``.

    Each dataset is cycled in a fresh shuffled order every epoch. The target
    sample comes back stripped of its boxes and labels and marked as domain 1.
    """
    if len(source_ds) == 0 or len(target_ds) == 0:
        raise ValueError("both datasets must be non-empty")
    src = source_ds[_pick(len(source_ds), seed, it, _SOURCE_STREAM)]
    tgt = target_ds[_pick(len(target_ds), seed, it, _TARGET_STREAM)]
    if src.domain != 0:
        raise ValueError("source dataset contains target-domain samples")
    return src, UnlabeledSample(tgt.image, domain=1)
