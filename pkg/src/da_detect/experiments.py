"""Multi-seed adaptation experiments on ShapeWorld.

One *condition* is an ablation mask trained on one seed. For every condition
the target-domain evaluation set is scored for mAP, proposal mean best
overlap and mAP under target rescaling; the fully adapted condition also
gets the backbone H-divergence before and after training.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .adaptation import AblationMask, estimate_h_divergence
from .evaluation import detector_mean_best_overlap, evaluate_detector
from .evaluation.analysis import ABLATION_ROWS
from .synthdata import DatasetSpec, ShiftSpec, derive_seed, generate, rescale_sample
from .training import TrainConfig, build_models, init_state, train

log = logging.getLogger(__name__)

_SRC_STREAM, _TGT_STREAM, _EVAL_STREAM, _FEAT_STREAM = 51, 52, 53, 54


@dataclass(frozen=True)
class ExperimentConfig:
    n_source: int = 500
    n_target: int = 500
    n_eval: int = 200
    image_size: int = 64
    shift: ShiftSpec = field(default_factory=lambda: ShiftSpec("style", 0.8))
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep_scales: tuple = (0.5, 1.0)
    top_p: int = 64
    divergence_images: int = 200
    divergence_positions: int = 4


@dataclass
class Datasets:
    source: object
    target: object
    target_eval: object


def make_datasets(cfg, seed):
    """Source (unshifted, labelled), target train (shifted) and target eval sets for ``seed``."""
    def spec(n, stream, domain, shift):
        return DatasetSpec(num_images=n, image_size=cfg.image_size, seed=derive_seed(seed, stream),
                           domain=domain, shift=shift)
    return Datasets(generate(spec(cfg.n_source, _SRC_STREAM, 0, ShiftSpec())),
                    generate(spec(cfg.n_target, _TGT_STREAM, 1, cfg.shift)),
                    generate(spec(cfg.n_eval, _EVAL_STREAM, 1, cfg.shift)))


def backbone_activations(detector, dataset, limit, positions, seed):
    """Feature vectors at ``positions`` random activations of each of the first ``limit`` images."""
    rng = np.random.default_rng(derive_seed(seed, _FEAT_STREAM))
    out = []
    for s in list(dataset)[:limit]:
        fm = detector.features(s.image).data[0]  # C, H, W
        C, H, W = fm.shape
        idx = rng.choice(H * W, size=min(positions, H * W), replace=False)
        out.append(fm.reshape(C, -1)[:, idx].T)
    return np.concatenate(out, axis=0).astype(np.float64)


def domain_divergence(detector, data, cfg, seed):
    fs = backbone_activations(detector, data.source, cfg.divergence_images, cfg.divergence_positions, seed)
    ft = backbone_activations(detector, data.target_eval, cfg.divergence_images,
                              cfg.divergence_positions, seed + 1)
    return estimate_h_divergence(fs, ft, seed=seed)


@dataclass
class ConditionResult:
    mask: AblationMask
    seed: int
    report: object  # EvalReport on the target eval set
    mbo: float
    sweep: dict  # scale -> target mAP
    divergence_before: object = None
    divergence_after: object = None
    state: object = field(default=None, repr=False)

    def drop(self, scale, relative=True):
        ref, at = self.sweep[1.0], self.sweep[scale]
        if not relative:
            return ref - at
        return (ref - at) / ref if ref > 0 else float("nan")


def run_condition(cfg, seed, mask, data=None, with_divergence=False, log_path=None):
    data = data or make_datasets(cfg, seed)
    tcfg = cfg.train.with_(seed=seed, ablation=mask)
    before = None
    if with_divergence:
        det0, _ = build_models(init_state(tcfg).params)
        before = domain_divergence(det0, data, cfg, seed)
    trainer = train(tcfg, data.source, data.target, log_path=log_path)
    det = trainer.detector
    report = evaluate_detector(det, data.target_eval)
    mbo = detector_mean_best_overlap(det, data.target_eval, cfg.top_p)
    sweep = {}
    for s in cfg.sweep_scales:
        ds = data.target_eval if s == 1 else [rescale_sample(x, s) for x in data.target_eval]
        sweep[float(s)] = report.mAP if s == 1 else evaluate_detector(det, ds).mAP
    after = domain_divergence(det, data, cfg, seed) if with_divergence else None
    log.info("seed %d %s: mAP %.4f mbo %.4f", seed, mask.label(), report.mAP, mbo)
    return ConditionResult(mask, seed, report, mbo, sweep, before, after, trainer.state)


def run_suite(cfg, seeds=(0, 1, 2), masks=ABLATION_ROWS, divergence_mask=AblationMask(True, True, True),
              progress=None):
    """Every mask on every seed; datasets are shared across masks of one seed."""
    results = []
    for seed in seeds:
        data = make_datasets(cfg, seed)
        for mask in masks:
            r = run_condition(cfg, seed, mask, data, with_divergence=(mask == divergence_mask))
            results.append(r)
            if progress:
                progress(r)
    return results


def seed_average(results, mask, key):
    vals = [key(r) for r in results if r.mask == mask]
    return float(np.mean(vals)) if vals else float("nan")
