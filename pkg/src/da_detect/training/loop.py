"""The adversarial training loop."""

import csv
import logging
import os

import numpy as np

from .. import autodiff as ad
from ..adaptation import (
    DomainHeads,
    consistency_loss,
    image_domain_loss,
    init_head_params,
    instance_domain_loss,
    total_loss,
)
from ..detector import Detector, DetectorConfig, compute_detection_loss
from ..detector.model import init_detector_params
from ..synthdata.rng import derive_seed
from .batches import compose_batch
from .checkpoint import TrainState, save_checkpoint
from .config import TrainConfig
from .optim import clip_by_global_norm, lr_at, sgd_step

log = logging.getLogger(__name__)

LOG_HEADER = ["iter", "lr", "l_rpn", "l_roi", "l_img", "l_ins", "l_cst", "total"]
EVAL_HEADER = ["iter", "mAP"]

_DET_INIT_STREAM = 31
_HEAD_INIT_STREAM = 32
_SAMPLING_STREAM = 33


class TrainingDiverged(RuntimeError):
    """A loss or gradient became non-finite; ``dump_path`` holds the offending batch."""

    def __init__(self, message, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path


def init_state(cfg, det_cfg=None):
    """Fresh parameters and zero momentum buffers for ``cfg.seed``."""
    det_cfg = det_cfg or DetectorConfig()
    det = init_detector_params(det_cfg, np.random.default_rng(derive_seed(cfg.seed, 0, _DET_INIT_STREAM)))
    heads = init_head_params(np.random.default_rng(derive_seed(cfg.seed, 0, _HEAD_INIT_STREAM)),
                             feat_channels=det_cfg.feature_channels, inst_dim=det_cfg.fc_dim)
    params = {k: t.data for k, t in {**det, **heads}.items()}
    buffers = {k: np.zeros_like(v) for k, v in params.items()}
    return TrainState(params, buffers, 0, cfg)


def build_models(params, det_cfg=None):
    """Detector and domain heads sharing the arrays in ``params`` (no copies)."""
    det_cfg = det_cfg or DetectorConfig()
    tensors = {k: ad.Tensor(v, requires_grad=True, name=k) for k, v in params.items()}
    det = Detector(det_cfg, params={k: t for k, t in tensors.items() if not k.startswith("da.")})
    heads = DomainHeads(det_cfg.feature_channels, det_cfg.fc_dim,
                        params={k: t for k, t in tensors.items() if k.startswith("da.")})
    return det, heads


def _fmt(x):
    return repr(float(x))


class Trainer:
    """Runs :class:`TrainConfig` on a source and a target dataset.

    Each iteration sees one labelled source image and one unlabelled target
    image. The detection loss only ever touches the source image; the domain
    losses see both. With every ablation switch off the target image is
    skipped entirely, which is plain detector training.
    """

    def __init__(self, cfg, source_ds, target_ds, det_cfg=None, state=None,
                 log_path=None, eval_ds=None, eval_log_path=None, dump_dir=None):
        self.cfg = cfg
        self.det_cfg = det_cfg or DetectorConfig()
        self.source_ds = source_ds
        self.target_ds = target_ds
        self.state = state if state is not None else init_state(cfg, self.det_cfg)
        self.state.config = cfg
        self.detector, self.heads = build_models(self.state.params, self.det_cfg)
        self.tensors = {**self.detector.params, **self.heads.params}
        self.log_path = log_path
        self.eval_ds = eval_ds
        self.eval_log_path = eval_log_path
        self.dump_dir = dump_dir
        self.history = []
        self.evals = []

    # one iteration -----------------------------------------------------
    def losses(self, src, tgt, rng):
        """Forward pass of one batch; returns the :class:`LossBreakdown`."""
        cfg = self.cfg
        mask = cfg.ablation
        st_s = self.detector.forward(src.image)
        det = compute_detection_loss(src, st_s, self.detector, rng)
        l_img = l_ins = l_cst = None
        if mask.any and cfg.lam > 0:
            st_t = self.detector.forward(tgt.image)
            maps = [self.heads.image_level(st_s.features), self.heads.image_level(st_t.features)]
            if mask.use_img:
                l_img = image_domain_loss(maps, [0, 1], reduction=cfg.reduction)
            if mask.use_ins:
                t_rois = st_t.proposals[:cfg.target_rois]
                t_feat = self.detector.roi_head(st_t.features, t_rois).features
                inst = [self.heads.instance_level(det.roi_out.features),
                        self.heads.instance_level(t_feat)]
                l_ins = instance_domain_loss(inst, [0, 1], reduction=cfg.reduction)
                if mask.use_cst:
                    l_cst = consistency_loss(maps, inst, reduction=cfg.reduction,
                                             stop_image_grad=cfg.stop_image_grad)
        return total_loss((det.l_rpn, det.l_roi), l_img, l_ins, l_cst, lam=cfg.lam, mask=mask)

    def step(self):
        cfg = self.cfg
        it = self.state.iteration
        lr = lr_at(it, cfg)
        src, tgt = compose_batch(self.source_ds, self.target_ds, it, seed=cfg.seed)
        rng = np.random.default_rng(derive_seed(cfg.seed, it, _SAMPLING_STREAM))
        for t in self.tensors.values():
            t.grad = None
        with ad.Tape() as tape:
            br = self.losses(src, tgt, rng)
            if not np.isfinite(br.total):
                self._diverged(it, src, tgt, f"non-finite loss {br.total!r}")
            tape.backward(br.tensor)
        grads = {k: t.grad for k, t in self.tensors.items() if t.grad is not None}
        if not all(np.all(np.isfinite(g)) for g in grads.values()):
            self._diverged(it, src, tgt, "non-finite gradient")
        clip_by_global_norm(grads, cfg.clip_norm)
        sgd_step(self.state.params, grads, self.state.buffers, lr, cfg.momentum, cfg.weight_decay)
        self.state.iteration = it + 1
        row = [it, lr, *br.as_row()]
        self.history.append(row)
        return row

    def _diverged(self, it, src, tgt, why):
        path = None
        if self.dump_dir is not None:
            os.makedirs(self.dump_dir, exist_ok=True)
            path = os.path.join(self.dump_dir, f"diverged_iter{it}.npz")
            np.savez(path, source_image=src.image, source_boxes=src.boxes,
                     source_labels=src.labels, target_image=tgt.image, iteration=it)
        raise TrainingDiverged(f"iteration {it}: {why}" + (f" (batch dumped to {path})" if path else ""), path)

    # full run ----------------------------------------------------------
    def run(self, until=None, checkpoint_path=None):
        """Train up to iteration ``until`` (default ``total_iters``); returns the state."""
        cfg = self.cfg
        until = cfg.total_iters if until is None else min(until, cfg.total_iters)
        log_f = eval_f = None
        try:
            if self.log_path:
                log_f = self._open_log(self.log_path, LOG_HEADER)
            if self.eval_log_path and self.eval_ds is not None and cfg.eval_every:
                eval_f = self._open_log(self.eval_log_path, EVAL_HEADER)
            writer = csv.writer(log_f) if log_f else None
            while self.state.iteration < until:
                row = self.step()
                if writer:
                    writer.writerow([row[0]] + [_fmt(v) for v in row[1:]])
                it = self.state.iteration
                if it % 100 == 0:
                    log.info("iter %d total %.4f", it, row[-1])
                if eval_f and it % cfg.eval_every == 0:
                    m = self.evaluate()
                    self.evals.append((it, m))
                    csv.writer(eval_f).writerow([it, _fmt(m)])
        finally:
            for f in (log_f, eval_f):
                if f:
                    f.close()
        if checkpoint_path:
            save_checkpoint(self.state, checkpoint_path)
        return self.state

    def evaluate(self):
        from ..evaluation import evaluate_detector
        return evaluate_detector(self.detector, self.eval_ds).mAP

    def _open_log(self, path, header):
        """Append when resuming into an existing log, otherwise start a new one."""
        fresh = self.state.iteration == 0 or not os.path.exists(path)
        if not fresh:
            self._truncate_log(path, self.state.iteration)
        f = open(path, "w" if fresh else "a", newline="")
        if fresh:
            csv.writer(f).writerow(header)
        return f

    @staticmethod
    def _truncate_log(path, iteration):
        # drop rows at or beyond the resume point so logs never hold duplicates
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        keep = [rows[0]] + [r for r in rows[1:] if r and int(r[0]) < iteration]
        with open(path, "w", newline="") as f:
            csv.writer(f).writerows(keep)


def train(cfg, source_ds, target_ds, det_cfg=None, log_path=None, checkpoint_path=None,
          eval_ds=None, eval_log_path=None, state=None, dump_dir=None):
    """Run a full training job; returns the :class:`Trainer` (state, history, detector)."""
    trainer = Trainer(cfg, source_ds, target_ds, det_cfg=det_cfg, state=state, log_path=log_path,
                      eval_ds=eval_ds, eval_log_path=eval_log_path, dump_dir=dump_dir)
    trainer.run(checkpoint_path=checkpoint_path)
    return trainer
