"""Experiment-level analyses: ablation tables and the target-scale sweep."""

import csv
import io
import math

from ..adaptation import AblationMask
from ..synthdata import DatasetSpec, generate, rescale_sample
from .metrics import evaluate_detector

ABLATION_ROWS = (
    AblationMask(False, False, False),
    AblationMask(True, False, False),
    AblationMask(False, True, False),
    AblationMask(True, True, False),
    AblationMask(True, True, True),
)

SWEEP_MODELS = ("none", "img", "ins", "img+ins")
SWEEP_MASKS = {
    "none": AblationMask(False, False, False),
    "img": AblationMask(True, False, False),
    "ins": AblationMask(False, True, False),
    "img+ins": AblationMask(True, True, False),
}


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{100 * v:.2f}"


def ablation_table(reports, num_classes):
    """Rows in fixed order baseline, img, ins, img+ins, img+ins+cst.

    ``reports`` maps :class:`AblationMask` to :class:`EvalReport`; a missing
    mask raises ``KeyError``. Returns ``(header, rows)`` with AP in percent
    and mask columns marked ``x`` or left empty.
    """
    header = ["img", "ins", "cons"] + [f"AP_c{c}" for c in range(1, num_classes + 1)] + ["mAP"]
    rows = []
    for mask in ABLATION_ROWS:
        if mask not in reports:
            raise KeyError(f"no evaluation for ablation {mask.label()!r}")
        r = reports[mask]
        marks = ["x" if on else "" for on in (mask.use_img, mask.use_ins, mask.use_cst)]
        rows.append(marks + [_fmt(r.per_class.get(c)) for c in range(1, num_classes + 1)] + [_fmt(r.mAP)])
    return header, rows


def table_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def table_text(header, rows):
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).rjust(w) for x, w in zip(r, widths)) for r in [header, *rows]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def scale_sweep(detectors, target, scales, iou_thresh=0.5):
    """Evaluate every detector on the target set re-rendered at each scale factor.

    ``detectors`` maps model name to detector; ``target`` is a DatasetSpec or
    an already generated dataset. Returns rows ``(model, scale, mAP)``
    ordered by model then scale.
    """
    base = generate(target) if isinstance(target, DatasetSpec) else target
    rows = []
    cache = {s: base if s == 1 else [rescale_sample(x, s) for x in base] for s in scales}
    for name, det in detectors.items():
        for s in scales:
            rep = evaluate_detector(det, cache[s], iou_thresh)
            rows.append((name, float(s), rep.mAP))
    return rows


def sweep_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "scale", "mAP"])
    for name, s, m in rows:
        w.writerow([name, repr(s), repr(m)])
    return buf.getvalue()


def sweep_series(rows):
    series = {}
    for name, s, m in rows:
        xs, ys = series.setdefault(name, ([], []))
        xs.append(s)
        ys.append(m)
    return series
