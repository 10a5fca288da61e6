"""Command-line interface: ``da-detect <subcommand> [options]``.

Settings resolve in this order, later winning: built-in defaults, the
``--preset`` (training keys only), the ``--config`` INI file, command-line
flags. Every artifact-producing subcommand writes a ``.meta.json`` sidecar
holding the effective configuration, the digests of its input files and the
tool version.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

import argparse
import configparser
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__, kernels

log = logging.getLogger("da_detect.cli")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
THREADS_ENV = "DA_DETECT_THREADS"
SIDECAR_SUFFIX = ".meta.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


# ---------------------------------------------------------------------------
# settings


@dataclass(frozen=True)
class Setting:
    section: str
    key: str
    type: type
    default: object
    help: str


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SETTINGS = [
    Setting("data", "num_images", int, 100, "number of images"),
    Setting("data", "image_size", int, 64, "square image side in pixels"),
    Setting("data", "shift", str, "none", "domain shift kind: none, style, fog or scale"),
    Setting("data", "intensity", float, 0.0, "shift intensity in [0, 1]"),
    Setting("data", "scale_factor", float, 1.0, "resize factor a scale shift reaches at intensity 1"),
    Setting("data", "seed", int, 0, "dataset seed"),
    Setting("data", "domain", int, 0, "domain label written into the samples (0 source, 1 target)"),
    Setting("data", "objects_min", int, 1, "fewest objects per image"),
    Setting("data", "objects_max", int, 4, "most objects per image"),
    Setting("train", "ablation", str, "img,ins,cst", "enabled adaptation terms, e.g. 'img,ins' ('' for none)"),
    Setting("train", "lam", float, 0.1, "weight of the adaptation losses"),
    Setting("train", "lr_initial", float, 0.01, "learning rate before the drop"),
    Setting("train", "lr_reduced", float, 0.001, "learning rate after the drop"),
    Setting("train", "lr_drop_iter", int, 1500, "iteration at which the learning rate drops"),
    Setting("train", "total_iters", int, 2000, "training iterations"),
    Setting("train", "momentum", float, 0.9, "SGD momentum"),
    Setting("train", "weight_decay", float, 0.0005, "L2 weight decay"),
    Setting("train", "seed", int, 0, "training seed (init, batch order, sampling)"),
    Setting("train", "eval_every", int, 0, "evaluate on --eval-data every N iterations (0 disables)"),
    Setting("train", "clip_norm", float, 10.0, "global gradient-norm clip"),
    Setting("train", "reduction", str, "mean", "domain-loss reduction: mean or sum"),
    Setting("train", "stop_image_grad", _bool, False, "consistency term does not update the image head"),
    Setting("train", "target_rois", int, 16, "target proposals used as instances"),
    Setting("eval", "iou_thresh", float, 0.5, "IoU needed for a true positive"),
    Setting("eval", "score_floor", float, 0.05, "detections scoring below this are dropped"),
    Setting("eval", "top_p", int, 64, "proposals per image for mean best overlap"),
    Setting("eval", "top_r", int, 500, "top-ranked detections bucketed by analyze-errors"),
    Setting("eval", "scales", str, "0.5,0.75,1.0", "comma-separated target scale factors"),
    Setting("eval", "divergence_images", int, 200, "images per domain for feature extraction"),
    Setting("eval", "divergence_positions", int, 4, "random feature-map positions per image"),
    Setting("eval", "seed", int, 0, "seed for feature sampling and the divergence split"),
]
_BY_KEY = {(s.section, s.key): s for s in SETTINGS}
_FLAG = {  # setting -> command-line flag where it differs from the key
    ("train", "lam"): "--lambda",
    ("train", "lr_initial"): "--lr",
    ("train", "total_iters"): "--iters",
    ("train", "seed"): "--train-seed",
    ("eval", "iou_thresh"): "--iou",
    ("eval", "seed"): "--eval-seed",
    ("data", "seed"): "--seed",
}


def _flag(section, key):
    return _FLAG.get((section, key), "--" + key.replace("_", "-"))


def _dest(section, key):
    return f"cfg__{section}__{key}"


def _add_settings(p, section, skip=()):
    for s in SETTINGS:
        if s.section != section or s.key in skip:
            continue
        kw = {"type": s.type} if s.type is not bool else {}
        p.add_argument(_flag(s.section, s.key), dest=_dest(s.section, s.key), default=None,
                       metavar=s.key.upper(), help=f"{s.help} (default: {s.default!r})", **kw)


def _add_common(p):
    p.add_argument("--config", metavar="INI", default=None,
                   help="INI file with [data], [train] and [eval] sections (default: none)")
    p.add_argument("--preset", choices=("toy", "full"), default="toy",
                   help="base training hyper-parameters (default: 'toy')")
    p.add_argument("-q", "--quiet", action="store_true", default=False,
                   help="only log warnings and errors (default: False)")


def resolve_settings(args, sections):
    """Effective ``{section: {key: value}}`` for ``sections``; logs every overridden key."""
    from .training import PRESETS

    values = {sec: {s.key: s.default for s in SETTINGS if s.section == sec} for sec in sections}
    if "train" in values:
        preset = PRESETS[getattr(args, "preset", "toy")].to_dict()
        for k in values["train"]:
            if k in preset and preset[k] != values["train"][k]:
                values["train"][k] = preset[k]
                log.info("preset %s: train.%s = %r", args.preset, k, preset[k])
    if getattr(args, "config", None):
        parser = configparser.ConfigParser(interpolation=None)
        try:
            if not parser.read(args.config):
                raise UsageError(f"cannot read config file {args.config!r}")
        except configparser.Error as exc:
            raise UsageError(f"malformed config file {args.config!r}: {exc}") from exc
        for sec in parser.sections():
            if sec not in ("data", "train", "eval"):
                raise UsageError(f"{args.config}: unknown section [{sec}]")
            for key, raw in parser.items(sec):
                setting = _BY_KEY.get((sec, key))
                if setting is None:
                    raise UsageError(f"{args.config}: unknown key {sec}.{key}")
                try:
                    value = setting.type(raw)
                except ValueError as exc:
                    raise UsageError(f"{args.config}: bad value for {sec}.{key}: {exc}") from exc
                if sec not in values:
                    continue
                values[sec][key] = value
                log.info("config %s: %s.%s = %r", args.config, sec, key, values[sec][key])
    for sec in sections:
        for key in values[sec]:
            v = getattr(args, _dest(sec, key), None)
            if v is not None:
                values[sec][key] = v
                log.info("flag %s: %s.%s = %r", _flag(sec, key), sec, key, v)
    return values


def _wrap_value_error(fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def dataset_spec(d):
    from .synthdata import DatasetSpec, ShiftSpec

    return _wrap_value_error(
        lambda: DatasetSpec(num_images=d["num_images"], image_size=d["image_size"], seed=d["seed"],
                            domain=d["domain"], objects_per_image=(d["objects_min"], d["objects_max"]),
                            shift=ShiftSpec(d["shift"], d["intensity"], d["scale_factor"])))


def train_config(t):
    from .training import TrainConfig

    return _wrap_value_error(TrainConfig.from_dict, t)


def parse_scales(text):
    try:
        scales = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad scale list {text!r}") from exc
    if not scales or any(s <= 0 for s in scales):
        raise UsageError("scales must be a non-empty list of positive numbers")
    return scales


def thread_count():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


# ---------------------------------------------------------------------------
# artifacts


def file_digest(path):
    with open(path, "rb") as f:
        return f"{kernels.fnv1a64(f.read()):016x}"


def write_sidecar(path, command, config, inputs, outputs):
    """JSON sidecar next to an artifact; contents depend only on the inputs."""
    meta = {
        "tool": "da-detect",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {role: {"path": os.path.basename(p), "digest": file_digest(p)} for role, p in inputs.items()},
        "outputs": sorted(os.path.basename(o) for o in outputs),
    }
    with open(path, "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    return meta


def _write_text(path, text):
    with open(path, "w", newline="") as f:
        f.write(text)


def _parse_models(items):
    """``NAME=PATH`` (or bare ``PATH``, named after the file) -> ordered dict."""
    models = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = os.path.splitext(os.path.basename(item))[0], item
        if not name or not path:
            raise UsageError(f"bad model spec {item!r}; expected NAME=PATH")
        if name in models:
            raise UsageError(f"model name {name!r} given twice")
        models[name] = path
    return models


def load_detector(path, score_floor=None):
    from .detector import DetectorConfig
    from .training import build_models, load_checkpoint

    state = load_checkpoint(path)
    det_cfg = DetectorConfig() if score_floor is None else DetectorConfig(score_floor=score_floor)
    return build_models(state.params, det_cfg)[0], state


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args):
    from .synthdata import make_dataset, manifest_path

    cfg = resolve_settings(args, ["data"])
    spec = dataset_spec(cfg["data"])
    ds = make_dataset(spec, args.out)
    write_sidecar(args.out + SIDECAR_SUFFIX, "gen-data", cfg, {}, [args.out, manifest_path(args.out)])
    print(f"wrote {len(ds)} images to {args.out} (digest {ds.digest_hex})")
    return EXIT_OK


def _load_ds(path):
    from .synthdata import read_dataset

    return read_dataset(path)


def cmd_train(args):
    from .training import Trainer, load_checkpoint

    cfg = resolve_settings(args, ["train"])
    tcfg = train_config(cfg["train"])
    source, target = _load_ds(args.source), _load_ds(args.target)
    eval_ds = _load_ds(args.eval_data) if args.eval_data else None
    state = None
    if args.resume:
        state = load_checkpoint(args.resume, expect_ablation=tcfg.ablation)
        if state.config.with_(total_iters=tcfg.total_iters) != tcfg.with_(total_iters=tcfg.total_iters):
            log.warning("resuming with a configuration that differs from the checkpoint's")
    log_path = args.log or args.out + ".log.csv"
    eval_log = args.out + ".eval.csv" if eval_ds is not None and tcfg.eval_every else None
    trainer = Trainer(tcfg, source, target, state=state, log_path=log_path, eval_ds=eval_ds,
                      eval_log_path=eval_log, dump_dir=os.path.dirname(os.path.abspath(args.out)))
    trainer.state.digests = {"source": source.digest_hex, "target": target.digest_hex}
    trainer.run(checkpoint_path=args.out)
    inputs = {"source": args.source, "target": args.target}
    if args.eval_data:
        inputs["eval"] = args.eval_data
    if args.resume:
        inputs["resume"] = args.resume
    outs = [args.out, log_path] + ([eval_log] if eval_log else [])
    write_sidecar(args.out + SIDECAR_SUFFIX, "train", cfg, inputs, outs)
    last = trainer.history[-1] if trainer.history else None
    print(f"trained to iteration {trainer.state.iteration}" + (f", final loss {last[-1]:.4f}" if last else ""))
    return EXIT_OK


def cmd_eval(args):
    from .evaluation import evaluate_detector

    cfg = resolve_settings(args, ["eval"])
    e = cfg["eval"]
    det, _ = load_detector(args.checkpoint, e["score_floor"])
    ds = _load_ds(args.data)
    report = evaluate_detector(det, ds, e["iou_thresh"], checkpoint_digest=file_digest(args.checkpoint))
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_text(args.out, text)
        write_sidecar(args.out + SIDECAR_SUFFIX, "eval", cfg,
                      {"checkpoint": args.checkpoint, "data": args.data}, [args.out])
    print(f"mAP {report.mAP:.4f}" if not np.isnan(report.mAP) else "mAP undefined (no ground truth)")
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def _ablation_job(job):
    """One ablation row: train, checkpoint, evaluate. Module level so worker processes can run it."""
    from .evaluation import evaluate_detector
    from .training import Trainer, build_models

    tcfg, paths, out_prefix, e = job
    source, target, ev = (_load_ds(p) for p in paths)
    trainer = Trainer(tcfg, source, target, log_path=out_prefix + ".log.csv")
    trainer.state.digests = {"source": source.digest_hex, "target": target.digest_hex}
    trainer.run(checkpoint_path=out_prefix + ".dafr")
    from .detector import DetectorConfig
    det = build_models(trainer.state.params, DetectorConfig(score_floor=e["score_floor"]))[0]
    return evaluate_detector(det, ev, e["iou_thresh"], checkpoint_digest=file_digest(out_prefix + ".dafr"))


def _run_jobs(fn, jobs, threads):
    if threads == 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def cmd_ablation(args):
    from .evaluation import ABLATION_ROWS, ablation_table, table_csv, table_text

    threads = thread_count()
    cfg = resolve_settings(args, ["train", "eval"])
    base = train_config(cfg["train"])
    out = _ensure_dir(args.out)
    paths = (args.source, args.target, args.eval_data)
    jobs = [(base.with_(ablation=m), paths, os.path.join(out, m.label()), cfg["eval"]) for m in ABLATION_ROWS]
    reports = dict(zip(ABLATION_ROWS, _run_jobs(_ablation_job, jobs, threads)))
    from .detector import DetectorConfig
    header, rows = ablation_table(reports, DetectorConfig().num_classes)
    _write_text(os.path.join(out, "table.csv"), table_csv(header, rows))
    _write_text(os.path.join(out, "table.txt"), table_text(header, rows))
    with open(os.path.join(out, "reports.json"), "w") as f:
        json.dump({m.label(): r.to_dict() for m, r in reports.items()}, f, indent=2, sort_keys=True)
        f.write("\n")
    outs = ["table.csv", "table.txt", "reports.json"]
    for m in ABLATION_ROWS:
        outs += [m.label() + ".dafr", m.label() + ".log.csv"]
    cfg["train"].pop("ablation", None)
    write_sidecar(os.path.join(out, "ablation" + SIDECAR_SUFFIX), "ablation", cfg,
                  {"source": args.source, "target": args.target, "eval": args.eval_data}, outs)
    sys.stdout.write(table_text(header, rows))
    return EXIT_OK


def cmd_analyze_errors(args):
    from .evaluation import BACKGROUND, CORRECT, MISLOCALIZED, categorize_detections, collect_detections
    from .evaluation import stacked_bar_chart, write_svg

    cfg = resolve_settings(args, ["eval"])
    e = cfg["eval"]
    models = _parse_models(args.model)
    ds = _load_ds(args.data)
    out = _ensure_dir(args.out)
    cats = [CORRECT, MISLOCALIZED, BACKGROUND]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "top_r", *cats, *(f"frac_{c}" for c in cats)])
    groups = {}
    for name, path in models.items():
        det, _ = load_detector(path, e["score_floor"])
        tax = categorize_detections(collect_detections(det, ds), ds, e["top_r"])
        fr = tax.fractions()
        groups[name] = fr
        w.writerow([name, e["top_r"], *(tax.counts[c] for c in cats), *(repr(fr[c]) for c in cats)])
        print(f"{name}: " + ", ".join(f"{c} {fr[c]:.3f}" for c in cats))
    _write_text(os.path.join(out, "errors.csv"), buf.getvalue())
    write_svg(os.path.join(out, "errors.svg"),
              stacked_bar_chart(groups, cats, title=f"Top-{e['top_r']} detections", ylabel="fraction"))
    inputs = {"data": args.data, **{f"model:{n}": p for n, p in models.items()}}
    write_sidecar(os.path.join(out, "errors" + SIDECAR_SUFFIX), "analyze-errors", cfg, inputs,
                  ["errors.csv", "errors.svg"])
    return EXIT_OK


def _sweep_job(job):
    from .evaluation import scale_sweep

    name, path, data_path, scales, e = job
    det, _ = load_detector(path, e["score_floor"])
    return scale_sweep({name: det}, _load_ds(data_path), scales, e["iou_thresh"])


def cmd_scale_sweep(args):
    from .evaluation import line_chart, sweep_csv, sweep_series, write_svg

    threads = thread_count()
    cfg = resolve_settings(args, ["eval"])
    e = cfg["eval"]
    scales = parse_scales(e["scales"])
    models = _parse_models(args.model)
    out = _ensure_dir(args.out)
    jobs = [(n, p, args.data, scales, e) for n, p in models.items()]
    rows = [r for part in _run_jobs(_sweep_job, jobs, threads) for r in part]
    _write_text(os.path.join(out, "sweep.csv"), sweep_csv(rows))
    write_svg(os.path.join(out, "sweep.svg"),
              line_chart(sweep_series(rows), title="Target scale sweep", xlabel="scale factor", ylabel="mAP",
                         y_range=(0.0, 1.0)))
    inputs = {"data": args.data, **{f"model:{n}": p for n, p in models.items()}}
    write_sidecar(os.path.join(out, "sweep" + SIDECAR_SUFFIX), "scale-sweep", cfg, inputs,
                  ["sweep.csv", "sweep.svg"])
    for name, s, m in rows:
        print(f"{name}\t{s:g}\t{m:.4f}")
    return EXIT_OK


def cmd_proposal_quality(args):
    from .evaluation import detector_mean_best_overlap

    cfg = resolve_settings(args, ["eval"])
    e = cfg["eval"]
    models = _parse_models(args.model)
    ds = _load_ds(args.data)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "top_p", "mean_best_overlap"])
    for name, path in models.items():
        det, _ = load_detector(path)
        mbo = detector_mean_best_overlap(det, ds, e["top_p"])
        w.writerow([name, e["top_p"], repr(mbo)])
        print(f"{name}\t{mbo:.4f}")
    if args.out:
        _write_text(args.out, buf.getvalue())
        inputs = {"data": args.data, **{f"model:{n}": p for n, p in models.items()}}
        write_sidecar(args.out + SIDECAR_SUFFIX, "proposal-quality", cfg, inputs, [args.out])
    return EXIT_OK


def cmd_divergence(args):
    from .adaptation import estimate_h_divergence
    from .experiments import backbone_activations

    cfg = resolve_settings(args, ["eval"])
    e = cfg["eval"]
    if args.features_source and args.features_target:
        if args.checkpoint:
            raise UsageError("give either feature files or --checkpoint, not both")
        fs, ft = np.load(args.features_source), np.load(args.features_target)
        inputs = {"features_source": args.features_source, "features_target": args.features_target}
    elif args.checkpoint and args.source and args.target:
        if args.features_source or args.features_target:
            raise UsageError("give either feature files or --checkpoint, not both")
        det, _ = load_detector(args.checkpoint)
        n, k = e["divergence_images"], e["divergence_positions"]
        fs = backbone_activations(det, _load_ds(args.source), n, k, e["seed"])
        ft = backbone_activations(det, _load_ds(args.target), n, k, e["seed"] + 1)
        inputs = {"checkpoint": args.checkpoint, "source": args.source, "target": args.target}
        if args.save_features:
            np.save(args.save_features + ".source.npy", fs)
            np.save(args.save_features + ".target.npy", ft)
    else:
        raise UsageError("need --features-source and --features-target, "
                         "or --checkpoint with --source and --target")
    est = estimate_h_divergence(fs, ft, seed=e["seed"])
    result = {"err_source": est.err_source, "err_target": est.err_target, "d_h": est.d_h,
              "n_source": int(len(fs)), "n_target": int(len(ft))}
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_text(args.out, text)
        write_sidecar(args.out + SIDECAR_SUFFIX, "divergence", cfg, inputs, [args.out])
    print(f"d_H {est.d_h:.4f} (err_source {est.err_source:.4f}, err_target {est.err_target:.4f})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = _Parser(prog="da-detect", description="Toy domain-adaptive two-stage detector.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.set_defaults(func=fn)
        _add_common(sp)
        return sp

    g = add("gen-data", cmd_gen_data, "Render a synthetic dataset file plus manifest.")
    g.add_argument("--out", required=True, help="output dataset path (required)")
    _add_settings(g, "data")

    t = add("train", cmd_train, "Train one detector on a source and a target dataset.")
    t.add_argument("--source", required=True, help="labelled source dataset (required)")
    t.add_argument("--target", required=True, help="target dataset; its labels are never read (required)")
    t.add_argument("--out", required=True, help="checkpoint path (required)")
    t.add_argument("--log", default=None, help="CSV loss log (default: OUT.log.csv)")
    t.add_argument("--resume", default=None, help="checkpoint to continue from (default: none)")
    t.add_argument("--eval-data", default=None, help="dataset for periodic evaluation (default: none)")
    _add_settings(t, "train")

    e = add("eval", cmd_eval, "Score a checkpoint on a dataset (AP per class and mAP).")
    e.add_argument("--checkpoint", required=True, help="checkpoint to evaluate (required)")
    e.add_argument("--data", required=True, help="evaluation dataset (required)")
    e.add_argument("--out", default=None, help="JSON report path (default: print to stdout)")
    _add_settings(e, "eval", skip=("top_p", "top_r", "scales", "divergence_images",
                                    "divergence_positions", "seed"))

    a = add("ablation", cmd_ablation, "Train the five ablation rows and tabulate their target AP.")
    a.add_argument("--source", required=True, help="labelled source dataset (required)")
    a.add_argument("--target", required=True, help="unlabelled target training dataset (required)")
    a.add_argument("--eval-data", required=True, help="labelled target evaluation dataset (required)")
    a.add_argument("--out", required=True, help="output directory (required)")
    _add_settings(a, "train", skip=("ablation",))
    _add_settings(a, "eval", skip=("top_p", "top_r", "scales", "divergence_images",
                                    "divergence_positions", "seed"))

    model_help = "NAME=CHECKPOINT, repeatable (required)"
    r = add("analyze-errors", cmd_analyze_errors, "Bucket top-ranked detections into error types.")
    r.add_argument("--model", action="append", required=True, help=model_help)
    r.add_argument("--data", required=True, help="labelled evaluation dataset (required)")
    r.add_argument("--out", required=True, help="output directory (required)")
    _add_settings(r, "eval", skip=("iou_thresh", "top_p", "scales", "divergence_images",
                                    "divergence_positions", "seed"))

    s = add("scale-sweep", cmd_scale_sweep, "Evaluate models on the target set at several scales.")
    s.add_argument("--model", action="append", required=True, help=model_help)
    s.add_argument("--data", required=True, help="labelled evaluation dataset at reference scale (required)")
    s.add_argument("--out", required=True, help="output directory (required)")
    _add_settings(s, "eval", skip=("top_p", "top_r", "divergence_images", "divergence_positions", "seed"))

    q = add("proposal-quality", cmd_proposal_quality, "Mean best overlap of ground truth with top proposals.")
    q.add_argument("--model", action="append", required=True, help=model_help)
    q.add_argument("--data", required=True, help="labelled evaluation dataset (required)")
    q.add_argument("--out", default=None, help="CSV output path (default: print only)")
    _add_settings(q, "eval", skip=("iou_thresh", "score_floor", "top_r", "scales", "divergence_images",
                                    "divergence_positions", "seed"))

    d = add("divergence", cmd_divergence, "Proxy H-divergence between source and target features.")
    d.add_argument("--features-source", default=None, help="saved source features, .npy [n, d] (default: none)")
    d.add_argument("--features-target", default=None, help="saved target features, .npy [n, d] (default: none)")
    d.add_argument("--checkpoint", default=None, help="extract backbone features with this model (default: none)")
    d.add_argument("--source", default=None, help="source dataset for feature extraction (default: none)")
    d.add_argument("--target", default=None, help="target dataset for feature extraction (default: none)")
    d.add_argument("--save-features", default=None,
                   help="write extracted features to PREFIX.source.npy / PREFIX.target.npy (default: none)")
    d.add_argument("--out", default=None, help="JSON result path (default: print only)")
    _add_settings(d, "eval", skip=("iou_thresh", "score_floor", "top_p", "top_r", "scales"))
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_USAGE
    except SystemExit as exc:  # --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    from .synthdata import DatasetFormatError
    from .training import CheckpointError, TrainingDiverged

    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"da-detect {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except (DatasetFormatError, CheckpointError, TrainingDiverged, OSError, ValueError, KeyError) as exc:
        sys.stderr.write(f"da-detect {args.command}: failed: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
