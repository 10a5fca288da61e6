import json
import os
import xml.etree.ElementTree as ET

import pytest

from da_detect import __version__
from da_detect.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, SETTINGS, build_parser, main

SUBCOMMANDS = ["gen-data", "train", "eval", "ablation", "analyze-errors", "scale-sweep",
               "proposal-quality", "divergence"]
QUICK = ["--iters", "4", "--lr-drop-iter", "2", "-q"]


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    src, tgt = str(d / "s.shpw"), str(d / "t.shpw")
    assert main(["gen-data", "--num-images", "6", "--seed", "1", "--out", src, "-q"]) == EXIT_OK
    assert main(["gen-data", "--num-images", "6", "--seed", "2", "--shift", "style", "--intensity", "0.8",
                 "--domain", "1", "--out", tgt, "-q"]) == EXIT_OK
    ck = str(d / "m.dafr")
    assert main(["train", "--source", src, "--target", tgt, "--out", ck, *QUICK]) == EXIT_OK
    return d, src, tgt, ck


def _meta(path):
    with open(path) as f:
        return json.load(f)


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_lists_every_default(cmd, capsys):
    assert main([cmd, "--help"]) == EXIT_OK
    out = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[cmd]
    for action in sub._actions:
        if action.option_strings and action.dest != "help":
            assert action.help and ("default:" in action.help or "required" in action.help), action.dest
    assert "(default:" in out


def test_every_setting_has_a_default():
    assert all(s.default is not None for s in SETTINGS)


def test_usage_errors_exit_1(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE
    assert main(["gen-data", "--out", "x", "--no-such-flag"]) == EXIT_USAGE
    assert main(["gen-data", "--out", "x", "--num-images", "many"]) == EXIT_USAGE
    assert main(["gen-data", "--out", "x", "--shift", "blur", "-q"]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_version_flag(capsys):
    assert main(["--version"]) == EXIT_OK
    assert __version__ in capsys.readouterr().out


def test_gen_data_is_deterministic(tmp_path):
    a, b = str(tmp_path / "a.shpw"), str(tmp_path / "b.shpw")
    for p in (a, b):
        assert main(["gen-data", "--shift", "fog", "--intensity", "0.6", "--seed", "7",
                     "--num-images", "5", "--out", p, "-q"]) == EXIT_OK
    assert open(a, "rb").read() == open(b, "rb").read()
    ma, mb = _meta(a + ".meta.json"), _meta(b + ".meta.json")
    assert ma["config"] == mb["config"] and ma["version"] == __version__
    assert ma["config"]["data"]["shift"] == "fog"


def test_config_file_and_flag_precedence(tmp_path, caplog):
    ini = tmp_path / "c.ini"
    ini.write_text("[data]\nseed = 3\nnum_images = 4\nshift = fog\nintensity = 0.5\n")
    out = str(tmp_path / "d.shpw")
    caplog.set_level("INFO")
    assert main(["gen-data", "--config", str(ini), "--seed", "9", "--out", out]) == EXIT_OK
    cfg = _meta(out + ".meta.json")["config"]["data"]
    assert (cfg["seed"], cfg["num_images"], cfg["shift"]) == (9, 4, "fog")
    assert "data.num_images" in caplog.text and "data.seed = 9" in caplog.text


def test_bad_config_is_a_usage_error(tmp_path):
    for text in ("[nope]\na = 1\n", "[train]\nbogus = 1\n", "[train]\nlam = lots\n", "not an ini"):
        ini = tmp_path / "bad.ini"
        ini.write_text(text)
        assert main(["gen-data", "--config", str(ini), "--out", str(tmp_path / "x"), "-q"]) == EXIT_USAGE
    assert main(["gen-data", "--config", str(tmp_path / "missing.ini"), "--out", "x", "-q"]) == EXIT_USAGE


def test_shipped_configs_load(tmp_path):
    import da_detect
    root = os.path.join(os.path.dirname(da_detect.__file__), "configs")
    for name in ("toy.ini", "full.ini"):
        out = str(tmp_path / f"{name}.shpw")
        assert main(["gen-data", "--config", os.path.join(root, name), "--num-images", "2",
                     "--out", out, "-q"]) == EXIT_OK


def test_runtime_failures_exit_2(tmp_path, files):
    d, src, tgt, ck = files
    assert main(["eval", "--checkpoint", str(tmp_path / "missing.dafr"), "--data", tgt, "-q"]) == EXIT_RUNTIME
    broken = tmp_path / "broken.dafr"
    broken.write_bytes(open(ck, "rb").read()[:-10])
    assert main(["eval", "--checkpoint", str(broken), "--data", tgt, "-q"]) == EXIT_RUNTIME
    # the target set as source: domain-1 samples are refused for supervision
    assert main(["train", "--source", tgt, "--target", tgt, "--out", str(tmp_path / "x.dafr"),
                 *QUICK]) == EXIT_RUNTIME


def test_train_writes_log_checkpoint_and_sidecar(files):
    d, src, tgt, ck = files
    rows = open(ck + ".log.csv").read().splitlines()
    assert rows[0] == "iter,lr,l_rpn,l_roi,l_img,l_ins,l_cst,total" and len(rows) == 5
    meta = _meta(ck + ".meta.json")
    assert meta["config"]["train"]["total_iters"] == 4
    assert set(meta["inputs"]) == {"source", "target"}
    assert all(len(v["digest"]) == 16 for v in meta["inputs"].values())


def test_train_is_reproducible_and_resumable(tmp_path, files):
    d, src, tgt, ck = files
    again = str(tmp_path / "again.dafr")
    assert main(["train", "--source", src, "--target", tgt, "--out", again, *QUICK]) == EXIT_OK
    assert open(again, "rb").read() == open(ck, "rb").read()
    half = str(tmp_path / "half.dafr")
    assert main(["train", "--source", src, "--target", tgt, "--out", half, "--iters", "4",
                 "--lr-drop-iter", "2", "-q", "--log", str(tmp_path / "h.csv")]) == EXIT_OK
    part = str(tmp_path / "part.dafr")
    log = str(tmp_path / "p.csv")
    assert main(["train", "--source", src, "--target", tgt, "--out", part, "--iters", "2",
                 "--lr-drop-iter", "2", "-q", "--log", log]) == EXIT_OK
    assert main(["train", "--source", src, "--target", tgt, "--out", part, "--resume", part,
                 "--iters", "4", "--lr-drop-iter", "2", "-q", "--log", log]) == EXIT_OK
    assert open(log).read() == open(str(tmp_path / "h.csv")).read()


def test_eval_report(tmp_path, files):
    d, src, tgt, ck = files
    out = str(tmp_path / "r.json")
    assert main(["eval", "--checkpoint", ck, "--data", tgt, "--out", out, "-q"]) == EXIT_OK
    rep = _meta(out)
    assert set(rep) >= {"mAP", "per_class_ap", "num_detections", "checkpoint_digest", "dataset_digest"}
    assert _meta(out + ".meta.json")["inputs"]["checkpoint"]["path"] == "m.dafr"


def test_analyses_emit_artifacts(tmp_path, files, monkeypatch):
    d, src, tgt, ck = files
    models = ["--model", f"a={ck}", "--model", f"b={ck}"]
    out = str(tmp_path / "err")
    assert main(["analyze-errors", *models, "--data", tgt, "--out", out, "-q"]) == EXIT_OK
    ET.parse(os.path.join(out, "errors.svg"))
    lines = open(os.path.join(out, "errors.csv")).read().splitlines()
    assert lines[0].startswith("model,top_r,correct,mislocalized,background") and len(lines) == 3

    monkeypatch.setenv("DA_DETECT_THREADS", "2")
    out = str(tmp_path / "sweep")
    assert main(["scale-sweep", *models, "--data", tgt, "--scales", "0.5,1.0", "--out", out, "-q"]) == EXIT_OK
    lines = open(os.path.join(out, "sweep.csv")).read().splitlines()
    assert lines[0] == "model,scale,mAP" and len(lines) == 1 + 2 * 2
    ET.parse(os.path.join(out, "sweep.svg"))
    monkeypatch.setenv("DA_DETECT_THREADS", "0")
    assert main(["scale-sweep", *models, "--data", tgt, "--out", out, "-q"]) == EXIT_USAGE
    monkeypatch.delenv("DA_DETECT_THREADS")

    pq = str(tmp_path / "pq.csv")
    assert main(["proposal-quality", *models, "--data", tgt, "--out", pq, "-q"]) == EXIT_OK
    assert open(pq).read().splitlines()[0] == "model,top_p,mean_best_overlap"


def test_divergence_from_checkpoint_and_saved_features(tmp_path, files):
    d, src, tgt, ck = files
    prefix = str(tmp_path / "f")
    out1, out2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    assert main(["divergence", "--checkpoint", ck, "--source", src, "--target", tgt,
                 "--save-features", prefix, "--out", out1, "-q"]) == EXIT_OK
    assert main(["divergence", "--features-source", prefix + ".source.npy",
                 "--features-target", prefix + ".target.npy", "--out", out2, "-q"]) == EXIT_OK
    a, b = _meta(out1), _meta(out2)
    assert a == b and 0.0 <= a["d_h"] <= 2.0
    assert main(["divergence", "-q"]) == EXIT_USAGE


def test_ablation_emits_table(tmp_path, files):
    d, src, tgt, ck = files
    out = str(tmp_path / "abl")
    assert main(["ablation", "--source", src, "--target", tgt, "--eval-data", tgt, "--out", out,
                 "--iters", "2", "--lr-drop-iter", "2", "-q"]) == EXIT_OK
    lines = open(os.path.join(out, "table.csv")).read().splitlines()
    assert lines[0] == "img,ins,cons,AP_c1,AP_c2,AP_c3,mAP"
    assert [ln.split(",")[:3] for ln in lines[1:]] == [
        ["", "", ""], ["x", "", ""], ["", "x", ""], ["x", "x", ""], ["x", "x", "x"]]
    assert len(_meta(os.path.join(out, "ablation.meta.json"))["outputs"]) == 13
