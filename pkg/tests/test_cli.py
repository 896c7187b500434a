import csv
import io
import json

import pytest

from moaoff.cli import build_parser, main
from moaoff.perception import Calibration, GrayImage
from moaoff.workload import write_pgm


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def fields(out):
    return dict(line.split(": ", 1) for line in out.strip().splitlines())


@pytest.fixture
def all_levels_config(tmp_path):
    p = tmp_path / "entropy.toml"
    p.write_text("[perception]\nweights = [0, 0, 1, 0]\n")
    return p


def test_score_image_constant(tmp_path, capsys):
    write_pgm(tmp_path / "flat.pgm", GrayImage.constant(512, 512, 128))
    code, out, _ = run(capsys, "score-image", str(tmp_path / "flat.pgm"))
    assert code == 0
    f = fields(out)
    assert f["total"] == "0.062500"
    assert (f["c_res"], f["c_edge"], f["c_ent"], f["c_lap"]) == ("0.250000", "0.000000", "0.000000", "0.000000")


def test_score_image_all_levels(tmp_path, capsys, all_levels_config):
    write_pgm(tmp_path / "levels.pgm", GrayImage.from_rows([list(range(r * 16, r * 16 + 16)) for r in range(16)]))
    code, out, _ = run(capsys, "score-image", str(tmp_path / "levels.pgm"), "-c", str(all_levels_config))
    assert code == 0
    assert fields(out)["total"] == "1.000000"


def test_score_image_errors(tmp_path, capsys):
    code, _, err = run(capsys, "score-image", str(tmp_path / "missing.pgm"))
    assert code == 2 and "missing.pgm" in err
    (tmp_path / "bad.pgm").write_bytes(b"P5\n9 9\n255\n")
    code, _, err = run(capsys, "score-image", str(tmp_path / "bad.pgm"))
    assert code == 2 and "truncated" in err


def test_score_text(tmp_path, capsys):
    code, out, _ = run(capsys, "score-text", "")
    assert code == 0 and fields(out)["total"] == "0.000000"
    code, out, _ = run(capsys, "score-text", " ".join(["word"] * 256))
    f = fields(out)
    assert (f["tokens"], f["entities"], f["total"]) == ("256", "0", "0.250000")
    saturating = " ".join(str(i) for i in range(2048))
    (tmp_path / "t.txt").write_text(saturating)
    code, out, _ = run(capsys, "score-text", "-f", str(tmp_path / "t.txt"))
    assert code == 0 and fields(out)["total"] == "1.000000"


def test_score_text_stdin(capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("I met Alice and Bob in 2024"))
    code, out, _ = run(capsys, "score-text", "-f", "-")
    assert code == 0 and fields(out)["entities"] == "3"


def test_calibrate(tmp_path, capsys):
    d = tmp_path / "imgs"
    d.mkdir()
    write_pgm(d / "a.pgm", GrayImage.constant(8, 8, 3))
    code, _, err = run(capsys, "calibrate", str(d))
    assert code == 1 and "at least 2" in err

    write_pgm(d / "b.pgm", GrayImage.constant(8, 8, 250))
    out1, out2 = tmp_path / "c1.txt", tmp_path / "c2.txt"
    assert run(capsys, "calibrate", str(d), "-o", str(out1))[0] == 0
    assert run(capsys, "calibrate", str(d), "-o", str(out2))[0] == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert Calibration.load(out1).grad_p5 == 0.0
    code, out, _ = run(capsys, "calibrate", str(d))
    assert "grad_p5 = 0.0" in out


def test_calibrate_missing_dir(tmp_path, capsys):
    assert run(capsys, "calibrate", str(tmp_path / "nowhere"))[0] == 2


def test_simulate_default_grid(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    code, out, _ = run(capsys, "simulate", "-o", str(a))
    assert code == 0 and "5000 requests, seed 7" in out
    assert run(capsys, "simulate", "-o", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert len(rows) == 12
    assert {r["strategy"] for r in rows} == {"moa-off", "edge-only", "cloud-only", "uniform"}


def test_simulate_stdout_and_filters(capsys):
    code, out, _ = run(capsys, "simulate", "--requests", "200", "--strategies", "cloud-only")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 3 and all(r["strategy"] == "cloud-only" for r in rows)
    code, out, _ = run(capsys, "simulate", "--requests", "200", "--bandwidths", "100,500", "--tau", "0.2")
    assert [r["bandwidth_mbps"] for r in csv.DictReader(io.StringIO(out))][::4] == ["100.0", "500.0"]


def test_simulate_flag_overrides_config(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[simulation]\nseed = 1\nbandwidths_mbps = [250]\n")
    _, from_file, _ = run(capsys, "simulate", "--requests", "100", "-c", str(cfg))
    _, from_flag, _ = run(capsys, "simulate", "--requests", "100", "-c", str(cfg), "--seed", "2")
    assert from_file != from_flag
    assert from_file.count("\n") == 5


def test_simulate_workload_file(tmp_path, capsys):
    lines = [json.dumps({"id": i, "t": i * 0.5, "mods": [{"kind": "text", "c": 0.2, "bytes": 100}]}) for i in range(4)]
    (tmp_path / "w.jsonl").write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "simulate", "--workload", str(tmp_path / "w.jsonl"), "--bandwidths", "300")
    assert code == 0 and len(out.strip().splitlines()) == 5
    (tmp_path / "bad.jsonl").write_text(lines[0] + "\n{oops\n")
    code, _, err = run(capsys, "simulate", "--workload", str(tmp_path / "bad.jsonl"))
    assert code == 2 and "line 2" in err


def test_simulate_rejects_bad_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--strategies", "perllm"])
    assert exc.value.code == 2
    assert run(capsys, "simulate", "--requests", "10", "--tau", "1.5")[0] == 1


def test_ablate_equal_complexity(tmp_path, capsys):
    lines = [
        json.dumps({"id": i, "t": i * 0.2, "mods": [{"kind": "text", "c": c}, {"kind": "image", "c": c, "bytes": 10**6}]})
        for i, c in enumerate((0.1, 0.4, 0.6, 0.9, 0.3))
    ]
    (tmp_path / "w.jsonl").write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "ablate", "--workload", str(tmp_path / "w.jsonl"))
    assert code == 0
    assert out.startswith("# ablation deltas are variant minus full")
    rows = {r["variant"]: r for r in csv.DictReader(line for line in out.splitlines() if not line.startswith("#"))}
    assert all(float(v) == 0.0 for k, v in rows["modality-blind"].items() if k != "variant")


def test_ablate_empty_workload(tmp_path, capsys):
    (tmp_path / "empty.jsonl").write_text("")
    code, _, err = run(capsys, "ablate", "--workload", str(tmp_path / "empty.jsonl"))
    assert code != 0 and "empty" in err


def test_ablate_to_file(tmp_path, capsys):
    code, out, _ = run(capsys, "ablate", "--requests", "300", "-o", str(tmp_path / "d.csv"))
    assert code == 0 and "moa-off/no-scheduling" in out
    assert (tmp_path / "d.csv").read_text().startswith("#")


def test_default_config_round_trip(tmp_path, capsys):
    p = tmp_path / "d.toml"
    assert run(capsys, "default-config", "-o", str(p))[0] == 0
    code, out, _ = run(capsys, "default-config", "-c", str(p))
    assert code == 0 and out == p.read_text()


@pytest.mark.parametrize("sub", [None, "score-image", "score-text", "calibrate", "simulate", "ablate", "default-config"])
def test_help(sub, capsys):
    argv = ["--help"] if sub is None else [sub, "--help"]
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(argv)
    assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out
