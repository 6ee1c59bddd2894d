import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from dppmrf.cli import BENCH_HEADER, VERIFY_HEADER, main
from dppmrf.io import read_pgm, read_rlm, write_pgm


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    rc = main(["gen-synth", "--size", "48", "--pore", "0.25", "--sp", "0.05", "--gauss", "60",
               "--ringing", "--seed", "4", "--out", str(d / "noisy.pgm"), "--truth", str(d / "truth.pgm")])
    assert rc == 0
    return d


def test_gen_synth_outputs(data, tmp_path):
    noisy, truth = read_pgm(data / "noisy.pgm"), read_pgm(data / "truth.pgm")
    assert noisy.shape == truth.shape == (48, 48)
    assert set(np.unique(truth)) <= {0, 255}
    main(["gen-synth", "--size", "48", "--pore", "0.25", "--sp", "0.05", "--gauss", "60",
          "--ringing", "--seed", "4", "--out", str(tmp_path / "n2.pgm"), "--truth", str(tmp_path / "t2.pgm")])
    assert (tmp_path / "n2.pgm").read_bytes() == (data / "noisy.pgm").read_bytes()
    assert (tmp_path / "t2.pgm").read_bytes() == (data / "truth.pgm").read_bytes()


def test_gen_synth_size_zero_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["gen-synth", "--size", "0", "--out", str(tmp_path / "x.pgm")])
    assert exc.value.code == 2


def test_segment_writes_image_and_summary(data, tmp_path, capsys):
    out, summary = tmp_path / "seg.pgm", tmp_path / "s.json"
    rc = main(["segment", "--image", str(data / "noisy.pgm"), "--block", "4", "--labels", "2",
               "--seed", "7", "--backend", "threaded", "--threads", "8", "--out", str(out),
               "--summary", str(summary)])
    assert rc == 0
    line = capsys.readouterr().out
    assert line.startswith("segment ") and "optimize_s=" in line and "graph_s=" in line
    seg = read_pgm(out)
    assert seg.shape == (48, 48) and set(np.unique(seg)) <= {0, 255}
    s = json.loads(summary.read_text())
    assert s["em_iterations"] <= 20 and {"graph_s", "cliques_s", "hoods_s", "optimize_s"} <= set(s)


def test_segment_is_deterministic_across_backends(data, tmp_path):
    outs = []
    for i, extra in enumerate([["--backend", "serial"], ["--backend", "threaded", "--threads", "8"],
                               ["--backend", "threaded", "--threads", "3", "--chunk", "17"]]):
        out = tmp_path / f"s{i}.pgm"
        assert main(["segment", "--image", str(data / "noisy.pgm"), "--seed", "7",
                     "--out", str(out)] + extra) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_segment_errors(data, tmp_path, capsys):
    img = str(data / "noisy.pgm")
    assert main(["segment", "--image", img, "--labels", "3", "--out", str(tmp_path / "x.pgm")]) == 2
    assert main(["segment", "--image", str(tmp_path / "missing.pgm"), "--out", str(tmp_path / "x.pgm")]) == 2
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P2\n1 1\n255\n0")
    assert main(["segment", "--image", str(bad), "--out", str(tmp_path / "x.pgm")]) == 2
    assert "error" in capsys.readouterr().err


def test_oversegment_and_rlm_ingest(data, tmp_path):
    rlm = tmp_path / "r.rlm"
    assert main(["oversegment", "--image", str(data / "noisy.pgm"), "--block", "4", "--out", str(rlm)]) == 0
    assert read_rlm(rlm).max() == 143
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    assert main(["segment", "--image", str(data / "noisy.pgm"), "--overseg", str(rlm), "--out", str(a)]) == 0
    assert main(["segment", "--image", str(data / "noisy.pgm"), "--block", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    # a label map whose region 0 is split in two is rejected
    broken = tmp_path / "broken.rlm"
    raw = bytearray(rlm.read_bytes())
    raw[12 + 4 * 47:12 + 4 * 48] = (0).to_bytes(4, "little")
    broken.write_bytes(bytes(raw))
    assert main(["segment", "--image", str(data / "noisy.pgm"), "--overseg", str(broken),
                 "--out", str(a)]) == 2
    small = tmp_path / "small.pgm"
    write_pgm(small, np.zeros((8, 8), dtype=np.uint8))
    assert main(["segment", "--image", str(small), "--overseg", str(rlm), "--out", str(a)]) == 2


def verify_rows(capsys, pred, truth):
    assert main(["verify", "--pred", str(pred), "--truth", str(truth)]) == 0
    return list(csv.reader(capsys.readouterr().out.splitlines()))


def test_verify(data, tmp_path, capsys):
    truth = data / "truth.pgm"
    rows = verify_rows(capsys, truth, truth)
    assert rows[0] == VERIFY_HEADER
    assert rows[1][:3] == ["1.000000"] * 3 and rows[1][3] == rows[1][4]
    inv = tmp_path / "inv.pgm"
    write_pgm(inv, 255 - read_pgm(truth))
    rows = verify_rows(capsys, inv, truth)
    assert rows[1][0] == "0.000000" and rows[1][1] == "0.000000"
    empty = tmp_path / "empty.pgm"
    write_pgm(empty, np.zeros((48, 48), dtype=np.uint8))
    assert verify_rows(capsys, empty, truth)[1][0] == "nan"


def test_verify_errors(data, tmp_path):
    assert main(["verify", "--pred", str(tmp_path / "nope.pgm"), "--truth", str(data / "truth.pgm")]) == 2
    small = tmp_path / "small.pgm"
    write_pgm(small, np.zeros((8, 8), dtype=np.uint8))
    assert main(["verify", "--pred", str(small), "--truth", str(data / "truth.pgm")]) == 2


def test_bench_csv(data, tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert main(["bench", "--image", str(data / "noisy.pgm"), "--block", "4", "--threads", "1,2",
                 "--repeat", "2", "--csv", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == BENCH_HEADER
    assert len(rows) == 1 + 2 * 2
    assert rows[0]["backend"] == "reference" and float(rows[0]["speedup"]) == 1.0
    assert [(r["threads"], r["rep"]) for r in rows[1:]] == [("1", "0"), ("1", "1"), ("2", "0"), ("2", "1")]
    for r in rows:
        assert float(r["wall_s"]) > 0
        speed = float(rows[0]["wall_s"]) / float(r["wall_s"])
        assert float(r["speedup"]) == pytest.approx(speed, rel=1e-3)
    assert "mean_optimize_s" in capsys.readouterr().out
    assert out.read_text().endswith("\n")


def test_bench_usage_errors(data, tmp_path):
    for flags in (["--repeat", "0"], ["--threads", "0,2"], ["--threads", "a"]):
        with pytest.raises(SystemExit) as exc:
            main(["bench", "--image", str(data / "noisy.pgm"), "--csv", str(tmp_path / "b.csv")] + flags)
        assert exc.value.code == 2


def test_help_documents_csv_schema():
    out = subprocess.run([sys.executable, "-m", "dppmrf.cli", "bench", "--help"],
                         capture_output=True, text=True, check=True).stdout
    assert "speedup" in out and "CSV schema" in out
    out = subprocess.run([sys.executable, "-m", "dppmrf.cli", "verify", "--help"],
                         capture_output=True, text=True, check=True).stdout
    assert "porosity_pred" in out


def test_console_entry_point_exit_code(tmp_path):
    r = subprocess.run(["dppmrf", "verify", "--pred", str(tmp_path / "a.pgm"), "--truth",
                        str(tmp_path / "b.pgm")], capture_output=True, text=True)
    assert r.returncode == 2
