import json

import pytest

from fogrlnc.cli import main
from fogrlnc.rlnc import delivery_curve, recovery_probability


@pytest.fixture
def payload(tmp_path):
    path = tmp_path / "in.bin"
    path.write_bytes(bytes((i * 37) % 256 for i in range(5000)))
    return path


def test_encode_decode_roundtrip(tmp_path, payload, capsys):
    frames = tmp_path / "frames"
    assert main(["encode", "--input", str(payload), "--output", str(frames), "--k", "4", "--n", "6",
                 "--q", "16", "--frame-budget", "300", "--station-id", "12"]) == 0
    manifest = json.loads((frames / "manifest.json").read_text())
    assert manifest["K"] == 4 and manifest["q"] == 16 and manifest["station_id"] == 12
    assert manifest["L"] == (300 - 44) * 8 // 4
    assert len(list(frames.glob("*.bin"))) == 6 * len(manifest["messages"])
    # drop the first frame of every message; the remaining five still reach full rank
    for name in sorted(frames.glob("*_001.bin")):
        name.unlink()
    out = tmp_path / "out.bin"
    assert main(["decode", "--frames", str(frames), "--output", str(out)]) == 0
    assert out.read_bytes() == payload.read_bytes()


def test_one_generation_with_n_equal_k(tmp_path):
    data = tmp_path / "gen.bin"
    data.write_bytes(bytes(range(256)) * 2)  # 512 bytes = 4 packets of 128 symbols
    frames = tmp_path / "f"
    assert main(["encode", "--input", str(data), "--output", str(frames), "--k", "4",
                 "--frame-budget", str(44 + 128)]) == 0
    assert len(list(frames.glob("*.bin"))) == 4


def test_decode_reports_rank_when_unrecoverable(tmp_path, payload, capsys):
    frames = tmp_path / "frames"
    main(["encode", "--input", str(payload), "--output", str(frames), "--k", "5", "--q", "256"])
    for f in sorted(frames.glob("*.bin"))[2:]:
        f.unlink()
    rc = main(["decode", "--frames", str(frames), "--output", str(tmp_path / "o.bin")])
    assert rc == 1
    assert "rank 2 of 5" in capsys.readouterr().err
    assert not (tmp_path / "o.bin").exists()


def test_decode_skips_malformed_and_duplicate_frames(tmp_path, payload, capsys):
    frames = tmp_path / "frames"
    main(["encode", "--input", str(payload), "--output", str(frames), "--k", "2", "--n", "4",
          "--frame-budget", "1000"])
    first = sorted(frames.glob("frame_*.bin"))[0]
    (frames / "zz_copy.bin").write_bytes(first.read_bytes())
    (frames / "zz_junk.bin").write_bytes(b"\x01\x02\x03")
    out = tmp_path / "o.bin"
    assert main(["decode", "--frames", str(frames), "--output", str(out)]) == 0
    assert out.read_bytes() == payload.read_bytes()
    assert "zz_junk.bin" in capsys.readouterr().err


def test_encode_empty_input(tmp_path):
    empty = tmp_path / "empty"
    empty.write_bytes(b"")
    assert main(["encode", "--input", str(empty), "--output", str(tmp_path / "f"), "--k", "3"]) == 0
    assert not list((tmp_path / "f").glob("*.bin"))


def test_encode_refuses_nonempty_output(tmp_path, payload):
    out = tmp_path / "f"
    out.mkdir()
    (out / "x").write_text("keep me")
    assert main(["encode", "--input", str(payload), "--output", str(out), "--k", "3"]) == 1
    assert (out / "x").read_text() == "keep me"


def test_analytic(capsys):
    assert main(["analytic", "--k", "2", "--q", "2", "--per", "0.5", "--n-max", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,R,delivery"
    assert len(lines) == 6
    n, r, d = lines[3].split(",")
    assert int(n) == 2
    assert float(r) == pytest.approx(recovery_probability(2, 2, 2))
    assert float(d) == pytest.approx(delivery_curve(2, 0.5, 2, 2))


def test_analytic_per_defaults_to_zero(capsys):
    main(["analytic", "--k", "3", "--q", "4", "--n-max", "8"])
    rows = [line.split(",") for line in capsys.readouterr().out.splitlines()[1:]]
    assert all(r[1] == r[2] for r in rows)
    assert all(float(r[1]) == 0 for r in rows[:3])


@pytest.mark.parametrize(
    "argv",
    [
        ["analytic", "--k", "2", "--q", "3", "--n-max", "4"],
        ["analytic", "--k", "2", "--q", "4", "--per", "1.5", "--n-max", "4"],
        ["analytic", "--k", "0", "--q", "4", "--n-max", "4"],
        ["encode", "--input", "x", "--output", "y", "--k", "3", "--frame-budget", "44"],
    ],
)
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_validate_scenario(tmp_path, capsys):
    assert main(["validate-scenario", "--scenario", "rsu1"]) == 0
    bad = tmp_path / "bad.scenario"
    bad.write_text("duration_s: 1\nrsus: []\nvehicles: []\n")
    assert main(["validate-scenario", "--scenario", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "line 2" in err and "line 3" in err


def test_simulate(tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["simulate", "--scenario", "constant", "--out", str(out), "--trials", "20", "--seed", "3"]) == 0
    assert (out / "recovery_curves.csv").exists()
    assert (out / "per_by_distance.csv").exists()
    assert "N*" in capsys.readouterr().out


def test_simulate_rsu1_curve_shape(tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["simulate", "--scenario", "rsu1", "--out", str(out), "--trials", "30"]) == 0
    curves = {}
    for line in (out / "recovery_curves.csv").read_text().splitlines()[1:]:
        view, K, q, N, emp, ana, trials = line.split(",")
        curves.setdefault((view, int(K), int(q)), []).append(float(emp))
    assert {k[1] for k in curves} == {5, 10, 15}
    for (view, K, q), values in curves.items():
        assert all(b >= a for a, b in zip(values, values[1:]))
        if q == 256:
            lower = curves[(view, K, 2)]
            assert all(h >= l - 0.02 for h, l in zip(values, lower))
