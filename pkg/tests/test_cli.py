import numpy as np
import pytest

from settrack import cli, formats
from settrack.models import ModelParams
from settrack.sim import simulate


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def scene(tmp_path):
    p = ModelParams(birth_rate=0.0, death_rate=0.0, dash_power_sigma=0.3)
    sc = simulate(p, 25, 3, initial=3, reflect=True, birth_speed_std=0.2)
    formats.write_detections(tmp_path / "d.csv", sc.detections)
    formats.write_truth(tmp_path / "g.csv", sc.frames)
    return tmp_path


FAST = ["--n-particles", 32]


def test_track_writes_tracks_with_several_ids(scene, capsys):
    code, out, _ = run(capsys, "track", "--detections", scene / "d.csv", "--out", scene / "t.csv", "--seed", 1,
                       "--gt", scene / "g.csv", *FAST)
    assert code == 0
    assert out.splitlines()[0].startswith("MOTA")
    tr = formats.read_tracks(scene / "t.csv")
    assert len({int(r) for f in tr for r in f.rhos}) >= 3
    assert all(c >= 0.4 for f in tr for c in f.conf)


def test_track_is_byte_deterministic(scene, capsys):
    for name in ("a.csv", "b.csv"):
        assert run(capsys, "track", "--detections", scene / "d.csv", "--out", scene / name, "--seed", 7, *FAST)[0] == 0
    assert (scene / "a.csv").read_bytes() == (scene / "b.csv").read_bytes()


def test_track_runs_write_one_file_per_seed(scene, capsys):
    code, out, _ = run(capsys, "track", "--detections", scene / "d.csv", "--out", scene / "t.csv", "--seed", 5,
                       "--runs", 2, "--gt", scene / "g.csv", *FAST)
    assert code == 0
    assert (scene / "t.seed5.csv").exists() and (scene / "t.seed6.csv").exists()
    assert "+-" in out


def test_empty_detections_give_empty_tracks(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("frame,x,y,confidence\n")
    assert run(capsys, "track", "--detections", tmp_path / "d.csv", "--out", tmp_path / "t.csv", "--seed", 1)[0] == 0
    assert (tmp_path / "t.csv").read_text() == "frame,rho,x,y,vx,vy,confidence\n"


def test_config_file_and_flags(scene, capsys):
    (scene / "c.cfg").write_text("n_particles = 16\nreport_conf = 0.9\n")
    code, _, _ = run(capsys, "track", "--detections", scene / "d.csv", "--out", scene / "t.csv", "--seed", 1,
                     "--config", scene / "c.cfg", "--report-conf", 0.5)
    assert code == 0
    assert all(c >= 0.5 for f in formats.read_tracks(scene / "t.csv") for c in f.conf)


def test_evaluate_identical_is_perfect(scene, capsys):
    gt = formats.read_truth(scene / "g.csv")
    from settrack.metrics import TrackFrame
    formats.write_tracks(scene / "t.csv", [TrackFrame(f.t, f.ids, f.states) for f in gt])
    code, out, _ = run(capsys, "evaluate", "--gt", scene / "g.csv", "--tracks", scene / "t.csv",
                       "--out", scene / "m.csv")
    assert code == 0
    assert "MOTA  100.00%" in out and "MOTP  100.00%" in out
    rows = (scene / "m.csv").read_text().splitlines()
    assert rows[0] == "metric,value" and rows[1] == "MOTA,1.000000"


def test_simulate_subcommand(tmp_path, capsys):
    args = ["simulate", "--detections", tmp_path / "d.csv", "--truth", tmp_path / "g.csv", "--frames", 20,
            "--objects", 3, "--seed", 4]
    assert run(capsys, *args)[0] == 0
    first = (tmp_path / "d.csv").read_bytes()
    assert run(capsys, *args)[0] == 0
    assert (tmp_path / "d.csv").read_bytes() == first
    assert len(formats.read_truth(tmp_path / "g.csv")[0].ids) == 3


def test_prune_bench_subcommand(tmp_path, capsys):
    code, out, err = run(capsys, "prune-bench", "--seed", 0, "--frames", 60, "--out", tmp_path / "pb.csv")
    assert code == 0
    assert "T'=0.1 T''=0.001" in out and "seconds" not in (tmp_path / "pb.csv").read_text()
    code2, out2, _ = run(capsys, "prune-bench", "--seed", 0, "--frames", 60)
    assert out2 == out


@pytest.mark.parametrize("argv", [[], ["track"], ["track", "--detections", "x", "--out", "y"], ["frobnicate"],
                                  ["track", "--detections", "x", "--out", "y", "--seed", "zz"]])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(argv)
    assert e.value.code == 1


def test_data_errors_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "track", "--detections", tmp_path / "missing.csv", "--out", tmp_path / "t.csv",
                       "--seed", 1)
    assert code == 2 and "missing.csv" in err
    (tmp_path / "bad.csv").write_text("frame,x,y\n0,1,oops\n")
    code, _, err = run(capsys, "track", "--detections", tmp_path / "bad.csv", "--out", tmp_path / "t.csv",
                       "--seed", 1)
    assert code == 2 and "bad.csv:2" in err
    code, _, _ = run(capsys, "track", "--detections", tmp_path / "bad.csv", "--out", tmp_path / "t.csv",
                     "--seed", 1, "--n-particles", 0)
    assert code == 2


def test_internal_errors_exit_3(scene, capsys, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("kaput")
    monkeypatch.setattr(cli.Tracker, "run", boom)
    code, _, err = run(capsys, "track", "--detections", scene / "d.csv", "--out", scene / "t.csv", "--seed", 1)
    assert code == 3 and "kaput" in err


def test_help_lists_table_defaults(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["track", "--help"])
    assert e.value.code == 0
    out = " ".join(capsys.readouterr().out.split())
    for text in ("(default 0.02)", "(default 6.0)", "(default 0.14)", "(default 128)", "(default 0.4)",
                 "(default 0.0 0.0 19.0 15.8)"):
        assert text in out
