import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from settrack import formats
from settrack.errors import DataError
from settrack.metrics import GroundTruthFrame, TrackFrame
from settrack.models import ModelParams
from settrack.sim import simulate


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_config_parse_and_precedence():
    cfg = formats.parse_config("lambda = 0.5  # births\n\nn_particles=64\narena = 0 0 10 8\n")
    assert cfg == {"birth_rate": 0.5, "n_particles": 64, "arena": (0.0, 0.0, 10.0, 8.0)}
    p = formats.make_params(cfg, {"birth_rate": 0.1, "death_rate": None})
    assert p.birth_rate == 0.1 and p.death_rate == 0.02 and p.n_particles == 64


@pytest.mark.parametrize("text,line", [("lambda = 1\nbogus = 2\n", 2), ("nu = fast\n", 1),
                                       ("arena = 0 0 1\n", 1), ("tau\n", 1)])
def test_config_errors_name_the_line(text, line):
    with pytest.raises(DataError, match=f":{line}:"):
        formats.parse_config(text)


def test_invalid_param_values_are_data_errors():
    with pytest.raises(DataError):
        formats.make_params({"n_particles": 0})


def test_config_round_trip():
    p = ModelParams(birth_rate=0.06, arena=(1.0, 2.0, 3.5, 4.25))
    q = formats.make_params(formats.parse_config(formats.format_config(p)))
    assert q.to_dict() == p.to_dict()


def test_bbox_area_gate(tmp_path):
    path = write(tmp_path, "frame,x,y,confidence,bbox_area\n0,1,1,0.9,0.3\n0,2,2,0.8,1.0\n0,3,3,0.7,\n")
    _, sets = formats.read_detections(path, ModelParams())
    np.testing.assert_array_equal(sets[0][:, 2], [0.0, 0.8, 0.7])


def test_missing_confidence_defaults(tmp_path):
    path = write(tmp_path, "frame,x,y\n0,1,1\n")
    _, sets = formats.read_detections(path, ModelParams())
    assert sets[0][0, 2] == 0.5


def test_frames_grouped_in_order_with_gaps(tmp_path):
    path = write(tmp_path, "frame,x,y,confidence\n2,5,5,0.5\n0,1,1,0.5\n2,6,6,0.5\n")
    ids, sets = formats.read_detections(path, ModelParams())
    assert ids == [0, 1, 2]
    assert [len(s) for s in sets] == [1, 0, 2]


@pytest.mark.parametrize("text,match", [
    ("frame,x,y,confidence\n0,1,1,1.5\n", r":2: confidence"),
    ("frame,x,y\n0,1\n", r":2: expected 3 fields"),
    ("frame,x,y\n0,1,nan\n", r":2: y must be finite"),
    ("frame,x\n0,1\n", r":1: header"),
    ("frame,x,y\n0.5,1,1\n", r":2: bad frame"),
])
def test_bad_rows_are_reported_with_line(tmp_path, text, match):
    with pytest.raises(DataError, match=match):
        formats.read_detections(write(tmp_path, text), ModelParams())


def test_empty_file_has_no_frames(tmp_path):
    assert formats.read_detections(write(tmp_path, ""), ModelParams()) == ([], [])


@given(st.integers(0, 10_000))
def test_simulated_detections_round_trip_exactly(tmp_path_factory, seed):
    sc = simulate(ModelParams(birth_rate=0.06), 40, seed)
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    formats.write_detections(path, sc.detections)
    _, back = formats.read_detections(path, ModelParams(), n_frames=len(sc.detections))
    assert len(back) == len(sc.detections)
    for a, b in zip(sc.detections, back):
        np.testing.assert_array_equal(a, b)


def test_truth_and_tracks_round_trip(tmp_path):
    gt = [GroundTruthFrame(0, [3, 4], [[1.25, 2.5], [3.0, 4.0]]), GroundTruthFrame(1, [], [])]
    formats.write_truth(tmp_path / "g.csv", gt)
    back = formats.read_truth(tmp_path / "g.csv", 2)
    assert [f.objects for f in back] == [f.objects for f in gt]
    tr = [TrackFrame(0, [7], [[1.5, 2.5, 0.1, -0.2]], [0.75])]
    formats.write_tracks(tmp_path / "t.csv", tr)
    assert (tmp_path / "t.csv").read_text() == (
        "frame,rho,x,y,vx,vy,confidence\n0,7,1.500000,2.500000,0.100000,-0.200000,0.750000\n")
    assert formats.read_tracks(tmp_path / "t.csv")[0].tracks == tr[0].tracks


def test_duplicate_truth_ids_rejected(tmp_path):
    path = write(tmp_path, "frame,gt_id,x,y\n0,1,0,0\n0,1,1,1\n", "g.csv")
    with pytest.raises(DataError, match="duplicate"):
        formats.read_truth(path)
