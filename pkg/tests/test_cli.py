import copy
import csv
import hashlib
import io
import math
import re

import numpy as np
import pytest
import yaml

from forcemap.cli import main
from forcemap.scenefile import (
    MapFormatError,
    SceneError,
    decode_map,
    encode_map,
    example_scene_path,
    load_scene,
    read_map,
    scene_from_document,
)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    kv = dict(re.findall(r"(\w+)=(\S+)", out.out))
    return code, kv, out


def write_scene(path, doc):
    path.write_text(yaml.safe_dump(doc, sort_keys=False))
    return path


@pytest.fixture(scope="module")
def example_doc():
    return yaml.safe_load(example_scene_path().read_text())


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    out = tmp_path_factory.mktemp("maps") / "example.map"
    assert main(["build", str(example_scene_path()), str(out)]) == 0
    return out


@pytest.fixture
def coarse_scene(tmp_path, example_doc):
    doc = copy.deepcopy(example_doc)
    doc["grid"] = {"resolution_deg": 5.0}
    return write_scene(tmp_path / "coarse.yaml", doc)


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


# build


def test_build_reports(capsys, tmp_path):
    code, kv, _ = run(capsys, "build", example_scene_path(), tmp_path / "m.map")
    assert code == 0
    assert kv["dims"] == "361x361"
    assert kv["components"] == "2"
    assert float(kv["unsafe_fraction"]) == pytest.approx(4000 / 361**2, abs=1e-6)
    assert kv["component_0_alpha_deg"] == "1.5000"
    assert float(kv["build_time_s"]) > 0


def test_build_is_byte_identical(capsys, tmp_path, coarse_scene):
    a, b = tmp_path / "a.map", tmp_path / "b.map"
    assert run(capsys, "build", coarse_scene, a)[0] == 0
    assert run(capsys, "build", coarse_scene, b, "--threads", "3")[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_build_empty_scene(capsys, tmp_path, example_doc):
    doc = copy.deepcopy(example_doc)
    doc["obstacles"] = []
    doc["grid"] = {"resolution_deg": 10.0}
    scene = write_scene(tmp_path / "empty.yaml", doc)
    code, kv, _ = run(capsys, "build", scene, tmp_path / "e.map")
    assert code == 0
    assert kv["components"] == "0"
    assert float(kv["unsafe_fraction"]) == 0.0
    mp = read_map(tmp_path / "e.map")
    assert not mp.cobs.bits.any()
    assert len(mp.regions) == 0


def test_build_schema_error(capsys, tmp_path, example_doc):
    doc = copy.deepcopy(example_doc)
    doc["obstacles"][0]["k_env_N_per_m"] = -1.0
    code, _, out = run(capsys, "build", write_scene(tmp_path / "bad.yaml", doc), tmp_path / "x.map")
    assert code == 1
    assert "k_env_N_per_m" in out.err
    (tmp_path / "junk.yaml").write_text("robot: [unclosed")
    assert run(capsys, "build", tmp_path / "junk.yaml", tmp_path / "x.map")[0] == 1
    assert run(capsys, "build", tmp_path / "missing.yaml", tmp_path / "x.map")[0] == 1


def test_build_clockwise_vertices_rejected(tmp_path, example_doc):
    doc = copy.deepcopy(example_doc)
    doc["obstacles"][0]["vertices_m"] = doc["obstacles"][0]["vertices_m"][::-1]
    with pytest.raises(SceneError):
        scene_from_document(doc)


def test_build_consumed_obstacle(capsys, tmp_path, example_doc):
    doc = copy.deepcopy(example_doc)
    doc["obstacles"][1]["vertices_m"] = [[-0.10, 0.24], [-0.04, 0.24], [-0.04, 0.255], [-0.10, 0.255]]
    code, kv, _ = run(capsys, "build", write_scene(tmp_path / "thin.yaml", doc), tmp_path / "x.map")
    assert code == 2
    assert kv["consumed_obstacle"] == "obs2"


def test_build_write_failure(capsys, tmp_path, coarse_scene):
    code, _, _ = run(capsys, "build", coarse_scene, tmp_path / "no" / "such" / "dir.map")
    assert code == 3


# query


def test_query_straight_pose_safe(capsys, built):
    code, kv, _ = run(capsys, "query", built, 0, 0, "--exact")
    assert code == 0
    assert kv["verdict"] == "SAFE"
    assert kv["exact_verdict"] == "SAFE"
    assert float(kv["force_obs1_N"]) == 0.0


def test_query_unsafe_pose(capsys, built, example_map):
    q = np.degrees(example_map.cobs_.grid.nodes(np.argwhere(example_map.cobs_.bits)[100]))
    code, kv, _ = run(capsys, "query", built, q[0], q[1], "--exact")
    assert code == 0
    assert kv["verdict"] == "UNSAFE"
    assert kv["exact_verdict"] == "UNSAFE"


def test_query_out_of_limits(capsys, built):
    assert run(capsys, "query", built, 200, 0)[0] == 4
    assert run(capsys, "query", built, 0, -180.5)[0] == 4


def test_query_fast_matches_exact_off_boundary(capsys, built, example_map):
    from forcemap.cspace import boundary_distance_map

    dist = boundary_distance_map(example_map.cobs_)
    rng = np.random.default_rng(3)
    for q in rng.uniform(-40, 40, (30, 2)):
        code, kv, _ = run(capsys, "query", built, q[0], q[1], "--exact")
        assert code == 0
        near = dist[tuple(example_map.cobs_.grid.nearest_index(np.radians(q)))]
        if near > 1:
            assert kv["chi_fast"] == kv["chi_exact"]


def test_query_stale_map(capsys, tmp_path, built, example_doc):
    doc = copy.deepcopy(example_doc)
    doc["obstacles"][0]["k_env_N_per_m"] = 11.17
    other = write_scene(tmp_path / "other.yaml", doc)
    assert run(capsys, "query", built, 0, 0, "--scene", other)[0] == 5
    assert run(capsys, "query", built, 0, 0, "--scene", example_scene_path())[0] == 0


def test_corrupt_map(capsys, tmp_path):
    (tmp_path / "bad.map").write_bytes(b"not a map")
    assert run(capsys, "query", tmp_path / "bad.map", 0, 0)[0] == 1


# simulate


def test_simulate_default(capsys, tmp_path, built):
    out = tmp_path / "run.csv"
    code, kv, _ = run(capsys, "simulate", example_scene_path(), built, "--csv", out)
    assert code == 0
    assert kv["steps"] == "1803"
    assert kv["soundness_violations"] == "0"
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert len(rows) == 1804
    assert int(kv["obs1_to_unsafe"]) >= 2 and int(kv["obs2_to_safe"]) >= 2


def test_simulate_csv_is_deterministic(capsys, tmp_path, built):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "simulate", example_scene_path(), built, "--csv", a, "--duration", "30")
    run(capsys, "simulate", example_scene_path(), built, "--csv", b, "--duration", "30")
    assert a.read_bytes() == b.read_bytes()


def test_simulate_zero_duration(capsys, tmp_path, built):
    out = tmp_path / "empty.csv"
    code, kv, _ = run(capsys, "simulate", example_scene_path(), built, "--duration", "0", "--csv", out)
    assert code == 0
    assert kv["steps"] == "0"
    assert out.read_text() == "t,q1_deg,q2_deg,chi_fast,chi_exact,force_obs1_N,force_obs2_N\n"


def test_simulate_svg_frames(capsys, tmp_path, built):
    svg = tmp_path / "run.svg"
    duration, dt = 40.0, 1 / 12.8
    code, _, _ = run(capsys, "simulate", example_scene_path(), built, "--duration", duration, "--svg", svg)
    assert code == 0
    text = svg.read_text()
    assert text.count('class="frame"') == math.floor(duration / dt) + 1
    assert text.count('display="none"') == math.floor(duration / dt)
    # red for unsafe, green for safe frames
    assert "#d62728" in text and "#2ca02c" in text


def test_simulate_stale_map(capsys, tmp_path, built, example_doc):
    doc = copy.deepcopy(example_doc)
    doc["robot"]["thickness_m"] = 0.021
    other = write_scene(tmp_path / "other.yaml", doc)
    assert run(capsys, "simulate", other, built, "--duration", "1")[0] == 5


def test_simulate_amplitude_out_of_limits(capsys, built):
    assert run(capsys, "simulate", example_scene_path(), built, "--amplitude-deg", "190")[0] == 4


# render


def test_render_cspace(capsys, tmp_path, built):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    code, kv, _ = run(capsys, "render", built, a)
    assert code == 0
    assert kv["components"] == "2"
    run(capsys, "render", built, b)
    assert sha(a) == sha(b)
    assert a.read_text().count("data-alpha-deg=") == 2


def test_render_task_insets(capsys, tmp_path, built, example_cfg):
    out = tmp_path / "task.svg"
    assert run(capsys, "render", built, out, "--space", "task")[0] == 0
    text = out.read_text()
    polys = re.findall(r'<polygon points="([^"]+)" fill="(#[0-9a-f]+)"/>', text)
    dark = [p for p, c in polys if c == "#555555"]
    light = [p for p, c in polys if c == "#bbbbbb"]
    assert len(dark) == len(light) == 2

    def box(pts):
        xy = np.array([[float(v) for v in p.split(",")] for p in pts.split()])
        return xy.min(axis=0), xy.max(axis=0)

    px_per_m = 1500.0
    for d, li in zip(dark, light):
        (d0, d1), (l0, l1) = box(d), box(li)
        inset = np.concatenate([l0 - d0, d1 - l1]) / px_per_m
        assert np.allclose(inset, 0.0099038, atol=1e-6)


def test_render_blank_cspace(capsys, tmp_path, example_doc):
    doc = copy.deepcopy(example_doc)
    doc["obstacles"] = []
    doc["grid"] = {"resolution_deg": 10.0}
    scene = write_scene(tmp_path / "empty.yaml", doc)
    run(capsys, "build", scene, tmp_path / "e.map")
    code, kv, _ = run(capsys, "render", tmp_path / "e.map", tmp_path / "e.svg")
    assert code == 0
    text = (tmp_path / "e.svg").read_text()
    assert "<polygon" not in text
    assert 'fill="#000000"' not in text


def test_render_write_failure(capsys, tmp_path, built):
    assert run(capsys, "render", built, tmp_path / "missing" / "x.svg")[0] == 3


# map files


def test_map_round_trip(built):
    mp = read_map(built)
    again = decode_map(encode_map(scene_from_document(mp.scene_document), mp.cobs, mp.regions))
    assert again.cobs == mp.cobs
    assert again.regions == mp.regions
    assert encode_map(scene_from_document(again.scene_document), again.cobs, again.regions) == built.read_bytes()


def test_map_matches_fresh_build(built, example_map):
    mp = read_map(built)
    assert np.array_equal(mp.cobs.bits, example_map.cobs_.bits)
    assert mp.regions == example_map.regions_


def test_map_rejects_trailing_bytes(built):
    with pytest.raises(MapFormatError):
        decode_map(built.read_bytes() + b"\0")
    with pytest.raises(MapFormatError):
        decode_map(built.read_bytes()[:-5])


def test_hash_covers_every_field(example_doc):
    base = load_scene(example_scene_path()).digest
    for path, value in [
        (("robot", "backbone_samples"), 151),
        (("grid", "resolution_deg"), 2.0),
        (("alpha", "c_alpha"), 2.0),
        (("alpha", "query_margin_cells"), 0.25),
        (("name",), "renamed"),
    ]:
        doc = copy.deepcopy(example_doc)
        node = doc
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
        assert scene_from_document(doc).digest != base


def test_hash_ignores_spelled_out_defaults(example_doc):
    doc = copy.deepcopy(example_doc)
    doc["robot"].setdefault("joint_limits_deg", [[-180, 180], [-180, 180]])
    doc["obstacles"][0]["delta"] = 0.95
    assert scene_from_document(doc).digest == load_scene(example_scene_path()).digest


def test_selftest_quick(capsys):
    code, kv, out = run(capsys, "selftest")
    assert code == 0
    assert kv["failed"] == "0"
    assert out.out.count("PASS") == 8
