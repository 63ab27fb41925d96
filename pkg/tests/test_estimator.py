import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from forcemap.estimator import (
    ContactForceTransformer,
    ForceSafetyMap,
    OutOfLimits,
    check_configurations,
    resolve_scene,
    unsafe_by_force,
)
from forcemap.scenefile import example_scene_path


@pytest.fixture(scope="module")
def coarse_model(example_cfg):
    return ForceSafetyMap(example_cfg, resolution_deg=5.0).fit()


def test_params_round_trip(example_cfg):
    est = ForceSafetyMap(example_cfg, resolution_deg=2.0, c_alpha=2.0, n_jobs=2, degrees=True)
    params = est.get_params()
    assert params["resolution_deg"] == 2.0 and params["degrees"] is True
    twin = clone(est)
    assert twin.get_params()["c_alpha"] == 2.0
    assert not hasattr(twin, "regions_")
    est.set_params(c_alpha=3.0)
    assert est.c_alpha == 3.0


def test_overrides_reach_the_scene(coarse_model):
    assert coarse_model.cobs_.dims == (73, 73)
    assert coarse_model.config_.document["alpha"]["query_margin_cells"] == 0.5


def test_predict_matches_exact_off_boundary(coarse_model, rng):
    X = rng.uniform(-math.pi, math.pi, (5000, 2))
    fast = coarse_model.predict(X)
    exact = coarse_model.predict_exact(X)
    assert set(np.unique(fast)) <= {0, 1}
    assert (fast == exact).mean() > 0.95


def test_predict_degrees(example_map):
    deg = ForceSafetyMap.from_parts(example_map.config_, example_map.cobs_, example_map.regions_)
    deg.degrees = True
    q = example_map.cobs_.grid.nodes(np.argwhere(example_map.cobs_.bits)[:5])
    assert np.array_equal(deg.predict(np.degrees(q)), example_map.predict(q))
    assert deg.predict([[0.0, 0.0]])[0] == 0
    assert example_map.query(q[0]) == 1


def test_score(example_map, rng):
    X = rng.uniform(-math.pi, math.pi, (2000, 2))
    assert example_map.score(X, example_map.predict_exact(X)) > 0.98


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ForceSafetyMap(str(example_scene_path())).predict([[0.0, 0.0]])


def test_input_validation(example_cfg):
    robot = example_cfg.robot
    with pytest.raises(OutOfLimits):
        check_configurations([[4.0, 0.0]], robot)
    with pytest.raises(ValueError):
        check_configurations([[0.0, 0.0, 0.0]], robot)
    with pytest.raises(ValueError):
        check_configurations([[np.nan, 0.0]], robot)
    X = check_configurations([90.0, 0.0], robot, degrees=True)
    assert X.shape == (1, 2)
    assert X[0, 0] == pytest.approx(math.pi / 2)


def test_resolve_scene(example_cfg):
    assert resolve_scene(example_cfg) is example_cfg
    assert resolve_scene(example_scene_path()).digest == example_cfg.digest
    assert resolve_scene(example_cfg.document).digest == example_cfg.digest
    with pytest.raises(TypeError):
        resolve_scene(42)


def test_transformer(example_cfg, example_map):
    tf = ContactForceTransformer(example_cfg)
    q = example_map.cobs_.grid.nodes(np.argwhere(example_map.cobs_.bits)[:50])
    X = np.vstack([[0.0, 0.0], q])
    F = tf.fit_transform(X)
    assert F.shape == (51, 2)
    assert np.all(F[0] == 0)
    assert list(tf.get_feature_names_out()) == ["force_obs1_N", "force_obs2_N"]
    raw = ContactForceTransformer(example_cfg, raw=True).fit_transform(X)
    assert np.allclose(raw * 0.95, F)
    # every grid-unsafe node is also force-unsafe here (auto facet not needed)
    assert unsafe_by_force(F, example_cfg.scene)[1:].any(axis=1).all()
    assert not unsafe_by_force(F, example_cfg.scene)[0].any()
