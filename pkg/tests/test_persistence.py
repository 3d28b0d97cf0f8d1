import json

import numpy as np
import pytest

from src.errors import ModelFormatError
from src.palm.model import grow_palm
from src.palm.persistence import FORMAT_VERSION, load_model, save_model
from src.palm.two_stage import GlobalPlusPalmModel, fit_global_plus_palm
from src.testbed.data import shifted_grid_design
from src.testbed.functions import HERBIE_BOUNDS


@pytest.fixture
def query(rng):
    lo, hi = np.array(HERBIE_BOUNDS).T
    return lo + (hi - lo) * rng.random((1000, 2))


def test_palm_round_trip(small_palm, tmp_path, query):
    path = tmp_path / "model.json"
    save_model(small_palm, path)
    loaded = load_model(path)
    assert loaded.K == small_palm.K
    assert loaded.center_modes == small_palm.center_modes
    np.testing.assert_array_equal(loaded.rho, small_palm.rho)
    before, after = small_palm.predict(query), loaded.predict(query)
    np.testing.assert_allclose(after.means, before.means, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(after.variances, before.variances, rtol=1e-12, atol=1e-12)


def test_loaded_model_grows_like_the_original(small_palm, herbie_data, small_cfg, tmp_path):
    path = tmp_path / "model.json"
    save_model(small_palm, path)
    loaded = load_model(path)
    for original, restored in zip(small_palm.experts, loaded.experts):
        assert restored.fit.mean == original.fit.mean
        assert restored.provisional_fit.eta == original.provisional_fit.eta
    center = np.array([0.6, 0.4])
    grown = grow_palm(small_palm, herbie_data, center, small_cfg)
    regrown = grow_palm(loaded, herbie_data, center, small_cfg)
    np.testing.assert_allclose(regrown.rho, grown.rho, rtol=1e-12, atol=1e-15)
    assert regrown.tau2 == pytest.approx(grown.tau2, rel=1e-12)


def test_file_stores_only_referenced_rows(small_palm, tmp_path):
    path = tmp_path / "model.json"
    save_model(small_palm, path)
    doc = json.loads(path.read_text())
    assert doc["format"] == "palm-model" and doc["version"] == FORMAT_VERSION
    assert doc["palm"]["rows"]["indices"] == small_palm.union_design_indices().tolist()


def test_global_plus_palm_round_trip(herbie_data, small_cfg, tmp_path):
    cfg = small_cfg.model_copy(update={"m_global": 60})
    model = fit_global_plus_palm(herbie_data, np.array([[0.3, 0.3], [0.7, 0.7]]), cfg, seed=8)
    path = tmp_path / "two_stage.json"
    save_model(model, path)
    loaded = load_model(path)
    assert isinstance(loaded, GlobalPlusPalmModel)
    np.testing.assert_array_equal(loaded.global_indices, model.global_indices)
    X = shifted_grid_design(10, HERBIE_BOUNDS)
    np.testing.assert_allclose(loaded.predict(X).means, model.predict(X).means, rtol=1e-12, atol=1e-12)


def test_missing_file(tmp_path):
    with pytest.raises(ModelFormatError, match="not found"):
        load_model(tmp_path / "absent.json")


def test_unsupported_version(small_palm, tmp_path):
    path = tmp_path / "model.json"
    save_model(small_palm, path)
    doc = json.loads(path.read_text())
    doc["version"] = FORMAT_VERSION + 1
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="version"):
        load_model(path)


def test_malformed_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_text('{"format": "palm-model", "kind": "palm"}')
    with pytest.raises(ModelFormatError, match="Malformed"):
        load_model(path)


def test_dangling_design_index(small_palm, tmp_path):
    path = tmp_path / "model.json"
    save_model(small_palm, path)
    doc = json.loads(path.read_text())
    doc["palm"]["experts"][0]["design_indices"][0] = 10**9
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="no stored training row"):
        load_model(path)
