import warnings

import pytest

from preterm_sd.calibration import synthetic_bundle
from preterm_sd.model import Parameters
from preterm_sd.service.app import create_app

with warnings.catch_warnings():
    warnings.simplefilter("ignore", DeprecationWarning)
    from fastapi.testclient import TestClient


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


class TestHealthAndScenarios:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json() == {"status": "ok"}

    def test_scenarios_listed(self, client):
        r = client.get("/scenarios")
        assert r.status_code == 200
        assert r.json()["scenarios"] == ["base", "s1", "s2"]


class TestRunEndpoint:
    def test_base_run_shape(self, client):
        r = client.post("/simulate/run", json={"scenario": "base"})
        assert r.status_code == 200
        body = r.json()
        assert body["scenario"] == "base"
        assert len(body["times"]) == 28
        assert body["times"][0] == 1995.0
        assert body["times"][-1] == 2022.0
        assert "pbr" in body["traces"]
        assert all(len(tr) == 28 for tr in body["traces"].values())

    def test_unknown_scenario_is_400_with_code(self, client):
        r = client.post("/simulate/run", json={"scenario": "bogus"})
        assert r.status_code == 400
        detail = r.json()["detail"]
        assert detail["code"] == "unknown_scenario"
        assert "bogus" in detail["message"]

    def test_unknown_override_is_400_with_code(self, client):
        r = client.post(
            "/simulate/run",
            json={"scenario": "base", "overrides": {"not_a_param": 1.0}},
        )
        assert r.status_code == 400
        assert r.json()["detail"]["code"] == "unknown_parameter"

    def test_bad_config_is_400(self, client):
        r = client.post(
            "/simulate/run",
            json={"scenario": "base", "config": {"dt": 0.3}},
        )
        assert r.status_code == 400
        assert r.json()["detail"]["code"] == "config_error"

    def test_s2_override_changes_target(self, client):
        r = client.post("/simulate/run", json={"scenario": "s2"})
        assert r.status_code == 200
        target = r.json()["traces"]["desired_pbr"]
        assert all(v == 9.0 for v in target)

    def test_override_on_base(self, client):
        r = client.post(
            "/simulate/run",
            json={"scenario": "base", "overrides": {"desired_pbr": 9.0}},
        )
        s2 = client.post("/simulate/run", json={"scenario": "s2"})
        assert r.json()["traces"] == s2.json()["traces"]

    def test_deterministic_across_requests(self, client):
        a = client.post("/simulate/run", json={"scenario": "s1"}).json()
        b = client.post("/simulate/run", json={"scenario": "s1"}).json()
        assert a == b


class TestCompareEndpoint:
    def test_base_vs_s2_findings(self, client):
        r = client.post("/simulate/compare", json={"scenarios": ["base", "s2"]})
        assert r.status_code == 200
        body = r.json()
        assert body["baseline"] == "base"
        assert set(body["runs"]) == {"base", "s2"}
        pbr = next(f for f in body["findings"] if f["variable"] == "pbr")
        assert pbr["scenario"] == "s2"
        assert 2009.0 <= pbr["crossing_years"][-1] <= 2014.0

    def test_self_comparison_all_zero_deltas(self, client):
        r = client.post("/simulate/compare", json={"scenarios": ["base", "base"]})
        assert r.status_code == 200
        for f in r.json()["findings"]:
            assert f["crossing_years"] == []
            assert f["delta_at_end"] == 0.0

    def test_single_scenario_rejected_by_validation(self, client):
        r = client.post("/simulate/compare", json={"scenarios": ["base"]})
        assert r.status_code == 422

    def test_unknown_variable_is_400(self, client):
        r = client.post(
            "/simulate/compare",
            json={"scenarios": ["base", "s2"], "variables": ["nope"]},
        )
        assert r.status_code == 400
        assert r.json()["detail"]["code"] == "config_error"


class TestCalibrateEndpoint:
    @staticmethod
    def _series_payload():
        data = synthetic_bundle(Parameters())
        return {
            name: {"years": list(ts.years), "values": list(ts.values)}
            for name, ts in data.items()
        }

    def test_self_fit_reaches_zero(self, client):
        r = client.post(
            "/calibrate",
            json={
                "series": self._series_payload(),
                "free": [
                    {
                        "name": "shock_magnitude",
                        "lower": 0.0,
                        "upper": 0.7,
                        "initial": 0.3,
                    }
                ],
                "termination": {"max_evaluations": 300},
            },
        )
        assert r.status_code == 200
        body = r.json()
        assert body["objective"] < 1e-8
        assert body["values"]["shock_magnitude"] == pytest.approx(
            Parameters().shock_magnitude, abs=1e-3
        )
        assert body["per_series"]["pbr"]["mape"] < 0.1
        assert len(body["times"]) == len(body["traces"]["pbr"])

    def test_empty_free_set_is_400(self, client):
        r = client.post(
            "/calibrate",
            json={"series": self._series_payload(), "free": []},
        )
        assert r.status_code == 400
        assert r.json()["detail"]["code"] == "config_error"

    def test_unknown_free_parameter_is_400(self, client):
        r = client.post(
            "/calibrate",
            json={
                "series": self._series_payload(),
                "free": [
                    {"name": "nope", "lower": 0.0, "upper": 1.0, "initial": 0.5}
                ],
            },
        )
        assert r.status_code == 400
        assert r.json()["detail"]["code"] == "config_error"

    def test_no_overlap_is_422(self, client):
        r = client.post(
            "/calibrate",
            json={
                "series": {"pbr": {"years": [1900], "values": [10.0]}},
                "free": [
                    {
                        "name": "shock_magnitude",
                        "lower": 0.0,
                        "upper": 0.7,
                        "initial": 0.3,
                    }
                ],
                "termination": {"max_evaluations": 50},
            },
        )
        assert r.status_code == 422
        assert r.json()["detail"]["code"] == "optimizer_failure"
