import pytest
from fastapi.testclient import TestClient

from combodose.api import create_app


@pytest.fixture
def client(tmp_path):
    return TestClient(create_app(tmp_path))


def create_boin(client, seed=0):
    resp = client.post("/api/trials", json={"design": "boin", "seed": seed})
    assert resp.status_code == 201
    return resp.json()


class TestCreate:
    def test_recommendation_starts_at_floor(self, client):
        body = create_boin(client)
        assert body["recommendation"] == [1, 1]
        assert body["id"]

    def test_unknown_design(self, client):
        resp = client.post("/api/trials", json={"design": "nope"})
        assert resp.status_code == 422

    def test_designs_listing(self, client):
        resp = client.get("/api/designs")
        assert resp.status_code == 200
        designs = {d["design"] for d in resp.json()["designs"]}
        assert designs == {"boin", "keyboard", "pipe", "sfd", "blrm"}


class TestCohorts:
    def test_submit_and_read_your_writes(self, client):
        sid = create_boin(client)["id"]
        resp = client.post(
            f"/api/trials/{sid}/cohorts", json={"combo": [1, 1], "size": 3, "dlts": 0}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["state"]["n"][0][0] == 3
        got = client.get(f"/api/trials/{sid}").json()
        assert got["state"] == body["state"]
        assert got["posterior_summary"] == body["posterior_summary"]

    def test_bad_dlts(self, client):
        sid = create_boin(client)["id"]
        resp = client.post(
            f"/api/trials/{sid}/cohorts", json={"combo": [1, 1], "size": 3, "dlts": 4}
        )
        assert resp.status_code == 422

    def test_unknown_trial(self, client):
        resp = client.get("/api/trials/doesnotexist")
        assert resp.status_code == 404

    def test_off_recommendation_needs_override(self, client):
        sid = create_boin(client)["id"]
        resp = client.post(
            f"/api/trials/{sid}/cohorts", json={"combo": [2, 1], "size": 3, "dlts": 0}
        )
        assert resp.status_code == 422
        resp = client.post(
            f"/api/trials/{sid}/cohorts",
            json={"combo": [2, 1], "size": 3, "dlts": 0, "override": True},
        )
        assert resp.status_code == 200

    def test_termination_path(self, client):
        sid = create_boin(client)["id"]
        resp = client.post(
            f"/api/trials/{sid}/cohorts", json={"combo": [1, 1], "size": 3, "dlts": 3}
        )
        assert resp.status_code == 200
        assert resp.json()["recommendation"] == "terminated"
        resp = client.post(
            f"/api/trials/{sid}/cohorts", json={"combo": [1, 1], "size": 3, "dlts": 0}
        )
        assert resp.status_code == 409

    def test_eliminated_combo_rejected(self, client):
        sid = create_boin(client)["id"]
        client.post(f"/api/trials/{sid}/cohorts", json={"combo": [1, 1], "size": 3, "dlts": 0})
        # 3/3 at (1,2) eliminates it and its up-set but not the trial
        resp = client.post(
            f"/api/trials/{sid}/cohorts",
            json={"combo": [1, 2], "size": 3, "dlts": 3, "override": True},
        )
        assert resp.status_code == 200
        resp = client.post(
            f"/api/trials/{sid}/cohorts",
            json={"combo": [1, 2], "size": 3, "dlts": 0, "override": True},
        )
        assert resp.status_code == 422


class TestFinalize:
    def test_blrm_zero_cohorts_gives_none(self, client):
        resp = client.post("/api/trials", json={"design": "blrm"})
        sid = resp.json()["id"]
        out = client.post(f"/api/trials/{sid}/finalize").json()
        assert out["mtc"] is None

    def test_finalize_then_cohort_conflicts(self, client):
        sid = create_boin(client)["id"]
        client.post(f"/api/trials/{sid}/cohorts", json={"combo": [1, 1], "size": 3, "dlts": 0})
        client.post(f"/api/trials/{sid}/finalize")
        resp = client.post(
            f"/api/trials/{sid}/cohorts", json={"combo": [1, 1], "size": 3, "dlts": 0}
        )
        assert resp.status_code == 409

    def test_finalize_idempotent(self, client):
        sid = create_boin(client)["id"]
        client.post(f"/api/trials/{sid}/cohorts", json={"combo": [1, 1], "size": 3, "dlts": 1})
        a = client.post(f"/api/trials/{sid}/finalize").json()
        b = client.post(f"/api/trials/{sid}/finalize").json()
        assert a == b


class TestPersistence:
    def test_state_rebuilt_from_event_log(self, tmp_path):
        app1 = TestClient(create_app(tmp_path))
        sid = create_boin(app1)["id"]
        app1.post(f"/api/trials/{sid}/cohorts", json={"combo": [1, 1], "size": 3, "dlts": 0})
        rec = app1.get(f"/api/trials/{sid}").json()
        app2 = TestClient(create_app(tmp_path))  # fresh process, same storage
        got = app2.get(f"/api/trials/{sid}").json()
        assert got["state"] == rec["state"]
        assert got["recommendation"] == rec["recommendation"]

    def test_sequence_equals_replay(self, tmp_path):
        # the API adds no hidden state: replaying the submitted cohorts
        # through the engine primitives gives the same tallies
        import numpy as np

        from combodose.core import Combo, TrialState, record_cohort

        app1 = TestClient(create_app(tmp_path))
        sid = create_boin(app1)["id"]
        submitted = [([1, 1], 3, 0), ([1, 2], 3, 1), ([1, 2], 3, 0)]
        for combo, size, dlts in submitted:
            r = app1.post(
                f"/api/trials/{sid}/cohorts",
                json={"combo": combo, "size": size, "dlts": dlts, "override": True},
            )
            assert r.status_code == 200
        state = TrialState.fresh((3, 3))
        for combo, size, dlts in submitted:
            state = record_cohort(state, Combo(*combo), size, dlts)
        got = app1.get(f"/api/trials/{sid}").json()["state"]
        assert got["n"] == state.n.tolist()
        assert got["y"] == state.y.tolist()
