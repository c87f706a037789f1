"""Session service tests over the HTTP API (FastAPI test client)."""

import io
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from mask4d.errors import ConflictError
from mask4d.geometry import RigidPlacement, project
from mask4d.service import ServiceConfig, SessionManager, create_app, default_placement


def _client(config: ServiceConfig | None = None):
    manager = SessionManager(config or ServiceConfig())
    return TestClient(create_app(manager=manager)), manager


def _wait_for_job(client, job_id, timeout=30.0) -> dict:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = client.get(f"/jobs/{job_id}").json()
        if job["status"] != "running":
            return job
        time.sleep(0.01)
    raise TimeoutError(f"job {job_id} did not finish")


def _create(client, ws) -> dict:
    resp = client.post(
        "/sessions",
        json={"bundle_path": str(ws["bundle_dir"]), "object_path": str(ws["object_path"])},
    )
    assert resp.status_code == 201, resp.text
    return resp.json()


class TestSessionLifecycle:
    def test_create_session_idle(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        assert info["status"] == "idle"
        assert info["frame_count"] == 8
        assert info["revision"] == 1
        assert not info["has_trajectory"] and not info["has_masks"]

    def test_missing_manifest_no_session(self, tmp_path, carrier_workspace):
        client, manager = _client()
        resp = client.post(
            "/sessions",
            json={
                "bundle_path": str(tmp_path / "nothing"),
                "object_path": str(carrier_workspace["object_path"]),
            },
        )
        assert resp.status_code == 400
        assert "manifest" in resp.json()["detail"]
        assert manager.list_sessions() == []

    def test_default_placement_hits_principal_point(self, carrier_workspace):
        # identity placement 1 m ahead of camera 0 projects to (cx, cy)
        bundle = carrier_workspace["bundle"]
        placement = default_placement(bundle)
        result = project(bundle.intrinsics, bundle.poses[0], placement.translation)
        assert result is not None
        (u, v), depth = result
        assert u == pytest.approx(bundle.intrinsics.cx, abs=1e-9)
        assert v == pytest.approx(bundle.intrinsics.cy, abs=1e-9)
        assert depth == pytest.approx(1.0, abs=1e-12)

    def test_session_limit(self, carrier_workspace):
        client, _ = _client(ServiceConfig(session_limit=1))
        _create(client, carrier_workspace)
        resp = client.post(
            "/sessions",
            json={
                "bundle_path": str(carrier_workspace["bundle_dir"]),
                "object_path": str(carrier_workspace["object_path"]),
            },
        )
        assert resp.status_code == 429

    def test_unknown_session_404(self, carrier_workspace):
        client, _ = _client()
        assert client.get("/sessions/deadbeef").status_code == 404
        assert client.get("/jobs/deadbeef").status_code == 404


class TestPlacement:
    def test_set_then_get_full_precision(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        body = {
            "scale": 1.2345678901234567,
            "R": [0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            "t": [0.1, 0.2, 2.3456789012345678],
        }
        put = client.put(f"/sessions/{info['id']}/placement", json=body)
        assert put.status_code == 200
        assert put.json()["revision"] == 2
        got = client.get(f"/sessions/{info['id']}").json()["placement"]
        assert got["scale"] == body["scale"]
        assert got["R"] == body["R"]  # already orthonormal: no quantization
        assert got["t"] == body["t"]

    def test_garbage_rotation_rejected(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        body = {"scale": 1.0, "R": [1.0] * 9, "t": [0.0, 0.0, 1.0]}
        resp = client.put(f"/sessions/{info['id']}/placement", json=body)
        assert resp.status_code == 400

    def test_hundred_sets_hundred_revisions(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        base = info["revision"]
        body = {"scale": 1.0, "R": [1, 0, 0, 0, 1, 0, 0, 0, 1], "t": [0, 0, 1]}
        for i in range(100):
            resp = client.put(f"/sessions/{info['id']}/placement", json=body)
            assert resp.json()["revision"] == base + i + 1
        assert client.get(f"/sessions/{info['id']}").json()["revision"] == base + 100

    def test_mutation_during_job_conflicts(self, carrier_workspace):
        client, manager = _client()
        info = _create(client, carrier_workspace)
        # pin a fake running job: deterministic stand-in for a long render
        session = manager.get(info["id"])
        session.active_job = "pinned"
        body = {"scale": 1.0, "R": [1, 0, 0, 0, 1, 0, 0, 0, 1], "t": [0, 0, 1]}
        assert client.put(f"/sessions/{info['id']}/placement", json=body).status_code == 409
        assert client.post(f"/sessions/{info['id']}/propagate").status_code == 409
        assert client.post(f"/sessions/{info['id']}/render").status_code == 409
        session.active_job = None

    def test_placement_invalidates_results(self, carrier_workspace):
        client, truth = _client()[0], carrier_workspace["truth"]
        info = _create(client, carrier_workspace)
        sid = info["id"]
        anchor = [float(x) for x in truth.object_anchor]
        client.put(
            f"/sessions/{sid}/placement",
            json={"scale": 1.0, "R": [1, 0, 0, 0, 1, 0, 0, 0, 1], "t": anchor},
        )
        job = client.post(f"/sessions/{sid}/propagate").json()
        _wait_for_job(client, job["job_id"])
        assert client.get(f"/sessions/{sid}").json()["has_trajectory"]
        client.put(
            f"/sessions/{sid}/placement",
            json={"scale": 1.0, "R": [1, 0, 0, 0, 1, 0, 0, 0, 1], "t": anchor},
        )
        after = client.get(f"/sessions/{sid}").json()
        assert not after["has_trajectory"] and not after["has_masks"]
        assert after["status"] == "idle"


class TestJobs:
    def test_render_before_propagate_conflict(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        resp = client.post(f"/sessions/{info['id']}/render")
        assert resp.status_code == 409

    def test_propagation_on_single_frame_bundle(self, tmp_path):
        from mask4d.bundle import SceneBundle, save_bundle
        from mask4d.formats import write_ply
        from mask4d.geometry import CameraIntrinsics, CameraPose
        from mask4d.synthetic import make_ball_cloud

        intr = CameraIntrinsics(20.0, 20.0, 8.0, 8.0, 16, 16)
        single = SceneBundle(
            intrinsics=intr,
            poses=[CameraPose.identity()],
            depths=[np.full((16, 16), 2.0, dtype=np.float32)],
            flows=[],
        )
        save_bundle(single, tmp_path / "b")
        (tmp_path / "ball.ply").write_bytes(write_ply(make_ball_cloud(count=50)))

        client, _ = _client()
        info = client.post(
            "/sessions",
            json={"bundle_path": str(tmp_path / "b"),
                  "object_path": str(tmp_path / "ball.ply")},
        ).json()
        job = client.post(f"/sessions/{info['id']}/propagate").json()
        done = _wait_for_job(client, job["job_id"])
        assert done["status"] == "done"
        assert done["frames_total"] == 0
        session = client.get(f"/sessions/{info['id']}").json()
        assert session["has_trajectory"]
        assert session["trajectory_flags"] == ["initial"]

    def test_full_pipeline_matches_direct_library_calls(self, carrier_workspace):
        from mask4d.propagation import propagate_trajectory
        from mask4d.render import render_sequence

        ws = carrier_workspace
        client, manager = _client()
        info = _create(client, ws)
        sid = info["id"]
        anchor = [float(x) for x in ws["truth"].object_anchor]
        client.put(
            f"/sessions/{sid}/placement",
            json={"scale": 1.0, "R": [1, 0, 0, 0, 1, 0, 0, 0, 1], "t": anchor},
        )
        job = client.post(f"/sessions/{sid}/propagate").json()
        assert _wait_for_job(client, job["job_id"])["status"] == "done"
        job = client.post(f"/sessions/{sid}/render").json()
        assert _wait_for_job(client, job["job_id"])["status"] == "done"

        # direct library route with the same inputs and default configs
        placement = RigidPlacement(1.0, np.eye(3), np.array(anchor))
        trajectory = propagate_trajectory(placement, ws["bundle"])
        seq = render_sequence(ws["cloud"], trajectory, ws["bundle"])

        session = manager.get(sid)
        assert len(session.masks.masks) == len(seq.masks)
        for a, b in zip(session.masks.masks, seq.masks):
            np.testing.assert_array_equal(a, b)
        assert session.masks.visible_counts == seq.visible_counts

    def test_job_progress_counts(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        job = client.post(f"/sessions/{info['id']}/propagate").json()
        done = _wait_for_job(client, job["job_id"])
        assert done["frames_done"] == done["frames_total"] == 7
        assert done["phase"] == "propagate"


class TestPreviewAndExport:
    def _run_pipeline(self, client, ws):
        info = _create(client, ws)
        sid = info["id"]
        anchor = [float(x) for x in ws["truth"].object_anchor]
        client.put(
            f"/sessions/{sid}/placement",
            json={"scale": 1.0, "R": [1, 0, 0, 0, 1, 0, 0, 0, 1], "t": anchor},
        )
        job = client.post(f"/sessions/{sid}/propagate").json()
        assert _wait_for_job(client, job["job_id"])["status"] == "done"
        job = client.post(f"/sessions/{sid}/render").json()
        assert _wait_for_job(client, job["job_id"])["status"] == "done"
        return sid

    def test_frame_out_of_range_rejected(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        resp = client.get(f"/sessions/{info['id']}/preview/8")
        assert resp.status_code == 400

    def test_preview_before_render_returns_raw_rgb(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        resp = client.get(f"/sessions/{info['id']}/preview/0")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        got = np.asarray(Image.open(io.BytesIO(resp.content)))
        np.testing.assert_array_equal(got, carrier_workspace["bundle"].rgb_frames[0])

    def test_export_then_reload_bit_exact(self, carrier_workspace):
        from mask4d.bundle import read_png

        ws = carrier_workspace
        client, manager = _client()
        sid = self._run_pipeline(client, ws)
        out = ws["dir"] / "export"
        resp = client.post(f"/sessions/{sid}/export", json={"out_path": str(out)})
        assert resp.status_code == 200
        session = manager.get(sid)
        for t in range(8):
            png = read_png(out / "mask" / f"{t:05d}.png")
            np.testing.assert_array_equal(png[..., 0], session.masks.masks[t])
        assert (out / "trajectory.json").exists()
        assert (out / "placement.json").exists()
        manifest = json.loads((out / "masks_manifest.json").read_text())
        assert manifest["visible_counts"] == session.masks.visible_counts

    def test_export_before_render_conflicts(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        resp = client.post(
            f"/sessions/{info['id']}/export",
            json={"out_path": str(carrier_workspace["dir"] / "nope")},
        )
        assert resp.status_code == 409

    def test_preview_modes(self, occluder_workspace):
        ws = occluder_workspace
        client, manager = _client()
        sid = self._run_pipeline(client, ws)
        session = manager.get(sid)
        raw = np.asarray(Image.open(io.BytesIO(
            client.get(f"/sessions/{sid}/preview/0?mode=raw").content)))
        np.testing.assert_array_equal(raw, ws["bundle"].rgb_frames[0])
        mask = np.asarray(Image.open(io.BytesIO(
            client.get(f"/sessions/{sid}/preview/0?mode=mask").content)))
        np.testing.assert_array_equal(mask[..., 0], session.masks.masks[0])
        assert client.get(f"/sessions/{sid}/preview/0?mode=bogus").status_code == 400

    def test_occluder_preview_hides_blocked_pixels(self, occluder_workspace):
        ws = occluder_workspace
        client, manager = _client()
        sid = self._run_pipeline(client, ws)
        session = manager.get(sid)
        areas = [int((m > 0).sum()) for m in session.masks.masks]
        # oracle: the anchor is blocked mid-sweep (see synthetic tests)
        blocked = [
            t for t in range(8)
            if not ws["truth"].visible(t, ws["truth"].object_anchor[None, :], 0.01)[0]
        ]
        assert blocked, "occluder never blocks the anchor?"
        for t in blocked:
            assert areas[t] < 0.5 * areas[0]
        # preview equals the raw frame outside the mask
        t = blocked[0]
        resp = client.get(f"/sessions/{sid}/preview/{t}")
        got = np.asarray(Image.open(io.BytesIO(resp.content)))
        outside = session.masks.masks[t] == 0
        np.testing.assert_array_equal(
            got[outside], ws["bundle"].rgb_frames[t][outside]
        )


class TestScenePayload:
    def test_scene_points_decimated(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        full = client.get(f"/sessions/{info['id']}/scene/0").json()
        sparse = client.get(f"/sessions/{info['id']}/scene/0?stride=4").json()
        assert full["count"] == len(carrier_workspace["bundle"].scene_points[0])
        assert sparse["count"] == int(np.ceil(full["count"] / 4))
        assert len(sparse["positions"]) == sparse["count"] * 3
        assert sparse["revision"] == info["revision"]

    def test_scene_colors_present_with_rgb(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        payload = client.get(f"/sessions/{info['id']}/scene/0?stride=8").json()
        assert payload["colors"] is not None
        assert len(payload["colors"]) == payload["count"] * 3

    def test_object_points_payload(self, carrier_workspace):
        client, _ = _client()
        info = _create(client, carrier_workspace)
        payload = client.get(f"/sessions/{info['id']}/object").json()
        assert payload["count"] == info["object_points"]
        assert len(payload["positions"]) == payload["count"] * 3
        sparse = client.get(f"/sessions/{info['id']}/object?stride=10").json()
        assert sparse["count"] == int(np.ceil(payload["count"] / 10))


class TestManagerConflicts:
    def test_one_job_at_a_time(self, carrier_workspace):
        _, manager = _client()
        session = manager.create_session(
            str(carrier_workspace["bundle_dir"]),
            str(carrier_workspace["object_path"]),
        )
        session.active_job = "pinned"
        with pytest.raises(ConflictError):
            manager.start_propagation(session.id)
        with pytest.raises(ConflictError):
            manager.set_placement(session.id, RigidPlacement.identity())
        with pytest.raises(ConflictError):
            manager.delete_session(session.id)
        session.active_job = None
        manager.delete_session(session.id)
        assert manager.list_sessions() == []
