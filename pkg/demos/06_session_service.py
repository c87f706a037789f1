"""
Driving the HTTP session service
================================

Boots the service in-process, then walks the full operator flow over
plain HTTP: create a session, commit a placement, run propagation and
rendering as polled jobs, fetch a preview and export the artifacts.
"""

import json
import tempfile
import threading
import time
from pathlib import Path

import httpx
import numpy as np
import uvicorn

from mask4d import SyntheticSceneSpec, make_ball_cloud, save_bundle, synthesize_scene
from mask4d.formats import write_ply
from mask4d.service import create_app

################################################################################
# Stage inputs on disk: a synthetic bundle and an object PLY.

workdir = Path(tempfile.mkdtemp(prefix="mask4d_demo_"))
bundle, truth = synthesize_scene(SyntheticSceneSpec(kind="moving-carrier"))
save_bundle(bundle, workdir / "bundle")
(workdir / "ball.ply").write_bytes(write_ply(make_ball_cloud(radius=0.1, count=400)))

################################################################################
# Boot the service on a local port in a daemon thread.

server = uvicorn.Server(
    uvicorn.Config(create_app(), host="127.0.0.1", port=8765, log_level="warning")
)
threading.Thread(target=server.run, daemon=True).start()
while not server.started:
    time.sleep(0.05)
base = "http://127.0.0.1:8765"

with httpx.Client(base_url=base, timeout=30.0) as client:
    ############################################################################
    # Create a session; the default placement sits 1 m ahead of camera 0.

    info = client.post("/sessions", json={
        "bundle_path": str(workdir / "bundle"),
        "object_path": str(workdir / "ball.ply"),
    }).json()
    sid = info["id"]
    print(f"session {sid[:8]}… status={info['status']} revision={info['revision']}")

    ############################################################################
    # Commit a placement right above the carrier (from the scene truth).

    anchor = [float(x) for x in truth.object_anchor]
    rev = client.put(f"/sessions/{sid}/placement", json={
        "scale": 1.0, "R": [1, 0, 0, 0, 1, 0, 0, 0, 1], "t": anchor,
    }).json()["revision"]
    print(f"placement committed at {np.round(anchor, 3)} -> revision {rev}")

    ############################################################################
    # Long operations are jobs: submit, poll, repeat.

    def run_job(endpoint: str):
        job_id = client.post(f"/sessions/{sid}/{endpoint}").json()["job_id"]
        while True:
            job = client.get(f"/jobs/{job_id}").json()
            if job["status"] != "running":
                print(f"{endpoint}: {job['status']} "
                      f"({job['frames_done']}/{job['frames_total']} frames)")
                return job
            time.sleep(0.02)

    run_job("propagate")
    run_job("render")

    ############################################################################
    # Fetch a preview frame (PNG) and the decimated scene cloud for a viewer.

    png = client.get(f"/sessions/{sid}/preview/4")
    scene = client.get(f"/sessions/{sid}/scene/0", params={"stride": 8}).json()
    print(f"preview frame 4: {len(png.content)} PNG bytes "
          f"(revision header {png.headers['X-Revision']})")
    print(f"scene payload: {scene['count']} points at stride 8")

    ############################################################################
    # Export everything; the directory matches the headless pipeline exactly.

    out = workdir / "export"
    written = client.post(f"/sessions/{sid}/export",
                          json={"out_path": str(out)}).json()["written"]
    print(f"exported {len(written)} files to {out}")
    manifest = json.loads((out / "masks_manifest.json").read_text())
    print(f"visible counts per frame: {manifest['visible_counts']}")

server.should_exit = True
