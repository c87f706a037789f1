"""Acceptance suite: one test per criterion, at its stated tolerance.

Run with ``pytest -s tests/test_acceptance.py`` to see one line per
criterion.  Each test prints its verdict before asserting so the line
appears even on failure.
"""

import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from _oracles import disagreement, oracle_mask
from mask4d.bundle import bundles_equal, load_bundle, save_bundle
from mask4d.formats import (
    ObjectCloud,
    parse_flo,
    parse_pfm,
    parse_ply,
    write_flo,
    write_pfm,
    write_ply,
)
from mask4d.geometry import (
    CameraIntrinsics,
    CameraPose,
    RigidPlacement,
    project_points,
    rotation_from_axis_angle,
    unproject_pixels,
)
from mask4d.propagation import (
    PlacementTrajectory,
    propagate_trajectory,
)
from mask4d.refselect import score_candidates, select_reference
from mask4d.render import (
    RenderConfig,
    export_pipeline_artifacts,
    mask_centroid,
    mask_iou,
    render_sequence,
)
from mask4d.service import SessionManager, create_app
from mask4d.synthetic import SyntheticSceneSpec, make_ball_cloud, synthesize_scene


def _verdict(name: str, ok: bool, detail: str = ""):
    tag = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[ACCEPTANCE] {name}: {tag}{suffix}")
    assert ok, f"{name}: {detail}"


def _random_spec(rng: np.random.Generator) -> SyntheticSceneSpec:
    kind = rng.choice(
        ["ground-plane", "moving-carrier", "orbit-camera", "occluder-sweep"]
    )
    common = dict(
        kind=str(kind),
        width=64,
        height=64,
        frame_count=8,
        wall_depth=float(rng.uniform(3.5, 4.5)),
        floor_y=float(rng.uniform(0.8, 1.0)),
        stride=1,
    )
    if kind == "ground-plane":
        common["camera_velocity"] = tuple(rng.uniform(-0.01, 0.01, size=3))
    elif kind == "moving-carrier":
        common["carrier_velocity"] = (float(rng.uniform(0.03, 0.06)), 0.0, 0.0)
    elif kind == "orbit-camera":
        common["orbit_radius"] = float(rng.uniform(2.2, 2.8))
        common["orbit_arc_deg"] = float(rng.uniform(30.0, 50.0))
    else:
        common["occluder_velocity"] = (float(rng.uniform(0.3, 0.4)), 0.0, 0.0)
    return SyntheticSceneSpec(**common)


def test_occlusion_oracle_equivalence():
    """>=10 randomized 64x64x8 bundles; per-frame mask disagreement <=0.5%;
    whole criterion under 60 s single-core."""
    started = time.monotonic()
    rng = np.random.default_rng(20240811)
    cfg = RenderConfig()
    worst = 0.0
    bundles = 0
    frames = 0
    for i in range(10):
        spec = _random_spec(rng)
        bundle, truth = synthesize_scene(spec)
        assert all(len(s) <= 5000 for s in bundle.scene_points)
        cloud = make_ball_cloud(
            radius=float(rng.uniform(0.09, 0.15)),
            count=int(rng.integers(300, 1000)),
            seed=int(rng.integers(0, 2**31)),
        )
        assert len(cloud.points) <= 1000
        anchor = (
            truth.object_anchor
            if truth.object_anchor is not None
            else np.array([0.0, 0.2, 2.4])
        )
        place = RigidPlacement(1.0, np.eye(3), anchor)
        traj = PlacementTrajectory.constant(place, bundle.frame_count)
        seq = render_sequence(cloud, traj, bundle, cfg)
        pts = cloud.points + anchor
        for t in range(bundle.frame_count):
            oracle = oracle_mask(
                pts, bundle.intrinsics, bundle.poses[t], bundle.depths[t], cfg
            )
            worst = max(worst, disagreement(seq.masks[t], oracle))
            frames += 1
        bundles += 1
    elapsed = time.monotonic() - started
    _verdict(
        "occlusion-oracle-equivalence",
        bundles >= 10 and worst <= 0.005 and elapsed < 60.0,
        f"{bundles} bundles / {frames} frames, worst disagreement "
        f"{worst:.5f}, {elapsed:.1f}s",
    )


def test_projection_round_trip():
    """1e5 random in-frustum points: <1e-6 px and <1e-9 m after the loop."""
    rng = np.random.default_rng(7)
    intr = CameraIntrinsics(fx=80.0, fy=75.0, cx=31.5, cy=32.5, width=64, height=64)
    pose = CameraPose(
        rotation_from_axis_angle(rng.normal(size=3), 0.8),
        rng.normal(size=3) * 0.5,
    )
    n = 100_000
    pixels = np.column_stack(
        [rng.uniform(0, intr.width, n), rng.uniform(0, intr.height, n)]
    )
    depths = rng.uniform(0.1, 100.0, n)
    world = unproject_pixels(intr, pose, pixels, depths)
    back_px, back_d, in_front = project_points(intr, pose, world)
    px_err = float(np.max(np.abs(back_px - pixels)))
    d_err = float(np.max(np.abs(back_d - depths)))
    _verdict(
        "projection-round-trip",
        bool(in_front.all()) and px_err < 1e-6 and d_err < 1e-9,
        f"n={n}, max pixel err {px_err:.2e}, max depth err {d_err:.2e}",
    )


def test_propagation_tracking():
    """Carrier at 0.05 m/frame on 8 frames: cumulative centroid error <2% of
    the total displacement; zero-flow scene is bit-constant."""
    spec = SyntheticSceneSpec(
        kind="moving-carrier", carrier_velocity=(0.05, 0.0, 0.0)
    )
    bundle, truth = synthesize_scene(spec)
    start = RigidPlacement(1.0, np.eye(3), truth.object_anchor)
    traj = propagate_trajectory(start, bundle)
    carrier = truth.carrier_positions()
    total = float(np.linalg.norm(carrier[-1] - carrier[0]))
    final_expected = start.translation + (carrier[-1] - carrier[0])
    err = float(np.linalg.norm(traj[7].translation - final_expected))

    static_bundle, _ = synthesize_scene(SyntheticSceneSpec(kind="ground-plane"))
    static_traj = propagate_trajectory(start, static_bundle)
    bit_constant = all(
        p.scale == start.scale
        and np.array_equal(p.rotation, start.rotation)
        and np.array_equal(p.translation, start.translation)
        for p in static_traj.placements
    )
    _verdict(
        "propagation-tracking",
        err < 0.02 * total and bit_constant,
        f"cumulative err {err:.2e} m vs 2% bound {0.02 * total:.2e} m; "
        f"zero-flow bit-constant={bit_constant}",
    )


def test_static_scene_temporal_consistency():
    """Static scene: consecutive mask IoU exactly 1.0.  Orbit: mask centroid
    within 1 px of the analytic projection of the object centroid."""
    static_bundle, _ = synthesize_scene(SyntheticSceneSpec(kind="ground-plane"))
    cloud = make_ball_cloud(radius=0.14, count=600, seed=5)
    place = RigidPlacement(1.0, np.eye(3), np.array([0.0, 0.2, 2.5]))
    seq = render_sequence(
        cloud, PlacementTrajectory.constant(place, 8), static_bundle
    )
    ious = [mask_iou(seq.masks[t], seq.masks[t - 1]) for t in range(1, 8)]
    static_ok = seq.masks[0].any() and all(iou == 1.0 for iou in ious)

    spec = SyntheticSceneSpec(kind="orbit-camera")
    orbit_bundle, truth = synthesize_scene(spec)
    place = RigidPlacement(1.0, np.eye(3), truth.object_anchor)
    orbit_seq = render_sequence(
        cloud, PlacementTrajectory.constant(place, 8), orbit_bundle
    )
    centroid_world = (cloud.points + truth.object_anchor).mean(axis=0)
    worst_px = 0.0
    for t in range(8):
        c = mask_centroid(orbit_seq.masks[t])
        px, _, _ = project_points(
            orbit_bundle.intrinsics, orbit_bundle.poses[t], centroid_world[None, :]
        )
        worst_px = max(worst_px, float(np.linalg.norm(c - px[0])))
    _verdict(
        "static-scene-temporal-consistency",
        static_ok and worst_px < 1.0,
        f"consecutive IoU all 1.0={static_ok}, orbit worst centroid err "
        f"{worst_px:.3f} px",
    )


def test_format_round_trips(tmp_path):
    """PLY, PFM, .flo and the bundle directory all round-trip bit-exactly."""
    rng = np.random.default_rng(3)

    pts = rng.normal(size=(500, 3)).astype(np.float32).astype(np.float64)
    colors = rng.integers(0, 256, size=(500, 3), dtype=np.uint8)
    cloud = ObjectCloud(pts, colors)
    back = parse_ply(write_ply(cloud))
    ply_ok = np.array_equal(back.points, cloud.points) and np.array_equal(
        back.colors, cloud.colors
    )

    depth = rng.uniform(0.1, 20.0, size=(48, 64)).astype(np.float32)
    pfm_ok = np.array_equal(parse_pfm(write_pfm(depth)), depth)

    flow = rng.normal(scale=3.0, size=(48, 64, 2)).astype(np.float32)
    flo_ok = np.array_equal(parse_flo(write_flo(flow)), flow)

    bundle, _ = synthesize_scene(SyntheticSceneSpec(kind="occluder-sweep"))
    save_bundle(bundle, tmp_path / "b")
    bundle_ok = bundles_equal(bundle, load_bundle(tmp_path / "b"))

    _verdict(
        "format-round-trips",
        ply_ok and pfm_ok and flo_ok and bundle_ok,
        f"ply={ply_ok} pfm={pfm_ok} flo={flo_ok} bundle={bundle_ok}",
    )


def test_refselect_correctness():
    """Scores match the double loop within 1e-12; the planted candidate wins
    all 20 constructed cases; argmax invariant under increasing maps."""
    rng = np.random.default_rng(17)

    worst = 0.0
    for _ in range(5):
        cand = rng.normal(size=(4, 32))
        frames = rng.normal(size=(6, 32))
        got = score_candidates(cand, frames)
        want = np.array([
            np.mean([
                np.dot(c / np.linalg.norm(c), f / np.linalg.norm(f))
                for f in frames
            ])
            for c in cand
        ])
        worst = max(worst, float(np.max(np.abs(got - want))))
    scores_ok = worst < 1e-12

    planted_wins = 0
    for case in range(20):
        case_rng = np.random.default_rng(1000 + case)
        frames = case_rng.normal(size=(5, 64))
        target = frames.mean(axis=0) + 0.01 * case_rng.normal(size=64)
        cands = case_rng.normal(size=(6, 64))
        slot = int(case_rng.integers(0, 6))
        cands[slot] = target
        if select_reference(score_candidates(cands, frames)) == slot:
            planted_wins += 1
    planted_ok = planted_wins == 20

    invariant_ok = True
    for _ in range(20):
        s = rng.normal(size=8)
        k = select_reference(s)
        for transform in (np.exp, lambda x: 5 * x + 3, np.arctan):
            if select_reference(transform(s)) != k:
                invariant_ok = False
    _verdict(
        "refselect-correctness",
        scores_ok and planted_ok and invariant_ok,
        f"score err {worst:.2e}; planted {planted_wins}/20; "
        f"argmax invariant={invariant_ok}",
    )


def test_service_library_equivalence(tmp_path):
    """The HTTP pipeline export is byte-identical to direct library calls."""
    spec = SyntheticSceneSpec(kind="moving-carrier")
    bundle, truth = synthesize_scene(spec)
    bundle_dir = tmp_path / "bundle"
    save_bundle(bundle, bundle_dir)
    cloud = make_ball_cloud(radius=0.1, count=400, seed=7)
    ply_path = tmp_path / "ball.ply"
    ply_path.write_bytes(write_ply(cloud))
    anchor = [float(x) for x in truth.object_anchor]

    # route 1: HTTP API
    manager = SessionManager()
    client = TestClient(create_app(manager=manager))
    sid = client.post(
        "/sessions",
        json={"bundle_path": str(bundle_dir), "object_path": str(ply_path)},
    ).json()["id"]
    client.put(
        f"/sessions/{sid}/placement",
        json={"scale": 1.0, "R": [1, 0, 0, 0, 1, 0, 0, 0, 1], "t": anchor},
    )
    for endpoint in ("propagate", "render"):
        job = client.post(f"/sessions/{sid}/{endpoint}").json()["job_id"]
        deadline = time.monotonic() + 60
        while time.monotonic() < deadline:
            state = client.get(f"/jobs/{job}").json()
            if state["status"] != "running":
                break
            time.sleep(0.01)
        assert state["status"] == "done", state
    api_out = tmp_path / "api_export"
    client.post(f"/sessions/{sid}/export", json={"out_path": str(api_out)})

    # route 2: direct library invocation on the same inputs
    lib_bundle = load_bundle(bundle_dir)
    lib_cloud = parse_ply(ply_path.read_bytes())
    placement = RigidPlacement(1.0, np.eye(3), np.array(anchor))
    trajectory = propagate_trajectory(placement, lib_bundle)
    seq = render_sequence(lib_cloud, trajectory, lib_bundle)
    lib_out = tmp_path / "lib_export"
    export_pipeline_artifacts(seq, trajectory, placement, lib_out)

    api_files = sorted(p.relative_to(api_out) for p in api_out.rglob("*") if p.is_file())
    lib_files = sorted(p.relative_to(lib_out) for p in lib_out.rglob("*") if p.is_file())
    same_names = api_files == lib_files
    same_bytes = same_names and all(
        (api_out / f).read_bytes() == (lib_out / f).read_bytes() for f in api_files
    )
    _verdict(
        "service-library-equivalence",
        same_names and same_bytes,
        f"{len(api_files)} files, byte-identical={same_bytes}",
    )
