"""Shared fixtures: synthetic bundles and objects written to temp dirs."""

import pytest

from mask4d.bundle import save_bundle
from mask4d.formats import write_ply
from mask4d.synthetic import SyntheticSceneSpec, make_ball_cloud, synthesize_scene


@pytest.fixture
def carrier_workspace(tmp_path):
    """A moving-carrier bundle on disk plus a ball object PLY and its truth."""
    spec = SyntheticSceneSpec(kind="moving-carrier")
    bundle, truth = synthesize_scene(spec)
    bundle_dir = tmp_path / "bundle"
    save_bundle(bundle, bundle_dir)
    ball = make_ball_cloud(radius=0.1, count=400, seed=7)
    ply_path = tmp_path / "ball.ply"
    ply_path.write_bytes(write_ply(ball))
    return {
        "dir": tmp_path,
        "bundle_dir": bundle_dir,
        "object_path": ply_path,
        "bundle": bundle,
        "truth": truth,
        "cloud": ball,
        "spec": spec,
    }


@pytest.fixture
def occluder_workspace(tmp_path):
    spec = SyntheticSceneSpec(kind="occluder-sweep")
    bundle, truth = synthesize_scene(spec)
    bundle_dir = tmp_path / "bundle"
    save_bundle(bundle, bundle_dir)
    ball = make_ball_cloud(radius=0.12, count=400, seed=9)
    ply_path = tmp_path / "ball.ply"
    ply_path.write_bytes(write_ply(ball))
    return {
        "dir": tmp_path,
        "bundle_dir": bundle_dir,
        "object_path": ply_path,
        "bundle": bundle,
        "truth": truth,
        "cloud": ball,
        "spec": spec,
    }
