"""Command-line interface mirroring the HTTP API for headless use.

Subcommands: synth, validate, propagate, render, select-ref, pipeline,
serve.  The pipeline subcommand runs placement JSON → propagation →
rendering → export in one go and writes the same directory layout the
service export produces.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import formats
from .bundle import load_bundle, save_bundle
from .errors import Mask4DError
from .geometry import RigidPlacement
from .propagation import PlacementTrajectory, PropagationConfig, propagate_trajectory
from .render import RenderConfig, export_pipeline_artifacts, render_sequence
from .synthetic import SCENE_KINDS, SyntheticSceneSpec, make_ball_cloud, synthesize_scene


def _add_propagation_flags(p: argparse.ArgumentParser):
    p.add_argument("--k-neighbors", type=int, default=32)
    p.add_argument("--radius-cap", type=float, default=None)
    p.add_argument("--min-valid-fraction", type=float, default=0.5)
    p.add_argument("--static-flow-threshold", type=float, default=0.05)


def _add_render_flags(p: argparse.ArgumentParser):
    p.add_argument("--splat-radius", type=float, default=1.5)
    p.add_argument("--depth-epsilon-rel", type=float, default=0.01)
    p.add_argument("--closing-radius", type=int, default=2)
    p.add_argument("--min-mask-area", type=int, default=4)


def _propagation_config(args) -> PropagationConfig:
    return PropagationConfig(
        k_neighbors=args.k_neighbors,
        radius_cap=args.radius_cap,
        min_valid_fraction=args.min_valid_fraction,
        static_flow_threshold=args.static_flow_threshold,
    )


def _render_config(args) -> RenderConfig:
    return RenderConfig(
        splat_radius=args.splat_radius,
        depth_epsilon_rel=args.depth_epsilon_rel,
        closing_radius=args.closing_radius,
        min_mask_area=args.min_mask_area,
    )


def _load_placement(path) -> RigidPlacement:
    return RigidPlacement.from_json_obj(
        json.loads(Path(path).read_text(encoding="utf-8"))
    )


def cmd_synth(args) -> int:
    spec = SyntheticSceneSpec(
        kind=args.kind,
        width=args.width,
        height=args.height,
        frame_count=args.frames,
        stride=args.stride,
        include_rgb=not args.no_rgb,
    )
    bundle, truth = synthesize_scene(spec)
    out = Path(args.out)
    save_bundle(bundle, out)

    obj_dir = out / "object"
    obj_dir.mkdir(exist_ok=True)
    ball = make_ball_cloud(radius=args.object_radius, count=args.object_points)
    (obj_dir / "ball.ply").write_bytes(formats.write_ply(ball))

    anchor = truth.object_anchor
    extras = {
        "kind": spec.kind,
        "object_anchor": [float(x) for x in anchor] if anchor is not None else None,
        "suggested_placement": (
            RigidPlacement(1.0, np.eye(3), anchor).to_json_obj()
            if anchor is not None
            else None
        ),
    }
    if truth.carrier_index is not None:
        extras["carrier_positions"] = truth.carrier_positions().tolist()
    if truth.occluder_index is not None:
        extras["occluder_positions"] = truth.occluder_positions().tolist()
    (out / "truth.json").write_text(json.dumps(extras, indent=2), encoding="utf-8")

    print(f"wrote {spec.kind} bundle: {spec.frame_count} frames "
          f"{spec.width}x{spec.height} -> {out}")
    print(f"co-shipped object/ball.ply ({args.object_points} points) and truth.json")
    return 0


def cmd_validate(args) -> int:
    bundle = load_bundle(args.bundle)
    points = [len(s) for s in bundle.scene_points]
    print(f"ok: {bundle.frame_count} frames "
          f"{bundle.intrinsics.width}x{bundle.intrinsics.height}, "
          f"stride {bundle.stride}, "
          f"scene points/frame min={min(points)} max={max(points)}, "
          f"rgb={'yes' if bundle.rgb_frames is not None else 'no'}")
    return 0


def cmd_propagate(args) -> int:
    bundle = load_bundle(args.bundle)
    placement = _load_placement(args.placement)
    trajectory = propagate_trajectory(placement, bundle, _propagation_config(args))
    Path(args.out).write_text(trajectory.to_json(), encoding="utf-8")
    flags = trajectory.flags
    print(f"propagated {len(trajectory)} frames "
          f"({flags.count('propagated')} propagated, "
          f"{flags.count('static-fallback')} static) -> {args.out}")
    return 0


def cmd_render(args) -> int:
    bundle = load_bundle(args.bundle)
    obj = formats.parse_ply(Path(args.object).read_bytes())
    trajectory = PlacementTrajectory.from_json(
        Path(args.trajectory).read_text(encoding="utf-8")
    )
    cfg = _render_config(args)
    seq = render_sequence(obj, trajectory, bundle, cfg)
    from .render import export_mask_sequence

    export_mask_sequence(seq, args.out, cfg)
    print(f"rendered {len(seq)} masks, visible counts {seq.visible_counts} "
          f"-> {args.out}")
    return 0


def cmd_select_ref(args) -> int:
    from .refselect import (
        BaselineEmbedder,
        HttpEmbedder,
        select_reference_from_dirs,
        write_selection,
    )

    if args.provider == "http":
        if not args.endpoint:
            print("error: --endpoint is required with --provider http",
                  file=sys.stderr)
            return 2
        provider = HttpEmbedder(args.endpoint, max_in_flight=args.max_in_flight)
    else:
        provider = BaselineEmbedder()
    result = select_reference_from_dirs(
        args.frames, args.masks, args.candidates, provider
    )
    write_selection(result, args.out)
    print(f"selected candidate {result['selected']} "
          f"({result['candidates'][result['selected']]}) "
          f"score {result['scores'][result['selected']]:.4f} -> {args.out}")
    return 0


def cmd_pipeline(args) -> int:
    bundle = load_bundle(args.bundle)
    obj = formats.parse_ply(Path(args.object).read_bytes())
    placement = _load_placement(args.placement)
    trajectory = propagate_trajectory(placement, bundle, _propagation_config(args))
    cfg = _render_config(args)
    seq = render_sequence(obj, trajectory, bundle, cfg)
    written = export_pipeline_artifacts(seq, trajectory, placement, args.out, cfg)
    print(f"pipeline complete: {len(seq)} masks, {len(written)} files -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(workers=args.workers, session_limit=args.session_limit)
    uvicorn.run(create_app(config), host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mask4d",
        description="4D-aware object placement and occlusion-correct mask generation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene bundle")
    p.add_argument("--kind", choices=SCENE_KINDS, default="moving-carrier")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--no-rgb", action="store_true")
    p.add_argument("--object-points", type=int, default=500)
    p.add_argument("--object-radius", type=float, default=0.12)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="validate a bundle directory")
    p.add_argument("bundle")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("propagate", help="propagate a placement through time")
    p.add_argument("--bundle", required=True)
    p.add_argument("--placement", required=True, help="placement JSON file")
    p.add_argument("--out", required=True, help="trajectory JSON output")
    _add_propagation_flags(p)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("render", help="render masks from a trajectory")
    p.add_argument("--bundle", required=True)
    p.add_argument("--object", required=True, help="object PLY file")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out", required=True)
    _add_render_flags(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("select-ref", help="pick the best reference image")
    p.add_argument("--frames", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--provider", choices=["baseline", "http"], default="baseline")
    p.add_argument("--endpoint", default=None)
    p.add_argument("--max-in-flight", type=int, default=4)
    p.set_defaults(func=cmd_select_ref)

    p = sub.add_parser("pipeline", help="placement JSON in, masks out")
    p.add_argument("--bundle", required=True)
    p.add_argument("--object", required=True)
    p.add_argument("--placement", required=True)
    p.add_argument("--out", required=True)
    _add_propagation_flags(p)
    _add_render_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--host", default=os.environ.get("MASK4D_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("MASK4D_PORT", "8520")))
    p.add_argument("--workers", type=int,
                   default=int(os.environ.get("MASK4D_WORKERS", "2")))
    p.add_argument("--session-limit", type=int,
                   default=int(os.environ.get("MASK4D_SESSION_LIMIT", "16")))
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Mask4DError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
