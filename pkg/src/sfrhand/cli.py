"""Command-line entry point: ``sfrhand <command> ...``.

Exit status is 0 when the command succeeded and every gated check passed,
1 on a failed check or a data error, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .depth import build_mask, decode_depth, encode_depth_map
from .errors import OutOfHullError, SFRError, UnsupportedJointError
from .fit import MODES, FitConfig, fit_representation
from .gradcheck import check_instances
from .losses import LossWeights
from .metrics import DEFAULT_THRESHOLDS, frames_under_threshold, mean_3d_error, uvd_to_xyz
from .plane import GaussKernel, boundary_proximate, decode_plane, encode_heatmap
from .preprocess import crop_box, downsample_repr
from .synth import SynthSpec, generate_corpus
from .types import CameraIntrinsics, DepthFrame, NormalizationCube

log = logging.getLogger("sfrhand")

GRADCHECK_GATE = 1e-4
# camera used for synthetic corpora
SYNTH_INTRINSICS = CameraIntrinsics(475.0, 475.0, 160.0, 120.0)
SYNTH_CUBE = NormalizationCube((0.0, 0.0, 400.0), 250.0)


class CommandError(Exception):
    pass


def _repr_frame(frame: DepthFrame, args) -> DepthFrame:
    if frame.resolution == args.size_n:
        return frame
    if frame.resolution == args.size_m:
        return downsample_repr(frame, args.size_n)
    raise CommandError(f"frame resolution {frame.resolution} matches neither --size-m {args.size_m} "
                       f"nor --size-n {args.size_n}")


def _load_inputs(args):
    ids, frames = io.read_frames(args.frames)
    if not frames:
        raise CommandError("no frames in input")
    ann = io.read_annotations(args.annotations)
    unknown = [fid for fid in ann if fid not in ids]
    if unknown:
        raise CommandError(f"annotations reference unknown frame(s): {', '.join(unknown[:5])}")
    pairs = []
    for fid, frame in zip(ids, frames):
        if fid not in ann:
            log.warning("frame %s has no annotation; skipped", fid)
            continue
        pairs.append((fid, _repr_frame(frame, args), ann[fid]))
    if not pairs:
        raise CommandError("no frames with annotations")
    return pairs


def _encode_frame(frame, joints, kernel):
    """Heatmaps and offset maps for one frame; raises OutOfHullError naming the joint."""
    n = frame.resolution
    hms = []
    for j, p in enumerate(joints.uv):
        try:
            hms.append(encode_heatmap(p, n, kernel))
        except OutOfHullError as e:
            raise OutOfHullError(f"joint {j}: {e}") from None
    H = np.stack(hms)
    m = build_mask(frame)
    return H, encode_depth_map(joints.d, H, frame, m), m


# commands

def cmd_generate(args):
    spec = SynthSpec(n_joints=args.joints, resolution=args.size_n, blob_radius=args.blob_radius, seed=args.seed)
    scenes, manifest = generate_corpus(spec, args.count)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ids = [str(i) for i in range(args.count)]
    frames_name = "frames.sfrb" if args.binary else "frames.sfrd"
    io.write_frames(out / frames_name, [f for f, _ in scenes], ids, binary=args.binary)
    io.write_annotations(out / "annotations.csv", {i: j for i, (_, j) in zip(ids, scenes)})
    box = crop_box(SYNTH_CUBE, SYNTH_INTRINSICS)
    io.write_geometry(out / "geometry.csv", {i: (SYNTH_INTRINSICS, SYNTH_CUBE, box) for i in ids})
    with open(out / "manifest.json", "w") as fh:
        json.dump({"spec": {"n_joints": spec.n_joints, "resolution": spec.resolution,
                            "blob_radius": spec.blob_radius, "depth_range": list(spec.depth_range),
                            "seed": spec.seed}, "scenes": manifest}, fh, indent=1)
    print(f"wrote {args.count} scenes to {out}")
    return 0


def cmd_encode(args):
    kernel = GaussKernel(args.kernel_k)
    entries = []
    written = skipped = 0
    for fid, frame, joints in _load_inputs(args):
        try:
            H, D, _ = _encode_frame(frame, joints, kernel)
        except OutOfHullError as e:
            log.warning("frame %s skipped: %s", fid, e)
            print(f"frame {fid}: skipped ({e})", file=sys.stderr)
            skipped += 1
            continue
        for j in range(len(joints)):
            entries.append((fid, j, "heatmap", H[j]))
            entries.append((fid, j, "depthmap", D[j]))
        written += 1
    io.write_bundle(args.out, entries)
    print(f"encoded {written} frames into {args.out} ({skipped} skipped)")
    return 0 if skipped == 0 else 1


def _decode_bundle_frame(frame, grids):
    H, D = grids["heatmap"], grids["depthmap"]
    uv = decode_plane(H)
    d = np.atleast_1d(decode_depth(D, H, frame, build_mask(frame)))
    return np.column_stack([uv, d])


def cmd_decode(args):
    ids, frames = io.read_frames(args.frames)
    if not frames:
        raise CommandError("no frames in input")
    by_id = dict(zip(ids, frames))
    bundle = io.read_bundle(args.bundle)
    preds = {}
    for fid, grids in bundle.items():
        if fid not in by_id:
            raise CommandError(f"bundle frame {fid} not in {args.frames}")
        preds[fid] = _decode_bundle_frame(_repr_frame(by_id[fid], args), grids)
    io.write_annotations(args.out, preds)
    print(f"decoded {len(preds)} frames to {args.out}")
    return 0


def cmd_roundtrip(args):
    kernel = GaussKernel(args.kernel_k)
    bundle = io.read_bundle(args.bundle) if args.bundle else None
    rows, preds = [], {}
    counts = {"pass": 0, "fail": 0, "boundary": 0, "out_of_hull": 0, "unsupported": 0, "missing": 0}
    for fid, frame, joints in _load_inputs(args):
        J = len(joints)
        if bundle is not None:
            if fid not in bundle:
                rows += [(fid, j, "", "", "", "missing") for j in range(J)]
                counts["missing"] += J
                continue
            H, D = bundle[fid]["heatmap"], bundle[fid]["depthmap"]
        else:
            try:
                H, D, _ = _encode_frame(frame, joints, kernel)
            except OutOfHullError as e:
                log.warning("frame %s: %s", fid, e)
                rows += [(fid, j, "", "", "", "out_of_hull") for j in range(J)]
                counts["out_of_hull"] += J
                continue
        m = build_mask(frame)
        decoded = np.full((J, 3), np.nan)
        for j in range(J):
            uv = decode_plane(H[j])
            try:
                d = decode_depth(D[j], H[j], frame, m)
            except UnsupportedJointError:
                rows.append((fid, j, "", "", "", "unsupported"))
                counts["unsupported"] += 1
                continue
            decoded[j] = (uv[0], uv[1], d)
            err = np.abs(decoded[j] - joints.joints[j])
            try:
                near_edge = boundary_proximate(joints.uv[j], frame.resolution, args.kernel_k)
            except OutOfHullError:
                near_edge = True
            if near_edge:
                status = "boundary"
            else:
                status = "pass" if np.all(err < args.tol) else "fail"
            counts[status] += 1
            rows.append((fid, j, io.fmt(err[0]), io.fmt(err[1]), io.fmt(err[2]), status))
        if not np.any(np.isnan(decoded)):
            preds[fid] = decoded
    if args.report:
        with open(args.report, "w") as fh:
            fh.write("frame_id,joint_id,err_u,err_v,err_d,status\n")
            for r in rows:
                fh.write(",".join(str(x) for x in r) + "\n")
    if args.pred_out:
        io.write_annotations(args.pred_out, preds)
    bad = counts["fail"] + counts["out_of_hull"] + counts["unsupported"] + counts["missing"]
    print(f"roundtrip tol={args.tol:g}: " + ", ".join(f"{k}={v}" for k, v in counts.items())
          + f" -> {'PASS' if bad == 0 else 'FAIL'}")
    return 0 if bad == 0 else 1


def cmd_gradcheck(args):
    if args.instances < 1:
        raise CommandError("--instances must be at least 1")
    report = check_instances(args.seed, args.instances, n=args.size, n_joints=args.joints, step=args.step)
    ok = True
    for name, value in report.items():
        passed = value < GRADCHECK_GATE
        ok &= passed
        print(f"{name} max_rel_err={value:.3e} {'PASS' if passed else 'FAIL'}")
    return 0 if ok else 1


def cmd_fit(args):
    ids, frames = io.read_frames(args.frames)
    if not frames:
        raise CommandError("no frames in input")
    ann = io.read_annotations(args.annotations)
    fid = args.frame_id if args.frame_id is not None else ids[0]
    if fid not in ann or fid not in ids:
        raise CommandError(f"frame {fid} missing from frames or annotations")
    frame = _repr_frame(frames[ids.index(fid)], args)
    target = ann[fid]
    cfg = FitConfig(mode=args.mode, step_size=args.step_size, max_iters=args.max_iters, seed=args.seed,
                    kernel_size=args.kernel_k, grad_tol=args.grad_tol,
                    max_score_step=args.max_score_step)
    res = fit_representation(target, frame, cfg, LossWeights(args.lambda_h, args.lambda_d))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res.write_trace(out / "trace.csv")
    io.write_annotations(out / "decoded.csv", {fid: res.decoded})
    io.write_bundle(out / "bundle", [(fid, j, kind, grid) for j in range(len(target))
                                     for kind, grid in (("heatmap", res.heatmaps[j]), ("depthmap", res.depthmaps[j]))])
    if args.figure:
        from .plotting import plot_loss_trace, plot_representation
        plot_loss_trace(res.trace, out / "trace.png")
        plot_representation(frame.values, res.heatmaps[0], res.depthmaps[0], out / "joint0.png", joint=0)
    err = res.coordinate_error(target)
    print(f"fit mode={args.mode} iterations={res.iterations} objective={res.trace[-1][-1]:.6e} "
          f"max_coordinate_error={err:.6e}")
    return 0


def _parse_thresholds(spec: str):
    lo, hi, step = (float(x) for x in spec.split(":"))
    return np.arange(lo, hi + step / 2, step)


def cmd_eval(args):
    preds = io.read_annotations(args.pred)
    gts = io.read_annotations(args.gt)
    geometry = io.read_geometry(args.geometry)
    if not gts:
        raise CommandError("no frames in ground truth")
    p_xyz, g_xyz = [], []
    for fid, gt in gts.items():
        if fid not in preds:
            raise CommandError(f"frame {fid} has no prediction")
        if fid not in geometry:
            raise CommandError(f"frame {fid} has no geometry row")
        if len(preds[fid]) != len(gt):
            raise CommandError(f"frame {fid}: prediction has {len(preds[fid])} joints, "
                               f"ground truth has {len(gt)}")
        intr, cube, crop = geometry[fid]
        p_xyz.append(uvd_to_xyz(preds[fid], cube, intr, crop))
        g_xyz.append(uvd_to_xyz(gt, cube, intr, crop))
    counts = {len(g) for g in g_xyz}
    if len(counts) > 1:
        raise CommandError(f"ground-truth frames have differing joint counts {sorted(counts)}")
    p_xyz, g_xyz = np.stack(p_xyz), np.stack(g_xyz)
    thresholds = _parse_thresholds(args.thresholds) if args.thresholds else DEFAULT_THRESHOLDS
    per_joint, overall = mean_3d_error(p_xyz, g_xyz)
    curve = frames_under_threshold(p_xyz, g_xyz, thresholds)
    io.write_metrics(args.out, per_joint, overall, thresholds, curve)
    if args.figure:
        from .plotting import plot_per_joint_error, plot_threshold_curve
        fig = Path(args.figure)
        plot_threshold_curve(thresholds, curve, fig)
        plot_per_joint_error(per_joint, fig.with_name(fig.stem + "_per_joint" + fig.suffix))
    print(f"evaluated {len(g_xyz)} frames: mean error {overall:.4f} mm")
    return 0


# argument parsing

def _add_sizes(p):
    p.add_argument("--size-m", type=int, default=128, help="input image size (default 128)")
    p.add_argument("--size-n", type=int, default=64, help="representation size (default 64)")


def _add_kernel(p):
    p.add_argument("--kernel-k", type=int, default=7, help="Gaussian kernel size (default 7)")


def build_parser():
    parser = argparse.ArgumentParser(prog="sfrhand", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a seeded synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--joints", type=int, default=21)
    p.add_argument("--blob-radius", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--binary", action="store_true")
    _add_sizes(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("encode", help="encode joints into heatmap/offset-map bundles")
    p.add_argument("frames")
    p.add_argument("annotations")
    p.add_argument("--out", required=True)
    _add_sizes(p)
    _add_kernel(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a bundle into a predictions CSV")
    p.add_argument("frames")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    _add_sizes(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("roundtrip", help="encode/decode residuals against annotations")
    p.add_argument("frames")
    p.add_argument("annotations")
    p.add_argument("--bundle", help="decode this bundle instead of re-encoding")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--report")
    p.add_argument("--pred-out")
    _add_sizes(p)
    _add_kernel(p)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("gradcheck", help="finite-difference check of analytic gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--joints", type=int, default=2)
    p.add_argument("--step", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("fit", help="fit representations through the decoders")
    p.add_argument("frames")
    p.add_argument("annotations")
    p.add_argument("--frame-id")
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--step-size", type=float, default=FitConfig.step_size)
    p.add_argument("--max-iters", type=int, default=FitConfig.max_iters)
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--max-score-step", type=float, default=FitConfig.max_score_step)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda-h", type=float, default=1.0)
    p.add_argument("--lambda-d", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--figure", action="store_true", help="also render trace.png and joint0.png")
    _add_sizes(p)
    _add_kernel(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="mean 3D error and frames-under-threshold curve")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("geometry")
    p.add_argument("--out", required=True)
    p.add_argument("--thresholds", help="lo:hi:step in mm (default 0:80:1)")
    p.add_argument("--figure", help="PNG path for the threshold curve")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CommandError, SFRError, OSError) as e:
        print(f"sfrhand {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
