"""Command-line surface tying the library into reproducible file-based runs.

Commands operate on directories of per-camera rasters named after the rig
file's camera names (``<cam>_image.pfm``, ``<cam>_depth.pfm``,
``<cam>_f###.pfm`` feature channels, ``<cam>_posmap.pfm``).  Every command
fails with a single-line ``error: <Type>: <message>`` on stderr, exits
nonzero, and removes any output files it already wrote.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from dataclasses import replace

import click
import numpy as np

from . import attention, cylinder, fileio, metrics, photometry, rig as rigmod, synthworld
from .errors import DimensionError, ParameterError, SchemaError


class _Outputs:
    """Tracks files written by one command so failures can clean them up."""

    def __init__(self):
        self.paths = []

    def pfm(self, path, arr):
        fileio.write_pfm(path, arr)
        self.paths.append(path)

    def ppm(self, path, img):
        fileio.write_ppm(path, img)
        self.paths.append(path)

    def text(self, path, text):
        fileio.atomic_write_bytes(path, text.encode("ascii"))
        self.paths.append(path)

    def cleanup(self):
        for p in self.paths:
            try:
                os.unlink(p)
            except OSError:
                pass


@contextmanager
def _guard():
    out = _Outputs()
    try:
        yield out
    except SystemExit:
        raise
    except BaseException as exc:
        out.cleanup()
        message = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
        click.echo(message, err=True)
        raise SystemExit(1) from exc


def _load_scene(spec: str) -> synthworld.SynthScene:
    if os.path.exists(spec):
        return read_scene(spec)
    return synthworld.preset_scene(spec)


def read_scene(path) -> synthworld.SynthScene:
    """Scene description file: seed plus primitive list (see README)."""
    import json

    with open(path, "rb") as f:
        try:
            tree = json.loads(f.read().decode("utf-8"))
        except ValueError as exc:
            raise SchemaError(f"$: cannot parse scene file: {exc}") from exc
    if not isinstance(tree, dict) or "primitives" not in tree:
        raise SchemaError("$: scene file must be an object with a 'primitives' list")
    seed = tree.get("seed", 0)
    prims = []
    for i, pj in enumerate(tree["primitives"]):
        where = f"$.primitives[{i}]"
        if not isinstance(pj, dict) or "kind" not in pj:
            raise SchemaError(f"{where}: must be an object with a 'kind'")
        tex = pj.get("texture", {})
        texture = synthworld.Texture(
            tex.get("kind", "uniform"),
            float(tex.get("frequency", 0.25)),
            tuple(tex.get("base", (0.8, 0.8, 0.8))),
            tuple(tex.get("accent", (0.2, 0.2, 0.2))),
        )
        kind = pj["kind"]
        if kind == "ground":
            prims.append(synthworld.GroundPlane(float(pj.get("height", 0.0)), texture))
        elif kind == "box":
            prims.append(synthworld.Box(tuple(pj["center"]), tuple(pj["size"]), texture))
        elif kind == "sphere":
            prims.append(synthworld.Sphere(tuple(pj["center"]), float(pj["radius"]), texture))
        else:
            raise SchemaError(f"{where}.kind: unknown primitive {kind!r}")
    return synthworld.SynthScene(tuple(prims), seed=seed)


def _depth_path(directory, cam):
    return os.path.join(directory, f"{cam}_depth.pfm")


def _load_depths(directory, rig: rigmod.CameraRig) -> list[rigmod.DepthMap]:
    return [
        rigmod.DepthMap.from_values(fileio.read_pfm(_depth_path(directory, cam.name)))
        for cam in rig.cameras
    ]


def _load_images(directory, rig: rigmod.CameraRig) -> list[np.ndarray]:
    return [
        np.asarray(fileio.read_pfm(os.path.join(directory, f"{cam.name}_image.pfm")), dtype=np.float64)
        for cam in rig.cameras
    ]


def _feature_channels(directory, cam) -> list[str]:
    names = sorted(
        n for n in os.listdir(directory)
        if n.startswith(f"{cam}_f") and n.endswith(".pfm")
    )
    if not names:
        raise FileNotFoundError(f"no feature channels '{cam}_f*.pfm' in {directory}")
    return [os.path.join(directory, n) for n in names]


def _load_features(directory, rig) -> list[attention.FeatureMap]:
    maps = []
    for cam in rig.cameras:
        channels = [fileio.read_pfm(p) for p in _feature_channels(directory, cam.name)]
        stack = np.stack(channels, axis=-1).astype(np.float64)
        maps.append(attention.FeatureMap(stack, np.isfinite(stack).all(axis=-1)))
    return maps


def _position_maps(rig, depths, stride, center) -> list[cylinder.PositionMap]:
    cyl = cylinder.Cylinder(center)
    pointmaps = [
        rigmod.backproject(d, cam.intrinsics, cam.pose, stride)
        for d, cam in zip(depths, rig.cameras)
    ]
    return cylinder.build_position_maps(pointmaps, cyl)


def _fmt(x) -> str:
    return f"{x:.6g}"


@click.group()
@click.option("--threads", default=1, show_default=True, help="Worker threads for raster compute.")
@click.pass_context
def main(ctx, threads):
    """Surround-rig depth geometry toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["threads"] = threads


@main.command()
@click.option("--scene", "scene_spec", required=True, help="Preset name or scene JSON path.")
@click.option("--rig", "rig_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_context
def render(ctx, scene_spec, rig_path, out_dir):
    """Raycast the scene from every rig camera into image + depth files."""
    with _guard() as out:
        cfg = fileio.read_rig(rig_path)
        scene = replace(_load_scene(scene_spec), rig=cfg.rig)
        bundle = synthworld.render(scene, threads=ctx.obj["threads"])
        os.makedirs(out_dir, exist_ok=True)
        for cam, image, depth in zip(cfg.rig.cameras, bundle.images, bundle.depths):
            out.pfm(os.path.join(out_dir, f"{cam.name}_image.pfm"), image.astype(np.float32))
            out.pfm(_depth_path(out_dir, cam.name),
                    np.where(depth.valid, depth.values, 0.0).astype(np.float32))
            out.ppm(os.path.join(out_dir, f"{cam.name}_preview.ppm"), image)
        click.echo(f"rendered {len(cfg.rig)} views into {out_dir}")


@main.command()
@click.option("--rig", "rig_path", required=True, type=click.Path(exists=True))
@click.option("--depth", "depth_dir", required=True, type=click.Path(exists=True))
@click.option("--stride", default=1, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def project(rig_path, depth_dir, stride, out_dir):
    """Back-project depths and write cylindrical position maps (theta, h, valid)."""
    with _guard() as out:
        cfg = fileio.read_rig(rig_path)
        depths = _load_depths(depth_dir, cfg.rig)
        posmaps = _position_maps(cfg.rig, depths, stride, cfg.cylinder.center)
        os.makedirs(out_dir, exist_ok=True)
        for cam, pm in zip(cfg.rig.cameras, posmaps):
            raster = np.stack([pm.theta, pm.h, pm.valid.astype(np.float64)], axis=-1)
            out.pfm(os.path.join(out_dir, f"{cam.name}_posmap.pfm"), raster.astype(np.float32))
        click.echo(f"wrote {len(posmaps)} position maps into {out_dir}")


@main.command()
@click.option("--rig", "rig_path", required=True, type=click.Path(exists=True))
@click.option("--depth", "depth_dir", required=True, type=click.Path(exists=True))
@click.option("--features", "feat_dir", required=True, type=click.Path(exists=True))
@click.option("--sigma", default="0.02,0.02", show_default=True,
              help="Diagonal of the geodesic covariance.")
@click.option("--tau", default=attention.DEFAULT_TAU, show_default=True)
@click.option("--normalize", is_flag=True, help="Divide attended features by the weight sum.")
@click.option("--no-similarity", is_flag=True, help="Geometric attention only (a_f = 1).")
@click.option("--all-scales", is_flag=True,
              help="Process every scale subdirectory s0/, s1/, ... of --features.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def attend(rig_path, depth_dir, feat_dir, sigma, tau, normalize, no_similarity, all_scales, out_dir):
    """Aggregate features with geodesic attention on the shared cylinder."""
    with _guard() as out:
        cfg = fileio.read_rig(rig_path)
        try:
            s_tt, s_hh = (float(x) for x in sigma.split(","))
        except ValueError as exc:
            raise ParameterError(f"--sigma expects 'a,b', got {sigma!r}") from exc
        params = attention.AttentionParams(np.diag([s_tt, s_hh]), tau, normalize, True)
        depths = _load_depths(depth_dir, cfg.rig)

        if all_scales:
            scale_dirs = sorted(
                d for d in os.listdir(feat_dir)
                if d.startswith("s") and os.path.isdir(os.path.join(feat_dir, d))
            )
            if not scale_dirs:
                raise ParameterError("--all-scales requires scale subdirectories s0/, s1/, ...")
            jobs = [(os.path.join(feat_dir, d), os.path.join(out_dir, d)) for d in scale_dirs]
        else:
            jobs = [(feat_dir, out_dir)]

        for src_dir, dst_dir in jobs:
            feats = _load_features(src_dir, cfg.rig)
            fh, fw = feats[0].shape[:2]
            dh, dw = depths[0].shape
            if dh % fh or dw % fw or dh // fh != dw // fw:
                raise DimensionError(
                    f"feature raster {fh}x{fw} is not an integer stride of depth {dh}x{dw}"
                )
            stride = dh // fh
            posmaps = _position_maps(cfg.rig, depths, stride, cfg.cylinder.center)
            attn = attention.build_sparse_attention(posmaps, feats, params,
                                                    use_similarity=not no_similarity)
            attended = attention.aggregate(feats, attn, normalize=params.normalize)
            os.makedirs(dst_dir, exist_ok=True)
            for cam, fm in zip(cfg.rig.cameras, attended):
                for c in range(fm.values.shape[2]):
                    out.pfm(os.path.join(dst_dir, f"{cam.name}_f{c:03d}.pfm"),
                            fm.values[..., c].astype(np.float32))
        click.echo(f"attended features written into {out_dir}")


@main.command()
@click.option("--rig", "rig_path", required=True, type=click.Path(exists=True))
@click.option("--depth", "depth_dir", required=True, type=click.Path(exists=True),
              help="Bundle with target depths and images.")
@click.option("--source", "source_dir", default=None, type=click.Path(exists=True),
              help="Source-frame bundle; defaults to --depth.")
@click.option("--mode", type=click.Choice(["spatial", "temporal", "spatiotemporal"]),
              default="spatial", show_default=True)
@click.option("--pose", "pose_path", default=None, type=click.Path(exists=True),
              help="JSON with the front camera motion (4x4 row-major 'matrix').")
@click.option("--alpha", default=0.85, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def warp(rig_path, depth_dir, source_dir, mode, pose_path, alpha, out_dir):
    """Inverse-warp source images into target views and report photometric loss."""
    with _guard() as out:
        cfg = fileio.read_rig(rig_path)
        rig = cfg.rig
        depths = _load_depths(depth_dir, rig)
        targets = _load_images(depth_dir, rig)
        sources = targets if source_dir is None else _load_images(source_dir, rig)

        front_motion = rigmod.Pose.identity()
        if mode in ("temporal", "spatiotemporal"):
            if pose_path is None:
                raise ParameterError(f"--mode {mode} requires --pose")
            import json

            with open(pose_path, "rb") as f:
                tree = json.loads(f.read().decode("utf-8"))
            front_motion = rigmod.Pose(np.array(tree["matrix"], dtype=np.float64).reshape(4, 4))

        if mode == "spatial":
            tasks = [(i, j, rig.relative_pose(i, j)) for i, j in metrics.adjacent_pairs(rig)]
        elif mode == "temporal":
            tasks = [
                (i, i, rigmod.compose_temporal_pose(front_motion, rig.cam_to_front(i)))
                for i in range(len(rig))
            ]
        else:
            tasks = []
            for i, j in metrics.adjacent_pairs(rig):
                temporal_j = rigmod.compose_temporal_pose(front_motion, rig.cam_to_front(j))
                tasks.append((i, j, rigmod.compose_spatiotemporal_pose(
                    temporal_j, rig.relative_pose(i, j))))

        if not tasks:
            raise ParameterError("rig yields no warp pairs for this mode")
        os.makedirs(out_dir, exist_ok=True)
        lines = []
        losses = []
        for i, j, relpose in tasks:
            warped, mask = rigmod.warp_spatial(
                depths[i], sources[j], rig.cameras[i].intrinsics, rig.cameras[j].intrinsics, relpose
            )
            loss = photometry.photometric_loss(warped, targets[i], mask, alpha)
            ni, nj = rig.cameras[i].name, rig.cameras[j].name
            stem = os.path.join(out_dir, f"{ni}_from_{nj}_{mode}")
            out.pfm(stem + ".pfm", warped.astype(np.float32))
            out.pfm(stem + "_mask.pfm", mask.astype(np.float32))
            lines.append(f"{ni}_from_{nj} {_fmt(loss)}")
            losses.append(loss)
        lines.append(f"mean {_fmt(np.mean(losses))}")
        report = "\n".join(lines) + "\n"
        out.text(os.path.join(out_dir, "report.txt"), report)
        click.echo(report, nl=False)


@main.command(name="eval")
@click.option("--rig", "rig_path", required=True, type=click.Path(exists=True))
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_dir", required=True, type=click.Path(exists=True))
@click.option("--max-depth", default=200.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def eval_cmd(rig_path, pred_dir, gt_dir, max_depth, out_path):
    """Depth metrics (overall, per view, overlap-only) plus consistency."""
    with _guard() as out:
        cfg = fileio.read_rig(rig_path)
        pred = _load_depths(pred_dir, cfg.rig)
        gt = _load_depths(gt_dir, cfg.rig)
        report = metrics.evaluate(pred, gt, cfg.rig, d_max=max_depth)

        lines = [f"n_views {len(cfg.rig)}"]

        def emit(prefix, m):
            lines.append(f"{prefix}abs_rel {_fmt(m.abs_rel)}")
            lines.append(f"{prefix}sq_rel {_fmt(m.sq_rel)}")
            lines.append(f"{prefix}rmse {_fmt(m.rmse)}")
            lines.append(f"{prefix}delta1 {_fmt(m.delta1)}")
            lines.append(f"{prefix}n_pixels {m.n_pixels}")

        emit("", report.overall)
        for cam, m in zip(cfg.rig.cameras, report.per_view):
            emit(f"{cam.name}_", m)
        if report.overlap is not None:
            emit("overlap_", report.overlap)
        if report.depth_cons is not None:
            lines.append(f"depth_cons {_fmt(report.depth_cons)}")
        lines.append(f"n_correspondences {report.n_correspondences}")
        text = "\n".join(lines) + "\n"
        out.text(out_path, text)
        click.echo(text, nl=False)


@main.command()
@click.option("--rig", "rig_path", required=True, type=click.Path(exists=True))
@click.option("--depth", "depth_dir", required=True, type=click.Path(exists=True))
@click.option("--images", "image_dir", default=None, type=click.Path(exists=True),
              help="Image bundle; defaults to --depth.")
@click.option("--width", default=2048, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def panorama(rig_path, depth_dir, image_dir, width, out_path):
    """Debug view: splat all views' RGB onto the cylinder (nearest, r z-buffer)."""
    with _guard() as out:
        cfg = fileio.read_rig(rig_path)
        rig = cfg.rig
        depths = _load_depths(depth_dir, rig)
        images = _load_images(image_dir or depth_dir, rig)

        thetas, hs, rs, colors = [], [], [], []
        for cam, depth, image in zip(rig.cameras, depths, images):
            pm = rigmod.backproject(depth, cam.intrinsics, cam.pose)
            theta, h, r = cylinder.cylinder_coords(pm.points, cfg.cylinder)
            ok = pm.valid & (r > cylinder.R_MIN)
            thetas.append(theta[ok])
            hs.append(h[ok])
            rs.append(r[ok])
            colors.append(image[ok])
        theta = np.concatenate(thetas)
        h = np.concatenate(hs)
        r = np.concatenate(rs)
        color = np.concatenate(colors, axis=0)
        if len(theta) == 0:
            raise ParameterError("no valid pixels to splat")

        h_lo, h_hi = h.min(), h.max()
        span = max(h_hi - h_lo, 1e-12)
        height = max(1, int(round(width * span / (2.0 * np.pi))))
        ix = np.minimum(((theta + np.pi) * (width / (2.0 * np.pi))).astype(np.int64), width - 1)
        iy = np.minimum(((h_hi - h) * (height / span)).astype(np.int64), height - 1)

        pano = np.zeros((height, width, 3))
        order = np.argsort(-r, kind="stable")  # nearest splat written last wins
        pano[iy[order], ix[order]] = color[order]
        out.ppm(out_path, pano)
        click.echo(f"panorama {width}x{height} written to {out_path}")


@main.command()
@click.option("--scene", "scene_spec", required=True)
@click.option("--rig", "rig_path", required=True, type=click.Path(exists=True))
@click.option("--scales", default="0.5,0.8,0.9,1.0,1.1,1.25,2.0", show_default=True)
def probe(scene_spec, rig_path, scales):
    """Spatial photometric loss with depth = s * ground truth, per scale s."""
    with _guard():
        cfg = fileio.read_rig(rig_path)
        scene = _load_scene(scene_spec)
        scale_list = [float(s) for s in scales.split(",")]
        curve = photometry.probe_depth_scale(scene, cfg.rig, scale_list)
        click.echo("scale loss")
        for s, loss in curve:
            click.echo(f"{_fmt(s)} {_fmt(loss)}")


if __name__ == "__main__":
    main()
