"""Oracle synthetic scenes, the synthetic-camera dataset format, and image I/O.

The oracle renderer is a closed-form Lambertian ray tracer over spheres
and planes; its shading has no view term, so the luminance of a surface
point is identical from every camera, which is the ground-truth property
the luminance-consistency regularizer relies on.  Rendered images are
stored gamma-compressed (power 1/2.2) like standard datasets.

Datasets round-trip through the public synthetic format:
``transforms_{split}.json`` with ``camera_angle_x`` and per-frame
``transform_matrix``; RGBA PNGs whose alpha channel is the foreground
mask.  Depth and normal ground truth are written as sidecar PNGs.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError
from .geometry import Camera, Ray, camera_rays, look_at, normalize
from .losses import GAMMA

DEPTH_SENTINEL = np.inf  # in-memory sentinel for rays that miss everything


@dataclass
class Sphere:
    """A Lambertian sphere, optionally with a two-tone checker albedo.

    With ``checker_bands`` set, the albedo alternates between ``albedo``
    and ``albedo2`` on a longitude/latitude checkerboard with that many
    bands, giving the scene analytic high-frequency texture.
    """

    center: np.ndarray
    radius: float
    albedo: np.ndarray
    albedo2: np.ndarray | None = None
    checker_bands: int | None = None

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        self.albedo = np.asarray(self.albedo, dtype=np.float64)
        if self.albedo2 is not None:
            self.albedo2 = np.asarray(self.albedo2, dtype=np.float64)
        if self.checker_bands is not None and (self.albedo2 is None or self.checker_bands < 1):
            raise ValueError("checker texture needs albedo2 and checker_bands >= 1")

    def albedo_at(self, points: np.ndarray) -> np.ndarray:
        """Albedo at surface points (analytic texture lookup)."""
        if self.checker_bands is None:
            return np.broadcast_to(self.albedo, points.shape).copy()
        rel = (points - self.center) / self.radius
        lon = np.arctan2(rel[..., 1], rel[..., 0])          # [-pi, pi]
        lat = np.arcsin(np.clip(rel[..., 2], -1.0, 1.0))    # [-pi/2, pi/2]
        k = self.checker_bands
        cell = (np.floor((lon + math.pi) / (2.0 * math.pi) * 2 * k)
                + np.floor((lat + 0.5 * math.pi) / math.pi * k))
        checker = (cell.astype(np.int64) % 2).astype(bool)
        return np.where(checker[..., None], self.albedo2, self.albedo)


@dataclass
class Plane:
    point: np.ndarray
    normal: np.ndarray
    albedo: np.ndarray

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=np.float64)
        self.normal = normalize(np.asarray(self.normal, dtype=np.float64))
        self.albedo = np.asarray(self.albedo, dtype=np.float64)


@dataclass
class OracleScene:
    """Analytic scene: Lambertian primitives, one directional light, ambient."""

    spheres: list = field(default_factory=list)
    planes: list = field(default_factory=list)
    light_direction: np.ndarray = (0.3, 0.5, 0.8)   # unit vector toward the light
    light_intensity: float = 0.8
    ambient: float = 0.15
    background: np.ndarray = (1.0, 1.0, 1.0)

    def __post_init__(self):
        self.light_direction = normalize(np.asarray(self.light_direction, dtype=np.float64))
        self.background = np.asarray(self.background, dtype=np.float64)
        if self.light_intensity < 0 or self.ambient < 0:
            raise ValueError("light intensity and ambient must be nonnegative")
        for s in self.spheres:
            if np.any(s.albedo < 0) or np.any(s.albedo > 1):
                raise ValueError("albedo channels must lie in [0, 1]")
            if s.albedo2 is not None and (np.any(s.albedo2 < 0) or np.any(s.albedo2 > 1)):
                raise ValueError("albedo channels must lie in [0, 1]")
        for p in self.planes:
            if np.any(p.albedo < 0) or np.any(p.albedo > 1):
                raise ValueError("albedo channels must lie in [0, 1]")

    @staticmethod
    def from_dict(spec: dict) -> "OracleScene":
        return OracleScene(
            spheres=[Sphere(s["center"], s["radius"], s["albedo"],
                            albedo2=s.get("albedo2"),
                            checker_bands=s.get("checker_bands"))
                     for s in spec.get("spheres", [])],
            planes=[Plane(p["point"], p["normal"], p["albedo"])
                    for p in spec.get("planes", [])],
            light_direction=spec.get("light", {}).get("direction", (0.3, 0.5, 0.8)),
            light_intensity=spec.get("light", {}).get("intensity", 0.8),
            ambient=spec.get("ambient", 0.15),
            background=spec.get("background", (1.0, 1.0, 1.0)),
        )


def intersect(scene: OracleScene, origins, dirs, t_min: float = 1e-9):
    """Nearest hit of each ray against all primitives.

    Returns (t, normal, albedo, hit); ``t`` is DEPTH_SENTINEL (inf) where
    nothing is hit, and normals face the incoming ray.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    n_rays = dirs.shape[0]
    best_t = np.full(n_rays, DEPTH_SENTINEL)
    best_n = np.zeros((n_rays, 3))
    best_a = np.zeros((n_rays, 3))

    for sph in scene.spheres:
        oc = origins - sph.center
        b = np.sum(oc * dirs, axis=-1)
        c = np.sum(oc * oc, axis=-1) - sph.radius**2
        disc = b * b - c
        ok = disc >= 0.0
        sqrt_disc = np.sqrt(np.where(ok, disc, 0.0))
        t0 = -b - sqrt_disc
        t1 = -b + sqrt_disc
        t = np.where(t0 > t_min, t0, t1)
        ok &= t > t_min
        closer = ok & (t < best_t)
        if np.any(closer):
            pts = origins[closer] + t[closer, None] * dirs[closer]
            best_t[closer] = t[closer]
            best_n[closer] = (pts - sph.center) / sph.radius
            best_a[closer] = sph.albedo_at(pts)

    for pl in scene.planes:
        denom = dirs @ pl.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((pl.point - origins) @ pl.normal) / denom
        ok = (np.abs(denom) > 1e-12) & (t > t_min)
        closer = ok & (t < best_t)
        if np.any(closer):
            best_t[closer] = t[closer]
            best_n[closer] = pl.normal
            best_a[closer] = pl.albedo

    hit = np.isfinite(best_t)
    # orient normals toward the viewer
    flip = np.sum(best_n * dirs, axis=-1) > 0
    best_n[flip] = -best_n[flip]
    return best_t, best_n, best_a, hit


def shade(scene: OracleScene, normal, albedo):
    """Lambertian shading: clamp(albedo * max(0, n.l) * intensity + ambient).

    Purely a function of the surface point; no view dependence.
    """
    lambert = np.maximum(np.sum(normal * scene.light_direction, axis=-1), 0.0)
    color = albedo * (lambert * scene.light_intensity)[..., None] + scene.ambient
    return np.clip(color, 0.0, 1.0)


def render_oracle(scene: OracleScene, cam: Camera):
    """Ray-trace a camera view; returns (image, depth, normals, mask).

    The image is gamma-compressed; depth is metric distance along unit ray
    directions with inf where nothing is hit; the mask is the exact
    hit/miss foreground mask.
    """
    rays = camera_rays(cam)
    t, n, a, hit = intersect(scene, rays.origin, rays.dir)
    linear = np.where(hit[:, None], shade(scene, n, a), scene.background)
    image = np.clip(linear, 0.0, 1.0) ** (1.0 / GAMMA)
    shape = (cam.height, cam.width)
    return (
        image.reshape(shape + (3,)),
        t.reshape(shape),
        n.reshape(shape + (3,)),
        hit.reshape(shape),
    )


@dataclass
class ViewSet:
    """Loaded views: per-view cameras, images in [0,1], masks, optional GT maps."""

    cameras: list
    images: np.ndarray             # (V, H, W, 3)
    masks: np.ndarray              # (V, H, W) bool
    depths: np.ndarray | None = None
    normals: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.cameras)


# --------------------------------------------------------------------------
# PNG I/O


def write_image(path, buffer, bit_depth: int = 8) -> None:
    """Lossless PNG write of a float buffer in [0, 1], round-half-up quantized.

    2-D buffers become grayscale (8- or 16-bit); (H, W, 3)/(H, W, 4) become
    8-bit RGB/RGBA.
    """
    buf = np.asarray(buffer, dtype=np.float64)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if bit_depth == 8:
        q = np.clip(np.floor(buf * 255.0 + 0.5), 0, 255).astype(np.uint8)
    elif bit_depth == 16:
        q = np.clip(np.floor(buf * 65535.0 + 0.5), 0, 65535).astype(np.uint16)
    else:
        raise ValueError("bit_depth must be 8 or 16")
    if buf.ndim == 2:
        img = Image.fromarray(q)  # uint8 -> "L", uint16 -> "I;16"
    elif buf.ndim == 3 and buf.shape[2] in (3, 4) and bit_depth == 8:
        img = Image.fromarray(q, mode="RGB" if buf.shape[2] == 3 else "RGBA")
    else:
        raise ValueError(f"unsupported buffer shape {buf.shape} at {bit_depth}-bit")
    try:
        img.save(path, format="PNG")
    except OSError as exc:
        raise DataError(f"cannot write image {path}: {exc}") from exc


def read_image(path) -> np.ndarray:
    """Read a PNG written by :func:`write_image` back to floats in [0, 1]."""
    try:
        with Image.open(path) as img:
            arr = np.asarray(img)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    if arr.dtype in (np.uint16, np.int32):
        return arr.astype(np.float64) / 65535.0
    raise DataError(f"{path}: unsupported PNG sample type {arr.dtype}")


# --------------------------------------------------------------------------
# Synthetic-camera dataset format


def focal_from_angle(width: int, camera_angle_x: float) -> float:
    return 0.5 * width / math.tan(0.5 * camera_angle_x)


def export_views(scene: OracleScene, cameras: list, out_dir, split: str,
                 near: float, far: float) -> None:
    """Render and write one split: transforms JSON, RGBA images, GT sidecars."""
    out_dir = Path(out_dir)
    img_dir = out_dir / split
    img_dir.mkdir(parents=True, exist_ok=True)
    cam0 = cameras[0] if cameras else None
    frames = []
    for i, cam in enumerate(cameras):
        image, depth, normal, mask = render_oracle(scene, cam)
        rgba = np.concatenate([image, mask[..., None].astype(np.float64)], axis=-1)
        stem = f"r_{i}"
        write_image(img_dir / f"{stem}.png", rgba)
        depth_q = np.where(np.isfinite(depth), depth / far, 0.0)  # 0 = invalid
        write_image(img_dir / f"{stem}_depth.png", np.clip(depth_q, 0.0, 1.0), bit_depth=16)
        write_image(img_dir / f"{stem}_normal.png", 0.5 * (normal + 1.0))
        frames.append({
            "file_path": f"./{split}/{stem}",
            "transform_matrix": _c2w_4x4(cam).tolist(),
        })
    meta = {
        "camera_angle_x": 2.0 * math.atan(0.5 * cam0.width / cam0.focal) if cam0 else 0.0,
        "frames": frames,
        "near": near,
        "far": far,
        "width": cam0.width if cam0 else 0,
        "height": cam0.height if cam0 else 0,
        "depth_scale": far,
    }
    with open(out_dir / f"transforms_{split}.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def _c2w_4x4(cam: Camera) -> np.ndarray:
    m = np.eye(4)
    m[:3, :] = cam.camera_to_world
    return m


def sphere_poses(n_views: int, radius: float, elevation_deg: float = 30.0,
                 azimuth_offset_deg: float = 0.0) -> list:
    """Camera-to-world matrices on a sphere of given radius, looking at the origin."""
    poses = []
    elev = math.radians(elevation_deg)
    for i in range(n_views):
        az = math.radians(azimuth_offset_deg) + 2.0 * math.pi * i / max(n_views, 1)
        eye = radius * np.array([
            math.cos(elev) * math.cos(az),
            math.cos(elev) * math.sin(az),
            math.sin(elev),
        ])
        poses.append(look_at(eye, np.zeros(3)))
    return poses


def export_oracle_dataset(scene: OracleScene, out_dir, n_train: int, n_test: int,
                          resolution: int, camera_radius: float, near: float,
                          far: float, seed: int = 0, fov_deg: float = 45.0) -> None:
    """Generate a complete train/test dataset directory for an oracle scene.

    Train poses split across two elevation rings (18 and 48 degrees) so a
    handful of views still spans elevation; test poses sit on a middle
    ring (33 degrees) at offset azimuths, held out from training.  The
    output is fully determined by the arguments.
    """
    focal = 0.5 * resolution / math.tan(0.5 * math.radians(fov_deg))

    def cams(poses):
        return [Camera(p, resolution, resolution, focal, near, far) for p in poses]

    rng = np.random.default_rng(seed)
    base_az = float(rng.uniform(0.0, 360.0 / max(n_train, 1)))
    n_low = (n_train + 1) // 2
    train_poses = (sphere_poses(n_low, camera_radius, 18.0, base_az)
                   + sphere_poses(n_train - n_low, camera_radius, 48.0, base_az + 90.0))
    test_poses = sphere_poses(n_test, camera_radius, 33.0, base_az + 27.0)
    export_views(scene, cams(train_poses), out_dir, "train", near, far)
    export_views(scene, cams(test_poses), out_dir, "test", near, far)


def load_nerf_synthetic(dataset_dir, split: str = "train", max_views: int | None = None,
                        near: float | None = None, far: float | None = None) -> ViewSet:
    """Load a synthetic-format dataset split.

    Cameras are rebuilt from ``camera_angle_x`` and the per-frame
    ``transform_matrix``; pixel values are normalized to [0, 1]; the alpha
    channel (when present) becomes the binary foreground mask.
    ``max_views`` keeps only the first k frames.  near/far fall back to
    values stored in the transforms file, then to the 2/6 convention.
    """
    dataset_dir = Path(dataset_dir)
    meta_path = dataset_dir / f"transforms_{split}.json"
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot open {meta_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{meta_path}: malformed JSON: {exc}") from exc
    if "camera_angle_x" not in meta or "frames" not in meta:
        raise DataError(f"{meta_path}: missing camera_angle_x or frames")

    near = near if near is not None else float(meta.get("near", 2.0))
    far = far if far is not None else float(meta.get("far", 6.0))
    frames = meta["frames"]
    if max_views is not None:
        frames = frames[:max_views]
    if not frames:
        warnings.warn(f"{meta_path}: empty frames list", stacklevel=2)
        return ViewSet(cameras=[], images=np.zeros((0, 0, 0, 3)),
                       masks=np.zeros((0, 0, 0), dtype=bool))

    cameras, images, masks, depths, normals = [], [], [], [], []
    depth_scale = float(meta.get("depth_scale", far))
    for frame in frames:
        rel = frame["file_path"]
        img_path = dataset_dir / (rel if rel.endswith(".png") else rel + ".png")
        if not img_path.exists() and rel.startswith("./"):
            img_path = dataset_dir / (rel[2:] + ".png")
        if not img_path.exists():
            raise DataError(f"missing image file for frame: {img_path}")
        arr = read_image(img_path)
        if arr.ndim == 2:
            arr = np.repeat(arr[..., None], 3, axis=-1)
        if arr.shape[-1] == 4:
            mask = arr[..., 3] > 0.5
            rgb = arr[..., :3]
        else:
            mask = np.ones(arr.shape[:2], dtype=bool)
            rgb = arr
        h, w = rgb.shape[:2]
        focal = focal_from_angle(w, float(meta["camera_angle_x"]))
        c2w = np.asarray(frame["transform_matrix"], dtype=np.float64)[:3, :]
        cameras.append(Camera(c2w, w, h, focal, near, far))
        images.append(rgb)
        masks.append(mask)
        stem = img_path.with_suffix("")
        depth_path = Path(str(stem) + "_depth.png")
        normal_path = Path(str(stem) + "_normal.png")
        if depth_path.exists():
            d = read_image(depth_path) * depth_scale
            depths.append(np.where(d > 0.0, d, DEPTH_SENTINEL))
        if normal_path.exists():
            normals.append(read_image(normal_path) * 2.0 - 1.0)

    return ViewSet(
        cameras=cameras,
        images=np.stack(images),
        masks=np.stack(masks),
        depths=np.stack(depths) if len(depths) == len(cameras) else None,
        normals=np.stack(normals) if len(normals) == len(cameras) else None,
    )


def load_scene_file(path) -> tuple:
    """Parse an oracle scene JSON file; returns (scene, view-params dict)."""
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot open scene file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed scene JSON: {exc}") from exc
    scene = OracleScene.from_dict(spec)
    views = {
        "camera_radius": spec.get("camera_radius", 3.5),
        "near": spec.get("near", 1.5),
        "far": spec.get("far", 5.5),
        "fov_deg": spec.get("fov_deg", 45.0),
    }
    return scene, views
