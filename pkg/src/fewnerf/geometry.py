"""Vector math, pinhole cameras, pixel-to-ray generation and reflection geometry.

All 3-vectors are numpy arrays with shape ``(..., 3)``; every function
broadcasts over leading batch dimensions.  Directions are unit vectors
(squared norm within ``UNIT_SQ_TOL`` of 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# A direction counts as unit when |dot(d, d) - 1| <= UNIT_SQ_TOL.
UNIT_SQ_TOL = 1e-9

# Base radius of a pixel cone per unit distance: the pixel footprint in
# world units at focal distance 1, divided by sqrt(12) (variance matching
# of a square pixel to an isotropic Gaussian).
PIXEL_RADIUS_SCALE = 1.0 / math.sqrt(12.0)


def dot(a, b):
    """Batched dot product over the last axis."""
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def norm(v):
    return np.linalg.norm(np.asarray(v), axis=-1)


def normalize(v, eps: float = 1e-12):
    """Rescale to unit length. Zero vectors are left ~zero (norm floored at eps)."""
    v = np.asarray(v, dtype=np.float64)
    n = np.maximum(norm(v), eps)
    return v / n[..., None]


def is_unit(v) -> bool:
    """True when every vector in the batch has squared norm within tolerance of 1."""
    sq = dot(v, v)
    return bool(np.all(np.abs(sq - 1.0) <= UNIT_SQ_TOL))


def require_unit(v, name: str = "direction"):
    if not is_unit(v):
        raise ValueError(f"{name} must be a unit vector (|v|^2 within {UNIT_SQ_TOL} of 1)")


def reflect_flip(direction, normal):
    """Flipped reflection d' = 2(d.n)n - d.

    Both inputs must be unit.  The output is unit by construction; at
    normal incidence (d = -n) the result equals d, and for d orthogonal
    to n it reduces to -d.
    """
    require_unit(direction, "direction")
    require_unit(normal, "normal")
    d = np.asarray(direction, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    return 2.0 * dot(d, n)[..., None] * n - d


def angle_between(a, b):
    """Angle in [0, pi] between unit vectors; arccos argument clamped to [-1, 1]."""
    require_unit(a, "a")
    require_unit(b, "b")
    return np.arccos(np.clip(dot(a, b), -1.0, 1.0))


@dataclass
class Camera:
    """Pinhole camera, right-handed, looking along -z in its own frame.

    ``camera_to_world`` is a 3x4 matrix [R | t] whose rotation block must be
    orthonormal within 1e-6.  ``focal`` is in pixels; ``near``/``far`` are
    scene-unit bounds used for sampling rays from this camera.
    """

    camera_to_world: np.ndarray
    width: int
    height: int
    focal: float
    near: float
    far: float

    def __post_init__(self):
        self.camera_to_world = np.asarray(self.camera_to_world, dtype=np.float64)
        if self.camera_to_world.shape != (3, 4):
            raise ValueError(f"camera_to_world must be 3x4, got {self.camera_to_world.shape}")
        rot = self.camera_to_world[:, :3]
        if np.max(np.abs(rot @ rot.T - np.eye(3))) > 1e-6:
            raise ValueError("rotation block of camera_to_world is not orthonormal")
        if not (0.0 < self.near < self.far):
            raise ValueError(f"need 0 < near < far, got near={self.near} far={self.far}")
        if self.width <= 0 or self.height <= 0 or self.focal <= 0:
            raise ValueError("width, height and focal must be positive")


@dataclass
class Ray:
    """One ray or a batch of rays: origin + t * dir for t in [near, far].

    ``radius`` is the pixel-footprint base radius (scene units per unit t)
    used for cone featurization.  All fields broadcast over leading batch
    dimensions.
    """

    origin: np.ndarray
    dir: np.ndarray
    radius: np.ndarray
    near: np.ndarray
    far: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.dir = np.asarray(self.dir, dtype=np.float64)
        self.radius = np.asarray(self.radius, dtype=np.float64)
        self.near = np.asarray(self.near, dtype=np.float64)
        self.far = np.asarray(self.far, dtype=np.float64)
        require_unit(self.dir, "ray dir")
        if np.any(self.radius <= 0):
            raise ValueError("ray radius must be > 0")
        if np.any(self.near >= self.far):
            raise ValueError("ray near must be < far")

    @property
    def batch_shape(self):
        return self.dir.shape[:-1]

    def take(self, index) -> "Ray":
        """Select a sub-batch (boolean mask or integer index array)."""
        origin = np.broadcast_to(self.origin, self.dir.shape)
        radius = np.broadcast_to(self.radius, self.batch_shape)
        near = np.broadcast_to(self.near, self.batch_shape)
        far = np.broadcast_to(self.far, self.batch_shape)
        return Ray(origin[index], self.dir[index], radius[index], near[index], far[index])


def pixel_to_ray(cam: Camera, px, py) -> Ray:
    """Ray through the center of pixel (px, py); px/py may be arrays.

    Out-of-range pixel coordinates raise ValueError.  All rays of one
    camera share the exact same origin.
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    if np.any(px < 0) or np.any(px >= cam.width) or np.any(py < 0) or np.any(py >= cam.height):
        raise ValueError(
            f"pixel out of range for {cam.width}x{cam.height} image: px={px}, py={py}"
        )
    u = px + 0.5 - 0.5 * cam.width
    v = py + 0.5 - 0.5 * cam.height
    d_cam = np.stack(
        [u / cam.focal, -v / cam.focal, -np.ones_like(u)], axis=-1
    )
    rot = cam.camera_to_world[:, :3]
    origin = cam.camera_to_world[:, 3]
    d_world = normalize(d_cam @ rot.T)
    batch = d_world.shape[:-1]
    radius = PIXEL_RADIUS_SCALE / cam.focal
    return Ray(
        origin=np.broadcast_to(origin, batch + (3,)).copy(),
        dir=d_world,
        radius=np.full(batch, radius),
        near=np.full(batch, cam.near),
        far=np.full(batch, cam.far),
    )


def camera_rays(cam: Camera) -> Ray:
    """Rays through every pixel center, flattened in row-major (y, x) order."""
    ys, xs = np.meshgrid(np.arange(cam.height), np.arange(cam.width), indexing="ij")
    return pixel_to_ray(cam, xs.ravel(), ys.ravel())


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """3x4 camera-to-world matrix for a camera at ``eye`` looking at ``target``.

    The camera z axis points away from the target (the camera looks along
    -z), matching the synthetic-dataset convention.
    """
    eye = np.asarray(eye, dtype=np.float64)
    z_axis = normalize(eye - np.asarray(target, dtype=np.float64))
    x_axis = np.cross(np.asarray(up, dtype=np.float64), z_axis)
    if norm(x_axis) < 1e-8:
        # eye is along the up axis; pick an arbitrary perpendicular right vector
        x_axis = np.cross(np.array([0.0, 1.0, 0.0]), z_axis)
    x_axis = normalize(x_axis)
    y_axis = np.cross(z_axis, x_axis)
    return np.stack([x_axis, y_axis, z_axis, eye], axis=1)
