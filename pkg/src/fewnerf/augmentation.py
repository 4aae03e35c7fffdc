"""Augmented training inputs built from a rendered original ray.

From a render of ray r we estimate the surface point p_s = o + t_s d and
the blended normal n_hat, then construct additional inputs cast toward the
same target pixel:

* flipped reflection ray: direction d' = 2(d.n)n - d from origin
  o' = p_s - t_s d';
* hourglass: a double cone with waist at p_s directed along -n_hat whose
  base radius rho grows with the incidence angle theta between the ray and
  the normal, rho = exp(-1 / (delta * tan(theta))); the radial variance of
  its segments uses metric distances mirrored around the surface segment;
* multicast: kappa discrete rays evenly spaced (by angle) from r to its
  flip ray, all through p_s.

Inputs whose incidence angle exceeds the masking threshold psi are
dropped; degenerate rays (no surface mass) produce no augmentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Ray, angle_between, dot, normalize, reflect_flip

SURFACE_WEIGHT_FLOOR = 1e-4


@dataclass
class SurfaceEstimate:
    """Per-ray estimated surface: hit point, distance, unit normal, validity."""

    point: np.ndarray     # (..., 3)
    distance: np.ndarray  # (...)
    normal: np.ndarray    # (..., 3) unit, zero where invalid
    valid: np.ndarray     # (...) bool


def estimate_surface(render, ray: Ray, weight_floor: float = SURFACE_WEIGHT_FLOOR) -> SurfaceEstimate:
    """Surface point, distance and normalized blended normal from a render.

    Rays whose accumulated weight falls below ``weight_floor`` are flagged
    invalid ("no surface") and must be excluded from augmentation.
    """
    t_s = np.asarray(render.depth, dtype=np.float64)
    point = np.asarray(ray.origin) + t_s[..., None] * np.asarray(ray.dir)
    valid = np.asarray(render.acc) >= weight_floor
    n = normalize(render.normal)
    n = np.where(valid[..., None], n, 0.0)
    return SurfaceEstimate(point=point, distance=t_s, normal=n, valid=valid)


def front_facing(normal, direction):
    """Flip normals that face away from the incoming ray (dot(d, n) > 0)."""
    flip = (dot(direction, normal) > 0.0)[..., None]
    return np.where(flip, -np.asarray(normal), np.asarray(normal))


def incidence_angle(direction, normal):
    """Angle between the reversed ray direction and the normal, in [0, pi]."""
    return angle_between(-np.asarray(direction), normal)


def make_flip_ray(ray: Ray, point, distance, normal) -> Ray:
    """Flipped reflection ray through the surface point.

    d' = 2(d.n)n - d and o' = p_s - t_s d', so the flip ray reaches p_s at
    parameter t_s exactly; near/far/radius are copied from the original.
    At normal incidence the flip ray coincides with the original.
    """
    d_flip = reflect_flip(ray.dir, normal)
    origin = np.asarray(point) - np.asarray(distance)[..., None] * d_flip
    return Ray(origin=origin, dir=d_flip, radius=ray.radius.copy(),
               near=ray.near.copy(), far=ray.far.copy())


def rho_from_angle(theta, delta):
    """Hourglass base radius rho = exp(-1 / (delta tan(theta))) in [0, 1).

    Monotone increasing in theta on (0, pi/2), 0 at normal incidence and
    approaching 1 as theta -> pi/2.
    """
    theta = np.asarray(theta, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    tan = np.tan(theta)
    with np.errstate(divide="ignore"):
        rho = np.where(tan > 0.0, np.exp(-1.0 / np.where(tan > 0.0, delta * tan, 1.0)), 0.0)
    return rho


@dataclass
class Hourglass:
    """A double-cone augmented input with waist at the estimated surface.

    ``t_tilde`` holds the far-normalized boundary distances mirrored around
    the surface segment (used only for the radial variance); ``tvals`` are
    the original metric boundaries reused for axial moments and sample
    positions along ``dir``.  ``surface_segment`` is the 0-based index of
    the waist segment; segment radial variances are symmetric around it.
    """

    origin: np.ndarray            # (..., 3)
    dir: np.ndarray               # (..., 3) = -n_hat
    surface_point: np.ndarray     # (..., 3)
    surface_distance: np.ndarray  # (...)
    theta: np.ndarray             # (...) radians
    rho: np.ndarray               # (...) in [0, 1)
    t_tilde: np.ndarray           # (..., N+1) far-normalized mirrored boundaries
    tvals: np.ndarray             # (..., N+1) original metric boundaries
    surface_segment: np.ndarray   # (...) int

    def take(self, index) -> "Hourglass":
        return Hourglass(
            self.origin[index], self.dir[index], self.surface_point[index],
            self.surface_distance[index], self.theta[index], self.rho[index],
            self.t_tilde[index], self.tvals[index], self.surface_segment[index],
        )

    @property
    def batch_shape(self):
        return self.theta.shape


def _mirrored_boundaries(tvals: np.ndarray, segment: np.ndarray) -> np.ndarray:
    """Reflect boundary values around the surface segment.

    The waist segment s keeps the near boundary value on both of its
    boundaries (t~_s = t~_{s+1} = t_1), and boundary j takes the original
    value offset |j - s| (below) or |j - s - 1| (above) from the start.
    This makes the per-segment half-width/mid-point pairs of segments
    s - i and s + i identical, so their radial variances match exactly.
    """
    n_b = tvals.shape[-1]
    j = np.arange(n_b)
    seg = segment[..., None]
    src = np.where(j <= seg, seg - j, j - seg - 1)
    return np.take_along_axis(tvals, src, axis=-1)


def make_hourglass(ray: Ray, point, distance, normal, tvals) -> Hourglass:
    """Construct the hourglass for a ray given its estimated surface.

    ``normal`` must already face the incoming ray; incidence angles of
    90 degrees or more (grazing/backfacing) are rejected.  The mirrored
    boundaries are affinely mapped onto the ray's [near, far] span (near
    at 0, far at 1), so the first sample sits at t~_s ~= 0 and
    delta = 1 - t~_s ~= 1; this keeps rho in [0, 1) for scenes at any
    metric scale.
    """
    tvals = np.asarray(tvals, dtype=np.float64)
    distance = np.asarray(distance, dtype=np.float64)
    theta = incidence_angle(ray.dir, normal)
    if np.any(theta >= 0.5 * math.pi):
        raise ValueError("incidence angle >= 90 degrees: grazing or backfacing surface")
    d_hg = -np.asarray(normal, dtype=np.float64)
    origin = np.asarray(point) - distance[..., None] * d_hg

    n_segments = tvals.shape[-1] - 1
    # locate the segment containing t_s (clamped to valid segments)
    seg = np.sum(tvals[..., :-1] <= distance[..., None], axis=-1) - 1
    seg = np.clip(seg, 0, n_segments - 1)

    near = np.asarray(ray.near, dtype=np.float64)
    far = np.asarray(ray.far, dtype=np.float64)
    span = far - near
    t_tilde = (_mirrored_boundaries(tvals, seg) - near[..., None]) / span[..., None]
    delta = 1.0 - (tvals[..., 0] - near) / span
    rho = rho_from_angle(theta, delta)

    return Hourglass(origin=origin, dir=d_hg, surface_point=np.asarray(point),
                     surface_distance=distance, theta=theta, rho=rho,
                     t_tilde=t_tilde, tvals=tvals, surface_segment=seg)


def mask_by_angle(theta, psi: float):
    """Keep an augmented input iff its incidence angle theta <= psi (radians)."""
    theta = np.asarray(theta)
    if np.any(theta < 0) or np.any(theta > math.pi + 1e-12):
        raise ValueError("theta must lie in [0, pi]")
    return theta <= psi


def make_multicast(ray: Ray, flip: Ray, kappa: int, point=None, distance=None):
    """kappa rays through the surface point, evenly spaced from r to its flip.

    Directions interpolate the angle between the original direction and the
    flip direction in equal steps, endpoints included (the first ray is
    parallel to the original, the last IS the flip ray); kappa=1 returns
    exactly [flip].  Origins sit at distance t_s before the surface point.
    Pass ``point``/``distance`` when available; otherwise they are
    recovered from the two rays' intersection.
    """
    if kappa == 0:
        return []
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if kappa == 1:
        return [flip]
    d0 = np.asarray(ray.dir, dtype=np.float64)
    d1 = np.asarray(flip.dir, dtype=np.float64)
    if distance is None:
        diff_o = np.asarray(ray.origin) - np.asarray(flip.origin)
        diff_d = d1 - d0
        denom = np.maximum(dot(diff_d, diff_d), 1e-24)
        distance = dot(diff_o, diff_d) / denom
    distance = np.asarray(distance, dtype=np.float64)
    if point is None:
        point = np.asarray(ray.origin) + distance[..., None] * d0

    omega = angle_between(d0, d1)
    # orthonormal frame in the plane spanned by the two directions
    perp = d1 - dot(d1, d0)[..., None] * d0
    perp_norm = np.linalg.norm(perp, axis=-1, keepdims=True)
    degenerate = perp_norm[..., 0] < 1e-9
    perp = np.where(degenerate[..., None], 0.0, perp / np.maximum(perp_norm, 1e-30))

    rays = []
    for k in range(kappa):
        f = k / (kappa - 1)
        ang = f * omega
        d_k = np.cos(ang)[..., None] * d0 + np.sin(ang)[..., None] * perp
        d_k = np.where(degenerate[..., None], d1, d_k)
        d_k = normalize(d_k)
        o_k = np.asarray(point) - distance[..., None] * d_k
        rays.append(Ray(origin=o_k, dir=d_k, radius=ray.radius.copy(),
                        near=ray.near.copy(), far=ray.far.copy()))
    return rays


def jitter_direction(direction, sigma: float, rng: np.random.Generator):
    """Gaussian viewing-direction jitter: normalize(d + eps), eps ~ N(0, sigma^2 I).

    Applied only to the direction fed to the direction encoder, never to
    the ray geometry.  sigma = 0 returns the input unchanged.
    """
    if sigma < 0:
        raise ValueError("jitter sigma must be >= 0")
    direction = np.asarray(direction, dtype=np.float64)
    if sigma == 0.0:
        return direction
    return normalize(direction + rng.normal(0.0, sigma, size=direction.shape))


@dataclass
class AugmentedBatch:
    """Augmented inputs plus the original pixels' supervision targets.

    ``inputs`` is a Ray batch (flip/multicast) or an Hourglass batch.
    Entries with ``keep == False`` were masked by the angle threshold and
    must contribute zero to every loss.  Targets are copied from the
    originating rays' pixels: augmented inputs are supervised toward the
    identical target pixel.
    """

    kind: str                    # "flip" | "hourglass" | "multicast"
    inputs: object
    target_color: np.ndarray     # (M, 3)
    target_luminance: np.ndarray # (M,)
    keep: np.ndarray             # (M,) bool
    source_index: np.ndarray     # (M,) index of the originating ray in its batch
