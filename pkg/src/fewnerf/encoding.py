"""Positional encoding, integrated positional encoding, and frustum moments.

A conical-frustum segment of a cast cone is approximated by a multivariate
Gaussian with an axial variance (along the ray) and a radial variance
(identical on the two perpendicular axes).  The integrated positional
encoding of such a Gaussian is the plain sin/cos encoding of its mean,
attenuated per frequency by exp(-0.5 * 4^l * projected variance); high
frequencies are suppressed as the Gaussian widens.

Double-cone (hourglass) segments reuse the axial moments of the original
metric distances and get their radial variance from reparameterized,
waist-mirrored distances; see :func:`hourglass_frustum_gaussians`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .geometry import Ray

if TYPE_CHECKING:  # pragma: no cover
    from .augmentation import Hourglass


@dataclass
class EncodingBasis:
    """Axis-aligned power-of-two frequency bank: 2^0 ... 2^(L-1) per axis."""

    num_freqs: int

    def __post_init__(self):
        if self.num_freqs < 1:
            raise ValueError("num_freqs must be >= 1")

    @property
    def frequencies(self) -> np.ndarray:
        return 2.0 ** np.arange(self.num_freqs)

    @property
    def feature_dim(self) -> int:
        return 6 * self.num_freqs


@dataclass
class FrustumGaussian:
    """Gaussian featurization of one (or a batch of) conical-frustum segments.

    ``axial_var`` is the variance along ``axis``; ``radial_var`` the variance
    on each perpendicular axis.  Both must be nonnegative.
    """

    mean: np.ndarray        # (..., 3)
    axial_var: np.ndarray   # (...)
    radial_var: np.ndarray  # (...)
    axis: np.ndarray        # (..., 3) unit

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.axial_var = np.asarray(self.axial_var, dtype=np.float64)
        self.radial_var = np.asarray(self.radial_var, dtype=np.float64)
        self.axis = np.asarray(self.axis, dtype=np.float64)
        if np.any(self.axial_var < 0) or np.any(self.radial_var < 0):
            raise ValueError("frustum variances must be nonnegative")

    def diag_cov(self) -> np.ndarray:
        """Per-axis variances diag(Sigma), shape (..., 3).

        Sigma = axial_var * d d^T + radial_var * (I - d d^T) for unit axis d,
        so diag_j = axial_var * d_j^2 + radial_var * (1 - d_j^2).
        """
        d_sq = self.axis**2
        return self.axial_var[..., None] * d_sq + self.radial_var[..., None] * (1.0 - d_sq)


def pe(x, basis: EncodingBasis, dtype=np.float64) -> np.ndarray:
    """Plain positional encoding: interleaved sin/cos at power-of-two frequencies.

    Output length is 6L, ordered frequency-major then axis, with sin/cos
    adjacent: [sin(2^0 x), cos(2^0 x), sin(2^0 y), cos(2^0 y), ...].
    ``dtype`` sets the working precision of the trig evaluation.
    """
    x = np.asarray(x, dtype=np.float64)
    scaled = (x[..., None, :] * basis.frequencies[:, None]).astype(dtype)  # (..., L, 3)
    feats = np.empty(scaled.shape + (2,), dtype=dtype)
    np.sin(scaled, out=feats[..., 0])
    np.cos(scaled, out=feats[..., 1])
    return feats.reshape(x.shape[:-1] + (basis.feature_dim,))


def ipe(g: FrustumGaussian, basis: EncodingBasis, dtype=np.float64) -> np.ndarray:
    """Integrated positional encoding of a frustum Gaussian.

    Each frequency-l feature of pe(mean) is multiplied by
    exp(-0.5 * 4^l * var_axis), with var_axis from diag(P Sigma P^T).
    With zero variances this reduces exactly to pe(mean).
    """
    var3 = g.diag_cov()                                       # (..., 3)
    freqs = basis.frequencies
    scaled = (g.mean[..., None, :] * freqs[:, None]).astype(dtype)  # (..., L, 3)
    atten = (var3[..., None, :] * (freqs**2)[:, None]).astype(dtype)
    atten *= -0.5
    np.exp(atten, out=atten)
    feats = np.empty(scaled.shape + (2,), dtype=dtype)
    np.sin(scaled, out=feats[..., 0])
    np.cos(scaled, out=feats[..., 1])
    feats[..., 0] *= atten
    feats[..., 1] *= atten
    return feats.reshape(g.mean.shape[:-1] + (basis.feature_dim,))


def _segment_moments(t0, t1):
    """Closed-form moments of distance t uniformly weighted over a cone frustum.

    Returns (t_mean, t_var, radial_shape) where radial_shape is the
    radial variance for a unit base radius:

        t_mean = t_mu + 2 t_mu t_d^2 / (3 t_mu^2 + t_d^2)
        t_var  = t_d^2/3 - 4 t_d^4 (12 t_mu^2 - t_d^2) / (15 (3 t_mu^2 + t_d^2)^2)
        radial = t_mu^2/4 + 5 t_d^2/12 - 4 t_d^4 / (15 (3 t_mu^2 + t_d^2))

    with t_mu = (t0+t1)/2, t_d = (t1-t0)/2.
    """
    t_mu = 0.5 * (t0 + t1)
    t_d = 0.5 * (t1 - t0)
    mu_sq = t_mu**2
    d_sq = t_d**2
    denom = 3.0 * mu_sq + d_sq
    safe = np.where(denom > 0, denom, 1.0)
    t_mean = t_mu + 2.0 * t_mu * d_sq / safe
    t_var = d_sq / 3.0 - (4.0 / 15.0) * (d_sq**2 * (12.0 * mu_sq - d_sq)) / safe**2
    radial = mu_sq / 4.0 + 5.0 * d_sq / 12.0 - (4.0 / 15.0) * d_sq**2 / safe
    # degenerate zero-length segment at the origin has no extent at all
    zero = (denom <= 0)
    if np.any(zero):
        t_mean = np.where(zero, t_mu, t_mean)
        t_var = np.where(zero, 0.0, t_var)
        radial = np.where(zero, 0.0, radial)
    return t_mean, np.maximum(t_var, 0.0), np.maximum(radial, 0.0)


def _align(arr, extra_dims: int):
    """Append ``extra_dims`` singleton axes so ray fields broadcast over segments."""
    return np.asarray(arr).reshape(np.asarray(arr).shape + (1,) * extra_dims)


def cone_frustum_moments(ray: Ray, t0, t1) -> FrustumGaussian:
    """Gaussian moments of the cone segment between distances t0 and t1.

    t0/t1 may carry extra trailing dimensions relative to the ray batch
    (e.g. a per-ray segment axis); each pair must satisfy
    near <= t0 < t1 <= far.  The mean includes the first-moment correction
    along the ray; the radial variance scales with ray.radius squared.
    """
    t0 = np.asarray(t0, dtype=np.float64)
    t1 = np.asarray(t1, dtype=np.float64)
    if np.any(t0 >= t1):
        raise ValueError("segment bounds must satisfy t0 < t1")
    extra = max(t0.ndim, t1.ndim) - np.asarray(ray.near).ndim
    if extra < 0:
        raise ValueError("t bounds have fewer dims than the ray batch")
    near = _align(ray.near, extra)
    far = _align(ray.far, extra)
    slack = 1e-9
    if np.any(t0 < near - slack):
        raise ValueError("t0 below ray near bound")
    if np.any(t1 > far + slack):
        raise ValueError("t1 above ray far bound")
    t_mean, t_var, radial = _segment_moments(t0, t1)
    direction = np.asarray(ray.dir).reshape(
        np.asarray(ray.dir).shape[:-1] + (1,) * extra + (3,)
    )
    origin = np.asarray(ray.origin).reshape(
        np.asarray(ray.origin).shape[:-1] + (1,) * extra + (3,)
    )
    radius = _align(ray.radius, extra)
    mean = origin + t_mean[..., None] * direction
    axis = np.broadcast_to(direction, mean.shape)
    return FrustumGaussian(mean, t_var, radius**2 * radial, axis)


def cone_frustum_gaussians(ray: Ray, tvals: np.ndarray) -> FrustumGaussian:
    """Per-segment Gaussians for sorted boundaries tvals (..., N+1) along a ray."""
    return cone_frustum_moments(ray, tvals[..., :-1], tvals[..., 1:])


def hourglass_frustum_gaussians(hg: "Hourglass") -> FrustumGaussian:
    """Per-segment Gaussians for every segment of an hourglass.

    Axial mean and variance come from the original metric boundaries
    (unchanged); the radial variance applies the frustum formula to the
    mirrored, far-normalized boundaries t~ with the hourglass base radius
    rho~ in place of the pixel radius.
    """
    t0 = hg.tvals[..., :-1]
    t1 = hg.tvals[..., 1:]
    t_mean, t_var, _ = _segment_moments(t0, t1)
    mean = np.asarray(hg.origin)[..., None, :] + t_mean[..., None] * np.asarray(hg.dir)[..., None, :]
    axis = np.broadcast_to(np.asarray(hg.dir)[..., None, :], mean.shape)

    u0 = hg.t_tilde[..., :-1]
    u1 = hg.t_tilde[..., 1:]
    # mirrored boundaries descend toward the waist; the moment formulas
    # expect ordered bounds
    lo = np.minimum(u0, u1)
    hi = np.maximum(u0, u1)
    _, _, radial = _segment_moments(lo, hi)
    radial_var = (np.asarray(hg.rho)[..., None] ** 2) * radial
    return FrustumGaussian(mean, t_var, radial_var, axis)


def hourglass_frustum_moments(hg: "Hourglass", i: int) -> FrustumGaussian:
    """Gaussian for hourglass segment i (1-based, 1 <= i <= N)."""
    n_segments = hg.tvals.shape[-1] - 1
    if not 1 <= i <= n_segments:
        raise ValueError(f"segment index {i} out of range 1..{n_segments}")
    g = hourglass_frustum_gaussians(hg)
    k = i - 1
    return FrustumGaussian(
        g.mean[..., k, :], g.axial_var[..., k], g.radial_var[..., k], g.axis[..., k, :]
    )
