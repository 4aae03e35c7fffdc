"""Stratified sampling along rays and quadrature volume rendering.

Compositing follows the standard quadrature rule: with per-segment density
tau_i over interval delta_i, the blending weights are

    w_i = T_i (1 - exp(-tau_i delta_i)),   T_i = exp(-sum_{j<i} tau_j delta_j)

and every rendered quantity (color, luminance, blended normal, expected
depth) uses the identical weight vector.  ``composite_backward`` provides
the exact reverse-mode gradients of this quadrature with respect to the
per-sample field outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import FrustumGaussian
from .field import FieldOutputs

DEPTH_EPS = 1e-10
DEPTH_MODES = ("expected", "median", "argmax")


def anneal_window(near: float, far: float, iteration: int, anneal_iters: int,
                  min_fraction: float = 0.1):
    """Scene-space annealing: the sampling window grows linearly from
    ``min_fraction`` of [near, far] (centered) to the full interval."""
    if anneal_iters <= 0:
        return near, far
    p = min(max(iteration / anneal_iters, 0.0), 1.0)
    frac = min_fraction + (1.0 - min_fraction) * p
    center = 0.5 * (near + far)
    half = 0.5 * (far - near) * frac
    return center - half, center + half


def stratified_boundaries(near, far, n: int, rng: np.random.Generator | None = None):
    """N+1 sorted segment boundaries in [near, far], one jitter per stratum.

    With ``rng=None`` (test mode) the boundaries are exactly linearly
    spaced.  Jittered boundaries are strictly increasing: each boundary
    moves within the half-bins around its linspace position.
    """
    if n < 1:
        raise ValueError("need at least one segment")
    near = np.asarray(near, dtype=np.float64)
    far = np.asarray(far, dtype=np.float64)
    base = near[..., None] + (far - near)[..., None] * np.linspace(0.0, 1.0, n + 1)
    if rng is None:
        return base
    mids = 0.5 * (base[..., :-1] + base[..., 1:])
    lower = np.concatenate([base[..., :1], mids], axis=-1)
    upper = np.concatenate([mids, base[..., -1:]], axis=-1)
    u = rng.random(base.shape)
    return lower + (upper - lower) * u


@dataclass
class SampleSet:
    """Boundaries plus per-segment featurization and field outputs for a ray batch.

    ``tvals`` has shape (R, N+1) and is strictly increasing; the arrays in
    ``outputs`` carry a matching (R, N, ...) segment axis.  ``gaussians``
    is optional metadata (not needed for compositing itself).
    """

    tvals: np.ndarray
    outputs: FieldOutputs
    gaussians: FrustumGaussian | None = None

    def __post_init__(self):
        self.tvals = np.asarray(self.tvals, dtype=np.float64)
        if np.any(np.diff(self.tvals, axis=-1) <= 0):
            raise ValueError("sample boundaries must be strictly increasing")


@dataclass
class RenderResult:
    """Composited per-ray quantities.

    ``normal`` is the weight-blended (unnormalized) normal sum(w_i n_i);
    ``transmittance`` is T_i at the front of each segment (T_1 = 1);
    ``acc`` is sum(w).  Depth is the weight-normalized estimate selected
    by the compositing call's depth mode.
    """

    color: np.ndarray          # (R, 3)
    luminance: np.ndarray      # (R,)
    weights: np.ndarray        # (R, N)
    transmittance: np.ndarray  # (R, N)
    depth: np.ndarray          # (R,)
    normal: np.ndarray         # (R, 3)
    acc: np.ndarray            # (R,)


def composite(samples: SampleSet, background_color=None, background_luminance=None,
              depth_mode: str = "expected") -> RenderResult:
    """Alpha-composite a SampleSet into per-ray color/luminance/depth/normal.

    When ``background_color`` is given, color and luminance are composited
    over it with the residual transmittance: c += (1 - acc) * bg.  The
    background luminance defaults to the ground-truth luminance of the
    background color.
    """
    if depth_mode not in DEPTH_MODES:
        raise ValueError(f"depth_mode must be one of {DEPTH_MODES}")
    out = samples.outputs
    tvals = samples.tvals
    delta = np.diff(tvals, axis=-1)
    a = out.density * delta
    a_cum = np.cumsum(a, axis=-1)
    trans = np.exp(-(a_cum - a))          # exclusive: T_1 = 1
    alpha = -np.expm1(-a)
    weights = trans * alpha
    acc = weights.sum(axis=-1)

    color = np.einsum("rn,rnc->rc", weights, out.color)
    luminance = np.einsum("rn,rn->r", weights, out.luminance)
    normal = np.einsum("rn,rnc->rc", weights, out.normal)

    t_mid = 0.5 * (tvals[..., :-1] + tvals[..., 1:])
    if depth_mode == "expected":
        depth = np.einsum("rn,rn->r", weights, t_mid) / np.maximum(acc, DEPTH_EPS)
    elif depth_mode == "median":
        cum = np.cumsum(weights, axis=-1)
        idx = np.argmax(cum >= 0.5 * acc[..., None], axis=-1)
        depth = np.take_along_axis(t_mid, idx[..., None], axis=-1)[..., 0]
    else:  # argmax
        idx = np.argmax(weights, axis=-1)
        depth = np.take_along_axis(t_mid, idx[..., None], axis=-1)[..., 0]

    if background_color is not None:
        bg = np.asarray(background_color, dtype=np.float64)
        if background_luminance is None:
            from .losses import gt_luminance
            background_luminance = float(gt_luminance(bg))
        residual = 1.0 - acc
        color = color + residual[..., None] * bg
        luminance = luminance + residual * background_luminance

    return RenderResult(color, luminance, weights, trans, depth, normal, acc)


@dataclass
class SampleCotangents:
    """Gradients of a scalar loss with respect to per-sample field outputs."""

    color: np.ndarray      # (R, N, 3)
    density: np.ndarray    # (R, N)
    normal: np.ndarray     # (R, N, 3)
    luminance: np.ndarray  # (R, N)


def composite_backward(samples: SampleSet, result: RenderResult,
                       d_color=None, d_luminance=None, d_normal=None, d_depth=None,
                       background_color=None, background_luminance=None) -> SampleCotangents:
    """Exact gradients of :func:`composite` w.r.t. per-sample (c, tau, n, y).

    Cotangents default to zero.  The background arguments must match the
    forward call.  Depth gradients are only defined for the differentiable
    "expected" depth estimator.
    """
    out = samples.outputs
    tvals = samples.tvals
    r_shape, n_seg = out.density.shape[:-1], out.density.shape[-1]

    def checked(arr, shape, name):
        if arr is None:
            return np.zeros(shape)
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != shape:
            raise ValueError(f"{name} cotangent must have shape {shape}, got {arr.shape}")
        return arr

    d_color = checked(d_color, r_shape + (3,), "color")
    d_luminance = checked(d_luminance, r_shape, "luminance")
    d_normal = checked(d_normal, r_shape + (3,), "normal")
    d_depth = checked(d_depth, r_shape, "depth")

    weights = result.weights
    delta = np.diff(tvals, axis=-1)
    a = out.density * delta
    trans_incl = result.transmittance * np.exp(-a)   # T at the back of each segment
    acc = result.acc
    t_mid = 0.5 * (tvals[..., :-1] + tvals[..., 1:])

    # dL/dw_i: direct linear terms, expected-depth chain, background residual
    d_w = (
        np.einsum("rc,rnc->rn", d_color, out.color)
        + d_luminance[..., None] * out.luminance
        + np.einsum("rc,rnc->rn", d_normal, out.normal)
    )
    if np.any(d_depth != 0.0):
        s_safe = np.maximum(acc, DEPTH_EPS)
        live = (acc > DEPTH_EPS).astype(np.float64)
        depth_val = np.einsum("rn,rn->r", weights, t_mid) / s_safe
        d_w += d_depth[..., None] * (t_mid - live[..., None] * depth_val[..., None]) / s_safe[..., None]
    if background_color is not None:
        bg = np.asarray(background_color, dtype=np.float64)
        if background_luminance is None:
            from .losses import gt_luminance
            background_luminance = float(gt_luminance(bg))
        d_w -= (d_color @ bg + d_luminance * background_luminance)[..., None]

    dc = weights[..., None] * d_color[..., None, :]
    dy = weights * d_luminance[..., None]
    dn = weights[..., None] * d_normal[..., None, :]

    # dL/da_i = T^incl_i g_i - sum_{j>i} w_j g_j, then dtau_i = delta_i dL/da_i
    wg = weights * d_w
    suffix = np.flip(np.cumsum(np.flip(wg, axis=-1), axis=-1), axis=-1) - wg
    d_a = trans_incl * d_w - suffix
    d_tau = delta * d_a

    return SampleCotangents(dc, d_tau, dn, dy)


def resample_importance(tvals, weights, n: int, rng: np.random.Generator,
                        floor: float = 1e-5):
    """Second-level boundaries drawn proportional to first-level weights.

    Inverse-CDF sampling over the weight histogram (with a small floor so
    empty bins stay reachable); returns (..., n+1) strictly increasing
    boundaries inside the original span.
    """
    tvals = np.asarray(tvals, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64) + floor
    pdf = w / w.sum(axis=-1, keepdims=True)
    cdf = np.concatenate([np.zeros(pdf.shape[:-1] + (1,)), np.cumsum(pdf, axis=-1)], axis=-1)
    cdf[..., -1] = 1.0
    u = (np.arange(n + 1) + 0.999 * rng.random(tvals.shape[:-1] + (n + 1,))) / (n + 1)
    flat_cdf = cdf.reshape(-1, cdf.shape[-1])
    flat_t = tvals.reshape(-1, tvals.shape[-1])
    flat_u = u.reshape(-1, n + 1)
    out = np.empty_like(flat_u)
    for i in range(flat_cdf.shape[0]):
        out[i] = np.interp(flat_u[i], flat_cdf[i], flat_t[i])
    return out.reshape(tvals.shape[:-1] + (n + 1,))
