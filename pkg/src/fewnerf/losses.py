"""Ground-truth relative luminance, photometric losses, and total-loss assembly.

Relative luminance of a gamma-compressed pixel is the coefficient-weighted
sum of the gamma-expanded channels:

    y = 0.2126 r^2.2 + 0.7152 g^2.2 + 0.0722 b^2.2

The coefficients sum to exactly 1.0, so pure white maps to luminance 1.
Batch reductions are means so loss weights transfer across batch sizes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError

LUMINANCE_COEFFS = np.array([0.2126, 0.7152, 0.0722])
GAMMA = 2.2


def gt_luminance(color):
    """Relative luminance in [0, 1] of gamma-compressed rgb in [0, 1].

    Slightly out-of-range channels (image decode noise) are clamped with a
    warning rather than rejected.
    """
    c = np.asarray(color, dtype=np.float64)
    if np.any(c < 0.0) or np.any(c > 1.0):
        warnings.warn("rgb channels outside [0, 1] clamped for luminance", stacklevel=2)
        c = np.clip(c, 0.0, 1.0)
    return (c**GAMMA) @ LUMINANCE_COEFFS


def mse_loss(pred, gt) -> float:
    """Mean over the batch of squared L2 color error (sum over channels)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    if pred.shape[0] == 0:
        warnings.warn("mse_loss over an empty batch", stacklevel=2)
        return 0.0
    return float(np.mean(np.sum((pred - gt) ** 2, axis=-1)))


def luminance_loss(pred, gt) -> float:
    """Mean squared luminance error over a batch of scalars."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    if pred.size == 0:
        warnings.warn("luminance_loss over an empty batch", stacklevel=2)
        return 0.0
    return float(np.mean((pred - gt) ** 2))


@dataclass
class LossWeights:
    """Balancing weights for the total loss.

    ``lum``/``lum_aug`` weight the luminance terms of original rays and
    augmented inputs.  ``photo_aug`` weights an optional surrogate
    photometric term on augmented renders against the original ray's
    target pixel; it is NOT part of the published training objective and
    defaults to 0.  The remaining slots (``nll``/``nll_aug``/``ue``/
    ``ue_aug``/``bfc``/``ori``) belong to auxiliary likelihood losses whose
    definitions are external to this package; they are carried so a
    plug-in may supply the terms, and contribute zero otherwise.
    """

    mse: float = 1.0
    lum: float = 1e-3
    lum_aug: float = 1e-4
    photo_aug: float = 0.0
    nll: float = 0.0
    nll_aug: float = 0.0
    ue: float = 0.0
    ue_aug: float = 0.0
    bfc: float = 0.0
    ori: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"loss weight {f.name} must be nonnegative")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class LossReport:
    """Weighted total plus the raw per-term values that produced it."""

    total: float
    terms: dict = field(default_factory=dict)     # name -> raw term value
    weighted: dict = field(default_factory=dict)  # name -> weight * term


def total_loss(terms: dict, weights: LossWeights, extra_terms: dict | None = None) -> LossReport:
    """Assemble the weighted total from raw per-term values.

    ``terms`` maps weight-slot names to raw scalars; missing slots count as
    zero.  ``extra_terms`` lets a plug-in inject values for the external
    auxiliary slots.  Unknown term names raise ConfigError.
    """
    known = weights.as_dict()
    merged = dict(terms)
    for name, value in (extra_terms or {}).items():
        merged[name] = merged.get(name, 0.0) + value
    unknown = set(merged) - set(known)
    if unknown:
        raise ConfigError(f"unknown loss terms: {sorted(unknown)}")
    weighted = {name: known[name] * merged.get(name, 0.0) for name in known}
    total = 0.0
    for name in sorted(weighted):  # fixed reduction order for reproducibility
        total += weighted[name]
    return LossReport(total=total, terms={k: merged.get(k, 0.0) for k in known},
                      weighted=weighted)
