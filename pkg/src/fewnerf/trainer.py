"""End-to-end optimization: batch assembly, augmentation, gradients, Adam.

A training step renders a batch of original rays, estimates their
surfaces, constructs augmented inputs according to the configured mode
(none / flip / hourglass / multicast), masks them by incidence angle,
renders the kept ones toward the identical target pixels, and applies one
clipped Adam update of the exact analytic gradient.

Augmented-input construction is treated as data: gradients do not flow
through the estimated surface geometry (the per-step objective is the
loss with the constructed inputs held fixed, exposed as
:meth:`Trainer.frozen_problem` / :meth:`Trainer.loss_on_frozen`).

All randomness derives from one seed through named substreams keyed by
purpose and iteration, so runs are bitwise reproducible and ablations
change exactly one thing.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field as dataclass_field, replace
from pathlib import Path

import numpy as np

from . import augmentation as aug
from . import rendering
from .encoding import (EncodingBasis, cone_frustum_gaussians,
                       hourglass_frustum_gaussians, ipe, pe)
from .errors import ConfigError, NumericalAbort
from .field import (FieldConfig, FieldOutputs, FieldParams,
                    backward as field_backward, forward as field_forward,
                    init_params, save_checkpoint)
from .geometry import Camera, Ray, camera_rays
from .losses import (LossReport, LossWeights, gt_luminance, luminance_loss,
                     mse_loss, total_loss)
from .metrics import evaluate_pair

MODES = ("none", "flip", "hourglass", "multicast")

# named randomness substreams
STREAM_INIT = 0
STREAM_BATCH = 1
STREAM_SAMPLING = 2
STREAM_JITTER = 3
STREAM_POSES = 4
STREAM_RESAMPLE = 5

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def substream(seed: int, stream: int, iteration: int = 0) -> np.random.Generator:
    """Independent generator for one (purpose, iteration) pair of a run."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, iteration))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class TrainConfig:
    """Everything that defines a training run (see README for the JSON schema)."""

    iterations: int = 5000
    batch_size: int = 128
    num_samples: int = 32
    lr_init: float = 1e-3
    lr_final: float = 1e-5
    warmup_iters: int = 512
    anneal_iters: int = 1000
    anneal_min_fraction: float = 0.1
    psi_deg: float = 45.0
    kappa: int = 1
    jitter_sigma: float = 0.0
    aug_start_iter: int = 0
    aug_acc_floor: float = 0.0
    mode: str = "hourglass"
    seed: int = 0
    grad_clip: float = 0.1
    white_background: bool = True
    two_level: bool = False
    depth_mode: str = "expected"
    precision: str = "f64"
    near: float | None = None
    far: float | None = None
    log_every: int = 50
    eval_every: int = 0
    field: FieldConfig = dataclass_field(default_factory=FieldConfig)
    weights: LossWeights = dataclass_field(default_factory=LossWeights)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.precision not in ("f32", "f64"):
            raise ConfigError("precision must be 'f32' or 'f64'")
        if self.lr_final > self.lr_init:
            raise ConfigError("lr_final must be <= lr_init")
        if self.warmup_iters > self.iterations:
            raise ConfigError("warmup_iters must be <= iterations")
        if self.iterations < 0 or self.batch_size < 1 or self.num_samples < 1:
            raise ConfigError("iterations/batch_size/num_samples out of range")
        if not 0.0 < self.psi_deg <= 180.0:
            raise ConfigError("psi_deg must lie in (0, 180]")
        if self.kappa < 1:
            raise ConfigError("kappa must be >= 1")
        if self.depth_mode not in rendering.DEPTH_MODES:
            raise ConfigError(f"depth_mode must be one of {rendering.DEPTH_MODES}")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(spec: dict) -> "TrainConfig":
        spec = dict(spec)
        if "field" in spec and isinstance(spec["field"], dict):
            spec["field"] = FieldConfig(**spec["field"])
        if "weights" in spec and isinstance(spec["weights"], dict):
            spec["weights"] = LossWeights(**spec["weights"])
        return TrainConfig(**spec)


def iterations_for_pixel_epochs(epochs: float, total_pixels: int, batch_size: int) -> int:
    """Translate a pixel-epoch budget into an iteration count."""
    return math.ceil(epochs * total_pixels / batch_size)


def lr_schedule(iteration: int, cfg: TrainConfig) -> float:
    """Linear warmup 0 -> lr_init, then log-linear decay lr_init -> lr_final."""
    if iteration < 0 or iteration >= max(cfg.iterations, 1):
        iteration = min(max(iteration, 0), max(cfg.iterations - 1, 0))
    if cfg.warmup_iters > 0 and iteration < cfg.warmup_iters:
        return cfg.lr_init * iteration / cfg.warmup_iters
    span = cfg.iterations - cfg.warmup_iters
    if span <= 0 or iteration <= cfg.warmup_iters:
        return cfg.lr_init
    frac = (iteration - cfg.warmup_iters) / span
    return float(np.exp((1.0 - frac) * np.log(cfg.lr_init) + frac * np.log(cfg.lr_final)))


def clip_gradient(grad: np.ndarray, threshold: float = 0.1) -> np.ndarray:
    """Elementwise clamp to [-threshold, threshold], then rescale the whole
    vector if its L2 norm still exceeds the threshold."""
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite value in gradient")
    clipped = np.clip(grad, -threshold, threshold)
    n = float(np.linalg.norm(clipped))
    if n > threshold:
        clipped = clipped * (threshold / n)
    return clipped


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @staticmethod
    def zeros(n: int) -> "AdamState":
        return AdamState(np.zeros(n), np.zeros(n), 0)


def adam_update(flat_params: np.ndarray, grad: np.ndarray, state: AdamState,
                lr: float) -> None:
    """One in-place Adam update of the flat parameter vector."""
    state.step += 1
    state.m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grad
    state.v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grad * grad
    m_hat = state.m / (1.0 - ADAM_BETA1**state.step)
    v_hat = state.v / (1.0 - ADAM_BETA2**state.step)
    flat_params -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


@dataclass
class PixelBank:
    """All training pixels flattened into ray + target arrays."""

    origins: np.ndarray    # (P, 3)
    dirs: np.ndarray       # (P, 3)
    radii: np.ndarray      # (P,)
    colors: np.ndarray     # (P, 3)
    luminances: np.ndarray # (P,)

    def __len__(self) -> int:
        return self.dirs.shape[0]


def build_pixel_bank(views) -> PixelBank:
    origins, dirs, radii, colors = [], [], [], []
    for cam, image in zip(views.cameras, views.images):
        rays = camera_rays(cam)
        origins.append(rays.origin)
        dirs.append(rays.dir)
        radii.append(rays.radius)
        colors.append(image.reshape(-1, 3))
    colors = np.concatenate(colors)
    return PixelBank(
        origins=np.concatenate(origins),
        dirs=np.concatenate(dirs),
        radii=np.concatenate(radii),
        colors=colors,
        luminances=gt_luminance(colors),
    )


@dataclass
class FrozenBatch:
    """A training step's inputs with the augmentation geometry already built.

    The loss is a pure function of the field parameters given this object,
    which is what one optimizer step minimizes (and what finite
    differences can check).
    """

    rays: Ray
    tvals: np.ndarray          # (R, N+1)
    enc_dirs: np.ndarray       # (R, 3) directions fed to the encoder
    target_color: np.ndarray   # (R, 3)
    target_luminance: np.ndarray
    augmented: aug.AugmentedBatch | None
    aug_enc_dirs: np.ndarray | None    # (M, 3) for kept entries only
    tvals_fine: np.ndarray | None = None  # second-level boundaries, if enabled
    n_aug_built: int = 0
    n_aug_kept: int = 0


class Trainer:
    """Owns parameters, optimizer state and the step/train loop for one run."""

    def __init__(self, cfg: TrainConfig, train_views, heldout_views=None):
        from .perf import tune_allocator
        tune_allocator()
        if len(train_views) == 0:
            raise ConfigError("training set is empty")
        self.cfg = cfg
        self.train_views = train_views
        self.heldout_views = heldout_views
        self.near = cfg.near if cfg.near is not None else min(c.near for c in train_views.cameras)
        self.far = cfg.far if cfg.far is not None else max(c.far for c in train_views.cameras)
        self.bank = build_pixel_bank(train_views)
        self.basis_pos = EncodingBasis(cfg.field.pos_freqs)
        self.basis_dir = EncodingBasis(cfg.field.dir_freqs)
        self.dtype = np.float32 if cfg.precision == "f32" else np.float64
        self.params = init_params(cfg.field, substream(cfg.seed, STREAM_INIT),
                                  dtype=self.dtype)
        self.opt = AdamState.zeros(self.params.flat.size)
        self.iteration = 0
        self.bg_color = np.ones(3) if cfg.white_background else None
        self.bg_lum = 1.0 if cfg.white_background else None
        self.history: list[dict] = []

    def set_params(self, params: FieldParams) -> None:
        """Adopt externally loaded parameters at this trainer's precision."""
        if params.config != self.cfg.field:
            raise ConfigError("parameter architecture does not match the config")
        self.params = FieldParams(self.cfg.field, params.flat.astype(self.dtype))

    def resume(self, checkpoint_path) -> None:
        """Continue the schedule from a checkpoint's parameters and step count.

        The checkpoint stores no optimizer moments; they restart at zero
        while the learning-rate schedule continues from the stored step.
        """
        from .field import load_checkpoint
        params, header = load_checkpoint(checkpoint_path)
        if header["config_hash"] != self.cfg.field.hash():
            from .errors import DataError
            raise DataError("checkpoint field configuration does not match")
        self.set_params(params)
        self.iteration = int(header["iteration"])
        self.opt = AdamState.zeros(self.params.flat.size)

    # ------------------------------------------------------------------
    # rendering helpers

    def _render(self, params: FieldParams, gaussians, enc_dirs, tvals, want_tape: bool):
        """Featurize + field forward + composite for one ray batch."""
        r, n = tvals.shape[0], tvals.shape[1] - 1
        pos_feat = ipe(gaussians, self.basis_pos, dtype=self.dtype).reshape(r * n, -1)
        dir_feat = np.repeat(pe(enc_dirs, self.basis_dir, dtype=self.dtype), n, axis=0)
        out_flat, tape = field_forward(params, pos_feat, dir_feat, want_tape=want_tape)
        out = FieldOutputs(
            color=out_flat.color.reshape(r, n, 3),
            density=out_flat.density.reshape(r, n),
            normal=out_flat.normal.reshape(r, n, 3),
            luminance=out_flat.luminance.reshape(r, n),
        )
        samples = rendering.SampleSet(tvals=tvals, outputs=out, gaussians=gaussians)
        render = rendering.composite(samples, background_color=self.bg_color,
                                     background_luminance=self.bg_lum,
                                     depth_mode=self.cfg.depth_mode)
        return samples, render, tape

    def _backprop(self, samples, render, tape, d_color, d_luminance) -> np.ndarray:
        cots = rendering.composite_backward(
            samples, render, d_color=d_color, d_luminance=d_luminance,
            background_color=self.bg_color, background_luminance=self.bg_lum)
        r, n = samples.tvals.shape[0], samples.tvals.shape[1] - 1
        return field_backward(
            tape,
            cots.color.reshape(r * n, 3),
            cots.density.reshape(r * n),
            cots.normal.reshape(r * n, 3),
            cots.luminance.reshape(r * n),
        )

    # ------------------------------------------------------------------
    # batch assembly and augmentation

    def sample_batch(self, iteration: int):
        rng = substream(self.cfg.seed, STREAM_BATCH, iteration)
        idx = rng.integers(0, len(self.bank), size=self.cfg.batch_size)
        rays = Ray(
            origin=self.bank.origins[idx],
            dir=self.bank.dirs[idx],
            radius=self.bank.radii[idx],
            near=np.full(idx.shape, self.near),
            far=np.full(idx.shape, self.far),
        )
        return rays, self.bank.colors[idx], self.bank.luminances[idx]

    def sample_tvals(self, iteration: int, n_rays: int) -> np.ndarray:
        lo, hi = rendering.anneal_window(self.near, self.far, iteration,
                                         self.cfg.anneal_iters,
                                         self.cfg.anneal_min_fraction)
        rng = substream(self.cfg.seed, STREAM_SAMPLING, iteration)
        return rendering.stratified_boundaries(
            np.full(n_rays, lo), np.full(n_rays, hi), self.cfg.num_samples, rng)

    def _jitter(self, dirs: np.ndarray, iteration: int, salt: int) -> np.ndarray:
        if self.cfg.jitter_sigma <= 0.0:
            return dirs
        rng = substream(self.cfg.seed, STREAM_JITTER, iteration * 2 + salt)
        return aug.jitter_direction(dirs, self.cfg.jitter_sigma, rng)

    def build_augmentation(self, rays: Ray, render, tvals, target_color,
                           target_luminance) -> aug.AugmentedBatch | None:
        """Construct this mode's augmented inputs from a (detached) render."""
        cfg = self.cfg
        if cfg.mode == "none":
            return None
        # optionally demand a confident opaque hit before augmenting
        floor = max(aug.SURFACE_WEIGHT_FLOOR, cfg.aug_acc_floor)
        surf = aug.estimate_surface(render, rays, weight_floor=floor)
        normals = aug.front_facing(surf.normal, rays.dir)
        theta = aug.incidence_angle(rays.dir, np.where(surf.valid[:, None], normals, [0.0, 0.0, 1.0]))
        candidate = surf.valid & (theta < 0.5 * math.pi - 1e-9)
        if not np.any(candidate):
            return None
        idx = np.nonzero(candidate)[0]
        keep = aug.mask_by_angle(theta[idx], math.radians(cfg.psi_deg))
        sub_rays = rays.take(idx)
        point = surf.point[idx]
        dist = surf.distance[idx]
        n_sub = normals[idx]

        if cfg.mode == "hourglass":
            inputs = aug.make_hourglass(sub_rays, point, dist, n_sub, tvals[idx])
        elif cfg.mode == "flip":
            inputs = aug.make_flip_ray(sub_rays, point, dist, n_sub)
        else:  # multicast
            flip = aug.make_flip_ray(sub_rays, point, dist, n_sub)
            ray_list = aug.make_multicast(sub_rays, flip, cfg.kappa, point=point, distance=dist)
            inputs = Ray(
                origin=np.concatenate([r.origin for r in ray_list]),
                dir=np.concatenate([r.dir for r in ray_list]),
                radius=np.concatenate([r.radius for r in ray_list]),
                near=np.concatenate([r.near for r in ray_list]),
                far=np.concatenate([r.far for r in ray_list]),
            )
            idx = np.tile(idx, cfg.kappa)
            keep = np.tile(keep, cfg.kappa)
        return aug.AugmentedBatch(
            kind=cfg.mode,
            inputs=inputs,
            target_color=target_color[idx],
            target_luminance=target_luminance[idx],
            keep=keep,
            source_index=idx,
        )

    def _augmented_geometry(self, augmented: aug.AugmentedBatch, tvals_source):
        """Gaussians + sample boundaries for the kept augmented entries."""
        kept = np.nonzero(augmented.keep)[0]
        if augmented.kind == "hourglass":
            hg = augmented.inputs.take(kept)
            return hourglass_frustum_gaussians(hg), hg.tvals, hg.dir, kept
        rays = augmented.inputs.take(kept)
        tvals = tvals_source[augmented.source_index[kept]]
        return cone_frustum_gaussians(rays, tvals), tvals, rays.dir, kept

    # ------------------------------------------------------------------
    # the per-step objective

    def frozen_problem(self, iteration: int, params: FieldParams | None = None) -> FrozenBatch:
        """Assemble one step's inputs; augmentation geometry (and second-level
        boundaries, when enabled) is built from the current parameters and
        then held fixed."""
        params = params if params is not None else self.params
        rays, colors, lums = self.sample_batch(iteration)
        tvals = self.sample_tvals(iteration, self.cfg.batch_size)
        enc_dirs = self._jitter(rays.dir, iteration, salt=0)

        augmented = None
        tvals_fine = None
        want_aug = self.cfg.mode != "none" and iteration >= self.cfg.aug_start_iter
        if want_aug or self.cfg.two_level:
            gauss = cone_frustum_gaussians(rays, tvals)
            _, render, _ = self._render(params, gauss, enc_dirs, tvals, want_tape=False)
            if self.cfg.two_level:
                rng = substream(self.cfg.seed, STREAM_RESAMPLE, iteration)
                tvals_fine = rendering.resample_importance(
                    tvals, render.weights, self.cfg.num_samples, rng)
            if want_aug:
                augmented = self.build_augmentation(rays, render, tvals, colors, lums)

        aug_enc_dirs = None
        n_built = n_kept = 0
        if augmented is not None:
            n_built = int(augmented.keep.size)
            n_kept = int(augmented.keep.sum())
            if n_kept:
                _, _, kept_dirs, _ = self._augmented_geometry(augmented, tvals)
                aug_enc_dirs = self._jitter(kept_dirs, iteration, salt=1)
        return FrozenBatch(rays=rays, tvals=tvals, enc_dirs=enc_dirs,
                           target_color=colors, target_luminance=lums,
                           augmented=augmented, aug_enc_dirs=aug_enc_dirs,
                           tvals_fine=tvals_fine, n_aug_built=n_built,
                           n_aug_kept=n_kept)

    def loss_on_frozen(self, params: FieldParams, frozen: FrozenBatch,
                       want_grad: bool = True):
        """Loss (and gradient) of the fixed-input objective at ``params``."""
        cfg = self.cfg
        w = cfg.weights
        n_rays = frozen.tvals.shape[0]
        levels = [frozen.tvals]
        if frozen.tvals_fine is not None:
            levels.append(frozen.tvals_fine)
        level_scale = 1.0 / len(levels)

        terms = {"mse": 0.0, "lum": 0.0}
        grad = np.zeros(params.flat.size) if want_grad else None
        for tvals in levels:
            gauss = cone_frustum_gaussians(frozen.rays, tvals)
            samples, render, tape = self._render(params, gauss, frozen.enc_dirs,
                                                 tvals, want_tape=want_grad)
            terms["mse"] += level_scale * mse_loss(render.color, frozen.target_color)
            terms["lum"] += level_scale * luminance_loss(render.luminance,
                                                         frozen.target_luminance)
            if want_grad:
                d_color = level_scale * w.mse * 2.0 * (render.color - frozen.target_color) / n_rays
                d_lum = level_scale * w.lum * 2.0 * (render.luminance - frozen.target_luminance) / n_rays
                grad += self._backprop(samples, render, tape, d_color, d_lum)

        if frozen.augmented is not None and frozen.n_aug_kept > 0:
            gaussians, tv, _, kept = self._augmented_geometry(frozen.augmented, frozen.tvals)
            aug_samples, aug_render, aug_tape = self._render(
                params, gaussians, frozen.aug_enc_dirs, tv, want_tape=want_grad)
            tc = frozen.augmented.target_color[kept]
            tl = frozen.augmented.target_luminance[kept]
            terms["lum_aug"] = luminance_loss(aug_render.luminance, tl)
            terms["photo_aug"] = mse_loss(aug_render.color, tc)
            if want_grad:
                m = frozen.n_aug_kept
                d_color_a = w.photo_aug * 2.0 * (aug_render.color - tc) / m
                d_lum_a = w.lum_aug * 2.0 * (aug_render.luminance - tl) / m
                grad += self._backprop(aug_samples, aug_render, aug_tape, d_color_a, d_lum_a)

        report = total_loss(terms, cfg.weights)
        return report, grad

    # ------------------------------------------------------------------
    # optimization loop

    def step(self) -> tuple[LossReport, dict]:
        it = self.iteration
        frozen = self.frozen_problem(it)
        report, grad = self.loss_on_frozen(self.params, frozen, want_grad=True)
        if not np.isfinite(report.total):
            raise NumericalAbort(
                f"non-finite loss at iteration {it}: terms={report.terms}")
        try:
            grad = clip_gradient(grad, self.cfg.grad_clip)
        except ValueError as exc:
            raise NumericalAbort(
                f"non-finite gradient at iteration {it}: terms={report.terms}") from exc
        lr = lr_schedule(it, self.cfg)
        adam_update(self.params.flat, grad, self.opt, lr)
        self.iteration += 1
        extras = {"lr": lr, "n_aug_built": frozen.n_aug_built,
                  "n_aug_kept": frozen.n_aug_kept}
        return report, extras

    def train(self, out_dir=None):
        """Run the configured schedule; returns (params, history).

        Writes JSONL metric logs and a checkpoint when ``out_dir`` is given.
        On a numerical abort the last good checkpoint is retained.
        """
        out_dir = Path(out_dir) if out_dir is not None else None
        log_fh = None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            log_fh = open(out_dir / "metrics.jsonl", "w")
        last_good = self.params.copy()
        try:
            for _ in range(self.cfg.iterations - self.iteration):
                try:
                    report, extras = self.step()
                except NumericalAbort:
                    if out_dir is not None:
                        save_checkpoint(out_dir / "checkpoint_lastgood.ckpt",
                                        last_good, self.iteration)
                    raise
                last_good = self.params.copy()
                it = self.iteration - 1
                if it % max(self.cfg.log_every, 1) == 0 or it == self.cfg.iterations - 1:
                    record = {"iter": it, "total": report.total}
                    record.update({k: v for k, v in report.terms.items() if v != 0.0 or k in ("mse", "lum")})
                    record.update(extras)
                    if self.cfg.eval_every and self.heldout_views is not None and \
                            it % self.cfg.eval_every == 0:
                        record["heldout"] = self.evaluate(self.heldout_views)["mean"]
                    self.history.append(record)
                    if log_fh:
                        log_fh.write(json.dumps(record, sort_keys=True) + "\n")
                        log_fh.flush()
            if out_dir is not None:
                save_checkpoint(out_dir / "checkpoint.ckpt", self.params, self.iteration)
        finally:
            if log_fh:
                log_fh.close()
        return self.params, self.history

    # ------------------------------------------------------------------
    # evaluation

    def render_camera(self, cam: Camera, params: FieldParams | None = None,
                      chunk: int = 8192) -> np.ndarray:
        """Deterministic test-mode render (no jitter, linspace sampling)."""
        params = params if params is not None else self.params
        rays = camera_rays(cam)
        n_px = rays.dir.shape[0]
        out = np.zeros((n_px, 3))
        for start in range(0, n_px, chunk):
            sub = rays.take(np.arange(start, min(start + chunk, n_px)))
            tvals = rendering.stratified_boundaries(sub.near, sub.far,
                                                    self.cfg.num_samples, rng=None)
            gauss = cone_frustum_gaussians(sub, tvals)
            _, render, _ = self._render(params, gauss, sub.dir, tvals, want_tape=False)
            out[start:start + sub.dir.shape[0]] = render.color
        return np.clip(out.reshape(cam.height, cam.width, 3), 0.0, 1.0)

    def evaluate(self, views, params: FieldParams | None = None) -> dict:
        """Masked and unmasked metrics over a ViewSet; returns per-view + mean."""
        per_view = []
        for i, cam in enumerate(views.cameras):
            img = self.render_camera(cam, params)
            gt = views.images[i]
            mask = views.masks[i]
            unmasked = evaluate_pair(img, gt)
            masked = evaluate_pair(img, gt, mask=mask if mask.any() else None)
            per_view.append({
                "view": i,
                "psnr": unmasked.psnr, "ssim": unmasked.ssim, "mse": unmasked.mse,
                "average_err": unmasked.average_err,
                "masked_psnr": masked.psnr, "masked_ssim": masked.ssim,
                "masked_mse": masked.mse, "masked_average_err": masked.average_err,
                "average_label": unmasked.average_label,
            })
        keys = ["psnr", "ssim", "mse", "average_err",
                "masked_psnr", "masked_ssim", "masked_mse", "masked_average_err"]
        mean = {k: float(np.mean([v[k] for v in per_view])) for k in keys} if per_view else {}
        return {"views": per_view, "mean": mean}


def train(cfg: TrainConfig, train_views, heldout_views=None, out_dir=None):
    """Convenience wrapper: build a Trainer, run the schedule, return it."""
    trainer = Trainer(cfg, train_views, heldout_views)
    trainer.train(out_dir=out_dir)
    return trainer
