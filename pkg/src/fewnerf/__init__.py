"""fewnerf: few-shot neural radiance fields at desk scale.

A numpy implementation of a few-shot view-synthesis trainer built around
double-cone ("hourglass") ray augmentation with integrated positional
encoding and luminance-consistency regularization, plus the analytic
oracle scenes, metrics and CLI needed to verify it end to end.
"""

__version__ = "0.1.0"

from .augmentation import (AugmentedBatch, Hourglass, SurfaceEstimate,
                           estimate_surface, jitter_direction, make_flip_ray,
                           make_hourglass, make_multicast, mask_by_angle,
                           rho_from_angle)
from .dataset import OracleScene, Plane, Sphere, ViewSet, load_nerf_synthetic, render_oracle
from .encoding import (EncodingBasis, FrustumGaussian, cone_frustum_moments,
                       hourglass_frustum_moments, ipe, pe)
from .errors import ConfigError, DataError, NumericalAbort
from .field import (FieldConfig, FieldOutputs, FieldParams, Tape, backward,
                    forward, init_params, load_checkpoint, param_count,
                    save_checkpoint)
from .geometry import Camera, Ray, angle_between, pixel_to_ray, reflect_flip
from .losses import (LossReport, LossWeights, gt_luminance, luminance_loss,
                     mse_loss, total_loss)
from .metrics import MetricReport, average_error, psnr, ssim
from .rendering import (RenderResult, SampleSet, composite, composite_backward,
                        stratified_boundaries)
from .trainer import (TrainConfig, Trainer, clip_gradient, lr_schedule,
                      substream, train)
