"""Compare the augmentation modes on one scene with shared randomness.

Same seed, same data: training with no augmentation, flipped reflection
rays (at their published 90-degree masking threshold), and the hourglass
(45 degrees).  A short run, so treat the numbers as a demonstration of
the machinery rather than a benchmark.
"""

import tempfile

from fewnerf.dataset import OracleScene, Sphere, export_oracle_dataset, load_nerf_synthetic
from fewnerf.field import FieldConfig
from fewnerf.losses import LossWeights
from fewnerf.trainer import TrainConfig, Trainer

scene = OracleScene(spheres=[Sphere((0, 0, 0), 1.0, (0.8, 0.3, 0.25))],
                    light_direction=(0.4, 0.7, 0.6), light_intensity=0.8,
                    ambient=0.15)

rows = []
with tempfile.TemporaryDirectory() as data_dir:
    export_oracle_dataset(scene, data_dir, n_train=4, n_test=4, resolution=32,
                          camera_radius=3.5, near=1.8, far=5.2, seed=7)
    train_views = load_nerf_synthetic(data_dir, "train")
    heldout = load_nerf_synthetic(data_dir, "test")
    for mode, psi in (("none", 45.0), ("flip", 90.0), ("hourglass", 45.0)):
        cfg = TrainConfig(
            iterations=900, batch_size=64, num_samples=24, warmup_iters=128,
            anneal_iters=400, aug_start_iter=450, aug_acc_floor=0.5,
            mode=mode, psi_deg=psi, seed=0, precision="f32", jitter_sigma=0.02,
            field=FieldConfig(depth=4, width=48, pos_freqs=5, dir_freqs=4),
            weights=LossWeights(lum=1e-3, lum_aug=1e-2, photo_aug=0.05),
        )
        trainer = Trainer(cfg, train_views, heldout)
        for _ in range(cfg.iterations):
            trainer.step()
        mean = trainer.evaluate(heldout)["mean"]
        rows.append((mode, psi, mean))
        print(f"trained mode={mode}")

print(f"\n{'mode':<10} {'psi':>4} {'psnr':>7} {'masked':>7} {'ssim':>6} {'avg-err':>8}")
for mode, psi, mean in rows:
    print(f"{mode:<10} {psi:>4.0f} {mean['psnr']:>7.2f} {mean['masked_psnr']:>7.2f} "
          f"{mean['ssim']:>6.3f} {mean['average_err']:>8.4f}")
