"""Desk-scale training end to end
==================================

Train the tiny preset (16 channels, 2 blocks, x2) on a synthetic corpus
for a few hundred iterations and compare against the bicubic baseline on
held-out images.  With the default 600 iterations this takes about a
minute; pass a higher count as the first argument for a better model
(2000 reliably beats bicubic).
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from earfa.data import bicubic_resize, save_png, synthetic_dataset
from earfa.metrics import y_channel_scores
from earfa.model import ModelConfig, super_resolve
from earfa.training import TrainConfig, evaluate, train

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 600
workdir = Path(tempfile.mkdtemp(prefix="earfa-demo-"))

pairs = synthetic_dataset(seed=42, count=10, scale=2)
train_pairs, val_pairs = pairs[:8], pairs[8:]

bicubic_scores = [
    y_channel_scores(np.clip(bicubic_resize(p.lr, 2.0), 0, 1), p.hr, shave=2)
    for p in val_pairs]
bicubic_psnr = float(np.mean([s[0] for s in bicubic_scores]))
print(f"bicubic baseline on {len(val_pairs)} held-out images: {bicubic_psnr:.2f} dB")

cfg = ModelConfig.tiny(scale=2)
tcfg = TrainConfig(batch=8, iters=iters, lr0=1e-3,
                   milestones=(iters // 2, 3 * iters // 4), seed=0, patch=24,
                   log_every=100, eval_every=200, checkpoint_every=iters)
print(f"training tiny x2 for {iters} iterations...")
result = train(cfg, tcfg, train_pairs, workdir / "run", val_pairs=val_pairs)
print(f"loss: first-20 mean {np.mean(result['losses'][:20]):.4f} "
      f"-> last-20 mean {np.mean(result['losses'][-20:]):.4f}")

model_psnr, model_ssim = evaluate(result["model"], val_pairs)
verdict = "beats" if model_psnr >= bicubic_psnr else "does not yet beat"
print(f"trained model: {model_psnr:.2f} dB / ssim {model_ssim:.4f} "
      f"({verdict} bicubic at {bicubic_psnr:.2f} dB)")

# Write a side-by-side triple (LR upscaled by bicubic, model output, HR).
pair = val_pairs[0]
sr = super_resolve(result["model"], pair.lr)
bic = np.clip(bicubic_resize(pair.lr, 2.0), 0, 1)
for name, img in (("bicubic", bic), ("model", sr), ("target", pair.hr)):
    save_png(img, workdir / f"{pair.name}_{name}.png")
print(f"sample outputs written under {workdir}")
