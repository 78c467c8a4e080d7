"""
Bicubic degradation and benchmark scores
========================================

Downscales an image, upsamples it back and scores the result the way
super-resolution benchmarks usually do (luma channel, border shaved).
Needs scikit-image for the sample picture.
"""

import numpy as np
from skimage import data

from srkit.degrade import make_pair
from srkit.image import as_image
from srkit.metrics import benchmark_pair, psnr

# scikit-image gives (H, W, 3) uint8; srkit wants planar floats in [0, 1].
hr = as_image(data.astronaut()[::2, ::2].transpose(2, 0, 1) / 255.0)
print("HR image:", hr.shape, hr.dtype)

# Bigger scale factors lose more detail.
for scale in (2, 3, 4):
    pair = make_pair(hr, scale, source_id="astronaut")
    rep = benchmark_pair(pair.hr, pair.lr_up, scale)
    print(f"x{scale}: LR {pair.lr.shape[1:]}  Y-PSNR {rep.psnr_db:.2f} dB  SSIM {rep.ssim:.4f}")

# RGB PSNR without the border shave is a different number, which is why
# the convention has to be fixed before comparing against published tables.
pair = make_pair(hr, 4)
print("RGB PSNR, no shave:", round(psnr(pair.hr, pair.lr_up), 2))
