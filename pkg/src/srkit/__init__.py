"""Single-image super-resolution trained with a neighboring-pixel-difference
graph Laplacian regularizer."""

from .degrade import augment, bicubic_resize, extract_patches, make_pair
from .graph import GridGraph, build_grid_graph, incidence_matrix, laplacian, laplacian_apply
from .harness import TrainConfig, ablate, evaluate, train
from .image import load_image, rgb_to_luma, save_image, shave_border
from .loss import (
    LossValue,
    batched_glrdn,
    glrdn_edge_sum,
    glrdn_matrix_free,
    glrdn_quadratic,
    sse_loss,
    total_loss,
    total_loss_grad,
)
from .metrics import MetricReport, benchmark_pair, psnr, ssim
from .net import NetConfig, backward, forward, forward_train, init_params, zero_params
from .optim import OptimState, init_optim, optim_step

__version__ = "0.1.0"
