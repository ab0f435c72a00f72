from .tensor import Tensor, cat, stack, zeros, ones, no_grad, scatter_add
from .rng import Rng
from .functional import (
    masked_softmax,
    softmax_masked,
    kl_categorical,
    smoothed_cross_entropy,
    gumbel_softmax_sample,
    straight_through_weights,
)
from .layers import (
    GruParams,
    LayerNormParams,
    MhaParams,
    gru_cell_step,
    layer_norm,
    linear,
    multi_head_attention,
    param,
    xavier_uniform,
    zeros_param,
)
from .optim import AdamState, adam_step, clip_global_norm, zero_grads
from .gradcheck import check_gradients, relative_error

__all__ = [
    "Tensor", "cat", "stack", "zeros", "ones", "no_grad", "scatter_add", "Rng",
    "masked_softmax", "softmax_masked", "kl_categorical",
    "smoothed_cross_entropy", "gumbel_softmax_sample", "straight_through_weights",
    "GruParams", "LayerNormParams", "MhaParams", "gru_cell_step", "layer_norm",
    "linear", "multi_head_attention", "param", "xavier_uniform", "zeros_param",
    "AdamState", "adam_step", "clip_global_norm", "zero_grads",
    "check_gradients", "relative_error",
]
