from .layers import (
    concat_backward,
    concat_features,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    maxpool2_backward,
    maxpool2_forward,
    mse_loss,
    relu,
    relu_backward,
    relu_forward,
)
from .model import NetConfig, PopularityNet, init_parameters, zero_network
from .optim import Adam
