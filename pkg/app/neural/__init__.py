from .gradcheck import GradCheckReport, grad_check
from .layers import (
    backward,
    elu,
    elu_grad,
    gru_backward,
    gru_forward,
    init_gru,
    init_linear,
    init_mlp,
    mlp_backward,
    mlp_forward,
    relu,
)
from .optim import RmsPropState, clip_grad_norm, rmsprop_step
from .params import GradBuffer, ParameterSet, check_finite, sync_target

__all__ = [
    "GradBuffer",
    "GradCheckReport",
    "ParameterSet",
    "RmsPropState",
    "backward",
    "check_finite",
    "clip_grad_norm",
    "elu",
    "elu_grad",
    "grad_check",
    "gru_backward",
    "gru_forward",
    "init_gru",
    "init_linear",
    "init_mlp",
    "mlp_backward",
    "mlp_forward",
    "relu",
    "rmsprop_step",
    "sync_target",
]
