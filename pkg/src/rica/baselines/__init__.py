"""Comparison methods that consume raw chart observations."""
from .fastica import FastIcaConfig, FastIcaResult, fastica_fit
from .mobius import (
    POLE_GUARD,
    MobiusFlowParams,
    NlicaResult,
    TrainConfig,
    forward_logdet,
    init_params,
    layer_logdet,
    mobius_forward,
    mobius_inverse,
    nlica_fit,
    nll_and_grad,
    reduce_dimension,
)

__all__ = [
    "FastIcaConfig",
    "FastIcaResult",
    "fastica_fit",
    "POLE_GUARD",
    "MobiusFlowParams",
    "NlicaResult",
    "TrainConfig",
    "forward_logdet",
    "init_params",
    "layer_logdet",
    "mobius_forward",
    "mobius_inverse",
    "nlica_fit",
    "nll_and_grad",
    "reduce_dimension",
]
