"""Adversarial domain adaptation components for the detector."""

from .divergence import HDivergenceEstimate, estimate_h_divergence, fit_logistic, h_divergence_from_errors
from .heads import DomainHeads, DomainProbMap, InstanceDomainProbs, init_head_params
from .losses import (
    DEFAULT_LAMBDA,
    AblationMask,
    EmptyInstanceWarning,
    LossBreakdown,
    consistency_loss,
    image_domain_loss,
    instance_domain_loss,
    total_loss,
)

__all__ = [
    "DEFAULT_LAMBDA",
    "AblationMask",
    "DomainHeads",
    "DomainProbMap",
    "EmptyInstanceWarning",
    "HDivergenceEstimate",
    "InstanceDomainProbs",
    "LossBreakdown",
    "consistency_loss",
    "estimate_h_divergence",
    "fit_logistic",
    "h_divergence_from_errors",
    "image_domain_loss",
    "init_head_params",
    "instance_domain_loss",
    "total_loss",
]
