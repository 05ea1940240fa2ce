"""Experiment registry."""
from .calculus import ChainRuleExperiment, MollifierExperiment, ProductRuleExperiment
from .isometry import ChaosOracleExperiment, IsometryExperiment
from .lemma4 import Lemma4ConvergenceExperiment, Lemma4ErrorTermsExperiment
from .norms import CenteredInequalityExperiment, DecompositionExperiment, S2NormExperiment
from .pipeline import PipelineExperiment

# Listing order of `levylab list`
EXPERIMENTS = {
    cls.name: cls
    for cls in (
        IsometryExperiment,
        ProductRuleExperiment,
        ChainRuleExperiment,
        ChaosOracleExperiment,
        S2NormExperiment,
        Lemma4ConvergenceExperiment,
        Lemma4ErrorTermsExperiment,
        PipelineExperiment,
        DecompositionExperiment,
        CenteredInequalityExperiment,
        MollifierExperiment,
    )
}

__all__ = ["EXPERIMENTS"]
