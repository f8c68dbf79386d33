"""Self-paced PCA: robust subspace learning with self-paced sample weights."""

from spca.baselines import PcaModel, fit_l2p_rpca, fit_pca, reconstruct, reconstruction_error
from spca.core import SelfPacedConfig, TrainingHistory, fit_spca, optimal_weight

__all__ = [
    "PcaModel",
    "SelfPacedConfig",
    "TrainingHistory",
    "fit_l2p_rpca",
    "fit_pca",
    "fit_spca",
    "optimal_weight",
    "reconstruct",
    "reconstruction_error",
]
