"""Robust pairwise learning: metric learning by MoRU gradient descent and tournaments."""
from .metric import (
    GDResult,
    MahalanobisModel,
    NonFiniteGradient,
    PairLabelDataset,
    TraceRow,
    block_risk_and_gradient,
    contamination_demo,
    count_spikes,
    full_risk,
    load_pair_labels_csv,
    load_points_csv,
    make_two_cluster_data,
    moru_minibatch_gd,
    pairwise_loss,
    pairwise_loss_gradient,
    project_psd,
    write_trace,
)
from .tournament import (
    Candidate,
    TournamentState,
    constant_shift_candidates,
    phi_distance_oracle,
    psi_match,
    psi_statistic,
    run_tournament,
)

__all__ = [
    "GDResult", "MahalanobisModel", "NonFiniteGradient", "PairLabelDataset", "TraceRow",
    "block_risk_and_gradient", "contamination_demo", "count_spikes", "full_risk", "load_pair_labels_csv",
    "load_points_csv", "make_two_cluster_data", "moru_minibatch_gd", "pairwise_loss",
    "pairwise_loss_gradient", "project_psd", "write_trace",
    "Candidate", "TournamentState", "constant_shift_candidates", "phi_distance_oracle",
    "psi_match", "psi_statistic", "run_tournament",
]
