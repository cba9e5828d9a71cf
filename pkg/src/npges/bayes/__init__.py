"""Posterior-odds comparison test with pluggable local evidence."""

from npges.bayes.evidence import (
    BicScore,
    ConjugateGaussian,
    DegenerateDataError,
    DpmMonteCarlo,
    EvidenceBackend,
    EvidenceCache,
    EvidenceKey,
    log_evidence,
    make_backend,
)
from npges.bayes.lecam import (
    ConvergenceError,
    LeCamConfig,
    ModelPriorConfig,
    log_model_prior,
    penalty,
    solve_epsilon,
)
from npges.bayes.odds import BoundOddsTest, OddsTest, log_posterior_odds, phi_lambda
