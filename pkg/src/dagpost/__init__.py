"""Exact and sampled Bayesian posteriors over DAG structures for linear Gaussian SEMs."""

from .asymptotics import (PopulationModel, RatePrediction, decay_exponent, min_binary_kl,
                          mu_infinity, population_covariance, projected_matrix, sigma_infinity,
                          t_infinity)
from .dags import (D_MAX, DagStructure, EdgePair, enumerate_dags, is_acyclic, is_maximal,
                   is_subgraph, neighbors, sample_uniform_dag, skeleton)
from .detection import (DetectorConfig, SkeletonEstimate, calibrate_threshold, class_priors,
                        detect_likelihood_ratio, detect_posterior, error_rates)
from .errors import (CalibrationError, CapacityError, DagpostError, DomainError,
                     InvalidInputError, NumericalError, UndefinedRateError)
from .mcmc import ChainConfig, ChainTrace, mh_step, propose, run_chain
from .posterior import (NodeBlocks, PosteriorTable, PriorConfig, edge_absence_posterior,
                        log_unnorm_posterior, log_unnorm_posterior_binary, node_blocks,
                        normalize, oracle_log_marginal, posterior_table)
from .sem import (Dataset, WeightedSem, assemble, kl_divergence, random_weights,
                  sample_dataset, structure_of)

__version__ = "0.1.0"
