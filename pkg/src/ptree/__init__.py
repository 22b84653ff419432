"""Polya tree density estimation on data-dependent (median) and fixed dyadic trees."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .base import BaseMeasure, Marginal
from .densities import (SCENARIOS, ScenarioDensity, eval_generalized_beta,
                        sample_generalized_beta, scenario)
from .errors import (ConfigError, DataParseError, DepthNegative, DomainError, EmptyDomain,
                     GridMismatch, InvalidPrior, ModelVersionError, NodeBudgetExceeded,
                     NumericalUnderflow, OutOfDomain, PTreeError, UnknownScenario, ZeroMass)
from .markov import (MessageTable, PosteriorTransition, StateModel, message_pass,
                     posterior_transitions, predictive_density_latent,
                     sample_posterior_density_latent)
from .model import fit_model, predict_bands, predict_mean
from .multivariate import (JointPosterior, SampledTree, SplitPrior, expand_and_pass,
                           posterior_mean_exact, posterior_mean_mc, sample_tree)
from .partition import (Dataset, PartitionNode, Region, SplitMode, SplitSpec,
                        build_fixed_tree, build_partial_tree)
from .polya import (BetaNodePrior, Likelihood, NodeEvidence, PriorSpec, bayes_factor,
                    node_marginal, posterior_branch_mean, precompute_beta_grid,
                    predictive_density, sample_posterior_density)
from .risk import ExperimentPlan, RiskReport, loss, run_plan
from .serialize import MODEL_VERSION, load_model, save_model
