"""prmix: finite-mixture estimation by predictive recursion.

A one-pass stochastic recursion estimates the mixing distribution of a
finite mixture over a known support; a prequential objective extends it
to unknown supports via subset search; diagnostics and benchmarks verify
the estimator's mean-field behavior and convergence rates at desk scale.
"""

__version__ = "0.1.0"

from .bench import (RateExperiment, RateReport, Scenario,
                    misspecified_scenario_suite, rate_experiment,
                    scenario_by_name, simulate)
from .data import (Dataset, expand_frequency, galaxies, ingest, load_dataset,
                   loan_defaults)
from .diagnostics import (ChenReport, JacobianResult, MarkovChainCheck,
                          OracleResult, Population, chen_assumption_suite,
                          jacobian, kl_oracle_fstar,
                          lyapunov, lyapunov_gradient_identity_check,
                          markov_chain_from_jacobian, phi_mean_map)
from .engine import (FiniteMixture, MixingVector, PRTrace, SupportSet,
                     WeightSchedule, mixture_log_density, pr_run,
                     pr_run_averaged, pr_step, update_direction)
from .errors import (ConfigError, DataFormatError, DegenerateDataError,
                     DomainError, NumericalError, PrmixError)
from .kernels import Family, Kernel, ObservationSpace, check_lr_bound
from .quadrature import ExpectationGrid, build_grid, normalization_error
from .select import (AnnealConfig, GridSpec, SelectionResult, SubsetObjective,
                     anneal_select, exhaustive_select, objective, refit,
                     support_distance)

__all__ = [name for name in dir() if not name.startswith("_")]
