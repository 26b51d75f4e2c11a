"""Safe, risk-averse Bayesian optimisation under heteroscedastic noise."""

from ._kernels import HAVE_EXTENSION
from .acquisition import (AcquisitionContext, InfeasibleError, PsoConfig, constrained_ei,
                          lcb_acq, pso_minimize, rahbo_acq)
from .benchmarks.axis import axis_problem
from .benchmarks.synthetic import synthetic_problem
from .gp import (GpModel, GpNumericalError, HyperparameterWarning, KernelConfig, TrainingSet,
                 confidence_bounds, fit, nlml, posterior_mean_gradient, predict_mean,
                 predict_var, rbf_kernel, tune_hyperparameters)
from .harness import ConfigError, ExperimentConfig, SummaryReport, compare, run_experiment
from .loops import (EvaluationRecord, RunAborted, RunTrace, audit_trace, cbo_run, goose_run,
                    ragoose_run, recommend, regret_series)
from .problem import GpSetup, ModelSetup, ProblemDefinition
from .risk import RiskConfig, SampleBatch, aggregate, mv_value, noise_schedule
from .safeset import (DiscretizedDomain, SafeRegion, boundary, build_safe_region, classify_safe,
                      discretization_step, expanders, expansion_indicator, select_expander)

__version__ = "0.1.0"
