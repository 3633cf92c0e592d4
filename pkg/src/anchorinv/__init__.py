"""Anchored Bayesian inversion of one-dimensional Gaussian random fields.

The package infers a positive-by-definition spatial property from two
kinds of data: direct linear measurements of the (transformed) field and
indirect observations that see the field only through a nonlinear forward
model. Field uncertainty is reduced to a finite parameter vector of
structural parameters plus anchor values, whose posterior is approximated
by conditioning an adaptive normal-mixture density built over forward-model
Monte Carlo samples. Each sampled field costs exactly one forward call.

Main entry points: :func:`anchorinv.engine.run_inversion` drives the whole
pipeline from a :class:`anchorinv.engine.ScenarioConfig`; the ``anchorinv``
command-line tool wraps it.
"""

__version__ = "0.1.0"

from . import backends
from .exceptions import (
    AnchorInvError,
    ConfigError,
    EmptyPosteriorError,
    EngineError,
    ForwardDomainError,
    ForwardModelError,
    ForwardSolveError,
    SingularCovarianceError,
)
from .transform import Transform
from .mvn import MvnDist, condition_on_linear, condition_partitioned, linear_image
from .field import (
    AnchorSet,
    Grid1D,
    ModelParams,
    StructuralParams,
    anchored_field_dist,
    correlation_matrix,
    prior_field_dist,
    simulate_field,
)
from .prior import StructuralPosterior, StructuralPrior
from .data import (
    ErrorDist,
    TypeAData,
    TypeBData,
    read_typeA_file,
    read_typeB_file,
    write_typeA_file,
    write_typeB_file,
)
from .forward import DiffusionForward, ExternalForward, ForwardSpec, ProcessSpec
from .mixture import (
    NormalMixture,
    WeightedJointSample,
    build_kde,
    condition,
    effective_sample_size,
    load_mixture,
    marginal_density,
    sample_mixture,
    save_mixture,
)
from .engine import (
    RunArtifacts,
    ScenarioConfig,
    draw_posterior_fields,
    run_inversion,
    sample_theta_given_typeA,
)
from .truth import TruthBundle, generate_truth, write_truth

__all__ = [
    "__version__",
    "AnchorInvError",
    "ConfigError",
    "EmptyPosteriorError",
    "EngineError",
    "ForwardDomainError",
    "ForwardModelError",
    "ForwardSolveError",
    "SingularCovarianceError",
    "Transform",
    "MvnDist",
    "condition_on_linear",
    "condition_partitioned",
    "linear_image",
    "AnchorSet",
    "Grid1D",
    "ModelParams",
    "StructuralParams",
    "anchored_field_dist",
    "correlation_matrix",
    "prior_field_dist",
    "simulate_field",
    "StructuralPosterior",
    "StructuralPrior",
    "ErrorDist",
    "TypeAData",
    "TypeBData",
    "read_typeA_file",
    "read_typeB_file",
    "write_typeA_file",
    "write_typeB_file",
    "DiffusionForward",
    "ExternalForward",
    "ForwardSpec",
    "ProcessSpec",
    "NormalMixture",
    "WeightedJointSample",
    "build_kde",
    "condition",
    "effective_sample_size",
    "load_mixture",
    "marginal_density",
    "sample_mixture",
    "save_mixture",
    "RunArtifacts",
    "ScenarioConfig",
    "draw_posterior_fields",
    "run_inversion",
    "sample_theta_given_typeA",
    "TruthBundle",
    "generate_truth",
    "write_truth",
    "backends",
]
