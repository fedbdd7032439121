"""Riemannian ICA: the disentanglement tensor, its g-orthogonal diagonalization,
normal-coordinate source recovery, and a benchmark against linear and conformal ICA."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DomainError,
    EvaluationError,
    FrameError,
    IntegrationError,
    LinAlgError,
    ParameterError,
    PoleError,
    RadiusError,
    RankError,
    RicaError,
    SampleSizeError,
    TrainingError,
)
from .geometry import MetricField, ScalarField, christoffel, ricci  # noqa: E402
from .manifolds import ManifoldSpec, intrinsic_metric  # noqa: E402
from .geodesics import exp_map, log_map  # noqa: E402
from .core import (  # noqa: E402
    DisentanglementMatrix,
    Frame,
    disentanglement_tensor,
    disentanglement_tensor_shortcut,
    rica_diagonalize,
    rica_recover,
)
from .sources import SourceConfig, generate  # noqa: E402
from .metrics import mcc, total_correlation  # noqa: E402
