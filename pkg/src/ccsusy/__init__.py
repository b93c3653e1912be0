"""Exactly-solvable coupled-channel potentials built as SUSY partners of the zero potential."""

from .errors import ConfigError, ScatteringError
from .scattering import ChannelSet, channel_wavenumbers, eigenphases_2ch, s_matrix_from_jost
from .susy import (
    CanonicalParametrization,
    FactorizationSpec,
    TransformResult,
    U0Parametrization,
    transform,
)

__version__ = "0.1.0"

__all__ = [
    "CanonicalParametrization",
    "ChannelSet",
    "ConfigError",
    "FactorizationSpec",
    "ScatteringError",
    "TransformResult",
    "U0Parametrization",
    "channel_wavenumbers",
    "eigenphases_2ch",
    "s_matrix_from_jost",
    "transform",
]
