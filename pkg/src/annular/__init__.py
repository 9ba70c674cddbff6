"""Annulus-type minimal surfaces from the Dirichlet energy of harmonic extensions."""

__version__ = "0.1.0"

from .errors import (AnnularError, Collapsed, ConfigError, DegenerateModulus, DegreeMismatch,
                     InvalidModulus, NoConvergence, OutOfTube, PathCollapse, SliceOutOfRange,
                     TargetNotAttained)
from .manifold import AmbientManifold
from .boundary import BoundaryParametrization, JordanCurve, TangentVariation
from .energy import Configuration, CriticalityReport, Settings, criticality, energy
from .flow import FlowState, descent_field, euler_flow, minimize
from .minimax import PathOfConfigurations, classify_critical, douglas_gap, mountain_pass
