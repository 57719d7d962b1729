"""Lattice laboratory for G-BSDEs with monotone generators and their Yosida regularization."""

__version__ = "0.1.0"

from .errors import (BracketFailure, ConfigError, ContractionViolation, GBSDEError,
                     NonFiniteValue, NumericalError, StepConditionViolation, ToleranceFailure)
from .sublinear import (GConfig, Lattice, TerminalSpec, ValueField, build_lattice,
                        conditional_g_expectation, g_coefficient, interpolate, make_terminal,
                        one_step_sup)
from .yosida import (GeneratorSpec, ResolventResult, dissipative_part, make_generator,
                     regularized_generator, resolvent, validate_assumptions, yosida_approximant)
from .solver import (GBSDESolution, PathRecord, extract_z, implicit_step, k_increment,
                     simulate_path, solve)
from .config import RunConfig, load_config

__all__ = [name for name in dir() if not name.startswith("_")]
