"""QAOA for Max-Cut with GNN warm starts, classical and quantum-aware optimisers, and neural optimisers."""

from .errors import ConfigError, GnnQaoaError, NumericalError, ResourceCapError
from .graphs import Graph, max_cut_oracle, random_regular
from .initialisation import WarmStart, gw_relaxation, tqa_init, xavier_init
from .optim import run_optimisation
from .qsim import QaoaCircuit, QaoaParams, qaoa_expectation

__version__ = "0.1.0"
