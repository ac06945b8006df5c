"""Variance-reduced stochastic gradient solvers with per-component condition
numbers, Fenchel-dual multi-block pipelines, worst-case instance generators,
and gradient-oracle accounting."""

__version__ = "0.1.0"

from . import adversarial, composite, dual, harness, problems, sampling, solvers
from ._kernels import HAVE_COMPILED

__all__ = [
    "problems",
    "sampling",
    "solvers",
    "adversarial",
    "dual",
    "composite",
    "harness",
    "HAVE_COMPILED",
    "__version__",
]
