"""Lattice shell counts, Weyl sums, subdeterminant tools and bound calculators for quadratic forms on tori."""
from importlib.metadata import PackageNotFoundError, version

from ._common import BudgetExceeded
from .quadform import GenericSampler, NotPositiveDefinite, QuadForm

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

__all__ = ["BudgetExceeded", "GenericSampler", "NotPositiveDefinite", "QuadForm", "__version__"]
