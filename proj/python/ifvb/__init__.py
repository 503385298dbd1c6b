"""Inversion-free natural-gradient variational Bayes.

Thin wrapper around the C++ core: variational families, recursive
inverse-Fisher estimation, the score-function ELBO machinery, and the
sga/ngvb/ifvb/aifvb optimizers with the experiment harness.
"""

from ifvb._core import *  # noqa: F401,F403
from ifvb._core import __version__  # noqa: F401
