"""Chern-Simons forms of connections on trivial bundles, computed numerically.

Submodules
----------
grassmann
    Pointwise algebra of matrix-valued forms.
calculus
    Form fields over charts, exterior derivative, pull-back, realification.
lie
    Quaternions, their representations, Maurer-Cartan forms, polar retraction.
geometry
    Hopf chart of S^3, lens spaces, frames, Levi-Civita forms, quadrature.
chern_simons
    Curvature, Chern-Simons forms, gauge and block identities.
experiments, cli
    Seeded experiments, reports and the command-line front end.
"""

from . import calculus, chern_simons, geometry, grassmann, lie
from .grassmann import MatValForm, eval_on_vectors, linear_combine, trace, wedge

__version__ = "0.1.0"

__all__ = [
    "MatValForm",
    "wedge",
    "trace",
    "linear_combine",
    "eval_on_vectors",
    "grassmann",
    "calculus",
    "lie",
    "geometry",
    "chern_simons",
    "__version__",
]
