"""Knowledge-augmented anomaly detection and fault diagnosis workbench.

The package splits into a tabular substrate (``tabular``), exhaustive
subgroup discovery (``mining``), material-flow KPI derivation (``kpi``),
score-based diagnosis rules (``scoring``), a typed diagnostic knowledge
graph (``kg``), a from-scratch convolutional classifier with saliency
maps (``neural``), the guided troubleshooting protocol (``circuit``),
and the HTTP/CLI front doors (``gateway``, ``cli``).  ``estimators``
adapts the three learners to the fit/predict convention.
"""

from . import (circuit, errors, estimators, kg, kpi, mining, neural,
               scoring, tabular)
from .errors import DiagnosticaError
from .estimators import FcnClassifier, ScoreSystemLearner, SubgroupMiner

__version__ = "0.1.0"

__all__ = [
    "DiagnosticaError",
    "FcnClassifier",
    "ScoreSystemLearner",
    "SubgroupMiner",
    "circuit",
    "errors",
    "estimators",
    "kg",
    "kpi",
    "mining",
    "neural",
    "scoring",
    "tabular",
    "__version__",
]
