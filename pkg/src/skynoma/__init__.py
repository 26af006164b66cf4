"""Desk-scale simulator for NOMA-serving UAV base stations.

Subpackages map to the pipeline: ``world`` (map and mobility), ``channel``
(propagation), ``noma`` (signal model), ``clustering`` (association),
``neuralnet``/``agent`` (shared DQN), ``env`` (the MDP), ``training`` and
``cli`` (experiments).
"""
from . import backend

__version__ = "0.1.0"
__all__ = ["backend", "__version__"]
