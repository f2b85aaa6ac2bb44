"""rydbell: simulator for a deterministic time-bin entanglement protocol.

Layers, bottom up: ``hilbert`` (36-dim state/channel algebra), ``protocol``
(pulse and retrieval sequences), ``optics`` (analyzers, losses, detectors),
``montecarlo`` (reproducible click sampling), ``analysis`` (fits and Bell
statistics), ``cli`` (scenario runner).
"""

__version__ = "0.1.0"
