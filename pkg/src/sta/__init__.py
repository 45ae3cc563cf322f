"""Traffic assignment with synergistic (load-discounted) edge costs.

Submodules: ``game`` (networks, demand, cost models, potential), ``routing``
(Dijkstra and CCH), ``engine`` (best-response dynamics), ``metrics``,
``busline``, ``optima`` (exhaustive optima, SAT reduction), ``fixtures``,
``io`` and ``cli``.
"""

__version__ = "0.1.0"
