"""Decentralized online stochastic optimization over time-varying digraphs.

Simulator for hybrid variance-reduced gradient tracking (tv_hsgt) and the
fixed-graph baselines dsgd / dsgt / dsgt_hb, with the full diagnostic
metric set, a numerical stability certificate for the step size, and
Monte-Carlo inequality monitors.
"""

__version__ = "0.1.0"
