"""subortrim: simulation and limit-law checks for trimmed subordinators.

The package simulates driftless subordinators through their ordered jump
ladder, forms trimmed values and normalised largest-jump statistics, and
checks them against their small-time and small-index limit laws.
"""

__version__ = "0.1.0"
