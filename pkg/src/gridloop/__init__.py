"""Trade in minutes: a deterministic volatility-adaptive grid bot with a closed-loop optimizer."""

__version__ = "0.1.0"
