"""Rate analysis for continuous-variable MDI star networks."""

__version__ = "0.1.0"
