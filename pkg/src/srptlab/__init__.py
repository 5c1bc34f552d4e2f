"""SRPT queue simulation, measure-valued scaling and limit-field laboratory."""

__version__ = "0.1.0"
