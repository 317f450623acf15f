"""Tangle DAG consensus with On Tangle Voting: protocol library and simulator."""

__version__ = "0.1.0"
