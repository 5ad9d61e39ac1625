"""Relation-typed edge annotation of text-attributed graphs and GNN training on the result."""

__version__ = "0.1.0"
