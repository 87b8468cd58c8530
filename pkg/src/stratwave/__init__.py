"""Pseudospectral laboratory for dispersive SQG and stratified Boussinesq flows."""

__version__ = "0.1.0"
