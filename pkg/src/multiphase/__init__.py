"""Multiphase problem laboratory."""
