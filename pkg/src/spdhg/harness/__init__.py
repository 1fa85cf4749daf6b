"""Experiment configuration, orchestration, certification and reporting."""
