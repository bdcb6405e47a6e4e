"""Experiment harness: configs, registry, result files and the command line."""
