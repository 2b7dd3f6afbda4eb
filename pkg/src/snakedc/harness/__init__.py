"""Experiment orchestration: configs, trials, comparisons, scenarios and exports."""
