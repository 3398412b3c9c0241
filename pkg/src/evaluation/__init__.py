"""Planners, rollouts, metrics, traces and plots."""
