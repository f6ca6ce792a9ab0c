"""Risk detection, constraint compilation, constrained search and escalation."""
