"""Performance metrics, efficiency ratio and feedback assembly."""
