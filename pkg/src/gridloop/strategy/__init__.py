"""Function and strategy layers of the grid bot."""
