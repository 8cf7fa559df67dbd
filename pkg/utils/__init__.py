"""Validation helpers, CSV reports and file locking for hazeorder."""
