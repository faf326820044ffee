"""Critical-norm toolkit."""
