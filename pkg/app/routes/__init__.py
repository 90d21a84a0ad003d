"""Routes module initialization."""
