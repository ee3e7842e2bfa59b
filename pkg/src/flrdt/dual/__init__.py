"""Ground-state dual engine."""
