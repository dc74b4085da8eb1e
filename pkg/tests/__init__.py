"""Package for tests."""
