"""thzchan test suite."""
