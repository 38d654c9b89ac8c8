"""Repository-root conftest: makes ``src`` importable as a package in tests."""
