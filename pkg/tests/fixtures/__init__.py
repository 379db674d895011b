# tests/fixtures/__init__.py
"""Reference values and instance builders shared by the tests."""
