"""Test package for LA-VA."""
