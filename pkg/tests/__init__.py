"""Test suite for slepassage."""
