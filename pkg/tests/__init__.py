"""Tests package for macsim."""
