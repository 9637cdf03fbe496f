"""Shared services: exports, job dispatch, logging."""
