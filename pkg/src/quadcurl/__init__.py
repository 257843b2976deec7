"""Reconstructed discontinuous approximation for the quad-curl problem."""
