"""Latent graph inference over product manifolds of constant-curvature model spaces."""
__version__ = "0.1.0"
