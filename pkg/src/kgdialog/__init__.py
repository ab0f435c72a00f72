"""Knowledge-grounded dialogue with sequential latent knowledge selection."""

__version__ = "0.1.0"
