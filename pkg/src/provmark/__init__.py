"""provmark: robustness benchmark for latent and spatial invisible watermarks."""

__version__ = "0.1.0"
