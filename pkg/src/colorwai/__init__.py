"""colorwai: generative colorway creation via latent-space color disentanglement.

Backends (a procedural texture generator and a small trained diffusion model)
expose semantic latent spaces; per-color directions are fitted with three
methods (hyperplane classifier, standardized mean deviation, Shapley-filtered
classifier) and applied as latent edits, with hue-aware evaluation metrics.
"""

from colorwai._kernels import KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
