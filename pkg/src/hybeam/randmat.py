"""Random complex matrices and PSD square roots."""

from __future__ import annotations

import numpy as np


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. circularly-symmetric complex Gaussian entries, unit variance."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Hermitian square root of a PSD matrix.

    Eigenvalues that dip slightly negative from rounding are clamped to zero
    so that correlation matrices stay usable.
    """
    a = np.asarray(a, dtype=complex)
    w, u = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    return (u * np.sqrt(w)) @ u.conj().T
