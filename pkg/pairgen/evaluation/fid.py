"""Frechet distance between Gaussians fit to classifier features.

FID = |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)). The trace of the
matrix square root is taken from the eigenvalues of the symmetric
``sqrt(S_a) S_b sqrt(S_a)``, with eigenvalues clamped at zero.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import torch
import torch.nn.functional as F

from ..exceptions import NumericalError, ShapeError
from ..utils import torch_generator

logger = logging.getLogger(__name__)

IMAGINARY_TOLERANCE = 1e-6


@dataclass(frozen=True)
class GaussianSummary:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        d = self.mu.shape[0]
        if self.sigma.shape != (d, d):
            raise ShapeError("covariance must be {0} x {0}, got {1}".format(d, self.sigma.shape))
        if not np.allclose(self.sigma, self.sigma.T, rtol=0.0, atol=1e-8):
            raise ValueError("covariance must be symmetric")

    @property
    def dim(self):
        return self.mu.shape[0]


def fit_gaussian(features):
    """Mean and (n - 1)-normalized covariance of an n x d feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ShapeError("features must be an n x d matrix")
    if features.shape[0] < 2:
        raise ValueError("need ≥ 2 samples")
    mu = features.mean(axis=0)
    centered = features - mu
    sigma = centered.T @ centered / (features.shape[0] - 1)
    return GaussianSummary(mu, (sigma + sigma.T) / 2.0)


def _psd_sqrt(matrix):
    eigenvalues, vectors = scipy.linalg.eigh(matrix)
    return (vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ vectors.T


def _imaginary_residue(a, b):
    """Largest imaginary part among the eigenvalues of ``S_a S_b``, and its scale.

    The product of two positive semi-definite matrices has a real spectrum, so
    the eigenvalues are only computed when a covariance has a negative eigenvalue.
    """
    spectra = [scipy.linalg.eigvalsh(a.sigma), scipy.linalg.eigvalsh(b.sigma)]
    scale = max(1.0, max(float(np.max(np.abs(s))) for s in spectra))
    if min(float(s.min()) for s in spectra) >= -IMAGINARY_TOLERANCE * scale:
        return 0.0, scale
    product_eigenvalues = scipy.linalg.eigvals(a.sigma @ b.sigma)
    scale = max(scale, float(np.max(np.abs(product_eigenvalues))))
    return float(np.max(np.abs(product_eigenvalues.imag))), scale


def fid(a, b):
    if a.dim != b.dim:
        raise ShapeError("feature dimensions differ: {} vs {}".format(a.dim, b.dim))

    residue, scale = _imaginary_residue(a, b)
    if residue > IMAGINARY_TOLERANCE * scale:
        raise NumericalError(
            "covariance product has complex eigenvalues",
            diagnostics={"max_imaginary": residue, "scale": scale},
        )

    root_a = _psd_sqrt(a.sigma)
    middle = root_a @ b.sigma @ root_a
    middle = (middle + middle.T) / 2.0
    trace_covmean = np.sqrt(np.clip(scipy.linalg.eigvalsh(middle), 0.0, None)).sum()

    diff = a.mu - b.mu
    return float(diff @ diff + np.trace(a.sigma) + np.trace(b.sigma) - 2.0 * trace_covmean)


def extract_features(images, extractor, batch_size=256, allow_untrained=False):
    """Penultimate classifier activations of N x C x H x W ``images`` as a float64 matrix."""
    if not allow_untrained and not extractor.is_trained:
        raise ValueError("feature extractor is untrained")
    dtype = next(extractor.parameters()).dtype
    was_training = extractor.training
    extractor.eval()
    rows = []
    with torch.no_grad():
        for start in range(0, images.shape[0], batch_size):
            chunk = images[start:start + batch_size].to(dtype)
            rows.append(extractor.features(chunk).cpu().double().numpy())
    extractor.train(was_training)
    return np.concatenate(rows, axis=0)


def balanced_labels(count, class_count):
    return torch.arange(count) % class_count


def generate_balanced_images(generator, count, seed, batch_size=256):
    """Class-balanced images from a fixed seed, generated in eval mode."""
    config = generator.config
    rng = torch_generator(seed)
    dtype = next(generator.parameters()).dtype
    label_index = balanced_labels(count, config.class_count)
    z = torch.randn(count, config.noise_dim, generator=rng, dtype=dtype)
    labels = F.one_hot(label_index, config.class_count).to(dtype)
    was_training = generator.training
    generator.eval()
    with torch.no_grad():
        images = torch.cat([
            generator(z[i:i + batch_size], labels[i:i + batch_size])
            for i in range(0, count, batch_size)
        ])
    generator.train(was_training)
    return images, label_index


class FidMonitor(object):
    """FID of a generator's fixed-seed samples against a fixed set of real images."""

    def __init__(self, extractor, real_images, seed, count=None):
        self.extractor = extractor
        self.seed = seed
        self.count = count or real_images.shape[0]
        self.reference = fit_gaussian(extract_features(real_images, extractor))

    def __call__(self, generator):
        images, _ = generate_balanced_images(generator, self.count, self.seed)
        return fid(self.reference, fit_gaussian(extract_features(images, self.extractor)))
