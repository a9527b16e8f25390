"""Classification metrics: accuracy, rank AUC and conditioning accuracy."""

import numpy as np
import scipy.stats
import torch
import torch.nn.functional as F

from ..exceptions import ShapeError
from .fid import generate_balanced_images


def accuracy(predictions, labels):
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ShapeError("predictions and labels differ in shape")
    if labels.size == 0:
        raise ValueError("accuracy of an empty set")
    return float((predictions == labels).mean())


def auc(scores, binary_labels):
    """Mann-Whitney AUC; tied scores count one half.

    Computed from average ranks: (R_pos - n_pos (n_pos + 1) / 2) / (n_pos n_neg).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(binary_labels).astype(bool)
    if scores.shape != labels.shape:
        raise ShapeError("scores and labels differ in shape")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative label")
    ranks = scipy.stats.rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def per_class_auc(score_matrix, labels):
    """One-vs-rest AUC for every score column; None where the class is absent from ``labels``."""
    score_matrix = np.asarray(score_matrix, dtype=np.float64)
    labels = np.asarray(labels)
    present = set(np.unique(labels).tolist())
    if len(present) < 2:
        raise ValueError("AUC needs at least two classes")
    return [
        auc(score_matrix[:, c], labels == c) if c in present else None
        for c in range(score_matrix.shape[1])
    ]


def macro_auc(score_matrix, labels):
    """One-vs-rest AUC averaged over the classes present in ``labels``."""
    return float(np.mean([a for a in per_class_auc(score_matrix, labels) if a is not None]))


def conditioning_accuracy(generator, classifier, count, seed):
    """Fraction of class-balanced generated images the classifier assigns to their class."""
    images, label_index = generate_balanced_images(generator, count, seed)
    dtype = next(classifier.parameters()).dtype
    classifier.eval()
    with torch.no_grad():
        probs = F.softmax(classifier(images.to(dtype)), dim=1)
    return accuracy(probs.argmax(dim=1).numpy(), label_index.numpy())
