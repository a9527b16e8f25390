import numpy as np
import torch

from ..constants import ROTATION_ANGLES
from ..exceptions import ShapeError


def rotation_index(angle):
    """Label index of a rotation angle in degrees."""
    if angle not in ROTATION_ANGLES:
        raise ValueError(
            "rotation angle must be one of {}, got {}".format(ROTATION_ANGLES, angle)
        )
    return ROTATION_ANGLES.index(angle)


def rotate_image(image, angle):
    """Rotate an H x W x C array by a multiple of 90 degrees.

    Pure index permutation, so pixel values (and their sum) are preserved.
    """
    quarter_turns = rotation_index(angle)
    if image.shape[0] != image.shape[1]:
        raise ShapeError("rotation requires square image")
    return np.ascontiguousarray(np.rot90(image, k=quarter_turns, axes=(0, 1)))


def rotate_batch(images, rotation_labels):
    """Rotate each N x C x H x W image by ``90 * rotation_labels[i]`` degrees.

    Uses the same direction as ``rotate_image`` on H x W x C arrays.
    """
    if images.shape[2] != images.shape[3]:
        raise ShapeError("rotation requires square image")
    return torch.stack(
        [
            torch.rot90(image, k=int(k), dims=(1, 2))
            for image, k in zip(images, rotation_labels.tolist())
        ]
    )
