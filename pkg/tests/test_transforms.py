import numpy as np
import pytest
import torch

from pairgen.data.transforms import (
    rotate_batch,
    rotate_image,
    rotation_index,
)
from pairgen.exceptions import ShapeError


@pytest.fixture
def image():
    return np.random.RandomState(0).uniform(-1, 1, size=(8, 8, 3)).astype(np.float32)


def test_rotation_index():
    assert [rotation_index(a) for a in (0, 90, 180, 270)] == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        rotation_index(45)


def test_rotate_image_preserves_pixels(image):
    for angle in (0, 90, 180, 270):
        rotated = rotate_image(image, angle)
        assert rotated.shape == image.shape
        assert np.isclose(rotated.sum(), image.sum())
    np.testing.assert_array_equal(rotate_image(image, 0), image)


def test_four_quarter_turns_are_identity(image):
    rotated = image
    for _ in range(4):
        rotated = rotate_image(rotated, 90)
    np.testing.assert_array_equal(rotated, image)
    np.testing.assert_array_equal(
        rotate_image(rotate_image(image, 90), 90), rotate_image(image, 180)
    )


def test_rotate_image_requires_square():
    with pytest.raises(ShapeError):
        rotate_image(np.zeros((4, 6, 3)), 90)


def test_rotate_batch_matches_rotate_image(image):
    batch = torch.from_numpy(image.transpose(2, 0, 1).copy())[None].repeat(4, 1, 1, 1)
    rotated = rotate_batch(batch, torch.arange(4))
    for k, angle in enumerate((0, 90, 180, 270)):
        np.testing.assert_array_equal(
            rotated[k].permute(1, 2, 0).numpy(), rotate_image(image, angle)
        )
