"""Small CNN classifier for toy images.

It plays three parts: feature extractor for FID, default image encoder of the
report decoder, and the downstream classifier of augmentation experiments.
``features`` returns the penultimate activations.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..exceptions import ConfigError, ShapeError


@dataclass(frozen=True)
class ClassifierConfig:
    image_size: int = 32
    class_count: int = 4
    channels: int = 16
    feature_dim: int = 128

    def __post_init__(self):
        size = self.image_size
        if size < 8 or size & (size - 1):
            raise ConfigError("classifier image_size must be a power of two >= 8")

    @classmethod
    def from_config(cls, cfg, class_count):
        return cls(
            image_size=cfg["data.image_size"],
            class_count=class_count,
            channels=cfg["classifier.channels"],
            feature_dim=cfg["classifier.feature_dim"],
        )


class ToyClassifier(nn.Module):
    def __init__(self, config):
        super(ToyClassifier, self).__init__()
        self.config = config
        layers = []
        in_channels = 3
        size = config.image_size
        width = config.channels
        while size > 4:
            layers += [nn.Conv2d(in_channels, width, 3, padding=1), nn.ReLU(), nn.AvgPool2d(2)]
            in_channels, width, size = width, width * 2, size // 2
        self.conv = nn.Sequential(*layers)
        self.fc = nn.Linear(in_channels * 16, config.feature_dim)
        self.head = nn.Linear(config.feature_dim, config.class_count)
        self.register_buffer("trained", torch.zeros((), dtype=torch.bool))

    @property
    def is_trained(self):
        return bool(self.trained)

    def mark_trained(self):
        self.trained.fill_(True)

    def check_input(self, images):
        expected = (3, self.config.image_size, self.config.image_size)
        if images.dim() != 4 or tuple(images.shape[1:]) != expected:
            raise ShapeError(
                "expected N x {} x {} x {} images, got {}".format(*expected, tuple(images.shape))
            )

    def features(self, images):
        self.check_input(images)
        return F.relu(self.fc(self.conv(images).flatten(1)))

    def forward(self, images):
        return self.head(self.features(images))
