"""Class-conditional image generator.

The noise vector is split into equal chunks: chunk 0 feeds the initial
projection, chunk ``i`` (1-based) conditions res-block-up ``i`` and the last
chunk conditions the output normalization. Every conditional normalization
sees ``chunk || class embedding``. One self-attention block sits before the
last res-block-up.
"""

import logging
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..exceptions import ConfigError, ShapeError
from .layers import ConditionalBatchNorm, ResBlockUp, SelfAttention, conv2d, init_weights, linear

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeneratorConfig:
    noise_dim: int = 120
    chunk_dim: int = 20
    class_emb_dim: int = 128
    class_count: int = 14
    base_channels: int = 16
    image_size: int = 128
    up_block_count: int = 4
    spectral_norm: bool = True
    power_iterations: int = 1

    def __post_init__(self):
        if self.chunk_dim < 1 or self.noise_dim % self.chunk_dim:
            raise ConfigError(
                "noise_dim {} is not divisible by chunk_dim {}".format(
                    self.noise_dim, self.chunk_dim
                )
            )
        if self.chunk_count != self.up_block_count + 2:
            raise ConfigError(
                "noise_dim / chunk_dim must equal up_block_count + 2 "
                "({} chunks for {} blocks)".format(
                    self.chunk_count, self.up_block_count
                )
            )
        size = self.image_size
        if size < 1 or size & (size - 1):
            raise ConfigError("image_size must be a power of two, got {}".format(size))
        if size < 2 ** self.up_block_count:
            raise ConfigError(
                "{} up blocks overshoot a {} px output".format(self.up_block_count, size)
            )
        if self.class_count < 1:
            raise ConfigError("class_count must be positive")

    @classmethod
    def from_config(cls, cfg, class_count):
        return cls(
            noise_dim=cfg["generator.noise_dim"],
            chunk_dim=cfg["generator.chunk_dim"],
            class_emb_dim=cfg["generator.class_emb_dim"],
            class_count=class_count,
            base_channels=cfg["generator.base_channels"],
            image_size=cfg["data.image_size"],
            up_block_count=cfg["generator.up_block_count"],
            spectral_norm=cfg["generator.spectral_norm"],
            power_iterations=cfg["critic.power_iterations"],
        )

    @property
    def chunk_count(self):
        return self.noise_dim // self.chunk_dim

    @property
    def initial_grid(self):
        return self.image_size // 2 ** self.up_block_count

    @property
    def channels(self):
        """Feature widths from the initial grid through the last block output."""
        blocks = self.up_block_count
        return [self.base_channels * 2 ** (blocks - i) for i in range(blocks + 1)]

    @property
    def output_size(self):
        return (self.image_size, self.image_size, 3)


def split_noise(z, config):
    """Contiguous ``chunk_dim`` slices of the last dimension of ``z``."""
    if z.shape[-1] != config.noise_dim:
        raise ShapeError("noise must have {} entries, got {}".format(config.noise_dim, z.shape[-1]))
    return list(torch.split(z, config.chunk_dim, dim=-1))


def check_one_hot(y):
    ones = (y == 1).sum(dim=-1)
    nonzero = (y != 0).sum(dim=-1)
    if not bool(((ones == 1) & (nonzero == 1)).all()):
        raise ValueError("label must be one-hot")


class Generator(nn.Module):
    def __init__(self, config):
        super(Generator, self).__init__()
        self.config = config
        sn, iters = config.spectral_norm, config.power_iterations
        cond_dim = config.chunk_dim + config.class_emb_dim
        channels = config.channels
        grid = config.initial_grid

        # one-hot y times this weight selects a column; see embedding_matrix
        self.class_embedding = init_weights(
            nn.Linear(config.class_count, config.class_emb_dim, bias=False)
        )
        self.initial = linear(config.chunk_dim, channels[0] * grid * grid, sn=sn,
                              power_iterations=iters)
        self.blocks = nn.ModuleList(
            ResBlockUp(channels[i], channels[i + 1], cond_dim, sn, iters)
            for i in range(config.up_block_count)
        )
        self.attention_index = config.up_block_count - 1
        self.attention = SelfAttention(channels[self.attention_index], sn, iters)
        self.out_bn = ConditionalBatchNorm(channels[-1], cond_dim, sn, iters)
        self.out_conv = conv2d(channels[-1], 3, 3, sn, iters)

    @property
    def embedding_matrix(self):
        """k x class_emb_dim; row ``c`` is the embedding of class ``c``."""
        return self.class_embedding.weight.t()

    def embed_label(self, y):
        check_one_hot(y)
        return self.class_embedding(y)

    def forward(self, z, y):
        if z.shape[0] != y.shape[0]:
            raise ShapeError(
                "batch size mismatch: {} noise vectors, {} labels".format(z.shape[0], y.shape[0])
            )
        chunks = split_noise(z, self.config)
        y_emb = self.embed_label(y)
        grid = self.config.initial_grid

        h = self.initial(chunks[0]).reshape(z.shape[0], self.config.channels[0], grid, grid)
        for i, block in enumerate(self.blocks):
            if i == self.attention_index:
                h = self.attention(h)
            h = block(h, torch.cat([chunks[i + 1], y_emb], dim=1))
        h = F.relu(self.out_bn(h, torch.cat([chunks[-1], y_emb], dim=1)))
        return torch.tanh(self.out_conv(h))
