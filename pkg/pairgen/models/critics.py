"""Image, report and joint critics.

Every critic returns raw logits. Report inputs are either padded word ids
(N x L, long) or per-token probability vectors (N x L x V, float); each
critic embeds them with its own table, so a one-hot probability vector scores
exactly like its id.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence

from .. import constants
from ..data.transforms import rotate_batch, rotation_index
from ..exceptions import ConfigError, ShapeError
from .layers import down_stack, linear


@dataclass(frozen=True)
class CriticConfig:
    image_size: int = 32
    class_count: int = 4
    vocab_size: int = 64
    base_channels: int = 16
    joint_base_channels: int = 8
    embed_dim: int = 64
    hidden_dim: int = 128
    report_emb_dim: int = 64
    power_iterations: int = 1

    def __post_init__(self):
        if self.power_iterations < 0:
            raise ConfigError("power_iterations must be non-negative")

    @classmethod
    def from_config(cls, cfg, class_count, vocab_size):
        return cls(
            image_size=cfg["data.image_size"],
            class_count=class_count,
            vocab_size=vocab_size,
            base_channels=cfg["critic.base_channels"],
            joint_base_channels=cfg["critic.joint_base_channels"],
            embed_dim=cfg["critic.embed_dim"],
            hidden_dim=cfg["critic.hidden_dim"],
            report_emb_dim=cfg["critic.report_emb_dim"],
            power_iterations=cfg["critic.power_iterations"],
        )


@dataclass
class ImageCriticOutput:
    adv_score: torch.Tensor
    rotation_logits: torch.Tensor
    features: torch.Tensor


@dataclass
class JointEmbedding:
    image_part: torch.Tensor
    report_part: torch.Tensor
    combined: torch.Tensor


def check_images(images, size):
    if images.dim() != 4 or tuple(images.shape[1:]) != (3, size, size):
        raise ShapeError(
            "expected N x 3 x {0} x {0} images, got {1}".format(size, tuple(images.shape))
        )


def embed_tokens(embedding, tokens):
    if tokens.is_floating_point():
        return tokens @ embedding.weight
    return embedding(tokens)


class ReportEncoder(nn.Module):
    """Token embedding plus an LSTM; returns the final hidden state of each report."""

    def __init__(self, vocab_size, embed_dim, hidden_dim):
        super(ReportEncoder, self).__init__()
        self.embedding = nn.Embedding(vocab_size, embed_dim, padding_idx=constants.PAD_ID)
        self.lstm = nn.LSTM(embed_dim, hidden_dim, batch_first=True)

    def forward(self, tokens, lengths):
        lengths = torch.as_tensor(lengths, dtype=torch.long).cpu()
        if tokens.shape[0] == 0 or bool((lengths < 1).any()):
            raise ValueError("empty report")
        packed = pack_padded_sequence(
            embed_tokens(self.embedding, tokens), lengths, batch_first=True, enforce_sorted=False
        )
        _, (h, _) = self.lstm(packed)
        return h[-1]


class ImageCritic(nn.Module):
    """Projection critic ``c_rf(f) + <f, W y>`` over pooled features ``f``, plus a rotation head."""

    def __init__(self, config):
        super(ImageCritic, self).__init__()
        self.config = config
        iters = config.power_iterations
        self.backbone, channels = down_stack(3, config.base_channels, config.image_size,
                                             power_iterations=iters)
        self.feature_dim = channels
        self.c_rf = linear(channels, 1, power_iterations=iters)
        self.projection = linear(config.class_count, channels, bias=False, power_iterations=iters)
        self.rotation = linear(channels, len(constants.ROTATION_ANGLES), power_iterations=iters)

    def features(self, images):
        check_images(images, self.config.image_size)
        return F.relu(self.backbone(images)).sum(dim=(2, 3))

    def rotation_logits(self, features):
        return self.rotation(features)

    def score(self, features, y):
        """All-zero rows of ``y`` (unlabeled images) drop the projection term."""
        if y.shape != (features.shape[0], self.config.class_count):
            raise ShapeError(
                "labels must be N x {}, got {}".format(self.config.class_count, tuple(y.shape))
            )
        return self.c_rf(features).squeeze(1) + (features * self.projection(y)).sum(dim=1)

    def forward(self, images, y):
        features = self.features(images)
        return ImageCriticOutput(
            adv_score=self.score(features, y),
            rotation_logits=self.rotation_logits(features),
            features=features,
        )


class ReportCritic(nn.Module):
    def __init__(self, config):
        super(ReportCritic, self).__init__()
        iters = config.power_iterations
        self.encoder = ReportEncoder(config.vocab_size, config.embed_dim, config.hidden_dim)
        self.fc1 = linear(config.hidden_dim, config.hidden_dim, power_iterations=iters)
        self.fc2 = linear(config.hidden_dim, 1, power_iterations=iters)

    def forward(self, tokens, lengths):
        h = self.encoder(tokens, lengths)
        return self.fc2(F.relu(self.fc1(h))).squeeze(1)


class JointCritic(nn.Module):
    """Scores a pair from the concatenation of a flattened image map and a report embedding."""

    def __init__(self, config):
        super(JointCritic, self).__init__()
        self.config = config
        iters = config.power_iterations
        self.image_net, channels = down_stack(3, config.joint_base_channels, config.image_size,
                                              power_iterations=iters)
        self.image_dim = channels * 16
        self.report_encoder = ReportEncoder(config.vocab_size, config.embed_dim, config.hidden_dim)
        self.report_proj = linear(config.hidden_dim, config.report_emb_dim, power_iterations=iters)
        self.fc1 = linear(self.image_dim + config.report_emb_dim, config.hidden_dim,
                          power_iterations=iters)
        self.fc2 = linear(config.hidden_dim, 1, power_iterations=iters)

    def embed(self, images, tokens, lengths):
        check_images(images, self.config.image_size)
        if images.shape[0] != tokens.shape[0]:
            raise ShapeError("image and report batch sizes differ")
        image_part = F.relu(self.image_net(images)).flatten(1)
        report_part = self.report_proj(self.report_encoder(tokens, lengths))
        return JointEmbedding(
            image_part=image_part,
            report_part=report_part,
            combined=torch.cat([image_part, report_part], dim=1),
        )

    def score_embedding(self, embedding):
        return self.fc2(F.relu(self.fc1(embedding.combined))).squeeze(1)

    def forward(self, images, tokens, lengths):
        return self.score_embedding(self.embed(images, tokens, lengths))


def rotation_predict(critic, images, rotation):
    """Rotate ``images``, classify the rotation with the image critic's head.

    :param rotation: an angle in degrees applied to every image, or a tensor
                     of per-image rotation label indices.
    :return: (rotation logits, mean cross-entropy against the true rotation)
    """
    if isinstance(rotation, int):
        labels = torch.full((images.shape[0],), rotation_index(rotation), dtype=torch.long,
                            device=images.device)
    else:
        labels = rotation
    logits = critic.rotation_logits(critic.features(rotate_batch(images, labels)))
    return logits, F.cross_entropy(logits, labels)
