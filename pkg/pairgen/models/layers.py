"""Building blocks shared by the generator and the critics."""

import torch
import torch.nn.functional as F
from torch import nn

from ..exceptions import ShapeError
from .spectral import spectral_norm


def init_weights(layer):
    """Orthogonal weights, zero biases."""
    nn.init.orthogonal_(layer.weight)
    if getattr(layer, "bias", None) is not None:
        nn.init.zeros_(layer.bias)
    return layer


def conv2d(in_channels, out_channels, kernel_size, sn=True, power_iterations=1):
    layer = init_weights(
        nn.Conv2d(in_channels, out_channels, kernel_size, padding=kernel_size // 2)
    )
    return spectral_norm(layer, sn, power_iterations)


def linear(in_features, out_features, bias=True, sn=True, power_iterations=1):
    layer = init_weights(nn.Linear(in_features, out_features, bias=bias))
    return spectral_norm(layer, sn, power_iterations)


def upsample(x):
    return F.interpolate(x, scale_factor=2, mode="nearest")


class ConditionalBatchNorm(nn.Module):
    """Batch norm whose per-channel gain and bias are affine in a condition vector.

    ``out = bn(x) * (1 + gain(cond)) + bias(cond)``; the normalization itself
    carries no affine parameters.
    """

    def __init__(self, num_features, cond_dim, sn=True, power_iterations=1):
        super(ConditionalBatchNorm, self).__init__()
        self.cond_dim = cond_dim
        self.bn = nn.BatchNorm2d(num_features, affine=False)
        self.gain = linear(cond_dim, num_features, sn=sn, power_iterations=power_iterations)
        self.bias = linear(cond_dim, num_features, sn=sn, power_iterations=power_iterations)

    def forward(self, x, cond):
        if cond.dim() != 2 or cond.shape[1] != self.cond_dim:
            raise ShapeError(
                "condition must be N x {}, got {}".format(self.cond_dim, tuple(cond.shape))
            )
        gain = 1.0 + self.gain(cond)
        bias = self.bias(cond)
        return self.bn(x) * gain[:, :, None, None] + bias[:, :, None, None]


class ResBlockUp(nn.Module):
    """condBN, ReLU, 2x nearest upsample, 3x3 conv, condBN, ReLU, 3x3 conv; plus a 1x1 shortcut."""

    def __init__(self, in_channels, out_channels, cond_dim, sn=True, power_iterations=1):
        super(ResBlockUp, self).__init__()
        self.bn1 = ConditionalBatchNorm(in_channels, cond_dim, sn, power_iterations)
        self.conv1 = conv2d(in_channels, out_channels, 3, sn, power_iterations)
        self.bn2 = ConditionalBatchNorm(out_channels, cond_dim, sn, power_iterations)
        self.conv2 = conv2d(out_channels, out_channels, 3, sn, power_iterations)
        self.shortcut = conv2d(in_channels, out_channels, 1, sn, power_iterations)

    def main_path(self, x, cond):
        h = F.relu(self.bn1(x, cond))
        h = self.conv1(upsample(h))
        h = F.relu(self.bn2(h, cond))
        return self.conv2(h)

    def forward(self, x, cond):
        return self.main_path(x, cond) + self.shortcut(upsample(x))


class SelfAttention(nn.Module):
    def __init__(self, channels, sn=True, power_iterations=1):
        super(SelfAttention, self).__init__()
        key_channels = max(1, channels // 8)
        self.query = conv2d(channels, key_channels, 1, sn, power_iterations)
        self.key = conv2d(channels, key_channels, 1, sn, power_iterations)
        self.value = conv2d(channels, channels, 1, sn, power_iterations)
        self.gamma = nn.Parameter(torch.zeros(()))

    def attention_map(self, x):
        """N x (HW) x (HW) weights; row ``i`` is query position ``i``'s distribution over keys."""
        n, _, h, w = x.shape
        q = self.query(x).reshape(n, -1, h * w)
        k = self.key(x).reshape(n, -1, h * w)
        return torch.softmax(torch.bmm(q.transpose(1, 2), k), dim=-1)

    def forward(self, x):
        n, c, h, w = x.shape
        attn = self.attention_map(x)
        v = self.value(x).reshape(n, c, h * w)
        out = torch.bmm(v, attn.transpose(1, 2)).reshape(n, c, h, w)
        return x + self.gamma * out


class ResBlockDown(nn.Module):
    """ReLU, 3x3 conv, ReLU, 3x3 conv, 2x2 average pool; plus a pooled 1x1 shortcut.

    The first block of a critic sees raw pixels and skips the leading ReLU.
    """

    def __init__(self, in_channels, out_channels, preactivation=True, sn=True, power_iterations=1):
        super(ResBlockDown, self).__init__()
        self.preactivation = preactivation
        self.conv1 = conv2d(in_channels, out_channels, 3, sn, power_iterations)
        self.conv2 = conv2d(out_channels, out_channels, 3, sn, power_iterations)
        self.shortcut = conv2d(in_channels, out_channels, 1, sn, power_iterations)

    def forward(self, x):
        h = F.relu(x) if self.preactivation else x
        h = self.conv2(F.relu(self.conv1(h)))
        h = F.avg_pool2d(h, 2)
        return h + F.avg_pool2d(self.shortcut(x), 2)


def down_stack(in_channels, base_channels, image_size, sn=True, power_iterations=1):
    """Res-block-down stack from ``image_size`` to a 4 x 4 map, doubling channels per block.

    :return: (nn.Sequential, output channel count)
    """
    depth = image_size.bit_length() - 3
    if depth < 1 or image_size != 4 << depth:
        raise ShapeError("critic input size must be a power of two >= 8, got {}".format(image_size))
    blocks = []
    channels = in_channels
    for i in range(depth):
        out = base_channels * 2 ** i
        blocks.append(ResBlockDown(channels, out, preactivation=i > 0, sn=sn,
                                   power_iterations=power_iterations))
        channels = out
    return nn.Sequential(*blocks), channels


def parameter_count(module):
    return sum(p.numel() for p in module.parameters())
