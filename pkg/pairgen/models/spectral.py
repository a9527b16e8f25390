"""Spectral normalization by power iteration.

Weights are kept un-normalized as ``weight_bar`` on the wrapped module; the
normalized ``weight`` is recomputed on every forward pass from the current
singular-vector estimates ``u`` and ``v`` (buffers, so optimizers never touch
them). The estimates get a warm start at construction and afterwards advance
only in training mode.
"""

import torch
from torch import nn

EPS = 1e-12
INIT_POWER_ITERATIONS = 15


def l2normalize(vector, eps=EPS):
    return vector / (vector.norm() + eps)


def spectral_normalize(weight, u, v, n_power_iters=1, eps=EPS):
    """Divide ``weight`` by its estimated top singular value.

    :param weight: tensor whose first dimension is the output dimension;
                   convolution kernels are viewed as ``out x rest``.
    :param u: left singular-vector estimate, length ``out``.
    :param v: right singular-vector estimate, length ``rest``.
    :param n_power_iters: power-iteration steps to run before estimating.
    :return: ``(weight / sigma, u, v)`` with the updated estimates.
    """
    matrix = weight.reshape(weight.shape[0], -1)
    with torch.no_grad():
        for _ in range(n_power_iters):
            v = l2normalize(torch.mv(matrix.t(), u), eps)
            u = l2normalize(torch.mv(matrix, v), eps)
    sigma = torch.dot(u, torch.mv(matrix, v)).clamp_min(eps)
    return weight / sigma, u, v


class SpectralNorm(nn.Module):
    def __init__(self, module, power_iterations=1, eps=EPS):
        super(SpectralNorm, self).__init__()
        weight = module.weight
        del module._parameters["weight"]
        module.register_parameter("weight_bar", nn.Parameter(weight.data))

        height = weight.shape[0]
        width = weight[0].numel()
        self.register_buffer("u", l2normalize(weight.data.new_empty(height).normal_(0, 1)))
        self.register_buffer("v", l2normalize(weight.data.new_empty(width).normal_(0, 1)))
        self.module = module
        self.power_iterations = power_iterations
        self.eps = eps
        with torch.no_grad():
            module.weight = self.normalized_weight(INIT_POWER_ITERATIONS)

    def normalized_weight(self, n_power_iters=0):
        weight, u, v = spectral_normalize(
            self.module.weight_bar, self.u, self.v, n_power_iters, self.eps
        )
        if n_power_iters:
            with torch.no_grad():
                self.u.copy_(u)
                self.v.copy_(v)
        return weight

    def matrix(self):
        """Current normalized weight as a 2-D matrix, without advancing the estimates."""
        with torch.no_grad():
            weight = self.normalized_weight()
        return weight.reshape(weight.shape[0], -1)

    def forward(self, *args):
        iters = self.power_iterations if self.training else 0
        self.module.weight = self.normalized_weight(iters)
        return self.module(*args)


def spectral_norm(module, enabled=True, power_iterations=1):
    """Wrap ``module`` in SpectralNorm when ``enabled``; otherwise return it unchanged."""
    if not enabled:
        return module
    return SpectralNorm(module, power_iterations)


def spectral_modules(network):
    return [m for m in network.modules() if isinstance(m, SpectralNorm)]
