import contextlib
import logging
from dataclasses import dataclass

import torch

from .classifier import ClassifierConfig, ToyClassifier
from .critics import CriticConfig, ImageCritic, JointCritic, ReportCritic
from .decoder import DecoderConfig, ReportDecoder
from .generator import Generator, GeneratorConfig
from .layers import parameter_count

logger = logging.getLogger(__name__)

NETWORK_NAMES = ("generator", "decoder", "d_image", "d_report", "d_joint")


@dataclass
class ModelBundle:
    generator: Generator
    decoder: ReportDecoder
    d_image: ImageCritic
    d_report: ReportCritic
    d_joint: JointCritic

    def named(self):
        return {name: getattr(self, name) for name in NETWORK_NAMES}

    def generator_side(self):
        return [self.generator, self.decoder]

    def critics(self):
        return [self.d_image, self.d_report, self.d_joint]

    def trainable_generator_parameters(self):
        return [p for m in self.generator_side() for p in m.parameters() if p.requires_grad]

    def critic_parameters(self):
        return [p for m in self.critics() for p in m.parameters()]

    def to(self, dtype):
        for module in self.named().values():
            module.to(dtype)
        return self

    def state_dicts(self):
        return {name: module.state_dict() for name, module in self.named().items()}

    def load_state_dicts(self, states):
        for name, module in self.named().items():
            module.load_state_dict(states[name])


def build_encoder(cfg, class_count):
    return ToyClassifier(ClassifierConfig.from_config(cfg, class_count))


def build_models(cfg, class_count, vocab_size, encoder=None):
    """Fresh networks for one run; ``encoder`` defaults to an untrained toy classifier."""
    encoder = encoder or build_encoder(cfg, class_count)
    models = ModelBundle(
        generator=Generator(GeneratorConfig.from_config(cfg, class_count)),
        decoder=ReportDecoder(
            DecoderConfig.from_config(cfg, vocab_size, encoder.config.feature_dim), encoder
        ),
        d_image=ImageCritic(CriticConfig.from_config(cfg, class_count, vocab_size)),
        d_report=ReportCritic(CriticConfig.from_config(cfg, class_count, vocab_size)),
        d_joint=JointCritic(CriticConfig.from_config(cfg, class_count, vocab_size)),
    )
    for name, module in models.named().items():
        logger.info("{}: {} parameters".format(name, parameter_count(module)))
    return models


@contextlib.contextmanager
def preserved_buffers(modules):
    """Run the block in the modules' current mode, then restore every buffer.

    Spectral-norm estimates and batch-norm statistics advanced inside the block
    are put back, so sampling from the generator side leaves its state as it was.
    """
    saved = [{name: buf.clone() for name, buf in m.named_buffers()} for m in modules]
    try:
        yield
    finally:
        with torch.no_grad():
            for module, buffers in zip(modules, saved):
                for name, buf in module.named_buffers():
                    buf.copy_(buffers[name])


def set_requires_grad(modules, flag):
    for module in modules:
        for param in module.parameters():
            param.requires_grad_(flag)
