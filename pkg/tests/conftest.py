import pytest
import torch

from pairgen.artifacts import Corpus, GenerationBundle
from pairgen.config import RunConfig
from pairgen.data.manifest import collate
from pairgen.data.toy import ToyDataConfig, generate_toy_dataset, write_toy_dataset
from pairgen.data.vocabulary import build_vocabulary
from pairgen.models.bundle import build_models

TINY = {
    "data.n_samples": 48,
    "data.class_count": 4,
    "data.image_size": 32,
    "data.min_count": 1,
    "generator.noise_dim": 12,
    "generator.chunk_dim": 2,
    "generator.class_emb_dim": 8,
    "generator.base_channels": 4,
    "decoder.embed_dim": 8,
    "decoder.sentence_hidden": 16,
    "decoder.topic_hidden": 16,
    "decoder.word_hidden": 16,
    "decoder.word_layers": 2,
    "decoder.t_max": 3,
    "decoder.l_max": 6,
    "critic.base_channels": 4,
    "critic.joint_base_channels": 4,
    "critic.embed_dim": 8,
    "critic.hidden_dim": 16,
    "critic.report_emb_dim": 8,
    "classifier.channels": 4,
    "classifier.feature_dim": 16,
    "classifier.epochs": 1,
    "classifier.batch_size": 16,
    "pretrain.steps": 2,
    "pretrain.batch_size": 8,
    "pretrain.log_every": 1,
    "train.batch_size": 8,
    "train.total_g_steps": 2,
    "train.log_every": 1,
    "train.checkpoint_every": 2,
    "train.fid_count": 16,
    "eval.sample_count": 8,
    "experiment.real_count": 16,
    "experiment.synth_counts": [0, 8],
    "experiment.seeds": [0, 1],
    "experiment.captioner_steps": 2,
    "generate.count": 8,
    "export.count": 4,
}


@pytest.fixture
def tiny_values():
    return dict(TINY)


@pytest.fixture
def tiny_cfg(tiny_values):
    return RunConfig(tiny_values)


@pytest.fixture(scope="session")
def toy_corpus():
    return generate_toy_dataset(
        ToyDataConfig(n_samples=TINY["data.n_samples"], class_count=4, image_size=32, seed=0)
    )


@pytest.fixture(scope="session")
def vocab(toy_corpus):
    return build_vocabulary([r.report for r in toy_corpus.manifest.records], 1)


@pytest.fixture(scope="session")
def samples(toy_corpus, vocab):
    return toy_corpus.samples(vocab)


@pytest.fixture
def batch(samples):
    return collate(samples[:8], TINY["decoder.t_max"], TINY["decoder.l_max"])


@pytest.fixture
def batch64(batch):
    return batch.to(torch.float64)


@pytest.fixture
def models(tiny_cfg, vocab):
    torch.manual_seed(0)
    return build_models(tiny_cfg, 4, vocab.size)


@pytest.fixture
def models64(models):
    return models.to(torch.float64)


@pytest.fixture
def data_dir(tmpdir, toy_corpus):
    path = str(tmpdir.join("data"))
    write_toy_dataset(toy_corpus, path, min_count=1)
    return path


@pytest.fixture
def gen():
    generator = torch.Generator()
    generator.manual_seed(0)
    return generator


@pytest.fixture(scope="session")
def corpus(toy_corpus, vocab, samples):
    return Corpus(toy_corpus.manifest, vocab, samples)


@pytest.fixture
def bundle(tiny_cfg, vocab, models):
    for module in models.named().values():
        module.eval()
    return GenerationBundle(tiny_cfg, vocab, 4, models, {})
