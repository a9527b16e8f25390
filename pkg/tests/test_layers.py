import pytest
import torch

from pairgen.exceptions import ShapeError
from pairgen.models.layers import (
    ConditionalBatchNorm,
    ResBlockDown,
    ResBlockUp,
    SelfAttention,
    down_stack,
    init_weights,
    parameter_count,
)


@pytest.fixture(autouse=True)
def seed():
    torch.manual_seed(0)


def test_init_weights_orthogonal():
    layer = init_weights(torch.nn.Linear(6, 6))
    torch.testing.assert_close(layer.weight @ layer.weight.t(), torch.eye(6), atol=1e-5, rtol=0)
    assert torch.equal(layer.bias, torch.zeros(6))


def test_conditional_batch_norm():
    bn = ConditionalBatchNorm(4, 3)
    x = torch.randn(5, 4, 2, 2)
    assert bn(x, torch.randn(5, 3)).shape == x.shape
    with pytest.raises(ShapeError):
        bn(x, torch.randn(5, 2))


def test_conditional_batch_norm_condition_changes_output():
    bn = ConditionalBatchNorm(4, 3, sn=False)
    bn.eval()
    x = torch.randn(2, 4, 2, 2)
    assert not torch.allclose(bn(x, torch.zeros(2, 3)), bn(x, torch.ones(2, 3)))


def test_res_block_up_doubles_resolution():
    block = ResBlockUp(8, 4, cond_dim=3)
    out = block(torch.randn(2, 8, 4, 4), torch.randn(2, 3))
    assert out.shape == (2, 4, 8, 8)


def test_res_block_down_halves_resolution():
    block = ResBlockDown(3, 6, preactivation=False)
    assert block(torch.randn(2, 3, 8, 8)).shape == (2, 6, 4, 4)


def test_attention_with_zero_gamma_is_identity():
    attention = SelfAttention(16)
    x = torch.randn(2, 16, 4, 4)
    assert torch.equal(attention(x), x)


def test_attention_rows_are_distributions():
    attention = SelfAttention(16)
    weights = attention.attention_map(torch.randn(2, 16, 4, 4))
    assert weights.shape == (2, 16, 16)
    torch.testing.assert_close(weights.sum(dim=-1), torch.ones(2, 16))
    assert (weights >= 0).all()


def test_attention_gamma_mixes_features():
    attention = SelfAttention(16)
    with torch.no_grad():
        attention.gamma.fill_(1.0)
    x = torch.randn(2, 16, 4, 4)
    assert not torch.allclose(attention(x), x)


def test_down_stack():
    stack, channels = down_stack(3, 4, 32)
    assert channels == 16
    assert stack(torch.randn(1, 3, 32, 32)).shape == (1, 16, 4, 4)
    for size in (4, 24):
        with pytest.raises(ShapeError):
            down_stack(3, 4, size)


def test_parameter_count():
    assert parameter_count(torch.nn.Linear(3, 2)) == 8
