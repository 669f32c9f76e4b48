from fractions import Fraction

import numpy as np
import pytest

from bgconv.conv import StandardConv, balanced_from_standard, extract_block_diagonal
from bgconv.cost import LayerSpec, LayerVariant, op_count, param_count
from bgconv.errors import ConfigurationError


def test_table2_layer_shape():
    cost = op_count(LayerSpec(1024, 1024, 9, 49, 2, "bgc"))
    assert cost.conv_ops == 462_422_016
    assert cost.mean_ops == 50_176
    assert cost.total_ops == cost.conv_ops + cost.mean_ops


def test_bgc_single_group_exceeds_standard():
    m, n, K, D = 8, 12, 3, 10
    bgc = op_count(LayerSpec(m, n, K, D, 1, "bgc"))
    std = op_count(LayerSpec(m, n, K, D, 1, "standard"))
    assert bgc.total_ops == 2 * K * D * m * n + D * n > std.total_ops == K * D * m * n


def test_depthwise_limit():
    assert op_count(LayerSpec(32, 32, 3, 7, 32, "gc")).conv_ops == 3 * 7 * 32


def test_param_count_examples():
    assert param_count(LayerSpec(256, 256, 3, 1, 4, "gc")) == 49_152
    assert param_count(LayerSpec(256, 256, 3, 1, 4, "bgc")) == 2 * 49_152
    assert param_count(LayerSpec(6, 9, 5, 1, 1, "gc")) == param_count(LayerSpec(6, 9, 5, 1, 1, "standard"))


def test_standard_ignores_groups():
    spec = LayerSpec(6, 9, 5, 3, 7, "standard")
    assert spec.N == 1
    assert op_count(spec).conv_ops == 5 * 3 * 6 * 9


def test_divisibility_error_names_both_counts():
    with pytest.raises(ConfigurationError, match="N=7.*256"):
        LayerSpec(256, 256, 3, 32, 7, "gc")


@pytest.mark.parametrize("N", [1, 2, 4, 8, 16])
def test_conv_ratio_is_two_over_n(N):
    bgc = op_count(LayerSpec(64, 32, 9, 100, N, "bgc"))
    std = op_count(LayerSpec(64, 32, 9, 100, 1, "standard"))
    assert Fraction(bgc.conv_ops, std.conv_ops) == Fraction(2, N)


def test_counts_match_constructed_operators():
    rng = np.random.default_rng(0)
    for m, n, K, N in [(4, 6, 3, 2), (8, 8, 1, 4), (9, 3, 5, 3), (2, 2, 3, 1)]:
        W = StandardConv(rng.standard_normal((m, n, K)))
        assert param_count(LayerSpec(m, n, K, 1, 1, LayerVariant.STANDARD)) == W.num_params
        assert param_count(LayerSpec(m, n, K, 1, N, "gc")) == extract_block_diagonal(W, N).num_params
        assert param_count(LayerSpec(m, n, K, 1, N, "bgc")) == balanced_from_standard(W, N).num_params
