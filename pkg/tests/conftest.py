import numpy as np
import pytest

from bfly import core


def make_stripe(params: core.CodeParams, rng: np.random.Generator) -> core.Stripe:
    """Random consistent stripe (virtual column zero, parities encoded)."""
    data = np.zeros((params.rows, params.k, params.block_size), dtype=np.uint8)
    data[:, :params.k_user] = rng.integers(
        0, 256, size=(params.rows, params.k_user, params.block_size),
        dtype=np.uint8)
    return core.Stripe.from_data(params, data)


def survivor_columns(params: core.CodeParams, stripe: core.Stripe,
                     pattern: core.ErasurePattern) -> dict[core.NodeId, np.ndarray]:
    """Column map for decode_erasures: every stored node not in the pattern."""
    out = {}
    for node in core.all_nodes(params):
        if node in pattern:
            continue
        if node == core.HORIZONTAL:
            out[node] = stripe.h
        elif node == core.BUTTERFLY:
            out[node] = stripe.b
        else:
            out[node] = stripe.data[:, node.index]
    return out


def all_patterns(params: core.CodeParams, sizes=(1, 2)) -> list[core.ErasurePattern]:
    import itertools
    nodes = core.all_nodes(params)
    pats = []
    if 1 in sizes:
        pats += [core.ErasurePattern.of(n) for n in nodes]
    if 2 in sizes:
        pats += [core.ErasurePattern.of(a, b)
                 for a, b in itertools.combinations(nodes, 2)]
    return pats


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0xB7F1)
