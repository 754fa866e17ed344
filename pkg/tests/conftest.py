import numpy as np
import pytest

from hybeam.channel import sample_channel
from hybeam.config import ScenarioConfig
from hybeam.design import assemble_problem, select_rf_combiner
from hybeam.network import PriorModel, fc_from_config, sample_nodes


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hpd(rng, n, ridge=0.5):
    b = crandn(rng, n, n)
    return b @ b.conj().T + ridge * np.eye(n)


SMALL_CFG = ScenarioConfig(
    m_nodes=2, n_t=3, n_r=6, p=2, q=2, n_cl=4, n_rf_node=2, n_rf_fc=2,
    snr_ob_db=10.0, snr_fc_db=10.0,
)


def make_problem(rng, cfg=SMALL_CFG):
    """One sampled scenario instance: channel, nodes, and its assembled QP."""
    chan = sample_channel(cfg, rng)
    nodes = sample_nodes(cfg, rng)
    prior = PriorModel.identity(cfg.p)
    fc = fc_from_config(cfg)
    w_rf = select_rf_combiner(chan, cfg.n_rf_fc)
    prob = assemble_problem(chan.h, nodes, prior, fc, w_rf)
    return chan, nodes, prior, fc, w_rf, prob


def dense_blocks(blocks):
    """Stack (m, a, b) per-node blocks into the full block-diagonal matrix."""
    m, a, b = blocks.shape
    out = np.zeros((m * a, m * b), dtype=complex)
    for i in range(m):
        out[i * a : (i + 1) * a, i * b : (i + 1) * b] = blocks[i]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
