"""Greedy factorization of digital precoders into RF and baseband stages.

Each node's digital precoder is approximated as F_RF F_BB where the RF
columns are drawn from the node's transmit array-response dictionary (so
every RF entry has magnitude 1/sqrt(N_T)) and F_BB is the least-squares
baseband fit.  Simultaneous orthogonal matching pursuit picks one dictionary
atom per RF chain: the atom whose correlations with the residual columns have
the largest summed energy, ties broken by lowest column index, previously
selected atoms excluded.  After the last iteration the baseband stage is
rescaled so the hybrid product spends the same Frobenius power as the digital
precoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import DesignProblem, DigitalPrecoder, evaluate_mse_analytic
from .errors import DimensionError
from .linalg import block_diag, vec


@dataclass(frozen=True, eq=False)
class HybridPrecoder:
    """Per-node RF/baseband factors of a digital precoder.

    f_rf : (m, n_t, n_rf) unit-modulus RF stages
    f_bb : (m, n_rf, q) baseband stages
    """

    f_rf: np.ndarray
    f_bb: np.ndarray

    @property
    def effective(self) -> np.ndarray:
        """(m, n_t, q) per-node products F_RF F_BB actually transmitted."""
        return self.f_rf @ self.f_bb


def somp_decompose(
    f_opt: np.ndarray, a_s: np.ndarray, n_rf: int
) -> tuple[np.ndarray, np.ndarray]:
    """Factor one precoder matrix against one array-response dictionary.

    Returns (f_rf, f_bb) with exactly ``n_rf`` dictionary columns selected.
    """
    f_opt = np.asarray(f_opt, dtype=complex)
    a_s = np.asarray(a_s, dtype=complex)
    n_t, n_cl = a_s.shape
    if f_opt.shape[0] != n_t:
        raise DimensionError("precoder and dictionary row counts differ")
    if n_rf > n_cl:
        raise DimensionError(f"cannot select {n_rf} atoms from {n_cl} columns")

    selected: list[int] = []
    residual = f_opt
    f_bb = np.zeros((0, f_opt.shape[1]), dtype=complex)
    for _ in range(n_rf):
        corr = a_s.conj().T @ residual
        score = np.sum(np.abs(corr) ** 2, axis=1)
        score[selected] = -np.inf  # a repeated atom would be linearly dependent
        selected.append(int(np.argmax(score)))
        f_rf = a_s[:, selected]
        qm, rm = np.linalg.qr(f_rf)
        f_bb = np.linalg.solve(rm, qm.conj().T @ f_opt)
        diff = f_opt - f_rf @ f_bb
        norm = np.linalg.norm(diff)
        residual = diff / norm if norm > 1e-300 else diff

    f_rf = a_s[:, selected]
    product_norm = np.linalg.norm(f_rf @ f_bb)
    if product_norm > 1e-300:
        f_bb = f_bb * (np.linalg.norm(f_opt) / product_norm)
    return f_rf, f_bb


def decompose_network(
    precoder: DigitalPrecoder, a_s: np.ndarray, n_rf: int
) -> HybridPrecoder:
    """Run the greedy factorization on every node of a stacked design."""
    pairs = [
        somp_decompose(precoder.per_node[m], a_s[m], n_rf)
        for m in range(precoder.per_node.shape[0])
    ]
    return HybridPrecoder(
        f_rf=np.stack([rf for rf, _ in pairs]),
        f_bb=np.stack([bb for _, bb in pairs]),
    )


def assemble_network_hybrid(per_node) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagonal network-level RF and baseband precoders, node order kept."""
    rf_blocks = [rf for rf, _ in per_node]
    bb_blocks = [bb for _, bb in per_node]
    return block_diag(rf_blocks), block_diag(bb_blocks)


def hybrid_mse_penalty(
    f_opt: np.ndarray,
    f_rf: np.ndarray,
    f_bb: np.ndarray,
    prob: DesignProblem,
    node: int,
) -> float:
    """MSE cost of swapping one node's digital precoder for its hybrid product.

    Compares only the quadratic objective; both precoders may leave a small
    estimation-constraint residual, which callers report separately.
    """
    psi = prob.psi[node]
    v_dig = vec(f_opt)
    v_hyb = vec(f_rf @ f_bb)
    if v_dig.size != psi.shape[0] or v_hyb.size != psi.shape[0]:
        raise DimensionError("precoder does not match this node's quadratic form")
    dig = (v_dig.conj() @ psi @ v_dig).real
    hyb = (v_hyb.conj() @ psi @ v_hyb).real
    return float(hyb - dig)


def hybrid_precoder_mse(
    hybrid: HybridPrecoder, prob: DesignProblem
) -> float:
    """Analytic MSE of a hybrid design: substitute every product into the
    stacked quadratic form."""
    eff = hybrid.effective
    m = eff.shape[0]
    f = np.concatenate([vec(eff[i]) for i in range(m)])
    stand_in = DigitalPrecoder(f=f, per_node=eff)
    return evaluate_mse_analytic(stand_in, prob)
