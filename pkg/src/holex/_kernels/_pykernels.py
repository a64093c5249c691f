"""NumPy implementations of the batch kernels.

Same signatures and semantics as the compiled module.  HolE products are
evaluated in the frequency domain through the cached DFT matrix so a whole
batch is a handful of matrix products.
"""

import numpy as np

from ..spectral import dft_matrix

NAME = "python"


def _spectra(x, k):
    return x @ dft_matrix(k)


def _back(z, k):
    return (z @ dft_matrix(k, inverse=True)).real / k


def score_batch(kind, E, R, p, s, o):
    if kind == 0:
        k = R.shape[1]
        rs, ss, os_ = _spectra(R[p], k), _spectra(E[s], k), _spectra(E[o], k)
        return np.sum(rs * ss * np.conj(os_), axis=1).real / k
    k = R.shape[1] // 2
    r, es, eo = R[p], E[s], E[o]
    rr, ri, sr, si = r[:, :k], r[:, k:], es[:, :k], es[:, k:]
    return np.sum((rr * sr - ri * si) * eo[:, :k] + (rr * si + ri * sr) * eo[:, k:], axis=1)


def _per_triple_grads(kind, E, R, p, s, o):
    if kind == 0:
        k = R.shape[1]
        rf, sf, of = _spectra(R[p], k), _spectra(E[s], k), _spectra(E[o], k)
        g_r = _back(np.conj(sf) * of, k)
        g_s = _back(np.conj(rf) * of, k)
        g_o = _back(rf * sf, k)
        return g_r, g_s, g_o
    k = R.shape[1] // 2
    r, es, eo = R[p], E[s], E[o]
    rr, ri, sr, si, orr, oi = r[:, :k], r[:, k:], es[:, :k], es[:, k:], eo[:, :k], eo[:, k:]
    g_r = np.hstack([sr * orr + si * oi, sr * oi - si * orr])
    g_s = np.hstack([rr * orr + ri * oi, rr * oi - ri * orr])
    g_o = np.hstack([rr * sr - ri * si, rr * si + ri * sr])
    return g_r, g_s, g_o


def grad_batch(kind, E, R, p, s, o, w, p_slot, s_slot, o_slot, gE, gR):
    g_r, g_s, g_o = _per_triple_grads(kind, E, R, p, s, o)
    w = np.asarray(w)[:, None]
    np.add.at(gR, p_slot, w * g_r)
    np.add.at(gE, s_slot, w * g_s)
    np.add.at(gE, o_slot, w * g_o)


def adagrad_update(param, acc, rows, grad, lr, eps):
    acc[rows] += grad * grad
    param[rows] -= lr * grad / (np.sqrt(acc[rows]) + eps)
