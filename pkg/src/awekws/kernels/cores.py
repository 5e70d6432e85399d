"""Hot numeric loops, written in a numba-compilable numpy subset.

Every function here is pure and allocation-light so it can be compiled with
``numba.njit`` or run as-is under plain numpy.  The backend selection lives in
``awekws.kernels.__init__``; do not import this module directly from feature
code.

Recurrent cell conventions (gated cell, update gate ``u`` keeps old state):

    r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
    u_t = sigmoid(Wu x_t + Uu h_{t-1} + bu)
    c_t = tanh(Wc x_t + Uc (r_t * h_{t-1}) + bc)
    h_t = u_t * h_{t-1} + (1 - u_t) * c_t

The input projections ``ax_* = X Wg^T + bg`` are precomputed by the caller as
one GEMM per gate; the cores only carry the sequential recurrence.
"""

import numpy as np


def gated_forward_core(ax_r, ax_u, ax_c, u_r, u_u, u_c, h0):
    """Run the gated recurrence over time.

    ax_*: (T, H) precomputed input activations including bias.
    Returns (h, r, u, c), each (T, H), cached for the backward pass.
    """
    steps = ax_r.shape[0]
    h = np.empty_like(ax_r)
    r = np.empty_like(ax_r)
    u = np.empty_like(ax_r)
    c = np.empty_like(ax_r)
    h_prev = h0
    for t in range(steps):
        r[t] = 1.0 / (1.0 + np.exp(-(ax_r[t] + np.dot(u_r, h_prev))))
        u[t] = 1.0 / (1.0 + np.exp(-(ax_u[t] + np.dot(u_u, h_prev))))
        c[t] = np.tanh(ax_c[t] + np.dot(u_c, r[t] * h_prev))
        h[t] = u[t] * h_prev + (1.0 - u[t]) * c[t]
        h_prev = h[t]
    return h, r, u, c


def gated_backward_core(dh_out, h, h0, r, u, c, u_r, u_u, u_c):
    """Backpropagate through the gated recurrence.

    dh_out: (T, H) gradient w.r.t. h_t arriving from outside the layer
    (layer above and/or the projection).  Returns per-step pre-activation
    gradients (da_r, da_u, da_c), each (T, H), plus dh0.  Weight gradients
    are formed by the caller with GEMMs over these.
    """
    steps = dh_out.shape[0]
    da_r = np.empty_like(dh_out)
    da_u = np.empty_like(dh_out)
    da_c = np.empty_like(dh_out)
    carry = np.zeros_like(h0)
    for t in range(steps - 1, -1, -1):
        if t > 0:
            h_prev = h[t - 1]
        else:
            h_prev = h0
        dh = dh_out[t] + carry
        du = dh * (h_prev - c[t])
        da_u[t] = du * u[t] * (1.0 - u[t])
        dc = dh * (1.0 - u[t])
        da_c[t] = dc * (1.0 - c[t] * c[t])
        dhr = np.dot(u_c.T, da_c[t])
        dr = dhr * h_prev
        da_r[t] = dr * r[t] * (1.0 - r[t])
        carry = (
            dh * u[t]
            + dhr * r[t]
            + np.dot(u_r.T, da_r[t])
            + np.dot(u_u.T, da_u[t])
        )
    return da_r, da_u, da_c, carry


def vanilla_forward_core(ax, u_w, h0):
    """h_t = tanh(ax_t + U h_{t-1}); returns the full hidden sequence."""
    steps = ax.shape[0]
    h = np.empty_like(ax)
    h_prev = h0
    for t in range(steps):
        h[t] = np.tanh(ax[t] + np.dot(u_w, h_prev))
        h_prev = h[t]
    return h


def vanilla_backward_core(dh_out, h, h0, u_w):
    """Backward pass of the vanilla recurrence; returns (da, dh0)."""
    steps = dh_out.shape[0]
    da = np.empty_like(dh_out)
    carry = np.zeros_like(h0)
    for t in range(steps - 1, -1, -1):
        dh = dh_out[t] + carry
        da[t] = dh * (1.0 - h[t] * h[t])
        carry = np.dot(u_w.T, da[t])
    return da, carry


def levenshtein_core(ref_ids, hyp_ids):
    """Minimum edit distance (unit costs) between two int sequences."""
    n_ref = ref_ids.shape[0]
    n_hyp = hyp_ids.shape[0]
    dp = np.empty((n_ref + 1, n_hyp + 1), dtype=np.int64)
    for i in range(n_ref + 1):
        dp[i, 0] = i
    for j in range(n_hyp + 1):
        dp[0, j] = j
    for i in range(1, n_ref + 1):
        for j in range(1, n_hyp + 1):
            if ref_ids[i - 1] == hyp_ids[j - 1]:
                dp[i, j] = dp[i - 1, j - 1]
            else:
                best = dp[i - 1, j - 1]
                if dp[i - 1, j] < best:
                    best = dp[i - 1, j]
                if dp[i, j - 1] < best:
                    best = dp[i, j - 1]
                dp[i, j] = best + 1
    return dp[n_ref, n_hyp]


def range_min_argmin_core(scores, starts, ends):
    """Per-range minimum and first argmin over a flat score vector."""
    n = starts.shape[0]
    mins = np.empty(n, dtype=np.float64)
    arg = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = scores[starts[i]]
        best_j = starts[i]
        for j in range(starts[i] + 1, ends[i]):
            if scores[j] < best:
                best = scores[j]
                best_j = j
        mins[i] = best
        arg[i] = best_j
    return mins, arg
