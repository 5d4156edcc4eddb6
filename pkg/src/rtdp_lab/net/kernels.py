"""Hot numeric kernels for the policy/value MLP.

The njit kernels are valid numba nopython code and valid numpy code; the
decorator in ``_jit`` picks the path. ADAM is the exception: its compiled form
is a scalar loop, so the numpy path gets a vectorized twin. Layout: two ReLU trunk layers, then a
softmax policy head and a linear value head reading the second trunk layer.
"""
import numpy as np

from .._jit import NUMBA_ENABLED, njit


@njit
def softmax_row(logits):
    m = logits.max()
    e = np.exp(logits - m)
    return e / e.sum()


@njit
def forward_one(x, w1, b1, w2, b2, wp, bp, wv, bv):
    h1 = np.maximum(np.dot(x, w1) + b1, 0.0)
    h2 = np.maximum(np.dot(h1, w2) + b2, 0.0)
    probs = softmax_row(np.dot(h2, wp) + bp)
    value = np.dot(h2, wv)[0] + bv[0]
    return probs, value


@njit
def forward_batch(X, w1, b1, w2, b2, wp, bp, wv, bv):
    h1 = np.maximum(np.dot(X, w1) + b1, 0.0)
    h2 = np.maximum(np.dot(h1, w2) + b2, 0.0)
    logits = np.dot(h2, wp) + bp
    probs = np.empty_like(logits)
    for i in range(logits.shape[0]):
        probs[i] = softmax_row(logits[i])
    values = np.dot(h2, wv)[:, 0] + bv[0]
    return h1, h2, probs, values


@njit
def loss_and_grads(X, P, V, eps, w1, b1, w2, b2, wp, bp, wv, bv):
    """Mean over the batch of cross-entropy(P, policy) + (value - V)**2.

    Returns the total loss, the two loss parts and gradients in parameter order.
    """
    n = X.shape[0]
    h1, h2, probs, values = forward_batch(X, w1, b1, w2, b2, wp, bp, wv, bv)
    ce = -(P * np.log(np.maximum(probs, eps))).sum() / n
    diff = values - V
    mse = (diff * diff).sum() / n

    # targets are distributions, so d(CE)/d(logits) = probs - P
    d_logits = (probs - P) / n
    d_value = (2.0 / n) * diff

    g_wp = np.dot(h2.T, d_logits)
    g_bp = d_logits.sum(axis=0)
    g_wv = np.dot(h2.T, d_value.reshape(n, 1))
    g_bv = np.array([d_value.sum()])

    d_h2 = np.dot(d_logits, wp.T) + np.outer(d_value, wv[:, 0])
    d_h2 = d_h2 * (h2 > 0.0)
    g_w2 = np.dot(h1.T, d_h2)
    g_b2 = d_h2.sum(axis=0)
    d_h1 = np.dot(d_h2, w2.T) * (h1 > 0.0)
    g_w1 = np.dot(X.T, d_h1)
    g_b1 = d_h1.sum(axis=0)
    return ce + mse, ce, mse, (g_w1, g_b1, g_w2, g_b2, g_wp, g_bp, g_wv, g_bv)


@njit
def loss_and_grads_into(X, P, V, eps, w1, b1, w2, b2, wp, bp, wv, bv,
                        o_w1, o_b1, o_w2, o_b2, o_wp, o_bp, o_wv, o_bv):
    """``loss_and_grads`` writing gradients into preallocated arrays."""
    total, ce, mse, g = loss_and_grads(X, P, V, eps, w1, b1, w2, b2, wp, bp, wv, bv)
    o_w1[:] = g[0]
    o_b1[:] = g[1]
    o_w2[:] = g[2]
    o_b2[:] = g[3]
    o_wp[:] = g[4]
    o_bp[:] = g[5]
    o_wv[:] = g[6]
    o_bv[:] = g[7]
    return total, ce, mse


# Moments of dead units decay geometrically toward zero; left alone they enter
# the subnormal range, where float arithmetic is orders of magnitude slower.
# Anything this small moves a weight by less than 1e-90, so it is flushed.
MOMENT_FLUSH = 1e-100


@njit(fastmath=True)
def _adam_loop(w, g, m, v, lr, beta1, beta2, eps, t):
    c1 = 1.0 / (1.0 - beta1**t)
    c2 = 1.0 / (1.0 - beta2**t)
    for i in range(w.shape[0]):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * gi * gi
        if abs(mi) < MOMENT_FLUSH:
            mi = 0.0
        if vi < MOMENT_FLUSH:
            vi = 0.0
        m[i] = mi
        v[i] = vi
        w[i] -= lr * (mi * c1) / (np.sqrt(vi * c2) + eps)


def _adam_vectorized(w, g, m, v, lr, beta1, beta2, eps, t):
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    m[np.abs(m) < MOMENT_FLUSH] = 0.0
    v[v < MOMENT_FLUSH] = 0.0
    w -= lr * (m / (1.0 - beta1**t)) / (np.sqrt(v / (1.0 - beta2**t)) + eps)


# In-place bias-corrected ADAM on flat vectors; ``t`` is the 1-based step.
# A scalar loop only pays off when compiled.
adam_update = _adam_loop if NUMBA_ENABLED else _adam_vectorized
