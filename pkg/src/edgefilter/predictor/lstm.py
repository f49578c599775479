"""LSTM forward pass, batched forward/backward through time.

Gate equations (gate order i, f, g, o)::

    i = sigmoid(W_i x + U_i h + b_i)      f = sigmoid(W_f x + U_f h + b_f)
    g = tanh(W_g x + U_g h + b_g)         o = sigmoid(W_o x + U_o h + b_o)
    c' = f * c + i * g                    h' = o * tanh(c')

The scalar head is ``dense_w . h_k + dense_b`` on the last hidden state.
"""

from __future__ import annotations

import numpy as np

from edgefilter.predictor.params import DimensionError, LstmParams, ModelWeights


class NumericalError(ArithmeticError):
    """Non-finite value during inference or training."""


def sigmoid(z):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def cell_step(x, h: np.ndarray, c: np.ndarray, p: LstmParams) -> tuple[np.ndarray, np.ndarray]:
    H = p.hidden_size
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (p.input_size,) or h.shape != (H,) or c.shape != (H,):
        raise DimensionError(
            f"cell_step expects x{(p.input_size,)}, h/c{(H,)}; got {x.shape}, {h.shape}, {c.shape}"
        )
    return _cell(x, h, c, p.w_stack, p.u_stack, p.b_stack, H)


def _cell(x, h, c, W, U, b, H):
    z = W @ x + U @ h + b
    s = sigmoid(z)
    g = np.tanh(z[2 * H : 3 * H])
    c_new = s[H : 2 * H] * c + s[:H] * g
    return s[3 * H :] * np.tanh(c_new), c_new


def forward_normalized(window, p: LstmParams) -> float:
    """Forecast in normalized units for one normalized window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window[:, None]
    if window.shape != (p.window, p.input_size):
        raise DimensionError(f"window of length {len(window)} given, model expects {p.window}")
    H = p.hidden_size
    # one tanh per step: gates use tanh(z/2), the candidate uses tanh(z)
    scale = np.full(4 * H, 0.5)
    scale[2 * H : 3 * H] = 1.0
    zx = window @ p.w_stack.T + p.b_stack
    U = p.u_stack
    h = np.zeros(H)
    c = np.zeros(H)
    for zt in zx:
        t = np.tanh((zt + U @ h) * scale)
        s = 0.5 * (1.0 + t)
        c = s[H : 2 * H] * c + s[:H] * t[2 * H : 3 * H]
        h = s[3 * H :] * np.tanh(c)
    return float(p.dense_w @ h + p.dense_b)


def forward(window, weights: ModelWeights) -> float:
    """One-step-ahead forecast in physical units.

    ``window`` is already normalized with ``weights.norm``. Deterministic:
    no dropout is ever applied here.
    """
    y = forward_normalized(window, weights.params) * weights.norm.std + weights.norm.mean
    if not np.isfinite(y):
        raise NumericalError("non-finite forecast")
    return float(y)


def _as_batch(X, p: LstmParams) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3 or X.shape[1:] != (p.window, p.input_size):
        raise DimensionError(f"batch of shape {X.shape} does not match window {p.window}")
    return X


def predict_batch(X, p: LstmParams) -> np.ndarray:
    """Vectorized normalized forecasts for ``(n, window)`` inputs.

    Used for training-time evaluation only; inference on the edge goes
    through :func:`forward`.
    """
    X = _as_batch(X, p)
    H = p.hidden_size
    Wt, Ut, b = p.w_stack.T, p.u_stack.T, p.b_stack
    h = np.zeros((len(X), H))
    c = np.zeros((len(X), H))
    for t in range(p.window):
        z = X[:, t] @ Wt + h @ Ut + b
        s = sigmoid(z)
        g = np.tanh(z[:, 2 * H : 3 * H])
        c = s[:, H : 2 * H] * c + s[:, :H] * g
        h = s[:, 3 * H :] * np.tanh(c)
    return h @ p.dense_w + p.dense_b


def loss_and_grads(X, y, params: LstmParams, dropout_mask=None) -> tuple[float, LstmParams]:
    """Mean squared error over the batch and its exact gradient (full BPTT).

    ``dropout_mask`` is a ``(batch, hidden)`` array multiplied into the last
    hidden state before the head; pass inverted-dropout scaled masks, or
    ``None`` for no dropout.
    """
    X = _as_batch(X, params)
    y = np.asarray(y, dtype=np.float64)
    if len(X) == 0 or y.shape != (len(X),):
        raise DimensionError("batch must be nonempty with one target per window")
    if dropout_mask is not None:
        dropout_mask = np.asarray(dropout_mask, dtype=np.float64)
        if dropout_mask.shape != (len(X), params.hidden_size):
            raise DimensionError(
                f"dropout mask shape {dropout_mask.shape} != {(len(X), params.hidden_size)}"
            )
    mse, grads = _loss_grad(
        X, y, params.w_stack, params.u_stack, params.b_stack,
        params.dense_w, params.dense_b, dropout_mask,
    )
    if not np.isfinite(mse):
        raise NumericalError("non-finite loss")
    gw, gu, gb, gdw, gdb = grads
    H, I = params.hidden_size, params.input_size
    return mse, LstmParams(
        gw.reshape(4, H, I), gu.reshape(4, H, H), gb.reshape(4, H), gdw, gdb, params.window
    )


def _loss_grad(X, y, W, U, b, dw, db, mask):
    """Raw-array kernel: returns ``mse, (dW, dU, db, d_dense_w, d_dense_b)``.

    ``W``/``U``/``b`` are the stacked ``(4H, ·)`` gate blocks.
    """
    n, k, _ = X.shape
    H = U.shape[1]
    Wt, Ut = W.T, U.T
    h = np.zeros((n, H))
    c = np.zeros((n, H))
    cache = []
    for t in range(k):
        z = X[:, t] @ Wt + h @ Ut + b
        s = sigmoid(z)
        i, f, o = s[:, :H], s[:, H : 2 * H], s[:, 3 * H :]
        g = np.tanh(z[:, 2 * H : 3 * H])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        cache.append((h, c, i, f, g, o, tc))
        h, c = o * tc, c_new

    hd = h if mask is None else h * mask
    err = hd @ dw + db - y
    mse = float(np.mean(err * err))

    dpred = (2.0 / n) * err
    g_dw = hd.T @ dpred
    g_db = float(dpred.sum())
    dh = np.outer(dpred, dw)
    if mask is not None:
        dh *= mask

    gW = np.zeros_like(W)
    gU = np.zeros_like(U)
    gb = np.zeros_like(b)
    dc = np.zeros((n, H))
    dz = np.empty((n, 4 * H))
    for t in range(k - 1, -1, -1):
        h_prev, c_prev, i, f, g, o, tc = cache[t]
        dc = dc + dh * o * (1.0 - tc * tc)
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H :] = dh * tc * o * (1.0 - o)
        gW += dz.T @ X[:, t]
        gU += dz.T @ h_prev
        gb += dz.sum(axis=0)
        dh = dz @ U
        dc = dc * f
    return mse, (gW, gU, gb, g_dw, g_db)
