"""Neural-network primitives, from scratch in float64.

One-layer bidirectional LSTM (only the final hidden state of each direction
is consumed), two ReLU dense layers, inverted dropout, a sigmoid-bounded
scalar output, batch MSE, and Adam. Backpropagation is fully analytic,
including backprop through time for both LSTM directions and through the
mean-pooled embedding lookup; it is verified against central finite
differences in the test suite.

Parameter containers are plain dataclasses of float64 numpy arrays. The
model-level functions accept any object with fields `embedding`, `fwd`,
`bwd`, `fc1`, `fc2`, `out` (see estimator.EstimatorParams).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError

GATES = ("i", "f", "g", "o")


def sigmoid(x):
    # clip keeps exp() finite; sigmoid is already saturated to 1.0/0.0 at +-60
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def relu(x):
    return np.maximum(x, 0.0)


@dataclass
class LstmParams:
    """One direction of gate parameters; gate order is i, f, g, o throughout."""

    w_i: np.ndarray  # (H, D)
    w_f: np.ndarray
    w_g: np.ndarray
    w_o: np.ndarray
    u_i: np.ndarray  # (H, H)
    u_f: np.ndarray
    u_g: np.ndarray
    u_o: np.ndarray
    b_i: np.ndarray  # (H,)
    b_f: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray

    @property
    def hidden(self):
        return self.w_i.shape[0]

    @property
    def input_dim(self):
        return self.w_i.shape[1]

    def stacked(self):
        """(4H, D) input weights, (4H, H) recurrent weights, (4H,) biases."""
        w = np.concatenate([self.w_i, self.w_f, self.w_g, self.w_o], axis=0)
        u = np.concatenate([self.u_i, self.u_f, self.u_g, self.u_o], axis=0)
        b = np.concatenate([self.b_i, self.b_f, self.b_g, self.b_o])
        return w, u, b


@dataclass
class DenseParams:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)


def zeros_lstm(hidden: int, input_dim: int) -> LstmParams:
    return LstmParams(
        *(np.zeros((hidden, input_dim)) for _ in GATES),
        *(np.zeros((hidden, hidden)) for _ in GATES),
        *(np.zeros(hidden) for _ in GATES),
    )


def _lstm_forward(features, params):
    """Run one direction over (T, D) frames; return final h and the BPTT cache."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DataError(f"features must be (T, D) with T >= 1, got shape {x.shape}")
    if x.shape[1] != params.input_dim:
        raise DataError(
            f"feature dim {x.shape[1]} does not match LSTM input dim {params.input_dim}"
        )
    t_steps, hidden = x.shape[0], params.hidden
    w, u, b = params.stacked()
    pre = x @ w.T + b  # input contribution for all steps at once
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    gates_i = np.empty((t_steps, hidden))
    gates_f = np.empty((t_steps, hidden))
    gates_g = np.empty((t_steps, hidden))
    gates_o = np.empty((t_steps, hidden))
    c_prev = np.empty((t_steps, hidden))
    tanh_c = np.empty((t_steps, hidden))
    h_prev = np.empty((t_steps, hidden))
    for t in range(t_steps):
        h_prev[t] = h
        c_prev[t] = c
        a = pre[t] + u @ h
        gi = sigmoid(a[:hidden])
        gf = sigmoid(a[hidden:2 * hidden])
        gg = np.tanh(a[2 * hidden:3 * hidden])
        go = sigmoid(a[3 * hidden:])
        c = gf * c + gi * gg
        tc = np.tanh(c)
        h = go * tc
        gates_i[t], gates_f[t], gates_g[t], gates_o[t] = gi, gf, gg, go
        tanh_c[t] = tc
    cache = {
        "x": x, "u": u,
        "i": gates_i, "f": gates_f, "g": gates_g, "o": gates_o,
        "c_prev": c_prev, "tanh_c": tanh_c, "h_prev": h_prev,
    }
    return h, cache


def _lstm_backward(cache, d_h_last):
    """BPTT from a gradient on the final hidden state only.

    Returns per-gate gradients keyed like LstmParams fields.
    """
    gi, gf, gg, go = cache["i"], cache["f"], cache["g"], cache["o"]
    c_prev, tanh_c, h_prev = cache["c_prev"], cache["tanh_c"], cache["h_prev"]
    u = cache["u"]
    t_steps, hidden = gi.shape
    da = np.empty((t_steps, 4 * hidden))
    dh = np.asarray(d_h_last, dtype=np.float64)
    dc = np.zeros(hidden)
    for t in range(t_steps - 1, -1, -1):
        do = dh * tanh_c[t]
        dc = dc + dh * go[t] * (1.0 - tanh_c[t] ** 2)
        di = dc * gg[t]
        dg = dc * gi[t]
        df = dc * c_prev[t]
        da[t, :hidden] = di * gi[t] * (1.0 - gi[t])
        da[t, hidden:2 * hidden] = df * gf[t] * (1.0 - gf[t])
        da[t, 2 * hidden:3 * hidden] = dg * (1.0 - gg[t] ** 2)
        da[t, 3 * hidden:] = do * go[t] * (1.0 - go[t])
        dh = u.T @ da[t]
        dc = dc * gf[t]
    dw = da.T @ cache["x"]  # (4H, D)
    du = da.T @ h_prev  # (4H, H)
    db = da.sum(axis=0)
    grads = {}
    for k, name in enumerate(GATES):
        grads[f"w_{name}"] = dw[k * hidden:(k + 1) * hidden]
        grads[f"u_{name}"] = du[k * hidden:(k + 1) * hidden]
        grads[f"b_{name}"] = db[k * hidden:(k + 1) * hidden]
    return grads


def bilstm_last(features, fwd: LstmParams, bwd: LstmParams):
    """Final forward-direction and backward-direction hidden states.

    The backward direction consumes the frames in reverse order, so its final
    state is the one produced after frame 1.
    """
    a_fwd, _ = _lstm_forward(features, fwd)
    a_bwd, _ = _lstm_forward(np.asarray(features)[::-1], bwd)
    return a_fwd, a_bwd


def _dropout_scale(rng, size, rate):
    # inverted dropout: kept units are scaled by 1/(1-rate), inference is identity
    keep = rng.random(size) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def _head_forward(a_fwd, a_bwd, lexical, fc1, fc2, out, dropout_rate, training, rng):
    z = np.concatenate([a_fwd, a_bwd, lexical])
    if z.shape[0] != fc1.weight.shape[1]:
        raise DataError(
            f"concatenated width {z.shape[0]} does not match fc1 input {fc1.weight.shape[1]}"
        )
    use_dropout = training and dropout_rate > 0.0
    scale_z = _dropout_scale(rng, z.shape[0], dropout_rate) if use_dropout else None
    zd = z * scale_z if use_dropout else z
    h1_pre = fc1.weight @ zd + fc1.bias
    h1 = relu(h1_pre)
    scale_h1 = _dropout_scale(rng, h1.shape[0], dropout_rate) if use_dropout else None
    h1d = h1 * scale_h1 if use_dropout else h1
    h2_pre = fc2.weight @ h1d + fc2.bias
    h2 = relu(h2_pre)
    out_pre = float((out.weight @ h2 + out.bias)[0])
    pred = float(sigmoid(np.float64(out_pre)))
    cache = {
        "z": z, "scale_z": scale_z, "zd": zd,
        "h1_pre": h1_pre, "scale_h1": scale_h1, "h1d": h1d,
        "h2_pre": h2_pre, "h2": h2, "pred": pred,
        "split": (len(a_fwd), len(a_bwd), len(lexical)),
    }
    return pred, cache


def head_forward(a_fwd, a_bwd, lexical, fc1: DenseParams, fc2: DenseParams,
                 out: DenseParams, dropout_rate: float = 0.0, training: bool = False,
                 rng=None) -> float:
    """Concat -> dropout -> fc1+ReLU -> dropout -> fc2+ReLU -> sigmoid scalar."""
    pred, _ = _head_forward(a_fwd, a_bwd, lexical, fc1, fc2, out,
                            dropout_rate, training, rng)
    return pred


def _head_backward(params, cache, d_pred):
    """Gradients of the head plus the gradient on the concatenated input."""
    pred = cache["pred"]
    d_out_pre = d_pred * pred * (1.0 - pred)
    g = {
        "out.weight": d_out_pre * cache["h2"][None, :],
        "out.bias": np.array([d_out_pre]),
    }
    dh2 = params.out.weight[0] * d_out_pre
    dh2_pre = dh2 * (cache["h2_pre"] > 0.0)
    g["fc2.weight"] = np.outer(dh2_pre, cache["h1d"])
    g["fc2.bias"] = dh2_pre
    dh1d = params.fc2.weight.T @ dh2_pre
    dh1 = dh1d * cache["scale_h1"] if cache["scale_h1"] is not None else dh1d
    dh1_pre = dh1 * (cache["h1_pre"] > 0.0)
    g["fc1.weight"] = np.outer(dh1_pre, cache["zd"])
    g["fc1.bias"] = dh1_pre
    dzd = params.fc1.weight.T @ dh1_pre
    dz = dzd * cache["scale_z"] if cache["scale_z"] is not None else dzd
    return g, dz


def forward_example(params, features, token_ids=None, lex_vector=None,
                    dropout_rate: float = 0.0, training: bool = False, rng=None,
                    zero_acoustic: bool = False):
    """Full-model forward for one utterance; returns (prediction, cache).

    The lexical representation comes from mean-pooled embedding rows of
    `token_ids`, or directly from `lex_vector` (exactly one must be given).
    With `zero_acoustic` the recurrent branch is replaced by zero vectors.
    """
    if (token_ids is None) == (lex_vector is None):
        raise DataError("exactly one of token_ids / lex_vector must be given")
    if token_ids is not None:
        from .featurize import lexical_embed

        lexical = lexical_embed(token_ids, params.embedding)
    else:
        lexical = np.asarray(lex_vector, dtype=np.float64)
        if lexical.shape[0] != params.embedding.shape[1]:
            raise DataError(
                f"lexical vector dim {lexical.shape[0]} does not match "
                f"embedding dim {params.embedding.shape[1]}"
            )
    hidden = params.fwd.hidden
    if zero_acoustic:
        a_fwd = np.zeros(hidden)
        a_bwd = np.zeros(hidden)
        cache_f = cache_b = None
    else:
        a_fwd, cache_f = _lstm_forward(features, params.fwd)
        a_bwd, cache_b = _lstm_forward(np.asarray(features)[::-1], params.bwd)
    pred, head_cache = _head_forward(a_fwd, a_bwd, lexical, params.fc1, params.fc2,
                                     params.out, dropout_rate, training, rng)
    cache = {
        "head": head_cache, "lstm_f": cache_f, "lstm_b": cache_b,
        "token_ids": token_ids, "zero_acoustic": zero_acoustic,
    }
    return pred, cache


def zero_grads(params) -> dict:
    return {name: np.zeros_like(tensor) for name, tensor in params.tensors().items()}


def backward(params, caches, preds, targets) -> dict:
    """Analytic gradients of the batch MSE for every trainable tensor.

    `caches` are the forward_example caches of the batch, in batch order;
    dropout masks recorded there are reused exactly.
    """
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if len(caches) == 0:
        raise DataError("empty batch")
    grads = zero_grads(params)
    batch = len(caches)
    for cache, pred, target in zip(caches, preds, targets):
        d_pred = 2.0 * (pred - target) / batch
        head_grads, dz = _head_backward(params, cache["head"], d_pred)
        for name, g in head_grads.items():
            grads[name] += g
        n_fwd, n_bwd, _ = cache["head"]["split"]
        d_afwd = dz[:n_fwd]
        d_abwd = dz[n_fwd:n_fwd + n_bwd]
        d_lex = dz[n_fwd + n_bwd:]
        if not cache["zero_acoustic"]:
            for prefix, lstm_cache, d_last in (
                ("fwd", cache["lstm_f"], d_afwd),
                ("bwd", cache["lstm_b"], d_abwd),
            ):
                for name, g in _lstm_backward(lstm_cache, d_last).items():
                    grads[f"{prefix}.{name}"] += g
        ids = cache["token_ids"]
        if ids is not None and len(ids) > 0:
            contribution = d_lex / len(ids)
            for token in ids:
                grads["embedding"][token] += contribution
    return grads


def mse_loss(predictions, targets) -> float:
    """Mean squared error over a batch; targets must lie in [0,1]."""
    preds = np.asarray(predictions, dtype=np.float64)
    targs = np.asarray(targets, dtype=np.float64)
    if preds.shape != targs.shape or preds.ndim != 1:
        raise DataError(f"shape mismatch: {preds.shape} vs {targs.shape}")
    if preds.shape[0] == 0:
        raise DataError("empty batch")
    if targs.min() < 0.0 or targs.max() > 1.0:
        raise DataError("targets must lie in [0, 1]")
    return float(np.mean((preds - targs) ** 2))


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_tensors(cls, tensors: dict) -> "AdamState":
        return cls(
            m={name: np.zeros_like(x) for name, x in tensors.items()},
            v={name: np.zeros_like(x) for name, x in tensors.items()},
        )


def adam_step(tensors: dict, grads: dict, state: AdamState, lr: float) -> None:
    """One Adam update with bias correction, in place on every tensor."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, tensor in tensors.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for tensor {name!r}")
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        tensor -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
