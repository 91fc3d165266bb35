"""From-scratch LSTM sequence classifier in float64 numpy.

Per step, with row-vector inputs::

    i = sigmoid(x W_xi' + h W_hi' + b_i)
    f = sigmoid(x W_xf' + h W_hf' + b_f)
    o = sigmoid(x W_xo' + h W_ho' + b_o)
    g = tanh(x W_xc' + h W_hc' + b_c)
    c = f * c_prev + i * g
    h = o * tanh(c)

The last hidden state (optionally concatenated with an external feature
vector) goes through a linear projection ``W_p, b_p`` and a softmax.
Batches of unequal-length sequences are handled with a step mask that
freezes the state of finished sequences.
"""

from dataclasses import dataclass, fields

import numpy as np

GATES = ("i", "f", "o", "c")
PARAM_NAMES = (
    ("W_es",)
    + tuple(f"W_x{g}" for g in GATES)
    + tuple(f"W_h{g}" for g in GATES)
    + tuple(f"b_{g}" for g in GATES)
    + ("W_p", "b_p")
)


@dataclass
class LstmParameters:
    W_es: np.ndarray  # (vocab, d_e)
    W_xi: np.ndarray  # (d_h, d_e)
    W_xf: np.ndarray
    W_xo: np.ndarray
    W_xc: np.ndarray
    W_hi: np.ndarray  # (d_h, d_h)
    W_hf: np.ndarray
    W_ho: np.ndarray
    W_hc: np.ndarray
    b_i: np.ndarray  # (d_h,)
    b_f: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray
    W_p: np.ndarray  # (d_h + d_feat, C)
    b_p: np.ndarray  # (C,)

    @property
    def vocab_size(self):
        return self.W_es.shape[0]

    @property
    def embed_dim(self):
        return self.W_es.shape[1]

    @property
    def hidden_dim(self):
        return self.W_hi.shape[0]

    @property
    def feature_dim(self):
        return self.W_p.shape[0] - self.hidden_dim

    @property
    def n_classes(self):
        return self.W_p.shape[1]

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def copy(self):
        return LstmParameters(**{k: v.copy() for k, v in self.items()})

    def sq_norm(self):
        return sum(float(np.sum(v * v)) for _, v in self.items())

    def check(self):
        V, de = self.W_es.shape
        dh = self.hidden_dim
        for g in GATES:
            if getattr(self, f"W_x{g}").shape != (dh, de):
                raise ValueError(f"W_x{g} has shape {getattr(self, f'W_x{g}').shape}, want {(dh, de)}")
            if getattr(self, f"W_h{g}").shape != (dh, dh):
                raise ValueError(f"W_h{g} has shape {getattr(self, f'W_h{g}').shape}, want {(dh, dh)}")
            if getattr(self, f"b_{g}").shape != (dh,):
                raise ValueError(f"b_{g} has shape {getattr(self, f'b_{g}').shape}, want {(dh,)}")
        if self.W_p.ndim != 2 or self.W_p.shape[0] < dh:
            raise ValueError(f"W_p has shape {self.W_p.shape}")
        if self.b_p.shape != (self.n_classes,):
            raise ValueError(f"b_p has shape {self.b_p.shape}")
        for k, v in self.items():
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{k} has non-finite entries")
        return self

    @classmethod
    def zeros(cls, vocab_size, embed_dim, hidden_dim, n_classes, feature_dim=0):
        V, de, dh, C = vocab_size, embed_dim, hidden_dim, n_classes
        shapes = {"W_es": (V, de), "W_p": (dh + feature_dim, C), "b_p": (C,)}
        for g in GATES:
            shapes[f"W_x{g}"] = (dh, de)
            shapes[f"W_h{g}"] = (dh, dh)
            shapes[f"b_{g}"] = (dh,)
        return cls(**{k: np.zeros(s) for k, s in shapes.items()})

    @classmethod
    def init(cls, rng, vocab_size, embed_dim, hidden_dim, n_classes, feature_dim=0, scale=0.08, forget_bias=1.0):
        p = cls.zeros(vocab_size, embed_dim, hidden_dim, n_classes, feature_dim)
        for name, v in p.items():
            if name.startswith("W_"):
                v[...] = rng.uniform(-scale, scale, size=v.shape)
        p.b_f[...] = forget_bias
        return p


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim, batch=None):
        shape = (hidden_dim,) if batch is None else (batch, hidden_dim)
        return cls(np.zeros(shape), np.zeros(shape))


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _stacked(params):
    Wx = np.concatenate([getattr(params, f"W_x{g}") for g in GATES], axis=0)
    Wh = np.concatenate([getattr(params, f"W_h{g}") for g in GATES], axis=0)
    b = np.concatenate([getattr(params, f"b_{g}") for g in GATES])
    return Wx, Wh, b


def _cell(Wx, Wh, b, x, h, c):
    dh = h.shape[-1]
    a = x @ Wx.T + h @ Wh.T + b
    i = sigmoid(a[..., :dh])
    f = sigmoid(a[..., dh : 2 * dh])
    o = sigmoid(a[..., 2 * dh : 3 * dh])
    g = np.tanh(a[..., 3 * dh :])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    return i, f, o, g, c_new, tc, o * tc


def lstm_step(params, x_t, state, dropout_mask=None):
    """One LSTM update. Works on a single vector or a ``(batch, d)`` block."""
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape[-1] != params.embed_dim:
        raise ValueError(f"input has size {x_t.shape[-1]}, expected {params.embed_dim}")
    if state.h.shape[-1] != params.hidden_dim or state.c.shape != state.h.shape:
        raise ValueError("state does not match hidden size")
    Wx, Wh, b = _stacked(params)
    *_, c_new, _, h_new = _cell(Wx, Wh, b, x_t, state.h, state.c)
    if dropout_mask is not None:
        h_new = h_new * dropout_mask
    return LstmState(h_new, c_new)


def pad_batch(sequences):
    """Right-pad integer sequences with 0; returns ``(ids, mask)`` of shape (B, T)."""
    T = max(len(s) for s in sequences)
    ids = np.zeros((len(sequences), T), dtype=np.int64)
    mask = np.zeros((len(sequences), T))
    for n, s in enumerate(sequences):
        ids[n, : len(s)] = s
        mask[n, : len(s)] = 1.0
    return ids, mask


def _features_block(params, features, B):
    if params.feature_dim == 0:
        if features is not None and np.asarray(features).size:
            raise ValueError("model takes no features")
        return None
    if features is None:
        return np.zeros((B, params.feature_dim))
    features = np.asarray(features, dtype=float).reshape(B, -1)
    if features.shape[1] != params.feature_dim:
        raise ValueError(f"feature size {features.shape[1]}, expected {params.feature_dim}")
    return features


def _run(params, sequences, features=None, dropout_mask=None, keep_cache=False):
    ids, mask = pad_batch(sequences)
    B, T = ids.shape
    Wx, Wh, b = _stacked(params)
    h = np.zeros((B, params.hidden_dim))
    c = np.zeros_like(h)
    cache = []
    for t in range(T):
        x = params.W_es[ids[:, t]]
        i, f, o, g, c_new, tc, h_new = _cell(Wx, Wh, b, x, h, c)
        m = mask[:, t : t + 1]
        if keep_cache:
            cache.append((x, h, c, i, f, o, g, tc, m))
        h = m * h_new + (1.0 - m) * h
        c = m * c_new + (1.0 - m) * c
    hd = h if dropout_mask is None else h * dropout_mask
    feats = _features_block(params, features, B)
    top = hd if feats is None else np.concatenate([hd, feats], axis=1)
    z = top @ params.W_p + params.b_p
    return z, (ids, mask, cache, h, top)


def forward_batch(params, sequences, features=None):
    """Class probabilities ``(B, C)`` for a batch of index sequences (inference, no dropout)."""
    z, _ = _run(params, sequences, features)
    return np.exp(log_softmax(z))


def forward(params, sequence, features=None):
    """Class probability vector for one index sequence."""
    feats = None if features is None else np.asarray(features, dtype=float)[None, :]
    return forward_batch(params, [sequence], feats)[0]


def loss(params, sequences, labels, l2=0.0, features=None, dropout_mask=None):
    """Mean negative log-likelihood of ``labels`` plus ``l2 * ||theta||^2``."""
    if len(sequences) == 0:
        raise ValueError("empty batch")
    z, _ = _run(params, sequences, features, dropout_mask)
    logp = log_softmax(z)
    nll = -float(np.mean(logp[np.arange(len(labels)), labels]))
    return nll + l2 * params.sq_norm()


def loss_and_grad(params, sequences, labels, l2=0.0, features=None, dropout_mask=None):
    """Loss and its gradient w.r.t. every parameter, by backprop through time."""
    if len(sequences) == 0:
        raise ValueError("empty batch")
    labels = np.asarray(labels)
    z, (ids, mask, cache, h_last, top) = _run(params, sequences, features, dropout_mask, keep_cache=True)
    B = len(sequences)
    dh_dim = params.hidden_dim
    logp = log_softmax(z)
    value = -float(np.mean(logp[np.arange(B), labels])) + l2 * params.sq_norm()

    grads = LstmParameters(**{k: np.zeros_like(v) for k, v in params.items()})
    dz = np.exp(logp)
    dz[np.arange(B), labels] -= 1.0
    dz /= B
    grads.W_p[...] = top.T @ dz
    grads.b_p[...] = dz.sum(axis=0)
    dh = dz @ params.W_p[:dh_dim].T
    if dropout_mask is not None:
        dh = dh * dropout_mask
    dc = np.zeros_like(dh)

    Wx, Wh, _ = _stacked(params)
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * dh_dim)
    for t in range(len(cache) - 1, -1, -1):
        x, h_prev, c_prev, i, f, o, g, tc, m = cache[t]
        dh_new = m * dh
        dc_new = m * dc + dh_new * o * (1.0 - tc * tc)
        do = dh_new * tc
        di = dc_new * g
        df = dc_new * c_prev
        dg = dc_new * i
        da = np.concatenate(
            [di * i * (1.0 - i), df * f * (1.0 - f), do * o * (1.0 - o), dg * (1.0 - g * g)], axis=1
        )
        dWx += da.T @ x
        dWh += da.T @ h_prev
        db += da.sum(axis=0)
        np.add.at(grads.W_es, ids[:, t], da @ Wx)
        dh = da @ Wh + (1.0 - m) * dh
        dc = dc_new * f + (1.0 - m) * dc

    for k, g in enumerate(GATES):
        sl = slice(k * dh_dim, (k + 1) * dh_dim)
        getattr(grads, f"W_x{g}")[...] = dWx[sl]
        getattr(grads, f"W_h{g}")[...] = dWh[sl]
        getattr(grads, f"b_{g}")[...] = db[sl]
    if l2:
        for name, v in params.items():
            getattr(grads, name)[...] += 2.0 * l2 * v
    return value, grads


def grad(params, sequences, labels, l2=0.0, features=None, dropout_mask=None):
    return loss_and_grad(params, sequences, labels, l2, features, dropout_mask)[1]


def global_norm(grads):
    return float(np.sqrt(sum(np.sum(v * v) for _, v in grads.items())))


def clip_by_global_norm(grads, bound):
    norm = global_norm(grads)
    if bound and norm > bound:
        scale = bound / norm
        for _, v in grads.items():
            v *= scale
    return norm
