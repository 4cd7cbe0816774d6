"""Attention-based acoustic-to-word model.

Pyramidal bidirectional LSTM encoder, location-aware attention and an
LSTM decoder, with exact analytic gradients (verified against central
finite differences) and greedy decoding. Desk-scale by default; all math
in float64.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import FormatError
from .numerics import SplitMix64, softmax, xavier_uniform

SOS_ID = 0
EOS_ID = 1
UNK_ID = 2

_CKPT_MAGIC = b"A2WC"
_CKPT_VERSION = 1


@dataclass(frozen=True)
class A2WConfig:
    """Model dimensions. enc_hidden is per direction (H = 2*enc_hidden)."""

    input_dim: int = 16
    enc_hidden: int = 16
    enc_layers: int = 2
    pyramid_stages: int = 1
    attn_dim: int = 32
    attn_kernels: int = 4
    attn_kernel_width: int = 5
    dec_hidden: int = 32
    embed_dim: int = 32
    vocab_size: int = 33

    def __post_init__(self):
        if not 0 <= self.pyramid_stages < self.enc_layers:
            raise ValueError("pyramid_stages must be in [0, enc_layers)")
        if self.attn_kernel_width % 2 == 0:
            raise ValueError("attn_kernel_width must be odd")
        if self.vocab_size <= UNK_ID:
            raise ValueError("vocab_size must cover the reserved tokens")

    @property
    def encoder_dim(self):
        return 2 * self.enc_hidden

    @property
    def subsample_factor(self):
        return 2 ** self.pyramid_stages

    def field_values(self):
        return (self.input_dim, self.enc_hidden, self.enc_layers,
                self.pyramid_stages, self.attn_dim, self.attn_kernels,
                self.attn_kernel_width, self.dec_hidden, self.embed_dim,
                self.vocab_size)


def tensor_catalog(cfg):
    """Ordered (name, shape) list of all learned tensors.

    This order is the checkpoint serialization order and the order in
    which init_params consumes the RNG.
    """
    out = []
    in_dim = cfg.input_dim
    for i in range(cfg.enc_layers):
        for d in ("f", "b"):
            out.append((f"enc{i}_{d}_wx", (4 * cfg.enc_hidden, in_dim)))
            out.append((f"enc{i}_{d}_wh", (4 * cfg.enc_hidden, cfg.enc_hidden)))
            out.append((f"enc{i}_{d}_b", (4 * cfg.enc_hidden,)))
        in_dim = cfg.encoder_dim * (2 if i < cfg.pyramid_stages else 1)
    H = cfg.encoder_dim
    out.append(("att_query", (cfg.attn_dim, cfg.dec_hidden)))
    out.append(("att_key", (cfg.attn_dim, H)))
    out.append(("att_loc", (cfg.attn_dim, cfg.attn_kernels)))
    out.append(("att_bias", (cfg.attn_dim,)))
    out.append(("att_score", (cfg.attn_dim,)))
    out.append(("att_conv", (cfg.attn_kernels, cfg.attn_kernel_width)))
    out.append(("embed", (cfg.vocab_size, cfg.embed_dim)))
    out.append(("dec_wx", (4 * cfg.dec_hidden, cfg.embed_dim + H)))
    out.append(("dec_wh", (4 * cfg.dec_hidden, cfg.dec_hidden)))
    out.append(("dec_b", (4 * cfg.dec_hidden,)))
    out.append(("out_w", (cfg.vocab_size, cfg.dec_hidden + H)))
    out.append(("out_b", (cfg.vocab_size,)))
    return out


@dataclass
class A2WParams:
    """All learned tensors, keyed by catalog name."""

    config: A2WConfig
    tensors: dict = field(default_factory=dict)

    def copy(self):
        return A2WParams(self.config,
                         {k: v.copy() for k, v in self.tensors.items()})

    def __getitem__(self, name):
        return self.tensors[name]


def init_params(cfg, seed):
    """Xavier-uniform weights, zero biases, from the deterministic RNG."""
    rng = SplitMix64(seed)
    tensors = {}
    for name, shape in tensor_catalog(cfg):
        if name.endswith("_b") or name.endswith("_bias"):
            tensors[name] = np.zeros(shape)
        else:
            tensors[name] = xavier_uniform(rng, shape)
    return A2WParams(cfg, tensors)


def zero_grads(params):
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


@dataclass
class EncoderStates:
    """Final encoder outputs h_1..h_T' plus the raw-frame subsample factor."""

    states: np.ndarray
    subsample_factor: int


@dataclass
class AttentionState:
    """Previous step's attention weights (the location-feature input)."""

    prev_weights: np.ndarray


# ---------------------------------------------------------------------------
# encoder

def _reduce_pairs(h):
    """Concatenate adjacent time steps; odd tail padded with zeros."""
    T, K = h.shape
    T2 = (T + 1) // 2
    red = np.zeros((T2, 2 * K))
    red[:, :K] = h[0::2]
    odd = h[1::2]
    red[:odd.shape[0], K:] = odd
    return red


def _reduce_pairs_backward(dred, T):
    K = dred.shape[1] // 2
    dh = np.zeros((T, K))
    dh[0::2] = dred[:, :K]
    n_odd = T // 2
    dh[1::2] = dred[:n_odd, K:]
    return dh


def _encode_cached(x, params):
    cfg = params.config
    cache = []
    cur = x
    for i in range(cfg.enc_layers):
        layer = {"x": cur, "T": cur.shape[0]}
        for d in ("f", "b"):
            h, c, g = backend.lstm_forward(
                np.ascontiguousarray(cur),
                params[f"enc{i}_{d}_wx"], params[f"enc{i}_{d}_wh"],
                params[f"enc{i}_{d}_b"], d == "b")
            layer[d] = (h, c, g)
        out = np.hstack((layer["f"][0], layer["b"][0]))
        cache.append(layer)
        if i < cfg.pyramid_stages:
            out = _reduce_pairs(out)
        cur = out
    return cur, cache


def _encode_backward(denc, cache, params, grads):
    cfg = params.config
    d = denc
    for i in range(cfg.enc_layers - 1, -1, -1):
        layer = cache[i]
        if i < cfg.pyramid_stages:
            d = _reduce_pairs_backward(d, layer["T"])
        eh = cfg.enc_hidden
        dx_total = None
        for d_name, sl in (("f", slice(0, eh)), ("b", slice(eh, 2 * eh))):
            h, c, g = layer[d_name]
            dx, dwx, dwh, db = backend.lstm_backward(
                np.ascontiguousarray(d[:, sl]),
                np.ascontiguousarray(layer["x"]), h, c, g,
                params[f"enc{i}_{d_name}_wx"], params[f"enc{i}_{d_name}_wh"],
                d_name == "b")
            grads[f"enc{i}_{d_name}_wx"] += dwx
            grads[f"enc{i}_{d_name}_wh"] += dwh
            grads[f"enc{i}_{d_name}_b"] += db
            dx_total = dx if dx_total is None else dx_total + dx
        d = dx_total
    return d


def encode(features, params):
    """Run the pyramidal BLSTM encoder; T' = ceil(T / subsample_factor)."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("features must be a non-empty T x d matrix")
    if x.shape[1] != params.config.input_dim:
        raise ValueError(f"feature dim {x.shape[1]} != model input_dim "
                         f"{params.config.input_dim}")
    states, _ = _encode_cached(x, params)
    return EncoderStates(states, params.config.subsample_factor)


# ---------------------------------------------------------------------------
# attention

def _attend_step(s_prev, enc, keys, a_prev, params):
    """One location-aware attention step; returns (context, alpha, cache)."""
    feats = backend.conv1d_same_multi(a_prev, params["att_conv"])
    q = params["att_query"] @ s_prev
    z = np.tanh(keys + feats @ params["att_loc"].T + q + params["att_bias"])
    e = z @ params["att_score"]
    alpha = softmax(e)
    context = alpha @ enc
    return context, alpha, (a_prev, feats, z)


def _attend_step_backward(dcontext, dalpha_extra, s_prev, enc, alpha, step_cache,
                          params, grads, denc):
    a_prev, feats, z = step_cache
    dalpha = enc @ dcontext
    if dalpha_extra is not None:
        dalpha = dalpha + dalpha_extra
    denc += np.outer(alpha, dcontext)
    de = alpha * (dalpha - dalpha @ alpha)
    grads["att_score"] += z.T @ de
    dpre = np.outer(de, params["att_score"]) * (1.0 - z * z)
    dq = dpre.sum(axis=0)
    grads["att_query"] += np.outer(dq, s_prev)
    grads["att_bias"] += dq
    grads["att_key"] += dpre.T @ enc
    denc += dpre @ params["att_key"]
    grads["att_loc"] += dpre.T @ feats
    dfeats = dpre @ params["att_loc"]
    da_prev, dconv = backend.conv1d_same_multi_backward(
        np.ascontiguousarray(dfeats), a_prev, params["att_conv"])
    grads["att_conv"] += dconv
    ds_prev = params["att_query"].T @ dq
    return ds_prev, da_prev


def attend(decoder_state, enc, att_state, params):
    """Attention over encoder states given the previous step's weights.

    Returns (context vector of size H, weight row over T' frames).
    """
    states = enc.states
    a_prev = np.asarray(att_state.prev_weights, dtype=np.float64)
    if a_prev.shape[0] != states.shape[0]:
        raise ValueError("prev_weights length must match encoder length")
    keys = states @ params["att_key"].T
    context, alpha, _ = _attend_step(decoder_state, states, keys, a_prev, params)
    return context, alpha


# ---------------------------------------------------------------------------
# decoder

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _lstm_cell(x, h_prev, c_prev, wx, wh, b):
    H = h_prev.shape[0]
    pre = wx @ x + wh @ h_prev + b
    gates = np.empty(4 * H)
    gates[:H] = _sigmoid(pre[:H])
    gates[H:2 * H] = _sigmoid(pre[H:2 * H])
    gates[2 * H:3 * H] = np.tanh(pre[2 * H:3 * H])
    gates[3 * H:] = _sigmoid(pre[3 * H:])
    c = gates[H:2 * H] * c_prev + gates[:H] * gates[2 * H:3 * H]
    h = gates[3 * H:] * np.tanh(c)
    return h, c, gates


def _lstm_cell_backward(dh, dc_in, x, h_prev, c_prev, c, gates, wx, wh):
    H = h_prev.shape[0]
    i, f, g, o = gates[:H], gates[H:2 * H], gates[2 * H:3 * H], gates[3 * H:]
    tc = np.tanh(c)
    do = dh * tc
    dc = dc_in + dh * o * (1.0 - tc * tc)
    dpre = np.empty(4 * H)
    dpre[:H] = dc * g * i * (1.0 - i)
    dpre[H:2 * H] = dc * c_prev * f * (1.0 - f)
    dpre[2 * H:3 * H] = dc * i * (1.0 - g * g)
    dpre[3 * H:] = do * o * (1.0 - o)
    dc_prev = dc * f
    dx = wx.T @ dpre
    dh_prev = wh.T @ dpre
    return dx, dh_prev, dc_prev, dpre


def _validate_tokens(tokens, vocab_size):
    tokens = list(tokens)
    if len(tokens) < 2 or tokens[0] != SOS_ID or tokens[-1] != EOS_ID:
        raise ValueError("transcript must be framed by start/end tokens")
    for t in tokens:
        if not 0 <= t < vocab_size:
            raise ValueError(f"token id {t} outside vocabulary")
    return tokens


def _forward_full(features, tokens, params, need_cache):
    cfg = params.config
    x = np.asarray(features, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("empty feature sequence")
    tokens = _validate_tokens(tokens, cfg.vocab_size)
    enc, enc_cache = _encode_cached(x, params)
    Tp = enc.shape[0]
    keys = enc @ params["att_key"].T
    H = cfg.encoder_dim
    dh = cfg.dec_hidden
    n_steps = len(tokens) - 1
    logits = np.empty((n_steps, cfg.vocab_size))
    attn = np.empty((n_steps, Tp))
    steps = [] if need_cache else None
    s = np.zeros(dh)
    c = np.zeros(dh)
    a_prev = np.full(Tp, 1.0 / Tp)
    for l in range(n_steps):
        in_id = tokens[l]
        context, alpha, att_cache = _attend_step(s, enc, keys, a_prev, params)
        inp = np.concatenate((params["embed"][in_id], context))
        s_new, c_new, gates = _lstm_cell(inp, s, c, params["dec_wx"],
                                         params["dec_wh"], params["dec_b"])
        r = np.concatenate((s_new, context))
        logits[l] = params["out_w"] @ r + params["out_b"]
        attn[l] = alpha
        if need_cache:
            steps.append((in_id, a_prev, att_cache, alpha, context, inp,
                          s, c, s_new, c_new, gates, r))
        s, c, a_prev = s_new, c_new, alpha
    return logits, attn, enc, enc_cache, keys, steps, tokens


def forward_teacher_forced(features, transcript, params):
    """Teacher-forced pass: returns (logits L x |V|, attention L x T', enc)."""
    logits, attn, enc, _, _, _, _ = _forward_full(features, transcript, params,
                                                  need_cache=False)
    return logits, attn, EncoderStates(enc, params.config.subsample_factor)


def loss_cross_entropy(logits, transcript):
    """Mean over decoder steps of -log softmax(logits_l)[target_l]."""
    targets = list(transcript)[1:]
    if logits.shape[0] != len(targets):
        raise ValueError("logit rows must match target count")
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    picked = logits[np.arange(len(targets)), targets]
    return float(np.mean(lse - picked))


def loss_and_gradients(features, transcript, params):
    """Loss plus exact gradients for every tensor in params."""
    cfg = params.config
    logits, attn, enc, enc_cache, keys, steps, tokens = _forward_full(
        features, transcript, params, need_cache=True)
    targets = np.array(tokens[1:])
    n_steps = len(targets)
    # d loss / d logits for the mean cross entropy
    m = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - m)
    probs = ex / ex.sum(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(ex.sum(axis=1))
    loss = float(np.mean(lse - logits[np.arange(n_steps), targets]))
    dlogits = probs
    dlogits[np.arange(n_steps), targets] -= 1.0
    dlogits /= n_steps

    grads = zero_grads(params)
    denc = np.zeros_like(enc)
    dh_c = cfg.dec_hidden
    ds_next = np.zeros(dh_c)
    dc_next = np.zeros(dh_c)
    dalpha_next = None
    for l in range(n_steps - 1, -1, -1):
        (in_id, a_prev, att_cache, alpha, context, inp,
         s_prev, c_prev, s_new, c_new, gates, r) = steps[l]
        dlog = dlogits[l]
        grads["out_w"] += np.outer(dlog, r)
        grads["out_b"] += dlog
        dr = params["out_w"].T @ dlog
        ds = dr[:dh_c] + ds_next
        dcontext = dr[dh_c:].copy()
        dinp, dh_prev, dc_prev, dpre = _lstm_cell_backward(
            ds, dc_next, inp, s_prev, c_prev, c_new, gates,
            params["dec_wx"], params["dec_wh"])
        grads["dec_wx"] += np.outer(dpre, inp)
        grads["dec_wh"] += np.outer(dpre, s_prev)
        grads["dec_b"] += dpre
        grads["embed"][in_id] += dinp[:cfg.embed_dim]
        dcontext += dinp[cfg.embed_dim:]
        ds_att, da_prev = _attend_step_backward(
            dcontext, dalpha_next, s_prev, enc, alpha, att_cache,
            params, grads, denc)
        ds_next = dh_prev + ds_att
        dc_next = dc_prev
        dalpha_next = da_prev
    _encode_backward(denc, enc_cache, params, grads)
    return loss, grads


def backward(features, transcript, params):
    """Gradients of loss_cross_entropy w.r.t. every parameter tensor."""
    return loss_and_gradients(features, transcript, params)[1]


def grad_check(params, features, transcript, epsilon=1e-5, max_entries=None):
    """Max relative error between analytic and central-difference grads.

    max_entries, when given, checks only the first N entries of each
    tensor (full sweep otherwise).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _, grads = loss_and_gradients(features, transcript, params)

    def loss_at(p):
        logits, _, _, _, _, _, tokens = _forward_full(features, transcript, p,
                                                      need_cache=False)
        return loss_cross_entropy(logits, tokens)

    work = params.copy()
    worst = 0.0
    for name, _ in tensor_catalog(params.config):
        tensor = work.tensors[name]
        flat = tensor.reshape(-1)
        ga = grads[name].reshape(-1)
        count = flat.size if max_entries is None else min(max_entries, flat.size)
        for k in range(count):
            orig = flat[k]
            flat[k] = orig + epsilon
            up = loss_at(work)
            flat[k] = orig - epsilon
            down = loss_at(work)
            flat[k] = orig
            gn = (up - down) / (2.0 * epsilon)
            rel = abs(ga[k] - gn) / max(abs(ga[k]), abs(gn), 1e-8)
            if rel > worst:
                worst = rel
    return worst


def greedy_decode(features, params, max_len=50):
    """Argmax decoding fed back on itself; stops at the end token.

    Returns emitted word ids, end token excluded.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    cfg = params.config
    x = np.asarray(features, dtype=np.float64)
    enc, _ = _encode_cached(x, params)
    Tp = enc.shape[0]
    keys = enc @ params["att_key"].T
    s = np.zeros(cfg.dec_hidden)
    c = np.zeros(cfg.dec_hidden)
    a_prev = np.full(Tp, 1.0 / Tp)
    prev_id = SOS_ID
    out = []
    for _ in range(max_len):
        context, alpha, _ = _attend_step(s, enc, keys, a_prev, params)
        inp = np.concatenate((params["embed"][prev_id], context))
        s, c, _ = _lstm_cell(inp, s, c, params["dec_wx"], params["dec_wh"],
                             params["dec_b"])
        logits = params["out_w"] @ np.concatenate((s, context)) + params["out_b"]
        prev_id = int(np.argmax(logits))
        a_prev = alpha
        if prev_id == EOS_ID:
            break
        out.append(prev_id)
    return out


# ---------------------------------------------------------------------------
# checkpoint i/o

def save_checkpoint(params, path):
    """Binary checkpoint: magic, version, dimensions, tensors as LE f64."""
    cfg = params.config
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", _CKPT_VERSION))
        fh.write(struct.pack("<10I", *cfg.field_values()))
        for name, _ in tensor_catalog(cfg):
            fh.write(params[name].astype("<f8").tobytes(order="C"))


def load_checkpoint(path):
    """Load and validate a checkpoint written by save_checkpoint."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 + 4 + 40:
        raise FormatError(f"{path}: truncated checkpoint header")
    if blob[:4] != _CKPT_MAGIC:
        raise FormatError(f"{path}: bad magic, not an A2WC checkpoint")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _CKPT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    dims = struct.unpack_from("<10I", blob, 8)
    try:
        cfg = A2WConfig(*dims)
    except ValueError as exc:
        raise FormatError(f"{path}: invalid dimensions header: {exc}") from exc
    offset = 48
    tensors = {}
    for name, shape in tensor_catalog(cfg):
        n = int(np.prod(shape))
        end = offset + 8 * n
        if end > len(blob):
            raise FormatError(f"{path}: truncated at tensor {name}")
        tensors[name] = np.frombuffer(blob[offset:end],
                                      dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes")
    return A2WParams(cfg, tensors)
