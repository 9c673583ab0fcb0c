"""Compression autoencoder mapping d_h-dim text embeddings to d_f-dim codes.

Encoder and decoder are mirrored two-hidden-layer tanh MLPs (width 256).
Training minimizes, over the embedding batch,

    mean_i [ |D(E(h_i)) - h_i|_1 + SCE ]

where SCE is the symmetric cross-entropy over the batch similarity matrix
with logits cos(r_i, h_j) / tau and identity targets. Gradients are written
out by hand (the module stays dependency-free) and checked against finite
differences in the tests.
"""
from __future__ import annotations

import struct

import numpy as np

from semsplat.errors import InvalidParameterError

AEC_MAGIC = b"AEC1"
HIDDEN_WIDTH = 256


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_in, fan_out))


class EmbeddingCodec:
    """encode: d_h -> d_f, decode: d_f -> d_h."""

    def __init__(self, d_h, d_f, hidden=HIDDEN_WIDTH, seed=0):
        if d_h <= 0 or d_f <= 0:
            raise InvalidParameterError("embedding dimensions must be positive")
        self.d_h = d_h
        self.d_f = d_f
        self.hidden = hidden
        rng = np.random.default_rng(seed)
        dims_enc = [d_h, hidden, hidden, d_f]
        dims_dec = [d_f, hidden, hidden, d_h]
        self.enc_w = [_glorot(rng, a, b) for a, b in zip(dims_enc, dims_enc[1:])]
        self.enc_b = [np.zeros(b) for b in dims_enc[1:]]
        self.dec_w = [_glorot(rng, a, b) for a, b in zip(dims_dec, dims_dec[1:])]
        self.dec_b = [np.zeros(b) for b in dims_dec[1:]]
        self.final_loss = None
        self.loss_history = []

    # -- forward ---------------------------------------------------------

    def _mlp(self, x, weights, biases):
        # follow the input dtype: float32 maps stay float32 end to end, which
        # is what the training loop uses for per-pixel decoding
        dtype = x.dtype if x.dtype in (np.float32, np.float64) else np.float64
        h = x @ weights[0].astype(dtype, copy=False) + biases[0].astype(dtype, copy=False)
        h = np.tanh(h)
        h = h @ weights[1].astype(dtype, copy=False) + biases[1].astype(dtype, copy=False)
        h = np.tanh(h)
        return h @ weights[2].astype(dtype, copy=False) + biases[2].astype(dtype, copy=False)

    def encode(self, h):
        h = np.asarray(h)
        single = h.ndim == 1
        out = self._mlp(np.atleast_2d(h), self.enc_w, self.enc_b)
        return out[0] if single else out

    def decode(self, f):
        f = np.asarray(f)
        single = f.ndim == 1
        out = self._mlp(np.atleast_2d(f), self.dec_w, self.dec_b)
        return out[0] if single else out

    def roundtrip(self, h):
        return self.decode(self.encode(h))

    def parameters(self):
        return self.enc_w + self.enc_b + self.dec_w + self.dec_b

    # -- persistence ------------------------------------------------------

    def save(self, path):
        arrays = self.parameters()
        with open(path, "wb") as fh:
            fh.write(AEC_MAGIC)
            fh.write(struct.pack("<IIII", self.d_h, self.d_f, self.hidden, len(arrays)))
            fh.write(struct.pack("<d", -1.0 if self.final_loss is None else self.final_loss))
            for arr in arrays:
                shape = arr.shape if arr.ndim == 2 else (arr.shape[0], 0)
                fh.write(struct.pack("<II", *shape))
                fh.write(np.asarray(arr, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            if fh.read(4) != AEC_MAGIC:
                raise InvalidParameterError(f"{path}: not an AEC1 checkpoint")
            d_h, d_f, hidden, n_arrays = struct.unpack("<IIII", fh.read(16))
            (final_loss,) = struct.unpack("<d", fh.read(8))
            arrays = []
            for _ in range(n_arrays):
                rows, cols = struct.unpack("<II", fh.read(8))
                count = rows * cols if cols else rows
                data = np.frombuffer(fh.read(8 * count), dtype="<f8").astype(np.float64)
                arrays.append(data.reshape(rows, cols) if cols else data)
        codec = cls(d_h, d_f, hidden=hidden)
        codec.enc_w = arrays[0:3]
        codec.enc_b = arrays[3:6]
        codec.dec_w = arrays[6:9]
        codec.dec_b = arrays[9:12]
        codec.final_loss = None if final_loss < 0 else final_loss
        return codec


def _encoder_forward(codec, h):
    z1 = h @ codec.enc_w[0] + codec.enc_b[0]
    a1 = np.tanh(z1)
    z2 = a1 @ codec.enc_w[1] + codec.enc_b[1]
    a2 = np.tanh(z2)
    f = a2 @ codec.enc_w[2] + codec.enc_b[2]
    return f, (h, a1, a2)


def _decoder_forward(codec, f):
    z4 = f @ codec.dec_w[0] + codec.dec_b[0]
    a4 = np.tanh(z4)
    z5 = a4 @ codec.dec_w[1] + codec.dec_b[1]
    a5 = np.tanh(z5)
    r = a5 @ codec.dec_w[2] + codec.dec_b[2]
    return r, (f, a4, a5)


def _decoder_backward(codec, cache, d_r, grads):
    f, a4, a5 = cache
    dz = d_r
    grads["dec_w"][2] += a5.T @ dz
    grads["dec_b"][2] += dz.sum(axis=0)
    da5 = dz @ codec.dec_w[2].T
    dz = da5 * (1 - a5 * a5)
    grads["dec_w"][1] += a4.T @ dz
    grads["dec_b"][1] += dz.sum(axis=0)
    da4 = dz @ codec.dec_w[1].T
    dz = da4 * (1 - a4 * a4)
    grads["dec_w"][0] += f.T @ dz
    grads["dec_b"][0] += dz.sum(axis=0)
    return dz @ codec.dec_w[0].T


def _encoder_backward(codec, cache, d_f, grads):
    h_in, a1, a2 = cache
    dz = d_f
    grads["enc_w"][2] += a2.T @ dz
    grads["enc_b"][2] += dz.sum(axis=0)
    da2 = dz @ codec.enc_w[2].T
    dz = da2 * (1 - a2 * a2)
    grads["enc_w"][1] += a1.T @ dz
    grads["enc_b"][1] += dz.sum(axis=0)
    da1 = dz @ codec.enc_w[1].T
    dz = da1 * (1 - a1 * a1)
    grads["enc_w"][0] += h_in.T @ dz
    grads["enc_b"][0] += dz.sum(axis=0)


def codec_loss_and_grad(codec, h, tau, attenuation_levels=()):
    """Loss value and gradients w.r.t. every codec parameter (dict of lists).

    The base term is the reconstruction metric (L1 + symmetric cross entropy
    over cosine logits). Optional `attenuation_levels` add L1 terms
    |D(a * E(h_i)) - h_i| for each level a: rendered feature maps carry
    alpha-attenuated codes, and the decoder must keep attenuated codes on
    their source embedding's side of the classification boundary.
    """
    batch = h.shape[0]
    grads = {"enc_w": [np.zeros_like(w) for w in codec.enc_w],
             "enc_b": [np.zeros_like(b) for b in codec.enc_b],
             "dec_w": [np.zeros_like(w) for w in codec.dec_w],
             "dec_b": [np.zeros_like(b) for b in codec.dec_b]}

    f, enc_cache = _encoder_forward(codec, h)
    r, dec_cache = _decoder_forward(codec, f)

    l1 = np.mean(np.sum(np.abs(r - h), axis=1))
    d_r = np.sign(r - h) / batch

    # symmetric cross entropy over cosine logits
    h_unit = h / np.linalg.norm(h, axis=1, keepdims=True)
    r_norm = np.linalg.norm(r, axis=1, keepdims=True)
    cos = (r @ h_unit.T) / r_norm
    logits = cos / tau
    logits_row = logits - logits.max(axis=1, keepdims=True)
    p_row = np.exp(logits_row)
    p_row /= p_row.sum(axis=1, keepdims=True)
    logits_col = logits - logits.max(axis=0, keepdims=True)
    p_col = np.exp(logits_col)
    p_col /= p_col.sum(axis=0, keepdims=True)
    diag = np.arange(batch)
    sce = -0.5 * (
        np.mean(np.log(p_row[diag, diag] + 1e-300))
        + np.mean(np.log(p_col[diag, diag] + 1e-300))
    )
    eye = np.eye(batch)
    d_logits = 0.5 / batch * ((p_row - eye) + (p_col - eye))
    d_cos = d_logits / tau
    # cos_ij = r_i . hu_j / |r_i|
    d_r += d_cos @ h_unit / r_norm
    d_r -= (np.sum(d_cos * cos, axis=1, keepdims=True)) * r / r_norm**2

    loss = l1 + sce

    d_f = _decoder_backward(codec, dec_cache, d_r, grads)

    for level in attenuation_levels:
        r_att, att_cache = _decoder_forward(codec, level * f)
        loss += np.mean(np.sum(np.abs(r_att - h), axis=1))
        d_r_att = np.sign(r_att - h) / batch
        d_f_att = _decoder_backward(codec, att_cache, d_r_att, grads)
        d_f = d_f + level * d_f_att

    _encoder_backward(codec, enc_cache, d_f, grads)
    return loss, grads


def train_codec(embeddings, epochs=600, seed=0, d_f=16, hidden=HIDDEN_WIDTH,
                lr=3e-3, tau=0.01, checkpoint_every=None, attenuation_levels=()):
    """Fit the codec to a set of embeddings; deterministic for a given seed.

    Uses full-batch Adam with cosine learning-rate decay; the decay matters
    because the L1 term keeps the gradient magnitude constant near the
    optimum, so a fixed step would orbit it instead of settling.
    """
    h = np.asarray(embeddings, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] < 2:
        raise InvalidParameterError("need at least 2 embeddings to train the codec")
    d_h = h.shape[1]
    codec = EmbeddingCodec(d_h, d_f, hidden=hidden, seed=seed)

    params = (codec.enc_w, codec.enc_b, codec.dec_w, codec.dec_b)
    keys = ("enc_w", "enc_b", "dec_w", "dec_b")
    m_state = [[np.zeros_like(a) for a in group] for group in params]
    v_state = [[np.zeros_like(a) for a in group] for group in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    if checkpoint_every is None:
        checkpoint_every = max(1, epochs // 20)

    loss = None
    for epoch in range(epochs):
        loss, grads = codec_loss_and_grad(codec, h, tau, attenuation_levels)
        if epoch % checkpoint_every == 0:
            codec.loss_history.append((epoch, float(loss)))
        t = epoch + 1
        lr_t = lr * 0.5 * (1.0 + np.cos(np.pi * epoch / epochs))
        for gi, (group, key) in enumerate(zip(params, keys)):
            for ai, arr in enumerate(group):
                g = grads[key][ai]
                m_state[gi][ai] = beta1 * m_state[gi][ai] + (1 - beta1) * g
                v_state[gi][ai] = beta2 * v_state[gi][ai] + (1 - beta2) * g * g
                m_hat = m_state[gi][ai] / (1 - beta1**t)
                v_hat = v_state[gi][ai] / (1 - beta2**t)
                arr -= lr_t * m_hat / (np.sqrt(v_hat) + eps)

    final_loss, _ = codec_loss_and_grad(codec, h, tau, attenuation_levels)
    codec.loss_history.append((epochs, float(final_loss)))
    codec.final_loss = float(final_loss)
    return codec
