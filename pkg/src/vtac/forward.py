"""Desk-scale end-to-end inference through the engine simulator.

Runs a whole transformer forward pass with every matmul routed through
``simulate_matmul_engine``: quantize the activations entering each
quantized layer, feed codes (and binary weights or quantized peer
activations) to the engine, rescale the integer accumulators on the way
out, and execute normalization, softmax, GELU, residual adds and token
bookkeeping on the host in float64.  Intended for functional validation at
small widths, not for speed.
"""

from __future__ import annotations

import math

import numpy as np

from .engine import binarize_weights, quantize_activations, simulate_matmul_engine
from .model import ViTConfig, expand_model
from .perf import AcceleratorParams

LN_EPS = 1e-6


def _layernorm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + LN_EPS) * gamma + beta


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


_erf = np.vectorize(math.erf)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + _erf(x / math.sqrt(2.0)))


def extract_patches(config: ViTConfig, image: np.ndarray) -> np.ndarray:
    """Flatten non-overlapping patches into rows, row-major within a patch
    with channels last."""
    h, w, c = config.image_height, config.image_width, config.in_channels
    if image.shape != (h, w, c):
        raise ValueError(f"image shape {image.shape} != {(h, w, c)}")
    p = config.patch_size
    rows = []
    for ph in range(h // p):
        for pw in range(w // p):
            rows.append(image[ph * p:(ph + 1) * p, pw * p:(pw + 1) * p, :].reshape(-1))
    return np.asarray(rows, dtype=np.float64)


def generate_vit_weights(config: ViTConfig, seed: int = 0) -> dict:
    """Synthetic parameter set with transformer-typical magnitudes."""
    rng = np.random.default_rng(seed)

    def lin(out_ch, in_ch):
        return {
            "w": rng.normal(0.0, 0.02, size=(out_ch, in_ch)),
            "b": rng.normal(0.0, 0.02, size=out_ch),
        }

    def norm(width):
        return {
            "gamma": 1.0 + rng.normal(0.0, 0.02, size=width),
            "beta": rng.normal(0.0, 0.02, size=width),
        }

    m = config.embed_dim
    hidden = config.mlp_ratio * m
    weights = {
        "patch_embed": lin(m, config.in_channels * config.patch_size ** 2),
        "cls": rng.normal(0.0, 0.02, size=m),
        "pos": rng.normal(0.0, 0.02, size=(config.seq_len, m)),
        "norm": norm(m),
        "head": lin(config.num_classes, m),
    }
    for i in range(config.depth):
        weights[f"enc{i}"] = {
            "norm1": norm(m),
            "q": lin(m, m),
            "k": lin(m, m),
            "v": lin(m, m),
            "proj": lin(m, m),
            "norm2": norm(m),
            "fc1": lin(hidden, m),
            "fc2": lin(m, hidden),
        }
    return weights


def desk_params(config: ViTConfig, act_bits: int = 8) -> AcceleratorParams:
    """Small tile sizes legal for every layer of the model.  Results never
    depend on tiling, so any geometry that fits the dims works."""
    from .dse import head_parallelism

    matmuls = list(expand_model(config).matmuls())
    quant = [l for l in matmuls if l.quant_in]
    plain = [l for l in matmuls if not l.quant_in]
    return AcceleratorParams(
        tile_m=min([8] + [l.out_channels for l in plain]),
        tile_n=min([4] + [l.per_head_in for l in plain]),
        tile_m_q=min([8] + [l.out_channels for l in quant]),
        tile_n_q=min([4] + [l.per_head_in for l in quant]),
        pack=4,
        pack_q=64 // act_bits,
        head_par=head_parallelism(config.num_heads),
        act_bits=act_bits,
    )


def run_encoder_forward(config: ViTConfig, weights: dict, image: np.ndarray,
                        act_bits: int, params: AcceleratorParams | None = None,
                        binary_weights: bool = True) -> np.ndarray:
    """Class scores for one image, every matmul on the simulated engine.

    ``binary_weights=False`` keeps the stored weights at full precision
    (identity binarization), which isolates the engine's traversal and
    quantization plumbing for comparison against a float reference.
    """
    if params is None:
        params = desk_params(config, act_bits)
    layers = {l.name: l for l in expand_model(config).matmuls()}
    heads, hd = config.num_heads, config.head_dim
    seq = config.seq_len

    def fc(name, x, wb):
        layer = layers[name]
        if layer.quant_in:
            xin = quantize_activations(x, act_bits)
            win = binarize_weights(wb["w"]) if binary_weights else wb["w"]
        else:
            xin, win = x, wb["w"]
        acc, scale = simulate_matmul_engine(layer, params, xin, win)
        return acc * scale + wb["b"]

    def split_heads(x):
        return np.ascontiguousarray(
            x.reshape(seq, heads, hd).transpose(1, 0, 2)
        )

    tokens = fc("patch_embed", extract_patches(config, image), weights["patch_embed"])
    x = np.vstack([weights["cls"][None, :], tokens]) + weights["pos"]

    for i in range(config.depth):
        wb = weights[f"enc{i}"]
        y = _layernorm(x, wb["norm1"]["gamma"], wb["norm1"]["beta"])
        q = split_heads(fc(f"enc{i}.attn.q", y, wb["q"]))
        k = split_heads(fc(f"enc{i}.attn.k", y, wb["k"]))
        v = split_heads(fc(f"enc{i}.attn.v", y, wb["v"]))

        score_layer = layers[f"enc{i}.attn.score"]
        qq = quantize_activations(q, act_bits)
        kq = quantize_activations(k, act_bits)
        acc, scale = simulate_matmul_engine(score_layer, params, qq, kq)
        probs = _softmax(acc * scale / math.sqrt(hd))

        ctx_layer = layers[f"enc{i}.attn.context"]
        pq = quantize_activations(probs, act_bits)
        vq = quantize_activations(
            np.ascontiguousarray(v.transpose(0, 2, 1)), act_bits
        )
        acc, scale = simulate_matmul_engine(ctx_layer, params, pq, vq)
        ctx = (acc * scale).transpose(1, 0, 2).reshape(seq, heads * hd)

        x = x + fc(f"enc{i}.attn.proj", ctx, wb["proj"])
        y = _layernorm(x, wb["norm2"]["gamma"], wb["norm2"]["beta"])
        x = x + fc(f"enc{i}.mlp.fc2", _gelu(fc(f"enc{i}.mlp.fc1", y, wb["fc1"])),
                   wb["fc2"])

    x = _layernorm(x, weights["norm"]["gamma"], weights["norm"]["beta"])
    cls_layer = layers["head"]
    acc, scale = simulate_matmul_engine(cls_layer, params, x[0:1], weights["head"]["w"])
    return (acc * scale + weights["head"]["b"])[0]
