#!/usr/bin/env python3
"""Generate the checked-in test assets under tests/data/.

Builds tiny synthetic inference graphs (ONNX files + output sidecars)
with seeded weights, a canonical test image, and reference output
tensors computed by an independent numpy forward pass written here
(deliberately not the executor in bvqa.inference).

Run from the repository root: python3 tools/gen_test_assets.py
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from bvqa.onnx_io import OnnxModel, OnnxNode, save_model

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "tests" / "data"
MODELS = DATA / "models"

IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


def canonical_image() -> np.ndarray:
    """Deterministic 224x224x3 test image in [0, 1]: gradients + texture."""
    yy, xx = np.meshgrid(np.arange(224), np.arange(224), indexing="ij")
    r = xx / 223.0
    g = yy / 223.0
    b = 0.5 + 0.5 * np.sin(xx / 9.0) * np.cos(yy / 13.0)
    rng = np.random.default_rng(20230917)
    noise = rng.random((224, 224, 3)) * 0.05
    img = np.stack([r, g, b], axis=-1) * 0.95 + noise
    return np.clip(img, 0.0, 1.0)


def _norm_consts():
    scale = (1.0 / IMAGENET_STD).reshape(1, 3, 1, 1).astype(np.float32)
    bias = (-IMAGENET_MEAN / IMAGENET_STD).reshape(1, 3, 1, 1).astype(np.float32)
    return scale, bias


def build_tiny_resnet(path: Path, seed: int = 11) -> dict:
    """Resnet-style stand-in: 2048-channel conv_final on a 4x4 grid."""
    rng = np.random.default_rng(seed)
    scale, bias = _norm_consts()
    conv_w = (rng.standard_normal((2048, 3, 1, 1)) * 0.5).astype(np.float32)
    conv_b = (rng.standard_normal(2048) * 0.1).astype(np.float32)
    fc_w = (rng.standard_normal((10, 2048)) * 0.02).astype(np.float32)
    fc_b = (rng.standard_normal(10) * 0.1).astype(np.float32)
    model = OnnxModel(
        graph_name="tiny_resnet",
        nodes=[
            OnnxNode("Mul", ["input", "norm_scale"], ["scaled"]),
            OnnxNode("Add", ["scaled", "norm_bias"], ["normed"]),
            OnnxNode("AveragePool", ["normed"], ["stem"],
                     {"kernel_shape": [56, 56], "strides": [56, 56]}),
            OnnxNode("Conv", ["stem", "conv_w", "conv_b"], ["conv_pre"],
                     {"kernel_shape": [1, 1]}),
            OnnxNode("Relu", ["conv_pre"], ["conv_final"]),
            OnnxNode("GlobalAveragePool", ["conv_final"], ["gap"]),
            OnnxNode("Flatten", ["gap"], ["pooled"]),
            OnnxNode("Gemm", ["pooled", "fc_w", "fc_b"], ["logits"], {"transB": 1}),
        ],
        initializers={
            "norm_scale": scale, "norm_bias": bias,
            "conv_w": conv_w, "conv_b": conv_b,
            "fc_w": fc_w, "fc_b": fc_b,
        },
        inputs={"input": [0, 3, 224, 224]},
        outputs={
            "conv_final": [0, 2048, 4, 4],
            "pooled": [0, 2048],
            "logits": [0, 10],
            "stem": [0, 3, 4, 4],
        },
    )
    save_model(model, path)
    sidecar = {
        "model": "tiny_resnet",
        "input": {"name": "input", "shape": [0, 3, 224, 224]},
        "outputs": {"conv_final": [0, 2048, 4, 4], "pooled": [0, 2048], "logits": [0, 10]},
        "taps": {"stem": [0, 3, 4, 4], "conv_final": [0, 2048, 4, 4]},
    }
    path.with_name(path.name + ".outputs.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return {"conv_w": conv_w, "conv_b": conv_b, "fc_w": fc_w, "fc_b": fc_b}


def build_tiny_vgg(path: Path, seed: int = 23, channels: int = 8, name: str = "tiny_vgg",
                   normalize: bool = True) -> dict:
    """VGG-style stand-in: 3x3 conv on a 7x7 grid, small channel count."""
    rng = np.random.default_rng(seed)
    conv_w = (rng.standard_normal((channels, 3, 3, 3)) * 0.3).astype(np.float32)
    conv_b = (rng.standard_normal(channels) * 0.1).astype(np.float32)
    fc_w = (rng.standard_normal((10, channels)) * 0.4).astype(np.float32)
    fc_b = (rng.standard_normal(10) * 0.1).astype(np.float32)
    nodes = []
    initializers = {"conv_w": conv_w, "conv_b": conv_b, "fc_w": fc_w, "fc_b": fc_b}
    pool_in = "input"
    if normalize:
        scale, bias = _norm_consts()
        initializers["norm_scale"] = scale
        initializers["norm_bias"] = bias
        nodes += [
            OnnxNode("Mul", ["input", "norm_scale"], ["scaled"]),
            OnnxNode("Add", ["scaled", "norm_bias"], ["normed"]),
        ]
        pool_in = "normed"
    nodes += [
        OnnxNode("AveragePool", [pool_in], ["stem"],
                 {"kernel_shape": [32, 32], "strides": [32, 32]}),
        OnnxNode("Conv", ["stem", "conv_w", "conv_b"], ["conv_pre"],
                 {"kernel_shape": [3, 3], "pads": [1, 1, 1, 1]}),
        OnnxNode("Relu", ["conv_pre"], ["conv_final"]),
        OnnxNode("GlobalAveragePool", ["conv_final"], ["gap"]),
        OnnxNode("Flatten", ["gap"], ["pooled"]),
        OnnxNode("Gemm", ["pooled", "fc_w", "fc_b"], ["logits"], {"transB": 1}),
    ]
    model = OnnxModel(
        graph_name=name,
        nodes=nodes,
        initializers=initializers,
        inputs={"input": [0, 3, 224, 224]},
        outputs={
            "conv_final": [0, channels, 7, 7],
            "pooled": [0, channels],
            "logits": [0, 10],
            "stem": [0, 3, 7, 7],
        },
    )
    save_model(model, path)
    sidecar = {
        "model": name,
        "input": {"name": "input", "shape": [0, 3, 224, 224]},
        "outputs": {"conv_final": [0, channels, 7, 7], "pooled": [0, channels], "logits": [0, 10]},
        "taps": {"stem": [0, 3, 7, 7], "conv_final": [0, channels, 7, 7]},
    }
    path.with_name(path.name + ".outputs.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return {"conv_w": conv_w, "conv_b": conv_b, "fc_w": fc_w, "fc_b": fc_b,
            "normalize": normalize, "channels": channels}


# --- independent reference forward pass (plain loops, no bvqa.inference) ---

def ref_avgpool(x, k):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // k, w // k), dtype=np.float64)
    for i in range(h // k):
        for j in range(w // k):
            out[:, :, i, j] = x[:, :, i * k:(i + 1) * k, j * k:(j + 1) * k].mean(axis=(2, 3))
    return out


def ref_conv(x, w, b, pad):
    n, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.zeros((n, cin, h + 2 * pad, wd + 2 * pad), dtype=np.float64)
    xp[:, :, pad:pad + h, pad:pad + wd] = x
    out = np.zeros((n, cout, h, wd), dtype=np.float64)
    for m in range(cout):
        for i in range(h):
            for j in range(wd):
                patch = xp[:, :, i:i + kh, j:j + kw]
                out[:, m, i, j] = np.sum(patch * w[m][None], axis=(1, 2, 3)) + b[m]
    return out


def ref_forward(img_hwc, weights, pool_k, pad):
    x = img_hwc.transpose(2, 0, 1)[None].astype(np.float64)
    if weights.get("normalize", True):
        x = (x - IMAGENET_MEAN.reshape(1, 3, 1, 1)) / IMAGENET_STD.reshape(1, 3, 1, 1)
    x = ref_avgpool(x, pool_k)
    x = ref_conv(x, weights["conv_w"].astype(np.float64), weights["conv_b"].astype(np.float64), pad)
    conv_final = np.maximum(x, 0.0)
    pooled = conv_final.mean(axis=(2, 3))
    logits = pooled @ weights["fc_w"].T.astype(np.float64) + weights["fc_b"].astype(np.float64)
    return conv_final[0], pooled[0], logits[0]


def main() -> None:
    MODELS.mkdir(parents=True, exist_ok=True)
    img = canonical_image()
    np.save(DATA / "canonical_image.npy", img.astype(np.float32))
    # everything downstream sees exactly the stored f32 precision
    img = np.load(DATA / "canonical_image.npy").astype(np.float64)
    from PIL import Image

    Image.fromarray((img * 255.0).round().astype(np.uint8)).save(DATA / "canonical_image.png")

    resnet_w = build_tiny_resnet(MODELS / "resnet50_features.onnx")
    resnet_w["normalize"] = True
    vgg_w = build_tiny_vgg(MODELS / "vgg16_features.onnx")
    twomap_w = build_tiny_vgg(MODELS / "twomap.onnx", seed=77, channels=2,
                              name="twomap", normalize=False)
    onemap_w = build_tiny_vgg(MODELS / "onemap.onnx", seed=78, channels=1,
                              name="onemap", normalize=False)

    refs = {}
    cf, pooled, logits = ref_forward(img, resnet_w, pool_k=56, pad=0)
    refs.update({"resnet_conv_final": cf, "resnet_pooled": pooled, "resnet_logits": logits})
    cf, pooled, logits = ref_forward(img, vgg_w, pool_k=32, pad=1)
    refs.update({"vgg_conv_final": cf, "vgg_pooled": pooled, "vgg_logits": logits})
    cf, pooled, logits = ref_forward(img, twomap_w, pool_k=32, pad=1)
    refs.update({"twomap_conv_final": cf, "twomap_pooled": pooled, "twomap_logits": logits})
    np.savez(DATA / "reference_outputs.npz", **{k: v.astype(np.float32) for k, v in refs.items()})

    # Golden NSS vectors freezing the exact map/statistic catalogue.
    from bvqa import nss
    from bvqa.dataset import Frame

    frame = Frame(data=img, source_index=0, timestamp_s=0.0)
    spatial = nss.spatial_nss_frame(frame)
    frames = [
        Frame(data=np.roll(img, 3 * i, axis=1), source_index=i,
              timestamp_s=i / 8.0)
        for i in range(6)
    ]
    temporal = nss.temporal_nss(frames)
    np.savez(DATA / "golden_nss.npz", spatial=spatial, temporal=temporal)
    print(f"assets written under {DATA}")


if __name__ == "__main__":
    main()
