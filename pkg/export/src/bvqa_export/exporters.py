"""Build portable inference graphs from torchvision ResNet-50 / VGG-16.

The exported graph exposes ``conv_final`` (last convolutional maps),
``pooled`` (global-average-pooled vector), and ``logits``, plus named
per-stage taps, and bakes the ImageNet normalization into the graph so
consumers only scale frames to [0, 1]. A ``<model>.outputs.json``
sidecar describes every output and carries the graph checksum.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torchvision import models

from .onnx_writer import OnnxModel, OnnxNode, save_model

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

INPUT_SHAPE = [0, 3, 224, 224]  # 0 = dynamic batch


class ExportError(ValueError):
    pass


def build_model(name: str, weights_path: str | Path | None = None,
                seed: int = 0) -> nn.Module:
    """Instantiate the torchvision model, loading a local state dict if given.

    Without a weights file the model keeps its (seeded) random
    initialization, which is sufficient for graph-parity testing.
    """
    torch.manual_seed(seed)
    if name == "resnet50":
        model = models.resnet50(weights=None)
    elif name == "vgg16":
        model = models.vgg16(weights=None)
    else:
        raise ExportError(f"unsupported model {name!r} (expected resnet50 or vgg16)")
    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    model.eval()
    return model


class _GraphBuilder:
    def __init__(self, graph_name: str):
        self.graph_name = graph_name
        self.nodes: list[OnnxNode] = []
        self.initializers: dict[str, np.ndarray] = {}
        self._n = 0

    def _name(self, prefix: str) -> str:
        self._n += 1
        return f"{prefix}_{self._n}"

    def tensor(self, name: str, arr: torch.Tensor | np.ndarray) -> str:
        if isinstance(arr, torch.Tensor):
            arr = arr.detach().cpu().numpy()
        self.initializers[name] = np.ascontiguousarray(arr, dtype=np.float32)
        return name

    def normalize(self, x: str) -> str:
        scale = (1.0 / np.asarray(IMAGENET_STD)).reshape(1, 3, 1, 1)
        bias = (-np.asarray(IMAGENET_MEAN) / np.asarray(IMAGENET_STD)).reshape(1, 3, 1, 1)
        self.tensor("norm_scale", scale)
        self.tensor("norm_bias", bias)
        scaled = self._name("scaled")
        self.nodes.append(OnnxNode("Mul", [x, "norm_scale"], [scaled]))
        normed = self._name("normed")
        self.nodes.append(OnnxNode("Add", [scaled, "norm_bias"], [normed]))
        return normed

    def conv(self, x: str, module: nn.Conv2d, out: str | None = None) -> str:
        if module.groups != 1 or module.dilation != (1, 1):
            raise ExportError("only group-1, dilation-1 convolutions are exported")
        out = out or self._name("conv")
        w = self.tensor(f"{out}_w", module.weight)
        inputs = [x, w]
        if module.bias is not None:
            inputs.append(self.tensor(f"{out}_b", module.bias))
        self.nodes.append(OnnxNode("Conv", inputs, [out], {
            "kernel_shape": list(module.kernel_size),
            "strides": list(module.stride),
            "pads": [module.padding[0], module.padding[1],
                     module.padding[0], module.padding[1]],
        }))
        return out

    def bn(self, x: str, module: nn.BatchNorm2d, out: str | None = None) -> str:
        out = out or self._name("bn")
        self.nodes.append(OnnxNode("BatchNormalization", [
            x,
            self.tensor(f"{out}_scale", module.weight),
            self.tensor(f"{out}_bias", module.bias),
            self.tensor(f"{out}_mean", module.running_mean),
            self.tensor(f"{out}_var", module.running_var),
        ], [out], {"epsilon": float(module.eps)}))
        return out

    def relu(self, x: str, out: str | None = None) -> str:
        out = out or self._name("relu")
        self.nodes.append(OnnxNode("Relu", [x], [out]))
        return out

    def maxpool(self, x: str, module: nn.MaxPool2d, out: str | None = None) -> str:
        out = out or self._name("maxpool")
        k = module.kernel_size if isinstance(module.kernel_size, int) else module.kernel_size[0]
        s = module.stride if isinstance(module.stride, int) else module.stride[0]
        p = module.padding if isinstance(module.padding, int) else module.padding[0]
        self.nodes.append(OnnxNode("MaxPool", [x], [out], {
            "kernel_shape": [k, k], "strides": [s, s], "pads": [p, p, p, p],
        }))
        return out

    def add(self, a: str, b: str, out: str | None = None) -> str:
        out = out or self._name("add")
        self.nodes.append(OnnxNode("Add", [a, b], [out]))
        return out

    def global_pool_flatten(self, x: str, out: str) -> str:
        gap = self._name("gap")
        self.nodes.append(OnnxNode("GlobalAveragePool", [x], [gap]))
        self.nodes.append(OnnxNode("Flatten", [gap], [out], {"axis": 1}))
        return out

    def flatten(self, x: str, out: str | None = None) -> str:
        out = out or self._name("flat")
        self.nodes.append(OnnxNode("Flatten", [x], [out], {"axis": 1}))
        return out

    def linear(self, x: str, module: nn.Linear, out: str | None = None) -> str:
        out = out or self._name("fc")
        self.nodes.append(OnnxNode("Gemm", [
            x,
            self.tensor(f"{out}_w", module.weight),
            self.tensor(f"{out}_b", module.bias),
        ], [out], {"transB": 1}))
        return out

    def finish(self, outputs: dict[str, list[int]]) -> OnnxModel:
        return OnnxModel(
            graph_name=self.graph_name,
            nodes=self.nodes,
            initializers=self.initializers,
            inputs={"input": list(INPUT_SHAPE)},
            outputs=outputs,
        )


def _bottleneck(g: _GraphBuilder, x: str, block) -> str:
    out = g.relu(g.bn(g.conv(x, block.conv1), block.bn1))
    out = g.relu(g.bn(g.conv(out, block.conv2), block.bn2))
    out = g.bn(g.conv(out, block.conv3), block.bn3)
    identity = x
    if block.downsample is not None:
        identity = g.bn(g.conv(x, block.downsample[0]), block.downsample[1])
    return g.relu(g.add(out, identity))


def export_resnet50(model: nn.Module, out_path: str | Path) -> dict:
    g = _GraphBuilder("resnet50_features")
    x = g.normalize("input")
    x = g.relu(g.bn(g.conv(x, model.conv1), model.bn1), out="stem")
    x = g.maxpool(x, model.maxpool)
    taps = {"stem": [0, 64, 112, 112]}
    stage_shapes = {
        "layer1": [0, 256, 56, 56],
        "layer2": [0, 512, 28, 28],
        "layer3": [0, 1024, 14, 14],
        "layer4": [0, 2048, 7, 7],
    }
    for stage_name, shape in stage_shapes.items():
        for block in getattr(model, stage_name):
            x = _bottleneck(g, x, block)
        g.nodes.append(OnnxNode("Identity", [x], [stage_name]))
        x = stage_name
        taps[stage_name] = shape
    g.nodes.append(OnnxNode("Identity", [x], ["conv_final"]))
    g.global_pool_flatten("conv_final", "pooled")
    g.linear("pooled", model.fc, out="logits")
    outputs = {"conv_final": [0, 2048, 7, 7], "pooled": [0, 2048], "logits": [0, 1000]}
    onnx_model = g.finish({**outputs, **{k: v for k, v in taps.items()}})
    return _write(onnx_model, out_path, "resnet50", outputs, taps)


def export_vgg16(model: nn.Module, out_path: str | Path) -> dict:
    g = _GraphBuilder("vgg16_features")
    x = g.normalize("input")
    taps = {}
    block = 0
    channels = {1: 64, 2: 128, 3: 256, 4: 512, 5: 512}
    for layer in model.features:
        if isinstance(layer, nn.Conv2d):
            x = g.conv(x, layer)
        elif isinstance(layer, nn.ReLU):
            x = g.relu(x)
        elif isinstance(layer, nn.MaxPool2d):
            block += 1
            name = f"block{block}"
            x = g.maxpool(x, layer, out=name)
            size = 224 // (2**block)
            taps[name] = [0, channels[block], size, size]
        else:
            raise ExportError(f"unexpected layer in vgg features: {layer!r}")
    g.nodes.append(OnnxNode("Identity", [x], ["conv_final"]))
    g.global_pool_flatten("conv_final", "pooled")
    # classifier input is the flattened 512x7x7 maps (the 7x7 adaptive
    # average pool is the identity at 224x224 input)
    x = g.flatten("conv_final")
    linears = [m for m in model.classifier if isinstance(m, nn.Linear)]
    x = g.relu(g.linear(x, linears[0]))
    x = g.relu(g.linear(x, linears[1]))
    g.linear(x, linears[2], out="logits")
    outputs = {"conv_final": [0, 512, 7, 7], "pooled": [0, 512], "logits": [0, 1000]}
    onnx_model = g.finish({**outputs, **taps})
    return _write(onnx_model, out_path, "vgg16", outputs, taps)


def _write(onnx_model: OnnxModel, out_path: str | Path, model_name: str,
           outputs: dict, taps: dict) -> dict:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(onnx_model, out_path)
    checksum = hashlib.sha256(out_path.read_bytes()).hexdigest()
    produced = set(onnx_model.initializers)
    for node in onnx_model.nodes:
        produced.update(node.outputs)
    for name in list(outputs) + list(taps):
        if name not in produced:
            raise ExportError(f"{model_name}: sidecar output {name!r} missing from graph")
    sidecar = {
        "model": model_name,
        "graph_file": out_path.name,
        "input": {"name": "input", "shape": list(INPUT_SHAPE)},
        "normalization": {"mean": list(IMAGENET_MEAN), "std": list(IMAGENET_STD)},
        "outputs": outputs,
        "taps": taps,
        "checksum": f"sha256:{checksum}",
    }
    sidecar_path = out_path.with_name(out_path.name + ".outputs.json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    return sidecar


EXPORTERS = {"resnet50": export_resnet50, "vgg16": export_vgg16}


def export_graph(model_name: str, out_dir: str | Path,
                 weights_path: str | Path | None = None, seed: int = 0) -> dict:
    """Export one model; returns the sidecar dict."""
    if model_name not in EXPORTERS:
        raise ExportError(f"unsupported model {model_name!r}")
    model = build_model(model_name, weights_path, seed)
    out_path = Path(out_dir) / f"{model_name}_features.onnx"
    return EXPORTERS[model_name](model, out_path)
