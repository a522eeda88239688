"""CPU executor for the ONNX inference graphs.

Supports the op subset emitted by the model-export tooling for plain
convolutional classifiers (Conv / pooling / Gemm / elementwise). Graphs
are immutable after load and safe to share across threads; each ``run``
call owns its tensor environment.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .onnx_io import OnnxModel, load_model

REQUIRED_OUTPUTS = ("conv_final", "pooled", "logits")


class GraphError(ValueError):
    """Raised for missing outputs, unsupported ops, or shape mismatches."""


def _attr(node, name, default):
    return node.attrs.get(name, default)


def _pad_nchw(x, pads, value=0.0):
    pt, pl, pb, pr = pads
    if pt == pl == pb == pr == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=value)


def _pool_windows(x, kernel, strides, pads, pad_value):
    kh, kw = kernel
    sh, sw = strides
    xp = _pad_nchw(x, pads, pad_value)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, ::sh, ::sw]


def _conv(node, x, w, b):
    kh, kw = w.shape[2], w.shape[3]
    sh, sw = _attr(node, "strides", [1, 1])
    pads = _attr(node, "pads", [0, 0, 0, 0])
    dil = _attr(node, "dilations", [1, 1])
    group = _attr(node, "group", 1)
    if list(dil) != [1, 1] or group != 1:
        raise GraphError("Conv: only dilation 1 / group 1 supported")
    xp = _pad_nchw(x, pads)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    n, c, ho, wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n, ho, wo, c * kh * kw)
    out = cols @ w.reshape(w.shape[0], -1).T
    if b is not None:
        out = out + b
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2), dtype=np.float32)


def _gemm(node, a, b, c):
    if _attr(node, "transA", 0):
        a = a.T
    if _attr(node, "transB", 0):
        b = b.T
    out = float(_attr(node, "alpha", 1.0)) * (a @ b)
    if c is not None:
        out = out + float(_attr(node, "beta", 1.0)) * c
    return out.astype(np.float32)


class InferenceGraph:
    """A loaded ONNX graph plus its output sidecar.

    The sidecar ``<model>.outputs.json`` declares the named outputs and
    per-layer taps with their shapes and is the single source of truth
    for tap names.
    """

    def __init__(self, model: OnnxModel, sidecar: dict, graph_id: str = ""):
        self.model = model
        self.graph_id = graph_id or model.graph_name
        self.sidecar = sidecar
        self.outputs: dict[str, list[int]] = {
            k: list(v) for k, v in sidecar.get("outputs", {}).items()
        }
        self.taps: dict[str, list[int]] = {k: list(v) for k, v in sidecar.get("taps", {}).items()}
        produced = set(model.initializers)
        for node in model.nodes:
            produced.update(node.outputs)
        for name in REQUIRED_OUTPUTS:
            if name not in self.outputs:
                raise GraphError(f"{self.graph_id}: sidecar missing required output {name!r}")
            if name not in produced:
                raise GraphError(f"{self.graph_id}: graph does not produce output {name!r}")
        self._producible = produced
        if len(model.inputs) != 1:
            raise GraphError(f"{self.graph_id}: expected exactly one graph input")
        self.input_name = next(iter(model.inputs))
        shape = model.inputs[self.input_name]
        self.input_shape = tuple(shape[1:])  # (C, H, W), batch dim dynamic

    @classmethod
    def load(cls, path: str | Path) -> "InferenceGraph":
        path = Path(path)
        sidecar_path = path.with_suffix(path.suffix + ".outputs.json")
        if not sidecar_path.exists():
            sidecar_path = path.with_name(path.stem + ".outputs.json")
        with open(sidecar_path, encoding="utf-8") as fh:
            sidecar = json.load(fh)
        return cls(load_model(path), sidecar, graph_id=path.stem)

    def conv_channels(self) -> int:
        return int(self.outputs["conv_final"][1])

    def run(self, x: np.ndarray, names: list[str]) -> dict[str, np.ndarray]:
        """Execute the graph on batch ``x`` (N,C,H,W) and return ``names``."""
        x = np.ascontiguousarray(x, dtype=np.float32)
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise GraphError(
                f"{self.graph_id}: input shape {x.shape} does not match {self.input_shape}"
            )
        for name in names:
            if name not in self._producible:
                raise GraphError(f"{self.graph_id}: unknown output {name!r}")
        env: dict[str, np.ndarray] = {self.input_name: x}
        env.update(self.model.initializers)
        wanted = set(names)
        for node in self.model.nodes:
            self._execute(node, env)
        missing = wanted - set(env)
        if missing:
            raise GraphError(f"{self.graph_id}: outputs never produced: {sorted(missing)}")
        return {name: env[name] for name in names}

    def _execute(self, node, env) -> None:
        op = node.op_type
        ins = [env[name] if name else None for name in node.inputs]
        if op == "Conv":
            out = _conv(node, ins[0], ins[1], ins[2] if len(ins) > 2 else None)
        elif op == "Relu":
            out = np.maximum(ins[0], 0.0)
        elif op == "Add":
            out = ins[0] + ins[1]
        elif op == "Sub":
            out = ins[0] - ins[1]
        elif op == "Mul":
            out = ins[0] * ins[1]
        elif op == "Div":
            out = ins[0] / ins[1]
        elif op == "MaxPool":
            kernel = _attr(node, "kernel_shape", [1, 1])
            strides = _attr(node, "strides", kernel)
            pads = _attr(node, "pads", [0, 0, 0, 0])
            win = _pool_windows(ins[0], kernel, strides, pads, -np.inf)
            out = win.max(axis=(4, 5))
        elif op == "AveragePool":
            kernel = _attr(node, "kernel_shape", [1, 1])
            strides = _attr(node, "strides", kernel)
            pads = _attr(node, "pads", [0, 0, 0, 0])
            win = _pool_windows(ins[0], kernel, strides, pads, 0.0)
            out = win.mean(axis=(4, 5))
        elif op == "GlobalAveragePool":
            out = ins[0].mean(axis=(2, 3), keepdims=True)
        elif op == "Flatten":
            axis = _attr(node, "axis", 1)
            out = ins[0].reshape(int(np.prod(ins[0].shape[:axis])), -1)
        elif op == "Reshape":
            shape = [int(v) for v in ins[1]]
            shape = [ins[0].shape[i] if v == 0 else v for i, v in enumerate(shape)]
            out = ins[0].reshape(shape)
        elif op == "Gemm":
            out = _gemm(node, ins[0], ins[1], ins[2] if len(ins) > 2 else None)
        elif op == "MatMul":
            out = (ins[0] @ ins[1]).astype(np.float32)
        elif op == "Concat":
            out = np.concatenate(ins, axis=_attr(node, "axis", 0))
        elif op == "Softmax":
            axis = _attr(node, "axis", -1)
            z = ins[0] - ins[0].max(axis=axis, keepdims=True)
            e = np.exp(z)
            out = e / e.sum(axis=axis, keepdims=True)
        elif op == "BatchNormalization":
            xin, scale, bias, mean, var = ins[:5]
            eps = float(_attr(node, "epsilon", 1e-5))
            shape = (1, -1, 1, 1)
            out = (xin - mean.reshape(shape)) / np.sqrt(var.reshape(shape) + eps)
            out = out * scale.reshape(shape) + bias.reshape(shape)
        elif op == "Identity":
            out = ins[0]
        elif op == "Constant":
            out = node.attrs["value"]
        else:
            raise GraphError(f"unsupported op {op!r}")
        out = np.asarray(out, dtype=np.float32)
        for name in node.outputs:
            env[name] = out
