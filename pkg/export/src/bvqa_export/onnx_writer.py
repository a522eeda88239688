"""Minimal ONNX protobuf writer.

Standalone on purpose: the export component talks to the quality toolkit
only through the ONNX files and sidecars it emits, so it carries its own
copy of the wire-format writer rather than importing the consumer's.
Only float32 tensors and the attribute types needed for plain CNN graphs
are implemented.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

TENSOR_FLOAT = 1
TENSOR_INT64 = 7

ATTR_FLOAT = 1
ATTR_INT = 2
ATTR_STRING = 3
ATTR_TENSOR = 4
ATTR_FLOATS = 6
ATTR_INTS = 7


@dataclass
class OnnxNode:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    attrs: dict[str, object] = field(default_factory=dict)
    name: str = ""


@dataclass
class OnnxModel:
    graph_name: str
    nodes: list[OnnxNode]
    initializers: dict[str, np.ndarray]
    inputs: dict[str, list[int]]  # name -> shape, 0 marks a dynamic dim
    outputs: dict[str, list[int]]
    opset: int = 13
    producer: str = "bvqa-model-export"


def _write_varint(out: bytearray, value: int) -> None:
    if value < 0:
        value += 1 << 64
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def _emit(out: bytearray, fnum: int, wtype: int, payload) -> None:
    _write_varint(out, (fnum << 3) | wtype)
    if wtype == 0:
        _write_varint(out, payload)
    elif wtype == 2:
        _write_varint(out, len(payload))
        out.extend(payload)
    elif wtype == 5:
        out.extend(payload)
    else:
        raise ValueError(f"unsupported wire type {wtype}")


def _serialize_tensor(name: str, arr: np.ndarray) -> bytes:
    out = bytearray()
    for d in arr.shape:
        _emit(out, 1, 0, d)
    if arr.dtype == np.int64:
        _emit(out, 2, 0, TENSOR_INT64)
        raw = np.ascontiguousarray(arr, dtype="<i8").tobytes()
    else:
        _emit(out, 2, 0, TENSOR_FLOAT)
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    _emit(out, 8, 2, name.encode("utf-8"))
    _emit(out, 9, 2, raw)
    return bytes(out)


def _serialize_attribute(name: str, value) -> bytes:
    out = bytearray()
    _emit(out, 1, 2, name.encode("utf-8"))
    if isinstance(value, float):
        _emit(out, 2, 5, struct.pack("<f", value))
        _emit(out, 20, 0, ATTR_FLOAT)
    elif isinstance(value, (bool, int, np.integer)):
        _emit(out, 3, 0, int(value))
        _emit(out, 20, 0, ATTR_INT)
    elif isinstance(value, str):
        _emit(out, 4, 2, value.encode("utf-8"))
        _emit(out, 20, 0, ATTR_STRING)
    elif isinstance(value, np.ndarray):
        _emit(out, 5, 2, _serialize_tensor("", value))
        _emit(out, 20, 0, ATTR_TENSOR)
    elif isinstance(value, (list, tuple)) and value and isinstance(value[0], float):
        packed = bytearray()
        for v in value:
            packed.extend(struct.pack("<f", v))
        _emit(out, 7, 2, bytes(packed))
        _emit(out, 20, 0, ATTR_FLOATS)
    elif isinstance(value, (list, tuple)):
        packed = bytearray()
        for v in value:
            _write_varint(packed, int(v))
        _emit(out, 8, 2, bytes(packed))
        _emit(out, 20, 0, ATTR_INTS)
    else:
        raise ValueError(f"unsupported attribute value for {name!r}: {value!r}")
    return bytes(out)


def _serialize_node(node: OnnxNode) -> bytes:
    out = bytearray()
    for name in node.inputs:
        _emit(out, 1, 2, name.encode("utf-8"))
    for name in node.outputs:
        _emit(out, 2, 2, name.encode("utf-8"))
    if node.name:
        _emit(out, 3, 2, node.name.encode("utf-8"))
    _emit(out, 4, 2, node.op_type.encode("utf-8"))
    for k in node.attrs:
        _emit(out, 5, 2, _serialize_attribute(k, node.attrs[k]))
    return bytes(out)


def _serialize_value_info(name: str, shape: list[int]) -> bytes:
    dims = bytearray()
    for d in shape:
        dim = bytearray()
        if d > 0:
            _emit(dim, 1, 0, d)
        else:
            _emit(dim, 2, 2, b"N")
        _emit(dims, 1, 2, bytes(dim))
    tensor_type = bytearray()
    _emit(tensor_type, 1, 0, TENSOR_FLOAT)
    _emit(tensor_type, 2, 2, bytes(dims))
    type_proto = bytearray()
    _emit(type_proto, 1, 2, bytes(tensor_type))
    out = bytearray()
    _emit(out, 1, 2, name.encode("utf-8"))
    _emit(out, 2, 2, bytes(type_proto))
    return bytes(out)


def save_model(model: OnnxModel, path) -> None:
    graph = bytearray()
    for node in model.nodes:
        _emit(graph, 1, 2, _serialize_node(node))
    _emit(graph, 2, 2, model.graph_name.encode("utf-8"))
    for name, arr in model.initializers.items():
        _emit(graph, 5, 2, _serialize_tensor(name, arr))
    for name, shape in model.inputs.items():
        _emit(graph, 11, 2, _serialize_value_info(name, shape))
    for name, shape in model.outputs.items():
        _emit(graph, 12, 2, _serialize_value_info(name, shape))

    opset = bytearray()
    _emit(opset, 1, 2, b"")  # default domain
    _emit(opset, 2, 0, model.opset)

    out = bytearray()
    _emit(out, 1, 0, 8)  # ir_version
    _emit(out, 2, 2, model.producer.encode("utf-8"))
    _emit(out, 7, 2, bytes(graph))
    _emit(out, 8, 2, bytes(opset))
    with open(path, "wb") as fh:
        fh.write(out)
