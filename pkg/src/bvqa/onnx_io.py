"""Minimal ONNX (protobuf) reader and writer.

Implements just enough of the protobuf wire format and the ONNX schema to
load and emit the inference graphs this package consumes: ModelProto,
GraphProto, NodeProto, AttributeProto, TensorProto, ValueInfoProto.
Only float32 tensors and the attribute types used by plain CNN graphs are
supported. No external ONNX tooling is required.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np


class OnnxFormatError(ValueError):
    """Raised for files this reader cannot interpret."""


# ---------------------------------------------------------------------------
# protobuf wire primitives

def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise OnnxFormatError("truncated varint")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7


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


def _iter_fields(buf: bytes):
    """Yield (field_number, wire_type, value) for a serialized message."""
    pos = 0
    while pos < len(buf):
        key, pos = _read_varint(buf, pos)
        fnum, wtype = key >> 3, key & 7
        if wtype == 0:
            val, pos = _read_varint(buf, pos)
        elif wtype == 1:
            val = buf[pos:pos + 8]
            pos += 8
        elif wtype == 2:
            ln, pos = _read_varint(buf, pos)
            val = buf[pos:pos + ln]
            pos += ln
        elif wtype == 5:
            val = buf[pos:pos + 4]
            pos += 4
        else:
            raise OnnxFormatError(f"unsupported wire type {wtype}")
        yield fnum, wtype, val


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


def _signed(v: int) -> int:
    return v - (1 << 64) if v >= 1 << 63 else v


# ---------------------------------------------------------------------------
# schema subset

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
    producer: str = "bvqa"


def _parse_tensor(buf: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    dtype = TENSOR_FLOAT
    name = ""
    raw = b""
    floats: list[float] = []
    ints: list[int] = []
    for fnum, wtype, val in _iter_fields(buf):
        if fnum == 1:
            if wtype == 0:
                dims.append(_signed(val))
            else:  # packed
                pos = 0
                while pos < len(val):
                    v, pos = _read_varint(val, pos)
                    dims.append(_signed(v))
        elif fnum == 2:
            dtype = val
        elif fnum == 4:
            if wtype == 5:
                floats.append(struct.unpack("<f", val)[0])
            else:
                floats.extend(struct.unpack(f"<{len(val) // 4}f", val))
        elif fnum == 7:
            if wtype == 0:
                ints.append(_signed(val))
            else:
                pos = 0
                while pos < len(val):
                    v, pos = _read_varint(val, pos)
                    ints.append(_signed(v))
        elif fnum == 8:
            name = val.decode("utf-8")
        elif fnum == 9:
            raw = val
    if dtype == TENSOR_FLOAT:
        if raw:
            arr = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        else:
            arr = np.asarray(floats, dtype=np.float32)
    elif dtype == TENSOR_INT64:
        if raw:
            arr = np.frombuffer(raw, dtype="<i8").astype(np.int64)
        else:
            arr = np.asarray(ints, dtype=np.int64)
    else:
        raise OnnxFormatError(f"unsupported tensor data_type {dtype}")
    return name, arr.reshape(dims) if dims else arr


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


def _parse_attribute(buf: bytes) -> tuple[str, object]:
    name = ""
    atype = None
    f_val = None
    i_val = None
    s_val = None
    t_val = None
    floats: list[float] = []
    ints: list[int] = []
    for fnum, wtype, val in _iter_fields(buf):
        if fnum == 1:
            name = val.decode("utf-8")
        elif fnum == 2:
            f_val = struct.unpack("<f", val)[0]
        elif fnum == 3:
            i_val = _signed(val)
        elif fnum == 4:
            s_val = val.decode("utf-8")
        elif fnum == 5:
            t_val = _parse_tensor(val)[1]
        elif fnum == 7:
            if wtype == 5:
                floats.append(struct.unpack("<f", val)[0])
            else:
                floats.extend(struct.unpack(f"<{len(val) // 4}f", val))
        elif fnum == 8:
            if wtype == 0:
                ints.append(_signed(val))
            else:
                pos = 0
                while pos < len(val):
                    v, pos = _read_varint(val, pos)
                    ints.append(_signed(v))
        elif fnum == 20:
            atype = val
    if atype == ATTR_FLOAT:
        return name, f_val
    if atype == ATTR_INT:
        return name, i_val
    if atype == ATTR_STRING:
        return name, s_val
    if atype == ATTR_TENSOR:
        return name, t_val
    if atype == ATTR_FLOATS:
        return name, list(floats)
    if atype == ATTR_INTS:
        return name, list(ints)
    # tolerate writers that omit the type tag
    for candidate in (i_val, f_val, s_val, t_val):
        if candidate is not None:
            return name, candidate
    if ints:
        return name, list(ints)
    return name, list(floats)


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


def _parse_node(buf: bytes) -> OnnxNode:
    node = OnnxNode(op_type="", inputs=[], outputs=[])
    for fnum, _wtype, val in _iter_fields(buf):
        if fnum == 1:
            node.inputs.append(val.decode("utf-8"))
        elif fnum == 2:
            node.outputs.append(val.decode("utf-8"))
        elif fnum == 3:
            node.name = val.decode("utf-8")
        elif fnum == 4:
            node.op_type = val.decode("utf-8")
        elif fnum == 5:
            k, v = _parse_attribute(val)
            node.attrs[k] = v
    return node


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


def _parse_value_info(buf: bytes) -> tuple[str, list[int]]:
    name = ""
    shape: list[int] = []
    for fnum, _wtype, val in _iter_fields(buf):
        if fnum == 1:
            name = val.decode("utf-8")
        elif fnum == 2:  # TypeProto
            for f2, _w2, v2 in _iter_fields(val):
                if f2 == 1:  # tensor_type
                    for f3, _w3, v3 in _iter_fields(v2):
                        if f3 == 2:  # shape
                            for f4, _w4, v4 in _iter_fields(v3):
                                if f4 == 1:  # dim
                                    dim_value = 0
                                    for f5, _w5, v5 in _iter_fields(v4):
                                        if f5 == 1:
                                            dim_value = _signed(v5)
                                    shape.append(dim_value)
    return name, shape


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


def load_model(path) -> OnnxModel:
    with open(path, "rb") as fh:
        buf = fh.read()
    graph_buf = None
    for fnum, _wtype, val in _iter_fields(buf):
        if fnum == 7:
            graph_buf = val
    if graph_buf is None:
        raise OnnxFormatError(f"{path}: no graph found (not an ONNX model?)")
    model = OnnxModel(graph_name="", nodes=[], initializers={}, inputs={}, outputs={})
    for fnum, _wtype, val in _iter_fields(graph_buf):
        if fnum == 1:
            model.nodes.append(_parse_node(val))
        elif fnum == 2:
            model.graph_name = val.decode("utf-8")
        elif fnum == 5:
            name, arr = _parse_tensor(val)
            model.initializers[name] = arr
        elif fnum == 11:
            name, shape = _parse_value_info(val)
            if name not in model.initializers:
                model.inputs[name] = shape
        elif fnum == 12:
            name, shape = _parse_value_info(val)
            model.outputs[name] = shape
    # some writers list initializers among graph inputs
    for name in list(model.inputs):
        if name in model.initializers:
            del model.inputs[name]
    return model


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
