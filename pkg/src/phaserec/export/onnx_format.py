"""Reader/writer for the portable-graph (ONNX) message subset we emit.

Field numbers follow the upstream onnx.proto3 schema. Only the pieces a
static inference graph needs are modeled: float32/int64 tensors with raw
payloads, scalar/ints attributes, nodes, graph I/O with static shapes, and
model-level metadata_props.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import proto

FLOAT32 = 1
INT64 = 7

_NP_TO_ONNX = {np.dtype("float32"): FLOAT32, np.dtype("int64"): INT64}
_ONNX_TO_NP = {FLOAT32: np.dtype("<f4"), INT64: np.dtype("<i8")}

# AttributeProto.AttributeType
ATTR_FLOAT, ATTR_INT, ATTR_STRING, ATTR_TENSOR = 1, 2, 3, 4
ATTR_FLOATS, ATTR_INTS, ATTR_STRINGS = 6, 7, 8


@dataclass
class Tensor:
    name: str
    array: np.ndarray

    def encode(self) -> bytes:
        shape = np.asarray(self.array).shape
        arr = np.ascontiguousarray(self.array)  # note: promotes 0-d to (1,)
        if arr.dtype not in _NP_TO_ONNX:
            raise ValueError(f"tensor {self.name}: unsupported dtype {arr.dtype}")
        out = b"".join(proto.emit_varint_field(1, int(d)) for d in shape)
        out += proto.emit_varint_field(2, _NP_TO_ONNX[arr.dtype])
        out += proto.emit_string_field(8, self.name)
        out += proto.emit_bytes_field(9, arr.astype(arr.dtype.newbyteorder("<")).tobytes())
        return out

    @classmethod
    def decode(cls, data: bytes) -> "Tensor":
        f = proto.parse_fields(data)
        dims = [proto.to_signed64(d) for d in proto.get_packed_varints(f, 1)]
        dtype_code = proto.get_scalar(f, 2, FLOAT32)
        name = proto.get_string(f, 8)
        if dtype_code not in _ONNX_TO_NP:
            raise ValueError(f"tensor {name}: unsupported data_type {dtype_code}")
        np_dtype = _ONNX_TO_NP[dtype_code]
        raw = proto.get_scalar(f, 9)
        if raw is not None:
            arr = np.frombuffer(raw, dtype=np_dtype).reshape(dims).copy()
        elif dtype_code == FLOAT32 and 4 in f:
            import struct
            floats = [struct.unpack("<f", v)[0] for _, v in f[4]]
            arr = np.array(floats, dtype=np.float32).reshape(dims)
        elif dtype_code == INT64 and 7 in f:
            arr = np.array([proto.to_signed64(v) for v in proto.get_packed_varints(f, 7)],
                           dtype=np.int64).reshape(dims)
        else:
            arr = np.zeros(dims, dtype=np_dtype)
        return cls(name=name, array=arr)


@dataclass
class Attribute:
    name: str
    value: object     # float | int | bytes | list[int] | list[float] | Tensor

    def encode(self) -> bytes:
        out = proto.emit_string_field(1, self.name)
        v = self.value
        if isinstance(v, bool):
            raise ValueError("ambiguous bool attribute")
        if isinstance(v, float):
            out += proto.emit_float_field(2, v) + proto.emit_varint_field(20, ATTR_FLOAT)
        elif isinstance(v, int):
            out += proto.emit_varint_field(3, v) + proto.emit_varint_field(20, ATTR_INT)
        elif isinstance(v, bytes):
            out += proto.emit_bytes_field(4, v) + proto.emit_varint_field(20, ATTR_STRING)
        elif isinstance(v, Tensor):
            out += proto.emit_bytes_field(5, v.encode()) + proto.emit_varint_field(20, ATTR_TENSOR)
        elif isinstance(v, (list, tuple)) and all(isinstance(x, int) for x in v):
            out += b"".join(proto.emit_varint_field(8, x) for x in v)
            out += proto.emit_varint_field(20, ATTR_INTS)
        elif isinstance(v, (list, tuple)) and all(isinstance(x, float) for x in v):
            import struct
            out += b"".join(proto.tag(7, proto.FIXED32) + struct.pack("<f", x) for x in v)
            out += proto.emit_varint_field(20, ATTR_FLOATS)
        else:
            raise ValueError(f"attribute {self.name}: unsupported value {v!r}")
        return out

    @classmethod
    def decode(cls, data: bytes) -> "Attribute":
        import struct
        f = proto.parse_fields(data)
        name = proto.get_string(f, 1)
        attr_type = proto.get_scalar(f, 20, 0)
        if attr_type == ATTR_FLOAT:
            return cls(name, struct.unpack("<f", proto.get_scalar(f, 2))[0])
        if attr_type == ATTR_INT:
            return cls(name, proto.to_signed64(proto.get_scalar(f, 3)))
        if attr_type == ATTR_STRING:
            return cls(name, proto.get_scalar(f, 4))
        if attr_type == ATTR_TENSOR:
            return cls(name, Tensor.decode(proto.get_scalar(f, 5)))
        if attr_type == ATTR_INTS:
            return cls(name, [proto.to_signed64(v) for v in proto.get_packed_varints(f, 8)])
        if attr_type == ATTR_FLOATS:
            vals = []
            for wt, v in f.get(7, []):
                if wt == proto.FIXED32:
                    vals.append(struct.unpack("<f", v)[0])
                else:
                    vals.extend(x[0] for x in struct.iter_unpack("<f", v))
            return cls(name, vals)
        # Fall back on whichever payload field is present.
        if 3 in f:
            return cls(name, proto.to_signed64(proto.get_scalar(f, 3)))
        if 8 in f:
            return cls(name, [proto.to_signed64(v) for v in proto.get_packed_varints(f, 8)])
        raise ValueError(f"attribute {name}: unsupported type {attr_type}")


@dataclass
class Node:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    name: str = ""
    attributes: dict[str, object] = field(default_factory=dict)

    def encode(self) -> bytes:
        out = b"".join(proto.emit_string_field(1, i) for i in self.inputs)
        out += b"".join(proto.emit_string_field(2, o) for o in self.outputs)
        out += proto.emit_string_field(3, self.name or self.outputs[0])
        out += proto.emit_string_field(4, self.op_type)
        for key, value in self.attributes.items():
            out += proto.emit_bytes_field(5, Attribute(key, value).encode())
        return out

    @classmethod
    def decode(cls, data: bytes) -> "Node":
        f = proto.parse_fields(data)
        attrs = {}
        for raw in proto.get_repeated(f, 5):
            a = Attribute.decode(raw)
            attrs[a.name] = a.value
        return cls(
            op_type=proto.get_string(f, 4),
            inputs=[b.decode("utf-8") for b in proto.get_repeated(f, 1)],
            outputs=[b.decode("utf-8") for b in proto.get_repeated(f, 2)],
            name=proto.get_string(f, 3),
            attributes=attrs,
        )


@dataclass
class ValueInfo:
    name: str
    elem_type: int
    shape: list[int]

    def encode(self) -> bytes:
        dims = b"".join(proto.emit_bytes_field(1, proto.emit_varint_field(1, d))
                        for d in self.shape)
        tensor_type = proto.emit_varint_field(1, self.elem_type) + \
            proto.emit_bytes_field(2, dims)
        type_proto = proto.emit_bytes_field(1, tensor_type)
        return proto.emit_string_field(1, self.name) + proto.emit_bytes_field(2, type_proto)

    @classmethod
    def decode(cls, data: bytes) -> "ValueInfo":
        f = proto.parse_fields(data)
        name = proto.get_string(f, 1)
        elem_type, shape = FLOAT32, []
        type_raw = proto.get_scalar(f, 2)
        if type_raw:
            tf = proto.parse_fields(type_raw)
            tensor_raw = proto.get_scalar(tf, 1)
            if tensor_raw:
                ttf = proto.parse_fields(tensor_raw)
                elem_type = proto.get_scalar(ttf, 1, FLOAT32)
                shape_raw = proto.get_scalar(ttf, 2)
                if shape_raw:
                    for dim_raw in proto.get_repeated(proto.parse_fields(shape_raw), 1):
                        df = proto.parse_fields(dim_raw)
                        shape.append(proto.to_signed64(proto.get_scalar(df, 1, -1)))
        return cls(name=name, elem_type=elem_type, shape=shape)


@dataclass
class Graph:
    name: str
    nodes: list[Node]
    inputs: list[ValueInfo]
    outputs: list[ValueInfo]
    initializers: list[Tensor]

    def encode(self) -> bytes:
        out = b"".join(proto.emit_bytes_field(1, n.encode()) for n in self.nodes)
        out += proto.emit_string_field(2, self.name)
        out += b"".join(proto.emit_bytes_field(5, t.encode()) for t in self.initializers)
        out += b"".join(proto.emit_bytes_field(11, v.encode()) for v in self.inputs)
        out += b"".join(proto.emit_bytes_field(12, v.encode()) for v in self.outputs)
        return out

    @classmethod
    def decode(cls, data: bytes) -> "Graph":
        f = proto.parse_fields(data)
        return cls(
            name=proto.get_string(f, 2),
            nodes=[Node.decode(raw) for raw in proto.get_repeated(f, 1)],
            inputs=[ValueInfo.decode(raw) for raw in proto.get_repeated(f, 11)],
            outputs=[ValueInfo.decode(raw) for raw in proto.get_repeated(f, 12)],
            initializers=[Tensor.decode(raw) for raw in proto.get_repeated(f, 5)],
        )


@dataclass
class Model:
    graph: Graph
    opset: int
    ir_version: int = 7
    producer_name: str = "phaserec"
    producer_version: str = "0.1.0"
    metadata: dict[str, str] = field(default_factory=dict)

    def encode(self) -> bytes:
        out = proto.emit_varint_field(1, self.ir_version)
        out += proto.emit_string_field(2, self.producer_name)
        out += proto.emit_string_field(3, self.producer_version)
        out += proto.emit_bytes_field(7, self.graph.encode())
        opset = proto.emit_string_field(1, "") + proto.emit_varint_field(2, self.opset)
        out += proto.emit_bytes_field(8, opset)
        for key, value in self.metadata.items():
            entry = proto.emit_string_field(1, key) + proto.emit_string_field(2, value)
            out += proto.emit_bytes_field(14, entry)
        return out

    @classmethod
    def decode(cls, data: bytes) -> "Model":
        f = proto.parse_fields(data)
        opset = 0
        for raw in proto.get_repeated(f, 8):
            of = proto.parse_fields(raw)
            if proto.get_string(of, 1) == "":
                opset = proto.get_scalar(of, 2, 0)
        metadata = {}
        for raw in proto.get_repeated(f, 14):
            mf = proto.parse_fields(raw)
            metadata[proto.get_string(mf, 1)] = proto.get_string(mf, 2)
        return cls(
            graph=Graph.decode(proto.get_scalar(f, 7, b"")),
            opset=opset,
            ir_version=proto.get_scalar(f, 1, 0),
            producer_name=proto.get_string(f, 2),
            producer_version=proto.get_string(f, 3),
            metadata=metadata,
        )
