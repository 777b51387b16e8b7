"""Protobuf wire-format primitives.

The portable-graph container is protobuf; the python ecosystem bindings for
it are not a dependency of this package, so the handful of wire-level
routines needed to read and write the message subset live here. Wire types:
0 = varint, 1 = fixed64, 2 = length-delimited, 5 = fixed32.
"""

from __future__ import annotations

import struct

VARINT = 0
FIXED64 = 1
LEN = 2
FIXED32 = 5

_U64_MASK = (1 << 64) - 1


def encode_varint(value: int) -> bytes:
    value &= _U64_MASK
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift >= 70:
            raise ValueError("varint too long")


def tag(field: int, wire_type: int) -> bytes:
    return encode_varint((field << 3) | wire_type)


def emit_varint_field(field: int, value: int) -> bytes:
    return tag(field, VARINT) + encode_varint(value)


def emit_bytes_field(field: int, payload: bytes) -> bytes:
    return tag(field, LEN) + encode_varint(len(payload)) + payload


def emit_string_field(field: int, text: str) -> bytes:
    return emit_bytes_field(field, text.encode("utf-8"))


def emit_float_field(field: int, value: float) -> bytes:
    return tag(field, FIXED32) + struct.pack("<f", value)


def emit_packed_varints(field: int, values) -> bytes:
    payload = b"".join(encode_varint(v) for v in values)
    return emit_bytes_field(field, payload)


def parse_fields(data: bytes) -> dict[int, list[tuple[int, int | bytes]]]:
    """Raw field map: field number → [(wire_type, value), ...] in order.

    Varints come back as ints; LEN as bytes; fixed32/64 as raw bytes.
    """
    fields: dict[int, list[tuple[int, int | bytes]]] = {}
    pos = 0
    n = len(data)
    while pos < n:
        key, pos = decode_varint(data, pos)
        field, wire_type = key >> 3, key & 0x7
        if wire_type == VARINT:
            value, pos = decode_varint(data, pos)
        elif wire_type == LEN:
            length, pos = decode_varint(data, pos)
            value = data[pos:pos + length]
            if len(value) != length:
                raise ValueError(f"truncated field {field}")
            pos += length
        elif wire_type == FIXED32:
            value = data[pos:pos + 4]
            pos += 4
        elif wire_type == FIXED64:
            value = data[pos:pos + 8]
            pos += 8
        else:
            raise ValueError(f"unsupported wire type {wire_type} for field {field}")
        fields.setdefault(field, []).append((wire_type, value))
    return fields


def get_scalar(fields, field: int, default=None):
    if field not in fields:
        return default
    return fields[field][-1][1]


def get_string(fields, field: int, default: str = "") -> str:
    raw = get_scalar(fields, field)
    return raw.decode("utf-8") if isinstance(raw, bytes) else default


def get_repeated(fields, field: int) -> list:
    return [v for _, v in fields.get(field, [])]


def get_packed_varints(fields, field: int) -> list[int]:
    """Repeated integers: accepts both packed and unpacked encodings."""
    values = []
    for wire_type, v in fields.get(field, []):
        if wire_type == VARINT:
            values.append(v)
        else:
            pos = 0
            while pos < len(v):
                x, pos = decode_varint(v, pos)
                values.append(x)
    return values


def to_signed64(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value
