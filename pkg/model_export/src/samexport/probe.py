"""Dependency-free shape probe for ONNX graph files.

Reads just enough of the protobuf wire format to report the graph's
input/output tensor names, dtypes, and shapes plus the default-domain
opset version, so export conformance can be checked without the onnx
package installed.
"""

from __future__ import annotations

from .errors import ExportError

# protobuf field numbers (onnx.proto3)
_MODEL_GRAPH = 7
_MODEL_OPSET_IMPORT = 8
_OPSET_DOMAIN = 1
_OPSET_VERSION = 2
_GRAPH_INPUT = 11
_GRAPH_OUTPUT = 12
_VALUEINFO_NAME = 1
_VALUEINFO_TYPE = 2
_TYPE_TENSOR = 1
_TENSOR_ELEM_TYPE = 1
_TENSOR_SHAPE = 2
_SHAPE_DIM = 1
_DIM_VALUE = 1
_DIM_PARAM = 2

_ELEM_TYPES = {
    1: "float32",
    2: "uint8",
    3: "int8",
    6: "int32",
    7: "int64",
    9: "bool",
    10: "float16",
    11: "float64",
}


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise ExportError("truncated varint in graph file")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise ExportError("malformed varint in graph file")


def _fields(data: bytes):
    """Yield (field_number, wire_type, value) for one protobuf message."""
    pos = 0
    while pos < len(data):
        tag, pos = _read_varint(data, pos)
        field, wire = tag >> 3, tag & 0x7
        if wire == 0:  # varint
            value, pos = _read_varint(data, pos)
        elif wire == 1:  # fixed 64
            value, pos = data[pos : pos + 8], pos + 8
        elif wire == 2:  # length-delimited
            length, pos = _read_varint(data, pos)
            value, pos = data[pos : pos + length], pos + length
        elif wire == 5:  # fixed 32
            value, pos = data[pos : pos + 4], pos + 4
        else:
            raise ExportError(f"unsupported protobuf wire type {wire}")
        yield field, wire, value


def _parse_dimension(data: bytes):
    for field, wire, value in _fields(data):
        if field == _DIM_VALUE and wire == 0:
            return int(value)
        if field == _DIM_PARAM and wire == 2:
            return value.decode("utf-8")
    return None  # dimension present but unconstrained


def _parse_value_info(data: bytes) -> dict:
    info = {"name": None, "dtype": None, "shape": []}
    for field, wire, value in _fields(data):
        if field == _VALUEINFO_NAME and wire == 2:
            info["name"] = value.decode("utf-8")
        elif field == _VALUEINFO_TYPE and wire == 2:
            for tfield, twire, tvalue in _fields(value):
                if tfield == _TYPE_TENSOR and twire == 2:
                    for efield, ewire, evalue in _fields(tvalue):
                        if efield == _TENSOR_ELEM_TYPE and ewire == 0:
                            info["dtype"] = _ELEM_TYPES.get(int(evalue), f"elem_{evalue}")
                        elif efield == _TENSOR_SHAPE and ewire == 2:
                            for sfield, swire, svalue in _fields(evalue):
                                if sfield == _SHAPE_DIM and swire == 2:
                                    info["shape"].append(_parse_dimension(svalue))
    return info


def probe_model(path: str) -> dict:
    """Graph IO summary: {"inputs": [...], "outputs": [...], "opset": int}."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ExportError(f"cannot read graph file {path}: {exc}") from exc
    inputs: list[dict] = []
    outputs: list[dict] = []
    opset = None
    for field, wire, value in _fields(data):
        if field == _MODEL_GRAPH and wire == 2:
            for gfield, gwire, gvalue in _fields(value):
                if gwire != 2:
                    continue
                if gfield == _GRAPH_INPUT:
                    inputs.append(_parse_value_info(gvalue))
                elif gfield == _GRAPH_OUTPUT:
                    outputs.append(_parse_value_info(gvalue))
        elif field == _MODEL_OPSET_IMPORT and wire == 2:
            domain = b""
            version = None
            for ofield, owire, ovalue in _fields(value):
                if ofield == _OPSET_DOMAIN and owire == 2:
                    domain = ovalue
                elif ofield == _OPSET_VERSION and owire == 0:
                    version = int(ovalue)
            if domain in (b"", b"ai.onnx"):
                opset = version
    if not inputs and not outputs:
        raise ExportError(f"{path} does not look like a graph file (no IO found)")
    return {"inputs": inputs, "outputs": outputs, "opset": opset}
