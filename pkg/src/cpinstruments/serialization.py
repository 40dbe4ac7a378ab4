"""Instrument, certificate and report files.

Files are JSON with a fixed field order.  Complex scalars are ``[re, im]``
pairs, matrices are row-major nested lists, and floats are written with 17
significant digits so a file round-trips to the same bits.  The standard
``json`` module cannot fix the float format, so output goes through a small
emitter here; parsing uses ``json.loads``.

Instrument file::

    {"version": 1,
     "algebra": {"blocks": [d_1, ..., d_S]},
     "output_dim": k,
     "outcomes": n,
     "maps": [{"outcome": i, "form": "choi", "choi": [C_1, ..., C_S]},
              {"outcome": j, "form": "kraus", "kraus": [[K, ...], ..., [K, ...]]}]}

Outcomes missing from ``maps`` are zero maps.
"""
from __future__ import annotations

import json
import math
from typing import Any, List

import numpy as np

from .algebra import AlgebraSpec
from .certificates import KINDS, Certificate
from .cpmap import CPMap, cpmap_from_kraus, zero_map
from .errors import ParseError, ShapeError
from .instrument import Instrument

FORMAT_VERSION = 1


# --------------------------------------------------------------------------
# emitter
# --------------------------------------------------------------------------

def _scalar(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"cannot serialize non-finite float {x!r}")
        text = format(x, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _is_flat(x) -> bool:
    return isinstance(x, list) and all(not isinstance(v, (list, dict)) for v in x)


def _emit(x, indent: int, out: List[str]):
    pad = "  " * indent
    if isinstance(x, dict):
        if not x:
            out.append("{}")
            return
        out.append("{\n")
        items = list(x.items())
        for j, (key, val) in enumerate(items):
            out.append(f"{pad}  {json.dumps(str(key))}: ")
            _emit(val, indent + 1, out)
            out.append(",\n" if j < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(x, list):
        if _is_flat(x) or all(_is_flat(v) for v in x):
            # scalars, [re, im] pairs and short index lists stay on one line
            out.append(json.dumps(x) if not x else
                       "[" + ", ".join(_inline(v) for v in x) + "]")
            return
        out.append("[\n")
        for j, val in enumerate(x):
            out.append(pad + "  ")
            _emit(val, indent + 1, out)
            out.append(",\n" if j < len(x) - 1 else "\n")
        out.append(pad + "]")
    else:
        out.append(_scalar(x))


def _inline(v) -> str:
    if isinstance(v, list):
        return "[" + ", ".join(_scalar(y) for y in v) + "]"
    return _scalar(v)


def dumps(obj) -> str:
    """Canonical text of a JSON-like object (dicts keep insertion order)."""
    out: List[str] = []
    _emit(obj, 0, out)
    return "".join(out) + "\n"


# --------------------------------------------------------------------------
# complex arrays
# --------------------------------------------------------------------------

def encode_array(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [encode_array(x) for x in a]


def _complex(x, path: str) -> complex:
    if (not isinstance(x, list) or len(x) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x)):
        raise ParseError("complex scalar must be a pair [re, im] of numbers", path)
    return complex(float(x[0]), float(x[1]))


def decode_matrix(x, path: str, shape=None) -> np.ndarray:
    if not isinstance(x, list):
        raise ParseError("matrix must be a list of rows", path)
    rows = []
    for r, row in enumerate(x):
        if not isinstance(row, list):
            raise ParseError("matrix row must be a list", f"{path}[{r}]")
        rows.append([_complex(v, f"{path}[{r}][{c}]") for c, v in enumerate(row)])
    if rows and any(len(row) != len(rows[0]) for row in rows):
        raise ShapeError("ragged matrix", path)
    m = np.array(rows, dtype=complex).reshape(len(rows), len(rows[0]) if rows else 0)
    if shape is not None and m.shape != tuple(shape):
        raise ShapeError(f"expected shape {tuple(shape)}, got {m.shape}", path)
    return m


def decode_vector(x, path: str) -> np.ndarray:
    if not isinstance(x, list):
        raise ParseError("vector must be a list", path)
    return np.array([_complex(v, f"{path}[{j}]") for j, v in enumerate(x)], dtype=complex)


# --------------------------------------------------------------------------
# instruments
# --------------------------------------------------------------------------

def instrument_to_dict(ins: Instrument) -> dict:
    return {
        "version": FORMAT_VERSION,
        "algebra": {"blocks": list(ins.spec.block_dims)},
        "output_dim": ins.out_dim,
        "outcomes": ins.n,
        "maps": [{"outcome": i, "form": "choi",
                  "choi": [encode_array(c) for c in m.choi_blocks]}
                 for i, m in zip(ins.outcomes, ins.maps)],
    }


def serialize_instrument(ins: Instrument) -> str:
    return dumps(instrument_to_dict(ins))


def _loads(text) -> Any:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None


def _field(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", path)
    if key not in obj:
        raise ParseError(f"missing field {key!r}", path)
    return obj[key]


def _count(x, path: str, minimum: int = 0) -> int:
    if not isinstance(x, int) or isinstance(x, bool) or x < minimum:
        raise ParseError(f"expected an integer >= {minimum}", path)
    return x


def instrument_from_dict(doc, path: str = "") -> Instrument:
    pre = f"{path}." if path else ""
    version = _field(doc, "version", path)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported version {version!r}", f"{pre}version")
    blocks = _field(_field(doc, "algebra", path), "blocks", f"{pre}algebra")
    if not isinstance(blocks, list) or not blocks:
        raise ParseError("blocks must be a nonempty list", f"{pre}algebra.blocks")
    dims = [_count(b, f"{pre}algebra.blocks[{j}]", 1) for j, b in enumerate(blocks)]
    spec = AlgebraSpec(dims)
    k = _count(_field(doc, "output_dim", path), f"{pre}output_dim")
    n = _count(_field(doc, "outcomes", path), f"{pre}outcomes", 1)
    maps = [zero_map(spec, k) for _ in range(n)]
    entries = _field(doc, "maps", path)
    if not isinstance(entries, list):
        raise ParseError("maps must be a list", f"{pre}maps")
    seen = set()
    for j, e in enumerate(entries):
        here = f"{pre}maps[{j}]"
        i = _count(_field(e, "outcome", here), f"{here}.outcome", 1)
        if i > n:
            raise ShapeError(f"outcome {i} outside 1..{n}", f"{here}.outcome")
        if i in seen:
            raise ParseError(f"outcome {i} given twice", f"{here}.outcome")
        seen.add(i)
        form = _field(e, "form", here)
        if form == "choi":
            mats = _field(e, "choi", here)
            if not isinstance(mats, list) or len(mats) != len(dims):
                raise ShapeError(f"need {len(dims)} Choi blocks", f"{here}.choi")
            choi = [decode_matrix(c, f"{here}.choi[{s}]", (d * k, d * k))
                    for s, (c, d) in enumerate(zip(mats, dims))]
            maps[i - 1] = CPMap(spec, k, choi)
        elif form == "kraus":
            lists = _field(e, "kraus", here)
            if not isinstance(lists, list) or len(lists) != len(dims):
                raise ShapeError(f"need {len(dims)} Kraus lists", f"{here}.kraus")
            kraus = []
            for s, (ops, d) in enumerate(zip(lists, dims)):
                if not isinstance(ops, list):
                    raise ParseError("Kraus list must be a list", f"{here}.kraus[{s}]")
                kraus.append([decode_matrix(op, f"{here}.kraus[{s}][{t}]", (d, k))
                              for t, op in enumerate(ops)])
            maps[i - 1] = cpmap_from_kraus(spec, k, kraus)
        else:
            raise ParseError(f"unknown form {form!r}", f"{here}.form")
    return Instrument(spec, k, maps)


def parse_instrument(text) -> Instrument:
    """Parse an instrument file.

    Shapes are validated here; complete positivity and normalization are left
    to the ``validate`` command.

    :raises ParseError: on malformed JSON or fields (with line or field path).
    :raises ShapeError: on dimension mismatches.
    """
    return instrument_from_dict(_loads(text))


# --------------------------------------------------------------------------
# certificates
# --------------------------------------------------------------------------

_MATRIX_KEYS = {"V", "D", "U", "isometry", "range_basis"}
_VECTOR_KEYS = {"eigenvector", "coefficients"}
_INSTRUMENT_KEYS = {"plus", "minus", "J"}
_MATRIX_LIST_KEYS = {"operators"}


def to_jsonable(x):
    """Arrays and instruments as plain JSON values; other values unchanged."""
    if isinstance(x, Instrument):
        return instrument_to_dict(x)
    if isinstance(x, np.ndarray):
        return encode_array(x)
    if isinstance(x, dict):
        return {k: to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _decode(key, x, path):
    if key in _MATRIX_KEYS:
        return decode_matrix(x, path)
    if key in _VECTOR_KEYS:
        return decode_vector(x, path)
    if key in _INSTRUMENT_KEYS:
        return instrument_from_dict(x, path)
    if key in _MATRIX_LIST_KEYS:
        if not isinstance(x, list):
            raise ParseError("expected a list of matrices", path)
        return [decode_matrix(m, f"{path}[{j}]") for j, m in enumerate(x)]
    if isinstance(x, dict):
        return {k: _decode(k, v, f"{path}.{k}") for k, v in x.items()}
    if isinstance(x, list):
        return [_decode(None, v, f"{path}[{j}]") for j, v in enumerate(x)]
    return x


def certificate_to_dict(cert: Certificate, library_version: str = "") -> dict:
    doc = {"version": FORMAT_VERSION, "kind": cert.kind}
    if library_version:
        doc["library_version"] = library_version
    doc["payload"] = to_jsonable(cert.payload)
    return doc


def serialize_certificate(cert: Certificate, library_version: str = "") -> str:
    return dumps(certificate_to_dict(cert, library_version))


def parse_certificate(text) -> Certificate:
    doc = _loads(text)
    version = _field(doc, "version", "")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported version {version!r}", "version")
    kind = _field(doc, "kind", "")
    if kind not in KINDS:
        raise ParseError(f"unknown certificate kind {kind!r}", "kind")
    payload = _field(doc, "payload", "")
    if not isinstance(payload, dict):
        raise ParseError("payload must be an object", "payload")
    return Certificate(kind, _decode(None, payload, "payload"))


def serialize_report(report: dict) -> str:
    return dumps(to_jsonable(report))
