"""JSON channel files and matrix encoding.

Complex matrices are nested lists in row-major order whose entries are
``[re, im]`` pairs (a bare number is read as a real entry). A channel file
looks like::

    {
      "name": "dephasing",
      "dims": {"q": 2, "m": 2, "e": 4},
      "markov": {
        "transition": [[0.9, 0.1], [0.1, 0.9]],
        "kraus": ["I", "Z"],
        "fixed_point_form": true,
        "initial_distribution": [0.5, 0.5]
      }
    }

Either ``unitary`` (one step unitary), ``unitaries`` (one per use) or
``markov`` must be present; ``markov`` takes precedence. ``initial_memory``
is a matrix, ``{"basis": k}`` or ``{"mixed": true}``; ``env_reset`` is
``{"basis": k}`` or a vector.
"""

from __future__ import annotations

import json
import math
from importlib import resources

import numpy as np

from . import linalg
from .channels import PAULI, ChannelSpec, MarkovChannelSpec, ValidationError, build_markov_channel

BUNDLED = ("identity", "shift", "dephasing_markov", "bitflip_markov", "pauli_markov")


class SpecParseError(ValueError):
    """A channel or state document could not be read; the message names the location."""


def encode_matrix(m) -> list:
    a = np.asarray(m.mat if hasattr(m, "mat") else m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def encode_vector(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex).ravel()]


def _number(x, where: str) -> complex:
    if isinstance(x, bool):
        raise SpecParseError(f"{where}: expected a number or [re, im] pair, got {x!r}")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in x):
        return complex(x[0], x[1])
    raise SpecParseError(f"{where}: expected a number or [re, im] pair, got {x!r}")


def decode_matrix(x, where: str) -> np.ndarray:
    if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
        raise SpecParseError(f"{where}: expected a nested list of rows")
    width = len(x[0])
    rows = []
    for i, row in enumerate(x):
        if len(row) != width:
            raise SpecParseError(f"{where}: row {i} has {len(row)} entries, expected {width}")
        rows.append([_number(z, f"{where}[{i}][{j}]") for j, z in enumerate(row)])
    a = np.array(rows, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise SpecParseError(f"{where}: non-finite entry")
    return a


def decode_vector(x, where: str) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise SpecParseError(f"{where}: expected a list of entries")
    return np.array([_number(z, f"{where}[{i}]") for i, z in enumerate(x)], dtype=complex)


def _real_matrix(x, where: str) -> np.ndarray:
    a = decode_matrix(x, where)
    if np.any(np.abs(a.imag) > 0):
        raise SpecParseError(f"{where}: entries must be real")
    return a.real


def _state(x, d: int, where: str) -> np.ndarray:
    if isinstance(x, dict):
        if "basis" in x:
            k = x["basis"]
            if not isinstance(k, int) or not 0 <= k < d:
                raise SpecParseError(f"{where}.basis: index {k!r} out of range for dimension {d}")
            return linalg.projector(k, d)
        if x.get("mixed"):
            return linalg.maximally_mixed(d)
        if "ket" in x:
            v = decode_vector(x["ket"], f"{where}.ket")
            if v.size != d:
                raise SpecParseError(f"{where}.ket: length {v.size}, expected {d}")
            v = v / np.linalg.norm(v)
            return np.outer(v, v.conj())
        raise SpecParseError(f"{where}: expected 'basis', 'mixed' or 'ket'")
    m = decode_matrix(x, where)
    if m.shape != (d, d):
        raise SpecParseError(f"{where}: shape {m.shape}, expected {(d, d)}")
    return m


def _kraus(x, where: str) -> np.ndarray:
    if isinstance(x, str):
        if x not in PAULI:
            raise SpecParseError(f"{where}: unknown operator name {x!r} (use I, X, Y or Z)")
        return PAULI[x]
    return decode_matrix(x, where)


def _dims(doc: dict) -> tuple[int, int, int] | None:
    if "dims" not in doc:
        return None
    d = doc["dims"]
    if not isinstance(d, dict):
        raise SpecParseError("dims: expected an object with q, m, e")
    out = []
    for key, default in (("q", None), ("m", 1), ("e", 1)):
        v = d.get(key, default)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise SpecParseError(f"dims.{key}: expected a positive integer, got {v!r}")
        out.append(v)
    return tuple(out)


def channel_from_dict(doc: dict) -> ChannelSpec:
    if not isinstance(doc, dict):
        raise SpecParseError("channel document must be a JSON object")
    name = doc.get("name", "")
    dims = _dims(doc)
    try:
        if "markov" in doc:
            spec = _markov_from_dict(doc["markov"], name)
            if dims is not None and dims != (spec.d_q, spec.d_m, spec.d_e):
                raise SpecParseError(
                    f"dims: {dims} disagree with the markov constructor's {(spec.d_q, spec.d_m, spec.d_e)}"
                )
            if "initial_memory" in doc:
                mem = _state(doc["initial_memory"], spec.d_m, "initial_memory")
                spec = ChannelSpec(spec.d_q, spec.d_m, spec.d_e, spec.unitaries, spec.env_reset, mem,
                                   name=spec.name, markov=spec.markov, fixed_point_form=spec.fixed_point_form)
            return spec
        if dims is None:
            raise SpecParseError("dims: required unless a markov constructor is given")
        dq, dm, de = dims
        if "unitaries" in doc:
            raw = doc["unitaries"]
            if not isinstance(raw, list) or not raw:
                raise SpecParseError("unitaries: expected a non-empty list of matrices")
            us = tuple(decode_matrix(u, f"unitaries[{i}]") for i, u in enumerate(raw))
        elif "unitary" in doc:
            us = (decode_matrix(doc["unitary"], "unitary"),)
        else:
            raise SpecParseError("one of 'unitary', 'unitaries' or 'markov' is required")
        mem = _state(doc.get("initial_memory", {"basis": 0}), dm, "initial_memory")
        env_doc = doc.get("env_reset", {"basis": 0})
        if isinstance(env_doc, dict):
            k = env_doc.get("basis")
            if not isinstance(k, int) or not 0 <= k < de:
                raise SpecParseError(f"env_reset.basis: index {k!r} out of range for dimension {de}")
            env = linalg.ket(k, de)
        else:
            env = decode_vector(env_doc, "env_reset")
        return ChannelSpec(dq, dm, de, us, env, mem, name=name)
    except ValidationError as exc:
        raise SpecParseError(f"validation failed: {exc}") from exc
    except linalg.DimensionError as exc:
        raise SpecParseError(f"validation failed: {exc}") from exc
    except (linalg.NotHermitianError, linalg.NotPSDError) as exc:
        raise SpecParseError(f"initial_memory: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, SpecParseError):
            raise
        raise SpecParseError(f"validation failed: {exc}") from exc


def _markov_from_dict(m, name: str) -> ChannelSpec:
    if not isinstance(m, dict):
        raise SpecParseError("markov: expected an object")
    for key in ("transition", "kraus"):
        if key not in m:
            raise SpecParseError(f"markov.{key}: missing")
    p = _real_matrix(m["transition"], "markov.transition")
    L = p.shape[0]
    kraus = m["kraus"]
    if not isinstance(kraus, list):
        raise SpecParseError("markov.kraus: expected a list of operators")
    vs = tuple(_kraus(k, f"markov.kraus[{i}]") for i, k in enumerate(kraus))
    init = m.get("initial_distribution")
    init = np.full(L, 1.0 / L) if init is None else np.real(decode_vector(init, "markov.initial_distribution"))
    fixed = m.get("fixed_point_form", True)
    if not isinstance(fixed, bool):
        raise SpecParseError("markov.fixed_point_form: expected true or false")
    try:
        ms = MarkovChannelSpec(p, vs, init)
    except ValidationError as exc:
        raise SpecParseError(f"markov: {exc}") from exc
    return build_markov_channel(ms, fixed, name=name)


def parse_channel_spec(text: str) -> ChannelSpec:
    """Parse and validate a channel document.

    Raises:
        SpecParseError: on malformed JSON (with line and column) or on any
            violated invariant (naming the field).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return channel_from_dict(doc)


def load_channel(path) -> ChannelSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_channel_spec(fh.read())


def bundled_path(name: str):
    if name not in BUNDLED:
        raise KeyError(f"no bundled channel {name!r}; choose from {', '.join(BUNDLED)}")
    return resources.files("qmemchan") / "data" / f"{name}.json"


def load_bundled(name: str) -> ChannelSpec:
    return parse_channel_spec(bundled_path(name).read_text(encoding="utf-8"))


def resolve_channel(ref: str) -> ChannelSpec:
    """A file path, or the name of a bundled channel."""
    if ref in BUNDLED:
        return load_bundled(ref)
    return load_channel(ref)


def channel_to_dict(spec: ChannelSpec) -> dict:
    doc = {"name": spec.name, "dims": {"q": spec.d_q, "m": spec.d_m, "e": spec.d_e}}
    if spec.markov is not None:
        m = spec.markov
        doc["markov"] = {
            "transition": m.transition.tolist(),
            "kraus": [encode_matrix(v) for v in m.kraus_unitaries],
            "fixed_point_form": bool(spec.fixed_point_form),
            "initial_distribution": m.initial_distribution.tolist(),
        }
    elif len(spec.unitaries) == 1:
        doc["unitary"] = encode_matrix(spec.unitaries[0])
    else:
        doc["unitaries"] = [encode_matrix(u) for u in spec.unitaries]
    doc["initial_memory"] = encode_matrix(spec.initial_memory)
    doc["env_reset"] = encode_vector(spec.env_reset)
    return doc


def state_from_dict(doc: dict, where: str = "state") -> tuple[np.ndarray, list[int] | None]:
    """Read ``{"state": matrix | {"ket": ...}, "dims": [...]}`` or ``{"product": [...]}``."""
    if "product" in doc:
        parts = doc["product"]
        if not isinstance(parts, list) or not parts:
            raise SpecParseError("product: expected a non-empty list of states")
        mats, dims = [], []
        for i, p in enumerate(parts):
            if isinstance(p, dict) and "basis" in p:
                raise SpecParseError(f"product[{i}]: give a matrix or a ket; basis needs a dimension")
            m = _state(p, _guess_dim(p, f"product[{i}]"), f"product[{i}]")
            mats.append(m)
            dims.append(m.shape[0])
        return linalg.tensor_all(mats), dims
    if "state" not in doc:
        raise SpecParseError(f"{where}: expected 'state' or 'product'")
    raw = doc["state"]
    m = _state(raw, _guess_dim(raw, "state"), "state")
    dims = doc.get("dims")
    if dims is not None and (not isinstance(dims, list) or math.prod(dims) != m.shape[0]):
        raise SpecParseError(f"dims: {dims!r} do not multiply to {m.shape[0]}")
    return m, dims


def _guess_dim(x, where: str) -> int:
    if isinstance(x, dict) and "ket" in x and isinstance(x["ket"], list):
        return len(x["ket"])
    if isinstance(x, list):
        return len(x)
    raise SpecParseError(f"{where}: cannot infer the dimension")
