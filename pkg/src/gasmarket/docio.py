"""Serialization codecs and deterministic RNG plumbing.

Arrays travel as base64-encoded little-endian float64 buffers together with
their shape, so a round trip is bit exact.  Generator state is captured from
and restored into numpy's counter-based Philox bit generator.  JSON documents
are written atomically (temp file then rename) to keep partially written
artifacts from ever being visible under their final name.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import tempfile

import numpy as np

from .errors import FormatError

__all__ = [
    "spawn_rng",
    "rng_to_doc",
    "rng_from_doc",
    "encode_array",
    "decode_array",
    "canonical_json",
    "sha256_of",
    "atomic_write_text",
    "write_json",
    "read_json",
]


def spawn_rng(*entropy: int) -> np.random.Generator:
    """Create a Philox generator keyed by a tuple of nonnegative integers.

    Distinct entropy tuples give statistically independent streams, and the
    same tuple always reproduces the same stream, which is the basis of every
    determinism guarantee in this package.
    """
    seq = np.random.SeedSequence(list(entropy))
    return np.random.Generator(np.random.Philox(seq))


def _to_plain(obj):
    if isinstance(obj, np.ndarray):
        return [_to_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    return obj


def rng_to_doc(rng: np.random.Generator) -> dict:
    """Capture the full bit-generator state as a JSON-safe document."""
    return _to_plain(rng.bit_generator.state)


def rng_from_doc(doc: dict) -> np.random.Generator:
    """Rebuild a generator from :func:`rng_to_doc` output, bit exactly."""
    name = doc.get("bit_generator")
    if name != "Philox":
        raise FormatError(f"unsupported bit generator {name!r}, expected 'Philox'")
    bg = np.random.Philox()
    state = json.loads(json.dumps(doc))
    state["state"]["counter"] = np.array(state["state"]["counter"], dtype=np.uint64)
    state["state"]["key"] = np.array(state["state"]["key"], dtype=np.uint64)
    state["buffer"] = np.array(state["buffer"], dtype=np.uint64)
    bg.state = state
    return np.random.Generator(bg)


def encode_array(arr: np.ndarray) -> dict:
    """Encode a float64 array as shape plus base64 payload, bit exact."""
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    le = arr.astype("<f8", copy=False)
    return {
        "shape": list(arr.shape),
        "dtype": "float64",
        "data": base64.b64encode(le.tobytes()).decode("ascii"),
    }


def decode_array(doc: dict) -> np.ndarray:
    """Inverse of :func:`encode_array`."""
    if doc.get("dtype") != "float64":
        raise FormatError(f"unsupported array dtype {doc.get('dtype')!r}")
    raw = base64.b64decode(doc["data"])
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    expected = int(np.prod(doc["shape"])) if doc["shape"] else 1
    if arr.size != expected:
        raise FormatError(
            f"array payload holds {arr.size} values, shape {doc['shape']} needs {expected}"
        )
    return arr.reshape(doc["shape"]).copy()


def canonical_json(doc) -> str:
    """Serialize with sorted keys and no whitespace variation."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def sha256_of(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def atomic_write_text(path: str, text: str) -> None:
    """Write text to ``path`` via a temp file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, doc) -> None:
    atomic_write_text(path, json.dumps(doc, sort_keys=True, indent=1) + "\n")


def read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not a JSON document: {path} ({exc})") from exc
