"""Binary weight container.

Layout (all integers little-endian uint32, payloads little-endian
float32):

    magic   4 bytes  b"MGFF"
    version u32      currently 1
    config  u32 length + UTF-8 JSON of the ModelConfig
    count   u32      number of records
    record  u32 name length + UTF-8 name
            u32 ndim + ndim * u32 extents
            prod(extents) * f4 payload

Records hold every parameter and running-statistics buffer of the model,
in traversal order.  Values are stored at 32-bit precision; a reloaded
and re-saved file is byte-identical.
"""

from __future__ import annotations

import json
import struct
from typing import BinaryIO

import numpy as np

from .config import ModelConfig
from .errors import WeightFormatError

MAGIC = b"MGFF"
VERSION = 1


def _write_u32(fh: BinaryIO, value: int) -> None:
    fh.write(struct.pack("<I", value))


def _read_u32(fh: BinaryIO) -> int:
    raw = fh.read(4)
    if len(raw) != 4:
        raise WeightFormatError("truncated weight file")
    return struct.unpack("<I", raw)[0]


def write_records(fh: BinaryIO, records: dict[str, np.ndarray]) -> None:
    _write_u32(fh, len(records))
    for name, array in records.items():
        encoded = name.encode("utf-8")
        _write_u32(fh, len(encoded))
        fh.write(encoded)
        _write_u32(fh, array.ndim)
        for extent in array.shape:
            _write_u32(fh, extent)
        fh.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def read_records(fh: BinaryIO) -> dict[str, np.ndarray]:
    count = _read_u32(fh)
    records: dict[str, np.ndarray] = {}
    for _ in range(count):
        name_len = _read_u32(fh)
        name = fh.read(name_len)
        if len(name) != name_len:
            raise WeightFormatError("truncated record name")
        ndim = _read_u32(fh)
        shape = tuple(_read_u32(fh) for _ in range(ndim))
        size = int(np.prod(shape)) if shape else 1
        payload = fh.read(4 * size)
        if len(payload) != 4 * size:
            raise WeightFormatError(f"truncated payload for record {name!r}")
        records[name.decode("utf-8")] = np.frombuffer(
            payload, dtype="<f4"
        ).astype(np.float64).reshape(shape)
    return records


def save_model(path, model, extra: dict[str, np.ndarray] | None = None) -> None:
    """Write a model (and optional extra records) to ``path``."""
    config_json = json.dumps(model.cfg.to_dict(), sort_keys=True).encode("utf-8")
    records = {name: t.data for name, t in model.named_tensors()}
    for name, array in (extra or {}).items():
        records[f"extra.{name}"] = np.asarray(array)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        _write_u32(fh, VERSION)
        _write_u32(fh, len(config_json))
        fh.write(config_json)
        write_records(fh, records)


def load_model(path):
    """Rebuild a SpeakerEmbedder from a weight file.

    Returns ``(model, extra_records)``.  Every model tensor must be
    present with a matching shape, and unexpected non-``extra`` records
    are rejected.
    """
    from .model import SpeakerEmbedder

    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise WeightFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version = _read_u32(fh)
        if version != VERSION:
            raise WeightFormatError(f"unsupported weight format version {version}")
        config_len = _read_u32(fh)
        config_raw = fh.read(config_len)
        if len(config_raw) != config_len:
            raise WeightFormatError("truncated config block")
        records = read_records(fh)

    try:
        cfg = ModelConfig.from_dict(json.loads(config_raw.decode("utf-8")))
    except (ValueError, KeyError, TypeError) as err:
        raise WeightFormatError(f"invalid config block: {err}") from err

    model = SpeakerEmbedder(cfg, rng=0)
    extra = {k[len("extra."):]: v for k, v in records.items()
             if k.startswith("extra.")}
    seen = set()
    for name, tensor in model.named_tensors():
        if name not in records:
            raise WeightFormatError(f"weight file is missing record {name!r}")
        value = records[name]
        if value.shape != tensor.shape:
            raise WeightFormatError(
                f"record {name!r} has shape {value.shape}, model expects "
                f"{tensor.shape}"
            )
        tensor.data = value
        seen.add(name)
    unexpected = [k for k in records
                  if k not in seen and not k.startswith("extra.")]
    if unexpected:
        raise WeightFormatError(f"unexpected records: {unexpected}")
    model.eval()
    return model, extra
