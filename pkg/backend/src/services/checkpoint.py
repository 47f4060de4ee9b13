"""Versioned binary checkpoint.

Layout (all integers little-endian)::

    b"FMUD" | u32 version | u32 n_tensors
    n_tensors x ( u16 name_len | name utf-8 | u8 ndim | ndim x u32 dim | <f8 data )
    u32 table_len | hyperparameter table (utf-8 JSON)
    u32 crc32 of everything above
"""

import json
import os
import struct
import zlib
from typing import Dict, Tuple

import numpy as np

from src.common.autodiff import Tensor
from src.common.exceptions import CheckpointError, ContractViolation
from src.common.logger import get_logger
from src.common.utils import create_folder_if_not_exists
from src.services.dataset import NormalizationStats
from src.services.model import FmuadModel, ModelHyperparameters

logger = get_logger("checkpoint")

MAGIC = b"FMUD"
FORMAT_VERSION = 1
STATS_MIN = "normalization.min"
STATS_MAX = "normalization.max"


def _encode_tensor(name: str, values: np.ndarray) -> bytes:
    raw_name = name.encode("utf-8")
    arr = np.ascontiguousarray(values, dtype="<f8")
    parts = [struct.pack("<H", len(raw_name)), raw_name, struct.pack("<B", arr.ndim)]
    parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    parts.append(arr.tobytes(order="C"))
    return b"".join(parts)


def encode_checkpoint(model: FmuadModel) -> bytes:
    tensors = {name: t.numpy() for name, t in sorted(model.parameters().items())}
    if model.stats is not None:
        tensors[STATS_MIN] = model.stats.minimum
        tensors[STATS_MAX] = model.stats.maximum
    table = {
        "format": FORMAT_VERSION,
        "seed": model.seed,
        "hyperparameters": model.hp.to_dict(),
    }
    body = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(tensors))]
    body.extend(_encode_tensor(name, values) for name, values in tensors.items())
    raw_table = json.dumps(table, sort_keys=True).encode("utf-8")
    body.append(struct.pack("<I", len(raw_table)))
    body.append(raw_table)
    payload = b"".join(body)
    return payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)


class _Reader:
    def __init__(self, data: bytes, path: str) -> None:
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"Checkpoint truncated at byte {self.pos} [{self.path}]")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes, path: str = "<memory>") -> Tuple[Dict[str, np.ndarray], dict]:
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"Not a checkpoint file, bad magic bytes [{path}]")
    if len(data) < len(MAGIC) + 8:
        raise CheckpointError(f"Checkpoint truncated in header [{path}]")
    payload, trailer = data[:-4], data[-4:]

    reader = _Reader(payload, path)
    reader.take(len(MAGIC))
    version, count = reader.unpack("<II")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}, expected {FORMAT_VERSION} [{path}]")

    tensors = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8", errors="replace")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(reader.take(8 * size), dtype="<f8").reshape(shape)
        tensors[name] = values.astype(np.float64)
    (table_len,) = reader.unpack("<I")
    raw_table = reader.take(table_len)
    if reader.pos != len(payload):
        raise CheckpointError(f"Checkpoint has {len(payload) - reader.pos} unexpected trailing bytes [{path}]")

    (stored_crc,) = struct.unpack("<I", trailer)
    if stored_crc != zlib.crc32(payload) & 0xFFFFFFFF:
        raise CheckpointError(f"Checkpoint checksum mismatch [{path}]")
    try:
        table = json.loads(raw_table.decode("utf-8"))
    except ValueError as e:
        raise CheckpointError(f"Checkpoint hyperparameter table is unreadable [{path}]: {e}")
    return tensors, table


def save_checkpoint(model: FmuadModel, path: str) -> str:
    create_folder_if_not_exists(os.path.dirname(path), "checkpoint")
    try:
        with open(path, "wb") as f:
            f.write(encode_checkpoint(model))
    except OSError as e:
        logger.error(f"Failed to write checkpoint: {path}", e)
        raise CheckpointError(f"Cannot write checkpoint [{path}]: {e}")
    logger.info(f"Saved checkpoint with {len(model.parameters())} tensors to {path}")
    return path


def load_checkpoint(path: str) -> FmuadModel:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        logger.error(f"Failed to read checkpoint: {path}", e)
        raise CheckpointError(f"Cannot read checkpoint [{path}]: {e}")

    tensors, table = decode_checkpoint(data, path)
    try:
        hp = ModelHyperparameters.from_dict(table["hyperparameters"])
        seed = int(table["seed"])
    except (KeyError, TypeError, ContractViolation) as e:
        raise CheckpointError(f"Checkpoint hyperparameter table is invalid [{path}]: {e}")

    stats = None
    if STATS_MIN in tensors and STATS_MAX in tensors:
        stats = NormalizationStats(minimum=tensors.pop(STATS_MIN), maximum=tensors.pop(STATS_MAX))
    model = FmuadModel(hp, seed=seed, stats=stats)
    try:
        model.load_parameters({name: Tensor(values) for name, values in tensors.items()})
    except ContractViolation as e:
        raise CheckpointError(f"Checkpoint tensors do not match its hyperparameters [{path}]: {e}")
    logger.info(f"Loaded checkpoint {path} (m={hp.m}, tau={hp.tau}, k={hp.k}, detectors={list(hp.detectors)})")
    return model
