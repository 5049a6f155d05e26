"""Binary checkpoint format for unit-cell states ("MPSC1").

Layout:

* 8-byte magic ``MPSCHKP1``
* u32 little-endian length, then that many bytes of UTF-8 JSON manifest
* payload: per-sector float64 little-endian data, row-major; complex
  tensors interleave (re, im) per entry, Schmidt spectra are stored
  real-only and flagged in the manifest
* trailing u32 little-endian CRC32 of the payload

The manifest records format_version, the quench parameters (delta, dt,
k_max, t_init), and for each of the six tensors its charge shift, the
real-only flag, and a sector table of (charge, rows, cols, byte offset
into the payload). Loading verifies the checksum before any state is
constructed, so a corrupt file never yields a partial state.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import (
    CheckpointChecksumError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from .graded import GradedMatrix, SchmidtSpectrum
from .itebd import DN, UP, MPSState, QuenchConfig

MAGIC = b"MPSCHKP1"
FORMAT_VERSION = 1

_TENSOR_NAMES = ("A_A_up", "A_A_dn", "A_B_up", "A_B_dn", "lambda_A", "lambda_B")


def _tensor_table(state: MPSState):
    return {
        "A_A_up": state.a_a[UP],
        "A_A_dn": state.a_a[DN],
        "A_B_up": state.a_b[UP],
        "A_B_dn": state.a_b[DN],
        "lambda_A": state.lambda_a,
        "lambda_B": state.lambda_b,
    }


def save_checkpoint(path, state: MPSState, config: QuenchConfig) -> None:
    """Write the state and its run parameters to an MPSC1 file."""
    tensors = _tensor_table(state)
    manifest_tensors = []
    payload = bytearray()
    for name in _TENSOR_NAMES:
        obj = tensors[name]
        real = isinstance(obj, SchmidtSpectrum)
        sectors = []
        if real:
            items = [((q, q), vals.reshape(-1, 1)) for q, vals in obj.blocks.items()]
            shift = 0
        else:
            items = list(obj.items())
            shift = obj.charge_shift
        for (q_row, _q_col), arr in items:
            if real:
                raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            else:
                raw = np.ascontiguousarray(arr, dtype="<c16").tobytes()
            sectors.append(
                {
                    "q": int(q_row),
                    "rows": int(arr.shape[0]),
                    "cols": int(arr.shape[1]),
                    "byte_offset": len(payload),
                }
            )
            payload.extend(raw)
        manifest_tensors.append(
            {
                "name": name,
                "charge_shift": shift,
                "real": real,
                "sectors": sectors,
            }
        )
    manifest = {
        "format_version": FORMAT_VERSION,
        "delta": config.delta,
        "dt": config.dt,
        "k_max": config.k_max,
        "t_init": state.time,
        "tensors": manifest_tensors,
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(bytes(payload)) & 0xFFFFFFFF))


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointTruncatedError(f"file ends inside {what}")
    return data


def load_checkpoint(path):
    """Read an MPSC1 file; returns (MPSState, QuenchConfig).

    Raises CheckpointVersionError for a foreign magic or unsupported
    version, CheckpointChecksumError on CRC mismatch, and
    CheckpointTruncatedError when the file is shorter than declared.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(MAGIC), "magic")
        if magic != MAGIC:
            raise CheckpointVersionError(f"{path}: not an MPSC1 checkpoint")
        (manifest_len,) = struct.unpack("<I", _read_exact(fh, 4, "manifest length"))
        try:
            manifest = json.loads(_read_exact(fh, manifest_len, "manifest"))
        except json.JSONDecodeError as exc:
            raise CheckpointVersionError(f"{path}: manifest is not valid JSON") from exc
        if manifest.get("format_version") != FORMAT_VERSION:
            raise CheckpointVersionError(
                f"{path}: format_version {manifest.get('format_version')!r} "
                f"not supported (expected {FORMAT_VERSION})"
            )
        payload_len = 0
        for tensor in manifest["tensors"]:
            for sec in tensor["sectors"]:
                width = 8 if tensor["real"] else 16
                payload_len = max(
                    payload_len, sec["byte_offset"] + sec["rows"] * sec["cols"] * width
                )
        payload = _read_exact(fh, payload_len, "payload")
        (crc_stored,) = struct.unpack("<I", _read_exact(fh, 4, "checksum"))
    if zlib.crc32(payload) & 0xFFFFFFFF != crc_stored:
        raise CheckpointChecksumError(f"{path}: payload checksum mismatch")

    parsed = {}
    for tensor in manifest["tensors"]:
        name = tensor["name"]
        blocks = {}
        for sec in tensor["sectors"]:
            rows, cols = sec["rows"], sec["cols"]
            off = sec["byte_offset"]
            if tensor["real"]:
                arr = np.frombuffer(
                    payload, dtype="<f8", count=rows * cols, offset=off
                ).reshape(rows, cols)
            else:
                arr = np.frombuffer(
                    payload, dtype="<c16", count=rows * cols, offset=off
                ).reshape(rows, cols)
            blocks[sec["q"]] = arr.copy()
        if tensor["real"]:
            parsed[name] = SchmidtSpectrum({q: b[:, 0] for q, b in blocks.items()})
        else:
            parsed[name] = GradedMatrix(tensor["charge_shift"], blocks)

    missing = [n for n in _TENSOR_NAMES if n not in parsed]
    if missing:
        raise CheckpointVersionError(f"{path}: manifest missing tensors {missing}")

    config = QuenchConfig(
        delta=manifest["delta"],
        dt=manifest["dt"],
        k_max=manifest["k_max"],
        t_init=manifest["t_init"],
    )
    state = MPSState(
        a_a=(parsed["A_A_up"], parsed["A_A_dn"]),
        a_b=(parsed["A_B_up"], parsed["A_B_dn"]),
        lambda_a=parsed["lambda_A"],
        lambda_b=parsed["lambda_B"],
        time=manifest["t_init"],
    )
    return state, config
