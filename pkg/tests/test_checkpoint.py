import json
import struct
import zlib

import numpy as np
import pytest

from spinquench.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from spinquench.errors import (
    CheckpointChecksumError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from spinquench.itebd import DN, UP, QuenchConfig, evolve_to, neel_init


def _small_state():
    config = QuenchConfig(delta=0.5, dt=0.0625, k_max=8)
    return evolve_to(neel_init(), 0.25, config), config


def test_round_trip_bit_identical(tmp_path):
    state, config = _small_state()
    path = tmp_path / "state.mpsc1"
    save_checkpoint(path, state, config)
    loaded, loaded_config = load_checkpoint(path)
    assert loaded_config.delta == config.delta
    assert loaded_config.dt == config.dt
    assert loaded_config.k_max == config.k_max
    # the stored t_init is the state's own time so a continuation run
    # starts from where this one stopped
    assert loaded_config.t_init == state.time
    assert loaded.time == state.time
    for orig, back in ((state.a_a, loaded.a_a), (state.a_b, loaded.a_b)):
        for s in (UP, DN):
            assert set(orig[s].blocks) == set(back[s].blocks)
            assert orig[s].charge_shift == back[s].charge_shift
            for q, arr in orig[s].blocks.items():
                assert np.array_equal(arr, back[s].blocks[q])
    for orig, back in (
        (state.lambda_a, loaded.lambda_a),
        (state.lambda_b, loaded.lambda_b),
    ):
        assert set(orig.blocks) == set(back.blocks)
        for q, vals in orig.blocks.items():
            assert np.array_equal(vals, back.blocks[q])


def test_resave_is_byte_identical(tmp_path):
    state, config = _small_state()
    first = tmp_path / "a.mpsc1"
    second = tmp_path / "b.mpsc1"
    save_checkpoint(first, state, config)
    loaded, loaded_config = load_checkpoint(first)
    save_checkpoint(second, loaded, loaded_config)
    assert first.read_bytes() == second.read_bytes()


def test_corrupted_payload_rejected(tmp_path):
    state, config = _small_state()
    path = tmp_path / "state.mpsc1"
    save_checkpoint(path, state, config)
    raw = bytearray(path.read_bytes())
    (manifest_len,) = struct.unpack("<I", raw[8:12])
    flip_at = 12 + manifest_len + 5  # inside the payload
    raw[flip_at] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointChecksumError):
        load_checkpoint(path)


def test_truncated_file_rejected(tmp_path):
    state, config = _small_state()
    path = tmp_path / "state.mpsc1"
    save_checkpoint(path, state, config)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(CheckpointTruncatedError):
        load_checkpoint(path)


def test_foreign_magic_rejected(tmp_path):
    path = tmp_path / "other.bin"
    path.write_bytes(b"NOTMPSC0" + b"\x00" * 64)
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_unsupported_version_rejected(tmp_path):
    blob = json.dumps({"format_version": 99}).encode()
    path = tmp_path / "future.mpsc1"
    path.write_bytes(MAGIC + struct.pack("<I", len(blob)) + blob)
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_garbled_manifest_rejected(tmp_path):
    blob = b"{not json"
    path = tmp_path / "bad.mpsc1"
    path.write_bytes(MAGIC + struct.pack("<I", len(blob)) + blob)
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_missing_tensor_rejected(tmp_path):
    state, config = _small_state()
    path = tmp_path / "state.mpsc1"
    save_checkpoint(path, state, config)
    raw = path.read_bytes()
    (manifest_len,) = struct.unpack("<I", raw[8:12])
    manifest = json.loads(raw[12 : 12 + manifest_len])
    manifest["tensors"] = [
        t for t in manifest["tensors"] if t["name"] != "lambda_B"
    ]
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    payload = raw[12 + manifest_len : -4]
    kept_len = max(
        sec["byte_offset"] + sec["rows"] * sec["cols"] * (8 if t["real"] else 16)
        for t in manifest["tensors"]
        for sec in t["sectors"]
    )
    payload = payload[:kept_len]
    crc = struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    path.write_bytes(MAGIC + struct.pack("<I", len(blob)) + blob + payload + crc)
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_schmidt_spectra_stored_real(tmp_path):
    state, config = _small_state()
    path = tmp_path / "state.mpsc1"
    save_checkpoint(path, state, config)
    raw = path.read_bytes()
    (manifest_len,) = struct.unpack("<I", raw[8:12])
    manifest = json.loads(raw[12 : 12 + manifest_len])
    by_name = {t["name"]: t for t in manifest["tensors"]}
    assert set(by_name) == {
        "A_A_up", "A_A_dn", "A_B_up", "A_B_dn", "lambda_A", "lambda_B"
    }
    for name in ("lambda_A", "lambda_B"):
        assert by_name[name]["real"] is True
        for sec in by_name[name]["sectors"]:
            assert sec["cols"] == 1
    for name in ("A_A_up", "A_A_dn", "A_B_up", "A_B_dn"):
        assert by_name[name]["real"] is False


def test_config_fields_survive(tmp_path):
    config = QuenchConfig(delta=0.75, dt=0.03125, k_max=12, t_init=0.0)
    state = evolve_to(neel_init(), 0.125, config)
    path = tmp_path / "state.mpsc1"
    save_checkpoint(path, state, config)
    _loaded, loaded_config = load_checkpoint(path)
    assert loaded_config.delta == 0.75
    assert loaded_config.dt == 0.03125
    assert loaded_config.k_max == 12
