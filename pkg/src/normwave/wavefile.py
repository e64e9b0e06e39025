"""Binary wave files.

Layout::

    b"GSFW" | u16 version | u32 header length | UTF-8 JSON header | payload

The payload is the field as little-endian float64, row-major.  The header
carries the model, grid, derived scalars and a SHA-256 of the payload.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import struct
import time

import numpy as np

from . import models as M
from .grid import SpectralGrid

MAGIC = b"GSFW"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


class WaveFileError(ValueError):
    pass


_FAMILIES = {"Kawahara": M.Kawahara, "MixedNLS": M.MixedNLS, "LaplacianNLS": M.LaplacianNLS}


def model_to_dict(model) -> dict:
    out = {"family": model.family}
    for f in dataclasses.fields(model):
        if f.init:
            out[f.name] = getattr(model, f.name)
    return out


def model_from_dict(d: dict):
    d = dict(d)
    try:
        cls = _FAMILIES[d.pop("family")]
    except KeyError as exc:
        raise WaveFileError(f"unknown model family {exc}") from None
    try:
        return cls(**d)
    except TypeError as exc:
        raise WaveFileError(f"bad model parameters: {exc}") from None


def grid_to_dict(grid: SpectralGrid) -> dict:
    return {"dim": grid.dim, "n": grid.n, "length": grid.length, "dealias": grid.dealias}


def grid_from_dict(d: dict) -> SpectralGrid:
    return SpectralGrid(int(d["dim"]), int(d["n"]), float(d["length"]), bool(d.get("dealias", False)))


def timestamp() -> str:
    """UTC time, or ``SOURCE_DATE_EPOCH`` when set (for reproducible output)."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def payload_bytes(field: np.ndarray) -> bytes:
    return np.ascontiguousarray(field, dtype="<f8").tobytes(order="C")


def content_hash(payload: bytes) -> str:
    return "sha256:" + hashlib.sha256(payload).hexdigest()


def encode(wave) -> bytes:
    payload = payload_bytes(wave.field)
    header = {
        "model": model_to_dict(wave.model),
        "grid": grid_to_dict(wave.grid),
        "lambda": wave.lam,
        "omega": wave.omega,
        "energy": wave.energy,
        "el_residual_sup": wave.el_residual_sup,
        "el_residual_l2": wave.el_residual_l2,
        "solver": wave.solver.value,
        "iterations": wave.iterations,
        "timestamp": wave.info.get("timestamp") or timestamp(),
        "content_hash": content_hash(payload),
    }
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _PREFIX.pack(MAGIC, VERSION, len(text)) + text + payload


def decode(blob: bytes, rtol: float = 1e-12):
    if len(blob) < _PREFIX.size:
        raise WaveFileError("file too short for a wave header")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise WaveFileError(f"bad magic {magic!r}")
    if version != VERSION:
        raise WaveFileError(f"unsupported format version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(blob[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WaveFileError(f"corrupt header: {exc}") from None
    try:
        model = model_from_dict(header["model"])
        grid = grid_from_dict(header["grid"])
    except (KeyError, ValueError) as exc:
        raise WaveFileError(f"bad header: {exc}") from None
    payload = blob[start + hlen:]
    if len(payload) != 8 * grid.size:
        raise WaveFileError(f"payload has {len(payload)} bytes, expected {8 * grid.size}")
    if content_hash(payload) != header.get("content_hash"):
        raise WaveFileError("content hash mismatch")
    field = np.frombuffer(payload, dtype="<f8").reshape(grid.shape).astype(float)
    lam = grid.mass(field)
    if "lambda" not in header:
        raise WaveFileError("bad header: missing 'lambda'")
    if abs(lam - header["lambda"]) > rtol * max(abs(lam), 1e-300):
        raise WaveFileError(f"stored lambda {header['lambda']!r} disagrees with the payload ({lam!r})")
    # omega is stored, not enforced: fixed-frequency solves keep the prescribed value
    omega = M.omega_from_field(model, grid, field)
    try:
        return M.Wave(model=model, grid=grid, field=field, lam=header["lambda"],
                      omega=header["omega"], energy=header["energy"],
                      el_residual_sup=header["el_residual_sup"],
                      el_residual_l2=header["el_residual_l2"],
                      solver=M.SolverKind(header["solver"]),
                      iterations=int(header["iterations"]),
                      info={"timestamp": header["timestamp"], "omega_recomputed": omega})
    except (KeyError, ValueError) as exc:
        raise WaveFileError(f"bad header: {exc}") from None


def save(path, wave) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(wave))


def load(path):
    with open(path, "rb") as fh:
        return decode(fh.read())
