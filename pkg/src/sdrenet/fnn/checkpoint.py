"""Checkpoint files: one JSON header line, then raw little-endian float64 parameters."""

import json

import numpy as np

from ..errors import FormatError
from .network import Architecture, init_params

MAGIC = "sdrenet-ckpt"


def save_checkpoint(path, params, meta=None):
    header = {
        "format": MAGIC,
        "version": 1,
        "layer_sizes": params.layer_sizes,
        "activations": list(params.activations),
        "n_params": params.size,
        "dtype": "<f8",
        "meta": meta or {},
    }
    line = json.dumps(header, sort_keys=True).encode() + b"\n"
    with open(path, "wb") as fh:
        fh.write(line)
        fh.write(params.flat().astype("<f8").tobytes())


def load_checkpoint(path):
    """Return ``(params, meta)``; raises FormatError on a malformed file."""
    with open(path, "rb") as fh:
        line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(line)
    except ValueError as exc:
        raise FormatError(f"{path}: unreadable header: {exc}") from None
    if header.get("format") != MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    arch = Architecture(header["layer_sizes"], header["activations"])
    template = init_params(arch, 0)
    theta = np.frombuffer(payload, dtype="<f8").astype(float)
    if theta.size != template.size or header.get("n_params") != template.size:
        raise FormatError(f"{path}: expected {template.size} parameters, found {theta.size}")
    return template.with_flat(theta.copy()), header.get("meta", {})
