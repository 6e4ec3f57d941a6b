"""Little-endian binary containers for datasets and named tensor sets.

Dataset container ("PNPD"): magic, u32 version, u32 N_s, u32 N_t, u32
crop_rows, u32 sample count, then per sample the clean channel as interleaved
real/imag f32 pairs in row-major order, the f32 noise variance, and the noisy
channel in the same layout.

Tensor container ("PNPW"): magic, u32 version, u32 tensor count, then per
tensor a u16 name length, the UTF-8 name, a u8 rank, u32 dims, and the f32
payload in row-major order.  Order of tensors is preserved.
"""

from __future__ import annotations

import struct

import numpy as np

DATASET_MAGIC = b"PNPD"
TENSORS_MAGIC = b"PNPW"
FORMAT_VERSION = 1


def save_dataset_split(path, h_clean, h_noisy, sigma2, crop_rows):
    h_clean = np.ascontiguousarray(h_clean, dtype="<c8")
    h_noisy = np.ascontiguousarray(h_noisy, dtype="<c8")
    sigma2 = np.ascontiguousarray(sigma2, dtype="<f4")
    n, ns, nt = h_clean.shape
    if h_noisy.shape != h_clean.shape or sigma2.shape != (n,):
        raise ValueError("clean/noisy/sigma2 shapes are inconsistent")
    record = np.dtype([("clean", "<c8", (ns, nt)), ("sigma2", "<f4"),
                       ("noisy", "<c8", (ns, nt))])
    body = np.empty(n, dtype=record)
    body["clean"] = h_clean
    body["sigma2"] = sigma2
    body["noisy"] = h_noisy
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<5I", FORMAT_VERSION, ns, nt, crop_rows, n))
        fh.write(body.tobytes())


def load_dataset_split(path):
    """Returns (h_clean, h_noisy, sigma2, crop_rows)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != DATASET_MAGIC:
        raise ValueError(f"{path}: bad magic, not a dataset file")
    version, ns, nt, crop_rows, n = struct.unpack_from("<5I", raw, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported dataset version {version}")
    record = np.dtype([("clean", "<c8", (ns, nt)), ("sigma2", "<f4"),
                       ("noisy", "<c8", (ns, nt))])
    expected = 24 + n * record.itemsize
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated or oversized payload "
                         f"({len(raw)} bytes, expected {expected})")
    body = np.frombuffer(raw, dtype=record, count=n, offset=24)
    return (body["clean"].copy(), body["noisy"].copy(),
            body["sigma2"].copy(), crop_rows)


def save_tensors(path, tensors):
    """Write an ordered name -> array mapping; payloads stored as f32."""
    items = list(tensors.items())
    with open(path, "wb") as fh:
        fh.write(TENSORS_MAGIC)
        fh.write(struct.pack("<2I", FORMAT_VERSION, len(items)))
        for name, arr in items:
            # asarray, not ascontiguousarray: the latter promotes 0-d to 1-d
            arr = np.asarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_tensors(path):
    """Read a tensor container back into an ordered dict of float32 arrays."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != TENSORS_MAGIC:
        raise ValueError(f"{path}: bad magic, not a tensor file")
    version, count = struct.unpack_from("<2I", raw, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported tensor container version {version}")
    out = {}
    offset = 12
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", raw, offset)
            offset += 2
            name = raw[offset:offset + name_len].decode("utf-8")
            if len(raw[offset:offset + name_len]) != name_len:
                raise struct.error
            offset += name_len
            (ndim,) = struct.unpack_from("<B", raw, offset)
            offset += 1
            dims = struct.unpack_from(f"<{ndim}I", raw, offset)
            offset += 4 * ndim
            size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
            end = offset + 4 * size
            if end > len(raw):
                raise struct.error
            arr = np.frombuffer(raw, dtype="<f4", count=size, offset=offset)
            out[name] = arr.reshape(dims).copy()
            offset = end
    except struct.error:
        raise ValueError(f"{path}: truncated tensor container") from None
    if offset != len(raw):
        raise ValueError(f"{path}: trailing bytes after last tensor")
    return out
