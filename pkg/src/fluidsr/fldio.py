"""Binary field files, model checkpoints, and JSON manifests.

Field container ("FLD1", version 1):

    magic b"FLD1" | u32 version | u32 ndim | u32 dims[ndim]
    | float64 little-endian row-major payload | u32 CRC32

The trailing CRC32 covers every preceding byte.  Version 2 replaces the
dims block with a length-prefixed JSON header followed by the named
float64 payloads; it carries model checkpoints (config plus weights) in
the same self-checking envelope.  Writes are bytewise deterministic:
the same content always produces the same file hash.
"""

import hashlib
import json
import struct
import zlib

import numpy as np

MAGIC = b"FLD1"


def _pack_u32(*values) -> bytes:
    return struct.pack("<" + "I" * len(values), *values)


def write_field(path, field) -> None:
    """Write one float64 array as a version-1 field file."""
    a = np.ascontiguousarray(np.asarray(field, dtype="<f8"))
    if a.ndim < 1:
        raise ValueError("field must have at least one dimension")
    blob = MAGIC + _pack_u32(1, a.ndim, *a.shape) + a.tobytes()
    with open(path, "wb") as fh:
        fh.write(blob + _pack_u32(zlib.crc32(blob)))


def _read_checked(path) -> bytes:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a field container")
    body, crc = blob[:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(body) != crc:
        raise ValueError(f"{path}: checksum mismatch")
    return body


def read_field(path) -> np.ndarray:
    body = _read_checked(path)
    version, ndim = struct.unpack("<II", body[4:12])
    if version != 1:
        raise ValueError(f"{path}: expected a version-1 field file")
    dims = struct.unpack("<" + "I" * ndim, body[12:12 + 4 * ndim])
    payload = body[12 + 4 * ndim:]
    count = int(np.prod(dims)) if dims else 0
    if len(payload) != 8 * count:
        raise ValueError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype="<f8").reshape(dims).copy()


def save_checkpoint(path, config: dict, arrays: dict) -> None:
    """Write a version-2 container: JSON config plus named weights."""
    names = list(arrays)
    # note: tobytes() already emits C order; ascontiguousarray would
    # silently promote 0-d arrays to shape (1,)
    prepared = {n: np.asarray(arrays[n], dtype="<f8") for n in names}
    header = {
        "config": config,
        "arrays": [{"name": n, "shape": list(prepared[n].shape)}
                   for n in names],
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    blob = MAGIC + _pack_u32(2, len(hbytes)) + hbytes
    blob += b"".join(prepared[n].tobytes() for n in names)
    with open(path, "wb") as fh:
        fh.write(blob + _pack_u32(zlib.crc32(blob)))


def load_checkpoint(path):
    """Return (config, arrays) from a version-2 container."""
    body = _read_checked(path)
    version, hlen = struct.unpack("<II", body[4:12])
    if version != 2:
        raise ValueError(f"{path}: expected a version-2 checkpoint file")
    header = json.loads(body[12:12 + hlen].decode())
    arrays = {}
    offset = 12 + hlen
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        chunk = body[offset:offset + 8 * count]
        if len(chunk) != 8 * count:
            raise ValueError(f"{path}: truncated payload")
        arrays[entry["name"]] = (np.frombuffer(chunk, dtype="<f8")
                                 .reshape(shape).copy())
        offset += 8 * count
    if offset != len(body):
        raise ValueError(f"{path}: trailing bytes after payload")
    return header["config"], arrays


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
