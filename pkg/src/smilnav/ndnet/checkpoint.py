"""Weight checkpoint format.

Layout: the magic string "SMILNET1", then one record per tensor:
u32 name length, utf-8 name, u32 rank, u32 dims, little-endian float32 data.
Loading parses records, checks the file is exactly consumed, and assigns by
name with shape validation.
"""

import struct

import numpy as np

MAGIC = b"SMILNET1"


class CheckpointError(Exception):
    pass


def save_checkpoint(path, params):
    with open(path, "wb") as f:
        f.write(MAGIC)
        for p in params:
            name = p.name.encode("utf-8")
            f.write(struct.pack("<I", len(name)))
            f.write(name)
            f.write(struct.pack("<I", p.value.ndim))
            f.write(struct.pack(f"<{p.value.ndim}I", *p.value.shape))
            f.write(np.ascontiguousarray(p.value, dtype="<f4").tobytes())


def read_checkpoint(path):
    """Parse a checkpoint into a name -> float32 array dict."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    pos = len(MAGIC)
    tensors = {}
    while pos < len(blob):
        if pos + 4 > len(blob):
            raise CheckpointError(f"{path}: truncated record header")
        (nlen,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        name = blob[pos : pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        end = pos + 4 * count
        if end > len(blob):
            raise CheckpointError(f"{path}: tensor '{name}' data exceeds file size")
        tensors[name] = np.frombuffer(blob[pos:end], dtype="<f4").reshape(dims)
        pos = end
    if pos != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - pos} trailing bytes")
    return tensors


def load_checkpoint(path, params):
    """Assign stored tensors onto params by name (cast to the param dtype)."""
    tensors = read_checkpoint(path)
    for p in params:
        if p.name not in tensors:
            raise CheckpointError(f"{path}: missing tensor '{p.name}'")
        t = tensors.pop(p.name)
        if t.shape != p.value.shape:
            raise CheckpointError(f"{path}: tensor '{p.name}' shape {t.shape} != {p.value.shape}")
        p.value[...] = t.astype(p.value.dtype)
    if tensors:
        raise CheckpointError(f"{path}: unexpected tensors {sorted(tensors)}")
