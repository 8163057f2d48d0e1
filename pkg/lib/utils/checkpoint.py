"""
Named-tensor container used for model checkpoints and precomputed features.

Layout (little-endian):
    magic b'SEMKGN' | version u8 | count u32
    per tensor: name_len u16 | name utf-8 | rank u8 | dims u64 * rank | values f64 * prod(dims)
"""
import struct
from collections import OrderedDict

import numpy as np

from .errors import DatasetFormatError

MAGIC = b'SEMKGN'
VERSION = 1


def save_checkpoint(path, tensors):
    """Write an ordered mapping name -> array; insertion order is kept."""
    chunks = [MAGIC, struct.pack('<BI', VERSION, len(tensors))]
    for name, value in tensors.items():
        value = np.asarray(value, dtype=np.float64)
        encoded = name.encode('utf-8')
        chunks.append(struct.pack('<H', len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack('<B', value.ndim))
        chunks.append(struct.pack(f'<{value.ndim}Q', *value.shape))
        chunks.append(np.ascontiguousarray(value).astype('<f8').tobytes())
    with open(path, 'wb') as f:
        f.write(b''.join(chunks))


def load_checkpoint(path):
    with open(path, 'rb') as f:
        raw = f.read()
    if not raw.startswith(MAGIC):
        raise DatasetFormatError('not a checkpoint file (bad magic)', path=path)
    offset = len(MAGIC)
    if len(raw) < offset + 5:
        raise DatasetFormatError('truncated checkpoint header', path=path)
    version, count = struct.unpack_from('<BI', raw, offset)
    offset += 5
    if version != VERSION:
        raise DatasetFormatError(f'unsupported checkpoint version {version}', path=path)
    tensors = OrderedDict()
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from('<H', raw, offset)
            offset += 2
            name = raw[offset:offset + name_len].decode('utf-8')
            offset += name_len
            (rank,) = struct.unpack_from('<B', raw, offset)
            offset += 1
            dims = struct.unpack_from(f'<{rank}Q', raw, offset)
            offset += 8 * rank
            n = int(np.prod(dims, dtype=np.int64))
            values = np.frombuffer(raw, dtype='<f8', count=n, offset=offset)
            offset += 8 * n
            tensors[name] = values.astype(np.float64).reshape(dims)
    except (struct.error, ValueError) as e:
        raise DatasetFormatError(f'truncated checkpoint: {e}', path=path)
    return tensors
