"""
File Formats
Little-endian binary tensor (CPDT) and Kruskal model (CPDF) files, plus the
comma-separated convergence trace
"""

import csv
import logging
import struct
from pathlib import Path

import numpy as np

from models import KruskalModel, TraceRow
from utils.errors import FormatError

logger = logging.getLogger(__name__)

TENSOR_MAGIC = b'CPDT'
MODEL_MAGIC = b'CPDF'
FORMAT_VERSION = 1
FLOAT = np.dtype('<f8')

PREAMBLE = struct.Struct('<4sBB')   # magic, version, order
RANK = struct.Struct('<I')
EXTENT = struct.Struct('<Q')

TRACE_FIELDS = ['iter', 'order', 'fitness', 'raw_radicand', 'seconds',
                'root_ttms', 'flops', 'beta', 'regularized']


# ============================================================================
# BINARY HELPERS
# ============================================================================

class _Reader:
    """Cursor over a byte string that raises FormatError on truncation."""

    def __init__(self, data, kind):
        self.data = memoryview(data)
        self.kind = kind
        self.offset = 0

    def take(self, size, what):
        end = self.offset + size
        if end > len(self.data):
            raise FormatError(
                f'truncated {self.kind} file: need {size} bytes for {what} at offset '
                f'{self.offset}, only {len(self.data) - self.offset} left'
            )
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt, what):
        return fmt.unpack(self.take(fmt.size, what))

    def floats(self, count, what):
        values = np.frombuffer(self.take(count * FLOAT.itemsize, what), dtype=FLOAT)
        values = values.astype(np.float64)
        if not np.all(np.isfinite(values)):
            raise FormatError(f'{self.kind} file contains NaN or Inf in {what}')
        return values

    def finish(self):
        extra = len(self.data) - self.offset
        if extra:
            raise FormatError(f'{self.kind} file has {extra} trailing bytes')


def _preamble(reader, magic):
    found, version, order = reader.unpack(PREAMBLE, 'header')
    if found != magic:
        raise FormatError(f'bad magic {bytes(found)!r}, expected {magic!r}')
    if version != FORMAT_VERSION:
        raise FormatError(f'unsupported {reader.kind} format version {version}')
    if order < 1:
        raise FormatError(f'{reader.kind} order must be >= 1, got {order}')
    return version, order


def _extents(reader, order):
    shape = tuple(reader.unpack(EXTENT, f'extent {k + 1}')[0] for k in range(order))
    if any(d < 1 for d in shape):
        raise FormatError(f'zero extent in shape {shape}')
    return shape


def _check_shape(shape):
    if not 1 <= len(shape) <= 255:
        raise FormatError(f'order {len(shape)} does not fit the header')
    if any(d < 1 for d in shape):
        raise FormatError(f'zero extent in shape {shape}')


def _payload(values, what):
    values = np.ascontiguousarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise FormatError(f'refusing to write NaN or Inf in {what}')
    return values.astype(FLOAT, copy=False).tobytes(order='C')


# ============================================================================
# TENSOR FILES
# ============================================================================

def encode_tensor(t):
    t = np.asarray(t)
    _check_shape(t.shape)
    header = PREAMBLE.pack(TENSOR_MAGIC, FORMAT_VERSION, t.ndim)
    header += b''.join(EXTENT.pack(d) for d in t.shape)
    return header + _payload(t, 'tensor payload')


def decode_tensor(data):
    reader = _Reader(data, 'tensor')
    _, order = _preamble(reader, TENSOR_MAGIC)
    shape = _extents(reader, order)
    values = reader.floats(int(np.prod(shape)), 'tensor payload')
    reader.finish()
    return values.reshape(shape)


# ============================================================================
# MODEL FILES
# ============================================================================

def encode_model(model):
    _check_shape(model.shape)
    if np.any(model.weights < 0.0):
        raise FormatError('model weights must be nonnegative')
    header = PREAMBLE.pack(MODEL_MAGIC, FORMAT_VERSION, model.order)
    header += RANK.pack(model.rank)
    header += b''.join(EXTENT.pack(d) for d in model.shape)
    body = _payload(model.weights, 'weights')
    body += b''.join(_payload(f, f'factor {n + 1}') for n, f in enumerate(model.factors))
    return header + body


def decode_model(data):
    reader = _Reader(data, 'model')
    _, order = _preamble(reader, MODEL_MAGIC)
    (rank,) = reader.unpack(RANK, 'rank')
    if rank < 1:
        raise FormatError(f'model rank must be >= 1, got {rank}')
    shape = _extents(reader, order)
    weights = reader.floats(rank, 'weights')
    if np.any(weights < 0.0):
        raise FormatError('model weights must be nonnegative')
    factors = [
        reader.floats(extent * rank, f'factor {n + 1}').reshape(extent, rank)
        for n, extent in enumerate(shape)
    ]
    reader.finish()
    return KruskalModel(weights, factors)


# ============================================================================
# HEADER INSPECTION
# ============================================================================

def read_header(path):
    """Metadata of a tensor or model file, without reading its payload."""
    path = Path(path)
    with path.open('rb') as fh:
        head = fh.read(PREAMBLE.size)
        if len(head) < PREAMBLE.size:
            raise FormatError(f'{path} is too short to hold a header')
        magic = head[:4]
        if magic == TENSOR_MAGIC:
            kind = 'tensor'
        elif magic == MODEL_MAGIC:
            kind = 'model'
        else:
            raise FormatError(f'bad magic {magic!r} in {path}')
        order = head[5]
        rest = fh.read((RANK.size if kind == 'model' else 0) + order * EXTENT.size)

    reader = _Reader(head + rest, kind)
    version, order = _preamble(reader, magic)
    header = {'kind': kind, 'version': version, 'order': order}
    if kind == 'model':
        header['rank'] = reader.unpack(RANK, 'rank')[0]
    header['shape'] = _extents(reader, order)
    header['elements'] = int(np.prod(header['shape']))
    header['bytes'] = path.stat().st_size
    return header


def save_tensor(path, t):
    Path(path).write_bytes(encode_tensor(t))
    logger.info('wrote tensor %s to %s', t.shape, path)


def load_tensor(path):
    return decode_tensor(Path(path).read_bytes())


def save_model(path, model):
    Path(path).write_bytes(encode_model(model))
    logger.info('wrote %r to %s', model, path)


def load_model(path):
    return decode_model(Path(path).read_bytes())


# ============================================================================
# TRACE FILES
# ============================================================================

def write_trace(path, rows, timing=True):
    """One CSV row per sweep; floats use repr, `timing=False` zeroes `seconds`."""
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_FIELDS, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            record = row.to_dict()
            if not timing:
                record['seconds'] = 0.0
            for key in ('fitness', 'raw_radicand', 'seconds', 'beta'):
                record[key] = repr(float(record[key]))
            writer.writerow(record)


def read_trace(path):
    with open(path, newline='', encoding='utf-8') as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRACE_FIELDS:
            raise FormatError(f'unexpected trace header {reader.fieldnames}')
        try:
            return [
                TraceRow(
                    iteration=int(record['iter']),
                    update_order=tuple(int(c) - 1 for c in record['order']),
                    fitness=float(record['fitness']),
                    raw_radicand=float(record['raw_radicand']),
                    wall_seconds=float(record['seconds']),
                    root_ttm_count=int(record['root_ttms']),
                    flops=int(record['flops']),
                    beta_used=float(record['beta']),
                    regularized=bool(int(record['regularized'])),
                )
                for record in reader
            ]
        except (TypeError, ValueError) as e:
            raise FormatError(f'malformed trace row in {path}: {e}') from e
