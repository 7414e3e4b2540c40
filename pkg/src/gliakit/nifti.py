"""Minimal NIfTI-1 single-file reader and writer (``.nii`` and ``.nii.gz``).

Only what the toolkit needs: 3D scalar volumes, 3D label maps and 4D
probability stacks. Output is little-endian with a 352-byte offset and
deterministic gzip framing (mtime 0), so writing the same container twice
gives identical bytes.
"""

from __future__ import annotations

import gzip
import os
import struct

import numpy as np

from .errors import NiftiFormatError, UnsupportedDatatypeError, ValidationError
from .volume import Geometry, LabelMap, ProbMap, Volume

__all__ = ["read_nifti", "write_nifti", "read_probmap", "write_probmap", "read_header"]

HEADER_SIZE = 348
VOX_OFFSET = 352
MAGIC = b"n+1\x00"

DTYPES = {
    2: np.dtype(np.uint8),
    4: np.dtype(np.int16),
    8: np.dtype(np.int32),
    16: np.dtype(np.float32),
    64: np.dtype(np.float64),
}
CODE_OF = {v: k for k, v in DTYPES.items()}

_CHANNEL_TAG = "gliakit channels="


def _load_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise NiftiFormatError(f"{path}: corrupt gzip stream ({exc})") from exc
    return raw


def read_header(raw: bytes) -> dict:
    """Decode the 348-byte NIfTI-1 header into a plain dict."""
    if len(raw) < HEADER_SIZE:
        raise NiftiFormatError("file shorter than a NIfTI-1 header")
    if struct.unpack("<i", raw[:4])[0] == HEADER_SIZE:
        end = "<"
    elif struct.unpack(">i", raw[:4])[0] == HEADER_SIZE:
        end = ">"
    else:
        raise NiftiFormatError("sizeof_hdr is not 348; not a NIfTI-1 file")
    magic = raw[344:348]
    if magic != MAGIC:
        raise NiftiFormatError(f"bad magic {magic!r}; only single-file NIfTI-1 (n+1) is supported")

    def unpack(fmt, offset):
        return struct.unpack_from(end + fmt, raw, offset)

    hdr = {
        "endian": end,
        "dim": unpack("8h", 40),
        "datatype": unpack("h", 70)[0],
        "bitpix": unpack("h", 72)[0],
        "pixdim": unpack("8f", 76),
        "vox_offset": unpack("f", 108)[0],
        "scl_slope": unpack("f", 112)[0],
        "scl_inter": unpack("f", 116)[0],
        "descrip": raw[148:228].split(b"\x00", 1)[0].decode("latin-1"),
        "qform_code": unpack("h", 252)[0],
        "sform_code": unpack("h", 254)[0],
        "quatern": unpack("3f", 256),
        "qoffset": unpack("3f", 268),
        "srow": np.array(unpack("12f", 280), dtype=np.float64).reshape(3, 4),
    }
    ndim = hdr["dim"][0]
    if not 1 <= ndim <= 7 or any(d < 1 for d in hdr["dim"][1 : ndim + 1]):
        raise NiftiFormatError(f"invalid dim field {hdr['dim']}")
    return hdr


def _quatern_to_affine(hdr) -> np.ndarray:
    b, c, d = (float(x) for x in hdr["quatern"])
    a = np.sqrt(max(0.0, 1.0 - (b * b + c * c + d * d)))
    rot = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b],
        ]
    )
    qfac = -1.0 if hdr["pixdim"][0] < 0 else 1.0
    px, py, pz = (abs(float(p)) for p in hdr["pixdim"][1:4])
    aff = np.eye(4)
    aff[:3, :3] = rot * np.array([px, py, qfac * pz])
    aff[:3, 3] = hdr["qoffset"]
    return aff


def _affine_to_quatern(aff: np.ndarray):
    """Return (b, c, d, qfac) for the rotation part of ``aff``."""
    m = aff[:3, :3] / np.linalg.norm(aff[:3, :3], axis=0)
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    qfac = 1.0
    if np.linalg.det(r) < 0:
        qfac = -1.0
        r[:, 2] = -r[:, 2]
    trace = r[0, 0] + r[1, 1] + r[2, 2] + 1.0
    if trace > 0.5:
        a = 0.5 * np.sqrt(trace)
        b = 0.25 * (r[2, 1] - r[1, 2]) / a
        c = 0.25 * (r[0, 2] - r[2, 0]) / a
        d = 0.25 * (r[1, 0] - r[0, 1]) / a
    else:
        xd = 1.0 + r[0, 0] - (r[1, 1] + r[2, 2])
        yd = 1.0 + r[1, 1] - (r[0, 0] + r[2, 2])
        zd = 1.0 + r[2, 2] - (r[0, 0] + r[1, 1])
        if xd > 1.0:
            b = 0.5 * np.sqrt(xd)
            c = 0.25 * (r[0, 1] + r[1, 0]) / b
            d = 0.25 * (r[0, 2] + r[2, 0]) / b
            a = 0.25 * (r[2, 1] - r[1, 2]) / b
        elif yd > 1.0:
            c = 0.5 * np.sqrt(yd)
            b = 0.25 * (r[0, 1] + r[1, 0]) / c
            d = 0.25 * (r[1, 2] + r[2, 1]) / c
            a = 0.25 * (r[0, 2] - r[2, 0]) / c
        else:
            d = 0.5 * np.sqrt(zd)
            b = 0.25 * (r[0, 2] + r[2, 0]) / d
            c = 0.25 * (r[1, 2] + r[2, 1]) / d
            a = 0.25 * (r[1, 0] - r[0, 1]) / d
        if a < 0:
            b, c, d = -b, -c, -d
    return float(b), float(c), float(d), qfac


def _geometry_from_header(hdr, dims) -> Geometry:
    if hdr["sform_code"] > 0:
        aff = np.eye(4)
        aff[:3] = hdr["srow"]
    elif hdr["qform_code"] > 0:
        aff = _quatern_to_affine(hdr)
    else:
        pix = [abs(float(p)) if p != 0 else 1.0 for p in hdr["pixdim"][1:4]]
        aff = np.diag([*pix, 1.0])
    norms = np.linalg.norm(aff[:3, :3], axis=0)
    pix = np.array([abs(float(p)) for p in hdr["pixdim"][1:4]])
    # pixdim is authoritative when it agrees with the affine; keeps round-trips bit-exact
    spacing = pix if np.allclose(pix, norms, rtol=1e-4, atol=0.0) else norms
    if np.any(spacing <= 0):
        raise NiftiFormatError("affine has a degenerate (zero-length) axis")
    return Geometry(dims, tuple(float(s) for s in spacing), aff)


def _read_payload(path):
    raw = _load_bytes(path)
    hdr = read_header(raw)
    code = hdr["datatype"]
    if code not in DTYPES:
        raise UnsupportedDatatypeError(
            f"{path}: datatype code {code} unsupported (u8, i16, i32, f32, f64 only)"
        )
    dtype = DTYPES[code].newbyteorder(hdr["endian"])
    ndim = hdr["dim"][0]
    shape = tuple(int(d) for d in hdr["dim"][1 : ndim + 1])
    offset = int(hdr["vox_offset"])
    count = int(np.prod(shape))
    need = offset + count * dtype.itemsize
    if offset < HEADER_SIZE or len(raw) < need:
        raise NiftiFormatError(f"{path}: payload truncated ({len(raw)} bytes, need {need})")
    flat = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    arr = flat.reshape(shape, order="F")
    return hdr, arr


def _first_nonfinite(arr: np.ndarray):
    bad = ~np.isfinite(arr)
    if not bad.any():
        return None
    flat_idx = int(np.flatnonzero(bad.ravel(order="F"))[0])
    return tuple(int(i) for i in np.unravel_index(flat_idx, arr.shape, order="F"))


def _as3d(arr: np.ndarray, path) -> np.ndarray:
    if arr.ndim < 3:
        arr = arr.reshape(arr.shape + (1,) * (3 - arr.ndim))
    if arr.ndim > 3:
        if any(d != 1 for d in arr.shape[3:]):
            raise NiftiFormatError(f"{path}: expected a 3D image, got shape {arr.shape}")
        arr = arr.reshape(arr.shape[:3])
    return arr


def read_nifti(path, schema=None):
    """Load a NIfTI-1 file as a :class:`Volume`, or as a :class:`LabelMap`
    when ``schema`` is given.

    Intensities get ``scl_slope``/``scl_inter`` applied and become float32.
    Labels must be integral and members of the schema.
    """
    hdr, arr = _read_payload(path)
    arr = _as3d(arr, path)
    geom = _geometry_from_header(hdr, arr.shape)
    if schema is not None:
        if arr.dtype.kind == "f":
            idx = _first_nonfinite(arr)
            if idx is not None:
                raise ValidationError(f"{path}: non-finite label value at voxel {idx}")
        return LabelMap(geom, arr, schema)
    data = arr.astype(np.float64)
    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    if np.isfinite(slope) and slope != 0 and not (slope == 1 and inter == 0):
        data = data * slope + inter
    idx = _first_nonfinite(data)
    if idx is not None:
        raise ValidationError(f"{path}: non-finite intensity at voxel {idx}")
    return Volume(geom, data)


def read_probmap(path, normalized: bool = True) -> ProbMap:
    """Load a 4D stack written by :func:`write_probmap` (channel axis last on disk)."""
    hdr, arr = _read_payload(path)
    if arr.ndim == 3:
        arr = arr[..., None]
    if arr.ndim != 4:
        raise NiftiFormatError(f"{path}: expected a 4D probability stack, got shape {arr.shape}")
    geom = _geometry_from_header(hdr, arr.shape[:3])
    n = arr.shape[3]
    channels = tuple(range(n))
    if hdr["descrip"].startswith(_CHANNEL_TAG):
        channels = tuple(int(c) for c in hdr["descrip"][len(_CHANNEL_TAG) :].split(","))
        if len(channels) != n:
            raise NiftiFormatError(f"{path}: channel tag lists {len(channels)} labels for {n} volumes")
    return ProbMap(geom, channels, np.moveaxis(arr.astype(np.float32), 3, 0), normalized)


def _build_header(geom: Geometry, shape, code: int, descrip: str = "") -> bytes:
    buf = bytearray(VOX_OFFSET)
    # round the affine to on-disk precision first so qform and sform agree on re-read
    aff = geom.affine.astype(np.float32).astype(np.float64)
    b, c, d, qfac = _affine_to_quatern(aff)
    dim = [len(shape), *shape] + [1] * (7 - len(shape))
    pixdim = [qfac, *geom.spacing] + [1.0] * 4
    dtype = DTYPES[code]
    struct.pack_into("<i", buf, 0, HEADER_SIZE)
    struct.pack_into("<c", buf, 39, b"\x00")
    struct.pack_into("<8h", buf, 40, *dim)
    struct.pack_into("<hhh", buf, 70, code, dtype.itemsize * 8, 0)
    struct.pack_into("<8f", buf, 76, *pixdim)
    struct.pack_into("<fff", buf, 108, float(VOX_OFFSET), 1.0, 0.0)
    struct.pack_into("<B", buf, 123, 2 | 8)  # mm, seconds
    desc = descrip.encode("latin-1")[:79]
    buf[148 : 148 + len(desc)] = desc
    struct.pack_into("<hh", buf, 252, 1, 1)
    struct.pack_into("<3f", buf, 256, b, c, d)
    struct.pack_into("<3f", buf, 268, *aff[:3, 3])
    struct.pack_into("<12f", buf, 280, *aff[:3].ravel())
    buf[344:348] = MAGIC
    return bytes(buf)


def _emit(path, header: bytes, payload: bytes, gz) -> None:
    path = os.fspath(path)
    if gz is None:
        gz = path.endswith(".gz")
    blob = header + payload
    if gz:
        blob = gzip.compress(blob, compresslevel=6, mtime=0)
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_nifti(v, path, gzip: bool | None = None) -> None:
    """Write a Volume (as f32) or LabelMap (as u8).

    ``gzip=None`` picks compression from a ``.gz`` suffix.
    """
    if isinstance(v, LabelMap):
        code, arr = 2, v.data.astype("<u1")
    elif isinstance(v, Volume):
        code, arr = 16, v.data.astype("<f4")
    else:
        raise TypeError(f"cannot write {type(v).__name__} as NIfTI")
    header = _build_header(v.geometry, arr.shape, code)
    _emit(path, header, arr.tobytes(order="F"), gzip)


def write_probmap(p: ProbMap, path, gzip: bool | None = None) -> None:
    arr = np.moveaxis(p.data, 0, 3).astype("<f4")
    descrip = _CHANNEL_TAG + ",".join(str(c) for c in p.channels)
    header = _build_header(p.geometry, arr.shape, 16, descrip)
    _emit(path, header, arr.tobytes(order="F"), gzip)
