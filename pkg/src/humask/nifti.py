"""NIfTI-1 reader and writer.

Only single-file (``n+1``) and paired (``ni1``) NIfTI-1 volumes with three
spatial dimensions are handled. Extensions are skipped on read and never
written.
"""
from __future__ import annotations

import gzip as _gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, IoError, ParseError, UnsupportedDatatype
from .volume import Unit, Volume3D

HEADER_SIZE = 348
DEFAULT_VOX_OFFSET = 352
GZIP_MAGIC = b"\x1f\x8b"

# datatype code -> numpy dtype (byte order applied at read time)
DATATYPES = {
    2: np.dtype(np.uint8),
    4: np.dtype(np.int16),
    8: np.dtype(np.int32),
    16: np.dtype(np.float32),
    64: np.dtype(np.float64),
    512: np.dtype(np.uint16),
}

# (name, struct code, offset); layout of the 348-byte header
_FIELDS = [
    ("sizeof_hdr", "i", 0),
    ("dim_info", "B", 39),
    ("dim", "8h", 40),
    ("intent_p", "3f", 56),
    ("intent_code", "h", 68),
    ("datatype", "h", 70),
    ("bitpix", "h", 72),
    ("slice_start", "h", 74),
    ("pixdim", "8f", 76),
    ("vox_offset", "f", 108),
    ("scl_slope", "f", 112),
    ("scl_inter", "f", 116),
    ("slice_end", "h", 120),
    ("slice_code", "B", 122),
    ("xyzt_units", "B", 123),
    ("cal_max", "f", 124),
    ("cal_min", "f", 128),
    ("descrip", "80s", 148),
    ("qform_code", "h", 252),
    ("sform_code", "h", 254),
    ("quatern", "3f", 256),
    ("qoffset", "3f", 268),
    ("srow_x", "4f", 280),
    ("srow_y", "4f", 296),
    ("srow_z", "4f", 312),
    ("magic", "4s", 344),
]


@dataclass(frozen=True)
class NiftiHeader:
    sizeof_hdr: int
    datatype: int
    dim: tuple[int, ...]
    pixdim: tuple[float, ...]
    scl_slope: float
    scl_inter: float
    vox_offset: float
    magic: bytes
    qform_code: int = 0
    sform_code: int = 0
    quatern: tuple[float, float, float] = (0.0, 0.0, 0.0)
    qoffset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    srow: tuple[tuple[float, ...], ...] = ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0))
    byteorder: str = "<"

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.dim[1:4])

    def affine(self) -> np.ndarray:
        """Voxel-to-world matrix, preferring sform over qform over pixdim."""
        if self.sform_code > 0:
            aff = np.eye(4)
            aff[:3, :] = np.array(self.srow, dtype=np.float64)
            return aff
        if self.qform_code > 0:
            return _quaternion_affine(self.quatern, self.qoffset, self.pixdim)
        aff = np.eye(4)
        aff[[0, 1, 2], [0, 1, 2]] = self.pixdim[1:4]
        return aff


def _quaternion_affine(quatern, qoffset, pixdim):
    b, c, d = (float(q) for q in quatern)
    a = np.sqrt(max(0.0, 1.0 - (b * b + c * c + d * d)))
    rot = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b],
        ]
    )
    qfac = -1.0 if pixdim[0] < 0 else 1.0
    zooms = np.array([pixdim[1], pixdim[2], pixdim[3] * qfac], dtype=np.float64)
    aff = np.eye(4)
    aff[:3, :3] = rot * zooms
    aff[:3, 3] = qoffset
    return aff


def _is_gzip(raw: bytes) -> bool:
    return raw[:2] == GZIP_MAGIC


def _load_bytes(path: Path) -> bytes:
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if _is_gzip(raw):
        try:
            raw = _gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise ParseError(f"{path}: corrupt gzip stream ({exc})") from exc
    return raw


def parse_header(raw: bytes) -> NiftiHeader:
    """Decode and validate the first 348 bytes of ``raw``."""
    if len(raw) < HEADER_SIZE:
        raise ParseError(f"header truncated: {len(raw)} < {HEADER_SIZE} bytes")
    if struct.unpack_from("<i", raw, 0)[0] == HEADER_SIZE:
        bo = "<"
    elif struct.unpack_from(">i", raw, 0)[0] == HEADER_SIZE:
        bo = ">"
    else:
        raise ParseError(
            f"sizeof_hdr is {struct.unpack_from('<i', raw, 0)[0]}, expected {HEADER_SIZE}"
        )

    values = {}
    for name, code, offset in _FIELDS:
        unpacked = struct.unpack_from(bo + code, raw, offset)
        values[name] = unpacked[0] if len(unpacked) == 1 else unpacked

    magic = values["magic"]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise ParseError(f"bad magic {magic!r}; not a NIfTI-1 file")
    dim = values["dim"]
    if not 1 <= dim[0] <= 7:
        raise ParseError(f"dim[0] = {dim[0]} outside [1, 7]")

    return NiftiHeader(
        sizeof_hdr=HEADER_SIZE,
        datatype=int(values["datatype"]),
        dim=tuple(int(d) for d in dim),
        pixdim=tuple(float(p) for p in values["pixdim"]),
        scl_slope=float(values["scl_slope"]),
        scl_inter=float(values["scl_inter"]),
        vox_offset=float(values["vox_offset"]),
        magic=magic,
        qform_code=int(values["qform_code"]),
        sform_code=int(values["sform_code"]),
        quatern=tuple(values["quatern"]),
        qoffset=tuple(values["qoffset"]),
        srow=(values["srow_x"], values["srow_y"], values["srow_z"]),
        byteorder=bo,
    )


def _spatial_shape(hdr: NiftiHeader) -> tuple[int, int, int]:
    ndim = hdr.dim[0]
    if ndim < 3:
        raise DimensionError(f"dim[0] = {ndim}: fewer than three spatial dimensions")
    trailing = hdr.dim[4 : ndim + 1]
    if any(d != 1 for d in trailing):
        raise DimensionError(
            f"dim[0] = {ndim} with non-singleton trailing dims {trailing}; 4D+ series are not supported"
        )
    shape = hdr.shape
    if min(shape) < 1:
        raise ParseError(f"non-positive spatial dims {shape}")
    return shape


def read_nifti(path) -> Volume3D:
    """Read a ``.nii``/``.nii.gz`` (or ``.hdr``/``.img`` pair) as a raw-HU volume.

    Stored values are scaled by ``scl_slope``/``scl_inter``; a zero or
    non-finite slope means no scaling.
    """
    path = Path(path)
    raw = _load_bytes(path)
    hdr = parse_header(raw)
    shape = _spatial_shape(hdr)
    if hdr.datatype not in DATATYPES:
        raise UnsupportedDatatype(f"datatype code {hdr.datatype} is not supported")
    dtype = DATATYPES[hdr.datatype].newbyteorder(hdr.byteorder)

    if hdr.magic == b"ni1\x00":
        img = _paired_image_path(path)
        payload = _load_bytes(img)
        offset = int(hdr.vox_offset)
    else:
        payload = raw
        offset = int(hdr.vox_offset)
        if offset < HEADER_SIZE:
            raise ParseError(f"vox_offset {hdr.vox_offset} lies inside the header")

    count = shape[0] * shape[1] * shape[2]
    nbytes = count * dtype.itemsize
    if len(payload) < offset + nbytes:
        raise ParseError(
            f"payload truncated: need {nbytes} bytes at offset {offset}, file has {len(payload) - offset}"
        )
    stored = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)
    stored = stored.reshape(shape, order="F")

    slope, inter = hdr.scl_slope, hdr.scl_inter
    if slope == 0 or not np.isfinite(slope):
        slope = 1.0
    if not np.isfinite(inter):
        inter = 0.0
    if slope == 1.0 and inter == 0.0:
        data = stored.astype(np.float32)
    else:
        data = (stored.astype(np.float64) * slope + inter).astype(np.float32)

    spacing = tuple(abs(p) if p != 0 else 1.0 for p in hdr.pixdim[1:4])
    return Volume3D(data, spacing=spacing, affine=hdr.affine(), unit=Unit.RAW_HU)


def _paired_image_path(path: Path) -> Path:
    name = path.name
    for hdr_suffix, img_suffix in ((".hdr.gz", ".img.gz"), (".hdr", ".img")):
        if name.endswith(hdr_suffix):
            candidate = path.with_name(name[: -len(hdr_suffix)] + img_suffix)
            if candidate.exists():
                return candidate
    raise ParseError(f"{path}: paired header without a matching .img file")


def encode_header(shape, spacing, affine, datatype: int = 16) -> bytes:
    """Little-endian single-file header plus the 4-byte empty extension flag."""
    if datatype not in DATATYPES:
        raise UnsupportedDatatype(f"datatype code {datatype} is not supported")
    buf = bytearray(DEFAULT_VOX_OFFSET)
    affine = np.asarray(affine, dtype=np.float64)
    dim = (3, *shape, 1, 1, 1, 1)
    pixdim = (1.0, *spacing, 1.0, 1.0, 1.0, 1.0)
    values = {
        "sizeof_hdr": HEADER_SIZE,
        "dim_info": 0,
        "dim": dim,
        "intent_p": (0.0, 0.0, 0.0),
        "intent_code": 0,
        "datatype": datatype,
        "bitpix": DATATYPES[datatype].itemsize * 8,
        "slice_start": 0,
        "pixdim": pixdim,
        "vox_offset": float(DEFAULT_VOX_OFFSET),
        "scl_slope": 1.0,
        "scl_inter": 0.0,
        "slice_end": 0,
        "slice_code": 0,
        "xyzt_units": 2,  # millimetres
        "cal_max": 0.0,
        "cal_min": 0.0,
        "descrip": b"humask",
        "qform_code": 0,
        "sform_code": 1,
        "quatern": (0.0, 0.0, 0.0),
        "qoffset": (0.0, 0.0, 0.0),
        "srow_x": tuple(affine[0]),
        "srow_y": tuple(affine[1]),
        "srow_z": tuple(affine[2]),
        "magic": b"n+1\x00",
    }
    for name, code, offset in _FIELDS:
        value = values[name]
        args = value if isinstance(value, tuple) else (value,)
        struct.pack_into("<" + code, buf, offset, *args)
    return bytes(buf)


def write_nifti(v: Volume3D, path, gzip: bool | None = None, datatype: int = 16) -> None:
    """Write ``v`` as single-file NIfTI-1.

    The default datatype is float32 (code 16), which ``read_nifti`` inverts
    bit-exactly. Integer codes are meant for label volumes. ``gzip=None``
    compresses when the filename ends in ``.gz``.
    """
    path = Path(path)
    if gzip is None:
        gzip = path.name.endswith(".gz")
    dtype = DATATYPES.get(datatype)
    if dtype is None:
        raise UnsupportedDatatype(f"datatype code {datatype} is not supported")
    data = v.data
    if dtype.kind in "iu":
        info = np.iinfo(dtype)
        if data.size and (data.min() < info.min or data.max() > info.max or not np.all(data == np.round(data))):
            raise ValueError(f"volume values do not fit datatype {datatype} exactly")
    payload = np.asarray(data, dtype=dtype.newbyteorder("<")).tobytes(order="F")
    blob = encode_header(v.shape, v.spacing, v.affine, datatype) + payload
    if gzip:
        blob = _gzip.compress(blob, mtime=0)
    try:
        path.write_bytes(blob)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_labels(labels: np.ndarray, path, like: Volume3D | None = None, gzip: bool | None = None) -> None:
    """Write an integer label volume as int16 NIfTI."""
    spacing = like.spacing if like is not None else (1.0, 1.0, 1.0)
    affine = like.affine if like is not None else np.eye(4)
    write_nifti(Volume3D(labels, spacing, affine), path, gzip=gzip, datatype=4)


def read_labels(path) -> np.ndarray:
    vol = read_nifti(path)
    return np.rint(vol.data).astype(np.int32)
