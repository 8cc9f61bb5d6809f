"""Dataset containers, on-disk formats, fingerprints and selection manifests.

Binary layout (all little-endian)::

    "CNMS" | version u16 (=1) | dim u32 | group_count u32
    per group:  id_len u16 | id (UTF-8) | face_count u32
    per face:   face_index u32 | dim x f32

JSONL layout: one object per identity,
``{"id": str, "faces": [{"i": int, "v": [float, ...]}, ...]}``.

The dataset fingerprint is 64-bit FNV-1a over the binary serialization,
so it covers dim, ids, face indices and every feature byte.
"""

from __future__ import annotations

import io
import json
import logging
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import __version__
from .errors import (
    DimensionMismatch,
    DuplicateIdentity,
    EmptyGroup,
    FingerprintMismatch,
    FormatError,
    ManifestError,
    NonFinite,
    NormError,
    UnknownFaceIndex,
    UnknownIdentity,
    ZeroNorm,
)

log = logging.getLogger(__name__)

MAGIC = b"CNMS"
VERSION = 1
NORM_TOL = 1e-4

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_HEADER = struct.Struct("<4sHII")


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    """64-bit FNV-1a hash; pass the previous value as ``h`` to continue a stream."""
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def format_fingerprint(fp: int) -> str:
    return f"{fp:016x}"


def parse_fingerprint(text: str) -> int:
    try:
        return int(text, 16)
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"bad fingerprint {text!r}") from exc


@dataclass(frozen=True, eq=False)
class IdentityGroup:
    """Faces of a single identity, held in ascending ``face_index`` order."""

    identity_id: str
    indices: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64).reshape(-1)
        feats = np.array(self.features, dtype=np.float32)
        if idx.size == 0:
            raise EmptyGroup(f"identity {self.identity_id!r} has no faces")
        if feats.ndim != 2 or feats.shape[0] != idx.size:
            raise DimensionMismatch(
                f"identity {self.identity_id!r}: {idx.size} indices but features of shape {feats.shape}"
            )
        if idx.min() < 0 or idx.max() > 0xFFFFFFFF:
            raise FormatError(f"identity {self.identity_id!r}: face index outside u32 range")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise FormatError(f"identity {self.identity_id!r}: face indices not strictly increasing")
        if not np.all(np.isfinite(feats)):
            raise NonFinite(f"identity {self.identity_id!r}: non-finite feature component")
        idx = idx.astype(np.uint32)
        idx.setflags(write=False)
        feats.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "features", feats)

    def __len__(self) -> int:
        return int(self.indices.size)

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, positions) -> "IdentityGroup":
        """Group restricted to the given row positions (kept in index order)."""
        pos = np.sort(np.asarray(positions, dtype=np.int64))
        return IdentityGroup(self.identity_id, self.indices[pos], self.features[pos])

    def positions_of(self, face_indices) -> np.ndarray:
        """Row positions of ``face_indices``; raises UnknownFaceIndex if absent."""
        wanted = np.asarray(face_indices, dtype=np.int64)
        pos = np.searchsorted(self.indices, wanted)
        ok = (pos < self.indices.size) & (self.indices[np.minimum(pos, self.indices.size - 1)] == wanted)
        if not np.all(ok):
            missing = int(wanted[~ok][0])
            raise UnknownFaceIndex(f"identity {self.identity_id!r} has no face {missing}")
        return pos


@dataclass(frozen=True, eq=False)
class Dataset:
    dim: int
    groups: tuple
    source: str = ""
    _by_id: dict = field(init=False, repr=False)

    def __post_init__(self):
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        if self.dim < 2:
            raise FormatError(f"dim must be >= 2, got {self.dim}")
        if not groups:
            raise EmptyGroup("dataset has no identities")
        by_id = {}
        for g in groups:
            if g.identity_id in by_id:
                raise DuplicateIdentity(f"identity {g.identity_id!r} appears twice")
            if g.dim != self.dim:
                raise DimensionMismatch(f"identity {g.identity_id!r} has dim {g.dim}, dataset dim {self.dim}")
            by_id[g.identity_id] = g
        object.__setattr__(self, "_by_id", by_id)

    def __len__(self) -> int:
        return len(self.groups)

    def __getitem__(self, identity_id: str) -> IdentityGroup:
        try:
            return self._by_id[identity_id]
        except KeyError:
            raise UnknownIdentity(f"no identity {identity_id!r}") from None

    def __contains__(self, identity_id) -> bool:
        return identity_id in self._by_id

    @property
    def identity_ids(self) -> list[str]:
        return [g.identity_id for g in self.groups]

    @property
    def face_count(self) -> int:
        return sum(len(g) for g in self.groups)

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        _write_binary(self, buf)
        return buf.getvalue()

    @cached_property
    def fingerprint(self) -> int:
        return fnv1a64(self.to_bytes())

    def sorted_groups(self) -> list[IdentityGroup]:
        return sorted(self.groups, key=lambda g: g.identity_id)


# ---------------------------------------------------------------- formats


def _face_dtype(dim: int) -> np.dtype:
    return np.dtype([("i", "<u4"), ("v", "<f4", (dim,))])


def _write_binary(ds: Dataset, out) -> None:
    out.write(_HEADER.pack(MAGIC, VERSION, ds.dim, len(ds.groups)))
    dt = _face_dtype(ds.dim)
    for g in ds.groups:
        ident = g.identity_id.encode("utf-8")
        if len(ident) > 0xFFFF:
            raise FormatError(f"identity id too long ({len(ident)} bytes)")
        out.write(struct.pack("<H", len(ident)))
        out.write(ident)
        out.write(struct.pack("<I", len(g)))
        rec = np.empty(len(g), dtype=dt)
        rec["i"] = g.indices
        rec["v"] = g.features
        out.write(rec.tobytes())


def _read_binary(data: bytes, source: str) -> tuple[int, list]:
    if len(data) < _HEADER.size:
        raise FormatError(f"{source}: truncated header")
    magic, version, dim, n_groups = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    if dim < 2:
        raise FormatError(f"{source}: dim must be >= 2, got {dim}")
    dt = _face_dtype(dim)
    off = _HEADER.size
    raw_groups = []
    for gi in range(n_groups):
        if off + 2 > len(data):
            raise FormatError(f"{source}: truncated at group {gi}")
        (id_len,) = struct.unpack_from("<H", data, off)
        off += 2
        if off + id_len + 4 > len(data):
            raise FormatError(f"{source}: truncated at group {gi}")
        try:
            ident = data[off : off + id_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{source}: group {gi} id is not UTF-8") from exc
        off += id_len
        (n_faces,) = struct.unpack_from("<I", data, off)
        off += 4
        nbytes = n_faces * dt.itemsize
        if off + nbytes > len(data):
            raise FormatError(f"{source}: truncated in faces of {ident!r}")
        rec = np.frombuffer(data, dtype=dt, count=n_faces, offset=off)
        off += nbytes
        raw_groups.append((ident, rec["i"].copy(), rec["v"].copy()))
    if off != len(data):
        raise FormatError(f"{source}: {len(data) - off} trailing bytes")
    return dim, raw_groups


def _write_jsonl(ds: Dataset, out) -> None:
    for g in ds.groups:
        faces = [{"i": int(i), "v": [float(x) for x in v]} for i, v in zip(g.indices, g.features)]
        out.write(json.dumps({"id": g.identity_id, "faces": faces}, ensure_ascii=False))
        out.write("\n")


def _read_jsonl(text: str, source: str) -> tuple[int, list]:
    raw_groups = []
    dim = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            ident = obj["id"]
            faces = obj["faces"]
            idx = [f["i"] for f in faces]
            vecs = [f["v"] for f in faces]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"{source}:{lineno}: {exc}") from exc
        if not isinstance(ident, str):
            raise FormatError(f"{source}:{lineno}: id must be a string")
        if not faces:
            raise FormatError(f"{source}:{lineno}: identity {ident!r} has no faces")
        try:
            feats = np.asarray(vecs, dtype=np.float32)
            idx = np.asarray(idx, dtype=np.int64)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{source}:{lineno}: {exc}") from exc
        if feats.ndim != 2:
            raise FormatError(f"{source}:{lineno}: ragged feature vectors in {ident!r}")
        if dim is None:
            dim = feats.shape[1]
        elif feats.shape[1] != dim:
            raise FormatError(f"{source}:{lineno}: dim {feats.shape[1]} differs from {dim}")
        raw_groups.append((ident, idx, feats))
    if dim is None:
        raise FormatError(f"{source}: no identities")
    return dim, raw_groups


def sniff_format(path) -> str:
    """'binary' when the file starts with the magic bytes, otherwise 'jsonl'."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    return "binary" if head == MAGIC else "jsonl"


def check_unit_norm(ds: Dataset, tol: float = NORM_TOL) -> None:
    for g in ds.groups:
        norms = np.sqrt(np.einsum("ij,ij->i", g.features.astype(np.float64), g.features.astype(np.float64)))
        bad = np.flatnonzero(np.abs(norms - 1.0) > tol)
        if bad.size:
            b = int(bad[0])
            raise NormError(
                f"identity {g.identity_id!r} face {int(g.indices[b])} has norm {norms[b]:.6f}; "
                "pass normalize=True to rescale on ingestion"
            )


def _normalized(ident, idx, feats):
    m = feats.astype(np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", m, m))
    bad = np.flatnonzero(norms < 1e-12)
    if bad.size:
        raise ZeroNorm(f"identity {ident!r} face {int(idx[bad[0]])} has zero norm")
    return (m / norms[:, None]).astype(np.float32)


def read_dataset(path, format: str | None = None, normalize: bool = False) -> Dataset:
    """Load and validate a dataset.

    ``format`` is ``"binary"``, ``"jsonl"`` or None to sniff the magic bytes.
    Without ``normalize`` every feature must already be unit-norm (within 1e-4).
    """
    path = Path(path)
    fmt = format or sniff_format(path)
    data = path.read_bytes()
    if fmt == "binary":
        dim, raw = _read_binary(data, str(path))
    elif fmt == "jsonl":
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: not UTF-8 text") from exc
        dim, raw = _read_jsonl(text, str(path))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    groups = []
    for ident, idx, feats in raw:
        if not np.all(np.isfinite(feats)):
            raise NonFinite(f"identity {ident!r}: non-finite feature component")
        if normalize:
            feats = _normalized(ident, idx, feats)
        groups.append(IdentityGroup(ident, idx, feats))
    ds = Dataset(dim=dim, groups=groups, source=str(path))
    if not normalize:
        check_unit_norm(ds)
    log.debug("read %s: %d identities, %d faces", path, len(ds), ds.face_count)
    return ds


def write_dataset(ds: Dataset, path, format: str = "binary") -> None:
    path = Path(path)
    if format == "binary":
        with open(path, "wb") as fh:
            _write_binary(ds, fh)
    elif format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            _write_jsonl(ds, fh)
    else:
        raise ValueError(f"unknown format {format!r}")


# -------------------------------------------------------------- manifests


@dataclass(frozen=True, eq=False)
class SelectionManifest:
    """Retained face indices per identity, plus the sampler that chose them."""

    dataset_fingerprint: int
    sampler: dict
    retained: dict
    original_count: int

    def __post_init__(self):
        canon = {}
        for ident in sorted(self.retained):
            idx = sorted(int(i) for i in self.retained[ident])
            if not idx:
                raise ManifestError(f"identity {ident!r} retains no faces")
            if len(set(idx)) != len(idx):
                raise ManifestError(f"identity {ident!r} lists a face twice")
            canon[ident] = idx
        object.__setattr__(self, "retained", canon)
        if self.retained_count > self.original_count:
            raise ManifestError("retained count exceeds original count")

    @property
    def retained_count(self) -> int:
        return sum(len(v) for v in self.retained.values())

    @property
    def ratio(self) -> float:
        return self.retained_count / self.original_count

    def validate(self, ds: Dataset) -> None:
        """Check this manifest against ``ds``; raises on any inconsistency."""
        if self.dataset_fingerprint != ds.fingerprint:
            raise FingerprintMismatch(
                f"manifest is for dataset {format_fingerprint(self.dataset_fingerprint)}, "
                f"got {format_fingerprint(ds.fingerprint)}"
            )
        for ident, idx in self.retained.items():
            ds[ident].positions_of(idx)
        missing = [i for i in ds.identity_ids if i not in self.retained]
        if missing:
            raise ManifestError(f"identity {missing[0]!r} missing from manifest")
        if self.original_count != ds.face_count:
            raise ManifestError(f"original count {self.original_count} != dataset faces {ds.face_count}")

    def to_dict(self) -> dict:
        return {
            "tool_version": __version__,
            "dataset_fingerprint": format_fingerprint(self.dataset_fingerprint),
            "sampler": self.sampler,
            "identities": self.retained,
            "totals": {
                "retained": self.retained_count,
                "original": self.original_count,
                "ratio": self.ratio,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, obj: Mapping) -> "SelectionManifest":
        try:
            m = cls(
                dataset_fingerprint=parse_fingerprint(obj["dataset_fingerprint"]),
                sampler=dict(obj["sampler"]),
                retained={str(k): list(v) for k, v in obj["identities"].items()},
                original_count=int(obj["totals"]["original"]),
            )
            totals = obj["totals"]
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ManifestError(f"malformed manifest: {exc}") from exc
        if int(totals["retained"]) != m.retained_count:
            raise ManifestError("totals.retained disagrees with identity lists")
        return m

    @classmethod
    def from_json(cls, text: str) -> "SelectionManifest":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not JSON: {exc}") from exc
        return cls.from_dict(obj)


def build_manifest(ds: Dataset, retained: Mapping[str, Iterable[int]], sampler: dict) -> SelectionManifest:
    m = SelectionManifest(
        dataset_fingerprint=ds.fingerprint,
        sampler=sampler,
        retained={k: list(v) for k, v in retained.items()},
        original_count=ds.face_count,
    )
    m.validate(ds)
    return m


def write_manifest(m: SelectionManifest, path) -> None:
    Path(path).write_text(m.to_json(), encoding="utf-8")


def read_manifest(path) -> SelectionManifest:
    return SelectionManifest.from_json(Path(path).read_text(encoding="utf-8"))


def restrict(ds: Dataset, retained: Mapping[str, Iterable[int]]) -> Dataset:
    """Keep only the listed faces; identity order and face order are preserved."""
    groups = []
    for g in ds.groups:
        if g.identity_id not in retained:
            continue
        groups.append(g.subset(g.positions_of(list(retained[g.identity_id]))))
    unknown = set(retained) - set(ds.identity_ids)
    if unknown:
        raise UnknownIdentity(f"no identity {sorted(unknown)[0]!r}")
    return Dataset(dim=ds.dim, groups=groups, source=ds.source)


def apply_manifest(ds: Dataset, m: SelectionManifest) -> Dataset:
    m.validate(ds)
    return restrict(ds, m.retained)
