"""Data model and file ingestion for embeddings and demographic metadata.

A corpus couples an embedding set (one fixed-dimension vector per image)
with per-image demographic/pose records and derived per-identity records.
Loading validates everything eagerly; a Corpus in hand is safe to share
read-only across workers.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DanglingId,
    DimensionMismatch,
    InconsistentIdentityAttribute,
    MalformedFile,
    ZeroVector,
)

GENDERS = ("Female", "Male")
ETHNICITIES = ("Asian", "Black", "Indian", "White")
AGE_GROUPS = ("Young", "Adult", "Senior")

EMBEDDING_MAGIC = b"FEMB"
EMBEDDING_VERSION = 1

METADATA_COLUMNS = (
    "image_id",
    "identity_id",
    "gender",
    "ethnicity",
    "age_group",
    "pitch_deg",
    "yaw_deg",
    "roll_deg",
)

_U64_MAX = 2**64 - 1


class EmbeddingSet:
    """Image-id-indexed collection of equal-dimension real vectors.

    Vectors are held as a float64 matrix in ascending-id order; the binary
    file format stores float32, which converts to float64 exactly.
    """

    def __init__(self, ids, matrix):
        ids = np.asarray(ids, dtype=np.uint64)
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] < 1:
            raise DimensionMismatch(f"expected (n, dim>=1) matrix, got shape {matrix.shape}")
        if ids.shape[0] != matrix.shape[0]:
            raise DimensionMismatch(
                f"{ids.shape[0]} ids for {matrix.shape[0]} vectors"
            )
        if len(set(ids.tolist())) != len(ids):
            raise MalformedFile("duplicate image_id in embedding set")
        order = np.argsort(ids, kind="stable")
        self.ids = ids[order]
        self.matrix = np.ascontiguousarray(matrix[order])
        self._row = {int(i): r for r, i in enumerate(self.ids)}
        self._unit_checked: bool | None = None

    @classmethod
    def from_dict(cls, entries: dict[int, np.ndarray]) -> "EmbeddingSet":
        ids = list(entries.keys())
        vecs = [np.asarray(entries[i], dtype=np.float64) for i in ids]
        dims = {v.shape for v in vecs}
        if len(dims) > 1:
            raise DimensionMismatch(f"mixed vector shapes {sorted(dims)}")
        return cls(np.array(ids, dtype=np.uint64), np.vstack(vecs) if vecs else np.zeros((0, 1)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def __contains__(self, image_id: int) -> bool:
        return int(image_id) in self._row

    def row(self, image_id: int) -> int:
        return self._row[int(image_id)]

    def vector(self, image_id: int) -> np.ndarray:
        return self.matrix[self._row[int(image_id)]]

    def norms(self) -> np.ndarray:
        return np.sqrt((self.matrix**2).sum(axis=1))

    def is_normalized(self, tol: float = 1e-6) -> bool:
        """True when every vector has Euclidean norm within tol of 1 (cached)."""
        if self._unit_checked is None:
            n = self.norms()
            self._unit_checked = bool(len(self) == 0 or np.all(np.abs(n - 1.0) <= tol))
        return self._unit_checked


def normalize(embeddings: EmbeddingSet) -> EmbeddingSet:
    """Scale every vector to unit Euclidean norm.

    Raises ZeroVector (with the offending image_id) on a zero vector.
    Idempotent to within 1e-12 per component.
    """
    norms = embeddings.norms()
    zero = np.where(norms == 0.0)[0]
    if len(zero):
        raise ZeroVector(f"image_id {int(embeddings.ids[zero[0]])} has zero norm")
    return EmbeddingSet(embeddings.ids.copy(), embeddings.matrix / norms[:, None])


@dataclass(frozen=True)
class ImageRecord:
    image_id: int
    identity_id: int
    gender: str
    ethnicity: str
    age_group: str
    pose: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class IdentityRecord:
    identity_id: int
    image_ids: tuple[int, ...]
    gender: str
    ethnicity: str


@dataclass
class Corpus:
    embeddings: EmbeddingSet
    images: dict[int, ImageRecord]
    identities: dict[int, IdentityRecord] = field(default_factory=dict)

    def __post_init__(self):
        if not self.identities:
            self.identities = derive_identities(self.images)
        emb_ids = set(int(i) for i in self.embeddings.ids)
        meta_ids = set(self.images.keys())
        missing_meta = emb_ids - meta_ids
        missing_emb = meta_ids - emb_ids
        if missing_meta:
            raise DanglingId(f"embedding without metadata: image_id {min(missing_meta)}")
        if missing_emb:
            raise DanglingId(f"metadata without embedding: image_id {min(missing_emb)}")

    def identity_of(self, image_id: int) -> int:
        return self.images[int(image_id)].identity_id


def derive_identities(images: dict[int, ImageRecord]) -> dict[int, IdentityRecord]:
    """Group images by identity, enforcing constant gender/ethnicity."""
    grouped: dict[int, list[ImageRecord]] = {}
    for rec in images.values():
        grouped.setdefault(rec.identity_id, []).append(rec)
    identities = {}
    for identity_id, recs in grouped.items():
        genders = {r.gender for r in recs}
        ethnicities = {r.ethnicity for r in recs}
        if len(genders) > 1:
            raise InconsistentIdentityAttribute(
                f"identity {identity_id} has genders {sorted(genders)}"
            )
        if len(ethnicities) > 1:
            raise InconsistentIdentityAttribute(
                f"identity {identity_id} has ethnicities {sorted(ethnicities)}"
            )
        identities[identity_id] = IdentityRecord(
            identity_id=identity_id,
            image_ids=tuple(sorted(r.image_id for r in recs)),
            gender=recs[0].gender,
            ethnicity=recs[0].ethnicity,
        )
    return identities


# -- binary embedding file ----------------------------------------------

def read_embeddings(path) -> EmbeddingSet:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 13:
        raise MalformedFile(f"{path}: shorter than the fixed header")
    if blob[:4] != EMBEDDING_MAGIC:
        raise MalformedFile(f"{path}: bad magic {blob[:4]!r}")
    if blob[4] != EMBEDDING_VERSION:
        raise MalformedFile(f"{path}: unsupported version {blob[4]}")
    count, dim = struct.unpack_from("<II", blob, 5)
    if dim < 1:
        raise DimensionMismatch(f"{path}: header dim {dim} < 1")
    record = 8 + 4 * dim
    expected = 13 + count * record
    if len(blob) != expected:
        raise MalformedFile(f"{path}: expected {expected} bytes, found {len(blob)}")
    body = blob[13:]
    # ids and floats interleave, so view the body as one structured array
    rec_dtype = np.dtype([("id", "<u8"), ("vec", "<f4", (dim,))])
    records = np.frombuffer(body, dtype=rec_dtype, count=count)
    ids = records["id"].astype(np.uint64)
    matrix = records["vec"].astype(np.float64)
    return EmbeddingSet(ids, matrix)


def write_embeddings(embeddings: EmbeddingSet, path) -> None:
    rec_dtype = np.dtype([("id", "<u8"), ("vec", "<f4", (embeddings.dim,))])
    records = np.zeros(len(embeddings), dtype=rec_dtype)
    records["id"] = embeddings.ids
    records["vec"] = embeddings.matrix.astype(np.float32)
    with open(path, "wb") as f:
        f.write(EMBEDDING_MAGIC)
        f.write(bytes([EMBEDDING_VERSION]))
        f.write(struct.pack("<II", len(embeddings), embeddings.dim))
        f.write(records.tobytes())


# -- metadata CSV --------------------------------------------------------

def _parse_id(text: str, column: str, line: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise MalformedFile(f"line {line}: {column} {text!r} is not an integer") from None
    if not 0 <= value <= _U64_MAX:
        raise MalformedFile(f"line {line}: {column} {value} outside u64 range")
    return value


def read_metadata(path) -> dict[int, ImageRecord]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedFile(f"{path}: empty file") from None
        if tuple(header) != METADATA_COLUMNS:
            raise MalformedFile(f"{path}: header {header} != {list(METADATA_COLUMNS)}")
        images: dict[int, ImageRecord] = {}
        for line, row in enumerate(reader, start=2):
            if len(row) != len(METADATA_COLUMNS):
                raise MalformedFile(f"{path} line {line}: {len(row)} fields")
            image_id = _parse_id(row[0], "image_id", line)
            identity_id = _parse_id(row[1], "identity_id", line)
            gender, ethnicity, age_group = row[2], row[3], row[4]
            if gender not in GENDERS:
                raise MalformedFile(f"line {line}: gender {gender!r} not in {GENDERS}")
            if ethnicity not in ETHNICITIES:
                raise MalformedFile(f"line {line}: ethnicity {ethnicity!r} not in {ETHNICITIES}")
            if age_group not in AGE_GROUPS:
                raise MalformedFile(f"line {line}: age_group {age_group!r} not in {AGE_GROUPS}")
            pose_fields = row[5:8]
            empties = sum(1 for p in pose_fields if p == "")
            if empties == 3:
                pose = None
            elif empties == 0:
                try:
                    pose = tuple(float(p) for p in pose_fields)
                except ValueError:
                    raise MalformedFile(f"line {line}: non-numeric pose {pose_fields}") from None
                if not all(np.isfinite(a) and -180.0 <= a <= 180.0 for a in pose):
                    raise MalformedFile(f"line {line}: pose {pose} outside [-180, 180]")
            else:
                raise MalformedFile(f"line {line}: pose fields must be empty together")
            if image_id in images:
                raise MalformedFile(f"line {line}: duplicate image_id {image_id}")
            images[image_id] = ImageRecord(
                image_id=image_id,
                identity_id=identity_id,
                gender=gender,
                ethnicity=ethnicity,
                age_group=age_group,
                pose=pose,
            )
    return images


def write_metadata(images: dict[int, ImageRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(METADATA_COLUMNS)
        for image_id in sorted(images):
            rec = images[image_id]
            pose = ["", "", ""] if rec.pose is None else [repr(a) for a in rec.pose]
            writer.writerow(
                [rec.image_id, rec.identity_id, rec.gender, rec.ethnicity, rec.age_group, *pose]
            )


def load_corpus(embedding_path, metadata_path) -> Corpus:
    """Load and cross-validate an embedding file plus its metadata CSV."""
    embeddings = read_embeddings(embedding_path)
    images = read_metadata(metadata_path)
    return Corpus(embeddings=embeddings, images=images)


def save_corpus(corpus: Corpus, embedding_path, metadata_path) -> None:
    write_embeddings(corpus.embeddings, embedding_path)
    write_metadata(corpus.images, metadata_path)
