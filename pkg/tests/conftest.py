import struct

import numpy as np
import pytest

from fairbench.corpus import Corpus, EmbeddingSet, ImageRecord


def write_embedding_bytes(path, entries, dim=None, magic=b"FEMB", version=1,
                          count=None, truncate=None):
    """Hand-rolled embedding file writer, independent of the package writer."""
    items = list(entries.items())
    if dim is None:
        dim = len(items[0][1]) if items else 1
    blob = bytearray()
    blob += magic
    blob.append(version)
    blob += struct.pack("<II", len(items) if count is None else count, dim)
    for image_id, vec in items:
        blob += struct.pack("<Q", image_id)
        blob += struct.pack(f"<{len(vec)}f", *vec)
    if truncate is not None:
        blob = blob[:truncate]
    with open(path, "wb") as f:
        f.write(bytes(blob))


def write_metadata_csv(path, rows, header=None):
    """rows: list of 8-tuples already rendered as strings."""
    default = "image_id,identity_id,gender,ethnicity,age_group,pitch_deg,yaw_deg,roll_deg"
    lines = [header if header is not None else default]
    lines += [",".join(str(c) for c in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(lines) + "\n")


def make_corpus(records, vectors):
    """In-memory corpus: records are (image_id, identity_id, gender,
    ethnicity, age_group[, pose]); vectors is image_id -> sequence."""
    images = {}
    for rec in records:
        pose = rec[5] if len(rec) > 5 else None
        images[rec[0]] = ImageRecord(
            image_id=rec[0], identity_id=rec[1], gender=rec[2],
            ethnicity=rec[3], age_group=rec[4], pose=pose,
        )
    embeddings = EmbeddingSet.from_dict({k: np.asarray(v, float) for k, v in vectors.items()})
    return Corpus(embeddings=embeddings, images=images)


def unit(*components):
    v = np.asarray(components, dtype=float)
    return v / np.linalg.norm(v)


@pytest.fixture
def small_corpus():
    """2 identities x 2 images on the unit circle, demographics mixed."""
    vectors = {
        1: unit(1.0, 0.0),
        2: unit(0.9, 0.1),
        3: unit(-1.0, 0.2),
        4: unit(-1.0, 0.0),
    }
    records = [
        (1, 10, "Male", "White", "Young", (0.0, 0.0, 0.0)),
        (2, 10, "Male", "White", "Adult", (0.0, 30.0, 0.0)),
        (3, 20, "Female", "Black", "Young", (10.0, -5.0, 2.0)),
        (4, 20, "Female", "Black", "Senior", None),
    ]
    return make_corpus(records, vectors)
