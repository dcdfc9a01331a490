"""Synthetic corpus generation for demos and end-to-end testing.

Builds a small but fully-wired audit input set: a manifest of identity +
profession records over two systems (with tiny PNG files on disk), unit
embeddings with controllable identity structure, template captions and VQA
answers, a labor-statistics CSV, and a ready-to-run audit config. All
content is a deterministic function of the seed.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from . import vocab
from .corpus import BLSRow, BLSTable, Corpus, ImageRecord, save_bls, save_manifest
from .corpus import enumerate_identity_prompts, enumerate_profession_prompts
from .gateway import Annotation, EmbeddingMatrix, save_annotations, save_embeddings
from .pixels import RgbImage

FIXTURE_SYSTEMS = ("alpha", "beta")

# (profession, pct_women, pct_black) for the demo labor table
FIXTURE_BLS = [
    ("plumber", 2.1, 8.0),
    ("carpenter", 3.5, 6.5),
    ("engineer", 15.4, 5.1),
    ("taxi driver", 12.0, 24.9),
    ("cook", 39.7, 15.8),
    ("singer", 24.0, 12.5),
    ("teacher", 79.2, 10.0),
    ("receptionist", 90.0, 9.6),
]

_GENDER_ANCHOR = {"woman": 0, "man": 1, "non-binary person": 2, "unspecified": 3}


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "little")


def _anchor_index(gender_phrase: str, ethnicity_phrase: str, n_anchors: int) -> int:
    """Identity embeddings cluster primarily by gender with an ethnicity
    sub-split, echoing how prompt attributes shape the real image space."""
    base = _GENDER_ANCHOR[gender_phrase] * 2
    sub = _stable_hash(ethnicity_phrase) % 2
    return (base + sub) % n_anchors


def make_audit_fixture(
    out_dir: str | Path,
    seed: int = 0,
    identity_seeds: int = 1,
    profession_seeds: int = 4,
    dim: int = 16,
    write_images: bool = True,
) -> dict[str, Path]:
    """Write the full synthetic input set; returns a name -> path map.

    Default sizes give 68 x 1 x 2 = 136 identity records plus
    8 x 4 x 2 = 64 profession records (200 images total).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_anchors = 8
    anchors = rng.normal(size=(n_anchors, dim))
    anchors /= np.linalg.norm(anchors, axis=1, keepdims=True)

    professions = [name for name, _, _ in FIXTURE_BLS]
    identity_specs = enumerate_identity_prompts()
    profession_specs = enumerate_profession_prompts(professions)

    records: list[ImageRecord] = []
    image_dir = out / "images"
    if write_images:
        image_dir.mkdir(exist_ok=True)

    def add_record(system: str, tag: str, spec, seed_index: int) -> ImageRecord:
        image_id = f"{system}-{tag}-s{seed_index}"
        rel = f"images/{image_id}.png"
        # manifest-relative path keeps the corpus portable
        record = ImageRecord(
            id=image_id, file=rel, system=system, prompt=spec, seed_index=seed_index
        )
        records.append(record)
        if write_images:
            px = rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8)
            RgbImage(width=4, height=4, pixels=px).save(out / rel)
        return record

    identity_records, profession_records = [], []
    for system in FIXTURE_SYSTEMS:
        for i, spec in enumerate(identity_specs):
            for s in range(identity_seeds):
                identity_records.append(add_record(system, f"id{i:02d}", spec, s))
        for i, spec in enumerate(profession_specs):
            for s in range(profession_seeds):
                profession_records.append(add_record(system, f"pr{i:02d}", spec, s))

    corpus = Corpus(records)
    manifest_path = out / "corpus.jsonl"
    save_manifest(corpus, manifest_path)

    def identity_row(record: ImageRecord) -> np.ndarray:
        idx = _anchor_index(
            record.prompt.gender_phrase, record.prompt.ethnicity_phrase, n_anchors
        )
        row = anchors[idx] + 0.15 * rng.normal(size=dim)
        return row / np.linalg.norm(row)

    id_rows = np.stack([identity_row(r) for r in identity_records])
    identities_emb = EmbeddingMatrix(
        ids=[r.id for r in identity_records], rows=id_rows.astype(np.float32)
    )
    identities_path = out / "identities.emb"
    save_embeddings(identities_emb, identities_path)

    def profession_row(record: ImageRecord) -> np.ndarray:
        # "alpha" over-represents the man-anchored regions; "beta" is mixed
        if record.system == "alpha":
            idx = 2 if rng.random() < 0.8 else int(rng.integers(n_anchors))
        else:
            idx = int(rng.integers(n_anchors))
        row = anchors[idx] + 0.15 * rng.normal(size=dim)
        return row / np.linalg.norm(row)

    prof_rows = np.stack([profession_row(r) for r in profession_records])
    professions_emb = EmbeddingMatrix(
        ids=[r.id for r in profession_records], rows=prof_rows.astype(np.float32)
    )
    professions_path = out / "professions.emb"
    save_embeddings(professions_emb, professions_path)

    woman_captions = ("a woman at work", "portrait of a woman", "a lady in a room")
    man_captions = ("a man at work", "portrait of a man", "a guy in an office")
    neutral_captions = ("a person at work", "someone in a room")
    annotations = []
    for record in records:
        gender = record.prompt.gender_phrase
        if record.prompt.kind == "profession":
            biased_man = record.system == "alpha"
            if rng.random() < (0.75 if biased_man else 0.5):
                caption = man_captions[int(rng.integers(len(man_captions)))]
                vqa_gender = "man"
            else:
                caption = woman_captions[int(rng.integers(len(woman_captions)))]
                vqa_gender = "woman"
            if rng.random() < 0.2:
                caption += f", a {record.prompt.profession}"
        elif gender == "woman":
            caption, vqa_gender = woman_captions[0], "woman"
        elif gender == "man":
            caption, vqa_gender = man_captions[0], "man"
        else:
            caption, vqa_gender = neutral_captions[0], "person"
        annotations.append(
            Annotation(
                image_id=record.id,
                caption=caption,
                vqa={
                    "appearance": caption.split()[1],
                    "gender": vqa_gender,
                    "ethnicity": "UNRESOLVED",
                },
                source="file",
            )
        )
    annotations_path = out / "annotations.jsonl"
    save_annotations(annotations, annotations_path)

    bls_path = out / "bls.csv"
    save_bls(
        BLSTable([BLSRow(name, w, b) for name, w, b in FIXTURE_BLS]), bls_path
    )

    config_path = out / "audit.cfg"
    config_path.write_text(
        "\n".join(
            [
                f'corpus = "{manifest_path.resolve()}"',
                f'identity_embeddings = "{identities_path.resolve()}"',
                f'profession_embeddings = "{professions_path.resolve()}"',
                f'annotations = "{annotations_path.resolve()}"',
                f'bls = "{bls_path.resolve()}"',
                "n_clusters = 6",
                "ci_level = 0.95",
                "diversity_ci_level = 0.99",
                "bootstrap_b = 200",
                f"seed = {seed + 11}",
                'gender_phrase = "woman"',
                "gender_rank_max = 2",
                'ethnicity_phrase = "Black"',
                "ethnicity_rank_max = 4",
            ]
        )
        + "\n",
        encoding="utf-8",
    )

    return {
        "manifest": manifest_path,
        "identities_emb": identities_path,
        "professions_emb": professions_path,
        "annotations": annotations_path,
        "bls": bls_path,
        "config": config_path,
        "images": image_dir,
    }
