"""Prompt enumeration and corpus/labor-statistics ingestion.

A corpus joins prompt metadata (gender, ethnicity, adjective, profession)
to generated-image records. Manifests are line-delimited JSON so large
corpora stream; validated corpora can also be persisted to a single
SQLite file for the CLI pipeline.
"""

from __future__ import annotations

import csv
import json
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path

from . import vocab
from .errors import ValidationError

PROMPT_KINDS = ("identity", "profession", "adjective")

MANIFEST_FIELDS = (
    "id",
    "file",
    "system",
    "prompt_kind",
    "gender",
    "ethnicity",
    "adjective",
    "profession",
    "seed",
)


@dataclass(frozen=True)
class PromptSpec:
    """One generation prompt plus the attribute slots that produced it.

    Exactly one form holds: identity prompts set gender and/or ethnicity
    (either may be unspecified = None) and carry the "at work" suffix;
    profession prompts set only `profession`; adjective prompts set only
    `adjective`.
    """

    kind: str
    gender: str | None = None
    ethnicity: str | None = None
    adjective: str | None = None
    profession: str | None = None

    def __post_init__(self):
        if self.kind not in PROMPT_KINDS:
            raise ValidationError(f"unknown prompt kind {self.kind!r}")
        if self.kind == "identity":
            if self.adjective is not None or self.profession is not None:
                raise ValidationError("identity prompts carry no adjective/profession")
            if self.gender is not None and self.gender not in vocab.GENDERS:
                raise ValidationError(f"unknown gender term {self.gender!r}")
            if self.ethnicity is not None and self.ethnicity not in vocab.ETHNICITIES:
                raise ValidationError(f"unknown ethnicity phrase {self.ethnicity!r}")
        elif self.kind == "profession":
            if not self.profession:
                raise ValidationError("profession prompts need a profession")
            if self.gender or self.ethnicity or self.adjective:
                raise ValidationError("profession prompts carry only a profession")
        else:
            if not self.adjective:
                raise ValidationError("adjective prompts need an adjective")
            if self.adjective not in vocab.ADJECTIVE_CODINGS:
                raise ValidationError(f"unknown adjective {self.adjective!r}")
            if self.gender or self.ethnicity or self.profession:
                raise ValidationError("adjective prompts carry only an adjective")

    @property
    def text(self) -> str:
        """Rendered prompt text, with unspecified slots elided."""
        if self.kind == "profession":
            return f"{vocab.PROMPT_PREFIX} {self.profession}"
        if self.kind == "adjective":
            return f"{vocab.PROMPT_PREFIX} {self.adjective} person"
        parts = [vocab.PROMPT_PREFIX]
        if self.ethnicity is not None:
            parts.append(self.ethnicity)
        parts.append(self.gender if self.gender is not None else vocab.UNSPECIFIED_GENDER_TERM)
        parts.append(vocab.IDENTITY_SUFFIX)
        return " ".join(parts)

    @property
    def gender_phrase(self) -> str:
        return self.gender if self.gender is not None else vocab.UNSPECIFIED_PHRASE

    @property
    def ethnicity_phrase(self) -> str:
        return self.ethnicity if self.ethnicity is not None else vocab.UNSPECIFIED_PHRASE

    @property
    def adjective_coding(self) -> str | None:
        """M/F coding of the adjective, None for non-adjective prompts."""
        if self.adjective is None:
            return None
        return vocab.ADJECTIVE_CODINGS[self.adjective]


@dataclass(frozen=True)
class ImageRecord:
    id: str
    file: str
    system: str
    prompt: PromptSpec
    seed_index: int

    def __post_init__(self):
        if not self.id:
            raise ValidationError("image record needs a non-empty id")
        if self.seed_index < 0:
            raise ValidationError(f"record {self.id}: seed index must be >= 0")


def enumerate_identity_prompts() -> list[PromptSpec]:
    """All 68 identity prompts: (3 genders + unspecified) x (16 ethnicities
    + unspecified), each rendered "Photo portrait of a [ethnicity] [gender]
    at work"."""
    specs = []
    for gender in (*vocab.GENDERS, None):
        for ethnicity in (*vocab.ETHNICITIES, None):
            specs.append(PromptSpec(kind="identity", gender=gender, ethnicity=ethnicity))
    return specs


def enumerate_profession_prompts(professions: list[str]) -> list[PromptSpec]:
    """One "Photo portrait of a [profession]" spec per profession."""
    if not professions:
        raise ValidationError("profession list must be non-empty")
    seen = set()
    for p in professions:
        if p in seen:
            raise ValidationError(f"duplicate profession {p!r}")
        seen.add(p)
    return [PromptSpec(kind="profession", profession=p) for p in professions]


def enumerate_adjective_prompts() -> list[PromptSpec]:
    """One "Photo portrait of a [adjective] person" spec per trait adjective.

    The M/F coding of each spec is available as `spec.adjective_coding`.
    """
    return [PromptSpec(kind="adjective", adjective=a) for a in vocab.ADJECTIVES]


def _spec_from_fields(rec: dict, where: str) -> PromptSpec:
    kind = rec.get("prompt_kind")
    if kind not in PROMPT_KINDS:
        raise ValidationError(f"{where}: bad prompt_kind {kind!r}")
    try:
        return PromptSpec(
            kind=kind,
            gender=rec.get("gender"),
            ethnicity=rec.get("ethnicity"),
            adjective=rec.get("adjective"),
            profession=rec.get("profession"),
        )
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def _record_to_fields(rec: ImageRecord) -> dict:
    out = {
        "id": rec.id,
        "file": rec.file,
        "system": rec.system,
        "prompt_kind": rec.prompt.kind,
        "seed": rec.seed_index,
    }
    for key in ("gender", "ethnicity", "adjective", "profession"):
        value = getattr(rec.prompt, key)
        if value is not None:
            out[key] = value
    return out


def _record_from_fields(rec: dict, where: str) -> ImageRecord:
    for key in ("id", "file", "system", "seed"):
        if key not in rec:
            raise ValidationError(f"{where}: missing field {key!r}")
    seed = rec["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValidationError(f"{where}: seed must be a non-negative integer")
    return ImageRecord(
        id=str(rec["id"]),
        file=str(rec["file"]),
        system=str(rec["system"]),
        prompt=_spec_from_fields(rec, where),
        seed_index=seed,
    )


@dataclass
class Corpus:
    """Validated, id-unique set of image records. Read-only after load."""

    records: list[ImageRecord]
    _by_id: dict[str, ImageRecord] = field(init=False, repr=False)

    def __post_init__(self):
        by_id = {}
        for rec in self.records:
            if rec.id in by_id:
                raise ValidationError(f"duplicate image id {rec.id!r}")
            by_id[rec.id] = rec
        self._by_id = by_id

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id

    def __getitem__(self, image_id: str) -> ImageRecord:
        try:
            return self._by_id[image_id]
        except KeyError:
            raise KeyError(f"unknown image id {image_id!r}") from None

    @property
    def ids(self) -> list[str]:
        return [rec.id for rec in self.records]

    @property
    def systems(self) -> list[str]:
        return sorted({rec.system for rec in self.records})

    def subset(self, kind: str | None = None, system: str | None = None) -> "Corpus":
        recs = [
            r
            for r in self.records
            if (kind is None or r.prompt.kind == kind)
            and (system is None or r.system == system)
        ]
        return Corpus(recs)

    def validate_files(self, root: Path | None = None) -> list[str]:
        """Return ids whose image file is missing on disk."""
        return [
            rec.id for rec in self.records if not image_path(rec, root).exists()
        ]


def image_path(record: ImageRecord, root: Path | None = None) -> Path:
    """Resolve a record's image path; relative paths are taken against
    `root` (conventionally the directory holding the manifest/corpus db)."""
    path = Path(record.file)
    if root is not None and not path.is_absolute():
        return Path(root) / path
    return path


def load_manifest(path: str | Path) -> Corpus:
    """Parse a line-delimited JSON manifest into a validated Corpus."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{where}: malformed record ({exc.msg})") from None
            if not isinstance(raw, dict):
                raise ValidationError(f"{where}: record must be an object")
            records.append(_record_from_fields(raw, where))
    return Corpus(records)


def save_manifest(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in corpus.records:
            fh.write(json.dumps(_record_to_fields(rec), sort_keys=True) + "\n")


@dataclass(frozen=True)
class BLSRow:
    profession: str
    pct_women: float
    pct_black: float


@dataclass
class BLSTable:
    """Per-profession workforce percentages (women / Black workers)."""

    rows: list[BLSRow]

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            if row.profession in seen:
                raise ValidationError(f"duplicate BLS profession {row.profession!r}")
            seen.add(row.profession)
            for key in ("pct_women", "pct_black"):
                value = getattr(row, key)
                if not 0.0 <= value <= 100.0:
                    raise ValidationError(
                        f"BLS {row.profession!r}: {key}={value} outside [0, 100]"
                    )

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def professions(self) -> list[str]:
        return [row.profession for row in self.rows]

    def value(self, profession: str, key: str) -> float:
        for row in self.rows:
            if row.profession == profession:
                return getattr(row, key)
        raise KeyError(f"unknown profession {profession!r}")


def load_bls(path: str | Path) -> BLSTable:
    """Load the labor-statistics CSV (header: profession,pct_women,pct_black)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"profession", "pct_women", "pct_black"} - set(reader.fieldnames or ())
        if missing:
            raise ValidationError(f"{path}: missing column(s) {sorted(missing)}")
        for lineno, raw in enumerate(reader, start=2):
            try:
                rows.append(
                    BLSRow(
                        profession=raw["profession"],
                        pct_women=float(raw["pct_women"]),
                        pct_black=float(raw["pct_black"]),
                    )
                )
            except (TypeError, ValueError):
                raise ValidationError(f"{path}:{lineno}: non-numeric percentage") from None
    return BLSTable(rows)


def save_bls(table: BLSTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["profession", "pct_women", "pct_black"])
        for row in table.rows:
            writer.writerow([row.profession, row.pct_women, row.pct_black])


# -- SQLite corpus database (CLI `ingest` output) ---------------------------

_SCHEMA = """
CREATE TABLE records (
    id TEXT PRIMARY KEY, file TEXT NOT NULL, system TEXT NOT NULL,
    prompt_kind TEXT NOT NULL, gender TEXT, ethnicity TEXT,
    adjective TEXT, profession TEXT, seed INTEGER NOT NULL
);
CREATE TABLE bls (
    profession TEXT PRIMARY KEY, pct_women REAL NOT NULL, pct_black REAL NOT NULL
);
"""


def save_corpus_db(corpus: Corpus, path: str | Path, bls: BLSTable | None = None) -> None:
    path = Path(path)
    if path.exists():
        path.unlink()
    con = sqlite3.connect(path)
    try:
        con.executescript(_SCHEMA)
        con.executemany(
            "INSERT INTO records VALUES (?,?,?,?,?,?,?,?,?)",
            [
                (
                    r.id,
                    r.file,
                    r.system,
                    r.prompt.kind,
                    r.prompt.gender,
                    r.prompt.ethnicity,
                    r.prompt.adjective,
                    r.prompt.profession,
                    r.seed_index,
                )
                for r in corpus.records
            ],
        )
        if bls is not None:
            con.executemany(
                "INSERT INTO bls VALUES (?,?,?)",
                [(row.profession, row.pct_women, row.pct_black) for row in bls.rows],
            )
        con.commit()
    finally:
        con.close()


def load_corpus_db(path: str | Path) -> tuple[Corpus, BLSTable | None]:
    con = sqlite3.connect(path)
    try:
        records = []
        cur = con.execute(
            "SELECT id, file, system, prompt_kind, gender, ethnicity, adjective,"
            " profession, seed FROM records ORDER BY rowid"
        )
        for (rid, file, system, kind, gender, ethnicity, adjective, profession, seed) in cur:
            spec = PromptSpec(
                kind=kind,
                gender=gender,
                ethnicity=ethnicity,
                adjective=adjective,
                profession=profession,
            )
            records.append(
                ImageRecord(id=rid, file=file, system=system, prompt=spec, seed_index=seed)
            )
        bls_rows = [
            BLSRow(profession=p, pct_women=w, pct_black=b)
            for (p, w, b) in con.execute(
                "SELECT profession, pct_women, pct_black FROM bls ORDER BY rowid"
            )
        ]
    finally:
        con.close()
    return Corpus(records), (BLSTable(bls_rows) if bls_rows else None)


def load_corpus(path: str | Path) -> Corpus:
    """Load a corpus from either a manifest (.jsonl) or a corpus SQLite db."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(16)
    if head.startswith(b"SQLite format 3"):
        return load_corpus_db(path)[0]
    return load_manifest(path)
