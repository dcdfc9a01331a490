"""End-to-end audit orchestration and report bundle output.

Stages run in a fixed order (cluster -> assign -> summarize -> diversity ->
quintiles -> markers) and write a bundle directory with machine-readable
JSON documents plus Markdown tables. Every artifact embeds the config hash
and all seeds; with canonical=True no timestamps are written, so reruns of
the same config are byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import clusters, gateway, metrics
from .corpus import BLSTable, Corpus, load_bls, load_corpus
from .errors import AuditError, ValidationError

BUNDLE_DOCS = ("provenance", "regions", "diversity", "quintiles", "markers")


def parse_keyvalue_config(path: str | Path) -> dict:
    """Flat TOML-like key = value file: strings in quotes, ints, floats,
    booleans, and '#' comments."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        if value.startswith('"') and value.endswith('"') and len(value) >= 2:
            values[key] = value[1:-1]
        elif value in ("true", "false"):
            values[key] = value == "true"
        else:
            try:
                values[key] = int(value)
            except ValueError:
                try:
                    values[key] = float(value)
                except ValueError:
                    raise ValidationError(
                        f"{path}:{lineno}: unparseable value {value!r}"
                    ) from None
    return values


@dataclass
class AuditConfig:
    corpus: str
    identity_embeddings: str
    profession_embeddings: str | None = None
    annotations: str | None = None
    bls: str | None = None
    n_clusters: int = clusters.DEFAULT_N_CLUSTERS
    ci_level: float = 0.95
    diversity_ci_level: float = 0.99
    bootstrap_b: int = metrics.DEFAULT_BOOTSTRAP_B
    seed: int = 0
    gender_phrase: str = "woman"
    gender_rank_max: int = 2
    ethnicity_phrase: str = "Black"
    ethnicity_rank_max: int = 4
    run_quintiles: bool = True
    run_markers: bool = True

    @classmethod
    def from_file(cls, path: str | Path) -> "AuditConfig":
        raw = parse_keyvalue_config(path)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")
        if "corpus" not in raw or "identity_embeddings" not in raw:
            raise ValidationError(f"{path}: corpus and identity_embeddings are required")
        config = cls(**raw)
        config.validate()
        return config

    def validate(self) -> None:
        """Fail before any compute when required inputs are absent."""
        for name in ("corpus", "identity_embeddings"):
            path = getattr(self, name)
            if not Path(path).exists():
                raise ValidationError(f"{name} file not found: {path}")
        if self.run_quintiles:
            if self.bls is None:
                raise ValidationError("quintiles requested but no bls path configured")
            if self.profession_embeddings is None:
                raise ValidationError(
                    "quintiles requested but no profession_embeddings configured"
                )
        if self.run_markers and self.annotations is None:
            raise ValidationError("markers requested but no annotations path configured")
        for name in ("profession_embeddings", "annotations", "bls"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ValidationError(f"{name} file not found: {path}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def content_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(canon).hexdigest()


@dataclass
class AuditBundle:
    out_dir: Path
    documents: dict[str, dict] = field(default_factory=dict)

    def path(self, name: str) -> Path:
        return self.out_dir / f"{name}.json"


def _dump_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _score_dict(score: metrics.DiversityScore) -> dict:
    return dataclasses.asdict(score)


def _summary_dict(summary: clusters.RegionSummary) -> dict:
    return {
        "cluster": summary.cluster,
        "share": summary.share,
        "top_gender": [[p, pct] for p, pct in summary.top_gender],
        "top_ethnicity": [[p, pct] for p, pct in summary.top_ethnicity],
    }


def _quintile_dict(report: metrics.QuintileReport) -> dict:
    return {
        "ranking_key": report.ranking_key,
        "region_group": report.region_group,
        "bins": report.bins,
        "bls_means": report.bls_means,
        "per_system": {
            system: [dataclasses.asdict(cell) for cell in cells]
            for system, cells in report.per_system.items()
        },
        "errata": report.errata,
        "level": report.level,
        "bootstrap_B": report.bootstrap_B,
        "seed": report.seed,
    }


def _markers_dict(stats: metrics.MarkerStats) -> dict:
    return {
        "source": stats.source,
        "per_system": {
            system: dataclasses.asdict(s) for system, s in stats.per_system.items()
        },
        "overall": dataclasses.asdict(stats.overall),
        "woman_markers": list(stats.woman_markers),
        "man_markers": list(stats.man_markers),
    }


_QUINTILE_ROW_NAMES = ("Low 20%", "20 to 40", "40 to 60", "60 to 80", "Top 20%")


def _markdown_quintiles(docs: dict) -> str:
    lines = []
    for key in sorted(docs):
        report = docs[key]
        systems = sorted(report["per_system"])
        lines.append(f"## Quintiles by {report['ranking_key']}")
        lines.append("")
        header = ["Quintile", "BLS mean"] + systems
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for q, name in enumerate(_QUINTILE_ROW_NAMES):
            row = [name, f"{report['bls_means'][q]:.1f}"]
            for system in systems:
                cell = report["per_system"][system][q]
                half = (cell["ci_high"] - cell["ci_low"]) / 2.0
                row.append(f"{cell['share_pct']:.1f} (±{half:.2f})")
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
    return "\n".join(lines)


def _markdown_markers(doc: dict) -> str:
    lines = ["## Gender markers in captions and VQA answers", ""]
    header = [
        "System",
        "source",
        "% woman",
        "% man",
        "% gender markers",
        "% person",
        "% profession",
    ]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for source in sorted(doc):
        stats = doc[source]
        rows = dict(stats["per_system"])
        rows["(all)"] = stats["overall"]
        for system in sorted(rows):
            s = rows[system]
            lines.append(
                "| "
                + " | ".join(
                    [
                        system,
                        source,
                        f"{s['pct_woman']:.2f}",
                        f"{s['pct_man']:.2f}",
                        f"{s['pct_gender_marked']:.2f}",
                        f"{s['pct_person']:.2f}",
                        f"{s['pct_profession_mention']:.2f}",
                    ]
                )
                + " |"
            )
    lines.append("")
    return "\n".join(lines)


def _markdown_diversity(doc: dict) -> str:
    lines = ["## Assignment-entropy diversity", ""]
    header = ["System", "dataset", "entropy (bits)", "CI"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for dataset in sorted(doc):
        for system in sorted(doc[dataset]):
            s = doc[dataset][system]
            lines.append(
                "| "
                + " | ".join(
                    [
                        system,
                        dataset,
                        f"{s['entropy_bits']:.2f}",
                        f"[{s['ci_low']:.2f}, {s['ci_high']:.2f}]",
                    ]
                )
                + " |"
            )
    lines.append("")
    return "\n".join(lines)


def run_audit(
    config: AuditConfig, out_dir: str | Path, canonical: bool = False
) -> AuditBundle:
    """Execute the full pipeline and write the report bundle.

    Any stage failure aborts with the stage name after persisting partial
    provenance; reruns with identical config and inputs are deterministic.
    """
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = AuditBundle(out_dir=out)
    stamp = {"config_hash": config.content_hash(), "seeds": {"master": config.seed}}

    provenance: dict = {
        "config": config.to_dict(),
        **stamp,
        "stages": [],
        "status": "running",
    }
    if not canonical:
        import datetime

        provenance["created_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()

    stage = "load"
    try:
        corpus = load_corpus(config.corpus)
        identity_corpus = corpus.subset(kind="identity")
        identity_emb = gateway.load_embeddings(config.identity_embeddings)
        profession_emb = (
            gateway.load_embeddings(config.profession_embeddings)
            if config.profession_embeddings
            else None
        )
        annotations = (
            gateway.load_annotations(config.annotations) if config.annotations else None
        )
        bls = load_bls(config.bls) if config.bls else None
        provenance["stages"].append(stage)

        stage = "cluster"
        model = clusters.ward_cluster(identity_emb, config.n_clusters)
        provenance["stages"].append(stage)

        stage = "assign"
        prof_assignments = (
            clusters.assign(model, profession_emb) if profession_emb is not None else None
        )
        provenance["stages"].append(stage)

        stage = "summarize"
        eval_assignments = prof_assignments or dict(model.assignments)
        summaries = clusters.summarize_regions(model, identity_corpus, eval_assignments)
        bundle.documents["regions"] = {
            **stamp,
            "n_clusters": config.n_clusters,
            "source_corpus_hash": model.source_corpus_hash,
            "summaries": [_summary_dict(s) for s in summaries],
        }
        provenance["stages"].append(stage)

        stage = "diversity"
        diversity_doc: dict = {}
        datasets = {"identities": model.assignments}
        if prof_assignments is not None:
            datasets["professions"] = prof_assignments
        for dataset_name, assignment_map in datasets.items():
            per_system: dict[str, dict] = {}
            by_system: dict[str, list[int]] = {}
            for image_id, cluster in assignment_map.items():
                by_system.setdefault(corpus[image_id].system, []).append(cluster)
            for system, values in sorted(by_system.items()):
                score = metrics.diversity_score(
                    values,
                    config.n_clusters,
                    level=config.diversity_ci_level,
                    B=config.bootstrap_b,
                    seed=config.seed,
                )
                per_system[system] = _score_dict(score)
            diversity_doc[dataset_name] = per_system
        bundle.documents["diversity"] = {**stamp, **diversity_doc}
        provenance["stages"].append(stage)

        stage = "quintiles"
        if config.run_quintiles and prof_assignments is not None and bls is not None:
            gender_group, ethnicity_group = metrics.select_region_groups(
                summaries,
                config.gender_phrase,
                config.ethnicity_phrase,
                config.gender_rank_max,
                config.ethnicity_rank_max,
            )
            by_system_prof: dict[str, dict[str, list[int]]] = {}
            for image_id, cluster in prof_assignments.items():
                record = corpus[image_id]
                profession = record.prompt.profession
                if profession is None:
                    continue
                by_system_prof.setdefault(record.system, {}).setdefault(
                    profession, []
                ).append(cluster)
            quintile_docs = {}
            for key, group in (
                ("pct_women", gender_group),
                ("pct_black", ethnicity_group),
            ):
                bins = metrics.quintile_bins(bls, key)
                report = metrics.quintile_report(
                    by_system_prof,
                    group,
                    bins,
                    bls,
                    key,
                    level=config.ci_level,
                    B=config.bootstrap_b,
                    seed=config.seed,
                )
                quintile_docs[key] = _quintile_dict(report)
            bundle.documents["quintiles"] = {**stamp, **quintile_docs}
        provenance["stages"].append(stage)

        stage = "markers"
        if config.run_markers and annotations is not None:
            markers_doc = {}
            for source in metrics.MARKER_SOURCES:
                stats = metrics.gender_marker_stats(annotations, corpus, source=source)
                markers_doc[source] = _markers_dict(stats)
            bundle.documents["markers"] = {**stamp, **markers_doc}
        provenance["stages"].append(stage)
    except Exception as exc:
        provenance["status"] = "failed"
        provenance["failed_stage"] = stage
        provenance["error"] = str(exc)
        _dump_json(provenance, bundle.path("provenance"))
        raise AuditError(f"stage {stage!r} failed: {exc}") from exc

    provenance["status"] = "ok"
    bundle.documents["provenance"] = provenance
    for name, doc in bundle.documents.items():
        _dump_json(doc, bundle.path(name))
    if "quintiles" in bundle.documents:
        quintile_body = {
            k: v for k, v in bundle.documents["quintiles"].items() if k.startswith("pct_")
        }
        (out / "quintiles.md").write_text(_markdown_quintiles(quintile_body), "utf-8")
    if "markers" in bundle.documents:
        marker_body = {
            k: v
            for k, v in bundle.documents["markers"].items()
            if k in metrics.MARKER_SOURCES
        }
        (out / "markers.md").write_text(_markdown_markers(marker_body), "utf-8")
    diversity_body = {
        k: v
        for k, v in bundle.documents["diversity"].items()
        if k in ("identities", "professions")
    }
    (out / "diversity.md").write_text(_markdown_diversity(diversity_body), "utf-8")
    return bundle


def load_bundle(out_dir: str | Path) -> AuditBundle:
    out = Path(out_dir)
    bundle = AuditBundle(out_dir=out)
    for name in BUNDLE_DOCS:
        path = bundle.path(name)
        if path.exists():
            bundle.documents[name] = json.loads(path.read_text(encoding="utf-8"))
    if "provenance" not in bundle.documents:
        raise AuditError(f"{out}: not an audit bundle (missing provenance.json)")
    return bundle
