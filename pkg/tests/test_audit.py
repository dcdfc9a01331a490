import json
from pathlib import Path

import pytest

from tti_audit.audit import AuditConfig, load_bundle, parse_keyvalue_config, run_audit
from tti_audit.errors import AuditError, ValidationError
from tti_audit.synthetic import make_audit_fixture


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture")
    make_audit_fixture(out, seed=0, write_images=False)
    return out


def bundle_bytes(path: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.is_file()}


def test_keyvalue_parser(tmp_path):
    cfg = tmp_path / "x.cfg"
    cfg.write_text('a = "hi"\nn = 24  # clusters\nratio = 0.5\nflag = true\n')
    assert parse_keyvalue_config(cfg) == {"a": "hi", "n": 24, "ratio": 0.5, "flag": True}
    cfg.write_text("broken line\n")
    with pytest.raises(ValidationError):
        parse_keyvalue_config(cfg)


def test_config_validation(tmp_path, fixture_dir):
    config = AuditConfig.from_file(fixture_dir / "audit.cfg")
    assert config.n_clusters == 6
    # quintiles requested without a BLS path fails before compute
    broken = AuditConfig(
        corpus=str(fixture_dir / "corpus.jsonl"),
        identity_embeddings=str(fixture_dir / "identities.emb"),
        profession_embeddings=str(fixture_dir / "professions.emb"),
        annotations=str(fixture_dir / "annotations.jsonl"),
        bls=None,
        run_quintiles=True,
    )
    with pytest.raises(ValidationError, match="bls"):
        broken.validate()
    missing = AuditConfig(corpus="nope.jsonl", identity_embeddings="nope.emb")
    with pytest.raises(ValidationError, match="not found"):
        missing.validate()


def test_run_audit_bundle_layout(fixture_dir, tmp_path):
    config = AuditConfig.from_file(fixture_dir / "audit.cfg")
    bundle = run_audit(config, tmp_path / "bundle", canonical=True)
    for name in ("provenance", "regions", "diversity", "quintiles", "markers"):
        assert bundle.path(name).exists(), name
    for name in ("diversity.md", "quintiles.md", "markers.md"):
        assert (tmp_path / "bundle" / name).exists()

    provenance = json.loads(bundle.path("provenance").read_text())
    assert provenance["status"] == "ok"
    assert provenance["stages"] == [
        "load",
        "cluster",
        "assign",
        "summarize",
        "diversity",
        "quintiles",
        "markers",
    ]
    assert "created_at" not in provenance  # canonical mode

    regions = json.loads(bundle.path("regions").read_text())
    shares = [s["share"] for s in regions["summaries"]]
    assert sum(shares) == pytest.approx(1.0, abs=1e-9)
    assert len(regions["summaries"]) == 6

    stamp = provenance["config_hash"]
    for name in ("regions", "diversity", "quintiles", "markers"):
        doc = json.loads(bundle.path(name).read_text())
        assert doc["config_hash"] == stamp
        assert doc["seeds"] == {"master": config.seed}

    diversity = json.loads(bundle.path("diversity").read_text())
    for dataset in ("identities", "professions"):
        for system in ("alpha", "beta"):
            score = diversity[dataset][system]
            assert 0.0 <= score["entropy_bits"] <= 2.585  # log2(6)
            assert score["ci_low"] <= score["entropy_bits"] <= score["ci_high"]

    quintiles = json.loads(bundle.path("quintiles").read_text())
    assert set(quintiles) >= {"pct_women", "pct_black"}
    assert [len(b) for b in quintiles["pct_women"]["bins"]] == [2, 2, 2, 1, 1]


def test_run_audit_is_deterministic(fixture_dir, tmp_path):
    config = AuditConfig.from_file(fixture_dir / "audit.cfg")
    run_audit(config, tmp_path / "b1", canonical=True)
    run_audit(config, tmp_path / "b2", canonical=True)
    assert bundle_bytes(tmp_path / "b1") == bundle_bytes(tmp_path / "b2")


def test_run_audit_records_failed_stage(fixture_dir, tmp_path):
    config = AuditConfig.from_file(fixture_dir / "audit.cfg")
    config.n_clusters = 10_000  # more clusters than points: cluster stage fails
    with pytest.raises(AuditError, match="stage 'cluster'"):
        run_audit(config, tmp_path / "broken", canonical=True)
    provenance = json.loads((tmp_path / "broken" / "provenance.json").read_text())
    assert provenance["status"] == "failed"
    assert provenance["failed_stage"] == "cluster"


def test_load_bundle_roundtrip(fixture_dir, tmp_path):
    config = AuditConfig.from_file(fixture_dir / "audit.cfg")
    bundle = run_audit(config, tmp_path / "bundle", canonical=True)
    loaded = load_bundle(tmp_path / "bundle")
    assert set(loaded.documents) == set(bundle.documents)
    with pytest.raises(AuditError, match="provenance"):
        load_bundle(tmp_path)
