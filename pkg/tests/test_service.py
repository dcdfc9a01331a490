import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from _helpers import sparse_topic_vectors
from tti_audit import clusters, knn, pixels
from tti_audit.audit import AuditConfig, run_audit
from tti_audit.corpus import load_manifest
from tti_audit.errors import AuditError
from tti_audit.gateway import load_embeddings
from tti_audit.service import create_app, load_state
from tti_audit.synthetic import make_audit_fixture


@pytest.fixture(scope="module")
def stack(tmp_path_factory):
    """Fixture corpus + bundle + index + model + colorfulness, one build."""
    root = tmp_path_factory.mktemp("svc")
    paths = make_audit_fixture(root, seed=1, write_images=True)
    config = AuditConfig.from_file(paths["config"])
    bundle_dir = root / "bundle"
    run_audit(config, bundle_dir, canonical=True)

    corpus = load_manifest(paths["manifest"])
    identities = load_embeddings(paths["identities_emb"])
    model = clusters.ward_cluster(identities, n_clusters=6)
    model_path = root / "model.clm"
    clusters.save_model(model, model_path)

    vectors = sparse_topic_vectors(len(corpus), vocab_size=120, n_topics=6, seed=4)
    graph = knn.build_index(vectors, K=6, seed=9, ids=corpus.ids)
    index_path = root / "graph.knn"
    knn.save_index(graph, index_path)

    rng = np.random.default_rng(7)
    scores = {image_id: float(rng.random() * 100) for image_id in corpus.ids}
    colorfulness_path = root / "colorfulness.csv"
    pixels.save_colorfulness_csv(scores, colorfulness_path)

    state = load_state(
        bundle_dir=bundle_dir,
        corpus_path=paths["manifest"],
        index_path=index_path,
        model_path=model_path,
        colorfulness_path=colorfulness_path,
        profession_embeddings_path=paths["professions_emb"],
    )
    client = TestClient(create_app(state))
    return {
        "root": root,
        "paths": paths,
        "client": client,
        "state": state,
        "graph": graph,
        "scores": scores,
        "model": model,
        "corpus": corpus,
        "bundle_dir": bundle_dir,
    }


def test_clusters_endpoint_parity(stack):
    resp = stack["client"].get("/clusters")
    assert resp.status_code == 200
    doc = resp.json()
    expected = json.loads((stack["bundle_dir"] / "regions.json").read_text())
    assert doc == expected
    assert sum(s["share"] for s in doc["summaries"]) == pytest.approx(1.0, abs=1e-9)


def test_knn_bovw_parity(stack):
    probe = stack["graph"].ids[5]
    resp = stack["client"].get(f"/knn?id={probe}&by=bovw&k=5")
    assert resp.status_code == 200
    got = resp.json()["neighbors"]
    expected = knn.graph_neighbors(stack["graph"], probe, 5)
    assert [(i, pytest.approx(s)) for i, s in expected] == [(i, s) for i, s in got]


def test_knn_colorfulness_parity(stack):
    probe = next(iter(stack["scores"]))
    resp = stack["client"].get(f"/knn?id={probe}&by=colorfulness&k=4")
    assert resp.status_code == 200
    got = [i for i, _ in resp.json()["neighbors"]]
    assert got == knn.colorfulness_neighbors(stack["scores"], probe, 4)


def test_knn_errors(stack):
    probe = stack["graph"].ids[0]
    assert stack["client"].get("/knn?id=ghost&by=bovw&k=3").status_code == 404
    assert stack["client"].get(f"/knn?id={probe}&by=warp&k=3").status_code == 400
    resp = stack["client"].get(f"/knn?id={probe}&by=bovw&k=askew")
    assert resp.status_code == 400
    body = resp.json()
    assert body["error"]["code"] == 400


def test_image_bytes_and_404(stack):
    image_id = stack["corpus"].ids[0]
    resp = stack["client"].get(f"/images/{image_id}")
    assert resp.status_code == 200
    assert resp.content[:8] == b"\x89PNG\r\n\x1a\n"
    missing = stack["client"].get("/images/zzz")
    assert missing.status_code == 404
    assert missing.json()["error"]["message"].startswith("unknown image id")


def test_image_listing_filters_and_pagination(stack):
    client = stack["client"]
    resp = client.get("/images?system=alpha&profession=cook")
    assert resp.status_code == 200
    body = resp.json()
    oracle = [
        r.id
        for r in stack["corpus"].records
        if r.system == "alpha" and r.prompt.profession == "cook"
    ]
    assert body["ids"] == oracle[:60]
    assert body["total"] == len(oracle)
    page = client.get("/images?system=alpha&limit=7&offset=7").json()
    allof = [r.id for r in stack["corpus"].records if r.system == "alpha"]
    assert page["ids"] == allof[7:14]
    assert client.get("/images?limit=0").status_code == 400


def test_compare_endpoint_matches_manifest_filter(stack):
    resp = stack["client"].get("/compare?systems=alpha,beta&profession=cook")
    assert resp.status_code == 200
    body = resp.json()
    assert body["systems"] == ["alpha", "beta"]
    for system in ("alpha", "beta"):
        oracle = [
            r.id
            for r in stack["corpus"].records
            if r.system == system and r.prompt.profession == "cook"
        ]
        assert body["ids"][system] == oracle
    assert stack["client"].get("/compare?systems=alpha&profession=cook").status_code == 400


def test_cluster_examples(stack):
    model = stack["model"]
    resp = stack["client"].get("/clusters/0/examples?limit=5")
    assert resp.status_code == 200
    body = resp.json()
    assert body["ids"] == sorted(model.members(0))[:5]
    assert stack["client"].get("/clusters/99/examples").status_code == 404


def test_profession_distribution_parity(stack):
    resp = stack["client"].get("/professions/cook/distribution")
    assert resp.status_code == 200
    shares = resp.json()["shares"]
    assert set(shares) == {"alpha", "beta"}
    for system, values in shares.items():
        assert sum(values) == pytest.approx(1.0, abs=1e-9)
        assert values == stack["state"].profession_shares[system]["cook"]
    assert (
        stack["client"].get("/professions/astronaut/distribution").status_code == 404
    )


def test_reports_endpoints(stack):
    for name in ("diversity", "quintiles", "markers"):
        resp = stack["client"].get(f"/reports/{name}")
        assert resp.status_code == 200
        expected = json.loads((stack["bundle_dir"] / f"{name}.json").read_text())
        assert resp.json() == expected
    assert stack["client"].get("/reports/unknown").status_code == 404


def test_missing_artifact_refused(stack, tmp_path):
    with pytest.raises(AuditError, match="missing artifact: index"):
        load_state(
            bundle_dir=stack["bundle_dir"],
            corpus_path=stack["paths"]["manifest"],
            index_path=tmp_path / "does-not-exist.knn",
        )
