"""Read-only HTTP API over the audit artifacts for the explorer UI.

The service is a pure view layer: every payload is either a bundle
document or the result of a library call on state loaded at startup, so
endpoint-by-endpoint parity with the library is testable. State is
immutable after startup and request handlers are freely concurrent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse

from . import clusters, knn, pixels
from .audit import AuditBundle, load_bundle
from .corpus import Corpus, image_path, load_corpus
from .errors import AuditError
from .gateway import load_embeddings

DEFAULT_PAGE_LIMIT = 60
MAX_PAGE_LIMIT = 500


class HttpError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        self.message = message
        super().__init__(message)


@dataclass
class ServiceState:
    corpus: Corpus
    bundle: AuditBundle
    graph: knn.KnnGraph | None = None
    colorfulness: dict[str, float] | None = None
    model: clusters.ClusterModel | None = None
    profession_shares: dict[str, dict[str, list[float]]] = field(default_factory=dict)
    image_root: Path | None = None

    def validate(self) -> None:
        """Refuse to start when cross-references do not resolve."""
        if "regions" not in self.bundle.documents:
            raise AuditError("bundle is missing the regions document")
        if self.graph is not None:
            for image_id in self.graph.ids:
                if image_id not in self.corpus:
                    raise AuditError(f"index id {image_id!r} not in corpus")
        if self.colorfulness is not None:
            for image_id in self.colorfulness:
                if image_id not in self.corpus:
                    raise AuditError(f"colorfulness id {image_id!r} not in corpus")
        if self.model is not None:
            for image_id in self.model.assignments:
                if image_id not in self.corpus:
                    raise AuditError(f"cluster assignment id {image_id!r} not in corpus")


def load_state(
    bundle_dir: str | Path,
    corpus_path: str | Path,
    index_path: str | Path | None = None,
    model_path: str | Path | None = None,
    colorfulness_path: str | Path | None = None,
    profession_embeddings_path: str | Path | None = None,
    image_root: str | Path | None = None,
) -> ServiceState:
    for name, path in (
        ("bundle", bundle_dir),
        ("corpus", corpus_path),
        ("index", index_path),
        ("cluster model", model_path),
        ("colorfulness scores", colorfulness_path),
        ("profession embeddings", profession_embeddings_path),
    ):
        if path is not None and not Path(path).exists():
            raise AuditError(f"missing artifact: {name} ({path})")
    state = ServiceState(
        corpus=load_corpus(corpus_path),
        bundle=load_bundle(bundle_dir),
        graph=knn.load_index(index_path) if index_path else None,
        colorfulness=(
            pixels.load_colorfulness_csv(colorfulness_path) if colorfulness_path else None
        ),
        model=clusters.load_model(model_path) if model_path else None,
        image_root=Path(image_root) if image_root else Path(corpus_path).resolve().parent,
    )
    if state.model is not None and profession_embeddings_path:
        prof_emb = load_embeddings(profession_embeddings_path)
        assignments = clusters.assign(state.model, prof_emb)
        shares: dict[str, dict[str, list[float]]] = {}
        counts: dict[tuple[str, str], list[int]] = {}
        for image_id, cluster in assignments.items():
            record = state.corpus[image_id]
            profession = record.prompt.profession
            if profession is None:
                continue
            key = (record.system, profession)
            counts.setdefault(key, [0] * state.model.n_clusters)[cluster] += 1
        for (system, profession), per_cluster in counts.items():
            total = sum(per_cluster)
            shares.setdefault(system, {})[profession] = [
                c / total for c in per_cluster
            ]
        state.profession_shares = shares
    state.validate()
    return state


def _page_params(limit, offset) -> tuple[int, int]:
    try:
        limit = DEFAULT_PAGE_LIMIT if limit is None else int(limit)
        offset = 0 if offset is None else int(offset)
    except ValueError:
        raise HttpError(400, "limit/offset must be integers") from None
    if limit < 1 or limit > MAX_PAGE_LIMIT or offset < 0:
        raise HttpError(400, f"limit must be in [1, {MAX_PAGE_LIMIT}] and offset >= 0")
    return limit, offset


def create_app(state: ServiceState, cors_origins: list[str] | None = None) -> FastAPI:
    state.validate()
    app = FastAPI(title="tti-audit explorer API", version="0.1.0")
    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=cors_origins,
            allow_methods=["GET"],
            allow_headers=["*"],
        )

    @app.exception_handler(HttpError)
    async def _http_error(request: Request, exc: HttpError):
        return JSONResponse(
            status_code=exc.code,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    def require_record(image_id: str):
        if image_id not in state.corpus:
            raise HttpError(404, f"unknown image id {image_id!r}")
        return state.corpus[image_id]

    @app.get("/images/{image_id}")
    def image_bytes(image_id: str):
        record = require_record(image_id)
        path = image_path(record, state.image_root)
        if not path.exists():
            raise HttpError(404, f"image file for {image_id!r} not found")
        return FileResponse(path)

    @app.get("/images")
    def list_images(
        system: str | None = None,
        profession: str | None = None,
        gender: str | None = None,
        ethnicity: str | None = None,
        limit: str | None = None,
        offset: str | None = None,
    ):
        page_limit, page_offset = _page_params(limit, offset)
        matches = [
            r.id
            for r in state.corpus.records
            if (system is None or r.system == system)
            and (profession is None or r.prompt.profession == profession)
            and (gender is None or r.prompt.gender == gender)
            and (ethnicity is None or r.prompt.ethnicity == ethnicity)
        ]
        return {
            "total": len(matches),
            "limit": page_limit,
            "offset": page_offset,
            "ids": matches[page_offset : page_offset + page_limit],
        }

    @app.get("/knn")
    def knn_lookup(id: str, by: str = "bovw", k: str = "12"):
        require_record(id)
        try:
            k_int = int(k)
        except ValueError:
            raise HttpError(400, "k must be an integer") from None
        if k_int < 1:
            raise HttpError(400, "k must be >= 1")
        if by == "bovw":
            if state.graph is None:
                raise HttpError(400, "no BoVW index loaded")
            if k_int > state.graph.degree:
                raise HttpError(400, f"k={k_int} exceeds graph degree {state.graph.degree}")
            try:
                neighbors = knn.graph_neighbors(state.graph, id, k_int)
            except KeyError:
                raise HttpError(404, f"id {id!r} not in the BoVW index") from None
        elif by == "colorfulness":
            if state.colorfulness is None:
                raise HttpError(400, "no colorfulness scores loaded")
            if id not in state.colorfulness:
                raise HttpError(404, f"id {id!r} has no colorfulness score")
            ids = knn.colorfulness_neighbors(state.colorfulness, id, k_int)
            neighbors = [(i, state.colorfulness[i]) for i in ids]
        else:
            raise HttpError(400, f"unknown metric {by!r} (expected bovw|colorfulness)")
        return {"probe": id, "by": by, "neighbors": [[i, s] for i, s in neighbors]}

    @app.get("/clusters")
    def cluster_summaries():
        return state.bundle.documents["regions"]

    @app.get("/clusters/{cluster}/examples")
    def cluster_examples(cluster: str, limit: str | None = None, offset: str | None = None):
        if state.model is None:
            raise HttpError(400, "no cluster model loaded")
        try:
            idx = int(cluster)
        except ValueError:
            raise HttpError(400, "cluster index must be an integer") from None
        if not 0 <= idx < state.model.n_clusters:
            raise HttpError(404, f"unknown cluster {idx}")
        page_limit, page_offset = _page_params(limit, offset)
        members = sorted(state.model.members(idx))
        return {
            "cluster": idx,
            "total": len(members),
            "ids": members[page_offset : page_offset + page_limit],
        }

    @app.get("/professions/{name}/distribution")
    def profession_distribution(name: str, system: str | None = None):
        if not state.profession_shares:
            raise HttpError(400, "no profession assignments loaded")
        out = {}
        for sys_name, by_profession in sorted(state.profession_shares.items()):
            if system is not None and sys_name != system:
                continue
            if name in by_profession:
                out[sys_name] = by_profession[name]
        if not out:
            raise HttpError(404, f"no distribution for profession {name!r}")
        return {"profession": name, "shares": out}

    @app.get("/compare")
    def compare(systems: str, profession: str):
        names = [s for s in systems.split(",") if s]
        if len(names) != 2:
            raise HttpError(400, "expected systems=<a>,<b>")
        ids = {}
        for system in names:
            ids[system] = [
                r.id
                for r in state.corpus.records
                if r.system == system and r.prompt.profession == profession
            ]
        return {"systems": names, "profession": profession, "ids": ids}

    @app.get("/reports/{name}")
    def report(name: str):
        if name not in ("diversity", "quintiles", "markers"):
            raise HttpError(404, f"unknown report {name!r}")
        if name not in state.bundle.documents:
            raise HttpError(404, f"report {name!r} not present in this bundle")
        return state.bundle.documents[name]

    return app


def serve(state: ServiceState, bind_addr: str, cors_origins: list[str] | None = None):
    """Run the API with uvicorn (blocking)."""
    import uvicorn

    host, _, port = bind_addr.partition(":")
    app = create_app(state, cors_origins=cors_origins)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8787), log_level="info")
