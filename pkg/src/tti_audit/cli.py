"""`tti-audit` command line: batch pipeline stages plus the explorer API."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import audit, bovw, clusters, corpus as corpus_mod, gateway, knn, metrics, pixels, sift, vocab
from .errors import AuditError


def _load_corpus(path: str) -> corpus_mod.Corpus:
    return corpus_mod.load_corpus(path)


def cmd_prompts(args) -> int:
    specs = []
    if args.kind in ("identity", "all"):
        specs += corpus_mod.enumerate_identity_prompts()
    if args.kind in ("profession", "all"):
        specs += corpus_mod.enumerate_profession_prompts(list(args.professions))
    if args.kind in ("adjective", "all"):
        specs += corpus_mod.enumerate_adjective_prompts()
    for spec in specs:
        print(spec.text)
    return 0


def cmd_ingest(args) -> int:
    corpus = corpus_mod.load_manifest(args.manifest)
    root = Path(args.manifest).resolve().parent
    missing = corpus.validate_files(root=root)
    if missing:
        preview = ", ".join(missing[:5])
        raise AuditError(
            f"{len(missing)} records point at missing image files (e.g. {preview})"
        )
    bls = corpus_mod.load_bls(args.bls) if args.bls else None
    corpus_mod.save_corpus_db(corpus, args.out, bls)
    print(f"ingested {len(corpus)} records -> {args.out}")
    return 0


def cmd_annotate(args) -> int:
    corpus = _load_corpus(args.corpus)
    constraints = dict(gateway.DEFAULT_CONSTRAINTS)
    if args.constrain is not None:
        wanted = [k for k in args.constrain.split(",") if k]
        constraints = {k: gateway.DEFAULT_CONSTRAINTS[k] for k in wanted}
    annotations, errors = gateway.fetch_annotations(
        corpus,
        args.endpoint,
        constraints=constraints,
        width=args.width,
        image_root=Path(args.corpus).resolve().parent,
    )
    gateway.save_annotations(annotations, args.out)
    print(f"annotated {len(annotations)} images -> {args.out}")
    for err in errors:
        print(f"error: {err['image_id']}: {err['error']}", file=sys.stderr)
    return 1 if errors else 0


def cmd_embed(args) -> int:
    corpus = _load_corpus(args.corpus)
    matrix = gateway.fetch_embeddings(
        corpus,
        args.endpoint,
        question_key=args.question,
        width=args.width,
        image_root=Path(args.corpus).resolve().parent,
    )
    gateway.save_embeddings(matrix, args.out)
    print(f"embedded {len(matrix)} images (dim {matrix.dim}) -> {args.out}")
    return 0


def cmd_features(args) -> int:
    corpus = _load_corpus(args.corpus)
    root = Path(args.corpus).resolve().parent
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scores = {}
    for record in corpus.records:
        image = pixels.RgbImage.open(corpus_mod.image_path(record, root))
        scores[record.id] = pixels.colorfulness(image)
        dset = sift.sift_descriptors(image, image_id=record.id)
        sift.save_descriptors(dset, out / f"{record.id}.sft")
    pixels.save_colorfulness_csv(scores, out / "colorfulness.csv")
    print(f"wrote {len(corpus)} descriptor files + colorfulness.csv -> {out}")
    return 0


def _load_feature_dir(feats: str) -> tuple[list[str], list[sift.DescriptorSet]]:
    paths = sorted(Path(feats).glob("*.sft"))
    ids = [p.stem for p in paths]
    return ids, [sift.load_descriptors(p, image_id=p.stem) for p in paths]


def cmd_codebook(args) -> int:
    _, dsets = _load_feature_dir(args.feats)
    codebook = bovw.train_codebook(dsets, k=args.k, seed=args.seed, max_iter=args.max_iter)
    tfs = [bovw.term_frequencies(d.descriptors, codebook) for d in dsets]
    codebook.idf = bovw.compute_idf(tfs, codebook.k)
    bovw.save_codebook(codebook, args.out)
    print(f"trained k={args.k} codebook (inertia {codebook.inertia:.2f}) -> {args.out}")
    return 0


def cmd_vectorize(args) -> int:
    ids, dsets = _load_feature_dir(args.feats)
    codebook = bovw.load_codebook(args.codebook)
    vectors = [bovw.vectorize(d.descriptors, codebook, codebook.idf) for d in dsets]
    bovw.save_vectors(ids, vectors, args.out)
    print(f"vectorized {len(ids)} images -> {args.out}")
    return 0


def cmd_index(args) -> int:
    ids, vectors = bovw.load_vectors(args.vecs)
    graph = knn.build_index(vectors, K=args.k, seed=args.seed, ids=ids)
    knn.save_index(graph, args.out)
    print(f"indexed {len(ids)} vectors at degree {args.k} -> {args.out}")
    return 0


def cmd_knn(args) -> int:
    if args.by == "bovw":
        if not args.index:
            raise AuditError("--index is required with --by bovw")
        graph = knn.load_index(args.index)
        results = knn.graph_neighbors(graph, args.probe, args.k)
    else:
        if not args.colorfulness:
            raise AuditError("--colorfulness is required with --by colorfulness")
        scores = pixels.load_colorfulness_csv(args.colorfulness)
        ids = knn.colorfulness_neighbors(scores, args.probe, args.k)
        results = [(i, scores[i]) for i in ids]
    for image_id, score in results:
        print(f"{image_id}\t{score:.6f}")
    return 0


def cmd_cluster(args) -> int:
    emb = gateway.load_embeddings(args.emb)
    model = clusters.ward_cluster(emb, n_clusters=args.n)
    clusters.save_model(model, args.out)
    print(f"clustered {len(emb)} embeddings into {args.n} regions -> {args.out}")
    return 0


def cmd_assign(args) -> int:
    model = clusters.load_model(args.model)
    emb = gateway.load_embeddings(args.emb)
    assignments = clusters.assign(model, emb)
    Path(args.out).write_text(json.dumps(assignments, sort_keys=True, indent=2) + "\n")
    print(f"assigned {len(assignments)} embeddings -> {args.out}")
    return 0


def cmd_diversity(args) -> int:
    assignments = json.loads(Path(args.assignments).read_text())
    score = metrics.diversity_score(
        list(assignments.values()), args.n, level=args.ci, B=args.b, seed=args.seed
    )
    doc = {
        "entropy_bits": score.entropy_bits,
        "ci_low": score.ci_low,
        "ci_high": score.ci_high,
        "n": score.n,
        "level": score.level,
        "bootstrap_B": score.bootstrap_B,
        "seed": score.seed,
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def cmd_quintiles(args) -> int:
    bls = corpus_mod.load_bls(args.bls)
    corpus = _load_corpus(args.corpus)
    regions_doc = json.loads(Path(args.regions).read_text())
    summaries = [
        clusters.RegionSummary(
            cluster=s["cluster"],
            share=s["share"],
            top_gender=[(p, pct) for p, pct in s["top_gender"]],
            top_ethnicity=[(p, pct) for p, pct in s["top_ethnicity"]],
        )
        for s in regions_doc["summaries"]
    ]
    attribute = "gender" if args.key == "pct_women" else "ethnicity"
    rank_max = args.rank_max or (2 if attribute == "gender" else 4)
    group = metrics.select_region_group(summaries, args.group, attribute, rank_max)
    assignments = json.loads(Path(args.assignments).read_text())
    by_system: dict[str, dict[str, list[int]]] = {}
    for image_id, cluster in assignments.items():
        record = corpus[image_id]
        if record.prompt.profession is None:
            continue
        by_system.setdefault(record.system, {}).setdefault(
            record.prompt.profession, []
        ).append(cluster)
    report = metrics.quintile_report(
        by_system,
        group,
        metrics.quintile_bins(bls, args.key),
        bls,
        args.key,
        level=args.ci,
        B=args.b,
        seed=args.seed,
    )
    print(json.dumps(audit._quintile_dict(report), indent=2, sort_keys=True))
    return 0


def cmd_markers(args) -> int:
    annotations = gateway.load_annotations(args.annotations)
    corpus = _load_corpus(args.corpus)
    stats = metrics.gender_marker_stats(annotations, corpus, source=args.source)
    print(json.dumps(audit._markers_dict(stats), indent=2, sort_keys=True))
    return 0


def cmd_run(args) -> int:
    config = audit.AuditConfig.from_file(args.config)
    bundle = audit.run_audit(config, args.out, canonical=args.canonical)
    print(f"bundle written to {bundle.out_dir}")
    return 0


def cmd_serve(args) -> int:
    from . import service

    state = service.load_state(
        bundle_dir=args.bundle,
        corpus_path=args.corpus,
        index_path=args.index,
        model_path=args.model,
        colorfulness_path=args.colorfulness,
        profession_embeddings_path=args.prof_emb,
        image_root=args.image_root or Path(args.corpus).resolve().parent,
    )
    origins = args.cors_origin.split(",") if args.cors_origin else None
    service.serve(state, args.addr, cors_origins=origins)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tti-audit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prompts", help="print prompt sets")
    p.add_argument("--kind", choices=["identity", "profession", "adjective", "all"], default="all")
    p.add_argument("--professions", nargs="*", default=list(vocab.PROFESSIONS))
    p.set_defaults(func=cmd_prompts)

    p = sub.add_parser("ingest", help="validate a manifest (+BLS) into corpus.db")
    p.add_argument("--manifest", required=True)
    p.add_argument("--bls")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("annotate", help="fetch captions and VQA answers")
    p.add_argument("--corpus", required=True)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--constrain", help="comma list of constrained questions")
    p.add_argument("--width", type=int, default=gateway.DEFAULT_WIDTH)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("embed", help="fetch dense embeddings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--question", default="appearance")
    p.add_argument("--width", type=int, default=gateway.DEFAULT_WIDTH)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("features", help="compute SIFT descriptors + colorfulness")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("codebook", help="train the visual-word codebook")
    p.add_argument("--feats", required=True)
    p.add_argument("--k", type=int, default=bovw.DEFAULT_K)
    p.add_argument("--seed", type=int, default=17)
    p.add_argument("--max-iter", type=int, default=bovw.DEFAULT_MAX_ITER)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_codebook)

    p = sub.add_parser("vectorize", help="TF-IDF sparse vectors per image")
    p.add_argument("--feats", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("index", help="build the NN-descent graph index")
    p.add_argument("--vecs", required=True)
    p.add_argument("--k", type=int, default=knn.DEFAULT_K)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("knn", help="neighbor lookup by BoVW or colorfulness")
    p.add_argument("--probe", required=True)
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--by", choices=["bovw", "colorfulness"], default="bovw")
    p.add_argument("--index")
    p.add_argument("--colorfulness")
    p.set_defaults(func=cmd_knn)

    p = sub.add_parser("cluster", help="Ward-cluster identity embeddings")
    p.add_argument("--emb", required=True)
    p.add_argument("--n", type=int, default=clusters.DEFAULT_N_CLUSTERS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("assign", help="assign embeddings to model regions")
    p.add_argument("--model", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("diversity", help="assignment-entropy diversity score")
    p.add_argument("--assignments", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ci", type=float, default=0.99)
    p.add_argument("--b", type=int, default=metrics.DEFAULT_BOOTSTRAP_B)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_diversity)

    p = sub.add_parser("quintiles", help="quintile comparison against BLS")
    p.add_argument("--bls", required=True)
    p.add_argument("--key", choices=["pct_women", "pct_black"], required=True)
    p.add_argument("--group", required=True, help="region-group phrase, e.g. woman")
    p.add_argument("--rank-max", type=int)
    p.add_argument("--regions", required=True)
    p.add_argument("--assignments", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--ci", type=float, default=0.95)
    p.add_argument("--b", type=int, default=metrics.DEFAULT_BOOTSTRAP_B)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_quintiles)

    p = sub.add_parser("markers", help="gender-marker statistics")
    p.add_argument("--annotations", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--source", choices=list(metrics.MARKER_SOURCES), default="caption")
    p.set_defaults(func=cmd_markers)

    p = sub.add_parser("run", help="run the full audit pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--canonical", action="store_true", help="omit timestamps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="serve the explorer API")
    p.add_argument("--bundle", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--index")
    p.add_argument("--model")
    p.add_argument("--colorfulness")
    p.add_argument("--prof-emb")
    p.add_argument("--image-root")
    p.add_argument("--addr", default="127.0.0.1:8787")
    p.add_argument("--cors-origin")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AuditError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
