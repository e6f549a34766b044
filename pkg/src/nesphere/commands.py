"""Implementations behind the CLI subcommands.

Each command reads its inputs, runs the corresponding library pipeline, and
writes machine-readable JSON/TSV reports plus a rendered figure into the
output directory.  Everything is deterministic given identical inputs, seed,
and thread count.
"""

from __future__ import annotations

import json
import os
from collections import defaultdict

import numpy as np

from . import figures
from .alignment import (
    AdversarialConfig,
    load_lexicon,
    load_map,
    map_to_json,
    procrustes,
    save_map,
    train_adversarial,
    transform_hypersphere,
    translation_accuracy,
)
from .dictionary import load_dictionary, resolve
from .embeddings import load_embeddings, project
from .errors import UsageError
from .features import (
    compute_stats,
    featurize_corpus,
    load_feature_table,
    save_feature_table,
)
from .hypersphere import (
    SPHERE_TYPES,
    build_universe,
    distances_to_center,
    evaluate,
    fit_sphere,
    load_sphere,
    save_sphere,
)
from .tagger import (
    FeatureSpec,
    TrainConfig,
    build_features,
    evaluate_ner,
    load_corpus,
    load_model,
    new_model,
    save_model,
    train,
)


def _ensure_out_dir(args) -> str:
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _write_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_tsv(header: list[str], rows: list[list], path: str) -> None:
    def cell(value) -> str:
        return repr(value) if isinstance(value, float) else str(value)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(cell(v) for v in row) + "\n")


def _report_dict(report) -> dict:
    return {
        "true_count": report.true_count,
        "predicted_count": report.predicted_count,
        "hit_count": report.hit_count,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
    }


def cmd_fit(args) -> int:
    out_dir = _ensure_out_dir(args)
    space = load_embeddings(args.embeddings, limit=args.limit)
    dictionary = load_dictionary(args.dictionary)
    resolved = resolve(dictionary, space, lowercase_fallback=args.lowercase_fallback)
    requested = [t.strip() for t in args.types.split(",") if t.strip()]
    for ne_type in requested:
        if ne_type not in SPHERE_TYPES:
            raise UsageError(
                f"unknown type {ne_type!r}; expected one of {SPHERE_TYPES}"
            )

    per_type: dict[str, dict] = {}
    distances_by_type: dict[str, np.ndarray] = {}
    radii: dict[str, float] = {}
    print(f"{'type':<5} {'radius':>12} {'F1':>8}")
    for ne_type in requested:
        sphere, report = fit_sphere(
            space, resolved, ne_type, center_method=args.center_method
        )
        save_sphere(sphere, os.path.join(out_dir, f"hypersphere_{ne_type}.json"))
        per_type[ne_type] = {
            "radius": sphere.radius,
            "report": _report_dict(report),
        }
        member_types = ["Per", "Loc", "Org"] if ne_type == "All" else [ne_type]
        universe = build_universe(space, resolved, member_types)
        distances_by_type[ne_type] = distances_to_center(
            universe.vectors(), sphere.center
        )
        radii[ne_type] = sphere.radius
        print(f"{ne_type:<5} {sphere.radius:>12.6f} {report.f1:>8.4f}")

    payload = {
        "embeddings": args.embeddings,
        "dictionary": args.dictionary,
        "vocabulary_size": len(space),
        "duplicates_skipped": space.duplicates_skipped,
        "dictionary_duplicates_skipped": dictionary.duplicates_skipped,
        "oov_count": resolved.oov_count,
        "types": per_type,
    }
    _write_json(payload, os.path.join(out_dir, "fit_report.json"))
    _write_tsv(
        ["type", "radius", "true_count", "predicted_count", "hit_count",
         "precision", "recall", "f1"],
        [
            [t, per_type[t]["radius"]] + [per_type[t]["report"][k] for k in
             ("true_count", "predicted_count", "hit_count", "precision",
              "recall", "f1")]
            for t in requested
        ],
        os.path.join(out_dir, "fit_report.tsv"),
    )
    if args.figures:
        figures.save_distance_histogram(
            distances_by_type, radii, os.path.join(out_dir, "fit_distances.png")
        )
    return 0


def cmd_align(args) -> int:
    out_dir = _ensure_out_dir(args)
    source = load_embeddings(
        args.source_embeddings, language_tag=args.source_tag
    )
    target = load_embeddings(
        args.target_embeddings, language_tag=args.target_tag
    )

    if args.mode == "procrustes":
        if not args.train_lexicon:
            raise UsageError("procrustes mode requires --train-lexicon")
        lexicon = load_lexicon(args.train_lexicon)
        pairs = [
            (source.entries[s], target.entries[t])
            for s, t in lexicon
            if s in source.entries and t in target.entries
        ]
        if not pairs:
            raise UsageError("no train-lexicon pair is resolvable in both spaces")
        alignment = procrustes(pairs)
        alignment.source_tag = source.language_tag
        alignment.target_tag = target.language_tag
    else:
        cfg = AdversarialConfig(
            critic_hidden_size=args.hidden_size,
            clip_value=args.clip_value,
            steps=args.steps,
            critic_steps_per_generator_step=args.critic_steps,
            learning_rate=args.learning_rate,
            batch_size=args.batch_size,
            seed=args.seed,
            normalize_inputs=args.normalize_inputs,
            orthogonality_strength=args.orthogonality_strength,
            critic_learning_rate=args.critic_learning_rate,
        )
        alignment = train_adversarial(source, target, cfg)

    map_path = args.output or os.path.join(out_dir, "alignment_map.json")
    save_map(alignment, map_path)

    report: dict = {
        "mode": args.mode,
        "source_embeddings": args.source_embeddings,
        "target_embeddings": args.target_embeddings,
        "map_path": map_path,
        "training_meta": {
            k: v for k, v in alignment.training_meta.items() if k != "critic_trace"
        },
    }
    rows: list[list] = []
    if args.eval_lexicon:
        lexicon = load_lexicon(args.eval_lexicon)
        for k in (1, 5):
            accuracy = translation_accuracy(alignment, lexicon, source, target, k=k)
            report[f"accuracy_at_{k}"] = accuracy
            rows.append([f"accuracy@{k}", accuracy])
            print(f"accuracy@{k} {accuracy:.4f}")
    _write_json(report, os.path.join(out_dir, "align_report.json"))
    _write_tsv(
        ["metric", "value"],
        rows or [["mode", args.mode]],
        os.path.join(out_dir, "align_report.tsv"),
    )

    if args.figures:
        trace = alignment.training_meta.get("critic_trace") or []
        if trace:
            xs = [float(s) for s, _ in trace]
            ys = [float(v) for _, v in trace]
            figures.save_training_curve(
                xs,
                ys,
                os.path.join(out_dir, "align_training.png"),
                xlabel="generator step",
                ylabel="critic estimate",
                title="Adversarial alignment training",
            )
        else:
            mapped = source.matrix() @ alignment.matrix.T
            residuals = np.linalg.norm(
                mapped - mapped.mean(axis=0, keepdims=True), axis=1
            )
            figures.save_residual_histogram(
                residuals,
                os.path.join(out_dir, "align_residuals.png"),
                title="Mapped-source spread",
            )
    return 0


def cmd_transfer(args) -> int:
    out_dir = _ensure_out_dir(args)
    alignment = load_map(args.map)
    sphere = load_sphere(args.sphere)
    source = load_embeddings(args.source_embeddings)
    target = load_embeddings(args.target_embeddings)
    target_dict = load_dictionary(args.target_dictionary)

    sample = list(source.entries.values())
    if args.sample_limit and args.sample_limit > 0:
        sample = sample[: args.sample_limit]
    transferred = transform_hypersphere(alignment, sphere, sample)
    save_sphere(
        transferred, os.path.join(out_dir, f"transferred_{sphere.ne_type}.json")
    )

    resolved = resolve(target_dict, target, lowercase_fallback=args.lowercase_fallback)
    native_sphere, native_report = fit_sphere(target, resolved, sphere.ne_type)
    member_types = (
        ["Per", "Loc", "Org"] if sphere.ne_type == "All" else [sphere.ne_type]
    )
    universe = build_universe(target, resolved, member_types)
    transferred_report = evaluate(transferred, universe)
    f_ratio = (
        transferred_report.f1 / native_report.f1 if native_report.f1 > 0 else None
    )

    payload = {
        "ne_type": sphere.ne_type,
        "source_radius": sphere.radius,
        "transferred_radius": transferred.radius,
        "native_radius": native_sphere.radius,
        "transferred": _report_dict(transferred_report),
        "native": _report_dict(native_report),
        "f_ratio": f_ratio,
    }
    _write_json(payload, os.path.join(out_dir, "transfer_report.json"))
    _write_tsv(
        ["metric", "transferred", "native"],
        [
            ["radius", transferred.radius, native_sphere.radius],
            ["f1", transferred_report.f1, native_report.f1],
            ["f_ratio", f_ratio if f_ratio is not None else "NA", 1.0],
        ],
        os.path.join(out_dir, "transfer_report.tsv"),
    )
    ratio_text = f"{f_ratio:.4f}" if f_ratio is not None else "NA"
    print(
        f"{sphere.ne_type}: transferred F1 {transferred_report.f1:.4f} "
        f"native F1 {native_report.f1:.4f} F-ratio {ratio_text}"
    )
    if args.figures:
        figures.save_score_bars(
            [sphere.ne_type],
            {
                "transferred": [transferred_report.f1],
                "native": [native_report.f1],
            },
            os.path.join(out_dir, "transfer_f1.png"),
            ylabel="entity F1",
            title="Transferred vs natively fit hypersphere",
        )
    return 0


def _load_spheres(paths: list[str]) -> dict:
    spheres = {}
    for path in paths:
        sphere = load_sphere(path)
        spheres[sphere.ne_type] = sphere
    return spheres


def cmd_featurize(args) -> int:
    out_dir = _ensure_out_dir(args)
    space = load_embeddings(args.embeddings)
    if not args.sphere:
        raise UsageError("featurize requires at least one --sphere")
    spheres = _load_spheres(args.sphere)
    stats = compute_stats(space, spheres)
    corpus = load_corpus(args.corpus)
    table = featurize_corpus(
        corpus.sentences,
        space,
        spheres,
        stats,
        lowercase_fallback=args.lowercase_fallback,
    )
    out_path = args.output or os.path.join(out_dir, "features.tsv")
    save_feature_table(table, out_path)
    payload = {
        "corpus": args.corpus,
        "token_count": len(table.rows),
        "types": table.types,
        "stats": {
            t: {"mu": stats.mu[t], "sigma": stats.sigma[t]} for t in table.types
        },
        "output": out_path,
    }
    _write_json(payload, os.path.join(out_dir, "featurize_report.json"))
    print(f"wrote {len(table.rows)} feature rows for types {','.join(table.types)}")
    if args.figures and table.rows:
        matrix = table.matrix()
        figures.save_distance_histogram(
            {t: matrix[:, i] for i, t in enumerate(table.types)},
            {},
            os.path.join(out_dir, "featurize_z.png"),
            xlabel="z-score",
            title="Corpus z-score distribution",
        )
    return 0


def _grouped_hs_rows(table, corpus) -> list[np.ndarray]:
    by_sentence: dict[int, list[tuple[int, np.ndarray]]] = defaultdict(list)
    for sent_idx, tok_idx, _, z in table.rows:
        by_sentence[sent_idx].append((tok_idx, z))
    grouped: list[np.ndarray] = []
    for i, sentence in enumerate(corpus.sentences):
        rows = sorted(by_sentence.get(i, []), key=lambda r: r[0])
        if len(rows) != len(sentence):
            raise UsageError(
                f"feature table sentence {i} has {len(rows)} rows but the "
                f"corpus sentence has {len(sentence)} tokens"
            )
        grouped.append(np.stack([z for _, z in rows]))
    return grouped


def _corpus_features(args, corpus, space) -> tuple[FeatureSpec, list[np.ndarray]]:
    hs_table = load_feature_table(args.features) if args.features else None
    spec = FeatureSpec(
        embedding_dim=space.dim,
        use_embedding=not args.no_embedding_block,
        use_hypersphere=hs_table is not None,
        hypersphere_dim=len(hs_table.types) if hs_table is not None else 3,
        use_lexical=not args.no_lexical_block,
    )
    hs_rows = _grouped_hs_rows(hs_table, corpus) if hs_table is not None else None
    feature_matrices = [
        build_features(
            sentence,
            space,
            spec,
            hs_rows=hs_rows[i] if hs_rows is not None else None,
            lowercase_fallback=args.lowercase_fallback,
        )
        for i, sentence in enumerate(corpus.sentences)
    ]
    return spec, feature_matrices


def cmd_tag_train(args) -> int:
    out_dir = _ensure_out_dir(args)
    corpus = load_corpus(args.corpus)
    space = load_embeddings(args.embeddings)
    spec, feature_matrices = _corpus_features(args, corpus, space)
    model = new_model(corpus.tag_set, spec)
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        l2_strength=args.l2_strength,
        seed=args.seed,
        shuffle=not args.no_shuffle,
    )
    trained = train(model, corpus, feature_matrices, config)
    model_path = args.output or os.path.join(out_dir, "tagger_model.json")
    save_model(trained, model_path)
    _write_tsv(
        ["epoch", "mean_log_likelihood"],
        [[i + 1, ll] for i, ll in enumerate(trained.training_history)],
        os.path.join(out_dir, "tag_train_history.tsv"),
    )
    for i, ll in enumerate(trained.training_history):
        print(f"epoch {i + 1}: mean log-likelihood {ll:.6f}")
    if args.figures and trained.training_history:
        figures.save_training_curve(
            [float(i + 1) for i in range(len(trained.training_history))],
            trained.training_history,
            os.path.join(out_dir, "tag_train_curve.png"),
            xlabel="epoch",
            ylabel="mean log-likelihood",
            title="CRF training",
        )
    return 0


def cmd_tag_eval(args) -> int:
    out_dir = _ensure_out_dir(args)
    corpus = load_corpus(args.corpus)
    space = load_embeddings(args.embeddings)
    model = load_model(args.model)

    def features_for(loaded_model):
        hs_table = None
        if loaded_model.feature_spec.use_hypersphere:
            if not args.features:
                raise UsageError(
                    "model uses the hypersphere block; pass --features with "
                    "the feature table"
                )
            hs_table = load_feature_table(args.features)
        hs_rows = (
            _grouped_hs_rows(hs_table, corpus) if hs_table is not None else None
        )
        return [
            build_features(
                sentence,
                space,
                loaded_model.feature_spec,
                hs_rows=hs_rows[i] if hs_rows is not None else None,
                lowercase_fallback=args.lowercase_fallback,
            )
            for i, sentence in enumerate(corpus.sentences)
        ]

    report = evaluate_ner(model, corpus, features_for(model))
    payload: dict = {"model": args.model, "report": _report_dict(report)}
    rows: list[list] = [["model", report.f1]]
    print(f"model F1 {report.f1 * 100:.2f}")

    if args.baseline_model:
        baseline = load_model(args.baseline_model)
        baseline_report = evaluate_ner(baseline, corpus, features_for(baseline))
        payload["baseline_model"] = args.baseline_model
        payload["baseline_report"] = _report_dict(baseline_report)
        f_new = report.f1 * 100.0
        f_old = baseline_report.f1 * 100.0
        err = (f_new - f_old) / (100.0 - f_old) * 100.0 if f_old < 100.0 else None
        payload["error_rate_reduction"] = err
        rows.append(["baseline", baseline_report.f1])
        rows.append(["error_rate_reduction", err if err is not None else "NA"])
        err_text = f"{err:.1f}" if err is not None else "NA"
        print(f"baseline F1 {f_old:.2f}")
        print(f"model F1 {f_new:.2f} ({err_text})")
        if args.figures:
            figures.save_score_bars(
                ["entity F1"],
                {"baseline": [baseline_report.f1], "model": [report.f1]},
                os.path.join(out_dir, "tag_eval_f1.png"),
                ylabel="entity F1",
                title="Tagger comparison",
            )
    elif args.figures:
        figures.save_score_bars(
            ["entity F1"],
            {"model": [report.f1]},
            os.path.join(out_dir, "tag_eval_f1.png"),
            ylabel="entity F1",
            title="Tagger evaluation",
        )
    _write_json(payload, os.path.join(out_dir, "tag_eval.json"))
    _write_tsv(["metric", "value"], rows, os.path.join(out_dir, "tag_eval.tsv"))
    return 0


def cmd_project(args) -> int:
    out_dir = _ensure_out_dir(args)
    space = load_embeddings(args.embeddings)
    points: list[tuple[str, str, np.ndarray]] = []
    if args.dictionary:
        dictionary = load_dictionary(args.dictionary)
        resolved = resolve(
            dictionary, space, lowercase_fallback=args.lowercase_fallback
        )
        for ne_type, entries in resolved.by_type.items():
            for surface, vector in entries:
                points.append((surface, ne_type, vector))
    if args.vocab_sample > 0:
        for token in space.tokens()[: args.vocab_sample]:
            points.append((token, "Other", space.entries[token]))
    if not points:
        raise UsageError("nothing to project: pass --dictionary and/or --vocab-sample")

    projected = project(points, out_dim=args.dim)
    header = ["token", "label", "x", "y"] + (["z"] if args.dim == 3 else [])
    _write_tsv(
        header,
        [[token, label, *coords] for token, label, coords in projected.rows],
        os.path.join(out_dir, "projection.tsv"),
    )
    print(f"projected {len(projected.rows)} points to {args.dim}-D")
    if args.figures:
        figures.save_scatter(
            projected,
            os.path.join(out_dir, "projection.png"),
            title=f"{args.dim}-D projection",
        )
    return 0
