"""Pipeline driver: each stage is a subcommand writing file artifacts into a
run directory, guarded by a digest manifest so stale intermediates are
caught instead of silently reused."""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import fairness, ingest, kge, linkclf, macro, splitter, synthgen
from .core import Attribute, DEFAULT_REFERENCE_YEAR, EntityId, GeoDataset, derived_rng

MANIFEST_SCHEMA = "auditlp-run v1"
DEFAULT_RANK_SAMPLE = 500

EXIT_OK = 0
EXIT_PIPELINE = 1
EXIT_USAGE = 2


class StaleInputError(RuntimeError):
    """An input artifact no longer matches the digest in the manifest."""


def _digest(path: Path) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


class RunManifest:
    """Per-run record of stage configs and artifact digests."""

    def __init__(self, run_dir: Path) -> None:
        self.run_dir = run_dir
        self.path = run_dir / "manifest.json"
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                self.data = json.load(fh)
            if self.data.get("schema") != MANIFEST_SCHEMA:
                raise ValueError(f"{self.path}: unrecognized manifest schema")
        else:
            self.data = {"schema": MANIFEST_SCHEMA, "stages": {}, "artifacts": {}}

    def _rel(self, path: Path) -> str:
        return str(path.relative_to(self.run_dir))

    def require_inputs(self, paths: Iterable[Path]) -> dict[str, str]:
        """Check inputs inside the run dir against their recorded digests."""
        digests: dict[str, str] = {}
        for path in paths:
            rel = self._rel(path)
            recorded = self.data["artifacts"].get(rel)
            if recorded is None:
                raise StaleInputError(f"{rel}: not produced by an earlier stage of this run")
            current = _digest(path)
            if current != recorded:
                raise StaleInputError(f"{rel}: digest mismatch; rerun the producing stage")
            digests[rel] = current
        return digests

    def record_stage(
        self,
        name: str,
        config: dict,
        inputs: dict[str, str],
        outputs: Iterable[Path],
    ) -> None:
        out_digests = {self._rel(p): _digest(p) for p in outputs}
        self.data["stages"][name] = {
            "config": config,
            "inputs": inputs,
            "outputs": out_digests,
        }
        self.data["artifacts"].update(out_digests)
        _write_json(self.path, self.data)

    def stage_config(self, name: str) -> dict:
        try:
            return self.data["stages"][name]["config"]
        except KeyError:
            raise StaleInputError(f"stage {name!r} has not run in this directory") from None


def _geo_dir(run_dir: Path, geography: str) -> Path:
    return run_dir / "geographies" / geography


def _load_dataset(run_dir: Path, geography: str) -> GeoDataset:
    """Rebuild the geography dataset from its run artifacts."""
    gdir = _geo_dir(run_dir, geography)
    with open(gdir / "dataset.json", encoding="utf-8") as fh:
        info = json.load(fh)
    rules = ingest.FilterRules(**{
        **info["rules"],
        "geography_targets": tuple(info["rules"]["geography_targets"]),
    })
    graph = ingest.intern_triples(
        ingest.parse_triple_file(gdir / "dataset.tsv", ingest.TripleFormat.TSV3)
    )
    overrides = ingest.read_attribute_overrides(gdir / "meta.csv")
    return ingest.build_geo_dataset(
        graph, rules, geography, info["reference_year"], overrides
    )


def do_synth(out_dir: Path, config: synthgen.SynthConfig) -> list[Path]:
    return synthgen.write_corpus(out_dir, config)


def do_ingest(
    run_dir: Path,
    triple_files: Sequence[Path],
    fmt: ingest.TripleFormat,
    rules: ingest.FilterRules,
    geography: str,
    reference_year: int,
    overrides_path: Path | None = None,
) -> Path:
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(run_dir)
    overrides = (
        ingest.read_attribute_overrides(overrides_path) if overrides_path else None
    )

    def _stream():
        for path in triple_files:
            yield from ingest.parse_triple_file(path, fmt)

    graph = ingest.intern_triples(_stream())
    dataset = ingest.build_geo_dataset(graph, rules, geography, reference_year, overrides)
    gdir = _geo_dir(run_dir, geography)
    gdir.mkdir(parents=True, exist_ok=True)
    ingest.write_tsv3(gdir / "dataset.tsv", dataset.graph.iter_raw_triples())
    with open(gdir / "meta.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("entity,gender,birth_year\n")
        for h in sorted(dataset.humans):
            m = dataset.meta[h]
            birth = "" if m.birth_year is None else str(m.birth_year)
            fh.write(f"{m.entity.raw},{m.gender.value},{birth}\n")
    _write_json(
        gdir / "dataset.json",
        {
            "schema": "auditlp-report v1",
            "kind": "dataset",
            "geography": geography,
            "reference_year": reference_year,
            "rules": rules.to_json(),
        },
    )
    _write_json(gdir / "stats.json", ingest.dataset_stats(dataset))
    input_digests = {str(p): _digest(p) for p in triple_files}
    if overrides_path:
        input_digests[str(overrides_path)] = _digest(overrides_path)
    manifest.record_stage(
        f"ingest:{geography}",
        {
            "format": fmt.value,
            "rules": rules.to_json(),
            "geography": geography,
            "reference_year": reference_year,
        },
        input_digests,
        [gdir / "dataset.tsv", gdir / "meta.csv", gdir / "dataset.json", gdir / "stats.json"],
    )
    return gdir


def do_split(
    run_dir: Path,
    geography: str,
    attribute: Attribute,
    fraction: float = splitter.DEFAULT_HIDE_FRACTION,
    seed: int = 0,
) -> Path:
    manifest = RunManifest(run_dir)
    gdir = _geo_dir(run_dir, geography)
    inputs = manifest.require_inputs(
        [gdir / "dataset.tsv", gdir / "meta.csv", gdir / "dataset.json"]
    )
    dataset = _load_dataset(run_dir, geography)
    filtered = splitter.build_filtered_dataset(dataset, attribute, fraction, seed)
    split_path = gdir / f"split_{attribute.value}.json"
    training_path = gdir / f"training_{attribute.value}.tsv"
    splitter.write_split_manifest(split_path, filtered)
    ingest.write_tsv3(training_path, filtered.training_graph.iter_raw_triples())
    manifest.record_stage(
        f"split:{geography}:{attribute.value}",
        {"attribute": attribute.value, "fraction": fraction, "seed": seed},
        inputs,
        [split_path, training_path],
    )
    return split_path


def do_train(
    run_dir: Path,
    geography: str,
    attribute: Attribute,
    config: kge.KgeConfig,
    rank_sample: int = DEFAULT_RANK_SAMPLE,
    workers: int = 1,
    dtype: str = "float32",
) -> Path:
    manifest = RunManifest(run_dir)
    gdir = _geo_dir(run_dir, geography)
    training_path = gdir / f"training_{attribute.value}.tsv"
    split_path = gdir / f"split_{attribute.value}.json"
    inputs = manifest.require_inputs([training_path, split_path, gdir / "dataset.tsv"])
    graph = ingest.intern_triples(
        ingest.parse_triple_file(training_path, ingest.TripleFormat.TSV3)
    )
    table = kge.train(graph, config, workers=workers, dtype=dtype)
    emb_path = gdir / f"embeddings_{attribute.value}.txt"
    kge.save_embeddings(emb_path, table)
    with open(split_path, encoding="utf-8") as fh:
        split_doc = json.load(fh)
    occ_rel = split_doc["occupation_relation"]
    hidden = [
        (h, occ_rel, s["occupation"])
        for s in split_doc["splits"]
        for h in s["hidden"]
    ]
    if rank_sample and len(hidden) > rank_sample:
        rng = derived_rng(config.seed, 0xEA)
        keep = sorted(rng.choice(len(hidden), size=rank_sample, replace=False).tolist())
        hidden = [hidden[i] for i in keep]
    all_triples = list(
        ingest.parse_triple_file(gdir / "dataset.tsv", ingest.TripleFormat.TSV3)
    )
    report = kge.evaluate_ranking(table, hidden, all_triples, kge.Protocol.FILTERED)
    ranking_path = gdir / f"ranking_{attribute.value}.json"
    _write_json(
        ranking_path,
        {
            "schema": "auditlp-report v1",
            "kind": "ranking",
            "geography": geography,
            "attribute": attribute.value,
            "protocol": "filtered",
            "mrr": report.mrr,
            "hits_at": {str(k): v for k, v in sorted(report.hits_at.items())},
            "evaluated_triples": report.evaluated_triples,
            "final_loss": table.final_loss,
            "first_epoch_loss": table.loss_history[0],
        },
    )
    manifest.record_stage(
        f"train:{geography}:{attribute.value}",
        {
            "model": config.model.value,
            "dim": config.dim,
            "neg_samples": config.neg_samples,
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
            "norm": config.norm.name.lower(),
            "seed": config.seed,
            "rank_sample": rank_sample,
            "dtype": dtype,
        },
        inputs,
        [emb_path, ranking_path],
    )
    return emb_path


def _config_from_stage(stage: dict) -> kge.KgeConfig:
    return kge.KgeConfig(
        model=kge.Model(stage["model"]),
        dim=stage["dim"],
        neg_samples=stage["neg_samples"],
        epochs=stage["epochs"],
        learning_rate=stage["learning_rate"],
        batch_size=stage["batch_size"],
        norm=kge.Norm[stage["norm"].upper()],
        seed=stage["seed"],
    )


def _splits_from_manifest(split_doc: dict, attribute: Attribute) -> list[splitter.OccupationSplit]:
    out = []
    for i, s in enumerate(split_doc["splits"]):
        out.append(
            splitter.OccupationSplit(
                occupation=EntityId(s["occupation"], i),
                hidden_positives=tuple(EntityId(h, -1) for h in s["hidden"]),
                retained_positives=tuple(EntityId(h, -1) for h in s["retained"]),
                negatives=tuple(EntityId(h, -1) for h in s["negatives"]),
                attribute=attribute,
                groups=dict(s["groups"]),
                negative_shortfall=s["negative_shortfall"],
            )
        )
    return out


def _audit_one(
    table: kge.EmbeddingTable,
    split: splitter.OccupationSplit,
    occupation_relation: str,
    attribute: Attribute,
    seed: int,
    clf_params: dict,
) -> tuple[str, fairness.GroupRates, linkclf.Metrics, linkclf.OccupationPredictions]:
    samples = linkclf.assemble_features(table, split, occupation_relation)
    _, predictions = linkclf.train_mlp(
        samples, seed=seed, occupation=split.occupation.raw, **clf_params
    )
    rates = fairness.group_rates(predictions, attribute)
    metrics = linkclf.summarize_metrics(predictions)
    return split.occupation.raw, rates, metrics, predictions


def do_audit(
    run_dir: Path,
    geography: str,
    attribute: Attribute,
    seed: int = 0,
    hidden_units: int = linkclf.DEFAULT_HIDDEN_UNITS,
    clf_epochs: int = linkclf.DEFAULT_MAX_EPOCHS,
    clf_learning_rate: float = linkclf.DEFAULT_LEARNING_RATE,
    clf_batch_size: int = linkclf.DEFAULT_BATCH_SIZE,
) -> Path:
    manifest = RunManifest(run_dir)
    gdir = _geo_dir(run_dir, geography)
    emb_path = gdir / f"embeddings_{attribute.value}.txt"
    split_path = gdir / f"split_{attribute.value}.json"
    inputs = manifest.require_inputs([emb_path, split_path])
    train_stage = manifest.stage_config(f"train:{geography}:{attribute.value}")
    table = kge.load_embeddings(emb_path, _config_from_stage(train_stage))
    with open(split_path, encoding="utf-8") as fh:
        split_doc = json.load(fh)
    splits = _splits_from_manifest(split_doc, attribute)
    occ_rel = split_doc["occupation_relation"]
    reference_year = split_doc["reference_year"]
    clf_params = {
        "hidden_units": hidden_units,
        "max_epochs": clf_epochs,
        "learning_rate": clf_learning_rate,
        "batch_size": clf_batch_size,
    }
    workers = int(os.environ.get("AUDITLP_THREADS", "0")) or min(4, os.cpu_count() or 1)
    results = {}
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(
                    _audit_one, table, split, occ_rel, attribute, seed + i, clf_params
                ): split.occupation.raw
                for i, split in enumerate(splits)
            }
            for fut in concurrent.futures.as_completed(futures):
                occ, rates, metrics, predictions = fut.result()
                results[occ] = (rates, metrics, predictions)
    else:
        for i, split in enumerate(splits):
            occ, rates, metrics, predictions = _audit_one(
                table, split, occ_rel, attribute, seed + i, clf_params
            )
            results[occ] = (rates, metrics, predictions)
    ordered = [s.occupation.raw for s in splits]
    thresholds = fairness.compute_thresholds(
        [results[o][0] for o in ordered], attribute
    )
    audits = [
        fairness.OccupationAudit(
            occupation=o,
            rates=results[o][0],
            metrics=results[o][1],
            label=fairness.categorize(results[o][0], thresholds),
        )
        for o in ordered
    ]
    audit_path = gdir / f"audit_{attribute.value}.json"
    fairness.write_audit_report(
        audit_path,
        fairness.audit_report(geography, attribute, thresholds, audits, reference_year),
    )
    predictions_path = gdir / f"predictions_{attribute.value}.csv"
    linkclf.write_predictions_csv(
        predictions_path, [results[o][2] for o in ordered]
    )
    manifest.record_stage(
        f"audit:{geography}:{attribute.value}",
        {"attribute": attribute.value, "seed": seed, **clf_params},
        inputs,
        [audit_path, predictions_path],
    )
    return audit_path


def do_macro(
    run_dir: Path,
    attribute: Attribute,
    k_max: int,
    attributes_path: Path | None = None,
    merge_gn: bool = True,
    seed: int = 0,
) -> Path:
    manifest = RunManifest(run_dir)
    geo_root = run_dir / "geographies"
    audit_paths = sorted(geo_root.glob(f"*/audit_{attribute.value}.json"))
    if len(audit_paths) < 2:
        raise ValueError("macro analysis needs audits for at least 2 geographies")
    inputs = manifest.require_inputs(audit_paths)
    reports = [fairness.read_audit_report(p) for p in audit_paths]
    vectors = [macro.vector_from_report(r) for r in reports]
    k_max = min(k_max, len(vectors))
    model = macro.spectral_cluster(vectors, k_max=k_max, seed=seed)
    attrs = macro.load_country_attributes(attributes_path)
    covered = all(geo in attrs for geo in model.assignment)
    summaries = macro.cluster_attribute_summary(model, attrs) if covered else []
    rates_by_geo = {r["geography"]: fairness.audit_rates_from_report(r) for r in reports}
    table = None
    pair_assignment = dict(model.assignment)
    if model.k >= 2:
        members = model.members()
        if merge_gn and model.k >= 3:
            pair_assignment = _merge_closest_pair(vectors, model)
            members = {}
            for geo, c in pair_assignment.items():
                members.setdefault(c, []).append(geo)
        sizes = sorted(members, key=lambda c: (-len(members[c]), c))
        c1, c2 = sizes[0], sizes[1]
        cluster_rates: dict[int, dict[str, fairness.GroupRates]] = {}
        for c in (c1, c2):
            per_occ: dict[str, list[fairness.GroupRates]] = {}
            for geo in members[c]:
                for occ, rates in rates_by_geo[geo].items():
                    per_occ.setdefault(occ, []).append(rates)
            cluster_rates[c] = {
                occ: fairness.pool_group_rates(lst) for occ, lst in per_occ.items()
            }
        table = macro.opposite_bias(cluster_rates, (c1, c2))
    report = macro.macro_report(vectors, model, summaries, table, attribute.value)
    report["merged_gn_assignment"] = dict(sorted(pair_assignment.items()))
    report["attribute_coverage"] = covered
    macro_path = run_dir / f"macro_{attribute.value}.json"
    macro.write_macro_report(macro_path, report)
    manifest.record_stage(
        f"macro:{attribute.value}",
        {
            "attribute": attribute.value,
            "k_max": k_max,
            "merge_gn": merge_gn,
            "seed": seed,
            "attributes_path": str(attributes_path) if attributes_path else None,
        },
        inputs,
        [macro_path],
    )
    return macro_path


def _merge_closest_pair(
    vectors: Sequence[macro.GeographyVector], model: macro.ClusterModel
) -> dict[str, int]:
    """Merge the two clusters with the closest mean bias profile; mirrors the
    treatment of near-identical developed-world clusters."""
    by_geo = {v.geography: np.asarray(v.counts, dtype=float) for v in vectors}
    members = model.members()
    centroids = {
        c: np.mean([by_geo[g] for g in geos], axis=0) for c, geos in members.items()
    }
    clusters = sorted(centroids)
    best = None
    for i, a in enumerate(clusters):
        for b in clusters[i + 1 :]:
            d = float(np.linalg.norm(centroids[a] - centroids[b]))
            if best is None or d < best[0]:
                best = (d, a, b)
    assert best is not None
    _, a, b = best
    return {geo: (a if c == b else c) for geo, c in model.assignment.items()}


def run_synthetic_pipeline(
    workdir: Path,
    synth_config: synthgen.SynthConfig,
    kge_config: kge.KgeConfig | None = None,
    attribute: Attribute | None = None,
    fraction: float = splitter.DEFAULT_HIDE_FRACTION,
    seed: int = 0,
    rank_sample: int = 200,
    k_max: int | None = None,
    dtype: str = "float32",
) -> Path:
    """Drive every stage over a fresh synthetic corpus; returns the run dir.

    The corpus lands in ``workdir/corpus`` and artifacts in ``workdir/run``.
    """
    attribute = attribute or synth_config.attribute
    kge_config = kge_config or kge.KgeConfig(
        model=kge.Model.TRANSE, epochs=40, batch_size=128, learning_rate=1.0, seed=seed
    )
    corpus = Path(workdir) / "corpus"
    run = Path(workdir) / "run"
    do_synth(corpus, synth_config)
    with open(corpus / "ground_truth.json", encoding="utf-8") as fh:
        truth = json.load(fh)
    for code, land in sorted(truth["geography_targets"].items()):
        do_ingest(
            run,
            [corpus / f"{code}.tsv"],
            ingest.TripleFormat.TSV3,
            ingest.FilterRules(geography_targets=(land,)),
            code,
            synth_config.reference_year,
        )
        do_split(run, code, attribute, fraction, seed)
        do_train(run, code, attribute, kge_config, rank_sample=rank_sample, dtype=dtype)
        do_audit(run, code, attribute, seed=seed)
    if synth_config.geographies >= 2:
        do_macro(run, attribute, k_max=k_max or synth_config.geographies, seed=seed)
    return run


def _read_kv_config(path: Path) -> dict[str, str]:
    """Flat ``key = value`` file mirroring the command's flag names."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _apply_kv_defaults(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if getattr(args, "config", None):
        values = _read_kv_config(Path(args.config))
        for key, value in values.items():
            dest = key.replace("-", "_")
            if not hasattr(args, dest):
                raise ValueError(f"unknown config key {key!r}")
            default = parser.get_default(dest)
            if getattr(args, dest) == default:
                if isinstance(default, bool):
                    setattr(args, dest, value.lower() in ("1", "true", "yes"))
                elif isinstance(default, int):
                    setattr(args, dest, int(value))
                elif isinstance(default, float):
                    setattr(args, dest, float(value))
                else:
                    setattr(args, dest, value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auditlp",
        description="Occupation link-prediction bias audit pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="emit a synthetic corpus with planted bias")
    p.add_argument("--config", help="JSON synthetic corpus config")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ingest", help="build a geography dataset from triple files")
    p.add_argument("--triples", nargs="+", required=True)
    p.add_argument("--format", choices=["tsv3", "kgtk"], default="tsv3")
    p.add_argument("--rules", required=True, help="JSON filter rules")
    p.add_argument("--geography", required=True)
    p.add_argument("--ref-year", type=int, default=DEFAULT_REFERENCE_YEAR)
    p.add_argument("--overrides", help="entity,gender,birth_year CSV")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--config", help="key = value defaults for this command")

    p = sub.add_parser("split", help="hide occupation edges and draw negatives")
    p.add_argument("--run", required=True)
    p.add_argument("--geography", required=True)
    p.add_argument("--attribute", choices=["gender", "age"], required=True)
    p.add_argument("--fraction", type=float, default=splitter.DEFAULT_HIDE_FRACTION)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="key = value defaults for this command")

    p = sub.add_parser("train", help="learn embeddings for the filtered graph")
    p.add_argument("--run", required=True)
    p.add_argument("--geography", required=True)
    p.add_argument("--attribute", choices=["gender", "age"], required=True)
    p.add_argument("--model", choices=["transe", "distmult"], default="transe")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--neg", type=int, default=10)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--norm", choices=["l1", "l2"], default="l1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank-sample", type=int, default=DEFAULT_RANK_SAMPLE)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dtype", choices=["float32", "float64"], default="float32")
    p.add_argument("--config", help="key = value defaults for this command")

    p = sub.add_parser("audit", help="classify occupations and label their bias")
    p.add_argument("--run", required=True)
    p.add_argument("--geography", required=True)
    p.add_argument("--attribute", choices=["gender", "age"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=linkclf.DEFAULT_HIDDEN_UNITS)
    p.add_argument("--clf-epochs", type=int, default=linkclf.DEFAULT_MAX_EPOCHS)
    p.add_argument("--clf-lr", type=float, default=linkclf.DEFAULT_LEARNING_RATE)
    p.add_argument("--clf-batch", type=int, default=linkclf.DEFAULT_BATCH_SIZE)
    p.add_argument("--config", help="key = value defaults for this command")

    p = sub.add_parser("macro", help="cluster geographies by bias profile")
    p.add_argument("--run", required=True)
    p.add_argument("--attribute", choices=["gender", "age"], required=True)
    p.add_argument("--clusters-max", type=int, default=6)
    p.add_argument("--attributes", help="country attribute CSV (default: bundled)")
    p.add_argument("--merge-gn", choices=["true", "false"], default="true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="key = value defaults for this command")
    return parser


def _dispatch(args: argparse.Namespace) -> None:
    if args.command == "synth":
        if args.config:
            config = synthgen.SynthConfig.from_json(args.config)
            if args.seed:
                config = synthgen.SynthConfig(
                    **{**_synth_config_dict(config), "seed": args.seed}
                )
        else:
            config = synthgen.SynthConfig(seed=args.seed)
        do_synth(Path(args.out), config)
    elif args.command == "ingest":
        do_ingest(
            Path(args.out),
            [Path(p) for p in args.triples],
            ingest.TripleFormat(args.format),
            ingest.FilterRules.from_json(args.rules),
            args.geography,
            args.ref_year,
            Path(args.overrides) if args.overrides else None,
        )
    elif args.command == "split":
        do_split(
            Path(args.run), args.geography, Attribute(args.attribute), args.fraction, args.seed
        )
    elif args.command == "train":
        config = kge.KgeConfig(
            model=kge.Model(args.model),
            dim=args.dim,
            neg_samples=args.neg,
            epochs=args.epochs,
            learning_rate=args.lr,
            batch_size=args.batch,
            norm=kge.Norm[args.norm.upper()],
            seed=args.seed,
        )
        do_train(
            Path(args.run),
            args.geography,
            Attribute(args.attribute),
            config,
            rank_sample=args.rank_sample,
            workers=args.workers,
            dtype=args.dtype,
        )
    elif args.command == "audit":
        do_audit(
            Path(args.run),
            args.geography,
            Attribute(args.attribute),
            seed=args.seed,
            hidden_units=args.hidden,
            clf_epochs=args.clf_epochs,
            clf_learning_rate=args.clf_lr,
            clf_batch_size=args.clf_batch,
        )
    elif args.command == "macro":
        do_macro(
            Path(args.run),
            Attribute(args.attribute),
            k_max=args.clusters_max,
            attributes_path=Path(args.attributes) if args.attributes else None,
            merge_gn=args.merge_gn == "true",
            seed=args.seed,
        )
    else:  # pragma: no cover - argparse enforces the choices
        raise ValueError(f"unknown command {args.command!r}")


def _synth_config_dict(config: synthgen.SynthConfig) -> dict:
    return {
        "geographies": config.geographies,
        "humans_per_geography": config.humans_per_geography,
        "occupations": config.occupations,
        "group_ratio": config.group_ratio,
        "bias_profile": config.bias_profile,
        "attribute": config.attribute,
        "background_relations": config.background_relations,
        "avg_occupations_per_human": config.avg_occupations_per_human,
        "reference_year": config.reference_year,
        "seed": config.seed,
    }


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command != "synth":
            _apply_kv_defaults(args, parser)
        _dispatch(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError, ingest.ParseError) as exc:
        print(f"auditlp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, StaleInputError, kge.TrainingDiverged) as exc:
        print(f"auditlp: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
