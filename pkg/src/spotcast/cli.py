"""Command line entry point.

Every subcommand reads the same flat ``key = value`` config (``--config``);
flags override single keys. Stages are deterministic, so later stages simply
recompute the earlier ones instead of reading intermediate files.
"""

import argparse
import json
import logging
import os
import sys

from . import pipeline
from .community import community_report
from .embed import train_text_embeddings
from .geonet import geonet_search
from .ingest import serialize_tuple
from .pipeline import NoCommunity, PipelineConfig, PipelineError, UnknownUser


def _common(p):
    p.add_argument("--input", help="JSONL stream (default: bundled synthetic fixture)")
    p.add_argument("--model-dir", dest="model_dir")
    p.add_argument("--report-dir", dest="report_dir")


def build_parser():
    ap = argparse.ArgumentParser(prog="spotcast", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="flat key = value config file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, filter, normalise and de-duplicate a stream")
    _common(p)
    p.add_argument("--dedup-max-dist", dest="dedup_max_dist", type=int)
    p.add_argument("--output", help="write kept tuples here instead of stdout")

    p = sub.add_parser("communities", help="run the four community searches and the block rules")
    _common(p)
    p.add_argument("--diversity", type=int)
    p.add_argument("--per-day", dest="per_day", type=float)
    p.add_argument("--per-domain-cap", dest="per_domain_cap", type=int)

    p = sub.add_parser("geonet", help="build and cluster the co-visit graph")
    _common(p)
    p.add_argument("--radius-m", dest="radius_m", type=float)
    p.add_argument("--min-covisits", dest="min_covisits", type=int)
    p.add_argument("--dump", help="write the graph as an edge list")

    p = sub.add_parser("annotate", help="label check-ins with venue categories")
    _common(p)
    p.add_argument("--fixture", dest="venue_fixture", help="ref<TAB>category_id map")
    p.add_argument("--cache", dest="venue_cache")
    p.add_argument("--remote", dest="remote_venues", action="store_const", const=True,
                   help="query the directory named by SPOTCAST_VENUE_URL for unknown refs")
    p.add_argument("--output")

    p = sub.add_parser("embed", help="train the text embedding model")
    p.add_argument("action", nargs="?", choices=["train"], default="train")
    _common(p)
    p.add_argument("--dim", dest="text_dim", type=int)
    p.add_argument("--epochs", dest="embed_epochs", type=int)

    p = sub.add_parser("train", help="train one forecaster per allowed community")
    _common(p)
    p.add_argument("--hidden", help="hidden layer sizes, e.g. 900 or 900,300")
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("eval", help="evaluate all classifiers and write the reports")
    p.add_argument("action", nargs="?", choices=["report"], default="report")
    _common(p)
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.add_argument("--top-k", dest="rank_top_k", type=int)

    p = sub.add_parser("forecast", help="forecast a user's venue category")
    _common(p)
    p.add_argument("--user", required=True)
    p.add_argument("--weekday", type=int, required=True, help="0 = Monday")
    p.add_argument("--hour", type=int, required=True)

    p = sub.add_parser("run-all", help="run every stage and write reports and models")
    _common(p)

    for p in sub.choices.values():
        p.add_argument("--sentiment-provider", dest="sentiment_provider",
                       choices=["builtin", "http"])
        p.add_argument("--sentiment-url", dest="sentiment_url")
        p.add_argument("--personality-provider", dest="personality_provider",
                       choices=["builtin", "http"])
        p.add_argument("--personality-url", dest="personality_url")
    return ap


_NOT_CONFIG = {"command", "config", "log_level", "action", "output", "dump", "format",
               "user", "weekday", "hour"}


def load_config(args) -> PipelineConfig:
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    return PipelineConfig.load(args.config, **overrides)


def _write(text, path=None):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_ingest(cfg, args):
    counters = {}
    kept = pipeline.load_stream(cfg, counters)
    _write("".join(serialize_tuple(t) + "\n" for t in kept), args.output)
    print(json.dumps(counters, sort_keys=True), file=sys.stderr)


def cmd_communities(cfg, args):
    st = pipeline.prepare(cfg)
    pipeline.write_reports(cfg, st, None)
    blocked = {id(c): reasons for c, reasons in st.blocked}
    rows = [community_report(c, blocked.get(id(c))) for c in st.communities]
    print(json.dumps(rows, indent=2, sort_keys=True))


def cmd_geonet(cfg, args):
    counters = {}
    kept = pipeline.load_stream(cfg, counters)
    comms, graph, part = geonet_search(kept, cfg.radius_m, cfg.min_covisits,
                                       cfg.seed, cfg.max_geo_communities)
    if args.dump:
        with open(args.dump, "w", encoding="utf-8") as fh:
            graph.dump(fh)
    out = {"nodes": len(graph.nodes), "edges": len(graph.edges),
           "modularity": None if part is None else round(part.modularity, 6),
           "communities": [community_report(c) for c in comms]}
    print(json.dumps(out, indent=2, sort_keys=True))


def cmd_annotate(cfg, args):
    counters = {}
    kept = pipeline.load_stream(cfg, counters)
    labels = pipeline.annotate_tuples(cfg, kept, counters)
    lines = []
    for t in kept:
        if t in labels:
            row = json.loads(serialize_tuple(t))
            row["category"] = labels[t]
            lines.append(json.dumps(row, sort_keys=True) + "\n")
    _write("".join(lines), args.output)
    print(json.dumps(counters, sort_keys=True), file=sys.stderr)


def cmd_embed(cfg, args):
    counters = {}
    kept = pipeline.load_stream(cfg, counters)
    model = train_text_embeddings([t.text for t in kept], cfg.text_dim, cfg.embed_epochs,
                                  cfg.seed, cfg.embed_negative)
    os.makedirs(cfg.model_dir, exist_ok=True)
    path = os.path.join(cfg.model_dir, "embedding.json")
    model.save(path)
    print(json.dumps({"model": path, "vocabulary": len(model.vocab),
                      "documents": len(kept), "final_loss": round(model.loss_history[-1], 6)}))


def cmd_train(cfg, args):
    st = pipeline.prepare(cfg)
    feats = pipeline.build_features(cfg, st)
    tr, _ = pipeline._split(feats)
    models = pipeline.community_models(cfg, feats, tr)
    pipeline.save_forecast_state(cfg, st, feats, models)
    print(json.dumps({"model_dir": cfg.model_dir,
                      "communities": [f"{k[0]}/{k[1]}" for k in sorted(models)]}, indent=2))


def cmd_eval(cfg, args):
    result = pipeline.run_pipeline(cfg)
    if args.format == "json":
        print(result.report.to_json())
    else:
        print(result.report.table2_csv())
        print(result.report.table3_csv(), end="")


def cmd_forecast(cfg, args):
    f = pipeline.forecast_user(cfg, args.user, args.weekday, args.hour)
    print(json.dumps({"user": args.user, "category": f.category,
                      "confidence": round(f.confidence, 6), "community": f.community}))


def cmd_run_all(cfg, args):
    result = pipeline.run_pipeline(cfg)
    summary = {"report_dir": cfg.report_dir, "model_dir": cfg.model_dir,
               "counters": result.stages.counters, "mca": result.report.to_dict()["mca"]}
    print(json.dumps(summary, indent=2, sort_keys=True))


COMMANDS = {
    "ingest": cmd_ingest, "communities": cmd_communities, "geonet": cmd_geonet,
    "annotate": cmd_annotate, "embed": cmd_embed, "train": cmd_train, "eval": cmd_eval,
    "forecast": cmd_forecast, "run-all": cmd_run_all,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        COMMANDS[args.command](cfg, args)
    except (PipelineError, UnknownUser, NoCommunity, ValueError, OSError) as exc:
        print(f"spotcast: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
