"""Pipeline CLI: abstract -> mine -> discriminate -> report, plus synth.

Exit codes: 0 success, 1 usage error, 2 data validation error, 3 internal
invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .data_model import (
    DataValidationError,
    Symbol,
    SymbolicInterval,
    WindowConfig,
    group_events,
    load_events,
    load_kb,
    load_labels,
    load_reference_times,
    window_extract,
)
from .kbta import abstract_entity
from .miner import (
    MinerConfig,
    MiningInvariantError,
    canonical_string,
    mine,
    parse_canonical,
)
from .relations import RelationConfig
from .stats import compare_cohorts
from .synth import SynthConfig, write_outputs

INTERVALS_HEADER = ["entity_id", "concept", "kind", "label", "start", "end"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def write_intervals(path, intervals):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(INTERVALS_HEADER)
        for iv in intervals:
            w.writerow([iv.entity_id, iv.symbol.concept, iv.symbol.kind,
                        iv.symbol.label, iv.start, iv.end])


def read_intervals(path):
    """Intervals CSV -> entity -> list of SymbolicIntervals."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != INTERVALS_HEADER:
            raise DataValidationError(
                f"{path}:1: expected header {','.join(INTERVALS_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 6:
                raise DataValidationError(
                    f"{path}:{lineno}: expected 6 fields, got {len(row)}")
            ent, concept, kind, label, start, end = (f.strip() for f in row)
            try:
                iv = SymbolicInterval(ent, Symbol(concept, kind, label),
                                      int(start), int(end))
            except (ValueError, DataValidationError) as exc:
                raise DataValidationError(f"{path}:{lineno}: {exc}") from None
            out.setdefault(ent, []).append(iv)
    return out


def write_mined(path, results, cfg, class_label, n_entities):
    with open(path, "w", encoding="utf-8") as fh:
        header = {"config": cfg.to_dict(), "class_label": class_label,
                  "n_entities": n_entities}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for tirp, stats in results:
            fh.write(json.dumps({
                "tirp": canonical_string(tirp),
                "k": tirp.k,
                "support": stats.horizontal_support,
                "entities": stats.supporting_entities,
                "instances": stats.total_instances,
            }, sort_keys=True) + "\n")


def read_mined(path):
    from .miner import SupportStats
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise DataValidationError(f"{path}: missing JSONL header line")
    header = json.loads(lines[0])
    if "config" not in header:
        raise DataValidationError(f"{path}: first line must carry the config")
    results = []
    for ln in lines[1:]:
        obj = json.loads(ln)
        results.append((parse_canonical(obj["tirp"]),
                        SupportStats(obj["entities"], obj["support"],
                                     obj["instances"])))
    return results, header


def _resolve_threads(args):
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("TIRP_FORGE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DataValidationError(
                f"TIRP_FORGE_THREADS must be an integer, got {env!r}") from None
    return 1


def cmd_abstract(args):
    kb = load_kb(args.kb)
    samples = load_events(args.events, args.time_format)

    if args.windows:
        admission, reference = load_reference_times(args.windows)
        lab_concepts = frozenset()
        if args.lab_concepts:
            text = Path(args.lab_concepts).read_text(encoding="utf-8")
            lab_concepts = frozenset(
                ln.strip() for ln in text.splitlines() if ln.strip())
        wc = WindowConfig(reference_time=reference, admission_time=admission,
                          window_len=args.window_min, lab_concepts=lab_concepts)
        samples = window_extract(samples, wc)

    grouped = group_events(samples)
    unknown = sorted({c for per in grouped.values() for c in per} - set(kb.rules))
    if unknown:
        print(f"warning: concepts not in knowledge base, skipped: "
              f"{', '.join(unknown)}", file=sys.stderr)

    intervals = []
    for ent in sorted(grouped):
        intervals.extend(abstract_entity(grouped[ent], kb))
    intervals.sort(key=lambda iv: (iv.entity_id,) + iv.sort_key())
    write_intervals(args.out, intervals)

    counts = {}
    for iv in intervals:
        counts[iv.symbol.concept] = counts.get(iv.symbol.concept, 0) + 1
    for concept in sorted(counts):
        print(f"{concept}: {counts[concept]} intervals")
    print(f"wrote {len(intervals)} intervals to {args.out}")
    return 0


def _safe_name(label):
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label)


def cmd_mine(args):
    intervals = read_intervals(args.intervals)
    labels = load_labels(args.labels)
    unlabeled = sorted(set(intervals) - set(labels))
    if unlabeled:
        raise DataValidationError(
            f"entities with intervals but no label: {', '.join(unlabeled)}")
    cfg = MinerConfig(
        min_support=args.min_support,
        relation=RelationConfig(args.epsilon, args.max_gap),
        max_pattern_len=args.max_len,
        threads=_resolve_threads(args),
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    classes = sorted(set(labels.values()))
    for cls in classes:
        ents = sorted(e for e, c in labels.items() if c == cls)
        class_ivs = {e: intervals[e] for e in ents if e in intervals}
        results = mine(class_ivs, cfg, n_entities=len(ents))
        path = out_dir / f"{_safe_name(cls)}.jsonl"
        write_mined(path, results, cfg, cls, len(ents))
        print(f"{cls}: {len(results)} frequent patterns over {len(ents)} "
              f"entities -> {path}")
    return 0


def render_report(report):
    lines = []
    totals = report["totals"]
    lines.append("Pattern totals: "
                 f"distinct={totals['distinct']} shared={totals['shared']} "
                 f"exclusive_a={totals['exclusive_a']} "
                 f"exclusive_b={totals['exclusive_b']}")
    ks = report["ks"]
    if ks is None:
        lines.append("KS: not computed (empty pattern domain)")
    else:
        lines.append(f"KS ({report['ks_domain']} domain): D={ks['d']:.4f} "
                     f"critical_D={ks['critical_d']:.4f} alpha={ks['alpha']} "
                     f"reject={ks['reject']}")
    lines.append("")
    lines.append(f"{'Test Description':40} {'tested':>8} {'different':>10} "
                 f"{'percent':>8}")
    for row in report["proportion_tests"]:
        lines.append(f"{row['test']:40} {row['tested']:>8} "
                     f"{row['different']:>10} {row['percent']:>7}%")
    lines.append("")
    top = report["top_patterns"]
    support_keys = [k for k in (top[0].keys() if top else [])
                    if k.startswith("support_")]
    header = f"{'rank':>4} {'IG':>8}"
    for k in support_keys:
        header += f" {k:>16}"
    header += "  pattern"
    lines.append(header)
    for p in top:
        line = f"{p['rank']:>4} {p['ig']:>8.4f}"
        for k in support_keys:
            line += f" {p[k]:>16.4f}"
        line += f"  {p['tirp']}"
        lines.append(line)
    return "\n".join(lines)


def cmd_discriminate(args):
    mined_a, header_a = read_mined(args.mined_a)
    mined_b, header_b = read_mined(args.mined_b)
    if header_a["config"] != header_b["config"]:
        raise DataValidationError(
            "mining configs differ between the two inputs: "
            f"{header_a['config']} vs {header_b['config']}")
    conf = header_a["config"]
    cfg = MinerConfig(
        min_support=conf["min_support"],
        relation=RelationConfig(conf["epsilon"], conf["max_gap"]),
        max_pattern_len=conf["max_pattern_len"],
    )
    labels = load_labels(args.labels)
    intervals = read_intervals(args.intervals)
    label_a = header_a.get("class_label", "a")
    label_b = header_b.get("class_label", "b")
    entities_a = sorted(e for e, c in labels.items() if c == label_a)
    entities_b = sorted(e for e, c in labels.items() if c == label_b)
    if not entities_a or not entities_b:
        raise DataValidationError(
            f"labels file has no entities for class {label_a!r} or {label_b!r}")

    report = compare_cohorts(
        mined_a, mined_b, entities_a, entities_b, intervals, cfg,
        alpha=args.alpha, ks_domain=args.ks_domain,
        split_seed=args.split_seed, top_n=args.top,
        label_a=label_a, label_b=label_b)
    payload = report.to_dict()
    payload["config"] = conf
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(render_report(payload))
    print(f"\nwrote report to {args.out}")
    return 0


def cmd_synth(args):
    with open(args.config, encoding="utf-8") as fh:
        data = json.load(fh)
    kb_path = data.get("kb")
    if not kb_path:
        raise DataValidationError("synth config must name a 'kb' file")
    kb_path = Path(kb_path)
    if not kb_path.is_absolute():
        kb_path = Path(args.config).parent / kb_path
    kb = load_kb(kb_path)
    cfg = SynthConfig.from_dict(data)
    out = write_outputs(cfg, kb, args.out_dir)
    print(f"wrote events.csv, labels.csv, reference_times.csv to {out}")
    return 0


def cmd_report(args):
    with open(args.infile, encoding="utf-8") as fh:
        payload = json.load(fh)
    payload = dict(payload)
    payload["top_patterns"] = payload.get("top_patterns", [])[:args.top]
    print(render_report(payload))
    return 0


def build_parser():
    parser = _Parser(prog="tirp-forge", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("abstract", help="raw events -> symbolic intervals")
    p.add_argument("--events", required=True)
    p.add_argument("--kb", required=True)
    p.add_argument("--windows", help="reference-times CSV (optional)")
    p.add_argument("--window-min", type=int, default=720,
                   help="trailing window length in minutes")
    p.add_argument("--lab-concepts",
                   help="file listing concepts gathered from admission")
    p.add_argument("--time-format", choices=["rfc3339", "minutes"],
                   default="rfc3339")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_abstract)

    p = sub.add_parser("mine", help="frequent pattern mining per class")
    p.add_argument("--intervals", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--min-support", type=float, default=0.10)
    p.add_argument("--epsilon", type=int, default=0)
    p.add_argument("--max-gap", type=int, default=720)
    p.add_argument("--max-len", type=int, default=5)
    p.add_argument("--threads", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("discriminate", help="compare two mined classes")
    p.add_argument("--mined-a", required=True)
    p.add_argument("--mined-b", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--intervals", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--ks-domain", choices=["shared", "union"],
                   default="shared")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_discriminate)

    p = sub.add_parser("synth", help="generate a synthetic labeled cohort")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render a report JSON as text tables")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--top", type=int, default=20)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MiningInvariantError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
