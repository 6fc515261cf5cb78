"""Batch command line: simulate, track, extract, fuse, mrmr, train, eval, sweep, report.

All artifacts of one run live under ``--run-dir``. Every output carries the
seed and a hash of the run configuration (paths excluded) in its header.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import classify as C
from . import pipeline as P
from . import simulator as S
from .core import Edition, manifest, read_fused_csv, write_fused_csv, write_manifest
from .selection import MrmrRanking, rank_dataset

log = logging.getLogger("engage")

CLASSES = {
    3: ("noOne", "someone", "wantInteraction"),
    5: ("noOne", "someone", "wantInteraction", "interaction", "leaveInteraction"),
}
SVM_NOTE = "SVM is linear one-vs-rest (hinge loss, Pegasos); no kernel, so absolute numbers are not comparable to a kernel SVM."


class StageError(Exception):
    def __init__(self, stage: str, msg: str):
        super().__init__(msg)
        self.stage = stage


@dataclass(frozen=True)
class RunConfig:
    run_dir: str = "run"
    seed: int = 7
    manifest: int = 32
    labels: int = 3
    features: str = "multimodal"
    classifier: str = "svm"
    k: int = 10
    mrmr_k: int | None = None
    mrmr_scheme: str = "mid"
    scenario: str = "builtin"
    repeat: int = 4

    def hashed(self) -> dict:
        d = asdict(self)
        d.pop("run_dir")
        return d

    @property
    def config_hash(self) -> str:
        return P.config_hash(self.hashed())

    @property
    def header(self) -> dict:
        return {"seed": self.seed, "config_hash": self.config_hash}

    @property
    def header_line(self) -> str:
        return f"seed={self.seed} config_hash={self.config_hash}"

    @property
    def root(self) -> Path:
        return Path(self.run_dir)

    @property
    def streams_dir(self) -> Path:
        return self.root / "streams"

    @property
    def features_dir(self) -> Path:
        return self.root / "features"

    @property
    def fused_path(self) -> Path:
        return self.root / f"fused_{self.manifest}.csv"

    def ranking_path(self, labels: int | None = None) -> Path:
        return self.root / f"ranking_{self.manifest}_{labels or self.labels}class_{self.mrmr_scheme}.tsv"

    def tag(self, labels: int | None = None, features: str | None = None) -> str:
        k = f"_k{self.mrmr_k}" if self.mrmr_k and (features or self.features) == "multimodal" else ""
        return f"{labels or self.labels}class_{features or self.features}_{self.classifier}{k}"


# -- helpers ----------------------------------------------------------------

def _recordings(dirpath: Path, stage: str) -> list[Path]:
    if not dirpath.is_dir():
        raise StageError(stage, f"{dirpath} does not exist; run the previous stage first")
    dirs = sorted(p for p in dirpath.iterdir() if p.is_dir())
    if not dirs:
        raise StageError(stage, f"no recordings under {dirpath}")
    return dirs


def _scripts(cfg: RunConfig, script_path: str | None) -> list[S.ScenarioScript]:
    if script_path:
        path = Path(script_path)
        if not path.is_file():
            raise StageError("simulate", f"script file {path} not found")
        return [S.ScenarioScript.load(path)]
    root = np.random.SeedSequence(cfg.seed)
    if cfg.scenario == "suite":
        return S.engagement_suite(10 * cfg.repeat // 2, 10 * cfg.repeat // 2, cfg.seed)
    names = list(S.BUILTIN) if cfg.scenario == "builtin" else [cfg.scenario]
    for n in names:
        if n not in S.BUILTIN:
            raise StageError("simulate", f"unknown scenario {n!r}; choose from {sorted(S.BUILTIN)}, builtin, suite")
    kids = iter(root.spawn(len(names) * cfg.repeat))
    return [S.BUILTIN[n](np.random.default_rng(next(kids)), f"{n}_{i:02d}") for n in names for i in range(cfg.repeat)]


def _sensor_seed(cfg: RunConfig, index: int) -> int:
    return int(np.random.SeedSequence([cfg.seed, index]).generate_state(1)[0])


def _load_dataset(cfg: RunConfig, stage: str):
    if not cfg.fused_path.is_file():
        raise StageError(stage, f"{cfg.fused_path} missing; run 'fuse' first")
    return read_fused_csv(cfg.fused_path)


def _ranking(cfg: RunConfig, ds, labels: int, stage: str) -> MrmrRanking:
    path = cfg.ranking_path(labels)
    if path.is_file():
        return MrmrRanking.from_text(path.read_text(), cfg.mrmr_scheme)
    log.info("%s: ranking %s absent, computing it", stage, path.name)
    return _compute_ranking(cfg, ds, labels)


def _compute_ranking(cfg: RunConfig, ds, labels: int) -> MrmrRanking:
    X, y = P.learning_view(ds, labels, ds.ids)
    return rank_dataset(X, y, ds.ids, None, cfg.mrmr_scheme)


def _trainer(cfg: RunConfig):
    if cfg.classifier == "svm":
        return C.svm_trainer()
    if cfg.classifier == "mlp":
        return C.mlp_trainer()
    raise StageError("train", f"unknown classifier {cfg.classifier!r}")


def _view(cfg: RunConfig, ds, labels: int, features: str, stage: str, mrmr_k: int | None = None):
    mrmr_k = cfg.mrmr_k if mrmr_k is None else mrmr_k
    ranking = None
    if features == "multimodal" and mrmr_k is not None:
        ranking = _ranking(cfg, ds, labels, stage).features
    ids = P.feature_ids(features, ds.ids, ranking, mrmr_k)
    X, y = P.learning_view(ds, labels, ids)
    return ids, X, y


def _cv(cfg: RunConfig, ds, labels: int, features: str, stage: str, mrmr_k: int | None = None):
    ids, X, y = _view(cfg, ds, labels, features, stage, mrmr_k)
    classes = [c for c in CLASSES[labels] if c in set(y.tolist())]
    return ids, C.cross_validate(X, y, _trainer(cfg), cfg.k, cfg.seed, classes)


def _metrics_csv(rows: list[list], header: list[str], cfg: RunConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# {cfg.header_line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _metric_rows(m: C.Metrics) -> list[list]:
    return [[c, f"{p:.6f}", f"{r:.6f}", int(s)] for c, p, r, s in zip(m.classes, m.precision, m.recall, m.support)]


def metrics_table(m: C.Metrics) -> str:
    lines = [f"{'Class':<18}{'Precision':>10}{'Recall':>10}{'Support':>9}"]
    for c, p, r, s in zip(m.classes, m.precision, m.recall, m.support):
        lines.append(f"{c:<18}{p:>10.2f}{r:>10.2f}{int(s):>9d}")
    return "\n".join(lines)


def side_by_side(left: C.Metrics, right: C.Metrics, names=("Multimodal", "Spatial only")) -> str:
    w = 22
    lines = [
        f"{'':<18}{names[0]:^{w}}{names[1]:^{w}}",
        f"{'Class':<18}" + f"{'Precision':>11}{'Recall':>11}" * 2,
    ]
    for c in left.classes:
        pl, rl = left.of(c)
        pr, rr = right.of(c)
        lines.append(f"{c:<18}{pl:>11.2f}{rl:>11.2f}{pr:>11.2f}{rr:>11.2f}")
    return "\n".join(lines)


# -- commands ---------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, script: str | None = None) -> list[str]:
    scripts = _scripts(cfg, script)
    out = []
    for i, sc in enumerate(scripts):
        try:
            rec = S.simulate(sc, S.SensorConfig(seed=_sensor_seed(cfg, i)))
        except ValueError as exc:
            raise StageError("simulate", f"{sc.name}: {exc}") from None
        sums = P.save_streams(rec, cfg.streams_dir / sc.name, cfg.header)
        for name in sorted(sums):
            out.append(f"{sums[name]}  {sc.name}/{P.STREAM_FILES[name]}")
    return out


def cmd_track(cfg: RunConfig) -> list[str]:
    out = []
    for d in _recordings(cfg.streams_dir, "track"):
        streams = P.load_streams(d)
        target = cfg.features_dir / d.name
        target.mkdir(parents=True, exist_ok=True)
        recs = P.track_stream(streams)
        P.write_jsonl(target / P.FeatureStreams.FILES["pedestrians"], recs, cfg.header)
        out.append(f"{d.name}: {len(recs)} pedestrian records")
    return out


def cmd_extract(cfg: RunConfig) -> list[str]:
    out = []
    for d in _recordings(cfg.streams_dir, "extract"):
        streams = P.load_streams(d)
        target = cfg.features_dir / d.name
        target.mkdir(parents=True, exist_ok=True)
        sad, loc = P.extract_audio(streams.sad, streams.localization, streams.t_end)
        for attr, recs in (("body", P.extract_body(streams.skeletons)), ("faces", P.extract_faces(streams.faces)),
                           ("sad", sad), ("localization", loc)):
            P.write_jsonl(target / P.FeatureStreams.FILES[attr], recs, cfg.header)
        out.append(f"{d.name}: {len(streams.skeletons)} skeletons, {len(streams.faces)} faces, {len(sad)} sad ticks")
    return out


def cmd_fuse(cfg: RunConfig) -> list[str]:
    m = manifest(Edition(cfg.manifest))
    recordings = []
    for d in _recordings(cfg.streams_dir, "fuse"):
        fdir = cfg.features_dir / d.name
        if not (fdir / P.FeatureStreams.FILES["pedestrians"]).is_file():
            raise StageError("fuse", f"{fdir} lacks pedestrian features; run 'track' first")
        if not (fdir / P.FeatureStreams.FILES["body"]).is_file():
            raise StageError("fuse", f"{fdir} lacks body features; run 'extract' first")
        streams = P.load_streams(d)
        recordings.append(P.fuse_features(P.load_features(fdir), streams.timeline, streams.t_end, m))
    frames = P.concatenate(recordings)
    write_fused_csv(cfg.fused_path, frames, m, cfg.header_line)
    write_manifest(m, cfg.root / f"manifest_{cfg.manifest}.tsv")
    counts = Counter(f.label.value for f in frames)
    return [f"{cfg.fused_path}: {len(frames)} frames"] + [f"  {c}: {counts.get(c, 0)}" for c in CLASSES[5]]


def cmd_mrmr(cfg: RunConfig) -> list[str]:
    ds = _load_dataset(cfg, "mrmr")
    ranking = _compute_ranking(cfg, ds, cfg.labels)
    ranking.write(cfg.ranking_path(), cfg.header_line)
    shown = ranking.features[: cfg.mrmr_k] if cfg.mrmr_k else ranking.features
    return [f"{i + 1}\t{f}" for i, f in enumerate(shown)]


def cmd_train(cfg: RunConfig) -> list[str]:
    ds = _load_dataset(cfg, "train")
    ids, X, y = _view(cfg, ds, cfg.labels, cfg.features, "train")
    model = _trainer(cfg)(X, y, cfg.seed)
    path = cfg.root / "models" / f"model_{cfg.tag()}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    C.save_model(model, path, {**cfg.header, "features": ids})
    return [f"{path}: {len(ids)} features, {len(y)} frames"]


def cmd_eval(cfg: RunConfig) -> list[str]:
    ds = _load_dataset(cfg, "eval")
    ids, cv = _cv(cfg, ds, cfg.labels, cfg.features, "eval")
    out_dir = cfg.root / "metrics"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"metrics_{cfg.tag()}.csv").write_text(
        _metrics_csv(_metric_rows(cv.metrics), ["class", "precision", "recall", "support"], cfg))
    text = f"# {cfg.header_line}\n{len(ids)} features, {cfg.k}-fold pooled\n{metrics_table(cv.metrics)}\n"
    (out_dir / f"metrics_{cfg.tag()}.txt").write_text(text)
    return text.rstrip("\n").splitlines()


def sweep_rows(cfg: RunConfig, ds, labels: int) -> list[dict]:
    ranking = _ranking(cfg, ds, labels, "sweep")
    rows = []
    for K in range(len(ranking.features), 1, -1):
        _, cv = _cv(cfg, ds, labels, "multimodal", "sweep", K)
        row = {"K": K, "macro_precision": cv.metrics.macro_precision, "macro_recall": cv.metrics.macro_recall}
        for c in cv.metrics.classes:
            p, r = cv.metrics.of(c)
            row[f"precision_{c}"], row[f"recall_{c}"] = p, r
        rows.append(row)
    return rows


def cmd_sweep(cfg: RunConfig) -> list[str]:
    from .plotting import plot_sweep

    ds = _load_dataset(cfg, "sweep")
    rows = sweep_rows(cfg, ds, cfg.labels)
    keys = list(rows[0])
    body = [[r[k] if k == "K" else f"{r[k]:.6f}" for k in keys] for r in rows]
    base = cfg.root / f"sweep_{cfg.labels}class_{cfg.classifier}_{cfg.mrmr_scheme}"
    base.with_suffix(".csv").write_text(_metrics_csv(body, keys, cfg))
    classes = [k[len("precision_"):] for k in keys if k.startswith("precision_")]
    plot_sweep(rows, classes, base.with_suffix(".png"), cfg.header)
    return [",".join(map(str, keys))] + [",".join(map(str, b)) for b in body]


def cmd_report(cfg: RunConfig) -> list[str]:
    from .plotting import plot_class_distribution, plot_class_metrics

    ds = _load_dataset(cfg, "report")
    out_dir = cfg.root / "report"
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"# {cfg.header_line}", f"classifier={cfg.classifier} k={cfg.k} manifest={cfg.manifest}"]
    if cfg.classifier == "svm":
        lines.append(f"note: {SVM_NOTE}")
    csv_rows = []
    for labels in (3, 5):
        res = {}
        for features in ("multimodal", "spatial"):
            ids, cv = _cv(cfg, ds, labels, features, "report")
            res[features] = (ids, cv.metrics)
            csv_rows += [[labels, features, len(ids), *r] for r in _metric_rows(cv.metrics)]
        (mi, mm), (si, sm) = res["multimodal"], res["spatial"]
        lines += ["", f"== {labels}-class ({len(mi)} multimodal features vs {len(si)} spatial features) ==",
                  side_by_side(mm, sm)]
        plot_class_metrics({"multimodal": mm, "spatial": sm}, f"{labels}-class, {cfg.classifier}",
                           out_dir / f"classes_{labels}.png", cfg.header)
    counts = Counter(ds.labels)
    dist = {c: counts.get(c, 0) for c in CLASSES[5]}
    lines += ["", "== class distribution ==", *(f"{c:<18}{n:>8d}" for c, n in dist.items())]
    (out_dir / "report.txt").write_text("\n".join(lines) + "\n")
    (out_dir / "report.csv").write_text(_metrics_csv(
        csv_rows, ["labels", "features", "n_features", "class", "precision", "recall", "support"], cfg))
    (out_dir / "class_distribution.csv").write_text(
        _metrics_csv([[c, n] for c, n in dist.items()], ["class", "frames"], cfg))
    plot_class_distribution(dist, out_dir / "class_distribution.png", cfg.header)
    return lines


def cmd_pipeline(cfg: RunConfig, script: str | None = None) -> list[str]:
    out = []
    for stage, fn in (
        ("simulate", lambda: cmd_simulate(cfg, script)), ("track", lambda: cmd_track(cfg)),
        ("extract", lambda: cmd_extract(cfg)), ("fuse", lambda: cmd_fuse(cfg)), ("mrmr", lambda: cmd_mrmr(cfg)),
        ("train", lambda: cmd_train(cfg)), ("eval", lambda: cmd_eval(cfg)), ("report", lambda: cmd_report(cfg)),
    ):
        log.info("stage %s", stage)
        out += _staged(stage, fn)
    return out


def _staged(stage: str, fn):
    try:
        return fn()
    except StageError:
        raise
    except (ValueError, KeyError, OSError) as exc:
        raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc


COMMANDS = {
    "simulate": cmd_simulate, "track": cmd_track, "extract": cmd_extract, "fuse": cmd_fuse,
    "mrmr": cmd_mrmr, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep, "report": cmd_report,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--run-dir", default="run", help="directory holding every artifact of the run")
    common.add_argument("--seed", type=int, default=7)
    common.add_argument("--manifest", type=int, choices=(32, 99), default=32)
    common.add_argument("--labels", type=int, choices=(3, 5), default=3)
    common.add_argument("--features", choices=("multimodal", "spatial"), default="multimodal")
    common.add_argument("--classifier", choices=("svm", "mlp"), default="svm")
    common.add_argument("--k", type=int, default=10, help="cross-validation folds")
    common.add_argument("--mrmr-k", type=int, default=None, help="keep the top-K ranked features")
    common.add_argument("--mrmr-scheme", choices=("mid", "miq"), default="mid")
    common.add_argument("--scenario", default="builtin",
                        help="builtin scenario name, 'builtin' for all of them, or 'suite'")
    common.add_argument("--repeat", type=int, default=4, help="instances per scenario")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="engage", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name in ("simulate", "pipeline"):
            sp.add_argument("--script", help="JSON scenario script instead of a builtin")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = RunConfig(args.run_dir, args.seed, args.manifest, args.labels, args.features, args.classifier,
                    args.k, args.mrmr_k, args.mrmr_scheme, args.scenario, args.repeat)
    kwargs = {"script": args.script} if args.command in ("simulate", "pipeline") else {}
    try:
        cfg.root.mkdir(parents=True, exist_ok=True)
        lines = _staged(args.command, lambda: COMMANDS[args.command](cfg, **kwargs))
    except StageError as exc:
        print(f"engage: error [{exc.stage}]: {exc}", file=sys.stderr)
        return 1
    for line in lines:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
