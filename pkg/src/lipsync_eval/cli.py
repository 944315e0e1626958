"""Command-line interface.

Exit status: 0 on success, 2 for configuration or schema problems, 3 for
data problems. Reports are written atomically.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io as lio
from .core import MetricReport
from .errors import ConfigError, DegenerateError, LipSyncError, SchemaError
from .loss import (
    DEFAULT_TEMPERATURE,
    PERCEPTUAL_WEIGHT,
    batches_from_embeddings,
    info_nce,
    symmetric_contrastive,
    total_stage1_loss,
)
from .mtm import clip_mtm, mtm_report
from .plot import sweep_svg
from .readability import WindowingConfig, lve, plrs
from .signal import rms
from .slcc import intensity_table, levelwise_slcc, lip_displacement, slcc, slcc_delta

SUBCOMMANDS = ("mtm", "slcc", "plrs", "lve", "loss", "synth", "report")
JOBS_ENV = "LIPSYNC_EVAL_JOBS"
# execution-only options; they never change results and stay out of reports
_UNRECORDED = {"out", "jobs", "plot", "func", "format", "out_dir"}


def _pool_map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _resolve_jobs(value) -> int:
    if value is None:
        value = os.environ.get(JOBS_ENV, "1")
    try:
        jobs = int(value)
    except ValueError:
        raise ConfigError(f"jobs: not an integer: {value!r}") from None
    if jobs < 1:
        raise ConfigError(f"jobs: must be >= 1, got {jobs}")
    return jobs


def parse_offsets(text: str) -> list[int]:
    """``"0..10"`` (inclusive range) or ``"0,2,5"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"sweep-offsets: cannot parse {text!r}") from None


def _run_config(args) -> dict:
    return {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in _UNRECORDED and v is not None and v is not False
    }


def _with_config(report: MetricReport, args, **extra) -> MetricReport:
    params = dict(report.parameters)
    params.update(extra)
    params["run_config"] = _run_config(args)
    return MetricReport(report.metric_name, report.per_clip, report.aggregate, report.unit, params)


def _paired(args) -> tuple[dict, dict]:
    gt = lio.read_manifest(args.gt).by_id()
    pred = lio.read_manifest(args.pred).by_id()
    if set(gt) != set(pred):
        only_gt = sorted(set(gt) - set(pred))
        only_pred = sorted(set(pred) - set(gt))
        raise SchemaError(f"manifests cover different clips: gt-only {only_gt}, pred-only {only_pred}")
    return gt, pred


def _single_manifest(args) -> dict:
    path = args.pred or args.gt
    if path is None:
        raise ConfigError("need --pred or --gt manifest")
    return lio.read_manifest(path).by_id()


# -- per-clip workers (top level so they pickle) ------------------------------


def _mtm_task(item):
    cid, gt_path, pred_path, lm, sigma, offset = item
    gt = lio.read_mesh(gt_path)
    if pred_path is None:
        from .synth import shift_mesh

        pred = shift_mesh(gt, offset)
    else:
        pred = lio.read_mesh(pred_path)
    return cid, clip_mtm(gt, pred, lm, sigma=sigma, clip_id=cid), gt.fps


def _lve_task(item):
    cid, gt_path, pred_path, lm, reduction = item
    return cid, lve(lio.read_mesh(gt_path), lio.read_mesh(pred_path), lm, reduction)


def _intensity_task(item):
    cid, audio_path, mesh_path, lm, eye = item
    audio = lio.read_wav(audio_path)
    return cid, rms(audio.samples), lip_displacement(lio.read_mesh(mesh_path), lm, eye)


def _plrs_task(item):
    cid, emb_path, layer = item
    return cid, plrs(lio.read_embeddings(emb_path), layer).aggregate


def _loss_task(item):
    cid, emb_path, tau, similarity = item
    batches = batches_from_embeddings(lio.read_embeddings(emb_path))
    forward = sum(info_nce(b, tau, similarity) for b in batches.values())
    backward = sum(info_nce(b.swapped(), tau, similarity) for b in batches.values())
    return cid, symmetric_contrastive(batches, tau, similarity), forward, backward


# -- subcommands ---------------------------------------------------------------


def cmd_mtm(args, jobs):
    if args.sweep_offsets:
        return _mtm_sweep(args, jobs)
    if args.gt is None or args.pred is None:
        raise ConfigError("mtm needs --gt and --pred (or --sweep-offsets)")
    gt, pred = _paired(args)
    items = [
        (cid, gt[cid].mesh_path, pred[cid].mesh_path, gt[cid].landmarks, args.sigma, 0)
        for cid in sorted(gt)
    ]
    results = {cid: res for cid, res, _ in _pool_map(_mtm_task, items, jobs)}
    return _with_config(mtm_report(results, args.sigma), args)


def _mtm_sweep(args, jobs):
    if args.gt is None:
        raise ConfigError("--sweep-offsets needs --gt")
    gt = lio.read_manifest(args.gt).by_id()
    offsets = parse_offsets(args.sweep_offsets)
    if not offsets:
        raise ConfigError("sweep-offsets: empty")
    per_offset = {}
    undefined = {}
    fps = None
    for k in offsets:
        items = [(cid, gt[cid].mesh_path, None, gt[cid].landmarks, args.sigma, k) for cid in sorted(gt)]
        out = _pool_map(_mtm_task, items, jobs)
        fps = out[0][2]
        try:
            rep = mtm_report({cid: res for cid, res, _ in out}, args.sigma)
        except DegenerateError:
            raise DegenerateError(f"MTM undefined for every clip at offset {k}") from None
        per_offset[k] = rep.aggregate
        undefined[f"offset_{k:02d}"] = list(rep.parameters["undefined_clips"])
    if args.plot:
        svg = sweep_svg(list(per_offset), list(per_offset.values()), fps)
        lio.atomic_write(args.plot, svg.encode())
    per_clip = {f"offset_{k:02d}": v for k, v in per_offset.items()}
    report = MetricReport(
        metric_name="mtm_sweep",
        per_clip=per_clip,
        aggregate=float(np.mean(list(per_offset.values()))),
        unit="ms",
        parameters={"offsets": offsets, "undefined_clips": undefined, "sigma": args.sigma},
    )
    return _with_config(report, args)


def _intensity(manifest_audio: dict, meshes: dict, eye: bool, jobs: int) -> tuple[dict, dict]:
    items = []
    for cid in sorted(manifest_audio):
        rec = manifest_audio[cid]
        if rec.audio_path is None:
            raise SchemaError(f"{cid}: SLCC needs an audio file")
        items.append((cid, rec.audio_path, meshes[cid].mesh_path, meshes[cid].landmarks, eye))
    out = _pool_map(_intensity_task, items, jobs)
    return {c: s for c, s, _ in out}, {c: d for c, _, d in out}


def cmd_slcc(args, jobs):
    if args.gt is None:
        raise ConfigError("slcc needs --gt (audio source)")
    if args.pred:
        gt, pred = _paired(args)
    else:
        gt = lio.read_manifest(args.gt).by_id()
        pred = gt
    identities = {cid: r.identity for cid, r in gt.items()}
    levels = {cid: r.intensity_level for cid, r in gt.items()}
    speech, lip = _intensity(gt, pred, args.eye_normalize, jobs)
    table = intensity_table(speech, lip, identities, levels)
    report = slcc(table)
    extra = {"levels": levelwise_slcc(table)}
    reference = args.reference
    if reference is None and args.pred:
        _, gt_lip = _intensity(gt, gt, args.eye_normalize, jobs)
        ref_table = intensity_table(speech, gt_lip, identities, levels)
        reference = slcc(ref_table).aggregate
        extra["reference_levels"] = levelwise_slcc(ref_table)
    if reference is not None:
        extra["reference"] = reference
        extra["delta"] = slcc_delta(report.aggregate, reference)
    return _with_config(report, args, **extra)


def cmd_lve(args, jobs):
    gt, pred = _paired(args)
    items = [
        (cid, gt[cid].mesh_path, pred[cid].mesh_path, gt[cid].landmarks, args.reduction)
        for cid in sorted(gt)
    ]
    per_clip = dict(_pool_map(_lve_task, items, jobs))
    report = MetricReport(
        "lve", per_clip, float(np.mean(list(per_clip.values()))), "mesh units",
        {"reduction": args.reduction},
    )
    return _with_config(report, args)


def _embedding_items(manifest: dict, *rest):
    items = []
    for cid in sorted(manifest):
        rec = manifest[cid]
        if rec.embedding_path is None:
            raise SchemaError(f"{cid}: no embeddings file in manifest")
        items.append((cid, rec.embedding_path, *rest))
    return items


def cmd_plrs(args, jobs):
    manifest = _single_manifest(args)
    per_clip = dict(_pool_map(_plrs_task, _embedding_items(manifest, args.layer), jobs))
    report = MetricReport(
        "plrs", per_clip, float(np.mean(list(per_clip.values()))), "cosine",
        {"layer": "last" if args.layer is None else args.layer},
    )
    return _with_config(report, args)


def cmd_loss(args, jobs):
    manifest = _single_manifest(args)
    if not args.tau > 0:
        raise ConfigError(f"tau: must be positive, got {args.tau}")
    out = _pool_map(_loss_task, _embedding_items(manifest, args.tau, args.similarity), jobs)
    per_clip = {cid: sym for cid, sym, _, _ in out}
    mean_sym = float(np.mean(list(per_clip.values())))
    extra = {
        "speech_to_mesh": {cid: f for cid, _, f, _ in out},
        "mesh_to_speech": {cid: b for cid, _, _, b in out},
        "perceptual": args.weight * mean_sym,
    }
    if args.mae is not None:
        extra["total_stage1"] = total_stage1_loss(args.mae, mean_sym, args.lam)
    report = MetricReport("infonce", per_clip, mean_sym, "nats", {"temperature": args.tau})
    return _with_config(report, args, **extra)


def cmd_synth(args, jobs):
    from .synth import write_fixture_corpus

    if args.out_dir is None:
        raise ConfigError("synth needs --out-dir")
    write_fixture_corpus(
        args.out_dir,
        n_clips=args.clips,
        n_identities=args.identities,
        duration_s=args.duration,
        fps=args.fps,
        mouth_hz=args.mouth_hz,
        noise_sigma=args.noise,
        offset_frames=args.offset,
        seed=args.seed,
        dim=args.dim,
        windowing=WindowingConfig(args.window, args.stride),
    )
    return None


def cmd_report(args, jobs):
    merged = {}
    for path in args.inputs:
        doc = lio.read_report(path)
        name = doc["metric"]
        if name in merged:
            raise SchemaError(f"metric {name!r} appears in more than one input")
        merged[name] = doc
    return merged


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lipsync-eval", description="Lip-sync evaluation metrics.")
    sub = p.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True

    def add(name, func, help, manifests=True, output=True):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(func=func)
        if manifests:
            sp.add_argument("--gt", help="ground-truth manifest")
            sp.add_argument("--pred", help="prediction manifest")
        if output:
            sp.add_argument("--out", required=True, help="report path")
            sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--jobs", type=int, default=None, help=f"worker processes (env {JOBS_ENV})")
        return sp

    sp = add("mtm", cmd_mtm, "mean temporal misalignment")
    sp.add_argument("--sigma", type=float, default=1.0, help="Gaussian sigma in frames")
    sp.add_argument("--sweep-offsets", help="inject offsets into --gt, e.g. 0..10")
    sp.add_argument("--plot", help="SVG output for --sweep-offsets")

    sp = add("slcc", cmd_slcc, "speech-lip intensity correlation")
    sp.add_argument("--eye-normalize", action="store_true")
    sp.add_argument("--reference", type=float, help="reference r_SL for the delta")

    sp = add("lve", cmd_lve, "lip vertex error")
    sp.add_argument("--reduction", choices=("max", "mean"), default="max")

    sp = add("plrs", cmd_plrs, "perceptual lip readability score")
    sp.add_argument("--layer", type=int, default=None, help="layer id (default: last)")

    sp = add("loss", cmd_loss, "contrastive losses over EMB1 windows")
    sp.add_argument("--tau", type=float, default=DEFAULT_TEMPERATURE)
    sp.add_argument("--weight", type=float, default=PERCEPTUAL_WEIGHT, help="perceptual loss weight")
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--mae", type=float, default=None, help="reconstruction loss for the total")
    sp.add_argument("--similarity", choices=("cosine", "dot"), default="cosine")

    sp = add("synth", cmd_synth, "write synthetic fixtures", manifests=False, output=False)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--clips", type=int, default=6)
    sp.add_argument("--identities", type=int, default=2)
    sp.add_argument("--duration", type=float, default=3.0)
    sp.add_argument("--fps", type=float, default=25.0)
    sp.add_argument("--mouth-hz", type=float, default=2.0)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--offset", type=int, default=0, help="delay of the prediction meshes")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dim", type=int, default=16)
    sp.add_argument("--window", type=int, default=5)
    sp.add_argument("--stride", type=int, default=5)

    sp = add("report", cmd_report, "merge metric reports", manifests=False)
    sp.add_argument("inputs", nargs="+")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        jobs = _resolve_jobs(args.jobs)
        result = args.func(args, jobs)
        if isinstance(result, MetricReport):
            lio.write_report(result, args.out, args.format)
        elif isinstance(result, dict):
            if args.format != "json":
                raise ConfigError("report: merged output is JSON only")
            lio.atomic_write(args.out, (lio.dumps_json(result) + "\n").encode())
    except LipSyncError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
