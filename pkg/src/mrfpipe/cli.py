"""Command-line pipeline driver.

Subcommands cover every pipeline stage: dictionary simulation, subspace
fitting, phantom generation, acquisition, dictionary matching, network
training, network reconstruction, map evaluation and a benchmark that
times matching against inference. Heavy imports happen inside ``main``
so ``--threads`` can pin the BLAS pool first.
"""

from __future__ import annotations

import argparse
import functools
import os
import sys
import time
from pathlib import Path


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrfpipe",
        description="Fingerprinting reconstruction pipeline: simulate, match, learn.",
    )
    parser.add_argument("--config", type=Path, default=None,
                        help="path to a 'section.key = value' configuration file")
    parser.add_argument("--seed", type=int, default=0, help="master random seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap the BLAS thread pool before numpy loads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dict", help="simulate the fingerprint dictionary")
    p.add_argument("--out", type=Path, required=True, help="output dictionary file")

    p = sub.add_parser("basis", help="fit the compression basis from a dictionary")
    p.add_argument("--dict", dest="dict_path", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="basis file (sidecar .txt beside it)")

    p = sub.add_parser("phantom", help="generate a random phantom's ground-truth maps")
    p.add_argument("--out", type=Path, required=True, help="output maps file")
    p.add_argument("--png-dir", type=Path, default=None,
                   help="also render per-channel PNGs into this directory")
    p.add_argument("--figure", type=Path, default=None, help="also render a map figure")

    p = sub.add_parser("acquire", help="simulate an undersampled acquisition of maps")
    p.add_argument("--maps", type=Path, required=True, help="ground-truth maps file")
    p.add_argument("--out", type=Path, required=True, help="output sample file")

    p = sub.add_parser("match", help="dictionary-match a sample back to maps")
    p.add_argument("--dict", dest="dict_path", type=Path, required=True)
    p.add_argument("--sample", type=Path, required=True)
    p.add_argument("--basis", type=Path, default=None,
                   help="match in the compressed domain using this basis")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("train", help="train the network on simulated samples")
    p.add_argument("--basis", type=Path, required=True)
    p.add_argument("--samples", type=Path, nargs="*", default=[],
                   help="training sample files")
    p.add_argument("--val", type=Path, nargs="*", default=[],
                   help="held-out sample files")
    p.add_argument("--generate", type=int, default=0,
                   help="generate this many training samples instead of reading files")
    p.add_argument("--generate-val", type=int, default=0,
                   help="generate this many held-out samples")
    p.add_argument("--out", type=Path, required=True, help="checkpoint directory")

    p = sub.add_parser("recon", help="reconstruct maps from a sample with a checkpoint")
    p.add_argument("--ckpt", type=Path, required=True, help="checkpoint directory")
    p.add_argument("--sample", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("eval", help="score predicted maps against ground truth")
    p.add_argument("--pred", type=Path, required=True, help="predicted maps file")
    p.add_argument("--truth", type=Path, required=True,
                   help="ground-truth maps file or sample file")
    p.add_argument("--method", type=str, default="predicted")
    p.add_argument("--out", type=Path, required=True, help="output CSV")

    p = sub.add_parser("bench", help="time matching vs network inference on one canvas")
    p.add_argument("--dict", dest="dict_path", type=Path, required=True)
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--height", type=int, default=None, help="canvas override")
    p.add_argument("--width", type=int, default=None, help="canvas override")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    return parser


def _basis_sidecar(path: Path) -> Path:
    return path.with_suffix(".txt")


def _load_truth(path):
    """Accept either a bare maps file (4 records) or a sample file (5)."""
    from .acquisition import load_maps, load_sample
    from .mrfa import read_arrays

    if len(read_arrays(path)) == 5:
        return load_sample(path)[1]
    return load_maps(path)


@functools.lru_cache(maxsize=4)
def _cached_scheme(height: int, width: int, n_frames: int, fraction: float):
    # masks are read-only downstream, so sharing one scheme object is safe
    from .acquisition import make_spiral_scheme

    return make_spiral_scheme(height, width, n_frames, sampling_fraction=fraction)


def _generate_sample(cfg, schedule, seed: int):
    """Phantom -> forward simulation -> undersampled acquisition."""
    from .acquisition import forward_simulate, undersample
    from .phantom import generate_phantom, random_brain_spec

    spec = random_brain_spec(
        cfg.phantom.height, cfg.phantom.width, seed=seed,
        lesions_min=cfg.phantom.lesions_min, lesions_max=cfg.phantom.lesions_max,
    )
    maps = generate_phantom(spec)
    tsmi = forward_simulate(maps, schedule)
    scheme = _cached_scheme(cfg.phantom.height, cfg.phantom.width, schedule.d0,
                            cfg.undersampling.fraction)
    noisy = undersample(tsmi, scheme, cfg.undersampling.noise_sigma, seed=seed + 1)
    return noisy, maps


def _cmd_dict(args, cfg):
    from .config import grid_from, schedule_from
    from .epg import build_dictionary, save_dictionary

    schedule = schedule_from(cfg)
    grid = grid_from(cfg)
    t0 = time.perf_counter()
    dictionary = build_dictionary(schedule, grid, normalize=True)
    seconds = time.perf_counter() - t0
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_dictionary(dictionary, args.out)
    print(f"dictionary: {dictionary.n_atoms} atoms, d0={dictionary.d0}, "
          f"{seconds:.2f}s -> {args.out}")
    return 0


def _cmd_basis(args, cfg):
    from .epg import load_dictionary
    from .subspace import fit_subspace, save_basis

    dictionary = load_dictionary(args.dict_path)
    basis = fit_subspace(dictionary, cfg.subspace.d1)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_basis(basis, args.out, _basis_sidecar(args.out))
    print(f"basis: d1={basis.d1} of d0={basis.d0}, captured energy "
          f"{basis.captured_energy_fraction:.8f} -> {args.out}")
    return 0


def _cmd_phantom(args, cfg):
    from .acquisition import save_maps
    from .phantom import generate_phantom, random_brain_spec

    spec = random_brain_spec(
        cfg.phantom.height, cfg.phantom.width, seed=args.seed,
        lesions_min=cfg.phantom.lesions_min, lesions_max=cfg.phantom.lesions_max,
    )
    maps = generate_phantom(spec)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_maps(args.out, maps)
    if args.png_dir is not None:
        from .pngio import write_map_pngs

        write_map_pngs(maps, args.png_dir, stem="truth")
    if args.figure is not None:
        from .report import save_map_figure

        args.figure.parent.mkdir(parents=True, exist_ok=True)
        save_map_figure(args.figure, maps, title=f"phantom seed {args.seed}")
    print(f"phantom: {maps.shape[0]}x{maps.shape[1]}, "
          f"{int(maps.mask.sum())} foreground voxels -> {args.out}")
    return 0


def _cmd_acquire(args, cfg):
    from .acquisition import (forward_simulate, load_maps, make_spiral_scheme,
                              save_sample, undersample)
    from .config import schedule_from

    maps = load_maps(args.maps)
    schedule = schedule_from(cfg)
    h, w = maps.shape
    tsmi = forward_simulate(maps, schedule)
    scheme = make_spiral_scheme(h, w, schedule.d0,
                                sampling_fraction=cfg.undersampling.fraction)
    noisy = undersample(tsmi, scheme, cfg.undersampling.noise_sigma, seed=args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_sample(args.out, noisy, maps)
    print(f"acquired: {h}x{w}x{schedule.d0}, fraction "
          f"{cfg.undersampling.fraction:g}, sigma {cfg.undersampling.noise_sigma:g} "
          f"-> {args.out}")
    return 0


def _write_map_outputs(outdir: Path, maps, truth, method: str, seconds, cfg):
    """Shared tail of match/recon: maps file, PNGs, figure, metrics CSV."""
    from .acquisition import save_maps
    from .metrics import evaluate, write_report_csv
    from .pngio import write_map_pngs
    from .report import save_comparison_figure

    outdir.mkdir(parents=True, exist_ok=True)
    save_maps(outdir / "maps.mrfa", maps)
    write_map_pngs(maps, outdir, stem=method)
    report = evaluate(maps, truth, method=method, seconds=seconds)
    write_report_csv(outdir / "metrics.csv", [report])
    save_comparison_figure(outdir / "comparison.png", truth, maps, method=method)
    return report


def _cmd_match(args, cfg):
    from .acquisition import load_sample
    from .epg import load_dictionary
    from .matching import append_timing, match_maps
    from .subspace import load_basis

    dictionary = load_dictionary(args.dict_path)
    tsmi, truth = load_sample(args.sample)
    basis = None
    method = "match_full"
    if args.basis is not None:
        basis = load_basis(args.basis, _basis_sidecar(args.basis))
        method = "match_compressed"
    t0 = time.perf_counter()
    maps = match_maps(tsmi, dictionary, basis=basis,
                      block_size=cfg.matching.block_size)
    seconds = time.perf_counter() - t0
    report = _write_map_outputs(args.out, maps, truth, method, seconds, cfg)
    d = dictionary.d0 if basis is None else basis.d1
    append_timing(args.out / "timing.csv", method, dictionary.n_atoms,
                  maps.shape[0] * maps.shape[1], d, seconds)
    print(f"{method}: {seconds:.2f}s, T1 MAE {report.t1.mae:.1f} ms, "
          f"T2 MAE {report.t2.mae:.1f} ms -> {args.out}")
    return 0


def _cmd_train(args, cfg):
    from .acquisition import load_sample
    from .config import model_config_from, schedule_from, serialize_config, train_config_from
    from .model import Checkpoint, build_model, save_checkpoint
    from .report import save_loss_figure
    from .subspace import load_basis
    from .train import compress_samples, train

    basis = load_basis(args.basis, _basis_sidecar(args.basis))
    schedule = schedule_from(cfg)
    if schedule.d0 != basis.d0:
        raise ValueError(f"schedule d0 {schedule.d0} != basis d0 {basis.d0}")

    if args.generate > 0:
        raw_train = [_generate_sample(cfg, schedule, seed=args.seed + 1000 + i)
                     for i in range(args.generate)]
        raw_val = [_generate_sample(cfg, schedule, seed=args.seed + 9000 + i)
                   for i in range(args.generate_val)]
    else:
        if not args.samples:
            raise ValueError("provide --samples files or --generate N")
        raw_train = [load_sample(p) for p in args.samples]
        raw_val = [load_sample(p) for p in args.val]
    print(f"training on {len(raw_train)} samples, {len(raw_val)} held out",
          file=sys.stderr)

    samples = compress_samples(raw_train, basis)
    val_samples = compress_samples(raw_val, basis)
    model_cfg = model_config_from(cfg)
    model = build_model(model_cfg, seed=args.seed)
    train_cfg = train_config_from(cfg, seed=args.seed)

    def progress(rec):
        val = "" if rec.val_loss is None else f" val {rec.val_loss:.6f}"
        print(f"epoch {rec.epoch}/{train_cfg.epochs} train {rec.train_loss:.6f}{val}",
              file=sys.stderr)

    result, adam = train(model, samples, train_cfg, val_samples=val_samples,
                         on_epoch=progress)
    ckpt = Checkpoint(model=model, basis=basis, metadata={
        "seed": args.seed,
        "epochs": train_cfg.epochs,
        "steps": result.steps,
        "train_samples": len(samples),
        "val_samples": len(val_samples),
        "final_train_loss": result.final_train_loss,
        "final_val_loss": result.final_val_loss,
    })
    save_checkpoint(args.out, ckpt, adam_state=adam,
                    config_text=serialize_config(cfg),
                    loss_rows=[(r.epoch, r.train_loss, r.val_loss)
                               for r in result.records])
    save_loss_figure(args.out / "loss.png", result.records)
    val_txt = ("" if result.final_val_loss is None
               else f", final val loss {result.final_val_loss:.6f}")
    print(f"trained {result.steps} steps in {result.seconds:.1f}s, final train "
          f"loss {result.final_train_loss:.6f}{val_txt} -> {args.out}")
    return 0


def _cmd_recon(args, cfg):
    from .acquisition import load_sample
    from .matching import append_timing
    from .model import load_checkpoint, reconstruct

    ckpt = load_checkpoint(args.ckpt)
    tsmi, truth = load_sample(args.sample)
    maps, seconds = reconstruct(tsmi, ckpt,
                                mask_rel_threshold=cfg.evaluation.mask_rel_threshold)
    report = _write_map_outputs(args.out, maps, truth, "network", seconds, cfg)
    append_timing(args.out / "timing.csv", "network", 0,
                  maps.shape[0] * maps.shape[1], ckpt.basis.d1, seconds)
    print(f"network: {seconds:.3f}s, T1 MAE {report.t1.mae:.1f} ms, "
          f"T2 MAE {report.t2.mae:.1f} ms -> {args.out}")
    return 0


def _cmd_eval(args, cfg):
    from .acquisition import load_maps
    from .metrics import evaluate, write_report_csv

    pred = load_maps(args.pred)
    truth = _load_truth(args.truth)
    report = evaluate(pred, truth, method=args.method)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_report_csv(args.out, [report])
    print(f"{args.method}: T1 MAE {report.t1.mae:.1f} ms, T2 MAE "
          f"{report.t2.mae:.1f} ms, PD MAE {report.pd.mae:.3f} over "
          f"{report.voxels} voxels -> {args.out}")
    return 0


def _cmd_bench(args, cfg):
    import dataclasses

    from .config import schedule_from
    from .epg import load_dictionary
    from .matching import match_maps
    from .metrics import evaluate, write_report_csv
    from .model import load_checkpoint, reconstruct
    from .report import save_bench_figure

    dictionary = load_dictionary(args.dict_path)
    ckpt = load_checkpoint(args.ckpt)
    if args.height is not None or args.width is not None:
        h = args.height if args.height is not None else cfg.phantom.height
        w = args.width if args.width is not None else cfg.phantom.width
        cfg = dataclasses.replace(
            cfg, phantom=dataclasses.replace(cfg.phantom, height=h, width=w))
    schedule = schedule_from(cfg)
    if schedule.d0 != ckpt.basis.d0:
        raise ValueError(f"schedule d0 {schedule.d0} != checkpoint basis d0 "
                         f"{ckpt.basis.d0}")
    tsmi, truth = _generate_sample(cfg, schedule, seed=args.seed)
    h, w = truth.shape

    t0 = time.perf_counter()
    full_maps = match_maps(tsmi, dictionary, block_size=cfg.matching.block_size)
    full_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    comp_maps = match_maps(tsmi, dictionary, basis=ckpt.basis,
                           block_size=cfg.matching.block_size)
    comp_s = time.perf_counter() - t0
    net_maps, net_s = reconstruct(tsmi, ckpt,
                                  mask_rel_threshold=cfg.evaluation.mask_rel_threshold)

    args.out.mkdir(parents=True, exist_ok=True)
    rows = [
        ("match_full", h, w, schedule.d0, "", dictionary.n_atoms, full_s),
        ("match_compressed", h, w, schedule.d0, ckpt.basis.d1,
         dictionary.n_atoms, comp_s),
        ("network", h, w, schedule.d0, ckpt.basis.d1, 0, net_s),
    ]
    lines = ["method,H,W,d0,d1,atoms,seconds"]
    for method, hh, ww, d0, d1, atoms, secs in rows:
        lines.append(f"{method},{hh},{ww},{d0},{d1},{atoms},{secs:.6f}")
    (args.out / "bench.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    save_bench_figure(args.out / "bench.png", [(m, s) for m, _, _, _, _, _, s in rows])
    reports = [
        evaluate(full_maps, truth, method="match_full", seconds=full_s),
        evaluate(comp_maps, truth, method="match_compressed", seconds=comp_s),
        evaluate(net_maps, truth, method="network", seconds=net_s),
    ]
    write_report_csv(args.out / "metrics.csv", reports)
    speedup = full_s / net_s if net_s > 0 else float("inf")
    print(f"bench {h}x{w}, {dictionary.n_atoms} atoms: full {full_s:.2f}s, "
          f"compressed {comp_s:.2f}s, network {net_s:.3f}s "
          f"({speedup:.1f}x vs full) -> {args.out}")
    return 0


_COMMANDS = {
    "dict": _cmd_dict,
    "basis": _cmd_basis,
    "phantom": _cmd_phantom,
    "acquire": _cmd_acquire,
    "match": _cmd_match,
    "train": _cmd_train,
    "recon": _cmd_recon,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .config import ConfigError, load_config
    from .mrfa import MrfaFormatError

    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, MrfaFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
