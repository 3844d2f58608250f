"""Command-line front end: separate, evaluate, synthmix, experiment.

Results are append-only line-delimited JSON records plus tab-separated
summary tables; everything is deterministic under a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audio import AudioClip, read_wav, resample_to_16k, write_wav
from .em import EmConfig, run_em
from .errors import DataError, exit_code_for
from .fusion import MASK_TYPES
from .ild import export_training_pairs, feature_plane, write_mask_file
from .interaural import interaural_features
from .masks import SoftMask
from .metrics import evaluate_separation
from .pipeline import SeparationOptions, as_mono, separate_mixture
from .room import (AZIMUTHS_DEG, ROOM_PRESETS, RoomSpec, SourceGeometry,
                   load_rir_set, make_mixture, synthetic_speech, synth_rir)
from .stft import StftConfig, stft


def _parse_betas(text: str) -> tuple:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise DataError("--betas needs four comma-separated weights")
    return tuple(parts)


def _add_separation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mask", choices=MASK_TYPES, default="subband")
    p.add_argument("--ild-provider", default="em",
                   help="em | file:<path> | none")
    p.add_argument("--garbage", choices=("on", "off"), default="off")
    p.add_argument("--iterations", type=int, default=16)
    p.add_argument("--betas", type=_parse_betas, default=(1.0, 1.0, 1.0, 1.0))


def _options_from_args(args) -> SeparationOptions:
    return SeparationOptions(
        mask_type=args.mask,
        ild_provider=args.ild_provider,
        use_garbage=args.garbage == "on",
        iterations=args.iterations,
        betas=args.betas,
    )


def _load_stereo_16k(path) -> AudioClip:
    clip = read_wav(path)
    if clip.channels != 2:
        raise DataError(f"{path}: need a stereo mixture, got mono")
    if clip.sample_rate == 48000:
        clip = resample_to_16k(clip)
    return clip.require_rate()


def cmd_separate(args) -> int:
    mixture = _load_stereo_16k(args.mixture)
    opts = _options_from_args(args)
    out = separate_mixture(mixture, opts)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.mixture).stem
    for i, clip in enumerate(out.sources):
        peak = float(np.max(np.abs(clip.samples)))
        if peak > 1.0:
            clip = AudioClip(clip.samples / peak, clip.sample_rate)
        write_wav(clip, out_dir / f"{stem}_source{i + 1}.wav")
    if args.dump_masks:
        write_mask_file(out.ipd_masks, out_dir / f"{stem}_ipd.bsmk")
        write_mask_file(out.ild_masks, out_dir / f"{stem}_ild_masks.bsmk")
        write_mask_file(out.fused_masks, out_dir / f"{stem}_fused.bsmk")
        feats = interaural_features(
            stft(mixture.channel(0)), stft(mixture.channel(1)))
        write_mask_file([feature_plane(feats)],
                        out_dir / f"{stem}_ild_plane.bsmk")
    print(f"wrote {len(out.sources)} sources to {out_dir} "
          f"(perm={[o + 1 for o in out.perm.order]})")
    return 0


def cmd_evaluate(args) -> int:
    estimates = [read_wav(p).require_rate() for p in args.estimates]
    references = [as_mono(read_wav(p).require_rate())
                  for p in args.references]
    report = evaluate_separation(estimates, references)
    record = {
        "estimates": [str(p) for p in args.estimates],
        "references": [str(p) for p in args.references],
        "sdr_db": report.sdr_db,
        "stoi": report.stoi,
        "perm": [o + 1 for o in report.perm.order],
        "mean_sdr_db": report.mean_sdr_db,
        "mean_stoi": report.mean_stoi,
    }
    line = json.dumps(record, sort_keys=True)
    if args.results:
        with open(args.results, "a") as fh:
            fh.write(line + "\n")
    print(line)
    return 0


def _room_from_name(name: str) -> RoomSpec:
    if name in ROOM_PRESETS:
        return ROOM_PRESETS[name]
    raise DataError(f"unknown room {name!r} (have {sorted(ROOM_PRESETS)})")


def _trial_rng(seed: int, room: str, azimuth: int, trial: int):
    key = [seed, sum(room.encode()), azimuth, trial]
    return np.random.default_rng(np.random.SeedSequence(key))


def _build_trial(room: RoomSpec, azimuth: int, trial: int, seed: int,
                 duration_s: float = 1.05, source_paths=None,
                 rir_dir=None):
    """One mixture: target at `azimuth`, masker frontal, seeded sources."""
    rng = _trial_rng(seed, room.name, azimuth, trial)
    if source_paths:
        sources = [resample_to_16k(read_wav(p)) for p in source_paths]
    else:
        sources = [synthetic_speech(duration_s, rng) for _ in range(2)]
    rir_seed = int(rng.integers(2 ** 31))
    if rir_dir:
        rir_target = load_rir_set(rir_dir, room.name, azimuth)
        rir_masker = load_rir_set(rir_dir, room.name, 0)
    else:
        rir_target = synth_rir(room, SourceGeometry(azimuth), rir_seed)
        rir_masker = synth_rir(room, SourceGeometry(0), rir_seed + 1)
    mixture, images = make_mixture(sources, [rir_target, rir_masker])
    return mixture, images


def cmd_synthmix(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.jsonl"
    rooms = [_room_from_name(r) for r in args.rooms.split(",")]
    azimuths = [int(a) for a in args.azimuths.split(",")]
    rows = 0
    with open(manifest_path, "a") as manifest:
        for room in rooms:
            for azimuth in azimuths:
                for trial in range(args.trials):
                    mixture, images = _build_trial(
                        room, azimuth, trial, args.seed,
                        source_paths=args.sources, rir_dir=args.rir_dir)
                    trial_id = f"{room.name}_az{azimuth:02d}_t{trial:02d}"
                    paths = {
                        "mix": out_dir / f"{trial_id}_mix.wav",
                        "ref1": out_dir / f"{trial_id}_ref1.wav",
                        "ref2": out_dir / f"{trial_id}_ref2.wav",
                    }
                    write_wav(_unit_scale(mixture), paths["mix"])
                    write_wav(_unit_scale(images[0]), paths["ref1"],
                              float32=True)
                    write_wav(_unit_scale(images[1]), paths["ref2"],
                              float32=True)
                    ild_path, ibm_path = export_training_pairs(
                        mixture, images, out_dir, trial_id)
                    row = {
                        "trial": trial_id, "room": room.name,
                        "azimuth": azimuth, "seed": args.seed,
                        "mix": str(paths["mix"]),
                        "refs": [str(paths["ref1"]), str(paths["ref2"])],
                        "ild_plane": str(ild_path), "ibm": str(ibm_path),
                    }
                    manifest.write(json.dumps(row, sort_keys=True) + "\n")
                    rows += 1
    print(f"wrote {rows} trials to {out_dir}")
    return 0


def _unit_scale(clip: AudioClip) -> AudioClip:
    peak = float(np.max(np.abs(clip.samples)))
    if peak <= 1.0:
        return clip
    return AudioClip(clip.samples / peak, clip.sample_rate)


def _variant_options(variant: dict, iterations: int) -> SeparationOptions:
    return SeparationOptions(
        mask_type=variant.get("mask", "product"),
        ild_provider=variant.get("ild_provider", "em"),
        use_garbage=bool(variant.get("use_garbage", False)),
        use_ild=variant.get("use_ild"),
        iterations=int(variant.get("iterations", iterations)),
        betas=tuple(variant.get("betas", (1.0, 1.0, 1.0, 1.0))),
    )


def run_experiment(plan: dict, out_dir: Path) -> Path:
    """Execute a full grid and write per-trial records plus a summary table.

    Returns the table path. EM fits are shared between variants that agree
    on EM settings for a given trial; a failing trial aborts its cell with
    a recorded reason and the run continues.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = int(plan.get("seed", 0))
    iterations = int(plan.get("iterations", 16))
    trials = int(plan.get("trials_per_cell", 5))
    rooms = [_room_from_name(r) for r in plan.get("rooms", ["X"])]
    azimuths = [int(a) for a in plan.get("azimuths", AZIMUTHS_DEG)]
    variants = plan.get("variants") or [{"name": "default"}]

    records_path = out_dir / "records.jsonl"
    table_path = out_dir / "table.tsv"
    cells = {}
    failures = []
    with open(records_path, "a") as records:
        for room in rooms:
            for azimuth in azimuths:
                for trial in range(trials):
                    try:
                        mixture, images = _build_trial(
                            room, azimuth, trial, seed,
                            rir_dir=plan.get("rir_dir"))
                        refs = [as_mono(img) for img in images]
                    except Exception as exc:  # abort the whole cell
                        failures.append((room.name, azimuth, trial, str(exc)))
                        continue
                    em_cache = {}
                    for variant in variants:
                        name = variant.get("name", "default")
                        try:
                            opts = _variant_options(variant, iterations)
                            em_cfg = opts.em_config()
                            key = (em_cfg.use_ild, em_cfg.use_garbage,
                                   em_cfg.iterations)
                            em_result = em_cache.get(key)
                            provider = opts.ild_provider
                            if "{trial}" in provider:
                                provider = provider.replace(
                                    "{trial}",
                                    f"{room.name}_az{azimuth:02d}_t{trial:02d}")
                                opts.ild_provider = provider
                            out = separate_mixture(mixture, opts,
                                                   references=images,
                                                   em_result=em_result)
                            em_cache[key] = out.em_result
                            report = evaluate_separation(out.sources, refs)
                        except Exception as exc:
                            failures.append(
                                (room.name, azimuth, trial,
                                 f"{name}: {exc}"))
                            continue
                        row = {
                            "variant": name, "room": room.name,
                            "azimuth": azimuth, "trial": trial,
                            "sdr_db": report.sdr_db, "stoi": report.stoi,
                            "perm": [o + 1 for o in report.perm.order],
                            "psi_garbage":
                                out.em_result.params.psi_garbage,
                        }
                        records.write(json.dumps(row, sort_keys=True) + "\n")
                        cell = cells.setdefault(
                            (name, room.name, azimuth), {"sdr": [], "stoi": []})
                        cell["sdr"].append(report.mean_sdr_db)
                        cell["stoi"].append(report.mean_stoi)

    lines = ["variant\troom\tazimuth\tn\tmean_sdr_db\tmean_stoi"]
    for key in sorted(cells):
        name, room_name, azimuth = key
        cell = cells[key]
        lines.append(
            f"{name}\t{room_name}\t{azimuth}\t{len(cell['sdr'])}\t"
            f"{np.mean(cell['sdr']):.6f}\t{np.mean(cell['stoi']):.6f}")
    by_variant = {}
    for (name, _, _), cell in cells.items():
        agg = by_variant.setdefault(name, {"sdr": [], "stoi": []})
        agg["sdr"].extend(cell["sdr"])
        agg["stoi"].extend(cell["stoi"])
    lines.append("")
    lines.append("variant\toverall_mean_sdr_db\toverall_mean_stoi")
    for name in sorted(by_variant):
        agg = by_variant[name]
        lines.append(f"{name}\t{np.mean(agg['sdr']):.6f}\t"
                     f"{np.mean(agg['stoi']):.6f}")
    table_path.write_text("\n".join(lines) + "\n")
    if failures:
        fail_path = out_dir / "failures.jsonl"
        with open(fail_path, "a") as fh:
            for room_name, azimuth, trial, reason in failures:
                fh.write(json.dumps(
                    {"room": room_name, "azimuth": azimuth, "trial": trial,
                     "reason": reason}, sort_keys=True) + "\n")
    return table_path


def cmd_experiment(args) -> int:
    plan = json.loads(Path(args.plan).read_text())
    if args.seed is not None:
        plan["seed"] = args.seed
    if args.iterations is not None:
        plan["iterations"] = args.iterations
    if args.trials is not None:
        plan["trials_per_cell"] = args.trials
    if args.rir_dir is not None:
        plan["rir_dir"] = args.rir_dir
    table_path = run_experiment(plan, Path(args.out_dir))
    print(table_path.read_text(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="binsep",
        description="Binaural source separation from interaural cues.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("separate", help="split a stereo mixture")
    p.add_argument("mixture")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-masks", action="store_true")
    _add_separation_flags(p)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("evaluate", help="score estimates against references")
    p.add_argument("--estimates", nargs="+", required=True)
    p.add_argument("--references", nargs="+", required=True)
    p.add_argument("--results", default=None,
                   help="append the JSON record to this file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synthmix", help="synthesize seeded trial mixtures")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--rooms", default="X")
    p.add_argument("--azimuths", default=",".join(map(str, AZIMUTHS_DEG)))
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sources", nargs=2, default=None,
                   help="two mono WAVs (default: seeded speech-shaped noise)")
    p.add_argument("--rir-dir", default=None)
    p.set_defaults(func=cmd_synthmix)

    p = sub.add_parser("experiment", help="run a plan file over the grid")
    p.add_argument("plan")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--rir-dir", default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 0
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
