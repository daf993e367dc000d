"""Command-line surface: corpus generation, training, enhancement, sweeps,
and verification suites.

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time

import numpy as np

from . import corpus as corpus_mod
from .audio import ComplexSpectrogram, StftConfig, istft, read_wav, stft, write_wav
from .config import RunConfig
from .denoiser import GaussianPrior, MlpDenoiser, OracleDenoiser
from .metrics import si_sar, si_sdr
from .sampler import EnhanceRequest, enhance
from .trainer import (
    PairDataset,
    TrainingDiverged,
    make_gaussian_dataset,
    train,
    write_loss_csv,
)
from .verify import SUITES, run_suites

log = logging.getLogger("bridgediff")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want exit code 1
        raise UsageError(message)


def _utterance_seed(base: int, index: int) -> int:
    return int(np.random.SeedSequence([base, index]).generate_state(1)[0])


def toy_training_prior(n_bins: int) -> GaussianPrior:
    """Per-bin prior for toy training runs: geometric clean profile over a
    flat noise floor, amplitudes kept of order one for the tanh net."""
    return GaussianPrior(np.geomspace(2.0, 0.02, n_bins), np.full(n_bins, 0.5))


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = RunConfig.load(args.config)
    spec = cfg.corpus_spec(
        n_utterances=args.n,
        seed=args.seed,
        duration_s=args.duration,
        clean_kind=args.clean_kind,
        noise_kind=args.noise_kind,
        snr_grid=tuple(float(v) for v in args.snr_grid.split(",")) if args.snr_grid else None,
    )
    os.makedirs(args.out, exist_ok=True)
    manifest = corpus_mod.build_corpus(spec, args.out, force=args.force)
    cfg.write_resolved(args.out)
    print(f"wrote {len(manifest)} utterances under {manifest.root}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _manifest_frame_dataset(manifest_path: str, stft_cfg: StftConfig) -> PairDataset:
    manifest = corpus_mod.read_manifest(manifest_path)
    clean_frames, noisy_frames = [], []
    for entry in manifest.entries:
        clean = read_wav(manifest.path(entry.clean))
        noisy = read_wav(manifest.path(entry.noisy))
        clean_frames.append(stft(clean, stft_cfg).data)
        noisy_frames.append(stft(noisy, stft_cfg).data)
    return PairDataset(np.concatenate(clean_frames), np.concatenate(noisy_frames))


def cmd_train(args) -> int:
    cfg = RunConfig.load(args.config)
    train_cfg = cfg.train_config(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        loss_mode=args.loss_mode,
        seed=args.seed,
    )
    hidden = tuple(int(h) for h in args.hidden.split(",")) if args.hidden else cfg.get("denoiser", "hidden")

    if args.manifest:
        stft_cfg = cfg.stft_config()
        dataset = _manifest_frame_dataset(args.manifest, stft_cfg)
        n_bins = stft_cfg.n_bins
    else:
        prior = toy_training_prior(args.bins)
        dataset = make_gaussian_dataset(prior, args.items, np.random.default_rng(train_cfg.seed))
        n_bins = args.bins

    parameterization = "score" if train_cfg.loss_mode == "score" else "x0"
    model = MlpDenoiser(
        n_bins, hidden=hidden, parameterization=parameterization, seed=cfg.get("denoiser", "seed")
    )
    log.info(
        "training %s-parameterized net (%d params) on %d items",
        parameterization,
        model.net.n_params(),
        len(dataset),
    )
    result = train(model, dataset, train_cfg)

    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "checkpoint.npz")
    model.save(ckpt)
    write_loss_csv(os.path.join(args.out, "loss.csv"), result)
    cfg.write_resolved(args.out)
    print(f"trained {parameterization} model -> {ckpt} (final val loss {result.final_val_loss:.6g})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# enhance / sweep
# ---------------------------------------------------------------------------


def _oracle_for_entry(manifest, entry, stft_cfg) -> OracleDenoiser:
    clean = stft(read_wav(manifest.path(entry.clean)), stft_cfg).data
    noise = stft(read_wav(manifest.path(entry.noise)), stft_cfg).data
    return OracleDenoiser(GaussianPrior.from_spectrograms(clean, noise))


def _enhance_one(y_sig, denoiser, request, stft_cfg):
    spec = stft(y_sig, stft_cfg)
    start = time.perf_counter()
    out = enhance(spec.data, denoiser, request)
    elapsed = time.perf_counter() - start
    est = istft(ComplexSpectrogram(out, stft_cfg), stft_cfg, len(y_sig), y_sig.sample_rate)
    return est, elapsed


def _run_over_manifest(args, cfg, mode, alpha, n_steps, corrector, base_seed, out_wav_dir=None):
    """Enhance every manifest utterance; yield metric rows."""
    stft_cfg = cfg.stft_config()
    manifest = corpus_mod.read_manifest(args.manifest)
    checkpoint = None
    if args.denoiser != "oracle":
        checkpoint = MlpDenoiser.load(args.denoiser)
        if checkpoint.n_bins != stft_cfg.n_bins:
            raise ValueError(
                f"checkpoint expects {checkpoint.n_bins} bins, stft config has {stft_cfg.n_bins}"
            )
    rows = []
    for i, entry in enumerate(manifest.entries):
        noisy = read_wav(manifest.path(entry.noisy))
        clean = read_wav(manifest.path(entry.clean))
        noise = read_wav(manifest.path(entry.noise))
        denoiser = checkpoint if checkpoint is not None else _oracle_for_entry(manifest, entry, stft_cfg)
        seed = _utterance_seed(base_seed, i)
        sampler = cfg.sampler_config(
            n_steps=n_steps, corrector_enabled=corrector, seed=seed
        )
        request = EnhanceRequest(
            mode=mode, alpha=alpha if mode == "mixture" else None, sampler=sampler
        )
        est, elapsed = _enhance_one(noisy, denoiser, request, stft_cfg)
        if out_wav_dir is not None:
            write_wav(os.path.join(out_wav_dir, f"{entry.utt_id}.wav"), est, "float32")
        rows.append(
            {
                "utterance_id": entry.utt_id,
                "mode": mode,
                "N": n_steps if mode != "regression" else "",
                "alpha": alpha if mode == "mixture" else "",
                "corrector": int(corrector) if mode != "regression" else "",
                "si_sdr": f"{si_sdr(est, clean):.4f}",
                "si_sar": f"{si_sar(est, clean, noise):.4f}",
                "seed": seed,
                "wall_clock_s": f"{elapsed:.6f}",
            }
        )
    return rows


def _write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def cmd_enhance(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.mode == "regression" and (args.steps is not None or args.alpha is not None):
        log.warning("regression mode ignores --steps and --alpha")
    alpha = args.alpha if args.alpha is not None else (0.8 if args.mode == "mixture" else None)
    n_steps = args.steps if args.steps is not None else cfg.get("sampler", "n_steps")
    base_seed = args.seed if args.seed is not None else cfg.get("sampler", "seed")

    os.makedirs(args.out, exist_ok=True)
    if args.wav:
        if args.denoiser == "oracle":
            raise UsageError("the oracle denoiser needs --manifest (clean/noise references)")
        stft_cfg = cfg.stft_config()
        denoiser = MlpDenoiser.load(args.denoiser)
        noisy = read_wav(args.wav)
        request = EnhanceRequest(
            mode=args.mode,
            alpha=alpha if args.mode == "mixture" else None,
            sampler=cfg.sampler_config(n_steps=n_steps, seed=base_seed,
                                       corrector_enabled=args.corrector or None),
        )
        est, _ = _enhance_one(noisy, denoiser, request, stft_cfg)
        out_path = os.path.join(args.out, os.path.basename(args.wav))
        write_wav(out_path, est, "float32")
        cfg.write_resolved(args.out)
        print(f"enhanced {args.wav} -> {out_path}")
        return EXIT_OK

    wav_dir = os.path.join(args.out, "enhanced")
    os.makedirs(wav_dir, exist_ok=True)
    rows = _run_over_manifest(
        args, cfg, args.mode, alpha, n_steps, bool(args.corrector), base_seed, wav_dir
    )
    csv_path = os.path.join(args.out, "metrics.csv")
    _write_csv(csv_path, rows, ["utterance_id", "mode", "N", "alpha", "si_sdr", "si_sar", "seed"])
    cfg.write_resolved(args.out)
    mean_sdr = np.mean([float(r["si_sdr"]) for r in rows])
    print(f"enhanced {len(rows)} utterances, mean SI-SDR {mean_sdr:.2f} dB -> {csv_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = RunConfig.load(args.config)
    if not args.grid.strip():
        raise UsageError("empty --grid")
    base_seed = args.seed if args.seed is not None else cfg.get("sampler", "seed")
    os.makedirs(args.out, exist_ok=True)
    rows = []
    if args.kind == "steps":
        grid = [int(v) for v in args.grid.split(",") if v.strip()]
        if not grid:
            raise UsageError("empty --grid")
        for n_steps in grid:
            for corrector in (False, True):
                rows.extend(
                    _run_over_manifest(
                        args, cfg, "mixture", args.alpha, n_steps, corrector, base_seed
                    )
                )
    else:  # alpha sweep
        grid = [float(v) for v in args.grid.split(",") if v.strip()]
        if not grid:
            raise UsageError("empty --grid")
        n_steps = args.steps if args.steps is not None else cfg.get("sampler", "n_steps")
        for alpha in grid:
            rows.extend(
                _run_over_manifest(
                    args, cfg, "mixture", alpha, n_steps, bool(args.corrector), base_seed
                )
            )
    csv_path = os.path.join(args.out, f"sweep_{args.kind}.csv")
    _write_csv(
        csv_path,
        rows,
        ["utterance_id", "mode", "N", "alpha", "corrector", "si_sdr", "si_sar", "seed", "wall_clock_s"],
    )
    cfg.write_resolved(args.out)
    print(f"swept {args.kind} over {args.grid}: {len(rows)} rows -> {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    try:
        results = run_suites(names)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    all_ok = True
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"[{status}] {result.name}")
        for line in result.lines:
            print(f"    {line}")
        all_ok &= result.passed
    return EXIT_OK if all_ok else EXIT_VERIFY


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="bridgediff", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=None, help="number of utterances")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=None, help="seconds per utterance")
    p.add_argument("--clean-kind", choices=corpus_mod.CLEAN_KINDS, default=None)
    p.add_argument("--noise-kind", choices=corpus_mod.NOISE_KINDS, default=None)
    p.add_argument("--snr-grid", default=None, help="comma-separated dB values")
    p.add_argument("--force", action="store_true")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the network denoiser")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None, help="train on corpus frames")
    p.add_argument("--bins", type=int, default=16, help="toy task bins (no manifest)")
    p.add_argument("--items", type=int, default=2048, help="toy task items")
    p.add_argument("--loss-mode", choices=("x0", "score"), default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--hidden", default=None, help="comma-separated widths")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance a manifest or a single wav")
    p.add_argument("--out", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", default=None)
    src.add_argument("--wav", default=None)
    p.add_argument("--mode", choices=("regression", "diffusion", "mixture"), default="mixture")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--corrector", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--denoiser", default="oracle", help="'oracle' or checkpoint path")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("sweep", help="step-count or interpolation-weight sweep")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("steps", "alpha"), required=True)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--manifest", required=True)
    p.add_argument("--denoiser", default="oracle")
    p.add_argument("--alpha", type=float, default=0.8, help="mixture weight for steps sweep")
    p.add_argument("--steps", type=int, default=None, help="step count for alpha sweep")
    p.add_argument("--corrector", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run analytic/Monte Carlo property suites")
    p.add_argument("suite", help=f"one of {', '.join(SUITES)} or 'all'")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
