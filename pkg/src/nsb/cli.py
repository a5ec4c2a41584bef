"""Single command-line entry point for the whole pipeline.

Subcommands: gen-data, train-classifier, train-detector, evaluate,
segment, make-stimuli, serve. Identical flags and seeds always produce
byte-identical artifacts; no subcommand writes outside its --out (or
--weights) target. Errors print one machine-parsable line on stderr:
``error: <kind>: <message>``.

Exit codes: 0 success, 1 runtime failure, 2 usage error (unknown
subcommand/flag), 3 missing required flag.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from nsb import cnn, localizer, metrics, phantom, pipeline, segmenter, weights_io
from nsb.dsis import engine as dsis_engine
from nsb.imagecore import read_image, write_image
from nsb.rng import DeterministicRng

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_MISSING_FLAG = 3


class _UsageError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        code = EXIT_MISSING_FLAG if "required" in message else EXIT_USAGE
        raise _UsageError(message, code)


def _fail(kind: str, message: str, code: int) -> int:
    print(f"error: {kind}: {message}", file=sys.stderr)
    return code


def _default_manifest() -> str | None:
    root = os.environ.get("NSB_DATA_DIR")
    return str(Path(root) / phantom.MANIFEST_NAME) if root else None


def _add_manifest_flag(p: _Parser, required_without_env: bool = True):
    default = _default_manifest()
    p.add_argument(
        "--manifest",
        default=default,
        required=required_without_env and default is None,
        help="dataset manifest path (default: $NSB_DATA_DIR/manifest.tsv)",
    )


def _add_train_flags(p: _Parser, epochs: int, lr: float):
    p.add_argument("--epochs", type=int, default=epochs)
    p.add_argument("--lr", type=float, default=lr)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", required=True, help="weights container to write")


def build_parser() -> _Parser:
    parser = _Parser(prog="nsb", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("gen-data", help="generate a phantom dataset", parents=[])
    p.add_argument("--n", type=int, required=True, help="phantoms per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--noise-sigma", type=float, default=6.0)

    p = sub.add_parser("train-classifier", help="train the tumor-class CNN")
    _add_manifest_flag(p)
    _add_train_flags(p, epochs=8, lr=0.01)

    p = sub.add_parser("train-detector", help="train the localizer")
    _add_manifest_flag(p)
    _add_train_flags(p, epochs=8, lr=0.01)

    p = sub.add_parser("evaluate", help="run the pipeline over a manifest")
    _add_manifest_flag(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True, help="directory for summary + CSV")

    p = sub.add_parser("segment", help="segment a single native-resolution image")
    p.add_argument("image", help="input PGM at native resolution")
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True, help="directory for mask + overlay")

    p = sub.add_parser("make-stimuli", help="render rating stimuli incl. decoys")
    _add_manifest_flag(p)
    p.add_argument("--out", required=True)
    p.add_argument("--weights", help="use pipeline outputs (default: ground-truth boxes)")
    p.add_argument("--per-class", type=int, default=12, dest="per_class")
    p.add_argument("--decoys", type=int, default=2, help="decoys per class")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("serve", help="serve the rating API (and optional UI)")
    p.add_argument("--stimuli", required=True, help="stimulus directory from make-stimuli")
    p.add_argument("--store", required=True, help="rating store directory")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", help="directory with the built browser UI")

    return parser


# ------------------------------------------------------------- subcommands


def _cmd_gen_data(args) -> int:
    manifest = phantom.build_dataset(
        args.n, args.seed, args.out, image_size=args.size, noise_sigma=args.noise_sigma
    )
    print(f"wrote {2 * args.n} phantoms + masks and {phantom.MANIFEST_NAME} "
          f"to {args.out} ({len(manifest.entries)} manifest entries)")
    return EXIT_OK


def _cmd_train_classifier(args) -> int:
    manifest = phantom.load_manifest(args.manifest)
    images, labels, _ = pipeline.load_training_arrays(manifest)
    config = cnn.TrainConfig(
        epochs=args.epochs, learning_rate=args.lr,
        batch_size=args.batch, momentum=args.momentum, seed=args.seed,
    )
    weights, trace = cnn.train_classifier(images, labels, config)
    weights_io.merge_into_container(args.weights, weights.as_dict())
    print(f"classifier trained: loss {trace[0]:.4f} -> {trace[-1]:.4f} "
          f"over {len(trace)} epochs; weights in {args.weights}")
    return EXIT_OK


def _cmd_train_detector(args) -> int:
    manifest = phantom.load_manifest(args.manifest)
    images, _, boxes = pipeline.load_training_arrays(manifest)
    config = localizer.DetectorTrainConfig(
        epochs=args.epochs, learning_rate=args.lr,
        batch_size=args.batch, momentum=args.momentum, seed=args.seed,
    )
    weights, trace = localizer.train_detector(images, boxes, config)
    weights_io.merge_into_container(args.weights, weights.as_dict())
    print(f"detector trained: loss {trace[0]:.4f} -> {trace[-1]:.4f} "
          f"over {len(trace)} epochs; weights in {args.weights}")
    return EXIT_OK


def _load_pipeline(weights_path) -> pipeline.TumorPipeline:
    tensors = weights_io.read_container(weights_path)
    return pipeline.TumorPipeline(
        cnn.ClassifierWeights.from_dict(tensors),
        localizer.DetectorWeights.from_dict(tensors),
    )


def _cmd_evaluate(args) -> int:
    manifest = phantom.load_manifest(args.manifest)
    pipe = _load_pipeline(args.weights)
    report, rows = pipeline.evaluate_dataset(manifest, pipe)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_results_csv(rows, out / "per_image.csv")
    summary = "\n".join(report.summary_lines()) + "\n"
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    return EXIT_OK


def _cmd_segment(args) -> int:
    img = read_image(args.image)
    pipe = _load_pipeline(args.weights)
    result = pipeline.run_single(img, pipe)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).stem
    write_image(segmenter.mask_to_image(result.mask), out / f"{stem}_mask.pgm")
    write_image(
        pipeline.render_overlay(img, result.boundary), out / f"{stem}_overlay.pgm"
    )
    if result.detection is None:
        print(f"{stem}: class {result.label.value}; no tumor found")
    else:
        b = result.box_native
        print(
            f"{stem}: class {result.label.value}; "
            f"box ({b.x_min:.1f}, {b.y_min:.1f}, {b.x_max:.1f}, {b.y_max:.1f}) "
            f"confidence {result.detection.confidence:.3f}"
        )
    return EXIT_OK


def _cmd_make_stimuli(args) -> int:
    manifest = phantom.load_manifest(args.manifest)
    pipe = _load_pipeline(args.weights) if args.weights else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = DeterministicRng(args.seed).derive(0x57)

    per_class: dict[cnn.TumorClass, list] = {}
    for entry in manifest.entries:
        per_class.setdefault(entry.class_label, []).append(entry)
    jobs = []  # (entry, is_decoy)
    for cls, entries in per_class.items():
        need = args.per_class + args.decoys
        if len(entries) < need:
            raise ValueError(
                f"manifest has {len(entries)} {cls.value} entries, need {need}"
            )
        picked = [entries[i] for i in rng.choice(len(entries), need)]
        jobs.extend((e, False) for e in picked[: args.per_class])
        jobs.extend((e, True) for e in picked[args.per_class :])
    order = rng.permutation(len(jobs))

    pool = []
    for seq, job_idx in enumerate(order):
        entry, is_decoy = jobs[job_idx]
        img = read_image(manifest.abspath(entry.image_path))
        if is_decoy:
            box = pipeline.decoy_box(entry.box, img.width, img.height)
        elif pipe is not None:
            result = pipeline.run_single(img, pipe)
            box = result.box_native if result.box_native is not None else entry.box
        else:
            box = entry.box
        _, boundary = segmenter.segment_roi(img, box)
        overlay = pipeline.render_overlay(img, boundary)
        sid = f"stim{seq:04d}"
        ref_rel, proc_rel = f"{sid}_ref.pgm", f"{sid}_proc.pgm"
        write_image(img, out / ref_rel)
        write_image(overlay, out / proc_rel)
        pool.append(dsis_engine.Stimulus(
            sid, ref_rel, proc_rel, entry.class_label, is_decoy
        ))
    dsis_engine.save_stimulus_pool(pool, out / "stimuli.tsv")
    n_decoys = sum(s.is_decoy for s in pool)
    print(f"wrote {len(pool)} stimuli ({n_decoys} decoys) to {out}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from nsb.dsis import server

    pool = dsis_engine.load_stimulus_pool(Path(args.stimuli) / "stimuli.tsv")
    store = dsis_engine.RatingStore(args.store)
    print(f"serving {len(pool)} stimuli on http://{args.host}:{args.port}")
    server.serve(store, pool, args.stimuli, args.port, ui_dir=args.ui, host=args.host)
    return EXIT_OK


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train-classifier": _cmd_train_classifier,
    "train-detector": _cmd_train_detector,
    "evaluate": _cmd_evaluate,
    "segment": _cmd_segment,
    "make-stimuli": _cmd_make_stimuli,
    "serve": _cmd_serve,
}


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        return _fail("usage", str(exc), exc.exit_code)
    if args.command is None:
        return _fail("usage", "no subcommand given (see nsb --help)", EXIT_USAGE)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # runtime failures become one parsable line
        return _fail(type(exc).__name__, str(exc), EXIT_RUNTIME)


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
