"""Command line entry points: experiment runs, PGM evaluation, and a
single-scene segmentation demo."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .harness import read_config, run_experiment
from .hypotheses import ProposalParams, propose_hypotheses
from .masks import Mask
from .metrics import evaluate, masks_from_labels
from .render import render
from .segmenter import OracleConfig, OracleSegmenter
from .serialize import depth_to_pgm, labels_to_pgm, pgm_to_array, scene_from_text


def _cmd_run(args) -> int:
    config = read_config(args.config)
    if args.seed is not None:
        import dataclasses
        config = dataclasses.replace(config, seed=args.seed)
    _, summaries = run_experiment(config, args.out)
    report = Path(args.out) / "report.txt"
    sys.stdout.write(report.read_text(encoding="utf-8"))
    return 0


def _cmd_eval(args) -> int:
    pred = masks_from_labels(pgm_to_array(Path(args.pred).read_text(encoding="utf-8")))
    gt = masks_from_labels(pgm_to_array(Path(args.gt).read_text(encoding="utf-8")))
    ev = evaluate(pred, gt)
    print(f"{len(pred)},{len(gt)},{ev.p_n:.6f},{ev.r_n:.6f},{ev.f_n:.6f},"
          f"{ev.p:.6f},{ev.r:.6f},{ev.f:.6f}")
    return 0


def _masks_to_labels(masks, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=np.int32)
    for i, mask in enumerate(masks, start=1):
        out[mask.data] = i
    return out


def _cmd_demo(args) -> int:
    scene = scene_from_text(Path(args.scene).read_text(encoding="utf-8"))
    obs = render(scene, args.resolution)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "depth.pgm").write_text(depth_to_pgm(obs.depth), encoding="utf-8")
    (out / "true_labels.pgm").write_text(labels_to_pgm(obs.labels),
                                         encoding="utf-8")

    oracle = OracleConfig(p_part=args.p_part, p_merge=args.p_merge,
                          boundary_noise=args.boundary_noise,
                          td_recall=args.td_recall)
    segmenter = OracleSegmenter(oracle)
    segmenter.register(scene, obs)
    rng = np.random.default_rng(args.seed)
    result = propose_hypotheses(obs, segmenter, ProposalParams(), rng)

    confident: list[Mask] = list(result.confident)
    (out / "confident.pgm").write_text(
        labels_to_pgm(_masks_to_labels(confident, obs.shape)), encoding="utf-8")
    print(f"confident masks: {len(confident)}")
    print(f"uncertain regions: {len(result.uncertain)}")
    for r, (region, hyps) in enumerate(result.uncertain):
        print(f"  region {r}: footprint {region.footprint.area} px, "
              f"{len(hyps)} hypotheses")
        for h, hyp in enumerate(hyps):
            tag = " (partial)" if hyp.partial else ""
            print(f"    hypothesis {h}: {len(hyp.masks)} objects, "
                  f"weight {hyp.weight:.3f}{tag}")
            name = f"region{r}_hyp{h}.pgm"
            (out / name).write_text(
                labels_to_pgm(_masks_to_labels(hyp.masks, obs.shape)),
                encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uncseg",
        description="uncertainty-aware segmentation experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None,
                     help="override the config master seed")
    run.add_argument("--out", required=True)
    run.set_defaults(func=_cmd_run)

    ev = sub.add_parser("eval", help="score a predicted label map")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    ev.set_defaults(func=_cmd_eval)

    demo = sub.add_parser("demo", help="one segmentation pass on a scene file")
    demo.add_argument("--scene", required=True)
    demo.add_argument("--out", default="demo-out")
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--resolution", type=float, default=0.005)
    demo.add_argument("--p-part", type=float, default=0.0)
    demo.add_argument("--p-merge", type=float, default=0.0)
    demo.add_argument("--boundary-noise", type=int, default=0)
    demo.add_argument("--td-recall", type=float, default=1.0)
    demo.set_defaults(func=_cmd_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
