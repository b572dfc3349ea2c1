"""Experiment runner: N scenes x {eos, random, finalFrame} x T pushes.

Per scene, every method starts from the same frame with identically seeded
streams, so step-0 scores agree exactly. The eos method selects pushes with
the disambiguation planner and keeps updating its belief; random pushes a
uniformly chosen hypothesized object in a uniform direction; finalFrame
rides along random's physical trajectory but throws its belief away and
reruns the whole segmentation pipeline on each new frame.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .belief import Belief, BeliefParams, init_belief, most_likely, project_to_masks
from .hypotheses import ProposalParams, propose_hypotheses
from .metrics import SegEval, evaluate, masks_from_labels
from .planner import (PlannerParams, construct_worlds, region_uncertainty,
                      sample_actions, sample_random_action, select_action,
                      select_target_region)
from .render import Observation, correspondence_map, render
from .scene import (GenConfig, PushAction, Scene, apply_push, body_radius,
                    generate_scene)
from .segmenter import OracleConfig, OracleSegmenter
from .update import RegistrationParams, SimTracker, update_belief

METHODS = ("eos", "random", "finalFrame")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PlannerSettings:
    """Planner knobs plus push distance; push_distance 0 means automatic
    (twice the median body radius of the scene)."""

    world_cap: int = 32
    action_count: int = 8
    push_distance: float = 0.0


@dataclass(frozen=True)
class TrackerSettings:
    dropout: float = 0.0
    jitter: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    scenes: int = 20
    steps: int = 3
    seed: int = 0
    resolution: float = 0.005
    methods: tuple[str, ...] = METHODS
    # flat single-part bodies in loose pairs and small clusters: every
    # ambiguity is then a genuine merge/split question a short push can
    # answer, and pushes rarely create fresh contacts elsewhere
    scene: GenConfig = field(default_factory=lambda: GenConfig(
        body_count=(6, 8), part_count=(1, 1), clutter_fraction=0.5,
        stack_probability=0.0, clearance=0.07))
    oracle: OracleConfig = field(default_factory=lambda: OracleConfig(
        p_merge=0.3, p_part=0.2, boundary_noise=1, td_recall=0.8))
    # two bootstrap episodes keep merged and split hypotheses close to
    # evenly weighted, so initial beliefs carry real uncertainty for the
    # interaction loop to resolve
    proposal: ProposalParams = field(default_factory=lambda: ProposalParams(
        num_episodes=2, dup_iou=0.6))
    # the module default threshold (0.5) exceeds every fresh score when
    # p0 = 0.5, which would make all regions look settled at step 0; the
    # experiment defaults keep initial multi-hypothesis regions ambiguous
    # and the count penalty below any refutation dent
    belief: BeliefParams = field(default_factory=lambda: BeliefParams(
        score_penalty=0.04, score_threshold=0.35))
    # pushes shorter than the oracle merge range: separating a touching
    # pair changes what the belief can learn, not what the segmenter draws
    planner: PlannerSettings = field(default_factory=lambda: PlannerSettings(
        action_count=16, push_distance=0.02))
    tracker: TrackerSettings = field(default_factory=TrackerSettings)

    def __post_init__(self):
        if self.scenes < 1:
            raise ConfigError("scenes must be at least 1")
        if self.steps < 0:
            raise ConfigError("steps must be nonnegative")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method: {m}")


@dataclass(frozen=True)
class StepRecord:
    scene: int
    method: str
    step: int
    p_n: float
    r_n: float
    f_n: float
    p: float
    r: float
    f: float
    action: str
    kappas: str  # per-region ambiguity counts, pipe-separated
    wall_time: float


CSV_COLUMNS = ("scene", "method", "step", "p_n", "r_n", "f_n", "p", "r", "f",
               "action", "kappas", "wall_time")


# ---------------------------------------------------------------------------
# config files: flat "dotted.key value" lines

_SECTIONS = ("scene", "oracle", "proposal", "belief", "planner", "tracker")
_TOP_KEYS = ("scenes", "steps", "seed", "resolution", "methods")


def _convert(tokens: list[str], default):
    if isinstance(default, bool):
        if len(tokens) != 1 or tokens[0] not in ("0", "1", "true", "false"):
            raise ConfigError(f"expected a boolean, got {tokens}")
        return tokens[0] in ("1", "true")
    if isinstance(default, int):
        if len(tokens) != 1:
            raise ConfigError(f"expected one integer, got {tokens}")
        return int(tokens[0])
    if isinstance(default, float):
        if len(tokens) != 1:
            raise ConfigError(f"expected one number, got {tokens}")
        return float(tokens[0])
    if isinstance(default, tuple):
        if len(tokens) != len(default):
            raise ConfigError(f"expected {len(default)} values, got {tokens}")
        return tuple(type(d)(t) for d, t in zip(default, tokens))
    raise ConfigError(f"unsupported config value type: {type(default)}")


def parse_config(text: str) -> ExperimentConfig:
    """Flat key-value config: one `key value...` per line, section fields as
    dotted keys (`oracle.p_merge 0.3`), `#` comments. Unknown keys raise."""
    top: dict = {}
    sections: dict[str, dict] = {name: {} for name in _SECTIONS}
    defaults = ExperimentConfig()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *tokens = line.split()
        if not tokens:
            raise ConfigError(f"missing value for key: {key}")
        if "." in key:
            section, _, name = key.partition(".")
            if section not in _SECTIONS:
                raise ConfigError(f"unknown config section: {section}")
            section_default = getattr(defaults, section)
            if not any(f.name == name for f in dataclasses.fields(section_default)):
                raise ConfigError(f"unknown config key: {key}")
            sections[section][name] = _convert(
                tokens, getattr(section_default, name))
        elif key == "methods":
            top["methods"] = tuple(m for tok in tokens for m in tok.split(","))
        elif key in _TOP_KEYS:
            top[key] = _convert(tokens, getattr(defaults, key))
        else:
            raise ConfigError(f"unknown config key: {key}")
    kwargs = dict(top)
    for name in _SECTIONS:
        if sections[name]:
            kwargs[name] = dataclasses.replace(getattr(defaults, name),
                                               **sections[name])
    try:
        return ExperimentConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def read_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# seeding: independent named streams per scene

def _stream(master: int, label: str, scene_index: int) -> np.random.Generator:
    key = (zlib.crc32(label.encode("ascii")), scene_index)
    return np.random.default_rng(np.random.SeedSequence(master, spawn_key=key))


# ---------------------------------------------------------------------------
# episode execution

def _action_text(action: PushAction | None) -> str:
    if action is None:
        return "none"
    return (f"push {action.target[0]:.6f} {action.target[1]:.6f} "
            f"{action.direction[0]:.6f} {action.direction[1]:.6f} "
            f"{action.distance:.6f}")


def _kappa_text(belief: Belief) -> str:
    counts = [str(region_uncertainty(r, belief.params)) for r in belief.regions]
    return "|".join(counts) if counts else "-"


def _score(belief: Belief, obs: Observation) -> SegEval:
    pred = project_to_masks(most_likely(belief), obs)
    return evaluate(pred, masks_from_labels(obs.labels))


def _predicted_labels(belief: Belief, obs: Observation) -> np.ndarray:
    out = np.zeros(obs.shape, dtype=np.int32)
    for i, mask in enumerate(project_to_masks(most_likely(belief), obs), start=1):
        out[mask.data] = i
    return out


def _push_distance(config: ExperimentConfig, scene: Scene) -> float:
    if config.planner.push_distance > 0.0:
        return config.planner.push_distance
    return 2.0 * float(np.median([body_radius(b) for b in scene.bodies]))


@dataclass
class _EpisodeSink:
    """Collects records and, when writing to disk, predicted label maps."""

    records: list[StepRecord]
    label_maps: dict[tuple[int, str, int], np.ndarray]

    def add(self, record: StepRecord, labels: np.ndarray) -> None:
        self.records.append(record)
        self.label_maps[(record.scene, record.method, record.step)] = labels


def _record(sink: _EpisodeSink, scene_id: int, method: str, step: int,
            ev: SegEval, action: str, kappas: str, wall: float,
            labels: np.ndarray) -> None:
    sink.add(StepRecord(scene_id, method, step, ev.p_n, ev.r_n, ev.f_n,
                        ev.p, ev.r, ev.f, action, kappas, wall), labels)


def _error_record(sink: _EpisodeSink, scene_id: int, method: str, step: int,
                  exc: Exception, shape: tuple[int, int]) -> None:
    note = f"error {type(exc).__name__}: {exc}"
    sink.add(StepRecord(scene_id, method, step, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                        note, "-", 0.0), np.zeros(shape, dtype=np.int32))


def _run_eos(scene_id: int, scene0: Scene, obs0: Observation,
             segmenter: OracleSegmenter, config: ExperimentConfig,
             sink: _EpisodeSink) -> None:
    rng_seg = _stream(config.seed, "segmenter", scene_id)
    rng_plan = _stream(config.seed, "planner", scene_id)
    rng_track = _stream(config.seed, "tracker", scene_id)
    planner_params = PlannerParams(config.planner.world_cap,
                                   config.planner.action_count)
    distance = _push_distance(config, scene0)
    reg = RegistrationParams()

    scene, obs = scene0, obs0
    step = 0
    try:
        t0 = time.perf_counter()
        hyps = propose_hypotheses(obs, segmenter, config.proposal, rng_seg)
        belief = init_belief(hyps, obs, config.belief)
        ev = _score(belief, obs)
        _record(sink, scene_id, "eos", 0, ev, "none", _kappa_text(belief),
                time.perf_counter() - t0, _predicted_labels(belief, obs))

        for step in range(1, config.steps + 1):
            t0 = time.perf_counter()
            target = select_target_region(belief)
            if target is None:
                # nothing ambiguous left: hold still, repeat the evaluation
                ev = _score(belief, obs)
                _record(sink, scene_id, "eos", step, ev, "none",
                        _kappa_text(belief), time.perf_counter() - t0,
                        _predicted_labels(belief, obs))
                continue
            worlds = construct_worlds(belief, obs, config.planner.world_cap)
            candidates = sample_actions(belief, target,
                                        config.planner.action_count,
                                        distance, obs, rng_plan, planner_params)
            chosen = select_action(worlds, candidates, obs)
            outcome = apply_push(scene, chosen.action)
            new_scene = outcome.scene
            new_obs = render(new_scene, config.resolution)
            segmenter.register(new_scene, new_obs)
            corr = correspondence_map(scene, new_scene, obs, new_obs)
            tracker = SimTracker(corr, config.tracker.dropout,
                                 config.tracker.jitter)
            belief = update_belief(belief, obs, new_obs, tracker, reg, rng_track)
            scene, obs = new_scene, new_obs
            ev = _score(belief, obs)
            _record(sink, scene_id, "eos", step, ev, _action_text(chosen.action),
                    _kappa_text(belief), time.perf_counter() - t0,
                    _predicted_labels(belief, obs))
    except Exception as exc:  # noqa: BLE001 - episode isolation by contract
        _error_record(sink, scene_id, "eos", step, exc, obs0.shape)


def _run_random_pair(scene_id: int, scene0: Scene, obs0: Observation,
                     segmenter: OracleSegmenter, config: ExperimentConfig,
                     sink: _EpisodeSink) -> None:
    """One physical trajectory serving both baselines: the random belief
    follows the pushes with updates, while finalFrame reruns the whole
    pipeline from scratch on every frame random produced."""
    want_random = "random" in config.methods
    want_ff = "finalFrame" in config.methods
    rng_seg = _stream(config.seed, "segmenter", scene_id)
    rng_plan = _stream(config.seed, "planner", scene_id)
    rng_track = _stream(config.seed, "tracker", scene_id)
    rng_ff = _stream(config.seed, "finalframe", scene_id)
    distance = _push_distance(config, scene0)
    reg = RegistrationParams()

    scene, obs = scene0, obs0
    step = 0
    try:
        t0 = time.perf_counter()
        hyps = propose_hypotheses(obs, segmenter, config.proposal, rng_seg)
        belief = init_belief(hyps, obs, config.belief)
        ev = _score(belief, obs)
        wall = time.perf_counter() - t0
        labels = _predicted_labels(belief, obs)
        kappas = _kappa_text(belief)
        if want_random:
            _record(sink, scene_id, "random", 0, ev, "none", kappas, wall, labels)
        if want_ff:
            _record(sink, scene_id, "finalFrame", 0, ev, "none", kappas, wall,
                    labels)

        for step in range(1, config.steps + 1):
            t0 = time.perf_counter()
            chosen = sample_random_action(belief, distance, obs, rng_plan)
            if chosen is None:
                ev = _score(belief, obs)
                labels = _predicted_labels(belief, obs)
                if want_random:
                    _record(sink, scene_id, "random", step, ev, "none",
                            _kappa_text(belief), time.perf_counter() - t0,
                            labels)
                if want_ff:
                    _record(sink, scene_id, "finalFrame", step, ev, "none",
                            _kappa_text(belief), time.perf_counter() - t0,
                            labels)
                continue
            outcome = apply_push(scene, chosen.action)
            new_scene = outcome.scene
            new_obs = render(new_scene, config.resolution)
            segmenter.register(new_scene, new_obs)
            corr = correspondence_map(scene, new_scene, obs, new_obs)
            tracker = SimTracker(corr, config.tracker.dropout,
                                 config.tracker.jitter)
            belief = update_belief(belief, obs, new_obs, tracker, reg, rng_track)
            scene, obs = new_scene, new_obs
            wall = time.perf_counter() - t0
            if want_random:
                ev = _score(belief, obs)
                _record(sink, scene_id, "random", step, ev,
                        _action_text(chosen.action), _kappa_text(belief),
                        wall, _predicted_labels(belief, obs))
            if want_ff:
                t1 = time.perf_counter()
                ff_hyps = propose_hypotheses(obs, segmenter, config.proposal,
                                             rng_ff)
                ff_belief = init_belief(ff_hyps, obs, config.belief)
                ff_ev = _score(ff_belief, obs)
                _record(sink, scene_id, "finalFrame", step, ff_ev,
                        _action_text(chosen.action), _kappa_text(ff_belief),
                        time.perf_counter() - t1,
                        _predicted_labels(ff_belief, obs))
    except Exception as exc:  # noqa: BLE001 - episode isolation by contract
        method = "random" if want_random else "finalFrame"
        _error_record(sink, scene_id, method, step, exc, obs0.shape)


def run_scene(scene_id: int, config: ExperimentConfig,
              scene: Scene | None = None) -> _EpisodeSink:
    """All requested methods on one scene; scene defaults to the generated
    scene for this id under the master seed."""
    if scene is None:
        scene = generate_scene(config.scene,
                               _stream(config.seed, "scene-gen", scene_id))
    obs = render(scene, config.resolution)
    sink = _EpisodeSink([], {})
    if "eos" in config.methods:
        segmenter = OracleSegmenter(config.oracle)
        segmenter.register(scene, obs)
        _run_eos(scene_id, scene, obs, segmenter, config, sink)
    if "random" in config.methods or "finalFrame" in config.methods:
        segmenter = OracleSegmenter(config.oracle)
        segmenter.register(scene, obs)
        _run_random_pair(scene_id, scene, obs, segmenter, config, sink)
    return sink


# ---------------------------------------------------------------------------
# experiment-level aggregation

def records_to_csv(records: list[StepRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in sorted(records, key=lambda r: (r.scene, r.method, r.step)):
        writer.writerow([r.scene, r.method, r.step,
                         repr(r.p_n), repr(r.r_n), repr(r.f_n),
                         repr(r.p), repr(r.r), repr(r.f),
                         r.action, r.kappas, repr(r.wall_time)])
    return buf.getvalue()


@dataclass(frozen=True)
class MethodSummary:
    method: str
    scenes: int
    mean_f_n: dict[int, float]   # step -> mean F_n
    mean_f: dict[int, float]
    delta_f_n_mean: float        # mean of per-scene F_n[T] - F_n[0]
    delta_f_n_se: float
    delta_f_mean: float
    delta_f_se: float
    single_sample: bool


def summarize(records: list[StepRecord], steps: int) -> list[MethodSummary]:
    by_method: dict[str, dict[int, dict[int, StepRecord]]] = {}
    for r in records:
        by_method.setdefault(r.method, {}).setdefault(r.scene, {})[r.step] = r
    out = []
    for method in sorted(by_method):
        scenes = by_method[method]
        mean_f_n: dict[int, float] = {}
        mean_f: dict[int, float] = {}
        for step in range(steps + 1):
            vals_n = [s[step].f_n for s in scenes.values() if step in s]
            vals = [s[step].f for s in scenes.values() if step in s]
            if vals_n:
                mean_f_n[step] = float(np.mean(vals_n))
                mean_f[step] = float(np.mean(vals))
        deltas_n = [s[steps].f_n - s[0].f_n for s in scenes.values()
                    if 0 in s and steps in s]
        deltas = [s[steps].f - s[0].f for s in scenes.values()
                  if 0 in s and steps in s]
        single = len(deltas_n) < 2

        def se(vals: list[float]) -> float:
            if len(vals) < 2:
                return 0.0
            return float(np.std(vals, ddof=1) / math.sqrt(len(vals)))

        out.append(MethodSummary(
            method, len(scenes), mean_f_n, mean_f,
            float(np.mean(deltas_n)) if deltas_n else 0.0, se(deltas_n),
            float(np.mean(deltas)) if deltas else 0.0, se(deltas), single))
    return out


def report_text(summaries: list[MethodSummary], steps: int) -> str:
    lines = ["disambiguation experiment report", ""]
    header = f"{'method':<12}{'scenes':>7}" + "".join(
        f"{'F_n@' + str(s):>10}" for s in range(steps + 1))
    lines.append(header + f"{'dM(F_n)':>10}{'dSE':>9}{'dM(F)':>10}{'dSE':>9}")
    for s in summaries:
        row = f"{s.method:<12}{s.scenes:>7}"
        for step in range(steps + 1):
            row += (f"{s.mean_f_n[step]:>10.4f}" if step in s.mean_f_n
                    else f"{'-':>10}")
        flag = "*" if s.single_sample else ""
        row += (f"{s.delta_f_n_mean:>10.4f}{s.delta_f_n_se:>8.4f}{flag:<1}"
                f"{s.delta_f_mean:>10.4f}{s.delta_f_se:>8.4f}{flag:<1}")
        lines.append(row)
    if any(s.single_sample for s in summaries):
        lines.append("")
        lines.append("* single scene: standard error reported as 0")
    return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None
                   ) -> tuple[list[StepRecord], list[MethodSummary]]:
    """Run every scene and method, optionally writing records.csv,
    report.txt, and per-step predicted label maps under out_dir."""
    records: list[StepRecord] = []
    label_maps: dict[tuple[int, str, int], np.ndarray] = {}
    for scene_id in range(config.scenes):
        sink = run_scene(scene_id, config)
        records.extend(sink.records)
        label_maps.update(sink.label_maps)
    summaries = summarize(records, config.steps)
    if out_dir is not None:
        from .serialize import labels_to_pgm
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "records.csv").write_text(records_to_csv(records),
                                         encoding="utf-8")
        (out / "report.txt").write_text(report_text(summaries, config.steps),
                                        encoding="utf-8")
        maps_dir = out / "labels"
        maps_dir.mkdir(exist_ok=True)
        for (scene_id, method, step), labels in sorted(label_maps.items()):
            name = f"scene{scene_id:03d}_{method}_step{step}.pgm"
            (maps_dir / name).write_text(labels_to_pgm(labels),
                                         encoding="utf-8")
    return records, summaries
