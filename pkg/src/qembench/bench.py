"""Experiment grid expansion, execution, the results store and summaries."""

from __future__ import annotations

import csv
import io
import json
import logging
import traceback
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Reduction, load_iris, prepare
from .mitigation import MitigationKind, MitigationPlan, NotRepresentableError, pec_representation
from .model import TrainConfig, metrics_to_dicts, train
from .noise import CHANNEL_KINDS, NoiseKind, NoiseModel

log = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
INTERVALS = {"Low": (0.0, 0.02), "Medium": (0.05, 0.1), "High": (0.2, 1.0)}
CSV_COLUMNS = (
    "config_id", "noise_kind", "p", "mitigation", "repetition", "seed", "epoch",
    "train_acc", "val_acc", "train_loss", "val_loss", "wall_time_s", "eval_count", "status",
)
RECORDS_FILE = "records.jsonl"
RESULTS_FILE = "results.csv"


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- grid


@dataclass(frozen=True)
class MitigationEntry:
    """A technique in the grid, optionally limited to some noise kinds."""

    kind: MitigationKind
    settings: Mapping = field(default_factory=dict)
    noise_kinds: tuple[NoiseKind, ...] | None = None

    def plan(self) -> MitigationPlan:
        return MitigationPlan.from_settings(self.kind, self.settings)


@dataclass(frozen=True)
class ExperimentGrid:
    noise_kinds: tuple[NoiseKind, ...] = CHANNEL_KINDS
    noise_levels: tuple[float, ...] = DEFAULT_LEVELS
    mitigations: tuple[MitigationEntry, ...] = ()
    repetitions: int = 3
    base_seed: int = 0


@dataclass(frozen=True)
class RunSettings:
    """Everything shared by the runs of one config file."""

    dataset: str | None = None
    reduction: Reduction = Reduction.TRUNCATE3
    split_seed: int = 0
    shots: int | None = 8192
    epochs: int = 20
    lr0: float = 0.3
    lr_halving_period: int = 5
    batch_size: int = 5
    mitigate_gradients: bool = True
    use_bias: bool = True


@dataclass(frozen=True)
class RunConfig:
    config_id: str
    noise_kind: NoiseKind
    p: float
    mitigation: MitigationEntry
    repetition: int
    seed: int

    @property
    def key(self) -> tuple[str, int]:
        return (self.config_id, self.repetition)


@dataclass(frozen=True)
class ExperimentConfig:
    grid: ExperimentGrid
    settings: RunSettings


def _parse_mitigation(item, defaults: Mapping) -> MitigationEntry:
    if isinstance(item, str):
        item = {"kind": item}
    if not isinstance(item, Mapping) or "kind" not in item:
        raise ConfigError(f"mitigation entry must be a name or an object with 'kind': {item!r}")
    try:
        kind = MitigationKind(item["kind"])
    except ValueError:
        raise ConfigError(f"unknown mitigation {item['kind']!r}") from None
    settings = dict(defaults.get(kind.value, {}))
    settings.update(item.get("settings", {}))
    kinds = item.get("noise_kinds")
    try:
        kinds = None if kinds is None else tuple(NoiseKind(k) for k in kinds)
        entry = MitigationEntry(kind, settings, kinds)
        entry.plan()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid settings for {kind.value}: {exc}") from None
    return entry


def parse_config(doc: Mapping) -> ExperimentConfig:
    """Build a validated config from a JSON document."""
    if not isinstance(doc, Mapping):
        raise ConfigError("config must be a JSON object")
    g = doc.get("grid", {})
    try:
        kinds = tuple(NoiseKind(k) for k in g.get("noise_kinds", [k.value for k in CHANNEL_KINDS]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    levels = tuple(float(p) for p in g.get("noise_levels", DEFAULT_LEVELS))
    if any(not 0 <= p <= 1 for p in levels):
        raise ConfigError(f"noise levels must lie in [0, 1]: {levels}")
    if len(set(levels)) != len(levels):
        raise ConfigError(f"duplicate noise levels: {levels}")
    defaults = doc.get("mitigation", {})
    mits = tuple(_parse_mitigation(m, defaults) for m in g.get("mitigations", ["none"]))
    reps = int(g.get("repetitions", 3))
    if reps < 1:
        raise ConfigError("repetitions must be >= 1")
    grid = ExperimentGrid(kinds, levels, mits, reps, int(g.get("base_seed", 0)))
    tr = doc.get("training", {})
    try:
        settings = RunSettings(
            dataset=doc.get("dataset"),
            reduction=Reduction(doc.get("reduction", "truncate3")),
            split_seed=int(doc.get("split_seed", grid.base_seed)),
            shots=doc.get("shots", 8192),
            epochs=int(tr.get("epochs", 20)),
            lr0=float(tr.get("lr0", 0.3)),
            lr_halving_period=int(tr.get("lr_halving_period", 5)),
            batch_size=int(tr.get("batch_size", 5)),
            mitigate_gradients=bool(doc.get("mitigate_gradients", True)),
            use_bias=bool(doc.get("use_bias", True)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if settings.shots is not None and (not isinstance(settings.shots, int) or settings.shots < 1):
        raise ConfigError(f"shots must be a positive integer or null, got {settings.shots!r}")
    cfg = ExperimentConfig(grid, settings)
    expand_grid(grid)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(doc)


def config_id(kind: NoiseKind, p: float, mitigation: MitigationKind) -> str:
    return f"{kind.value}-p{p:g}-{mitigation.value}"


def expand_grid(grid: ExperimentGrid) -> list[RunConfig]:
    """Cartesian expansion ordered by (noise kind, level, mitigation, repetition).

    A technique limited to some noise kinds is skipped for the others. PEC
    may only be paired with depolarizing noise.

    Raises:
        ConfigError: for an invalid pairing.
    """
    runs = []
    for kind in grid.noise_kinds:
        for p in grid.noise_levels:
            for m in grid.mitigations:
                if m.noise_kinds is not None and kind not in m.noise_kinds:
                    continue
                if m.kind is MitigationKind.PEC and kind is not NoiseKind.DEPOLARIZING:
                    raise ConfigError(f"pec is only defined for depolarizing noise, not {kind.value}")
                cid = config_id(kind, p, m.kind)
                for r in range(grid.repetitions):
                    runs.append(RunConfig(cid, kind, p, m, r, grid.base_seed + r))
    return runs


def count_configs(runs: Sequence[RunConfig]) -> int:
    return len({r.config_id for r in runs})


# --------------------------------------------------------------------------- execution


def _status(flags: Mapping[str, int]) -> str:
    return ";".join(sorted(flags)) if flags else "ok"


def run_one(run: RunConfig, settings: RunSettings) -> dict:
    """Train one repetition and return its record; never raises."""
    plan = run.mitigation.plan()
    rec = {
        "config_id": run.config_id,
        "noise_kind": run.noise_kind.value,
        "p": run.p,
        "mitigation": plan.kind.value,
        "settings": plan.settings(),
        "repetition": run.repetition,
        "seed": run.seed,
        "reduction": settings.reduction.value,
        "shots": settings.shots,
        "mitigate_gradients": settings.mitigate_gradients,
    }
    try:
        if plan.kind is MitigationKind.PEC:
            pec_representation(run.p)
        ds = load_iris(settings.dataset)
        split = prepare(ds, settings.split_seed, settings.reduction)
        cfg = TrainConfig(
            epochs=settings.epochs, lr0=settings.lr0, lr_halving_period=settings.lr_halving_period,
            batch_size=settings.batch_size, seed=run.seed, shots=settings.shots, mitigation=plan,
            noise=NoiseModel.of(run.noise_kind, run.p), mitigate_gradients=settings.mitigate_gradients,
            use_bias=settings.use_bias,
        )
        res = train(split, cfg)
    except NotRepresentableError as exc:
        rec.update(status="pec_not_representable", message=str(exc), metrics=[], flags={})
        return rec
    except Exception as exc:  # recorded, the grid continues
        rec.update(status="error", message=f"{type(exc).__name__}: {exc}", metrics=[], flags={},
                   traceback=traceback.format_exc())
        return rec
    last = res.metrics[-1]
    rec.update(
        metrics=metrics_to_dicts(res.metrics),
        final_train_acc=last.train_accuracy,
        final_val_acc=last.val_accuracy,
        wall_time_s=res.wall_time_s,
        eval_count=res.eval_count,
        baseline_eval_count=res.baseline_eval_count,
        overhead=res.overhead,
        flags=res.flags,
        status=_status(res.flags),
    )
    return rec


def _is_done(rec: Mapping) -> bool:
    return rec.get("status") != "error"


def read_records(out_dir: str | Path) -> list[dict]:
    """Latest record per (config, repetition), in file order."""
    path = Path(out_dir) / RECORDS_FILE
    if not path.exists():
        return []
    latest: dict[tuple, dict] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            log.warning("%s:%d: skipping unreadable record", path, lineno)
            continue
        latest[(rec["config_id"], rec["repetition"])] = rec
    return list(latest.values())


class ResultsStore:
    """Append-only record log; only the owning process writes."""

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.path = self.out_dir / RECORDS_FILE

    def append(self, rec: Mapping) -> None:
        with self.path.open("a") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            fh.flush()

    def records(self) -> list[dict]:
        return read_records(self.out_dir)

    def done_keys(self) -> set[tuple[str, int]]:
        return {(r["config_id"], r["repetition"]) for r in self.records() if _is_done(r)}


def run_grid(runs: Sequence[RunConfig], settings: RunSettings, out_dir: str | Path,
             parallelism: int = 1, progress=None) -> list[dict]:
    """Execute the runs not yet in the store and append each record as it lands.

    Returns:
        The records produced by this call.
    """
    store = ResultsStore(out_dir)
    done = store.done_keys()
    todo = [r for r in runs if r.key not in done]
    produced = []

    def _land(rec):
        store.append(rec)
        produced.append(rec)
        if progress is not None:
            progress(rec, len(produced), len(todo))

    if parallelism <= 1 or len(todo) <= 1:
        for r in todo:
            _land(run_one(r, settings))
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(run_one, r, settings) for r in todo]
            for fut in as_completed(futures):
                _land(fut.result())
    write_results_csv(store.records(), Path(out_dir) / RESULTS_FILE)
    return produced


# --------------------------------------------------------------------------- CSV and summaries


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _sort_key(rec: Mapping):
    return (rec["noise_kind"], rec["p"], rec["mitigation"], rec["repetition"])


def results_rows(records: Iterable[Mapping]) -> list[list[str]]:
    rows = []
    for rec in sorted(records, key=_sort_key):
        head = [rec["config_id"], rec["noise_kind"], rec["p"], rec["mitigation"], rec["repetition"], rec["seed"]]
        if not rec.get("metrics"):
            rows.append([_fmt(v) for v in head] + [""] * 7 + [rec["status"]])
            continue
        for m in rec["metrics"]:
            rows.append([_fmt(v) for v in head] + [
                _fmt(m["epoch"]), _fmt(m["train_accuracy"]), _fmt(m["val_accuracy"]),
                _fmt(m["train_loss"]), _fmt(m["val_loss"]), f"{m['wall_time_s']:.3f}",
                _fmt(rec["eval_count"]), rec["status"],
            ])
    return rows


def write_results_csv(records: Iterable[Mapping], path: str | Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(results_rows(records))
    Path(path).write_text(buf.getvalue())


def interval_of(p: float) -> str | None:
    for name, (lo, hi) in INTERVALS.items():
        if lo - 1e-12 <= p <= hi + 1e-12:
            return name
    return None


def level_means(records: Iterable[Mapping]) -> dict[tuple[str, str, float], list[float]]:
    """Final validation accuracies grouped by (noise kind, mitigation, p)."""
    out: dict[tuple[str, str, float], list[float]] = defaultdict(list)
    for rec in records:
        if rec.get("metrics") and "final_val_acc" in rec:
            out[(rec["noise_kind"], rec["mitigation"], float(rec["p"]))].append(rec["final_val_acc"])
    return out


@dataclass
class SummaryCell:
    value: float
    best_p: float
    levels: tuple[float, ...]
    n_records: int


@dataclass
class SummaryTable:
    cells: dict[tuple[str, str, str], SummaryCell]
    missing: list[tuple[str, str, str]]
    noise_kinds: list[str]
    mitigations: list[str]

    def get(self, kind: str, interval: str, mitigation: str) -> float | None:
        c = self.cells.get((kind, interval, mitigation))
        return None if c is None else c.value

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["noise_kind", "interval", "mitigation", "val_acc", "best_p", "levels", "n_records"])
        for (k, i, m), c in sorted(self.cells.items(), key=lambda kv: self._order(kv[0])):
            w.writerow([k, i, m, f"{c.value:.4f}", f"{c.best_p:g}", " ".join(f"{p:g}" for p in c.levels), c.n_records])
        return buf.getvalue()

    def _order(self, key):
        k, i, m = key
        return (self.noise_kinds.index(k), list(INTERVALS).index(i), self.mitigations.index(m))

    def to_text(self) -> str:
        head = ["noise", "interval"] + self.mitigations
        rows = []
        for k in self.noise_kinds:
            for i in INTERVALS:
                vals = [self.get(k, i, m) for m in self.mitigations]
                if all(v is None for v in vals):
                    continue
                rows.append([k, i] + ["-" if v is None else f"{v:.4f}" for v in vals])
        widths = [max(len(r[c]) for r in rows + [head]) for c in range(len(head))]
        lines = ["  ".join(s.ljust(w) for s, w in zip(r, widths)).rstrip() for r in [head] + rows]
        lines.append("")
        lines.append("Cell = max over the interval's noise levels of the mean final validation accuracy")
        lines.append("over repetitions. Low: 0-0.02, Medium: 0.05-0.1, High: 0.2-1.0. '-' = no records.")
        if self.missing:
            lines.append("Missing cells: " + ", ".join("/".join(c) for c in self.missing))
        return "\n".join(lines) + "\n"


_MIT_ORDER = [m.value for m in MitigationKind]
_KIND_ORDER = [k.value for k in CHANNEL_KINDS] + [NoiseKind.NONE.value]


def summarize(records: Iterable[Mapping], expected: Iterable[tuple[str, str, str]] | None = None) -> SummaryTable:
    """Aggregate final validation accuracy into (noise kind, interval, mitigation) cells."""
    by_level = level_means(records)
    cells: dict[tuple[str, str, str], SummaryCell] = {}
    grouped: dict[tuple[str, str, str], list[tuple[float, float, int]]] = defaultdict(list)
    for (kind, mit, p), accs in by_level.items():
        interval = interval_of(p)
        if interval is None:
            continue
        grouped[(kind, interval, mit)].append((float(np.mean(accs)), p, len(accs)))
    for key, items in grouped.items():
        items.sort(key=lambda t: t[1])
        best = max(items, key=lambda t: (t[0], -t[1]))
        cells[key] = SummaryCell(best[0], best[1], tuple(t[1] for t in items), sum(t[2] for t in items))
    kinds = sorted({k for k, _, _ in cells}, key=lambda k: _KIND_ORDER.index(k) if k in _KIND_ORDER else 99)
    mits = sorted({m for _, _, m in cells}, key=lambda m: _MIT_ORDER.index(m) if m in _MIT_ORDER else 99)
    missing = sorted(set(expected or ()) - set(cells))
    return SummaryTable(cells, missing, kinds, mits)


def expected_cells(runs: Iterable[RunConfig]) -> set[tuple[str, str, str]]:
    out = set()
    for r in runs:
        i = interval_of(r.p)
        if i is not None:
            out.add((r.noise_kind.value, i, r.mitigation.kind.value))
    return out


def per_level_rows(records: Iterable[Mapping]) -> list[tuple[str, str, float, float, float, float, int]]:
    """(kind, mitigation, p, mean, min, max, n) for every level with results."""
    out = []
    for (kind, mit, p), accs in level_means(records).items():
        out.append((kind, mit, p, float(np.mean(accs)), float(np.min(accs)), float(np.max(accs)), len(accs)))
    out.sort(key=lambda r: (_KIND_ORDER.index(r[0]) if r[0] in _KIND_ORDER else 99,
                            _MIT_ORDER.index(r[1]) if r[1] in _MIT_ORDER else 99, r[2]))
    return out


def write_summary(records: Sequence[Mapping], out_dir: str | Path,
                  expected: Iterable[tuple[str, str, str]] | None = None) -> SummaryTable:
    out_dir = Path(out_dir)
    table = summarize(records, expected)
    (out_dir / "summary.csv").write_text(table.to_csv())
    (out_dir / "summary.txt").write_text(table.to_text())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["noise_kind", "mitigation", "p", "val_acc_mean", "val_acc_min", "val_acc_max", "n"])
    for k, m, p, mean, lo, hi, n in per_level_rows(records):
        w.writerow([k, m, f"{p:g}", f"{mean:.4f}", f"{lo:.4f}", f"{hi:.4f}", n])
    (out_dir / "per_level.csv").write_text(buf.getvalue())
    write_results_csv(records, out_dir / RESULTS_FILE)
    return table
