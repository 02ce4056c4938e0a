"""Split protocols, metrics, and seeded simulation experiments.

Top-n is the fraction of samples whose truth appears within the first n
ranked candidates.  Cat_Avg is the mean of per-category Top-1 accuracies
with every category weighted equally, which differs from sample accuracy
whenever category sample counts differ.

Experiments are reproducible artifacts: one config (JSON) plus a seed
fully determines the report bytes.  Sample simulation may be spread over
threads; every sample owns its stream and metrics are order-independent
reductions, so thread count never changes any output byte.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .ckg import CharacterKnowledgeGraph, read_ckg
from .errors import ConfigError, InfeasibleParamsError, InvalidParamsError
from .reasoner import ReasonerParams
from .simulate import (
    STRATEGIES,
    NoiseModel,
    recognize,
    simulate_predictions,
)
from .streams import Stream
from .synth import SynthParams, generate_synthetic_ckg

CSV_COLUMNS = ("strategy", "top1", "top3", "top5", "cat_avg", "n_samples", "seed")

TOP_NS = (1, 3, 5)


@dataclass(frozen=True)
class SplitSpec:
    protocol: str  # "seen-80-20" | "zero-shot-c-m"
    train_categories: frozenset[str]
    test_categories: frozenset[str]
    m: int
    seed: int


@dataclass(frozen=True)
class RecognitionResult:
    truth: str
    ranked: tuple[str, ...]
    correct_at: int | None  # 1-based rank of the truth, if present

    @classmethod
    def from_ranked(cls, truth: str, ranked: Sequence[str]) -> "RecognitionResult":
        position = None
        for i, cid in enumerate(ranked):
            if cid == truth:
                position = i + 1
                break
        return cls(truth=truth, ranked=tuple(ranked), correct_at=position)


def split_zero_shot(
    ckg: CharacterKnowledgeGraph, n_test: int, m: int, seed: int
) -> SplitSpec:
    """Fixed test categories first, then m train categories from the rest.

    For one seed the test set is identical across all m, and train sets are
    nested as m grows (both follow one seeded permutation).
    """
    ids = sorted(ckg.characters)
    if n_test < 1 or m < 0 or n_test + m > len(ids):
        raise InfeasibleParamsError(
            f"cannot split {len(ids)} categories into {n_test} test + {m} train"
        )
    rng = Stream(seed, (0,)).generator()
    perm = [ids[i] for i in rng.permutation(len(ids))]
    test = perm[:n_test]
    train = perm[n_test : n_test + m]
    return SplitSpec(
        protocol="zero-shot-c-m",
        train_categories=frozenset(train),
        test_categories=frozenset(test),
        m=m,
        seed=seed,
    )


def top_n_accuracy(results: Sequence[RecognitionResult], n: int) -> float:
    if n < 1:
        raise InvalidParamsError("n must be >= 1")
    if not results:
        raise InvalidParamsError("no results to score")
    hits = sum(1 for r in results if r.correct_at is not None and r.correct_at <= n)
    return hits / len(results)


def cat_avg(results: Sequence[RecognitionResult]) -> float:
    """Per-category Top-1 accuracy, averaged with equal category weight."""
    if not results:
        raise InvalidParamsError("no results to score")
    totals: dict[str, int] = {}
    hits: dict[str, int] = {}
    for r in results:
        totals[r.truth] = totals.get(r.truth, 0) + 1
        if r.correct_at == 1:
            hits[r.truth] = hits.get(r.truth, 0) + 1
    return sum(hits.get(cat, 0) / n for cat, n in totals.items()) / len(totals)


@dataclass(frozen=True)
class ExperimentConfig:
    ckg_path: str | None = None
    synthetic: SynthParams | None = None
    noise: NoiseModel = NoiseModel()
    reasoner: ReasonerParams = ReasonerParams()
    split: Mapping | None = None  # {"protocol", "n_test", "m", "seed"}
    strategy: str = "reason-full"
    strategies: tuple[str, ...] = STRATEGIES
    samples_per_category: int = 5
    seed: int = 0
    output_dir: str | None = None
    basename: str = "report"
    threads: int = 1

    def echo(self) -> dict:
        """Semantic parameters only; runtime knobs (threads, paths) excluded."""
        doc: dict = {
            "noise": {
                "r": list(self.noise.r) if isinstance(self.noise.r, tuple) else self.noise.r,
                "s": self.noise.s,
                "boost": self.noise.boost,
                "temperature": self.noise.temperature,
            },
            "reasoner": {
                "theta": self.reasoner.theta,
                "top_k": self.reasoner.top_k,
                "cap": self.reasoner.cap,
                "match_mode": self.reasoner.match_mode,
                "max_structures": self.reasoner.max_structures,
                "min_conf": self.reasoner.min_conf,
                "objectness_floor": self.reasoner.objectness_floor,
            },
            "samples_per_category": self.samples_per_category,
            "seed": self.seed,
        }
        if self.ckg_path is not None:
            doc["ckg"] = {"path": self.ckg_path}
        if self.synthetic is not None:
            doc["ckg"] = {
                "synthetic": {
                    "characters": self.synthetic.n_characters,
                    "radicals": self.synthetic.n_radicals,
                    "structures": self.synthetic.n_structures,
                    "radical_counts": {
                        str(k): v for k, v in sorted(self.synthetic.radical_counts.items())
                    },
                    "seed": self.synthetic.seed,
                }
            }
        if self.split is not None:
            doc["split"] = dict(self.split)
        return doc


def _synth_params_from(doc: Mapping) -> SynthParams:
    try:
        counts_raw = doc.get("radical_counts")
        counts = (
            {int(k): float(v) for k, v in counts_raw.items()}
            if isinstance(counts_raw, Mapping)
            else None
        )
        kwargs = dict(
            n_characters=int(doc["characters"]),
            n_radicals=int(doc["radicals"]),
            n_structures=int(doc["structures"]),
            seed=int(doc.get("seed", 0)),
        )
        if counts is not None:
            kwargs["radical_counts"] = counts
        return SynthParams(**kwargs)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad synthetic ckg section: {exc}") from exc


def config_from_document(doc: Mapping) -> ExperimentConfig:
    """Parse an experiment config document with defaults and validation."""
    if not isinstance(doc, Mapping):
        raise ConfigError("experiment config must be a JSON object")
    ckg_section = doc.get("ckg")
    ckg_path = None
    synthetic = None
    if isinstance(ckg_section, Mapping) and "path" in ckg_section:
        ckg_path = str(ckg_section["path"])
    elif isinstance(ckg_section, Mapping) and "synthetic" in ckg_section:
        synthetic = _synth_params_from(ckg_section["synthetic"])
    else:
        raise ConfigError("config needs ckg.path or ckg.synthetic")

    try:
        noise_doc = doc.get("noise", {})
        r_raw = noise_doc.get("r", 0.9)
        noise = NoiseModel(
            r=tuple(r_raw) if isinstance(r_raw, list) else float(r_raw),
            s=float(noise_doc.get("s", 0.9)),
            boost=float(noise_doc.get("boost", 3.0)),
            temperature=float(noise_doc.get("temperature", 1.0)),
        )
    except (TypeError, ValueError, InvalidParamsError) as exc:
        raise ConfigError(f"bad noise section: {exc}") from exc

    try:
        rdoc = doc.get("reasoner", {})
        reasoner = ReasonerParams(
            theta=float(rdoc.get("theta", 0.7)),
            top_k=int(rdoc.get("top_k", 5)),
            cap=int(rdoc.get("cap", 1000)),
            match_mode=str(rdoc.get("match_mode", "exact")),
            max_structures=(
                int(rdoc["max_structures"]) if rdoc.get("max_structures") is not None else None
            ),
            min_conf=(float(rdoc["min_conf"]) if rdoc.get("min_conf") is not None else None),
            objectness_floor=float(rdoc.get("objectness_floor", 0.0)),
        )
    except (TypeError, ValueError, InvalidParamsError) as exc:
        raise ConfigError(f"bad reasoner section: {exc}") from exc

    strategies_raw = doc.get("strategies", list(STRATEGIES))
    if not isinstance(strategies_raw, list) or not strategies_raw:
        raise ConfigError("strategies must be a non-empty list")
    for s in strategies_raw:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}; expected one of {STRATEGIES}")
    strategy = str(doc.get("strategy", "reason-full"))
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")

    split = doc.get("split")
    if split is not None and not isinstance(split, Mapping):
        raise ConfigError("split must be an object or null")

    output = doc.get("output", {})
    output_dir = output.get("dir") if isinstance(output, Mapping) else None
    basename = output.get("basename", "report") if isinstance(output, Mapping) else "report"

    try:
        samples_per_category = int(doc.get("samples_per_category", 5))
        seed = int(doc.get("seed", 0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad scalar config value: {exc}") from exc
    if samples_per_category < 1:
        raise ConfigError("samples_per_category must be >= 1")

    return ExperimentConfig(
        ckg_path=ckg_path,
        synthetic=synthetic,
        noise=noise,
        reasoner=reasoner,
        split=dict(split) if split is not None else None,
        strategy=strategy,
        strategies=tuple(strategies_raw),
        samples_per_category=samples_per_category,
        seed=seed,
        output_dir=str(output_dir) if output_dir is not None else None,
        basename=str(basename),
    )


def read_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return config_from_document(doc)


def load_experiment_ckg(config: ExperimentConfig) -> CharacterKnowledgeGraph:
    if config.ckg_path is not None:
        return read_ckg(config.ckg_path)
    assert config.synthetic is not None
    return generate_synthetic_ckg(config.synthetic)


def _eval_categories(config: ExperimentConfig, ckg: CharacterKnowledgeGraph) -> list[str]:
    if config.split is None or config.split.get("protocol", "seen-80-20") == "seen-80-20":
        return sorted(ckg.characters)
    try:
        spec = split_zero_shot(
            ckg,
            n_test=int(config.split["n_test"]),
            m=int(config.split.get("m", 0)),
            seed=int(config.split.get("seed", config.seed)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad split section: {exc}") from exc
    return sorted(spec.test_categories)


@dataclass(frozen=True)
class MetricsReport:
    strategy: str
    top_n: dict[int, float]
    cat_avg: float
    per_category: dict[str, dict]
    n_samples: int
    seed: int
    config_echo: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "top_n": {str(n): v for n, v in sorted(self.top_n.items())},
            "cat_avg": self.cat_avg,
            "per_category": self.per_category,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "config": self.config_echo,
        }


@dataclass(frozen=True)
class ComparisonReport:
    strategies: dict[str, MetricsReport]
    deltas: list[dict]
    n_samples: int
    seed: int
    config_echo: dict

    def to_json_dict(self) -> dict:
        return {
            "strategies": {k: v.to_json_dict() for k, v in self.strategies.items()},
            "deltas": self.deltas,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "config": self.config_echo,
        }


def _simulate_batch(
    ckg: CharacterKnowledgeGraph,
    categories: Sequence[str],
    config: ExperimentConfig,
) -> list:
    """All samples for the run, in deterministic (category, repeat) order."""
    root = Stream(config.seed)
    jobs = [
        (ci, k)
        for ci in range(len(categories))
        for k in range(config.samples_per_category)
    ]

    def simulate_one(job: tuple[int, int]):
        ci, k = job
        entry = ckg.characters[categories[ci]]
        return simulate_predictions(entry, ckg, config.noise, root.child(ci, k))

    threads = max(1, config.threads)
    if threads == 1:
        return [simulate_one(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(simulate_one, jobs, chunksize=64))


def _score(
    samples: Sequence,
    ckg: CharacterKnowledgeGraph,
    strategy: str,
    config: ExperimentConfig,
) -> tuple[list[RecognitionResult], MetricsReport]:
    results = [
        RecognitionResult.from_ranked(s.truth, recognize(s, ckg, strategy, config.reasoner))
        for s in samples
    ]
    per_category: dict[str, dict] = {}
    for r in results:
        row = per_category.setdefault(r.truth, {"n": 0, "hits": 0})
        row["n"] += 1
        row["hits"] += 1 if r.correct_at == 1 else 0
    table = {
        cat: {"n": row["n"], "top1": row["hits"] / row["n"]}
        for cat, row in sorted(per_category.items())
    }
    report = MetricsReport(
        strategy=strategy,
        top_n={n: top_n_accuracy(results, n) for n in TOP_NS},
        cat_avg=cat_avg(results),
        per_category=table,
        n_samples=len(results),
        seed=config.seed,
        config_echo=config.echo(),
    )
    return results, report


def run_experiment(config: ExperimentConfig) -> MetricsReport:
    """Simulate, recognize with the configured strategy, and score."""
    ckg = load_experiment_ckg(config)
    categories = _eval_categories(config, ckg)
    samples = _simulate_batch(ckg, categories, config)
    _, report = _score(samples, ckg, config.strategy, config)
    if config.output_dir is not None:
        write_reports(config.output_dir, config.basename, [report], deltas=None, config=config)
    return report


def paired_delta(
    a: Sequence[RecognitionResult], b: Sequence[RecognitionResult]
) -> tuple[float, float]:
    """Top-1 accuracy difference (a - b) and its paired standard error."""
    if len(a) != len(b):
        raise InvalidParamsError("paired result lists must have equal length")
    diffs = [
        (1 if ra.correct_at == 1 else 0) - (1 if rb.correct_at == 1 else 0)
        for ra, rb in zip(a, b)
    ]
    n = len(diffs)
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1) if n > 1 else 0.0
    return mean, math.sqrt(var / n)


def compare_strategies(config: ExperimentConfig) -> ComparisonReport:
    """Run every configured strategy on identical samples (paired)."""
    ckg = load_experiment_ckg(config)
    categories = _eval_categories(config, ckg)
    samples = _simulate_batch(ckg, categories, config)

    results: dict[str, list[RecognitionResult]] = {}
    reports: dict[str, MetricsReport] = {}
    for strategy in config.strategies:
        res, rep = _score(samples, ckg, strategy, config)
        results[strategy] = res
        reports[strategy] = rep

    deltas = []
    names = list(config.strategies)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            diff, se = paired_delta(results[a], results[b])
            deltas.append(
                {
                    "a": a,
                    "b": b,
                    "delta_top1": diff,
                    "paired_se": se,
                    # null when the paired variance vanishes (degenerate runs)
                    "z": diff / se if se > 0 else None,
                }
            )

    report = ComparisonReport(
        strategies=reports,
        deltas=deltas,
        n_samples=len(samples),
        seed=config.seed,
        config_echo=config.echo(),
    )
    if config.output_dir is not None:
        write_reports(
            config.output_dir,
            config.basename,
            list(reports.values()),
            deltas=deltas,
            config=config,
        )
    return report


def render_csv(reports: Sequence[MetricsReport]) -> str:
    """Fixed-column CSV, one row per strategy, LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        writer.writerow(
            [
                rep.strategy,
                f"{rep.top_n[1]:.6f}",
                f"{rep.top_n[3]:.6f}",
                f"{rep.top_n[5]:.6f}",
                f"{rep.cat_avg:.6f}",
                rep.n_samples,
                rep.seed,
            ]
        )
    return buf.getvalue()


def write_reports(
    out_dir: str | Path,
    basename: str,
    reports: Sequence[MetricsReport],
    deltas: list[dict] | None,
    config: ExperimentConfig,
) -> tuple[Path, Path]:
    """Write <basename>.csv and <basename>.json canonically; return paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{basename}.csv"
    json_path = out / f"{basename}.json"
    csv_path.write_text(render_csv(reports), encoding="utf-8", newline="\n")
    doc: dict = {
        "strategies": {rep.strategy: rep.to_json_dict() for rep in reports},
        "seed": config.seed,
        "config": config.echo(),
    }
    if deltas is not None:
        doc["deltas"] = deltas
    json_path.write_text(
        json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
        newline="\n",
    )
    return csv_path, json_path
