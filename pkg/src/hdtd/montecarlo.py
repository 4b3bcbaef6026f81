"""Monte Carlo estimation of empirical size and power over a design grid."""

from __future__ import annotations

import csv
import io
import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
import yaml

from .errors import DegenerateSample, InvalidConfig, NonpositiveScale
from .hypothesis_tests import NullKind, NullSpec, run_test
from .simulation import CovConfig, CovKind, InnovationLaw, ModelSpec, PreparedModel

__all__ = [
    "ROW_CONFIGS",
    "SCENARIOS",
    "Cell",
    "CellResult",
    "GridBlock",
    "ExperimentConfig",
    "cell_seed",
    "run_cell",
    "run_grid",
    "load_config",
    "Summary",
    "summarize",
    "CSV_COLUMNS",
]

ROW_CONFIGS = ("identity", "diag8", "cs", "tridiag")
SCENARIOS = ("gaussian", "gamma")
TESTS = ("sphericity", "identity")
CSV_COLUMNS = (
    "test",
    "scenario",
    "row_config",
    "N",
    "r",
    "c",
    "rho",
    "alpha",
    "replicates",
    "rejections",
    "rate",
    "mc_se",
    "degenerate_count",
    "wall_ms",
)
FAST_REPLICATES = 200


@dataclass(frozen=True, order=True)
class Cell:
    """One design point. Field order is the lexicographic order of a grid."""

    test: str
    scenario: str
    row_config: str
    n: int
    c: int
    rho: float
    r: int
    alpha: float = 0.05

    def __post_init__(self) -> None:
        if self.test not in TESTS:
            raise InvalidConfig(f"test must be one of {TESTS}, got {self.test!r}")
        if self.scenario not in SCENARIOS:
            raise InvalidConfig(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.row_config not in ROW_CONFIGS:
            raise InvalidConfig(f"row_config must be one of {ROW_CONFIGS}, got {self.row_config!r}")
        if self.n < 4:
            raise InvalidConfig(f"every cell needs N >= 4, got {self.n}")
        if self.r < 1 or self.c < 1:
            raise InvalidConfig("r and c must be positive")
        if not abs(self.rho) < 1.0:
            raise InvalidConfig(f"ar1 needs |rho| < 1, got {self.rho}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfig(f"alpha must lie in (0, 1), got {self.alpha}")

    def model(self, seed: int) -> ModelSpec:
        return ModelSpec(
            n=self.n,
            row_cov=CovConfig(CovKind(self.row_config), self.r),
            col_cov=CovConfig(CovKind.AR1, self.c, (self.rho,)),
            law=InnovationLaw.parse(self.scenario),
            seed=seed,
        )

    def null(self) -> NullSpec:
        return NullSpec(kind=NullKind(self.test), alpha=self.alpha)


@dataclass(frozen=True)
class CellResult:
    cell: Cell
    replicates: int
    rejections: int
    degenerate_count: int = 0
    wall_time: float = 0.0

    @property
    def rate(self) -> float:
        return self.rejections / self.replicates

    @property
    def mc_standard_error(self) -> float:
        p = self.rate
        return float(np.sqrt(p * (1.0 - p) / self.replicates))

    @property
    def flagged(self) -> bool:
        return self.degenerate_count > 0

    def row(self) -> dict[str, Any]:
        c = self.cell
        return {
            "test": c.test,
            "scenario": c.scenario,
            "row_config": c.row_config,
            "N": c.n,
            "r": c.r,
            "c": c.c,
            "rho": c.rho,
            "alpha": c.alpha,
            "replicates": self.replicates,
            "rejections": self.rejections,
            "rate": f"{self.rate:.6f}",
            "mc_se": f"{self.mc_standard_error:.6f}",
            "degenerate_count": self.degenerate_count,
            "wall_ms": int(round(self.wall_time * 1000)),
        }


def _count(model: PreparedModel, null: NullSpec, reps: range) -> tuple[int, int]:
    rejected = degenerate = 0
    for k in reps:
        try:
            if run_test(model.draw(k), null).reject:
                rejected += 1
        except (DegenerateSample, NonpositiveScale):
            degenerate += 1
    return rejected, degenerate


def _chunks(n: int, parts: int) -> list[range]:
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [range(a, b) for a, b in zip(edges[:-1], edges[1:])]


def run_cell(cell: Cell, replicates: int = 1000, seed: int = 0, alpha: Optional[float] = None, threads: int = 1) -> CellResult:
    """Empirical rejection rate of one design point.

    Replicate k is drawn from the stream keyed by (seed, k), so the result does
    not depend on ``threads``. Degenerate replicates count as non-rejections and
    are reported in ``degenerate_count``.
    """
    if replicates < 1:
        raise InvalidConfig("replicates must be >= 1")
    if alpha is not None and alpha != cell.alpha:
        cell = Cell(**{**cell.__dict__, "alpha": alpha})
    model = PreparedModel(cell.model(seed))
    null = cell.null()
    # factorise once before fanning out
    model.row_root, model.col_root
    start = time.perf_counter()
    ranges = _chunks(replicates, threads)
    if len(ranges) == 1:
        counts = [_count(model, null, ranges[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            counts = list(pool.map(lambda rg: _count(model, null, rg), ranges))
    rejected = sum(c[0] for c in counts)
    degenerate = sum(c[1] for c in counts)
    return CellResult(cell, replicates, rejected, degenerate, time.perf_counter() - start)


@dataclass(frozen=True)
class GridBlock:
    """A Cartesian product of design coordinates."""

    n: tuple[int, ...]
    r: tuple[int, ...]
    c: tuple[int, ...]
    rho: tuple[float, ...]
    scenarios: tuple[str, ...] = ("gaussian",)
    row_configs: tuple[str, ...] = ("identity",)

    def cells(self, test: str, alpha: float) -> Iterable[Cell]:
        for sc, rc, n, c, rho, r in itertools.product(self.scenarios, self.row_configs, self.n, self.c, self.rho, self.r):
            yield Cell(test, sc, rc, n, c, rho, r, alpha)


@dataclass(frozen=True)
class ExperimentConfig:
    grids: tuple[GridBlock, ...]
    test: str = "sphericity"
    alpha: float = 0.05
    replicates: int = 1000
    seed: int = 0
    threads: int = 1
    name: str = ""

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise InvalidConfig("replicates must be >= 1")
        if self.threads < 1:
            raise InvalidConfig("threads must be >= 1")
        if not self.cells():
            raise InvalidConfig("experiment grid is empty")

    def cells(self) -> list[Cell]:
        """Distinct cells in lexicographic order of their coordinates."""
        found = {cell for g in self.grids for cell in g.cells(self.test, self.alpha)}
        return sorted(found)


def cell_seed(seed: int, index: int) -> int:
    """64-bit seed for the index-th cell of a grid."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def run_grid(
    cfg: ExperimentConfig,
    progress: Optional[Callable[[CellResult], None]] = None,
) -> list[CellResult]:
    results = []
    for idx, cell in enumerate(cfg.cells()):
        res = run_cell(cell, cfg.replicates, cell_seed(cfg.seed, idx), threads=cfg.threads)
        if progress is not None:
            progress(res)
        results.append(res)
    return results


# ---------------------------------------------------------------------------
# configuration files


def _tuple(value: Any, kind: Callable[[Any], Any], key: str) -> tuple:
    if value is None:
        raise InvalidConfig(f"grid is missing {key!r}")
    items = value if isinstance(value, (list, tuple)) else [value]
    try:
        return tuple(kind(v) for v in items)
    except (TypeError, ValueError):
        raise InvalidConfig(f"bad values for {key!r}: {value!r}") from None


def _block(raw: Mapping[str, Any]) -> GridBlock:
    if not isinstance(raw, Mapping):
        raise InvalidConfig("each grid entry must be a mapping")
    unknown = set(raw) - {"n", "r", "c", "rho", "scenarios", "row_configs"}
    if unknown:
        raise InvalidConfig(f"unknown grid keys: {sorted(unknown)}")
    return GridBlock(
        n=_tuple(raw.get("n"), int, "n"),
        r=_tuple(raw.get("r"), int, "r"),
        c=_tuple(raw.get("c"), int, "c"),
        rho=_tuple(raw.get("rho"), float, "rho"),
        scenarios=_tuple(raw.get("scenarios", ["gaussian"]), str, "scenarios"),
        row_configs=_tuple(raw.get("row_configs", ["identity"]), str, "row_configs"),
    )


def config_from_mapping(raw: Mapping[str, Any], **overrides: Any) -> ExperimentConfig:
    if not isinstance(raw, Mapping):
        raise InvalidConfig("configuration must be a mapping at top level")
    exp = raw.get("experiment", {}) or {}
    grids = raw.get("grids", raw.get("grid"))
    if isinstance(grids, Mapping):
        grids = [grids]
    if not grids:
        raise InvalidConfig("configuration has no grid")
    unknown = set(exp) - {"name", "test", "alpha", "replicates", "seed", "threads"}
    if unknown:
        raise InvalidConfig(f"unknown experiment keys: {sorted(unknown)}")
    fields_: dict[str, Any] = {
        "name": str(exp.get("name", "")),
        "test": str(exp.get("test", "sphericity")),
        "alpha": float(exp.get("alpha", 0.05)),
        "replicates": int(exp.get("replicates", 1000)),
        "seed": int(exp.get("seed", 0)),
        "threads": int(exp.get("threads", 1)),
    }
    fields_.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(grids=tuple(_block(g) for g in grids), **fields_)


BUNDLED_DIR = Path(__file__).parent / "configs"


def load_config(path: str | Path, **overrides: Any) -> ExperimentConfig:
    """Read an experiment from YAML. A bare name resolves to a bundled config."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        p = BUNDLED_DIR / f"{path}.yaml"
    try:
        raw = yaml.safe_load(p.read_text())
    except FileNotFoundError:
        raise InvalidConfig(f"configuration file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"cannot parse {path}: {exc}") from None
    try:
        return config_from_mapping(raw or {}, **overrides)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidConfig):
            raise
        raise InvalidConfig(str(exc)) from None


# ---------------------------------------------------------------------------
# reporting


@dataclass
class Summary:
    results: Sequence[CellResult] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for res in self.results:
            writer.writerow(res.row())
        return buf.getvalue()

    def pivot(self) -> list[tuple[tuple[str, str], list[tuple[float, int]], list[tuple[str, int, int, list[Optional[CellResult]]]]]]:
        """Group into table blocks: rows (scenario, N, c), columns (rho, r)."""
        blocks = {}
        for res in self.results:
            key = (res.cell.test, res.cell.row_config)
            blocks.setdefault(key, []).append(res)
        out = []
        for key in sorted(blocks):
            items = blocks[key]
            cols = sorted({(x.cell.rho, x.cell.r) for x in items})
            rows = sorted({(SCENARIOS.index(x.cell.scenario), x.cell.n, x.cell.c) for x in items})
            lookup = {(x.cell.scenario, x.cell.n, x.cell.c, x.cell.rho, x.cell.r): x for x in items}
            body = []
            for sc_idx, n, c in rows:
                sc = SCENARIOS[sc_idx]
                body.append((sc, n, c, [lookup.get((sc, n, c, rho, r)) for rho, r in cols]))
            out.append((key, cols, body))
        return out

    def to_text(self) -> str:
        lines = []
        header_fixed = f"{'scenario':<9} {'N':>4} {'c':>5}"
        if not self.results:
            return header_fixed + "\n"
        for (test, row_config), cols, body in self.pivot():
            lines.append(f"{test} test, row covariance {row_config} (rate with MC standard error)")
            heads = [f"rho={rho:g} r={r}" for rho, r in cols]
            width = max(15, *(len(h) for h in heads))
            lines.append(header_fixed + "".join(f" {h:>{width}}" for h in heads))
            for sc, n, c, cells in body:
                txt = []
                for res in cells:
                    if res is None:
                        txt.append(f" {'-':>{width}}")
                    else:
                        flag = "*" if res.flagged else ""
                        txt.append(f" {f'{res.rate:.3f} ({res.mc_standard_error:.3f}){flag}':>{width}}")
                lines.append(f"{sc:<9} {n:>4} {c:>5}" + "".join(txt))
            lines.append("")
        if any(r.flagged for r in self.results):
            lines.append("* cell contains degenerate replicates")
        return "\n".join(lines).rstrip("\n") + "\n"


def summarize(results: Sequence[CellResult]) -> Summary:
    return Summary(list(results))
