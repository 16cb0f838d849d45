"""Parameter sweeps over SNR, feedback count and estimator, with CSV output."""

import csv
import io
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from ._validation import check_count, check_index
from .channel_model import SystemConfig, draw_trials
from .estimators import EstimatorTag
from .metrics import MseEstimate, reduction_std_error, relative_reduction, squared_errors

CSV_HEADER = (
    "snr_db",
    "m",
    "estimator",
    "mse_mean",
    "mse_std_error",
    "rel_reduction_pct",
    "n_trials",
)

DEFAULT_SNR_GRID = tuple(float(s) for s in range(-40, 41, 5))
DEFAULT_TRIALS = 100_000
DEFAULT_SEED = 7

_TAG_ORDER = {tag: k for k, tag in enumerate(EstimatorTag)}


@dataclass(frozen=True)
class SweepSpec:
    snr_grid_db: tuple
    m_grid: tuple
    estimators: tuple
    n_trials: int
    master_seed: int
    config: SystemConfig
    user: int = 0

    def __post_init__(self):
        snr = tuple(float(s) for s in self.snr_grid_db)
        ms = tuple(check_count(m, "m") for m in self.m_grid)
        tags = tuple(EstimatorTag.parse(t) for t in self.estimators)
        if not snr:
            raise ValueError("snr grid is empty")
        if not ms:
            raise ValueError("m grid is empty")
        if not tags:
            raise ValueError("estimator set is empty")
        if not np.all(np.isfinite(snr)):
            raise ValueError("snr grid must be finite")
        too_big = [m for m in ms if m > self.config.n_antennas]
        if too_big:
            raise ValueError(f"m values {too_big} exceed n_antennas = {self.config.n_antennas}")
        for name, values in (("snr", snr), ("m", ms), ("estimator", tags)):
            if len(set(values)) != len(values):
                raise ValueError(f"duplicate entries in {name} grid")
        check_count(self.n_trials, "n_trials", minimum=1)
        check_count(self.master_seed, "master_seed")
        check_index(self.user, self.config.n_users)
        object.__setattr__(self, "snr_grid_db", snr)
        object.__setattr__(self, "m_grid", ms)
        object.__setattr__(self, "estimators", tags)


def default_spec(n_trials=DEFAULT_TRIALS, master_seed=DEFAULT_SEED):
    """N = K = 4, identity prior, -40..40 dB in 5 dB steps, m = 0..4, all estimators."""
    return SweepSpec(
        snr_grid_db=DEFAULT_SNR_GRID,
        m_grid=tuple(range(5)),
        estimators=tuple(EstimatorTag),
        n_trials=n_trials,
        master_seed=master_seed,
        config=SystemConfig.identity_prior(n_antennas=4, n_users=4),
    )


@dataclass(frozen=True)
class SweepCell:
    snr_db: float
    m: int
    estimator: EstimatorTag
    mse: MseEstimate
    rel_reduction_pct: Optional[float] = None
    rel_reduction_se: Optional[float] = None


@dataclass(frozen=True)
class SweepReport:
    cells: tuple
    metadata: dict = field(default_factory=dict)

    def cell(self, snr_db, m, estimator):
        tag = EstimatorTag.parse(estimator)
        for c in self.cells:
            if c.snr_db == float(snr_db) and c.m == m and c.estimator is tag:
                return c
        raise KeyError((snr_db, m, tag.value))


def run_sweep(spec: SweepSpec, n_workers=1) -> SweepReport:
    """Evaluate every (snr, m, estimator) cell on one shared set of draws.

    All cells see the same channel and noise realizations, which keeps
    comparisons across m (and across SNR) free of independent sampling noise.
    """
    started = time.perf_counter()
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    try:
        h, w = draw_trials(spec.config, spec.n_trials, spec.master_seed, spec.user, n_workers)
        cells = []
        for snr in spec.snr_grid_db:
            cfg = spec.config.with_snr(snr)
            for tag in spec.estimators:
                errors = {
                    m: squared_errors(tag, m, cfg, h, w, spec.user, n_workers)
                    for m in spec.m_grid
                }
                base = errors.get(0)
                base_mse = MseEstimate.from_samples(base) if base is not None else None
                for m, err in errors.items():
                    mse = MseEstimate.from_samples(err)
                    rel = rel_se = None
                    if base_mse is not None and base_mse.mean > 0:
                        rel = relative_reduction(base_mse, mse)
                        rel_se = reduction_std_error(base, err) if err.size > 1 else 0.0
                    cells.append(SweepCell(snr, m, tag, mse, rel, rel_se))
    except MemoryError as exc:
        raise RuntimeError(
            f"sweep ran out of memory at n_trials = {spec.n_trials}; no report produced"
        ) from exc
    cells.sort(key=lambda c: (c.snr_db, c.m, _TAG_ORDER[c.estimator]))
    metadata = {
        "master_seed": spec.master_seed,
        "config_digest": spec.config.digest(),
        "version": __version__,
        "n_trials": spec.n_trials,
        "user": spec.user,
        "snr_db": ",".join(_fmt(s) for s in spec.snr_grid_db),
        "m": ",".join(str(m) for m in spec.m_grid),
        "estimators": ",".join(t.value for t in spec.estimators),
        "started_utc": stamp,
        "wall_clock_s": f"{time.perf_counter() - started:.3f}",
    }
    return SweepReport(tuple(cells), metadata)


def _fmt(x):
    return f"{x:.9g}"


def report_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for c in report.cells:
        writer.writerow(
            (
                _fmt(c.snr_db),
                c.m,
                c.estimator.value,
                _fmt(c.mse.mean),
                _fmt(c.mse.std_error),
                "" if c.rel_reduction_pct is None else _fmt(c.rel_reduction_pct),
                c.mse.n_trials,
            )
        )
    return buf.getvalue()


def metadata_path(destination):
    destination = Path(destination)
    return destination.with_name(destination.name + ".meta")


def emit_report(report: SweepReport, destination):
    """Write the CSV table to ``destination`` and metadata to ``<destination>.meta``."""
    destination = Path(destination)
    sidecar = metadata_path(destination)
    lines = [f"{key} = {value}" for key, value in report.metadata.items()]
    try:
        destination.write_text(report_csv(report), encoding="utf-8", newline="")
        sidecar.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write sweep report to {destination}: {exc.strerror or exc}") from exc
    return destination, sidecar


def read_report_csv(path):
    """Parse an emitted CSV back into a list of dicts with typed values."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            rel = row["rel_reduction_pct"]
            rows.append(
                {
                    "snr_db": float(row["snr_db"]),
                    "m": int(row["m"]),
                    "estimator": EstimatorTag.parse(row["estimator"]),
                    "mse_mean": float(row["mse_mean"]),
                    "mse_std_error": float(row["mse_std_error"]),
                    "rel_reduction_pct": float(rel) if rel else None,
                    "n_trials": int(row["n_trials"]),
                }
            )
    return rows


# line-oriented ``key = value`` spec files ----------------------------------

_LIST_KEYS = {"snr_db", "m", "estimators"}
_KNOWN_KEYS = _LIST_KEYS | {
    "n_trials",
    "master_seed",
    "n_antennas",
    "n_users",
    "noise_power",
    "prior_variance",
    "user",
}


def parse_spec_text(text, source="<spec>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def split_list(value):
    return [item.strip() for item in str(value).split(",") if item.strip()]


def build_spec(values=None, base: SweepSpec = None) -> SweepSpec:
    """Apply string-valued ``values`` (file entries or flag overrides) on ``base``."""
    base = base or default_spec()
    values = dict(values or {})
    cfg = base.config
    n_antennas = int(values.get("n_antennas", cfg.n_antennas))
    n_users = int(values.get("n_users", cfg.n_users))
    noise_power = float(values.get("noise_power", cfg.noise_power))
    if "prior_variance" in values or (n_antennas, n_users) != (cfg.n_antennas, cfg.n_users):
        var = float(values.get("prior_variance", cfg.prior.flat[0]))
        prior = np.full((n_users, n_antennas), var)
    else:
        prior = cfg.prior
    config = SystemConfig(n_antennas, n_users, noise_power, noise_power, prior)
    fields_ = {"config": config}
    if "snr_db" in values:
        fields_["snr_grid_db"] = tuple(float(s) for s in split_list(values["snr_db"]))
    if "m" in values:
        fields_["m_grid"] = tuple(int(m) for m in split_list(values["m"]))
    elif n_antennas != cfg.n_antennas:
        fields_["m_grid"] = tuple(range(n_antennas + 1))
    if "estimators" in values:
        fields_["estimators"] = tuple(split_list(values["estimators"]))
    for key in ("n_trials", "master_seed", "user"):
        if key in values:
            fields_[key] = int(values[key])
    return replace(base, **fields_)


def load_spec(path, overrides=None) -> SweepSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read spec file {path}: {exc.strerror or exc}") from exc
    values = parse_spec_text(text, str(path))
    values.update(overrides or {})
    return build_spec(values)
