"""Daily indicator panels: ingestion, normalization and feature-group selection.

A frame holds a dense date x (region, feature) table of daily values with a
role attached to every channel: the per-region target prevalence, endogenous
secondary indicators, or exogenous channels whose future values are known at
forecast time (calendars, Ramadan flag, day of year).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError

logger = logging.getLogger(__name__)

FEATURE_GROUPS = ("FCS", "FCSplus", "climate", "economics", "all")

_GROUP_ALIASES = {"FCS+": "FCSplus", "fcs+": "FCSplus"}


class Role(str, Enum):
    TARGET = "target"
    ENDOGENOUS = "endogenous"
    KNOWN_FUTURE = "known_future"


@dataclass(frozen=True)
class SeriesKey:
    region_id: str
    feature_name: str


@dataclass(frozen=True)
class FeatureRole:
    role: Role = Role.ENDOGENOUS
    groups: frozenset = frozenset({"all"})
    no_smooth: bool = False


@dataclass
class PreprocessConfig:
    smoothing_window: int = 10
    interpolation_max_gap: int = 3
    scaling: str = "minmax"  # applied model-side on the training slice
    coverage_min_fraction: float = 0.5

    def __post_init__(self):
        if self.smoothing_window < 1:
            raise DataError("smoothing_window must be >= 1")
        if self.interpolation_max_gap < 0:
            raise DataError("interpolation_max_gap must be >= 0")
        if not 0 < self.coverage_min_fraction <= 1:
            raise DataError("coverage_min_fraction must be in (0, 1]")


@dataclass
class PreprocessReport:
    """Structured record of what preprocessing changed or refused to change."""

    dropped_regions: list = field(default_factory=list)  # (region, reason)
    interpolated_cells: dict = field(default_factory=dict)  # SeriesKey -> count
    guard_events: list = field(default_factory=list)

    @property
    def total_interpolated(self) -> int:
        return sum(self.interpolated_cells.values())

    def render(self) -> str:
        lines = ["# preprocessing report"]
        lines.append(f"interpolated_cells_total: {self.total_interpolated}")
        for key in sorted(self.interpolated_cells, key=lambda k: (k.region_id, k.feature_name)):
            n = self.interpolated_cells[key]
            lines.append(f"interpolated: region={key.region_id} feature={key.feature_name} cells={n}")
        for region, reason in sorted(self.dropped_regions):
            lines.append(f"dropped_region: {region} reason={reason}")
        for event in self.guard_events:
            lines.append(f"guard: {event}")
        return "\n".join(lines) + "\n"


class TimeSeriesFrame:
    """Dense daily panel with one column per (region, feature) channel.

    data: DataFrame with a daily DatetimeIndex and MultiIndex columns
    (region, feature); NaN marks missing cells. roles maps SeriesKey to
    FeatureRole. Frames are treated as immutable: operations return new ones.
    """

    def __init__(self, data: pd.DataFrame, roles: dict | None = None):
        if not isinstance(data.index, pd.DatetimeIndex):
            raise DataError("frame index must be a DatetimeIndex")
        if data.index.has_duplicates or not data.index.is_monotonic_increasing:
            raise DataError("frame dates must be strictly increasing")
        data = data.sort_index(axis=1)
        self.data = data.astype(float)
        self.roles = dict(roles or {})
        for col in self.data.columns:
            self.roles.setdefault(SeriesKey(*col), FeatureRole())

    # -- basic accessors -------------------------------------------------
    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.data.index

    @property
    def keys(self) -> list[SeriesKey]:
        return [SeriesKey(*col) for col in self.data.columns]

    @property
    def regions(self) -> list[str]:
        return sorted(self.data.columns.get_level_values(0).unique())

    @property
    def missing_mask(self) -> pd.DataFrame:
        return self.data.isna()

    def values(self, key: SeriesKey) -> pd.Series:
        return self.data[(key.region_id, key.feature_name)]

    def role(self, key: SeriesKey) -> FeatureRole:
        return self.roles[key]

    def keys_with_role(self, role: Role) -> list[SeriesKey]:
        return [k for k in self.keys if self.roles[k].role is role]

    def target_key(self, region: str) -> SeriesKey:
        hits = [k for k in self.keys_with_role(Role.TARGET) if k.region_id == region]
        if len(hits) != 1:
            raise DataError(f"region {region!r} has {len(hits)} target channels, expected exactly 1")
        return hits[0]

    def slice_dates(self, start=None, end=None) -> "TimeSeriesFrame":
        """Rows with start <= date < end (either bound optional)."""
        idx = self.data.index
        mask = np.ones(len(idx), dtype=bool)
        if start is not None:
            mask &= idx >= pd.Timestamp(start)
        if end is not None:
            mask &= idx < pd.Timestamp(end)
        return TimeSeriesFrame(self.data.loc[mask].copy(), self.roles)

    def equals(self, other: "TimeSeriesFrame") -> bool:
        return self.data.equals(other.data) and self.roles == other.roles

    # -- serialization ---------------------------------------------------
    def to_json_dict(self) -> dict:
        series = []
        for col in self.data.columns:
            key = SeriesKey(*col)
            role = self.roles[key]
            vals = [None if pd.isna(v) else float(v) for v in self.data[col].tolist()]
            series.append(
                {
                    "region": key.region_id,
                    "feature": key.feature_name,
                    "role": role.role.value,
                    "groups": sorted(role.groups),
                    "no_smooth": role.no_smooth,
                    "values": vals,
                }
            )
        return {
            "format": "esncast-frame/1",
            "dates": [d.strftime("%Y-%m-%d") for d in self.data.index],
            "series": series,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), sort_keys=True, indent=1))

    @classmethod
    def from_json_dict(cls, payload: dict) -> "TimeSeriesFrame":
        if payload.get("format") != "esncast-frame/1":
            raise DataError("not an esncast frame artifact")
        dates = pd.DatetimeIndex([pd.Timestamp(d) for d in payload["dates"]])
        cols, data, roles = [], {}, {}
        for entry in payload["series"]:
            key = SeriesKey(entry["region"], entry["feature"])
            col = (key.region_id, key.feature_name)
            cols.append(col)
            data[col] = [np.nan if v is None else float(v) for v in entry["values"]]
            roles[key] = FeatureRole(
                role=Role(entry["role"]),
                groups=frozenset(entry["groups"]),
                no_smooth=bool(entry["no_smooth"]),
            )
        df = pd.DataFrame(data, index=dates)
        df.columns = pd.MultiIndex.from_tuples(cols, names=["region", "feature"])
        return cls(df, roles)

    @classmethod
    def load(cls, path) -> "TimeSeriesFrame":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _normalize_groups(groups) -> frozenset:
    named = {_GROUP_ALIASES.get(g, g) for g in groups}
    unknown = named - set(FEATURE_GROUPS)
    if unknown:
        raise DataError(f"unknown feature groups {sorted(unknown)}; valid: {FEATURE_GROUPS}")
    return frozenset(named | {"all"})


def load_metadata(path) -> dict:
    """Read the per-feature metadata file: role, groups, smoothing exemption.

    Returns feature_name -> (FeatureRole, national flag).
    """
    raw = json.loads(Path(path).read_text())
    out = {}
    for feature, entry in raw.items():
        role = Role(entry.get("role", "endogenous"))
        groups = _normalize_groups(entry.get("groups", ["all"]))
        out[feature] = (
            FeatureRole(role=role, groups=groups, no_smooth=bool(entry.get("no_smooth", False))),
            bool(entry.get("national", False)),
        )
    return out


DEFAULT_SCHEMA = {"date": "date", "region": "region", "feature": "feature", "value": "value"}


def load_csv(path, schema: dict | None = None, metadata: dict | None = None) -> TimeSeriesFrame:
    """Ingest a long-format CSV (date, region, feature, value) into a frame.

    The frame covers every day from the earliest to the latest date seen;
    cells with no row are missing. metadata is the mapping returned by
    :func:`load_metadata`; features without an entry default to endogenous
    members of group "all".
    """
    colmap = dict(DEFAULT_SCHEMA)
    colmap.update(schema or {})
    try:
        raw = pd.read_csv(path, dtype=str)
    except FileNotFoundError:
        raise DataError(f"input file not found: {path}")
    missing_cols = [c for c in colmap.values() if c not in raw.columns]
    if missing_cols:
        raise DataError(f"CSV {path} lacks required columns {missing_cols}")

    # line numbers are 1-based including the header row
    lineno = raw.index.to_numpy() + 2
    dates = pd.to_datetime(raw[colmap["date"]], format="%Y-%m-%d", errors="coerce")
    bad = np.flatnonzero(dates.isna().to_numpy())
    if bad.size:
        raise DataError(f"unparseable date at line {lineno[bad[0]]}: {raw[colmap['date']].iloc[bad[0]]!r}")
    values = pd.to_numeric(raw[colmap["value"]], errors="coerce")
    bad = np.flatnonzero(values.isna().to_numpy() & raw[colmap["value"]].notna().to_numpy())
    if bad.size:
        raise DataError(f"unparseable value at line {lineno[bad[0]]}: {raw[colmap['value']].iloc[bad[0]]!r}")

    table = pd.DataFrame(
        {
            "date": dates,
            "region": raw[colmap["region"]].astype(str),
            "feature": raw[colmap["feature"]].astype(str),
            "value": values.astype(float),
            "line": lineno,
        }
    )
    dup = table.duplicated(subset=["date", "region", "feature"], keep=False)
    if dup.any():
        hit = table.loc[dup].sort_values("line").iloc[:2]
        lines = ", ".join(str(int(n)) for n in hit["line"])
        key = (hit.iloc[0]["date"].date(), hit.iloc[0]["region"], hit.iloc[0]["feature"])
        raise DataError(f"duplicate rows for (date, region, feature)={key} at lines {lines}")

    wide = table.pivot(index="date", columns=["region", "feature"], values="value")
    full_range = pd.date_range(wide.index.min(), wide.index.max(), freq="D")
    wide = wide.reindex(full_range)
    wide.columns = wide.columns.set_names(["region", "feature"])

    roles = {}
    national_features = set()
    for col in wide.columns:
        key = SeriesKey(*col)
        if metadata and key.feature_name in metadata:
            role, national = metadata[key.feature_name]
            roles[key] = role
            if national:
                national_features.add(key.feature_name)
        else:
            roles[key] = FeatureRole()

    frame = TimeSeriesFrame(wide, roles)
    if national_features:
        frame = _replicate_national(frame, national_features)
    return frame


def _replicate_national(frame: TimeSeriesFrame, national_features: set) -> TimeSeriesFrame:
    """Copy single-region national channels under every region in the frame."""
    regions = frame.regions
    data = frame.data.copy()
    roles = dict(frame.roles)
    for feature in sorted(national_features):
        carriers = [k for k in frame.keys if k.feature_name == feature]
        if len(carriers) != 1:
            continue  # already replicated upstream, or absent
        src = carriers[0]
        for region in regions:
            key = SeriesKey(region, feature)
            if key == src:
                continue
            data[(region, feature)] = data[(src.region_id, src.feature_name)]
            roles[key] = roles[src]
    return TimeSeriesFrame(data, roles)


def _fill_gaps(series: pd.Series, max_gap: int, step: bool) -> tuple[pd.Series, int]:
    """Fill interior NaN runs of length <= max_gap; returns (filled, cell count).

    step=True carries the previous value forward (binary channels); otherwise
    linear interpolation between the run's neighbors.
    """
    vals = series.to_numpy(copy=True)
    isna = np.isnan(vals)
    if not isna.any() or max_gap == 0:
        return series.copy(), 0
    filled = 0
    n = len(vals)
    first_valid = int(np.argmax(~isna)) if (~isna).any() else n
    last_valid = n - 1 - int(np.argmax((~isna)[::-1])) if (~isna).any() else -1
    i = first_valid
    while i <= last_valid:
        if not isna[i]:
            i += 1
            continue
        j = i
        while j <= last_valid and isna[j]:
            j += 1
        run = j - i  # interior run: vals[i-1] and vals[j] are valid
        if run <= max_gap:
            if step:
                vals[i:j] = vals[i - 1]
            else:
                span = j - (i - 1)
                slope = (vals[j] - vals[i - 1]) / span
                vals[i:j] = vals[i - 1] + slope * np.arange(1, run + 1)
            filled += run
        i = j
    return pd.Series(vals, index=series.index), filled


def _median_spacing_days(series: pd.Series) -> float:
    obs = series.dropna()
    if len(obs) < 2:
        return 1.0
    deltas = np.diff(obs.index.to_numpy()).astype("timedelta64[D]").astype(float)
    return float(np.median(deltas))


def resample_and_interpolate(
    frame: TimeSeriesFrame, cfg: PreprocessConfig, report: PreprocessReport | None = None
) -> TimeSeriesFrame:
    """Fill short interior gaps, upsample intermittent channels, drop thin regions.

    Channels observed at coarser-than-daily native spacing (dekadal, monthly)
    are linearly interpolated between consecutive observations regardless of
    the gap cap; daily channels only get runs <= interpolation_max_gap filled.
    Channels flagged no_smooth are step-filled to stay binary. Regions whose
    target coverage falls below coverage_min_fraction are removed and reported.
    """
    report = report if report is not None else PreprocessReport()
    data = frame.data.copy()
    for col in data.columns:
        key = SeriesKey(*col)
        role = frame.roles[key]
        spacing = _median_spacing_days(data[col])
        if role.no_smooth:
            max_gap = max(cfg.interpolation_max_gap, int(np.ceil(spacing)) + 1)
            filled, n = _fill_gaps(data[col], max_gap, step=True)
        elif spacing > 1.0:
            filled, n = _fill_gaps(data[col], len(data), step=False)
        else:
            filled, n = _fill_gaps(data[col], cfg.interpolation_max_gap, step=False)
        data[col] = filled
        if n:
            report.interpolated_cells[key] = report.interpolated_cells.get(key, 0) + n

    keep_regions = []
    out_roles = dict(frame.roles)
    for region in sorted(data.columns.get_level_values(0).unique()):
        targets = [
            k for k, r in frame.roles.items() if k.region_id == region and r.role is Role.TARGET
        ]
        if not targets:
            report.dropped_regions.append((region, "no target channel"))
            continue
        coverage = float(data[(region, targets[0].feature_name)].notna().mean())
        if coverage < cfg.coverage_min_fraction:
            report.dropped_regions.append((region, f"target coverage {coverage:.3f} < {cfg.coverage_min_fraction}"))
            continue
        keep_regions.append(region)

    dropped = set(data.columns.get_level_values(0).unique()) - set(keep_regions)
    if dropped:
        data = data.drop(columns=sorted(dropped), level=0)
        out_roles = {k: r for k, r in out_roles.items() if k.region_id in keep_regions}
    if not keep_regions:
        report.guard_events.append("all regions dropped during preprocessing")
    return TimeSeriesFrame(data, out_roles)


def smooth_trailing_mean(
    frame: TimeSeriesFrame, window: int, report: PreprocessReport | None = None
) -> TimeSeriesFrame:
    """Trailing moving average; the first window-1 points use an expanding mean.

    Channels flagged no_smooth (binary calendars, Ramadan) pass through.
    """
    if window < 1:
        raise DataError("smoothing window must be >= 1")
    data = frame.data.copy()
    for col in data.columns:
        key = SeriesKey(*col)
        if frame.roles[key].no_smooth:
            continue
        data[col] = data[col].rolling(window, min_periods=1).mean()
    return TimeSeriesFrame(data, frame.roles)


def preprocess(
    frame: TimeSeriesFrame, cfg: PreprocessConfig, report: PreprocessReport | None = None
) -> TimeSeriesFrame:
    """resample_and_interpolate followed by smooth_trailing_mean."""
    report = report if report is not None else PreprocessReport()
    out = resample_and_interpolate(frame, cfg, report)
    return smooth_trailing_mean(out, cfg.smoothing_window, report)


def select_feature_group(frame: TimeSeriesFrame, group: str) -> TimeSeriesFrame:
    """Sub-frame of channels in the group; targets and known-future channels always stay."""
    group = _GROUP_ALIASES.get(group, group)
    if group not in FEATURE_GROUPS:
        raise DataError(f"unknown feature group {group!r}; valid: {FEATURE_GROUPS}")
    keep = []
    for col in frame.data.columns:
        key = SeriesKey(*col)
        role = frame.roles[key]
        if role.role in (Role.TARGET, Role.KNOWN_FUTURE) or group in role.groups:
            keep.append(col)
    data = frame.data[keep].copy()
    roles = {SeriesKey(*col): frame.roles[SeriesKey(*col)] for col in keep}
    return TimeSeriesFrame(data, roles)
