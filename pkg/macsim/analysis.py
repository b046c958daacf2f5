"""
Post-processing of sweep CSVs: energy-ordering checks, plot-ready
summaries and trend statistics.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd
from scipy.stats import kendalltau

from .errors import ConfigError

logger = logging.getLogger(__name__)

ENERGY_ORDER = ('xmac', 'wisemac', 'bmac+', 'bmac', 'dmac', 'tmac', 'smac')


@dataclass(frozen=True)
class PairCheck:
    x: float
    lower: str
    upper: str
    lower_median: float
    upper_median: float
    gap: float
    spread: float

    @property
    def ordered(self) -> bool:
        return self.lower_median < self.upper_median

    @property
    def stable(self) -> bool:
        """The gap exceeds the larger across-seed IQR of the two protocols."""
        return self.ordered and self.gap > self.spread


@dataclass
class OrderingReport:
    metric: str
    expected: Sequence[str]
    checks: List[PairCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.ordered for check in self.checks)

    @property
    def violations(self) -> List[PairCheck]:
        return [check for check in self.checks if not check.ordered]

    def lines(self) -> List[str]:
        out = []
        for check in self.checks:
            mark = '✓' if check.ordered else '✗'
            note = '' if check.stable or not check.ordered else '  (gap within seed IQR)'
            out.append(f"{mark} x={check.x:g}: {check.lower} {check.lower_median:.3f} < "
                       f"{check.upper} {check.upper_median:.3f}{note}")
        return out


def read_results(path: Union[str, Path]) -> pd.DataFrame:
    """
    Raises:
        ConfigError: missing or unreadable CSV
    """
    try:
        return pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"cannot read results {path}: {e}") from e


def _require_columns(frame: pd.DataFrame, columns: Sequence[str]) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigError(f"unknown column(s): {', '.join(missing)}; available: {', '.join(frame.columns)}")


def _iqr(values: np.ndarray) -> float:
    q75, q25 = np.percentile(values, [75, 25])
    return float(q75 - q25)


def check_ordering(frame: pd.DataFrame, expected: Sequence[str] = ENERGY_ORDER,
                   metric: str = 'avg_node_energy_mj', x: str = 'interarrival_s') -> OrderingReport:
    """
    Compare per-protocol medians of `metric` against the chain
    expected[0] < expected[1] < ... separately at every x value.

    Raises:
        ConfigError: fewer than two protocols, or a protocol without rows
            at some x value
    """
    _require_columns(frame, ['protocol', x, metric])
    expected = [name.strip() for name in expected if name.strip()]
    if len(expected) < 2:
        raise ConfigError("an ordering needs at least two protocols")
    report = OrderingReport(metric, expected)
    for x_value in sorted(frame[x].unique()):
        at_x = frame[frame[x] == x_value]
        groups = {}
        for name in expected:
            values = at_x.loc[at_x['protocol'] == name, metric].to_numpy(dtype=float)
            if values.size == 0:
                raise ConfigError(f"no rows for protocol {name!r} at {x}={x_value:g}")
            groups[name] = values
        for lower, upper in zip(expected, expected[1:]):
            lo, hi = groups[lower], groups[upper]
            lo_med, hi_med = float(np.median(lo)), float(np.median(hi))
            report.checks.append(PairCheck(
                x=float(x_value), lower=lower, upper=upper,
                lower_median=lo_med, upper_median=hi_med,
                gap=hi_med - lo_med, spread=max(_iqr(lo), _iqr(hi)),
            ))
    logger.info("ordering check on %s: %d pairs, %d violated",
                metric, len(report.checks), len(report.violations))
    return report


def emit_plot_data(frame: pd.DataFrame, x: str, y: str, group: str = 'protocol') -> pd.DataFrame:
    """
    Long-format summary: one row per (group, x) with median, min and max
    of y over seeds.

    Raises:
        ConfigError: unknown column
    """
    _require_columns(frame, [group, x, y])
    summary = (frame.groupby([group, x], sort=True)[y]
               .agg(['median', 'min', 'max'])
               .reset_index())
    summary.columns = ['group', 'x', 'median', 'min', 'max']
    return summary


def kendall_trend(frame: pd.DataFrame, x: str, y: str) -> float:
    """Kendall tau between x and the per-x median of y; NaN with fewer than two x values."""
    _require_columns(frame, [x, y])
    medians = frame.groupby(x, sort=True)[y].median()
    if len(medians) < 2:
        return float('nan')
    tau, _ = kendalltau(medians.index.to_numpy(dtype=float), medians.to_numpy(dtype=float))
    return float(tau)
