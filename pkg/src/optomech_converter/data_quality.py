import logging
from typing import Dict, Optional

import numpy as np

from .errors import GridError

logger = logging.getLogger(__name__)

# Normal-distribution scale for the median absolute deviation.
MAD_SCALE = 1.4826


class SpectrumQuality:
    """Checks a sampled spectrum before it is fitted."""

    def __init__(self, min_points: int = 8, gap_tolerance: float = 1.1):
        self.min_points = min_points
        self.gap_tolerance = gap_tolerance
        self.gaps = 0
        self.anomalies = 0
        self.noise_estimate: Optional[float] = None

    def check(self, deltas, values) -> Dict[str, float]:
        """Validate the grid and return quality statistics.

        Raises:
            GridError: too few points, mismatched columns, or a grid that is
                not strictly increasing
        """
        self.clear()
        grid = np.asarray(deltas, dtype=float)
        data = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != data.shape:
            raise GridError("spectrum needs matching one-dimensional delta and value columns")
        if grid.size < self.min_points:
            raise GridError(f"spectrum has {grid.size} points, at least {self.min_points} are required")
        steps = np.diff(grid)
        if not np.all(np.isfinite(grid)) or np.any(steps <= 0):
            raise GridError("spectrum grid must be finite and strictly increasing")

        step = float(np.median(steps))
        # Bins spaced wider than the typical step count as gaps
        self.gaps = int(np.count_nonzero(steps > self.gap_tolerance * step))
        # Noise spectral densities cannot be negative or non-finite
        self.anomalies = int(np.count_nonzero(~np.isfinite(data) | (data < 0)))
        if self.anomalies:
            logger.warning(f"Spectrum has {self.anomalies} non-finite or negative bins")
        if self.gaps:
            logger.info(f"Spectrum grid has {self.gaps} gaps wider than {self.gap_tolerance}x the median step")

        self.noise_estimate = self._estimate_noise(data[np.isfinite(data)])
        return self.get_stats(grid, step)

    def get_stats(self, grid: np.ndarray, step: float) -> Dict[str, float]:
        return {
            "points": int(grid.size),
            "span": float(grid[-1] - grid[0]),
            "step": step,
            "gaps": self.gaps,
            "anomalies": self.anomalies,
            "noise_estimate": self.noise_estimate,
        }

    @staticmethod
    def _estimate_noise(data: np.ndarray) -> float:
        """Per-bin noise from first differences, robust to a smooth underlying line."""
        if data.size < 3:
            return 0.0
        diffs = np.diff(data)
        mad = np.median(np.abs(diffs - np.median(diffs)))
        return float(MAD_SCALE * mad / np.sqrt(2.0))

    def clear(self):
        """Reset statistics from a previous check."""
        self.gaps = 0
        self.anomalies = 0
        self.noise_estimate = None
