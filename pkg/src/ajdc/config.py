"""Run configuration shared by the pipeline and the command line."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Optional

from .ajd import SOLVERS
from .diagset import WEIGHTINGS
from .errors import ValidationError
from .spectral import WINDOWS


@dataclass
class RunConfig:
    epoch_length: int = 128
    overlap: float = 0.5
    window: str = "rectangular"
    f_min: Optional[float] = None
    f_max: Optional[float] = None
    intervals: Optional[int] = None
    condition_labels: Optional[list] = None
    average_conditions: bool = True
    n_components: Optional[int] = None
    solver: str = "nonorthogonal"
    weighting: str = "nondiag"
    cutoff: Optional[float] = None
    tolerance: float = 1e-9
    max_iterations: int = 200
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def band_for(self, grid) -> tuple[float, float]:
        f_min = grid.resolution if self.f_min is None else self.f_min
        f_max = grid.frequencies[-1] if self.f_max is None else self.f_max
        return f_min, f_max

    def validate(self, n_channels: Optional[int] = None, n_samples: Optional[int] = None,
                 sampling_rate: Optional[float] = None) -> "RunConfig":
        """Raise ``ValidationError`` on the first violated precondition."""
        L = self.epoch_length
        if not isinstance(L, int) or L < 2 or L % 2:
            raise ValidationError(f"--epoch-length must be an even integer >= 2, got {L}")
        if not 0 <= self.overlap <= 0.95:
            raise ValidationError(f"--overlap must lie in [0, 0.95], got {self.overlap}")
        if int(round(L * (1 - self.overlap))) < 1:
            raise ValidationError("--overlap too high: epoch stride rounds to 0")
        if self.window not in WINDOWS:
            raise ValidationError(f"--window must be one of {WINDOWS}")
        if self.solver not in SOLVERS:
            raise ValidationError(f"--solver must be one of {SOLVERS}")
        if self.weighting not in WEIGHTINGS:
            raise ValidationError(f"--weighting must be one of {WEIGHTINGS}")
        if self.f_min is not None and not self.f_min > 0:
            raise ValidationError("--band lower edge must be > 0 Hz (DC is always excluded)")
        if self.f_min is not None and self.f_max is not None and self.f_min > self.f_max:
            raise ValidationError("--band lower edge exceeds upper edge")
        if self.tolerance <= 0 or self.max_iterations < 1:
            raise ValidationError("tolerance must be > 0 and max_iterations >= 1")
        if self.intervals is not None and self.intervals < 1:
            raise ValidationError("--intervals must be >= 1")
        if self.condition_labels is not None:
            if self.intervals is not None and len(self.condition_labels) != self.intervals:
                raise ValidationError(
                    f"--conditions has {len(self.condition_labels)} labels for "
                    f"{self.intervals} intervals")
            if min(self.condition_labels) < 1:
                raise ValidationError("condition labels must be >= 1")
        if self.n_components is not None and self.n_components < 1:
            raise ValidationError("--components must be >= 1")
        if n_channels is not None:
            if self.n_components is not None and self.n_components > n_channels:
                raise ValidationError(
                    f"--components M={self.n_components} exceeds the N={n_channels} "
                    f"channels; need M <= N")
            if self.weighting == "nondiag" and n_channels < 2:
                raise ValidationError("non-diagonality weighting needs at least 2 channels")
        if n_samples is not None and n_samples < L:
            raise ValidationError(
                f"recording of {n_samples} samples is shorter than one epoch ({L})")
        if sampling_rate is not None:
            nyquist = sampling_rate / 2
            if self.f_min is not None and self.f_min > nyquist:
                raise ValidationError(f"--band lower edge above Nyquist ({nyquist} Hz)")
            if self.cutoff is not None and self.cutoff <= 0:
                raise ValidationError("--cutoff must be > 0 Hz")
        return self
