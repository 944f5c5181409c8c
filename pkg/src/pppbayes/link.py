"""Link functions mapping latent Gaussian values to intensities bounded below by kappa."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .grid import IntensityField, LatentField

# The exponential link is deliberately not offered: its divergences cannot
# be controlled by the uniform distance between latent paths.
LINK_KINDS = frozenset({"logistic_variant", "shifted_abs"})


@dataclass(frozen=True)
class LinkSpec:
    kind: str = "logistic_variant"
    kappa: float = 0.1
    g_star: float = 10.0

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise ValueError(f"unknown link kind {self.kind!r}; expected one of {sorted(LINK_KINDS)}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.kind == "logistic_variant" and not self.g_star > 0:
            raise ValueError(f"g_star must be positive, got {self.g_star}")

    @property
    def lipschitz_constant(self) -> float:
        if self.kind == "logistic_variant":
            return self.g_star / 4.0
        return 1.0

    @property
    def invertible(self) -> bool:
        return self.kind == "logistic_variant"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "logistic_variant":
            return self.kappa + self.g_star * expit(x)
        return self.kappa + np.abs(x)

    def inverse(self, y):
        if not self.invertible:
            raise ValueError(f"link {self.kind!r} is not invertible")
        y = np.asarray(y, dtype=float)
        return np.log(y - self.kappa) - np.log(self.kappa + self.g_star - y)


def apply_link(link: LinkSpec, w: LatentField) -> IntensityField:
    values = link(w.values)
    # A zero floor is allowed for practical fits; the field type needs a positive one.
    floor = link.kappa if link.kappa > 0 else float(values.min())
    return IntensityField(w.grid, values, floor)


def invert_link(link: LinkSpec, lam: IntensityField) -> LatentField:
    if not link.invertible:
        raise ValueError(f"link {link.kind!r} is not invertible")
    values = lam.values
    bad = np.flatnonzero((values <= link.kappa) | (values >= link.kappa + link.g_star))
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"intensity {values[i]!r} at node {i} lies outside the open link range "
            f"({link.kappa}, {link.kappa + link.g_star})"
        )
    return LatentField(lam.grid, link.inverse(values))
