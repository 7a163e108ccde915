"""Sensitivity of normalized mode fields to rounding-level changes of the response.

Compares the field change under random channel gauges with the change under
random relative perturbations of size eps applied to the assembled pencil,
and prints the eigenvalue condition factors |y^H B x| / (|x| |y|).
"""

from dataclasses import replace

import numpy as np
import scipy.linalg

from magneto_qed import modes
from magneto_qed.couplings import random_unitary
from magneto_qed.grid import SpectralGrid
from magneto_qed.media import BandRegion, MediumModel, OscillatorBand


def model(gauge=None):
    band = OscillatorBand(0, electric=(0.5, 1.0, 0.1), magnetic=(0.2, 1.0, 0.1), sign=1,
                          gauge=np.eye(3, dtype=complex) if gauge is None else gauge)
    return MediumModel((BandRegion("me1", (band,)),))


def field_change(a, b):
    return max(np.abs(x.coeffs - y.coeffs).max() / np.abs(y.coeffs).max() for x, y in zip(a.modes, b.modes))


if __name__ == "__main__":
    grid = SpectralGrid.line(2 * np.pi, 3)
    rng = np.random.default_rng(7)
    for w in (0.6, 0.8, 1.0, 1.2, 1.5):
        pair = modes.assemble(model(), grid, w)
        ref = modes.normalize_all(modes.solve(pair))
        gauge = max(field_change(modes.solve_modes(model(random_unitary(rng)), grid, w), ref) for _ in range(20))
        eps = 0.0
        for _ in range(20):
            jitter = lambda m: m * (1 + 2.2e-16 * rng.standard_normal(m.shape))
            noisy = replace(pair, a=jitter(pair.a), b=jitter(pair.b))
            eps = max(eps, field_change(modes.normalize_all(modes.solve(noisy)), ref))
        z, vl, vr = scipy.linalg.eig(pair.a, pair.b, left=True, right=True)
        fin = np.isfinite(z)
        s = [abs(vl[:, j].conj() @ pair.b @ vr[:, j]) / (np.linalg.norm(vl[:, j]) * np.linalg.norm(vr[:, j])) for j in np.nonzero(fin)[0]]
        print(f"w={w:4.2f}  Z={np.unique(np.round(z[fin].real, 6))}  gauge {gauge:.1e}  eps-perturbed {eps:.1e}  min|y^H B x| {min(s):.1e}")
