"""Monte Carlo electron trajectories in a resist stack on a substrate.

Single elastic scattering with the screened Rutherford cross-section and
continuous slowing down after the Joy-Luo form of the Bethe law. Electrons
enter at the origin along +z (depth). Energy lost inside scored (resist)
layers is binned by radial distance from the beam axis.

Electrons are processed in fixed-size chunks, each with its own random
substream spawned from the seed, so the result does not depend on how many
workers share the chunks.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy.constants import Avogadro
from scipy.optimize import least_squares

from junctionfab.errors import FitError, SimulationError
from junctionfab.features.litho_dose import PsfParams

log = logging.getLogger(__name__)

CUTOFF_ENERGY = 0.5  # keV
CHUNK_SIZE = 2000
HIST_R_MIN = 1.0e-3  # µm
HIST_R_MAX = 50.0  # µm
HIST_BINS = 200
_MAX_ITERATIONS = 1_000_000


class MaterialLayer(BaseModel):
    """One layer of the stack; ``thickness=None`` marks the semi-infinite substrate."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "layer"
    atomic_number: float = Field(gt=0)
    atomic_weight: float = Field(gt=0)  # g/mol
    density: float = Field(gt=0)  # g/cm³
    thickness: float | None = Field(default=None, gt=0)  # nm
    scored: bool = False

    @property
    def ionization_potential(self) -> float:
        """Mean ionisation potential J in keV."""
        z = self.atomic_number
        return (9.76 * z + 58.5 / z ** 0.19) * 1.0e-3


class BeamConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    energy: float = Field(default=50.0, gt=1.0)  # keV
    electron_count: int = Field(default=100_000, gt=0)
    rng_seed: int = Field(default=0, ge=0, lt=2 ** 64)


# materials; resists as PMMA-like mean atom
RESIST = dict(atomic_number=3.6, atomic_weight=6.67, density=1.19)
SILICON = MaterialLayer(name="Si", atomic_number=14, atomic_weight=28.09, density=2.33)
GERMANIUM = MaterialLayer(name="Ge", atomic_number=32, atomic_weight=72.63, density=5.32)


def resist_stack(top_nm: float = 100.0, copolymer_nm: float = 500.0,
                 substrate: MaterialLayer = SILICON) -> list[MaterialLayer]:
    """Bilayer resist on a substrate, both resist layers scored."""
    return [
        MaterialLayer(name="top resist", thickness=top_nm, scored=True, **RESIST),
        MaterialLayer(name="copolymer", thickness=copolymer_nm, scored=True, **RESIST),
        substrate.model_copy(update={"thickness": None, "scored": False}),
    ]


STACK_PRESETS = {
    "si": lambda: resist_stack(),
    "ge": lambda: resist_stack(substrate=GERMANIUM),
}


@dataclass(frozen=True)
class RadialEnergyHistogram:
    """Deposited energy density in the scored layers by radius.

    ``bin_edges`` are µm; the first bin also collects everything inside
    ``bin_edges[0]`` and is treated as a disc. Densities are keV/µm² per
    electron.
    """
    bin_edges: NDArray[np.float64]
    deposited_energy_density: NDArray[np.float64]
    events: NDArray[np.int64] = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    deposited_by_layer: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    escaped_energy: float = 0.0
    electron_count: int = 0
    beam_energy: float = 0.0

    @property
    def bin_areas(self) -> NDArray[np.float64]:
        inner = self.bin_edges[:-1].copy()
        inner[0] = 0.0
        return np.pi * (self.bin_edges[1:] ** 2 - inner ** 2)

    @property
    def bin_energy(self) -> NDArray[np.float64]:
        """keV per electron in each bin."""
        return self.deposited_energy_density * self.bin_areas

    def energy_balance(self) -> float:
        """Relative mismatch between injected and deposited-plus-escaped energy."""
        injected = self.beam_energy * self.electron_count
        accounted = float(np.sum(self.deposited_by_layer)) + self.escaped_energy
        return abs(injected - accounted) / injected

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "r_lo_um": self.bin_edges[:-1],
            "r_hi_um": self.bin_edges[1:],
            "energy_density_kev_um2": self.deposited_energy_density,
            "events": self.events if self.events.size else np.zeros(len(self.bin_edges) - 1, dtype=np.int64),
        })

    def write_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.9g")


def default_bin_edges() -> NDArray[np.float64]:
    return np.logspace(math.log10(HIST_R_MIN), math.log10(HIST_R_MAX), HIST_BINS + 1)


@dataclass
class _Tally:
    energy: NDArray[np.float64]
    events: NDArray[np.int64]
    by_layer: NDArray[np.float64]
    escaped: float = 0.0


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _run_chunk(stack: Sequence[MaterialLayer], energy: float, count: int, seed: int, chunk: int,
               edges_nm: NDArray[np.float64]) -> _Tally:
    rng = _chunk_rng(seed, chunk)
    n_layers = len(stack)
    nbins = len(edges_nm) - 1
    z_arr = np.array([m.atomic_number for m in stack])
    a_arr = np.array([m.atomic_weight for m in stack])
    rho_arr = np.array([m.density for m in stack])
    j_arr = np.array([m.ionization_potential for m in stack])
    scored = np.array([m.scored for m in stack])
    tops = np.zeros(n_layers)
    bots = np.full(n_layers, np.inf)
    depth = 0.0
    for i, m in enumerate(stack):
        tops[i] = depth
        if m.thickness is not None:
            depth += m.thickness
            bots[i] = depth

    tally = _Tally(np.zeros(nbins), np.zeros(nbins, dtype=np.int64), np.zeros(n_layers))

    x = np.zeros(count)
    y = np.zeros(count)
    z = np.zeros(count)
    cx = np.zeros(count)
    cy = np.zeros(count)
    cz = np.ones(count)
    e = np.full(count, energy)
    layer = np.zeros(count, dtype=np.int64)

    def score(loss: NDArray[np.float64], px: NDArray[np.float64], py: NDArray[np.float64],
              lay: NDArray[np.int64]) -> None:
        tally.by_layer += np.bincount(lay, weights=loss, minlength=n_layers)
        keep = scored[lay]
        if not np.any(keep):
            return
        r = np.hypot(px[keep], py[keep])
        idx = np.searchsorted(edges_nm, r, side="right") - 1
        idx = np.maximum(idx, 0)
        inside = idx < nbins
        tally.energy += np.bincount(idx[inside], weights=loss[keep][inside], minlength=nbins)
        tally.events += np.bincount(idx[inside], minlength=nbins)

    for _ in range(_MAX_ITERATIONS):
        if e.size == 0:
            return tally
        zl = z_arr[layer]
        al = a_arr[layer]
        rho = rho_arr[layer]
        u = rng.random((3, e.size))

        # screened Rutherford elastic mean free path (nm)
        scr = 3.4e-3 * zl ** 0.67 / e
        sigma = (5.21e-7 * zl ** 2 / e ** 2 * 4.0 * np.pi / (scr * (1.0 + scr))
                 * ((e + 511.0) / (e + 1022.0)) ** 2)
        mfp = al / (Avogadro * rho * 1.0e-21 * sigma)
        step = -mfp * np.log1p(-u[0])

        with np.errstate(divide="ignore", invalid="ignore"):
            to_bottom = np.where(cz > 0, (bots[layer] - z) / cz, np.inf)
            to_top = np.where(cz < 0, (tops[layer] - z) / cz, np.inf)
        boundary = np.minimum(to_bottom, to_top)
        crossing = step >= boundary
        step = np.where(crossing, boundary, step)

        # Bethe stopping power, keV/nm
        stopping = 7.85e-3 * rho * zl / (al * e) * np.log(1.166 * (e / j_arr[layer] + 0.85))
        loss = np.minimum(stopping * step, e)
        half = 0.5 * step
        score(loss, x + cx * half, y + cy * half, layer)
        x = x + cx * step
        y = y + cy * step
        z = z + cz * step
        e = e - loss

        # move crossers into the neighbouring layer without scattering
        going_down = crossing & (cz > 0)
        going_up = crossing & (cz < 0)
        z = np.where(going_down, bots[layer], np.where(going_up, tops[layer], z))
        layer = layer + going_down.astype(np.int64) - going_up.astype(np.int64)

        escaped = layer < 0
        if np.any(escaped):
            tally.escaped += float(np.sum(e[escaped]))
        layer = np.maximum(layer, 0)

        scatter = ~crossing
        cos_t = 1.0 - 2.0 * scr * u[1] / (1.0 + scr - u[1])
        cos_t = np.clip(cos_t, -1.0, 1.0)
        sin_t = np.sqrt(1.0 - cos_t ** 2)
        phi = 2.0 * np.pi * u[2]
        cos_p, sin_p = np.cos(phi), np.sin(phi)
        norm = np.sqrt(np.maximum(1.0 - cz ** 2, 0.0))
        polar = norm < 1.0e-10
        with np.errstate(divide="ignore", invalid="ignore"):
            ncx = np.where(polar, sin_t * cos_p,
                           sin_t * (cx * cz * cos_p - cy * sin_p) / norm + cx * cos_t)
            ncy = np.where(polar, sin_t * sin_p,
                           sin_t * (cy * cz * cos_p + cx * sin_p) / norm + cy * cos_t)
            ncz = np.where(polar, np.sign(cz) * cos_t, -sin_t * cos_p * norm + cz * cos_t)
        length = np.sqrt(ncx ** 2 + ncy ** 2 + ncz ** 2)
        cx = np.where(scatter, ncx / length, cx)
        cy = np.where(scatter, ncy / length, cy)
        cz = np.where(scatter, ncz / length, cz)

        stopped = (e < CUTOFF_ENERGY) & ~escaped
        if np.any(stopped):
            score(e[stopped], x[stopped], y[stopped], layer[stopped])

        alive = ~(stopped | escaped)
        if not np.all(alive):
            x, y, z, cx, cy, cz, e, layer = (
                a[alive] for a in (x, y, z, cx, cy, cz, e, layer))
    raise SimulationError("electron tracking did not terminate")


def simulate_psf(stack: Sequence[MaterialLayer], beam: BeamConfig, workers: int = 1,
                 bin_edges: NDArray[np.float64] | None = None) -> RadialEnergyHistogram:
    """Radial deposited-energy profile of a pencil beam; deterministic per seed."""
    if not stack:
        raise SimulationError("material stack is empty")
    if stack[-1].thickness is not None:
        raise SimulationError("the last layer must be a semi-infinite substrate")
    if any(m.thickness is None for m in stack[:-1]):
        raise SimulationError("only the last layer may be semi-infinite")
    if beam.electron_count < 1:
        raise SimulationError("electron_count must be positive")
    edges = default_bin_edges() if bin_edges is None else np.asarray(bin_edges, dtype=float)
    edges_nm = edges * 1000.0

    chunks = [(i, min(CHUNK_SIZE, beam.electron_count - i * CHUNK_SIZE))
              for i in range(math.ceil(beam.electron_count / CHUNK_SIZE))]
    log.info("tracking %d electrons at %.1f keV in %d chunks on %d workers",
             beam.electron_count, beam.energy, len(chunks), workers)

    def job(item: tuple[int, int]) -> _Tally:
        return _run_chunk(stack, beam.energy, item[1], beam.rng_seed, item[0], edges_nm)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tallies = list(pool.map(job, chunks))
    else:
        tallies = [job(c) for c in chunks]

    # merge in chunk order so floating-point sums are reproducible
    nbins = len(edges) - 1
    energy = np.zeros(nbins)
    events = np.zeros(nbins, dtype=np.int64)
    by_layer = np.zeros(len(stack))
    escaped = 0.0
    for t in tallies:
        energy += t.energy
        events += t.events
        by_layer += t.by_layer
        escaped += t.escaped

    inner = edges[:-1].copy()
    inner[0] = 0.0
    areas = np.pi * (edges[1:] ** 2 - inner ** 2)
    return RadialEnergyHistogram(
        bin_edges=edges,
        deposited_energy_density=energy / areas / beam.electron_count,
        events=events,
        deposited_by_layer=by_layer,
        escaped_energy=escaped,
        electron_count=beam.electron_count,
        beam_energy=beam.energy,
    )


def double_gaussian_bin_energy(edges: NDArray[np.float64], alpha: float, beta: float, eta: float,
                               total: float = 1.0) -> NDArray[np.float64]:
    """Energy falling in each radial bin for the normalized double-Gaussian profile."""
    inner = edges[:-1].copy()
    inner[0] = 0.0
    outer = edges[1:]

    def ring(rng: float) -> NDArray[np.float64]:
        return np.exp(-(inner / rng) ** 2) - np.exp(-(outer / rng) ** 2)

    return total * (ring(alpha) + eta * ring(beta)) / (1.0 + eta)


def synthetic_histogram(psf: PsfParams, total: float = 1.0,
                        bin_edges: NDArray[np.float64] | None = None) -> RadialEnergyHistogram:
    """Histogram drawn exactly from a double-Gaussian profile."""
    edges = default_bin_edges() if bin_edges is None else np.asarray(bin_edges, dtype=float)
    energy = double_gaussian_bin_energy(edges, psf.alpha_fwd, psf.beta_back, psf.eta, total)
    inner = edges[:-1].copy()
    inner[0] = 0.0
    areas = np.pi * (edges[1:] ** 2 - inner ** 2)
    return RadialEnergyHistogram(bin_edges=edges, deposited_energy_density=energy / areas)


def fit_double_gaussian(hist: RadialEnergyHistogram) -> PsfParams:
    """Weighted least squares of the bin-integrated model in log space."""
    energy = hist.bin_energy
    edges = hist.bin_edges
    positive = energy > 0
    if np.count_nonzero(positive) < 5:
        raise FitError("histogram has fewer than 5 populated bins")
    total = float(np.sum(energy))
    if np.max(energy) >= (1.0 - 1e-9) * total:
        raise FitError("all energy in a single bin; nothing to fit")
    if hist.events.size and np.any(hist.events[positive] > 0):
        weights = np.sqrt(np.maximum(hist.events[positive], 1).astype(float))
    else:
        weights = np.ones(np.count_nonzero(positive))
    log_data = np.log(energy[positive])

    def residuals(p: NDArray[np.float64]) -> NDArray[np.float64]:
        k, la, lb, le = np.exp(p)
        model = double_gaussian_bin_energy(edges, la, lb, le, k)[positive]
        return weights * (np.log(np.maximum(model, 1e-300)) - log_data)

    # start alpha at the radius holding a quarter of the energy, beta near the far tail
    cumulative = np.cumsum(energy) / total
    r_near = float(edges[1:][np.searchsorted(cumulative, 0.25)])
    r_far = float(edges[1:][min(np.searchsorted(cumulative, 0.95), len(edges) - 2)])
    start = np.log([total, max(r_near, edges[1]), max(r_far, 2 * r_near), 0.5])
    try:
        result = least_squares(residuals, start, method="trf", x_scale="jac", max_nfev=5000)
    except ValueError as e:
        raise FitError(f"double-Gaussian fit failed: {e}") from e
    if not result.success:
        raise FitError(f"double-Gaussian fit did not converge: {result.message}")
    _, alpha, beta, eta = (float(v) for v in np.exp(result.x))
    if beta < alpha:
        alpha, beta, eta = beta, alpha, 1.0 / eta
    if math.isclose(alpha, beta, rel_tol=1e-6):
        raise FitError("fit collapsed to a single Gaussian")
    return PsfParams(alpha_fwd=alpha, beta_back=beta, eta=eta)
