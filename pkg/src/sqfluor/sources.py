"""Optical source models: classical coherent states and squeezed light.

CW squeezed light is parameterized by the normalized squeezing parameter
|beta_bar| and a Gaussian phase-matching profile of width sigma_c_bar; the
hyperbolic gain functions are

    s_J(w) = sinh(|beta_bar| r_J(w)),   c_J(w) = cosh(|beta_bar| r_J(w)),

with r_J(w) = exp(-(w - wbar_J)^2 / (2 sigma_c_bar^2)) peaking at one.  The
effective pair bandwidth is Omega_c = sqrt(pi) sigma_c_bar and the
entanglement time T_c = 2 pi / Omega_c.

Pulsed squeezed light uses the double-Gaussian joint spectral amplitude

    gamma(wI, wII) = (pi sigma_p sigma_c)^(-1/2)
                     * exp(-(wI + wII - wbar_p)^2 / (4 sigma_p^2))
                     * exp(-((wI - wbarI) - (wII - wbarII))^2 / (4 sigma_c^2)),

decomposed into Schmidt super-modes by SVD of the step-weighted grid matrix.
The global pump phase theta lives on the squeezing parameter, never in the
mode tables, so every observable is invariant under it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .constants import PI, TWO_PI
from .spectral import GaussianAmplitude, SpectralGrid, quad_converged

__all__ = [
    "ClassicalPulsed",
    "ClassicalCW",
    "SqueezedCW",
    "SqueezedPulsed",
    "SchmidtDecomposition",
    "gain_functions_cw",
    "photon_rate_cw",
    "jsa_eval",
    "marginal_sigma",
    "schmidt_decompose",
    "schmidt_decompose_analytic",
    "geometric_mode_ratio",
    "hermite_function_table",
    "default_jsa_grids",
    "photon_number_pulsed",
    "g2_cw",
    "G2PulsedKernels",
    "g2_pulsed_kernels",
    "export_jsi_csv",
    "export_schmidt_csv",
    "GridTooCoarseError",
]

JSA_GRID_POINTS = 512  # default discretization per axis
JSA_GRID_SPAN_SIGMAS = 8.0  # half-span in units of sigma_c
MODE_REFERENCE_FRACTION = 0.01  # threshold for picking a sign-reference point


class GridTooCoarseError(ValueError):
    """JSA grid cannot represent the requested decomposition fidelity."""


@dataclass(frozen=True)
class ClassicalPulsed:
    """Two coherent-state pulses with square-normalized Gaussian amplitudes."""

    amp_i: GaussianAmplitude
    amp_ii: GaussianAmplitude
    n_photons_i: float
    n_photons_ii: float

    def __post_init__(self):
        if self.n_photons_i < 0.0 or self.n_photons_ii < 0.0:
            raise ValueError("photon numbers must be nonnegative")


@dataclass(frozen=True)
class ClassicalCW:
    """Two CW coherent beams given by photon fluxes (photons / m^2 / s)."""

    flux_i: float
    flux_ii: float
    center_i: float
    center_ii: float

    def __post_init__(self):
        if self.flux_i < 0.0 or self.flux_ii < 0.0:
            raise ValueError("fluxes must be nonnegative")


@dataclass(frozen=True)
class SqueezedCW:
    """CW squeezed light: normalized gain |beta_bar|, Gaussian PMF width sigma_c_bar.

    phase_fn, when given, maps angular frequency (band I argument) to the JSA
    phase theta_I(w); default is the flat pump phase theta.
    """

    beta_bar: float
    sigma_c_bar: float
    center_i: float
    center_ii: float
    theta: float = 0.0
    phase_fn: Callable | None = None

    def __post_init__(self):
        if self.beta_bar < 0.0:
            raise ValueError("beta_bar is a magnitude and must be nonnegative")
        if not self.sigma_c_bar > 0.0:
            raise ValueError("sigma_c_bar must be positive")

    @property
    def pump_center(self) -> float:
        return self.center_i + self.center_ii

    @property
    def omega_c(self) -> float:
        """Effective pair bandwidth Omega_c (Omega_c^2 = pi sigma_c_bar^2)."""
        return np.sqrt(PI) * self.sigma_c_bar

    @property
    def t_c(self) -> float:
        """Entanglement (pair coherence) time."""
        return TWO_PI / self.omega_c


@dataclass(frozen=True)
class SqueezedPulsed:
    """Pulsed squeezed light with the double-Gaussian JSA (anti-correlated regime)."""

    beta: float
    sigma_p: float
    sigma_c: float
    center_i: float
    center_ii: float
    theta: float = 0.0

    def __post_init__(self):
        if self.beta < 0.0:
            raise ValueError("beta is a magnitude and must be nonnegative")
        if not self.sigma_p > 0.0:
            raise ValueError("sigma_p must be positive")
        if self.sigma_c < self.sigma_p:
            raise ValueError("anti-correlated regime requires sigma_c >= sigma_p")

    @property
    def pump_center(self) -> float:
        return self.center_i + self.center_ii


def _band_params(src: SqueezedCW, band: str):
    if band == "I":
        return src.center_i
    if band == "II":
        return src.center_ii
    raise ValueError(f"band must be 'I' or 'II', got {band!r}")


def gain_functions_cw(omega, src: SqueezedCW, band: str = "I"):
    """(s, c, theta) at omega for one frequency band.

    c^2 - s^2 = 1 pointwise; s peaks at the band center where r_J = 1.
    """
    center = _band_params(src, band)
    omega_arr = np.asarray(omega, dtype=float)
    if band == "II" and src.phase_fn is not None:
        # phi_II(w) = phi_I(wbar_p - w): evaluate the user phase on band I.
        theta = np.asarray(src.phase_fn(src.pump_center - omega_arr), dtype=float)
    elif src.phase_fn is not None:
        theta = np.asarray(src.phase_fn(omega_arr), dtype=float)
    else:
        theta = np.full_like(omega_arr, src.theta, dtype=float)
    r = np.exp(-((omega_arr - center) ** 2) / (2.0 * src.sigma_c_bar**2))
    arg = src.beta_bar * r
    return np.sinh(arg), np.cosh(arg), theta


def photon_rate_cw(
    src: SqueezedCW,
    band: str = "I",
    rel_tol: float = 1e-6,
    max_doublings: int = 6,
) -> float:
    """Photon rate N/T = Integral dw/2pi sinh^2(|beta_bar| r_J(w))."""
    if src.beta_bar == 0.0:
        return 0.0
    center = _band_params(src, band)
    grid = SpectralGrid(center, 9.0 * src.sigma_c_bar, 4001)

    def integrand(w):
        s, _, _ = gain_functions_cw(w, src, band)
        return s * s

    value, _ = quad_converged(integrand, grid, rel_tol, max_doublings)
    return float(value) / TWO_PI


def jsa_eval(omega_i, omega_ii, src: SqueezedPulsed):
    """Double-Gaussian JSA amplitude (global pump phase carried by beta, not here)."""
    x = np.asarray(omega_i, dtype=float) - src.center_i
    y = np.asarray(omega_ii, dtype=float) - src.center_ii
    norm = 1.0 / np.sqrt(PI * src.sigma_p * src.sigma_c)
    return norm * np.exp(-((x + y) ** 2) / (4.0 * src.sigma_p**2)) * np.exp(
        -((x - y) ** 2) / (4.0 * src.sigma_c**2)
    )


def marginal_sigma(src: SqueezedPulsed) -> float:
    """Single-photon marginal amplitude width of the double Gaussian.

    |gamma|^2 integrated over the partner frequency is Gaussian with intensity
    width such that the amplitude sigma is sqrt((sigma_p^2 + sigma_c^2)/2);
    equals sigma_c exactly in the separable case sigma_p = sigma_c.
    """
    return np.sqrt(0.5 * (src.sigma_p**2 + src.sigma_c**2))


def default_jsa_grids(
    src: SqueezedPulsed,
    n_points: int = JSA_GRID_POINTS,
    span_sigmas: float = JSA_GRID_SPAN_SIGMAS,
) -> tuple[SpectralGrid, SpectralGrid]:
    n = n_points if n_points % 2 == 1 else n_points + 1
    half = span_sigmas * src.sigma_c
    return (
        SpectralGrid(src.center_i, half, n),
        SpectralGrid(src.center_ii, half, n),
    )


@dataclass(frozen=True)
class SchmidtDecomposition:
    """Schmidt modes of a JSA on a grid, with the per-mode squeezing gains.

    Mode tables are continuum-normalized: sum f^2 * step = 1.  p sums to one
    over the full (untruncated) spectrum; `tail` is the truncated remainder.
    """

    p: np.ndarray
    f_i: np.ndarray
    f_ii: np.ndarray
    grid_i: SpectralGrid
    grid_ii: SpectralGrid
    beta_mag: float
    theta: float
    tail: float

    @property
    def n_modes(self) -> int:
        return len(self.p)

    @property
    def beta_n(self) -> np.ndarray:
        return self.beta_mag * np.sqrt(self.p)

    @property
    def s_n(self) -> np.ndarray:
        return np.sinh(self.beta_n)

    @property
    def c_n(self) -> np.ndarray:
        return np.cosh(self.beta_n)

    def with_beta(self, beta_mag: float, theta: float | None = None) -> "SchmidtDecomposition":
        """Same modes with a different squeezing strength (no new SVD)."""
        return replace(self, beta_mag=float(beta_mag), theta=self.theta if theta is None else theta)

    def truncated(self, n_keep: int) -> "SchmidtDecomposition":
        """Keep the first n_keep modes; the dropped weight moves to the tail."""
        n_keep = max(1, min(int(n_keep), self.n_modes))
        if n_keep == self.n_modes:
            return self
        dropped = float(np.sum(self.p[n_keep:]))
        return replace(
            self,
            p=self.p[:n_keep].copy(),
            f_i=self.f_i[:n_keep].copy(),
            f_ii=self.f_ii[:n_keep].copy(),
            tail=self.tail + dropped,
        )

    def weighted_mode_count(self, rel_tail: float = 1e-3) -> int:
        """Modes needed so the dropped sinh^2 photon weight is below rel_tail.

        The excitation sums weight pairs by the gains, not by p_n alone, so a
        high-gain evaluation can discard many low-p modes harmlessly.
        """
        weights = self.s_n**2 if self.beta_mag > 0.0 else self.p
        total = float(np.sum(weights))
        if total == 0.0:
            return self.n_modes
        cumulative = np.cumsum(weights) / total
        return int(np.searchsorted(cumulative, 1.0 - rel_tail)) + 1

    def modes_at(self, band: str, omega) -> np.ndarray:
        """Linear interpolation of all mode tables at `omega` (band 'I' or 'II')."""
        grid = self.grid_i if band == "I" else self.grid_ii
        table = self.f_i if band == "I" else self.f_ii
        pts = grid.points
        omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
        slack = max(1e-9 * (pts[-1] - pts[0]), 32.0 * np.finfo(float).eps * np.max(np.abs(pts)))
        if np.any(omega_arr < pts[0] - slack) or np.any(omega_arr > pts[-1] + slack):
            raise ValueError(f"evaluation outside the band-{band} mode grid")
        omega_arr = np.clip(omega_arr, pts[0], pts[-1])
        return np.vstack([np.interp(omega_arr, pts, row) for row in table])


def _fix_mode_signs(f_i: np.ndarray, f_ii: np.ndarray, grid_i: SpectralGrid) -> None:
    """Make each band-I mode real-nonnegative at (or just above) its center.

    Odd modes vanish at the exact center, so the reference is the first point
    at/above center where the mode reaches 1% of its peak.  The compensating
    sign goes on the band-II partner, keeping every f_In*f_IIn product fixed.
    """
    pts = grid_i.points
    center_idx = int(np.argmin(np.abs(pts - grid_i.center)))
    for n in range(f_i.shape[0]):
        row = f_i[n]
        threshold = MODE_REFERENCE_FRACTION * np.max(np.abs(row))
        idx = center_idx
        while idx < len(row) and abs(row[idx]) < threshold:
            idx += 1
        if idx == len(row):
            idx = int(np.argmax(np.abs(row)))
        if row[idx] < 0.0:
            f_i[n] = -row
            f_ii[n] = -f_ii[n]


def schmidt_decompose(
    src: SqueezedPulsed,
    grid_i: SpectralGrid | None = None,
    grid_ii: SpectralGrid | None = None,
    trunc_tol: float = 1e-10,
) -> SchmidtDecomposition:
    """SVD of the step-weighted JSA matrix -> orthonormal super-modes.

    Keeps modes until the cumulative Schmidt weight reaches 1 - trunc_tol
    (weights renormalized to the full discrete spectrum); raises
    GridTooCoarseError when the grid cannot support that fidelity.
    """
    if not 0.0 < trunc_tol < 1.0:
        raise ValueError("trunc_tol must be in (0, 1)")
    if grid_i is None or grid_ii is None:
        default_i, default_ii = default_jsa_grids(src)
        grid_i = grid_i or default_i
        grid_ii = grid_ii or default_ii
    for grid, center in ((grid_i, src.center_i), (grid_ii, src.center_ii)):
        if abs(grid.center - center) > 0.1 * src.sigma_c or grid.half_span < 6.0 * src.sigma_c:
            raise ValueError("JSA grids must cover at least +/-6 sigma_c about each band center")

    w_i = grid_i.points
    w_ii = grid_ii.points
    matrix = jsa_eval(w_i[:, None], w_ii[None, :], src) * np.sqrt(grid_i.step * grid_ii.step)
    norm = float(np.sum(matrix * matrix))
    if abs(norm - 1.0) > 1e-3:
        raise GridTooCoarseError(
            f"discrete JSA square-norm {norm:.6f} deviates from 1; widen or refine the grids"
        )

    u_mat, sv, vh_mat = np.linalg.svd(matrix, full_matrices=False)
    p_all = sv * sv
    p_all = p_all / np.sum(p_all)
    cumulative = np.cumsum(p_all)
    n_keep = int(np.searchsorted(cumulative, 1.0 - trunc_tol)) + 1
    n_keep = min(n_keep, len(p_all))
    if n_keep > 0.75 * len(p_all):
        raise GridTooCoarseError(
            f"{n_keep} of {len(p_all)} grid modes needed for tail {trunc_tol:g}; "
            "the grid cannot faithfully hold that many modes"
        )
    tail = float(1.0 - cumulative[n_keep - 1])

    f_i = (u_mat[:, :n_keep].T / np.sqrt(grid_i.step)).copy()
    f_ii = (vh_mat[:n_keep, :] / np.sqrt(grid_ii.step)).copy()
    _fix_mode_signs(f_i, f_ii, grid_i)

    return SchmidtDecomposition(
        p=p_all[:n_keep].copy(),
        f_i=f_i,
        f_ii=f_ii,
        grid_i=grid_i,
        grid_ii=grid_ii,
        beta_mag=src.beta,
        theta=src.theta,
        tail=tail,
    )


def hermite_function_table(n_modes: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite functions psi_0..psi_{n_modes-1} on x (unit weight).

    Uses the normalized three-term recurrence, stable to high order:
    psi_n = x sqrt(2/n) psi_{n-1} - sqrt((n-1)/n) psi_{n-2}.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    out = np.empty((n_modes, len(x)))
    out[0] = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if n_modes > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(2, n_modes):
        out[n] = x * np.sqrt(2.0 / n) * out[n - 1] - np.sqrt((n - 1.0) / n) * out[n - 2]
    return out


def geometric_mode_ratio(src: SqueezedPulsed) -> float:
    """mu = ((sigma_c - sigma_p)/(sigma_c + sigma_p))^2: p_n = (1 - mu) mu^n."""
    return ((src.sigma_c - src.sigma_p) / (src.sigma_c + src.sigma_p)) ** 2


def schmidt_decompose_analytic(
    src: SqueezedPulsed,
    trunc_tol: float = 1e-10,
    grid_i: SpectralGrid | None = None,
    grid_ii: SpectralGrid | None = None,
    max_modes: int = 2000,
) -> SchmidtDecomposition:
    """Closed-form decomposition of the double-Gaussian JSA.

    Mehler's expansion gives geometric weights p_n = (1-mu) mu^n with
    mu = ((sigma_c - sigma_p)/(sigma_c + sigma_p))^2 and Hermite-function
    modes of width sigma_s = sqrt(sigma_p sigma_c); the band-II partner of
    mode n is its mirror image times (-1)^n.  Same data layout and sign
    convention as the SVD route, so the two are interchangeable; this one
    stays exact at mode counts no affordable SVD grid can hold.
    """
    if not 0.0 < trunc_tol < 1.0:
        raise ValueError("trunc_tol must be in (0, 1)")
    mu = geometric_mode_ratio(src)
    sigma_s = np.sqrt(src.sigma_p * src.sigma_c)
    if mu == 0.0:
        n_keep = 1
    else:
        n_keep = min(int(np.ceil(np.log(trunc_tol) / np.log(mu))), max_modes)
    tail = 0.0 if mu == 0.0 else float(mu**n_keep)

    if grid_i is None or grid_ii is None:
        # Resolve the fastest Hermite oscillation of the retained modes.
        osc = np.pi * sigma_s / np.sqrt(2.0 * n_keep + 1.0)
        half = JSA_GRID_SPAN_SIGMAS * src.sigma_c
        n_points = int(np.ceil(2.0 * half / (osc / 6.0))) + 1
        n_points = max(n_points, 1001)
        n_points = n_points if n_points % 2 == 1 else n_points + 1
        grid_i = grid_i or SpectralGrid(src.center_i, half, n_points)
        grid_ii = grid_ii or SpectralGrid(src.center_ii, half, n_points)

    n = np.arange(n_keep)
    p = (1.0 - mu) * mu**n if mu > 0.0 else np.ones(1)
    f_i = hermite_function_table(n_keep, (grid_i.points - src.center_i) / sigma_s) / np.sqrt(sigma_s)
    f_ii = hermite_function_table(n_keep, (grid_ii.points - src.center_ii) / sigma_s) / np.sqrt(sigma_s)
    f_ii *= np.where(n % 2 == 0, 1.0, -1.0)[:, None]
    _fix_mode_signs(f_i, f_ii, grid_i)

    return SchmidtDecomposition(
        p=p,
        f_i=f_i,
        f_ii=f_ii,
        grid_i=grid_i,
        grid_ii=grid_ii,
        beta_mag=src.beta,
        theta=src.theta,
        tail=tail,
    )


def photon_number_pulsed(dec: SchmidtDecomposition) -> float:
    """Total photons per pulse per band: sum_n sinh^2(|beta| sqrt(p_n))."""
    if dec.beta_mag == 0.0:
        return 0.0
    return float(np.sum(dec.s_n**2))


def g2_cw(omega_i, omega_ii, omega_i_prime, omega_ii_prime, src: SqueezedCW):
    """Delta-limit CW correlation kernels at the given frequency arguments.

    Returns (coherent, incoherent): the coherent kernel is the factorized
    s c e^{i theta} product over unprimed/primed band-I arguments (meaningful
    on the energy shell wI + wII = wI' + wII' = pump center); the incoherent
    kernel is the diagonal photon-density product s_I^2(wI) s_II^2(wII).
    """
    s, c, theta = gain_functions_cw(omega_i, src, "I")
    s_p, c_p, theta_p = gain_functions_cw(omega_i_prime, src, "I")
    coherent = s * c * np.exp(1j * theta) * s_p * c_p * np.exp(-1j * theta_p)
    s_i, _, _ = gain_functions_cw(omega_i, src, "I")
    s_ii, _, _ = gain_functions_cw(omega_ii, src, "II")
    incoherent = s_i**2 * s_ii**2
    return coherent, incoherent


class G2PulsedKernels:
    """Pulsed correlation kernels assembled from a Schmidt decomposition.

    Evaluators take the sum frequency w = wI + wII and wI, mirroring the
    integrands of the excitation formulas; mode tables are interpolated
    linearly and evaluation outside the tables raises.
    """

    def __init__(self, dec: SchmidtDecomposition):
        self.dec = dec

    def coherent(self, omega, omega_i):
        f_ii = self.dec.modes_at("II", np.asarray(omega) - np.asarray(omega_i))
        f_i = self.dec.modes_at("I", omega_i)
        return np.squeeze(np.sum(self.dec.s_n[:, None] * self.dec.c_n[:, None] * f_ii * f_i, axis=0))

    def incoherent_family(self, omega, omega_i):
        """(n, m) matrix of f_IIn(w - wI) f_Im(wI) s_n s_m at scalar arguments."""
        f_ii = self.dec.modes_at("II", float(omega) - float(omega_i))[:, 0]
        f_i = self.dec.modes_at("I", float(omega_i))[:, 0]
        s = self.dec.s_n
        return np.outer(s * f_ii, s * f_i)

    def g1_value(self, band: str, omega):
        """Diagonal first-order correlation sum_n s_n^2 |f_n|^2."""
        f = self.dec.modes_at(band, omega)
        return np.squeeze(np.sum(self.dec.s_n[:, None] ** 2 * f * f, axis=0))

    def g2_coherent_value(self, omega_i, omega_ii):
        """|sum_n f_IIn(wII) f_In(wI) s_n c_n|^2 at equal primed/unprimed args."""
        f_ii = self.dec.modes_at("II", omega_ii)
        f_i = self.dec.modes_at("I", omega_i)
        amp = np.sum(self.dec.s_n[:, None] * self.dec.c_n[:, None] * f_ii * f_i, axis=0)
        return np.squeeze(np.abs(amp) ** 2)

    def g2_incoherent_value(self, omega_i, omega_ii):
        """G1_I(wI) G1_II(wII) at equal primed/unprimed args."""
        return self.g1_value("I", omega_i) * self.g1_value("II", omega_ii)


def g2_pulsed_kernels(dec: SchmidtDecomposition) -> G2PulsedKernels:
    return G2PulsedKernels(dec)


def export_jsi_csv(src: SqueezedPulsed, grid_i: SpectralGrid, grid_ii: SpectralGrid, path):
    """Write the joint spectral intensity on a grid: omega_I, omega_II, jsi."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["omega_I", "omega_II", "jsi"])
        for w_i in grid_i.points:
            amps = jsa_eval(w_i, grid_ii.points, src)
            for w_ii, amp in zip(grid_ii.points, amps):
                writer.writerow([repr(float(w_i)), repr(float(w_ii)), repr(float(amp * amp))])


def export_schmidt_csv(dec: SchmidtDecomposition, path):
    """Write the Schmidt spectrum: n, p_n."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["n", "p_n"])
        for n, p_n in enumerate(dec.p):
            writer.writerow([n, repr(float(p_n))])
