"""Excitation probabilities and rates, fluorescence, energy ledger, validity.

Measure bookkeeping (the single likeliest source of silent factor errors):
the pulsed formulas carry one dbar-omega = domega/sqrt(2pi) in the inner
frequency integral, so inner integrals below divide by sqrt(2pi) exactly
once; the CW rate formulas are written with plain domega/2pi and are used
verbatim.  Outer integrals are plain domega.

    p_cl_pulse   = eta (N_I/A)(N_II/A) Int L(w) |Int G_ba phi_I phi_II dbar|^2 dw
    r_cl_cw      = F_I F_II eta L(wI+wII) |G_ba(wI)|^2
    r_sq_cw,c    = eta L(wp) |Int G_ba e^{i theta} s_I c_I dw/2pi|^2 / A^2
    r_sq_cw,ic   = eta IntInt L(w) |G_ba s_II(w - wI) s_I(wI)|^2 dw dwI/(2pi)^2 / A^2
    p_sq_pulse,c = eta Int L(w) |sum_n Int G_ba f_IIn f_In dbar s_n c_n|^2 dw / A^2
    p_sq_pulse,ic= eta Int L(w) sum_nm |Int G_ba f_IIn f_Im dbar s_n s_m|^2 dw / A^2

The two-scale integrals route through `peaked.quad_kernel_smooth`; the pulsed
engine samples the outer frequency dependence on a lattice aligned with its
inner grid and certifies the sampling by halving the stride until the final
integrals settle.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .constants import C_LIGHT, EPS0, HBAR, TWO_PI
from .geometry import EffectiveArea
from .peaked import (
    DEFAULT_NUMERICS,
    NumericsOptions,
    abs2_green_kernel,
    green_kernel,
    lorentzian_kernel,
    quad_kernel_smooth,
)
from .sources import (
    ClassicalCW,
    ClassicalPulsed,
    SchmidtDecomposition,
    SqueezedCW,
    SqueezedPulsed,
    gain_functions_cw,
    photon_number_pulsed,
    photon_rate_cw,
)
from .spectral import GaussianAmplitude, SpectralGrid, gaussian_amp, green
from .system import CrossSectionPrefactor, DipoleCoupling, FourLevelSystem, cross_section

__all__ = [
    "VALIDITY_THRESHOLD",
    "ExcitationOutcome",
    "FluorescenceResult",
    "EnergyLedger",
    "ValidityReport",
    "RegimeViolationError",
    "p_classical_pulsed",
    "rate_classical_cw",
    "rate_squeezed_cw",
    "rate_squeezed_cw_broadband",
    "p_squeezed_pulsed",
    "PulsedExcitationEngine",
    "fluorescence",
    "energy_ledger",
    "population_integrals_from_probability",
    "max_intermediate_population",
    "matched_classical_cw",
    "matched_classical_pulsed",
    "one_photon_coupling",
]

VALIDITY_THRESHOLD = 0.1
SQRT_2PI = np.sqrt(2.0 * np.pi)
SPAN_SIGMAS_CW = 9.0


def _simpson_vector(n_points: int, step: float) -> np.ndarray:
    """Composite Simpson quadrature weights including the step factor."""
    w = np.ones(n_points)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    return w * (step / 3.0)


def lorentzian_sample_weights(
    pts: np.ndarray, step: float, center: float, fwhm: float, window: float
) -> np.ndarray:
    """Weights lam with Int L(w) Q(w) dw ~= lam . Q for Q sampled on `pts`.

    Simpson-times-L when the samples resolve the Lorentzian; when its core is
    narrower than the sampling, the core mass is replaced by the analytic
    Gaussian-window moment and Q(center) enters through a cubic interpolation
    stencil, keeping the functional linear in the samples.
    """
    l_vals = (fwhm / TWO_PI) / ((center - pts) ** 2 + 0.25 * fwhm**2)
    lam = _simpson_vector(len(pts), step) * l_vals
    core_inside = pts[0] + 2.0 * step < center < pts[-1] - 2.0 * step
    if not (core_inside and fwhm < 4.0 * step and len(pts) >= 7):
        return lam
    window = max(window, 4.0 * step)
    kernel = lorentzian_kernel(center, fwhm)
    m0, _ = kernel.gaussian_moments(window)
    g_w = np.exp(-((pts - center) ** 2) / (2.0 * window**2))
    s0 = np.sum(lam * g_w)
    j = int(np.searchsorted(pts, center)) - 1
    j = min(max(j, 1), len(pts) - 3)
    t = (center - pts[j]) / step
    stencil = np.array([
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -t * (t + 1.0) * (t - 2.0) / 2.0,
        t * (t + 1.0) * (t - 1.0) / 6.0,
    ])
    lam = lam.copy()
    lam[j - 1 : j + 3] += (float(np.real(m0)) - s0) * stencil
    return lam


class RegimeViolationError(ValueError):
    """A closed-form limit was requested outside its regime of validity."""


_UNIT_ETA = CrossSectionPrefactor(1.0)


@dataclass(frozen=True)
class ValidityReport:
    """Maximum second-order intermediate-state population and the 0.1-rule flag."""

    max_population: float
    passes: bool

    @classmethod
    def from_population(cls, population: float) -> "ValidityReport":
        return cls(max_population=population, passes=population < VALIDITY_THRESHOLD)


@dataclass(frozen=True)
class ExcitationOutcome:
    """Coherent/incoherent/total excitation, per atom.

    `kind` is "probability" (pulsed) or "rate" (CW, per second); classical
    regimes report incoherent = 0 by convention so one shape serves all.
    """

    coherent: float
    incoherent: float
    regime: str  # {cw, pulsed} x {classical, squeezed}
    kind: str
    validity: ValidityReport | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.coherent < 0.0 or self.incoherent < 0.0:
            raise ValueError("excitation contributions must be nonnegative")

    @property
    def total(self) -> float:
        return self.coherent + self.incoherent


@dataclass(frozen=True)
class FluorescenceResult:
    """Fluorescence on d->a: excitation times the two branching ratios."""

    per_atom: float
    per_atom_coherent: float
    per_atom_incoherent: float
    total: float
    branching_cd_over_c: float
    branching_da_r_over_d: float
    n_atoms: float
    kind: str


@dataclass(frozen=True)
class EnergyLedger:
    """Scattered/absorbed energy per transition (J); extinction is their sum."""

    scattered: Mapping[str, float]
    absorbed: Mapping[str, float]
    extinction: float

    @classmethod
    def build(cls, scattered: Mapping[str, float], absorbed: Mapping[str, float]):
        ext = sum(scattered.values()) + sum(absorbed.values())
        return cls(scattered=dict(scattered), absorbed=dict(absorbed), extinction=ext)

    @property
    def total_scattered(self) -> float:
        return sum(self.scattered.values())

    @property
    def total_absorbed(self) -> float:
        return sum(self.absorbed.values())


def one_photon_coupling(omega: float, mu_sq: float) -> float:
    """Single-photon coupling omega |e.mu|^2 / (2 eps0 c hbar), units m^2/s."""
    return omega * mu_sq / (2.0 * EPS0 * C_LIGHT * HBAR)


def _a_eff_value(a_eff) -> float:
    if isinstance(a_eff, EffectiveArea):
        return a_eff.a_eff
    return float(a_eff)


# ---------------------------------------------------------------------------
# classical light
# ---------------------------------------------------------------------------


def rate_classical_cw(
    src: ClassicalCW,
    sys: FourLevelSystem,
    eta: CrossSectionPrefactor,
    coupling: DipoleCoupling | None = None,
) -> ExcitationOutcome:
    """Closed-form CW rate F_I F_II sigma(wI, wII); no quadrature involved."""
    rate = float(src.flux_i * src.flux_ii * cross_section(src.center_i, src.center_ii, sys, eta))
    validity = None
    if coupling is not None:
        pop = max_intermediate_population(src, sys, coupling, a_eff=None)
        validity = ValidityReport.from_population(pop)
    return ExcitationOutcome(rate, 0.0, "cw_classical", "rate", validity)


def _single_pair_decomposition(src: ClassicalPulsed) -> SchmidtDecomposition:
    """Package the two pulse amplitudes as a one-mode decomposition.

    The classical probability integral has exactly the shape of a single
    (n = m = 0) Schmidt term, so the pulsed engine computes it verbatim.
    """

    def table(amp: GaussianAmplitude):
        n = 257
        grid = SpectralGrid(amp.center, 9.0 * amp.width, n)
        return grid, gaussian_amp(grid.points, amp)[None, :]

    grid_i, f_i = table(src.amp_i)
    grid_ii, f_ii = table(src.amp_ii)
    return SchmidtDecomposition(
        p=np.ones(1), f_i=f_i, f_ii=f_ii, grid_i=grid_i, grid_ii=grid_ii,
        beta_mag=0.0, theta=0.0, tail=0.0,
    )


def p_classical_pulsed(
    src: ClassicalPulsed,
    sys: FourLevelSystem,
    eta: CrossSectionPrefactor,
    a_eff,
    coupling: DipoleCoupling | None = None,
    opts: NumericsOptions = DEFAULT_NUMERICS,
) -> ExcitationOutcome:
    """Per-atom two-photon excitation probability for two classical pulses."""
    area = _a_eff_value(a_eff)
    validity = None
    if coupling is not None:
        pop = max_intermediate_population(src, sys, coupling, area, opts=opts)
        validity = ValidityReport.from_population(pop)
    if src.n_photons_i == 0.0 or src.n_photons_ii == 0.0:
        return ExcitationOutcome(0.0, 0.0, "pulsed_classical", "probability", validity)

    engine = PulsedExcitationEngine(
        _single_pair_decomposition(src), sys, eta, a_eff,
        PulsedEngineOptions(quad=opts),
    )
    ladder = engine._stride_ladder(engine.sigma_like / engine.opts.incoherent_samples_per_sigma)
    value, rel = engine._converge_levels(
        ladder, lambda stride: float(engine._incoherent_level(stride)[0, 0])
    )
    prob = eta.eta * (src.n_photons_i / area) * (src.n_photons_ii / area) * value
    return ExcitationOutcome(
        prob, 0.0, "pulsed_classical", "probability", validity,
        diagnostics={"outer_sampling_rel_err": rel},
    )


# ---------------------------------------------------------------------------
# squeezed light, CW
# ---------------------------------------------------------------------------


def _cw_gain_scale(src: SqueezedCW) -> float:
    """Sharpest feature of the gain functions: the peak narrows as sqrt(gain)."""
    return src.sigma_c_bar / np.sqrt(1.0 + 2.0 * src.beta_bar)


def rate_squeezed_cw(
    src: SqueezedCW,
    sys: FourLevelSystem,
    eta: CrossSectionPrefactor,
    a_eff,
    coupling: DipoleCoupling | None = None,
    opts: NumericsOptions = DEFAULT_NUMERICS,
) -> ExcitationOutcome:
    """Coherent + incoherent CW squeezed excitation rates (converged quadrature)."""
    area = _a_eff_value(a_eff)
    validity = None
    if coupling is not None:
        pop = max_intermediate_population(src, sys, coupling, area, opts=opts)
        validity = ValidityReport.from_population(pop)
    if src.beta_bar == 0.0:
        return ExcitationOutcome(0.0, 0.0, "cw_squeezed", "rate", validity)

    g_ba = green_kernel(sys.omega_ba, sys.gamma_b)
    scale = _cw_gain_scale(src)

    def coherent_smooth(w):
        s, c, theta = gain_functions_cw(w, src, "I")
        return s * c * np.exp(1j * theta)

    coh_integral = quad_kernel_smooth(
        g_ba, coherent_smooth, smooth_center=src.center_i,
        smooth_width=src.sigma_c_bar, smooth_scale=scale, opts=opts,
    )
    lineshape = sys.lineshape_ca()
    l_at_pump = float(
        (lineshape.fwhm / TWO_PI)
        / ((lineshape.center - src.pump_center) ** 2 + 0.25 * lineshape.fwhm**2)
    )
    coherent = eta.eta * l_at_pump * abs(coh_integral / TWO_PI) ** 2 / area**2

    incoh_value, incoh_rel = _cw_incoherent_integral(src, sys, scale, opts)
    incoherent = eta.eta * incoh_value / (TWO_PI**2 * area**2)
    return ExcitationOutcome(
        coherent, incoherent, "cw_squeezed", "rate", validity,
        diagnostics={"incoherent_sampling_rel_err": incoh_rel},
    )


def _cw_incoherent_integral(
    src: SqueezedCW, sys: FourLevelSystem, scale: float, opts: NumericsOptions
) -> float:
    """IntInt L(w) |G_ba(wI)|^2 s_II^2(w - wI) s_I^2(wI) dw dwI (plain measure).

    The inner pass J(wI) = Int L(w) s_II^2(w - wI) dw is a correlation of the
    fixed photon-density shape with L; on a shared uniform lattice it is one
    strided matrix-vector product against Lorentzian sample weights.  The
    outer pass integrates |G|^2 s_I^2 J with the usual kernel machinery.
    The result is certified by halving the lattice step once.
    """

    def evaluate(points_per_scale: float) -> float:
        h = scale / points_per_scale
        half_u = SPAN_SIGMAS_CW * src.sigma_c_bar
        n_i = 2 * int(np.ceil(half_u / h)) + 1
        w_i_pts = src.center_i + h * (np.arange(n_i) - (n_i - 1) // 2)

        # omega lattice covers (band-II support shifted by every wI) and L core.
        lo = w_i_pts[0] + src.center_ii - half_u
        hi = w_i_pts[-1] + src.center_ii + half_u
        if lo < sys.omega_ca < hi:
            lo = min(lo, sys.omega_ca - 30.0 * sys.gamma_c)
            hi = max(hi, sys.omega_ca + 30.0 * sys.gamma_c)
        n_w = int(np.ceil((hi - lo) / h)) + 1
        n_w = n_w if n_w % 2 == 1 else n_w + 1
        w_pts = lo + h * np.arange(n_w)
        lam = lorentzian_sample_weights(w_pts, h, sys.omega_ca, sys.gamma_c, 0.5 * scale)

        # u[m] = s_II^2 at (w_k - wI_j) = u_axis[m], m = k - j + n_i - 1.
        u_axis = (w_pts[0] - w_i_pts[-1]) + h * np.arange(n_w + n_i - 1)
        s_u, _, _ = gain_functions_cw(u_axis, src, "II")
        u_tab = s_u * s_u
        stride_elem = u_tab.strides[0]
        u_view = np.lib.stride_tricks.as_strided(
            u_tab[n_i - 1 :], shape=(n_i, n_w), strides=(-stride_elem, stride_elem),
            writeable=False,
        )
        j_vals = u_view @ lam

        s_i, _, _ = gain_functions_cw(w_i_pts, src, "I")
        outer_samples = s_i * s_i * j_vals
        abs2 = abs2_green_kernel(sys.omega_ba, sys.gamma_b)

        def smooth(w):
            return np.interp(np.asarray(w, dtype=float), w_i_pts, outer_samples,
                             left=0.0, right=0.0)

        value = quad_kernel_smooth(
            abs2, smooth, smooth_center=src.center_i,
            smooth_width=src.sigma_c_bar, smooth_scale=scale, opts=opts,
        )
        return float(np.real(value))

    coarse = evaluate(12.0)
    fine = evaluate(24.0)
    rel = abs(fine - coarse) / max(abs(fine), 1e-300)
    return fine, rel


def rate_squeezed_cw_broadband(
    src: SqueezedCW,
    sys: FourLevelSystem,
    eta: CrossSectionPrefactor,
    a_eff,
) -> ExcitationOutcome:
    """Broadband closed forms; guarded to sigma_c_bar >= 10 Gamma_b.

    coherent   -> (eta/Gamma_c) s_I^2(w_ba) c_I^2(w_ba) / (2 pi A^2)
    incoherent -> (eta/Gamma_b) s_I^4(w_ba) / (2 pi A^2)
    """
    if src.sigma_c_bar < 10.0 * sys.gamma_b:
        raise RegimeViolationError(
            "broadband closed form requires sigma_c_bar >= 10 Gamma_b "
            f"(got ratio {src.sigma_c_bar / sys.gamma_b:.3g})"
        )
    area = _a_eff_value(a_eff)
    s, c, _ = gain_functions_cw(sys.omega_ba, src, "I")
    s, c = float(s), float(c)
    coherent = eta.eta * s * s * c * c / (TWO_PI * sys.gamma_c * area**2)
    incoherent = eta.eta * s**4 / (TWO_PI * sys.gamma_b * area**2)
    return ExcitationOutcome(coherent, incoherent, "cw_squeezed_broadband", "rate")


# ---------------------------------------------------------------------------
# squeezed light, pulsed
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PulsedEngineOptions:
    """Lattice and sampling controls for the pulsed Schmidt-mode engine."""

    quad: NumericsOptions = DEFAULT_NUMERICS
    points_per_feature: int = 12
    coherent_samples_per_osc: float = 8.0
    incoherent_samples_per_sigma: float = 8.0
    sample_rel_tol: float = 1e-3
    max_sample_levels: int = 3
    support_epsilon: float = 1e-12
    mode_weight_tail: float = 1e-4


DEFAULT_PULSED_OPTIONS = PulsedEngineOptions()


def _oscillation_scale(grid_points: np.ndarray, table: np.ndarray) -> float:
    """Smallest variation scale of the highest mode.

    extent/(crossings + 8): one lobe per zero crossing plus margin so that a
    crossing-free Gaussian still reports a fraction of its own width.
    """
    row = table[-1]
    live = np.abs(row) > 1e-6 * np.max(np.abs(row))
    if not np.any(live):
        return grid_points[-1] - grid_points[0]
    idx = np.nonzero(live)[0]
    segment = row[idx[0] : idx[-1] + 1]
    crossings = int(np.sum(np.abs(np.diff(np.sign(segment))) > 0))
    extent = grid_points[idx[-1]] - grid_points[idx[0]]
    return extent / (crossings + 8.0)


def _support_extent(grid_points: np.ndarray, table: np.ndarray, eps: float) -> float:
    mask = np.abs(table[-1]) > eps * np.max(np.abs(table[-1]))
    idx = np.nonzero(mask)[0]
    center = 0.5 * (grid_points[0] + grid_points[-1])
    return max(abs(grid_points[idx[0]] - center), abs(grid_points[idx[-1]] - center))


class PulsedExcitationEngine:
    """Schmidt-mode quadrature engine with beta-independent kernel caches.

    Construction tabulates the modes on a uniform inner lattice whose step
    resolves the fastest mode oscillation (and Gamma_b too unless the Green
    core is analytically extracted), then caches

        V_n(w_j) = Int G_ba f_IIn(w_j - x) f_In(x) dbar-x     (coherent)
        T_nm     = Int L(w) |Int G_ba f_IIn f_Im dbar-x|^2 dw (incoherent)

    on outer sample lattices aligned with the inner one (so the shifted mode
    values are strided views, no per-point interpolation).  The outer
    Lorentzian integral is a fixed linear functional of the outer samples
    (Simpson weights plus an analytic Voigt core term when Gamma_c is
    unresolved), so T_nm is a scalar per mode pair and a beta sweep only
    re-weights the caches with s_n c_n / s_n s_m.  Sampling fidelity is
    certified by halving the outer stride until the results settle.
    """

    def __init__(
        self,
        dec: SchmidtDecomposition,
        sys: FourLevelSystem,
        eta: CrossSectionPrefactor,
        a_eff,
        opts: PulsedEngineOptions = DEFAULT_PULSED_OPTIONS,
    ):
        self.dec = dec
        self.sys = sys
        self.eta = eta
        self.area = _a_eff_value(a_eff)
        self.opts = opts
        self._build_lattice()
        self._build_green_weights()
        self._coherent_cache: dict[int, np.ndarray] = {}
        self._incoherent_cache: dict[int, np.ndarray] = {}
        self._lorentz_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._cache_lock = threading.Lock()

    # -- lattice -----------------------------------------------------------

    def _build_lattice(self):
        dec, sys, opts = self.dec, self.sys, self.opts
        pts_i = dec.grid_i.points
        self.osc = _oscillation_scale(pts_i, dec.f_i)
        self.extract = sys.gamma_b < self.osc / 4.0
        h = self.osc / opts.points_per_feature
        if not self.extract:
            h = min(h, sys.gamma_b / opts.points_per_feature)

        # Inner lattice only needs the band-I mode support (plus the Green core
        # when it lies inside), not the full JSA grid span.
        ext_i = _support_extent(pts_i, dec.f_i, opts.support_epsilon)
        half_i = min(dec.grid_i.half_span, ext_i + 4.0 * self.osc)
        ba_offset = abs(sys.omega_ba - dec.grid_i.center)
        if ba_offset < half_i and not self.extract:
            half_i = min(dec.grid_i.half_span, max(half_i, ba_offset + 30.0 * sys.gamma_b))
        n_in = int(np.ceil(2.0 * half_i / h)) + 1
        self.n_in = n_in if n_in % 2 == 1 else n_in + 1
        self.h = 2.0 * half_i / (self.n_in - 1)
        self.x = dec.grid_i.center - half_i + self.h * np.arange(self.n_in)

        # Mode tables (and derivatives for the core correction) on the lattice.
        self.fi = dec.modes_at("I", self.x)
        di = np.gradient(dec.f_i, dec.grid_i.step, axis=1)
        self.dfi = np.vstack([np.interp(self.x, pts_i, row) for row in di])

        ext_ii = _support_extent(dec.grid_ii.points, dec.f_ii, opts.support_epsilon)
        self.out_center = dec.grid_i.center + dec.grid_ii.center
        hard_cap = dec.grid_i.half_span + dec.grid_ii.half_span
        base = ext_i + ext_ii + 2.0 * self.osc
        ca_offset = abs(sys.omega_ca - self.out_center)
        if ca_offset <= base:
            base = max(base, ca_offset + 30.0 * sys.gamma_c)
        self.out_half = min(hard_cap, base)

        # Band-II tables on the shifted lattice: q_axis[m] is a band-II
        # frequency and q = (n_in - 1) + j*stride - k maps (w_j, x_k) pairs.
        n_out_max = int(np.ceil(2.0 * self.out_half / self.h)) + 2
        if n_out_max % 2 == 0:
            n_out_max += 1
        self.n_out_max = n_out_max
        out_lo = self.out_center - self.out_half
        self.q_axis = (out_lo - self.x[-1]) + self.h * np.arange(n_out_max + self.n_in - 1)
        pts_ii = dec.grid_ii.points
        self.fii_lat = np.vstack(
            [np.interp(self.q_axis, pts_ii, row, left=0.0, right=0.0) for row in dec.f_ii]
        )
        dii = np.gradient(dec.f_ii, dec.grid_ii.step, axis=1)
        self.dfii_lat = np.vstack(
            [np.interp(self.q_axis, pts_ii, row, left=0.0, right=0.0) for row in dii]
        )

        # Per-mode band-I support ranges on the lattice (trims the inner dots).
        self.support = []
        for row in self.fi:
            mask = np.abs(row) > opts.support_epsilon * np.max(np.abs(row))
            idx = np.nonzero(mask)[0]
            self.support.append((int(idx[0]), int(idx[-1]) + 1))
        self.sigma_like = _support_extent(pts_i, dec.f_i[:1], opts.support_epsilon) / 7.0

    def _build_green_weights(self):
        sys = self.sys
        g_vals = green(self.x, sys.green_ba())
        self.cvec = _simpson_vector(self.n_in, self.h) * g_vals / SQRT_2PI
        if self.extract:
            window = 0.5 * self.osc
            delta = self.x - sys.omega_ba
            g_w = np.exp(-(delta * delta) / (2.0 * window**2))
            kernel = green_kernel(sys.omega_ba, sys.gamma_b)
            m0, m1 = kernel.gaussian_moments(window)
            s0 = np.sum(self.cvec * g_w)
            s1 = np.sum(self.cvec * delta * g_w)
            self.c_corr0 = m0 / SQRT_2PI - s0
            self.c_corr1 = m1 / SQRT_2PI - s1
        else:
            self.c_corr0 = 0.0 + 0.0j
            self.c_corr1 = 0.0 + 0.0j

    # -- kernel integrals ----------------------------------------------------

    def _n_out(self, stride: int) -> int:
        n = (self.n_out_max - 1) // stride + 1
        return n if n % 2 == 1 else n - 1

    def _outer_points(self, stride: int) -> np.ndarray:
        base = self.out_center - self.out_half
        return base + self.h * stride * np.arange(self._n_out(stride))

    def _fii_strided(self, n: int, stride: int) -> np.ndarray:
        """View F[j, k] = f_IIn(w_j - x_k) using the aligned lattice."""
        row = self.fii_lat[n]
        s = row.strides[0]
        return np.lib.stride_tricks.as_strided(
            row[self.n_in - 1 :],
            shape=(self._n_out(stride), self.n_in),
            strides=(stride * s, -s),
            writeable=False,
        )

    def _core_values(self, stride: int):
        """f_IIn tables and derivatives at (w_j - w_ba) for all modes."""
        arg = self._outer_points(stride) - self.sys.omega_ba
        f_ii = np.vstack([
            np.interp(arg, self.q_axis, row, left=0.0, right=0.0) for row in self.fii_lat
        ])
        df_ii = np.vstack([
            np.interp(arg, self.q_axis, row, left=0.0, right=0.0) for row in self.dfii_lat
        ])
        return f_ii, df_ii

    def _fi_at_core(self) -> tuple[np.ndarray, np.ndarray]:
        if not hasattr(self, "_fi_core"):
            f0 = np.array([np.interp(self.sys.omega_ba, self.x, row) for row in self.fi])
            d0 = np.array([np.interp(self.sys.omega_ba, self.x, row) for row in self.dfi])
            self._fi_core = (f0, d0)
        return self._fi_core

    def _b_reversed(self) -> tuple[np.ndarray, np.ndarray]:
        """(n_in, n_modes) Green-weighted band-I tables, inner index reversed."""
        if not hasattr(self, "_b_rev"):
            b_mat = (self.cvec[:, None] * self.fi.T)[::-1, :]
            self._b_rev = (np.ascontiguousarray(b_mat.real), np.ascontiguousarray(b_mat.imag))
        return self._b_rev

    def _kernel_row(self, n: int, m: int, stride: int) -> np.ndarray:
        """K_nm(w_j) = Int G_ba f_IIn(w_j - x) f_Im(x) dbar-x on the outer lattice."""
        k0, k1 = self.support[m]
        view = self._fii_strided(n, stride)[:, k0:k1]
        coeff = self.cvec[k0:k1] * self.fi[m, k0:k1]
        out = view @ coeff.real + 1j * (view @ coeff.imag)
        if self.extract:
            f_iis, df_iis = self._core_values(stride)
            f_i0, df_i0 = (arr[m] for arr in self._fi_at_core())
            f_val = f_iis[n] * f_i0
            f_der = -df_iis[n] * f_i0 + f_iis[n] * df_i0
            out = out + f_val * self.c_corr0 + f_der * self.c_corr1
        return out

    def _kernel_slab(self, j: int, stride: int) -> np.ndarray:
        """K_nm at one outer point: contiguous R-slice times the reversed B tables."""
        b_re, b_im = self._b_reversed()
        start = j * stride
        slab = self.fii_lat[:, start : start + self.n_in]
        return slab @ b_re + 1j * (slab @ b_im)

    # -- outer Lorentzian functional ----------------------------------------

    def _lorentz_weights(self, stride: int) -> tuple[np.ndarray, np.ndarray]:
        """Sample weights for the outer Int L(w) Q(w) dw at one stride level."""
        if stride in self._lorentz_cache:
            return self._lorentz_cache[stride]
        pts = self._outer_points(stride)
        lineshape = self.sys.lineshape_ca()
        lam = lorentzian_sample_weights(
            pts, self.h * stride, lineshape.center, lineshape.fwhm, 0.5 * self.sigma_like
        )
        self._lorentz_cache[stride] = (lam, pts)
        return self._lorentz_cache[stride]

    def _coherent_level(self, stride: int) -> np.ndarray:
        """V_n(w_j) = K_nn on the outer lattice, one row per mode."""
        with self._cache_lock:
            return self._coherent_level_locked(stride)

    def _coherent_level_locked(self, stride: int) -> np.ndarray:
        if stride not in self._coherent_cache:
            b_re, b_im = self._b_reversed()
            n_out = self._n_out(stride)
            n_modes = self.dec.n_modes
            v_rows = np.empty((n_modes, n_out), dtype=complex)
            for j in range(n_out):
                start = j * stride
                slab = self.fii_lat[:, start : start + self.n_in]
                v_rows[:, j] = np.einsum("nk,kn->n", slab, b_re) + 1j * np.einsum(
                    "nk,kn->n", slab, b_im
                )
            if self.extract:
                f_iis, df_iis = self._core_values(stride)
                f_i0, df_i0 = self._fi_at_core()
                v_rows += (f_iis * f_i0[:, None]) * self.c_corr0
                v_rows += (f_iis * df_i0[:, None] - df_iis * f_i0[:, None]) * self.c_corr1
            self._coherent_cache[stride] = v_rows
        return self._coherent_cache[stride]

    def _incoherent_level(self, stride: int) -> np.ndarray:
        """T_nm = Int L(w) |K_nm(w)|^2 dw for every mode pair at one level."""
        with self._cache_lock:
            return self._incoherent_level_locked(stride)

    def _incoherent_level_locked(self, stride: int) -> np.ndarray:
        if stride not in self._incoherent_cache:
            n_modes = self.dec.n_modes
            lam, _ = self._lorentz_weights(stride)
            t_mat = np.zeros((n_modes, n_modes))
            if self.extract:
                f_iis, df_iis = self._core_values(stride)
                f_i0, df_i0 = self._fi_at_core()
            for j in range(self._n_out(stride)):
                k_slab = self._kernel_slab(j, stride)
                if self.extract:
                    k_slab += np.outer(f_iis[:, j], f_i0) * self.c_corr0
                    k_slab += (
                        np.outer(f_iis[:, j], df_i0) - np.outer(df_iis[:, j], f_i0)
                    ) * self.c_corr1
                t_mat += lam[j] * (k_slab.real**2 + k_slab.imag**2)
            self._incoherent_cache[stride] = t_mat
        return self._incoherent_cache[stride]

    def _stride_ladder(self, target_spacing: float) -> list[int]:
        stride = max(1, int(np.floor(target_spacing / self.h)))
        while self._n_out(stride) < 33 and stride > 1:
            stride //= 2
        ladder = [stride]
        while stride > 1 and len(ladder) < self.opts.max_sample_levels:
            stride = max(1, stride // 2)
            ladder.append(stride)
        return ladder

    def _converge_levels(self, ladder: list[int], evaluate) -> tuple[float, float]:
        previous = None
        value = 0.0
        rel = 0.0 if len(ladder) == 1 else np.inf
        for stride in ladder:
            value = evaluate(stride)
            if previous is not None:
                rel = abs(value - previous) / max(abs(value), 1e-300)
                if rel <= self.opts.sample_rel_tol:
                    break
            previous = value
        return value, rel

    def coherent_probability(self, dec: SchmidtDecomposition | None = None) -> tuple[float, float]:
        """(value, sampling_rel_err) of the coherent pulsed probability.

        The mode-diagonal amplitude sum is usually much smoother than the
        individual mode tables, so sampling starts at the incoherent stride
        and is halved (toward the per-oscillation target) until the outer
        integral settles.
        """
        dec = dec or self.dec
        weights = dec.s_n * dec.c_n

        def evaluate(stride: int) -> float:
            amp = weights @ self._coherent_level(stride)
            lam, _ = self._lorentz_weights(stride)
            return float(lam @ (amp.real**2 + amp.imag**2))

        start = max(self.osc / self.opts.coherent_samples_per_osc,
                    self.sigma_like / self.opts.incoherent_samples_per_sigma)
        ladder = self._stride_ladder(start)
        floor_stride = max(
            1, int(np.floor(self.osc / (self.opts.coherent_samples_per_osc * self.h)))
        )
        while ladder[-1] > floor_stride and len(ladder) < self.opts.max_sample_levels + 2:
            ladder.append(max(floor_stride, ladder[-1] // 2))
        value, rel = self._converge_levels(ladder, evaluate)
        return self.eta.eta * value / self.area**2, rel

    def incoherent_probability(self, dec: SchmidtDecomposition | None = None) -> tuple[float, float]:
        """(value, sampling_rel_err) of the incoherent pulsed probability."""
        dec = dec or self.dec
        s = dec.s_n
        weights = np.outer(s * s, s * s)

        def evaluate(stride: int) -> float:
            return float(np.sum(weights * self._incoherent_level(stride)))

        ladder = self._stride_ladder(self.sigma_like / self.opts.incoherent_samples_per_sigma)
        value, rel = self._converge_levels(ladder, evaluate)
        return self.eta.eta * value / self.area**2, rel

    # -- intermediate-state population (validity diagnostic) -----------------

    def _mode_time_profiles(self) -> np.ndarray:
        """|Int G_ba f_In(w) e^{-i w t} dbar-w|^2 on a +/-6-duration time grid."""
        if not hasattr(self, "_time_profiles"):
            duration = 1.0 / self.sigma_like
            t_grid = np.linspace(-6.0 * duration, 6.0 * duration, 121)
            phase = np.exp(-1j * np.outer(self.x - self.dec.grid_i.center, t_grid))
            m_prof = (self.cvec[None, :] * self.fi) @ phase
            if self.extract:
                f_i0, df_i0 = self._fi_at_core()
                carrier = np.exp(-1j * (self.sys.omega_ba - self.dec.grid_i.center) * t_grid)
                m_prof += np.outer(f_i0, carrier) * self.c_corr0
                m_prof += (
                    np.outer(df_i0, carrier)
                    - 1j * np.outer(f_i0, carrier) * t_grid[None, :]
                ) * self.c_corr1
            self._time_profiles = np.abs(m_prof) ** 2
        return self._time_profiles

    def max_population_weighted(self, weights: np.ndarray) -> float:
        """max_t sum_n weights_n |M_n(t)|^2 (no coupling or area factors)."""
        profiles = self._mode_time_profiles()
        return float(np.max(weights @ profiles))

    def outcome(self, dec: SchmidtDecomposition | None = None) -> ExcitationOutcome:
        dec = dec or self.dec
        if dec.beta_mag == 0.0:
            return ExcitationOutcome(0.0, 0.0, "pulsed_squeezed", "probability")
        coherent, rel_c = self.coherent_probability(dec)
        incoherent, rel_ic = self.incoherent_probability(dec)
        return ExcitationOutcome(
            coherent, incoherent, "pulsed_squeezed", "probability",
            diagnostics={
                "coherent_sampling_rel_err": rel_c,
                "incoherent_sampling_rel_err": rel_ic,
                "truncation_tail": dec.tail,
                "core_extraction": self.extract,
            },
        )


def p_squeezed_pulsed(
    dec: SchmidtDecomposition,
    sys: FourLevelSystem,
    eta: CrossSectionPrefactor,
    a_eff,
    coupling: DipoleCoupling | None = None,
    opts: PulsedEngineOptions = DEFAULT_PULSED_OPTIONS,
) -> ExcitationOutcome:
    """Pulsed squeezed excitation probability from a Schmidt decomposition.

    Modes that carry a negligible share of the gain weights (relative tail
    opts.mode_weight_tail) are dropped before the kernel caches are built.
    """
    working = dec.truncated(dec.weighted_mode_count(opts.mode_weight_tail))
    engine = PulsedExcitationEngine(working, sys, eta, a_eff, opts)
    outcome = engine.outcome()
    if coupling is None:
        return outcome
    kappa = one_photon_coupling(working.grid_i.center, coupling.mu_sq_ba)
    pop = kappa * engine.max_population_weighted(working.s_n**2) / _a_eff_value(a_eff)
    return ExcitationOutcome(
        outcome.coherent, outcome.incoherent, outcome.regime, outcome.kind,
        ValidityReport.from_population(pop), outcome.diagnostics,
    )


# ---------------------------------------------------------------------------
# fluorescence and energy
# ---------------------------------------------------------------------------


def fluorescence(
    outcome: ExcitationOutcome, sys: FourLevelSystem, n_atoms: float
) -> FluorescenceResult:
    """n = p (Gamma_cd/Gamma_c)(Gamma_da^r/Gamma_d) N_atoms, split preserved."""
    if not sys.gamma_d > 0.0:
        raise ValueError("Gamma_d must be positive for fluorescence bookkeeping")
    branch_cd = sys.gamma("cd") / sys.gamma_c
    branch_da = sys.gamma_r["da"] / sys.gamma_d
    factor = branch_cd * branch_da
    per_coh = outcome.coherent * factor
    per_ic = outcome.incoherent * factor
    per_atom = per_coh + per_ic
    return FluorescenceResult(
        per_atom=per_atom,
        per_atom_coherent=per_coh,
        per_atom_incoherent=per_ic,
        total=per_atom * n_atoms,
        branching_cd_over_c=branch_cd,
        branching_da_r_over_d=branch_da,
        n_atoms=n_atoms,
        kind=outcome.kind,
    )


def energy_ledger(
    population_integrals: Mapping[str, float], sys: FourLevelSystem
) -> EnergyLedger:
    """Scattered/absorbed energy from time-integrated level populations (s).

    population_integrals maps level -> Int <sigma_pp> dt for p in {b, c, d}.
    Scattered on pq is hbar w_pq Gamma^r_pq times the upper-level integral;
    absorbed uses Gamma^nr; extinction is their sum.
    """
    pops = {level: float(population_integrals.get(level, 0.0)) for level in ("b", "c", "d")}
    for level, value in pops.items():
        if value < 0.0:
            raise ValueError(f"population integral for {level!r} must be nonnegative")
    upper = {"ba": "b", "cb": "c", "cd": "c", "da": "d"}
    omegas = {
        "ba": sys.omega_ba, "cb": sys.omega_cb, "cd": sys.omega_cd, "da": sys.omega_da,
    }
    scattered = {
        t: HBAR * omegas[t] * sys.gamma_r[t] * pops[upper[t]] for t in upper
    }
    absorbed = {
        t: HBAR * omegas[t] * sys.gamma_nr[t] * pops[upper[t]] for t in upper
    }
    return EnergyLedger.build(scattered, absorbed)


def population_integrals_from_probability(
    p_excitation: float, sys: FourLevelSystem, b_integral: float = 0.0
) -> dict:
    """Time-integrated c and d populations implied by an excitation probability.

    Int <sigma_cc> dt = p / Gamma_c and the d level picks up the c -> d
    branching with its own lifetime: Int <sigma_dd> dt = (Gamma_cd/Gamma_d) p / Gamma_c.
    """
    if p_excitation < 0.0:
        raise ValueError("p_excitation must be nonnegative")
    int_cc = p_excitation / sys.gamma_c
    int_dd = sys.gamma("cd") * int_cc / sys.gamma_d
    return {"b": b_integral, "c": int_cc, "d": int_dd}


# ---------------------------------------------------------------------------
# perturbative-validity diagnostic
# ---------------------------------------------------------------------------


def _pulsed_classical_population(
    src: ClassicalPulsed, sys: FourLevelSystem, coupling: DipoleCoupling,
    area: float, opts: NumericsOptions,
) -> float:
    kappa = one_photon_coupling(src.amp_i.center, coupling.mu_sq_ba)
    dec = _single_pair_decomposition(src)
    engine = PulsedExcitationEngine(dec, sys, _UNIT_ETA, 1.0, PulsedEngineOptions(quad=opts))
    best = engine.max_population_weighted(np.ones(1))
    return kappa * (src.n_photons_i / area) * best


def _pulsed_squeezed_population(
    dec: SchmidtDecomposition, sys: FourLevelSystem, coupling: DipoleCoupling,
    area: float, opts: NumericsOptions,
) -> float:
    """max_t of (kappa/A) sum_n s_n^2 |Int G f_In e^{-iwt} dbar-w|^2."""
    kappa = one_photon_coupling(dec.grid_i.center, coupling.mu_sq_ba)
    working = dec.truncated(dec.weighted_mode_count(1e-4))
    engine = PulsedExcitationEngine(working, sys, _UNIT_ETA, 1.0, PulsedEngineOptions(quad=opts))
    best = engine.max_population_weighted(working.s_n**2)
    return kappa * best / area


def max_intermediate_population(
    src,
    sys: FourLevelSystem,
    coupling: DipoleCoupling,
    a_eff=None,
    opts: NumericsOptions = DEFAULT_NUMERICS,
) -> float:
    """Peak second-order population of the intermediate state |b>.

    CW sources use the time-independent closed forms (classical flux or the
    squeezed photon spectral density s_I^2); pulsed sources scan a time grid
    spanning +/-6 pulse durations.
    """
    if isinstance(src, ClassicalCW):
        kappa = one_photon_coupling(src.center_i, coupling.mu_sq_ba)
        g_val = green(src.center_i, sys.green_ba())
        return float(src.flux_i * kappa * abs(g_val) ** 2)
    if isinstance(src, SqueezedCW):
        if src.beta_bar == 0.0:
            return 0.0
        area = _a_eff_value(a_eff)
        kappa = one_photon_coupling(src.center_i, coupling.mu_sq_ba)
        abs2 = abs2_green_kernel(sys.omega_ba, sys.gamma_b)

        def smooth(w):
            s, _, _ = gain_functions_cw(w, src, "I")
            return s * s

        integral = quad_kernel_smooth(
            abs2, smooth, smooth_center=src.center_i,
            smooth_width=src.sigma_c_bar, smooth_scale=_cw_gain_scale(src), opts=opts,
        )
        return float(kappa * np.real(integral) / (TWO_PI * area))
    if isinstance(src, ClassicalPulsed):
        if src.n_photons_i == 0.0:
            return 0.0
        return _pulsed_classical_population(src, sys, coupling, _a_eff_value(a_eff), opts)
    if isinstance(src, SchmidtDecomposition):
        if src.beta_mag == 0.0:
            return 0.0
        return _pulsed_squeezed_population(src, sys, coupling, _a_eff_value(a_eff), opts)
    raise TypeError(f"unsupported source type {type(src).__name__}")


# ---------------------------------------------------------------------------
# equal-photon-budget comparison sources
# ---------------------------------------------------------------------------


def matched_classical_cw(src: SqueezedCW, a_eff) -> ClassicalCW:
    """Classical CW reference at the squeezed photon rate, same centers.

    The comparison protocol keeps each classical beam narrowband and on the
    squeezed band center, with flux = (photons/s)/A_eff per band.
    """
    area = _a_eff_value(a_eff)
    rate_i = photon_rate_cw(src, "I")
    rate_ii = photon_rate_cw(src, "II")
    return ClassicalCW(
        flux_i=rate_i / area, flux_ii=rate_ii / area,
        center_i=src.center_i, center_ii=src.center_ii,
    )


def matched_classical_pulsed(dec: SchmidtDecomposition, src: SqueezedPulsed) -> ClassicalPulsed:
    """Classical pulse pair at the squeezed photon number with sigma_I = sigma_II = sigma_c."""
    n_photons = photon_number_pulsed(dec)
    return ClassicalPulsed(
        amp_i=GaussianAmplitude(src.center_i, src.sigma_c),
        amp_ii=GaussianAmplitude(src.center_ii, src.sigma_c),
        n_photons_i=n_photons,
        n_photons_ii=n_photons,
    )
