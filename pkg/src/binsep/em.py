"""EM clustering of interaural cues over a source x delay Gaussian mixture.

Each mixture component (i, tau) models the residual phase after removing
candidate delay tau with a Gaussian per frequency bin; component weights
psi span all (source, delay) pairs. Optional per-source Gaussians over the
level difference join the likelihood, and an optional uniform "garbage"
component absorbs outlier cues produced by reverberation. Cross-correlation
with phase whitening (PHAT) seeds the delay estimates.

All per-TF normalizations run in log space; densities for the large
(source, tau, bin, frame) tensors are computed in float32 with float64
reductions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .audio import AudioClip
from .errors import ConvergenceError, DataError, DimensionError
from .interaural import (InterauralFeatures, TauGrid, bin_omega,
                         interaural_features, residual_cube)
from .masks import SoftMask
from .stft import Spectrogram, StftConfig, stft

_LOG_2PI = math.log(2.0 * math.pi)

# Uniform garbage densities: 1/(2 pi) over the wrapped-phase interval and,
# when the level term is active, 1/40 per dB over an assumed 40 dB range.
GARBAGE_IPD_DENSITY = 1.0 / (2.0 * math.pi)
GARBAGE_ILD_RANGE_DB = 40.0

# The level observable is clamped to the +/-20 dB support assumed by the
# garbage model; the epsilon floor otherwise turns digitally silent bins
# into +/-200 dB outliers that wreck the Gaussian fits.
ILD_CLAMP_DB = GARBAGE_ILD_RANGE_DB / 2.0

# Variance floor for the level Gaussians, in dB^2 (std 3 dB, the scale of
# interference-driven level swings). The phase floor is in rad^2 and far
# too tight for dB-scale data: a collapsed level variance lets one source
# win a density-sharpness race and vacuum up every low-level cell.
ILD_VAR_FLOOR_DB2 = 9.0

ILD_INIT_MEAN_DB = 0.0
ILD_INIT_VAR_DB2 = 100.0
_PSI_INIT_FLOOR = 1e-12


@dataclass(frozen=True)
class EmConfig:
    n_sources: int = 2
    tau_grid: TauGrid = field(default_factory=TauGrid.default)
    iterations: int = 16
    use_ild: bool = True
    use_garbage: bool = False
    variance_floor: float = 1e-4
    freq_dependent: bool = True
    # Level Gaussians default to one (mu, var) per source: per-bin level
    # fits track whichever source occupies a bin instead of the head
    # shadow, which poisons the masks when the true level contrast is flat.
    ild_freq_dependent: bool = False
    # "delay": seed sources on distinct correlation peaks (standard).
    # "level": co-locate them on the dominant peak and split the level
    # means at the observed quartiles, for mixtures whose sources are
    # distinguishable by level but not by arrival time.
    init_mode: str = "delay"
    ll_tol: float = 1e-6
    garbage_weight_init: float = 0.1
    stft: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        if self.iterations < 1:
            raise DataError("iterations must be >= 1")
        if self.variance_floor <= 0:
            raise DataError("variance_floor must be positive")
        if self.n_sources < 1:
            raise DataError("n_sources must be >= 1")
        if self.init_mode not in ("delay", "level"):
            raise DataError(f"unknown init_mode {self.init_mode!r}")
        if self.init_mode == "level" and not self.use_ild:
            raise DataError("level-seeded init needs the level term enabled")


@dataclass
class IpdModelParams:
    """Mixture state: means/variances per (source, tau, bin), weights per
    (source, tau), optional level-difference Gaussians per (source, bin)."""

    xi: np.ndarray
    sigma2: np.ndarray
    psi: np.ndarray
    ild_mu: np.ndarray | None = None
    ild_var: np.ndarray | None = None
    psi_garbage: float = 0.0
    phat_delays: np.ndarray | None = None
    phat_fallback: bool = False

    def validate_finite(self) -> None:
        for name, arr in (("xi", self.xi), ("sigma2", self.sigma2),
                          ("psi", self.psi), ("ild_mu", self.ild_mu),
                          ("ild_var", self.ild_var)):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise ConvergenceError(f"model diverged: non-finite {name}")
        if not math.isfinite(self.psi_garbage) or self.psi_garbage < 0:
            raise ConvergenceError("model diverged: bad garbage weight")


@dataclass
class Posteriors:
    """Per-TF responsibilities nu over (source, tau) plus optional garbage."""

    nu: np.ndarray                      # (Q, T, K, M) float32
    nu_garbage: np.ndarray | None = None  # (K, M)


@dataclass
class EmResult:
    params: IpdModelParams
    masks: list
    garbage_mask: SoftMask | None
    log_likelihoods: list
    config: EmConfig
    posteriors: Posteriors


def gcc_phat_on_grid(spec_left: Spectrogram, spec_right: Spectrogram,
                     grid: TauGrid) -> np.ndarray:
    """Phase-transform cross-correlation evaluated at fractional delays.

    The whitened cross-spectrum is summed over frames and the inverse
    transform is evaluated directly on the delay grid, which interpolates
    band-limitedly between integer lags.
    """
    cross = spec_left.values * np.conj(spec_right.values)
    mag = np.abs(cross)
    np.maximum(mag, 1e-30, out=mag)
    r = (cross / mag).sum(axis=1)
    k = spec_left.n_bins
    weights = np.full(k, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0  # DC and Nyquist appear once in the two-sided spectrum
    omega = bin_omega(k)
    # sign convention matches the residual model: a right channel lagging
    # by d gives ratio e^{+j omega d}, and the peak must land at tau = +d
    basis = np.exp(-1j * grid.values[:, None] * omega[None, :])
    return (basis @ (weights * r)).real / (2 * (k - 1))


def _pick_peaks(gcc: np.ndarray, grid: TauGrid, n_sources: int,
                min_separation: float = 1.0,
                min_height_ratio: float = 0.18):
    """Pick the strongest well-separated local maxima of the correlation.

    Candidates must reach min_height_ratio of the global maximum (the
    whitened correlation of a single source rings with sinc sidelobes at
    ~0.22 of the peak, which are not sources). They are ordered by height,
    then smaller |tau|, then positive tau first, so runs are reproducible
    under exact ties. Falls back to the largest grid values regardless of
    separation when too few peaks qualify.
    """
    taus = grid.values
    n = len(taus)
    is_peak = gcc >= min_height_ratio * np.max(gcc)
    if n > 1:
        is_peak[1:] &= gcc[1:] >= gcc[:-1]
        is_peak[:-1] &= gcc[:-1] >= gcc[1:]

    def sort_key(idx):
        return (-gcc[idx], abs(taus[idx]), -taus[idx])

    candidates = sorted(np.flatnonzero(is_peak), key=sort_key)
    chosen: list[int] = []
    for idx in candidates:
        if all(abs(taus[idx] - taus[j]) >= min_separation for j in chosen):
            chosen.append(idx)
        if len(chosen) == n_sources:
            return (np.array([taus[i] for i in chosen]),
                    np.array([gcc[i] for i in chosen]), False)
    fallback = sorted(range(n), key=sort_key)[:n_sources]
    return (np.array([taus[i] for i in fallback]),
            np.array([gcc[i] for i in fallback]), True)


def phat_initialize(clip: AudioClip, cfg: EmConfig) -> IpdModelParams:
    """Seed the mixture from PHAT cross-correlation peaks.

    Component weights start as a discretized unit-variance Gaussian over
    the delay grid centered on each source's peak; residual means start at
    zero with unit variance.
    """
    if clip.channels != 2:
        raise DataError("initialization requires a stereo clip")
    spec_l = stft(clip.channel(0), cfg.stft, clip.sample_rate)
    spec_r = stft(clip.channel(1), cfg.stft, clip.sample_rate)
    return _phat_initialize_from_specs(spec_l, spec_r, cfg)


def _phat_initialize_from_specs(spec_l: Spectrogram, spec_r: Spectrogram,
                                cfg: EmConfig,
                                colocated_level_split: bool = False
                                ) -> IpdModelParams:
    gcc = gcc_phat_on_grid(spec_l, spec_r, cfg.tau_grid)
    delays, _, fell_back = _pick_peaks(gcc, cfg.tau_grid, cfg.n_sources)
    if colocated_level_split:
        # Alternative start for level-separated mixtures: all sources share
        # the dominant delay peak and the level means split at the observed
        # quartiles. Equal level means are a symmetric fixed point EM
        # cannot leave when the delays are indistinguishable.
        delays = np.full_like(delays, delays[0])

    q, t, k = cfg.n_sources, len(cfg.tau_grid), spec_l.n_bins
    psi_garbage = cfg.garbage_weight_init if cfg.use_garbage else 0.0
    per_source_mass = (1.0 - psi_garbage) / q
    psi = np.empty((q, t))
    for i, d in enumerate(delays):
        g = np.exp(-0.5 * (cfg.tau_grid.values - d) ** 2)
        g = np.maximum(g, _PSI_INIT_FLOOR)
        psi[i] = g / g.sum() * per_source_mass

    params = IpdModelParams(
        xi=np.zeros((q, t, k)),
        sigma2=np.ones((q, t, k)),
        psi=psi,
        psi_garbage=psi_garbage,
        phat_delays=delays,
        phat_fallback=fell_back,
    )
    if cfg.use_ild:
        params.ild_mu = np.full((q, k), ILD_INIT_MEAN_DB)
        params.ild_var = np.full((q, k), ILD_INIT_VAR_DB2)
        if colocated_level_split:
            features = interaural_features(spec_l, spec_r)
            quartiles = np.percentile(_clamped_ild(features),
                                      np.linspace(75.0, 25.0, q))
            for i in range(q):
                params.ild_mu[i, :] = quartiles[i]
    return params


# Bins this far below the loudest bin are treated as silent: their level
# ratio is numerical noise, so the observable is neutralized to 0 dB.
SILENCE_FLOOR_DB = 60.0


def _clamped_ild(features: InterauralFeatures) -> np.ndarray:
    ild = np.clip(features.ild_db, -ILD_CLAMP_DB, ILD_CLAMP_DB)
    if features.level is not None:
        silent = features.level < np.max(features.level) * 10.0 ** (
            -SILENCE_FLOOR_DB / 20.0)
        ild = np.where(silent, 0.0, ild)
    return ild


def _ild_log_densities(features: InterauralFeatures,
                       params: IpdModelParams) -> list:
    """Per-source log N(ild_db | mu_i, var_i) planes, float32 (K, M)."""
    out = []
    ild = _clamped_ild(features).astype(np.float32)
    for i in range(params.ild_mu.shape[0]):
        mu = params.ild_mu[i].astype(np.float32)[:, None]
        var = params.ild_var[i].astype(np.float32)[:, None]
        d = ild - mu
        out.append(-0.5 * (_LOG_2PI + np.log(var)) - d * d / (2.0 * var))
    return out


def _component_log_densities(cube: np.ndarray, features: InterauralFeatures,
                             params: IpdModelParams, cfg: EmConfig) -> list:
    """Log of psi * N(residual | xi, sigma2) [* N_ild] per source: (T, K, M).

    The DC and Nyquist bins are real-valued, so their ratio angle is only a
    sign with no phase quadrature; the phase term there is replaced by the
    uniform density so those rows are driven by weights and level alone.
    """
    params.validate_finite()
    if np.any(params.psi < 0):
        raise ConvergenceError("model diverged: negative mixing weight")
    if cfg.use_ild and (params.ild_mu is None or params.ild_var is None):
        raise DataError("config enables the level term but params lack it")
    ild_ld = _ild_log_densities(features, params) if cfg.use_ild else None
    out = []
    uniform = np.float32(math.log(GARBAGE_IPD_DENSITY))
    with np.errstate(divide="ignore"):
        log_psi = np.log(params.psi)
    for i in range(cfg.n_sources):
        xi = params.xi[i].astype(np.float32)[:, :, None]
        inv2s = (0.5 / params.sigma2[i]).astype(np.float32)[:, :, None]
        const = (log_psi[i][:, None]
                 - 0.5 * (_LOG_2PI + np.log(params.sigma2[i]))
                 ).astype(np.float32)[:, :, None]
        d = cube - xi
        np.square(d, out=d)
        d *= inv2s
        np.negative(d, out=d)
        d += const
        if d.shape[1] >= 3:
            lp = log_psi[i].astype(np.float32)[:, None]
            d[:, 0, :] = lp + uniform
            d[:, -1, :] = lp + uniform
        if ild_ld is not None:
            d += ild_ld[i][None, :, :]
        out.append(d)
    return out


def _garbage_log_density(params: IpdModelParams, cfg: EmConfig) -> float:
    if not cfg.use_garbage:
        return -np.inf
    with np.errstate(divide="ignore"):
        value = np.log(params.psi_garbage) + math.log(GARBAGE_IPD_DENSITY)
    if cfg.use_ild:
        value += math.log(1.0 / GARBAGE_ILD_RANGE_DB)
    return float(value)


def _posteriors_and_ll(cube: np.ndarray, features: InterauralFeatures,
                       params: IpdModelParams, cfg: EmConfig):
    """Normalized responsibilities and total log-likelihood in one pass."""
    log_dens = _component_log_densities(cube, features, params, cfg)
    log_g = _garbage_log_density(params, cfg)

    peak = np.max(log_dens[0], axis=0)
    for d in log_dens[1:]:
        np.maximum(peak, np.max(d, axis=0), out=peak)
    if cfg.use_garbage:
        np.maximum(peak, np.float32(log_g), out=peak)

    z = np.zeros_like(peak)
    for d in log_dens:
        d -= peak[None, :, :]
        np.exp(d, out=d)          # d now holds unnormalized responsibilities
        z += d.sum(axis=0)
    nu_garbage = None
    if cfg.use_garbage:
        nu_garbage = np.exp(log_g - peak)
        z += nu_garbage
    for d in log_dens:
        d /= z[None, :, :]
    if nu_garbage is not None:
        nu_garbage /= z

    ll = float(np.sum(np.log(z, dtype=np.float64) + peak, dtype=np.float64))
    nu = np.stack(log_dens)
    return Posteriors(nu=nu, nu_garbage=nu_garbage), ll


def e_step(features: InterauralFeatures, params: IpdModelParams,
           cfg: EmConfig) -> Posteriors:
    """Responsibilities of every (source, tau) component, normalized per
    TF point together with the garbage component when enabled."""
    cube = residual_cube(features, cfg.tau_grid)
    post, _ = _posteriors_and_ll(cube, features, params, cfg)
    return post


def log_likelihood(features: InterauralFeatures, params: IpdModelParams,
                   cfg: EmConfig) -> float:
    """Total marginal log-likelihood over all TF points, in log space."""
    cube = residual_cube(features, cfg.tau_grid)
    _, ll = _posteriors_and_ll(cube, features, params, cfg)
    return ll


def m_step(features: InterauralFeatures, post: Posteriors,
           cfg: EmConfig, prev: IpdModelParams | None = None,
           cube: np.ndarray | None = None,
           tie_frequencies: bool | None = None) -> IpdModelParams:
    """Weighted maximum-likelihood parameter updates.

    Cells whose total responsibility underflows to zero keep their previous
    mean and variance (when `prev` is given) instead of dividing by zero.
    `tie_frequencies` overrides the config's pooling choice; the full EM
    loop uses it to fit tied parameters during early iterations before
    releasing per-frequency ones.
    """
    if cube is None:
        cube = residual_cube(features, cfg.tau_grid)
    pooled = (not cfg.freq_dependent if tie_frequencies is None
              else tie_frequencies)
    nu = post.nu
    q, t, k, m = nu.shape
    n_points = k * m

    psi = nu.sum(axis=(2, 3), dtype=np.float64) / n_points
    denom = nu.sum(axis=3, dtype=np.float64)            # (Q, T, K)
    num_xi = np.einsum("qtkm,tkm->qtk", nu, cube, dtype=np.float64)

    if k >= 3:
        # real-valued boundary bins carry no phase data (see the density
        # construction); keep them out of the phase fits
        denom[:, :, 0] = denom[:, :, -1] = 0.0
        num_xi[:, :, 0] = num_xi[:, :, -1] = 0.0

    if pooled:
        denom = denom.sum(axis=2, keepdims=True) * np.ones((1, 1, k))
        num_xi = num_xi.sum(axis=2, keepdims=True) * np.ones((1, 1, k))

    ok = denom > 0
    xi = np.divide(num_xi, denom, out=np.zeros_like(num_xi), where=ok)
    if prev is not None:
        xi = np.where(ok, xi, prev.xi)

    sig_num = np.empty((q, t, k))
    for i in range(q):
        d = cube - xi[i].astype(np.float32)[:, :, None]
        np.square(d, out=d)
        d *= nu[i]
        sig_num[i] = d.sum(axis=2, dtype=np.float64)
    if k >= 3:
        sig_num[:, :, 0] = sig_num[:, :, -1] = 0.0
    if pooled:
        sig_num = sig_num.sum(axis=2, keepdims=True) * np.ones((1, 1, k))
    sigma2 = np.divide(sig_num, denom, out=np.ones_like(sig_num), where=ok)
    if prev is not None:
        sigma2 = np.where(ok, sigma2, prev.sigma2)
    np.maximum(sigma2, cfg.variance_floor, out=sigma2)

    ild_mu = ild_var = None
    if cfg.use_ild:
        ild_pooled = pooled or not cfg.ild_freq_dependent
        ild = _clamped_ild(features)
        w = nu.sum(axis=1, dtype=np.float64)            # (Q, K, M)
        w_sum = w.sum(axis=2)                           # (Q, K)
        mu_num = np.einsum("qkm,km->qk", w, ild)
        if ild_pooled:
            w_sum = w_sum.sum(axis=1, keepdims=True) * np.ones((1, k))
            mu_num = mu_num.sum(axis=1, keepdims=True) * np.ones((1, k))
        ok_ild = w_sum > 0
        ild_mu = np.divide(mu_num, w_sum, out=np.zeros_like(mu_num),
                           where=ok_ild)
        dev = ild[None, :, :] - ild_mu[:, :, None]
        var_num = np.einsum("qkm,qkm->qk", w, dev * dev)
        if ild_pooled:
            var_num = var_num.sum(axis=1, keepdims=True) * np.ones((1, k))
        ild_var = np.divide(var_num, w_sum,
                            out=np.full_like(var_num, ILD_INIT_VAR_DB2),
                            where=ok_ild)
        if prev is not None and prev.ild_mu is not None:
            ild_mu = np.where(ok_ild, ild_mu, prev.ild_mu)
            ild_var = np.where(ok_ild, ild_var, prev.ild_var)
        np.maximum(ild_var, ILD_VAR_FLOOR_DB2, out=ild_var)

    psi_garbage = 0.0
    if post.nu_garbage is not None:
        psi_garbage = float(post.nu_garbage.sum(dtype=np.float64) / n_points)

    # single-precision responsibilities leave ~1e-8 of mass unaccounted;
    # restore the exact mixing-weight constraint
    total = psi.sum() + psi_garbage
    psi /= total
    psi_garbage /= total

    return IpdModelParams(
        xi=xi, sigma2=sigma2, psi=psi,
        ild_mu=ild_mu, ild_var=ild_var,
        psi_garbage=psi_garbage,
        phat_delays=None if prev is None else prev.phat_delays,
        phat_fallback=False if prev is None else prev.phat_fallback,
    )


def posterior_masks(post: Posteriors, cfg: EmConfig):
    """Collapse responsibilities over the delay grid into per-source masks."""
    summed = post.nu.sum(axis=1, dtype=np.float64)
    masks = [SoftMask(np.clip(summed[i], 0.0, 1.0), f"source_{i + 1}")
             for i in range(cfg.n_sources)]
    garbage = None
    if post.nu_garbage is not None:
        garbage = SoftMask(
            np.clip(post.nu_garbage.astype(np.float64), 0.0, 1.0), "garbage")
    return masks, garbage


def tau_centroids(post: Posteriors, grid: TauGrid) -> np.ndarray:
    """Posterior-mass-weighted mean delay per source, in samples."""
    mass = post.nu.sum(axis=(2, 3), dtype=np.float64)   # (Q, T)
    total = mass.sum(axis=1)
    return (mass @ grid.values) / np.maximum(total, 1e-30)


def run_em(clip: AudioClip, cfg: EmConfig, diag_path=None) -> EmResult:
    """Full EM run: PHAT seeding, E/M alternations with an early exit once
    the relative log-likelihood gain drops below cfg.ll_tol, and final
    per-source masks (plus the garbage mask when enabled).

    Model complexity grows in stages: parameters stay tied across frequency
    for the first half of the iteration budget and (when freq_dependent is
    on) untie afterwards. Releasing per-frequency Gaussians from the start
    lets each component fit whatever occupies a bin regardless of source
    structure, which destroys the masks.

    `diag_path` appends one tab-separated line per iteration with the
    log-likelihood and the flattened mixing weights.
    """
    if clip.channels != 2:
        raise DataError("separation requires a stereo mixture")
    clip.require_rate()
    spec_l = stft(clip.channel(0), cfg.stft, clip.sample_rate)
    spec_r = stft(clip.channel(1), cfg.stft, clip.sample_rate)
    features = interaural_features(spec_l, spec_r)
    cube = residual_cube(features, cfg.tau_grid)

    params = _phat_initialize_from_specs(
        spec_l, spec_r, cfg,
        colocated_level_split=cfg.init_mode == "level")

    sink = open(diag_path, "a") if diag_path is not None else None
    try:
        lls: list[float] = []
        post = None
        for it in range(cfg.iterations):
            post, ll = _posteriors_and_ll(cube, features, params, cfg)
            lls.append(ll)
            if sink is not None:
                psi_flat = "\t".join(f"{v:.8e}" for v in params.psi.ravel())
                sink.write(f"{it}\t{ll:.8f}\t{params.psi_garbage:.8e}\t"
                           f"{psi_flat}\n")
            if len(lls) > 1 and (ll - lls[-2]) < cfg.ll_tol * abs(lls[-2]):
                break
            tie = (not cfg.freq_dependent) or (it < cfg.iterations // 2)
            params = m_step(features, post, cfg, prev=params, cube=cube,
                            tie_frequencies=tie)
    finally:
        if sink is not None:
            sink.close()

    masks, garbage = posterior_masks(post, cfg)
    return EmResult(params=params, masks=masks, garbage_mask=garbage,
                    log_likelihoods=lls, config=cfg, posteriors=post)
