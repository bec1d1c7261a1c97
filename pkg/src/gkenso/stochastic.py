"""Stochastic delay model with a drifting delay, and spectral characterization.

The state is the perturbed anomaly theta about the warm equilibrium, so the
drift coefficients a = 1 - 3 T+^2 and b = 3 T+ always follow from alpha;
they are recomputed on access and never stored.  The multiplicative noise
sigma/(1 + theta^2) favours larger kicks near the (shifted) origin.

Physical time: one delay unit of the reference tau = 1.7 corresponds to
349 days, so model time t maps to t * 349 / (1.7 * 365) years.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, sosfiltfilt, welch

from . import _kernels
from .errors import BlowupError

__all__ = [
    "StochasticModel",
    "TspRun",
    "PsdEstimate",
    "BandPeak",
    "tau_schedule",
    "simulate_tsp",
    "to_physical_years",
    "from_physical_years",
    "welch_psd",
    "band_filter",
    "band_peak_ratio",
    "ensemble_median_psd",
]

DELTA_DAYS = 349.0
TAU_REF = 1.7
DAYS_PER_YEAR = 365.0

RNG_NAME = "numpy-pcg64"

_SCHEDULES = {"linear": 0, "triangle": 1}


@dataclass(frozen=True)
class StochasticModel:
    alpha: float
    sigma: float
    tau0: float
    tau1: float
    epsilon: float
    schedule: str = "linear"
    stratonovich: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        if not self.tau0 <= self.tau1:
            raise ValueError("tau0 must not exceed tau1")
        if self.tau0 <= 0.0:
            raise ValueError("tau0 must be positive")
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be nonnegative")
        if self.schedule not in _SCHEDULES:
            raise ValueError(f"schedule must be one of {sorted(_SCHEDULES)}")

    @property
    def t_plus(self) -> float:
        return float(np.sqrt(1.0 - self.alpha))

    @property
    def a_lin(self) -> float:
        return 1.0 - 3.0 * self.t_plus**2

    @property
    def b_quad(self) -> float:
        return 3.0 * self.t_plus


def tau_schedule(model: StochasticModel, t):
    """Delay value at time t >= 0: clamped linear ramp or triangle wave."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("the schedule is defined for t >= 0")
    if model.epsilon == 0.0 or model.tau1 == model.tau0:
        out = np.full_like(t, model.tau0)
        return float(out) if out.ndim == 0 else out
    if model.schedule == "linear":
        out = np.minimum(model.tau0 + model.epsilon * t, model.tau1)
    else:
        half = (model.tau1 - model.tau0) / model.epsilon
        phase = np.mod(t, 2.0 * half)
        out = np.where(
            phase <= half,
            model.tau0 + model.epsilon * phase,
            model.tau1 - model.epsilon * (phase - half),
        )
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TspRun:
    model: StochasticModel
    dt: float
    seed: int
    stride: int
    times: np.ndarray
    theta: np.ndarray
    tau_t: np.ndarray
    rng: str = field(default=RNG_NAME)

    def metadata(self) -> dict:
        return {
            "alpha": self.model.alpha,
            "sigma": self.model.sigma,
            "tau0": self.model.tau0,
            "tau1": self.model.tau1,
            "epsilon": self.model.epsilon,
            "schedule": self.model.schedule,
            "stratonovich": self.model.stratonovich,
            "dt": self.dt,
            "seed": self.seed,
            "stride": self.stride,
            "rng": self.rng,
        }


def _max_delay(model: StochasticModel) -> float:
    return model.tau1 if model.epsilon > 0.0 else model.tau0


def simulate_tsp(
    model: StochasticModel,
    history=None,
    dt: float = 2e-3,
    steps: int = 1_000_000,
    seed: int = 0,
    stride: int = 1,
) -> TspRun:
    """Euler-Maruyama path of the stochastic delay model.

    ``history`` may be a constant, a callable on [-tau_max, 0], or None
    for the default launch state theta = -2 T+ (near the cold equilibrium).
    The delayed value is linearly interpolated in the rolling buffer; the
    noise stream comes from a seeded PCG64 generator, so runs are
    bit-reproducible from (model, dt, steps, seed).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    tau_max = _max_delay(model)
    if model.tau0 < 2.0 * dt:
        raise ValueError("tau0 must be at least 2*dt for the delay lookup")
    n_hist = int(np.ceil(tau_max / dt - 1e-9)) + 1
    grid = np.linspace(-(n_hist - 1) * dt, 0.0, n_hist)

    if history is None:
        hist_vals = np.full(n_hist, -2.0 * model.t_plus)
    elif callable(history):
        hist_vals = np.array([float(history(s)) for s in grid])
    else:
        hist_vals = np.full(n_hist, float(history))

    th = np.empty(n_hist + steps)
    th[:n_hist] = hist_vals
    xi = np.random.Generator(np.random.PCG64(seed)).standard_normal(steps)

    n_samples = steps // stride + 1
    out_th = np.empty(n_samples)
    out_tau = np.empty(n_samples)
    status, done = _kernels.em_sdde(
        model.a_lin,
        model.alpha,
        model.b_quad,
        model.sigma,
        model.tau0,
        model.tau1,
        model.epsilon,
        _SCHEDULES[model.schedule],
        1 if model.stratonovich else 0,
        float(dt),
        n_hist,
        int(steps),
        xi,
        th,
        int(stride),
        out_th,
        out_tau,
    )
    if status != 0:
        raise BlowupError(
            f"stochastic path blew up after {done} steps (t = {done * dt:.4f})",
            time=done * dt,
        )
    times = np.arange(n_samples) * (stride * dt)
    for arr in (times, out_th, out_tau):
        arr.setflags(write=False)
    return TspRun(
        model=model,
        dt=float(dt),
        seed=int(seed),
        stride=int(stride),
        times=times,
        theta=out_th,
        tau_t=out_tau,
    )


def to_physical_years(t):
    """Model time to years: t * 349 days / (reference tau 1.7 * 365-day year)."""
    return np.multiply(t, DELTA_DAYS / (TAU_REF * DAYS_PER_YEAR))


def from_physical_years(years):
    return np.multiply(years, TAU_REF * DAYS_PER_YEAR / DELTA_DAYS)


@dataclass(frozen=True)
class PsdEstimate:
    frequency: np.ndarray  # cycles per year, zero bin removed
    power: np.ndarray

    @property
    def period_yr(self) -> np.ndarray:
        return 1.0 / self.frequency


def welch_psd(series, dt: float, segment_years: float = 120.0) -> PsdEstimate:
    """Welch-averaged periodogram in physical frequency units.

    Hann-windowed segments of ``segment_years`` with 50% overlap and
    per-segment mean removal; requires at least two overlapping segments.
    """
    x = np.asarray(series, dtype=float)
    dt_yr = float(to_physical_years(dt))
    nperseg = int(round(segment_years / dt_yr))
    if nperseg < 8:
        raise ValueError("segment too short for the sampling step")
    if x.size < int(np.ceil(1.5 * nperseg)):
        raise ValueError(
            f"series of {x.size} samples is shorter than two half-overlapping "
            f"segments of {nperseg}"
        )
    freq, power = welch(
        x,
        fs=1.0 / dt_yr,
        window="hann",
        nperseg=nperseg,
        noverlap=nperseg // 2,
        detrend="constant",
    )
    keep = freq > 0.0
    return PsdEstimate(frequency=freq[keep], power=power[keep])


def band_filter(series, dt: float, band: tuple[float, float]):
    """Zero-phase 4th-order Butterworth band-pass; the band is in period years."""
    yr_lo, yr_hi = band
    if not 0.0 < yr_lo < yr_hi:
        raise ValueError("band must satisfy 0 < yr_lo < yr_hi")
    dt_yr = float(to_physical_years(dt))
    fs = 1.0 / dt_yr
    f_lo, f_hi = 1.0 / yr_hi, 1.0 / yr_lo
    if f_hi >= 0.5 * fs:
        raise ValueError("band upper frequency is not resolvable at this sampling step")
    sos = butter(4, [f_lo, f_hi], btype="bandpass", fs=fs, output="sos")
    poles_ok = all(
        np.all(np.abs(np.roots(np.concatenate(([1.0], section[4:])))) < 1.0 - 1e-12)
        for section in sos
    )
    if not poles_ok:
        raise ValueError("filter design is unstable; the band is too narrow")
    return sosfiltfilt(sos, np.asarray(series, dtype=float))


@dataclass(frozen=True)
class BandPeak:
    period_yr: float
    peak_power: float
    flank_median: float

    @property
    def ratio(self) -> float:
        if self.flank_median > 0.0:
            return self.peak_power / self.flank_median
        return np.inf if self.peak_power > 0.0 else 0.0


def band_peak_ratio(psd: PsdEstimate, band_yr: tuple[float, float]) -> BandPeak:
    """Peak power inside a period band against the median of its half-octave flanks."""
    lo, hi = band_yr
    periods = psd.period_yr
    inside = (periods >= lo) & (periods <= hi)
    if not np.any(inside):
        raise ValueError(f"no spectral bins inside the {lo}-{hi} yr band")
    flank = ((periods >= lo / np.sqrt(2.0)) & (periods < lo)) | (
        (periods > hi) & (periods <= hi * np.sqrt(2.0))
    )
    if not np.any(flank):
        raise ValueError("no spectral bins in the flanking half-octaves")
    k = int(np.argmax(np.where(inside, psd.power, -np.inf)))
    return BandPeak(
        period_yr=float(periods[k]),
        peak_power=float(psd.power[k]),
        flank_median=float(np.median(psd.power[flank])),
    )


def ensemble_median_psd(
    model: StochasticModel,
    dt: float,
    steps: int,
    seeds,
    segment_years: float = 120.0,
    history=None,
    workers: int | None = None,
) -> PsdEstimate:
    """Median Welch PSD over an ensemble of seeds (identical grids by construction)."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")

    def one(seed):
        run = simulate_tsp(model, history=history, dt=dt, steps=steps, seed=seed)
        return welch_psd(run.theta, dt, segment_years)

    if workers:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            psds = list(pool.map(one, seeds))
    else:
        psds = [one(seed) for seed in seeds]
    power = np.median(np.stack([p.power for p in psds]), axis=0)
    return PsdEstimate(frequency=psds[0].frequency, power=power)
