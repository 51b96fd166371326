"""Loading, synthesis, transformation, and embedding of measurement series.

Generators are deterministic per 64-bit seed.  WAV samples are kept as raw
16-bit integers (as real numbers), which keeps them inside the +-2^15 box the
two-source mixing functions require.
"""

from __future__ import annotations

import csv
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Trajectory

MIX_BOX = 2.0**15  # admissible |value| for each channel fed to mix_two_sources


class TransformError(ValueError):
    pass


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def read_csv_trajectory(
    path, time_column: str | None = "t", dt: float | None = None
) -> Trajectory:
    """Read a trajectory from CSV: header row, optional time column, one
    column per channel.

    dt is taken from the time column (which must be uniform to 1e-9 relative)
    unless a fixed dt is given instead.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(header)
    data = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}: row {i + 2} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            try:
                val = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: row {i + 2}, column '{header[j]}': not a number: {cell!r}"
                ) from None
            if not np.isfinite(val):
                raise ValueError(
                    f"{path}: row {i + 2}, column '{header[j]}': non-finite value"
                )
            data[i, j] = val

    if time_column is not None and time_column in header:
        tcol = header.index(time_column)
        times = data[:, tcol]
        data = np.delete(data, tcol, axis=1)
        names = tuple(h for k, h in enumerate(header) if k != tcol)
        steps = np.diff(times)
        if len(steps) == 0 or steps[0] <= 0:
            raise ValueError(f"{path}: time column must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-9 * abs(steps[0]):
            raise ValueError(f"{path}: non-uniform timestamps in column '{time_column}'")
        dt_val = float(steps[0])
    else:
        if dt is None:
            raise ValueError("no time column found and no fixed dt given")
        dt_val = float(dt)
        names = tuple(header)
    return Trajectory(data, dt_val, names)


def write_csv_trajectory(traj: Trajectory, path, time_column: str = "t") -> None:
    """Write a trajectory as CSV with a time column; values use shortest
    round-trip decimal form so read-back is bit-exact."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([time_column, *traj.channel_names])
        for k in range(traj.n_samples):
            writer.writerow(
                [repr(float(k * traj.dt)), *(repr(float(v)) for v in traj.samples[k])]
            )


def read_wav_trajectory(path) -> Trajectory:
    """Read PCM 16-bit WAV; channels become measurement components, samples
    stay raw integers, dt = 1/sample_rate."""
    path = Path(path)
    with wave.open(str(path), "rb") as wf:
        if wf.getsampwidth() != 2:
            raise ValueError(f"{path}: only 16-bit PCM supported")
        n_chan = wf.getnchannels()
        rate = wf.getframerate()
        n = wf.getnframes()
        raw = wf.readframes(n)
    data = np.frombuffer(raw, dtype="<i2").astype(float).reshape(n, n_chan)
    names = tuple(f"ch{i + 1}" for i in range(n_chan))
    return Trajectory(data, 1.0 / rate, names)


def write_wav_trajectory(traj: Trajectory, path) -> None:
    """Write a trajectory as PCM 16-bit WAV; samples must already be integers
    in the 16-bit range."""
    data = traj.samples
    if np.any(np.abs(data) > 2**15 - 1) or np.any(data != np.round(data)):
        raise ValueError("samples must be integers within the 16-bit range")
    rate = int(round(1.0 / traj.dt))
    with wave.open(str(Path(path)), "wb") as wf:
        wf.setnchannels(traj.dim)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(data.astype("<i2").tobytes())


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def gen_sine(a: float, dt: float, n: int) -> Trajectory:
    """x[k] = a sin(k dt)."""
    if a == 0:
        raise ValueError("amplitude must be nonzero")
    if n < 3:
        raise ValueError("need n >= 3")
    t = np.arange(n) * dt
    return Trajectory(a * np.sin(t), dt, ("x",))


def gen_broadband(
    n: int,
    dt: float = 1.0 / 16000,
    seed: int = 0,
    amplitude: float = 1.0,
    n_tones: int = 24,
) -> Trajectory:
    """Smooth 1-D broadband signal: a sum of incommensurate sinusoids with
    seeded random frequencies, phases, and 1/f-ish amplitudes."""
    rng = np.random.default_rng(seed)
    t = np.arange(n) * dt
    # frequencies spread over ~2.5 decades below a fraction of Nyquist
    f_hi = 0.05 / dt
    freqs = f_hi * 10.0 ** (-2.5 * rng.random(n_tones))
    phases = rng.uniform(0, 2 * np.pi, n_tones)
    amps = rng.uniform(0.3, 1.0, n_tones) / np.sqrt(freqs / freqs.min())
    x = np.zeros(n)
    for f, p, amp in zip(freqs, phases, amps):
        x += amp * np.sin(2 * np.pi * f * t + p)
    x *= amplitude / np.max(np.abs(x))
    return Trajectory(x, dt, ("x",))


def gen_bounded_walk(
    n: int,
    seed: int = 0,
    dim: int = 1,
    box: float = 1.0,
    dt: float = 1.0,
    noise: str | tuple[str, ...] = "laplace",
    smooth: float = 0.5,
    step_scale: float = 0.02,
) -> Trajectory:
    """Bounded random walk with AR(1)-smoothed non-Gaussian velocity and
    reflecting box walls.

    noise picks the per-channel driving distribution ('laplace', 'uniform',
    or 'gauss'); mixing distributions across channels gives the channels
    distinct velocity kurtosis, which downstream frame solving relies on.
    """
    rng = np.random.default_rng(seed)
    kinds = (noise,) * dim if isinstance(noise, str) else tuple(noise)
    if len(kinds) != dim:
        raise ValueError("need one noise kind per channel")
    eps = np.empty((n, dim))
    for j, kind in enumerate(kinds):
        if kind == "laplace":
            eps[:, j] = rng.laplace(0.0, 1.0 / np.sqrt(2.0), n)
        elif kind == "uniform":
            eps[:, j] = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), n)
        elif kind == "gauss":
            eps[:, j] = rng.standard_normal(n)
        else:
            raise ValueError(f"unknown noise kind {kind!r}")
    pos = np.empty((n, dim))
    p = rng.uniform(-0.5 * box, 0.5 * box, dim)
    v = np.zeros(dim)
    step = step_scale * box
    for k in range(n):
        pos[k] = p
        v = smooth * v + (1.0 - smooth) * eps[k]
        p = p + step * v
        # reflect at the walls, flipping the velocity component
        for j in range(dim):
            if p[j] > box:
                p[j] = 2 * box - p[j]
                v[j] = -v[j]
            elif p[j] < -box:
                p[j] = -2 * box - p[j]
                v[j] = -v[j]
    names = tuple(f"s{i + 1}" for i in range(dim))
    return Trajectory(pos, dt, names)


# fixed 6-D lift of a 2-D latent: dominant linear part plus a small smooth
# nonlinear perturbation, injective because the linear part has rank 2
_LIFT_LINEAR = np.array(
    [
        [1.0, 0.3],
        [-0.4, 1.1],
        [0.7, -0.8],
        [0.2, 0.9],
        [-1.1, 0.5],
        [0.6, 0.6],
    ]
)
_LIFT_EPS = 0.05


def lift_map(latent: np.ndarray) -> np.ndarray:
    """The fixed 6-D lift used by gen_lifted_latent (points on rows)."""
    u = latent[..., 0]
    v = latent[..., 1]
    nonlin = np.stack(
        [
            np.sin(1.3 * u) * np.cos(0.7 * v),
            u * v,
            np.sin(0.9 * v),
            u**2 - v**2,
            np.cos(1.1 * u),
            u**3,
        ],
        axis=-1,
    )
    return latent @ _LIFT_LINEAR.T + _LIFT_EPS * nonlin


def distort_lift(lifted: np.ndarray) -> np.ndarray:
    """A fixed invertible distortion of the 6-D lift: per-channel monotone
    cubic followed by a fixed rotation-like mixing.  Composing it with
    lift_map yields a second, distinct lift of the same latent."""
    y = lifted + 0.03 * lifted**3
    rng = np.random.default_rng(987654321)
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    return y @ q.T


def gen_lifted_latent(
    n: int, seed: int, dt: float = 1.0
) -> tuple[Trajectory, Trajectory]:
    """Smooth bounded 2-D latent walk plus its fixed injective 6-D lift."""
    if n < 10**4:
        raise ValueError("need n >= 10^4")
    latent = gen_bounded_walk(
        n,
        seed=seed,
        dim=2,
        box=1.0,
        dt=dt,
        noise=("laplace", "uniform"),
        smooth=0.5,
        step_scale=0.015,
    )
    lifted = Trajectory(
        lift_map(latent.samples), dt, tuple(f"y{i + 1}" for i in range(6))
    )
    return latent, lifted


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransformSpec:
    """Instantaneous per-sample measurement transform.

    kinds:
      affine             params: scale (scalar or per-channel), offset
      monotone-polynomial  params: coeffs (ascending), domain (lo, hi);
                           monotonicity checked by dense derivative sampling
      paper-mixing       the fixed two-source nonlinear mixing map
      custom-table       params: x (increasing), y (strictly monotone);
                           linear interpolation
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in {"affine", "monotone-polynomial", "paper-mixing", "custom-table"}:
            raise TransformError(f"unknown transform kind {self.kind!r}")
        if self.kind == "monotone-polynomial":
            coeffs = np.asarray(self.params["coeffs"], dtype=float)
            lo, hi = self.params["domain"]
            xs = np.linspace(lo, hi, 4096)
            deriv = np.polyval(
                np.polyder(coeffs[::-1]), xs
            )  # coeffs stored ascending
            if not (np.all(deriv > 0) or np.all(deriv < 0)):
                raise TransformError(
                    "polynomial is not strictly monotonic on its domain"
                )
        if self.kind == "custom-table":
            x = np.asarray(self.params["x"], dtype=float)
            y = np.asarray(self.params["y"], dtype=float)
            if np.any(np.diff(x) <= 0):
                raise TransformError("table x must be strictly increasing")
            dy = np.diff(y)
            if not (np.all(dy > 0) or np.all(dy < 0)):
                raise TransformError("table y must be strictly monotone")

    @classmethod
    def identity(cls) -> "TransformSpec":
        return cls("affine", {"scale": 1.0, "offset": 0.0})


def apply_transform(traj: Trajectory, spec: TransformSpec) -> Trajectory:
    """Pointwise instantaneous transform; dt is unchanged."""
    x = traj.samples
    if spec.kind == "affine":
        scale = np.asarray(spec.params.get("scale", 1.0), dtype=float)
        offset = np.asarray(spec.params.get("offset", 0.0), dtype=float)
        out = x * scale + offset
    elif spec.kind == "monotone-polynomial":
        coeffs = np.asarray(spec.params["coeffs"], dtype=float)
        lo, hi = spec.params["domain"]
        if np.any(x < lo) or np.any(x > hi):
            raise TransformError("sample outside declared polynomial domain")
        out = np.polyval(coeffs[::-1], x)
    elif spec.kind == "paper-mixing":
        if traj.dim != 2:
            raise TransformError("paper-mixing needs a 2-channel trajectory")
        return mix_two_sources(traj)
    elif spec.kind == "custom-table":
        xt = np.asarray(spec.params["x"], dtype=float)
        yt = np.asarray(spec.params["y"], dtype=float)
        if np.any(x < xt[0]) or np.any(x > xt[-1]):
            raise TransformError("sample outside table domain")
        out = np.interp(x, xt, yt)
    else:  # pragma: no cover
        raise TransformError(spec.kind)
    names = tuple(f"{c}'" for c in traj.channel_names)
    return Trajectory(out, traj.dt, names)


def mix_two_sources(traj2: Trajectory) -> Trajectory:
    """The fixed nonlinear two-source mixing map on the +-2^15 box."""
    if traj2.dim != 2:
        raise TransformError("mixing expects exactly 2 channels")
    x1 = traj2.channel(0)
    x2 = traj2.channel(1)
    if np.any(np.abs(x1) > MIX_BOX) or np.any(np.abs(x2) > MIX_BOX):
        raise TransformError("input outside the +-2^15 mixing domain")
    mu1 = 0.763 * x1 + (958.0 - 0.0225 * x2) ** 1.5
    mu2 = 0.153 * x2 + (3.75e7 - 763.0 * x1 - 229.0 * x2) ** 0.5
    return Trajectory(np.stack([mu1, mu2], axis=1), traj2.dt, ("m1", "m2"))


def pca_embed(series: Trajectory, k: int) -> tuple[Trajectory, np.ndarray]:
    """Top-k principal components, each rescaled to unit variance.

    Returns the embedded trajectory and the per-component explained-variance
    fractions (relative to the total input variance).
    """
    x = series.samples
    d = x.shape[1]
    if not (1 <= k <= d):
        raise ValueError("need 1 <= k <= input dimension")
    if x.shape[0] <= d:
        raise ValueError("need more samples than input dimension")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / x.shape[0]
    total = np.trace(cov)
    if total <= 0:
        raise ValueError("zero-variance input")
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    comps = xc @ evecs[:, order]
    var = evals[order]
    if np.any(var <= 0):
        raise ValueError("degenerate principal component variance")
    comps = comps / np.sqrt(var)
    fractions = var / total
    names = tuple(f"pc{i + 1}" for i in range(k))
    return Trajectory(comps, series.dt, names), fractions
