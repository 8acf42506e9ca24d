"""Test-data generators: a classical multi-machine swing simulator and planted group signals."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import root

from .errors import ConfigError, FormatError, IntegrationDivergedError
from .timeseries import AngleTraceSet, SamplingMeta

MAX_DT = 0.02
# angles beyond this are treated as a blow-up, not a slip
ANGLE_LIMIT = 1e6


@dataclass(frozen=True)
class Machine:
    id: str
    H: float
    D: float
    Pm: float
    E: float
    delta0: float | None = None
    omega0: float = 0.0


@dataclass
class SwingSystem:
    """Classical machines behind a reduced admittance matrix ``G + jB``."""

    machines: list
    G: np.ndarray
    B: np.ndarray
    nominal_hz: float = 60.0
    lines: list = field(default_factory=list)  # off-diagonal (i, j) pairs, i < j

    def __post_init__(self):
        m = len(self.machines)
        self.G = np.asarray(self.G, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        if self.G.shape != (m, m) or self.B.shape != (m, m):
            raise FormatError("admittance matrices must be M x M")
        if not (np.all(np.isfinite(self.G)) and np.all(np.isfinite(self.B))):
            raise FormatError("admittance entries must be finite")
        if not (np.array_equal(self.G, self.G.T) and np.array_equal(self.B, self.B.T)):
            raise FormatError("admittance matrix must be symmetric")
        for mach in self.machines:
            if not mach.H > 0:
                raise FormatError(f"machine {mach.id}: inertia H must be positive")
        if not self.lines:
            self.lines = [
                (i, j) for i in range(m) for j in range(i + 1, m) if self.G[i, j] or self.B[i, j]
            ]

    @property
    def ids(self) -> tuple:
        return tuple(mach.id for mach in self.machines)

    @property
    def omega_s(self) -> float:
        return 2 * math.pi * self.nominal_hz

    def inertia_coeff(self) -> np.ndarray:
        """2H / omega_s per machine."""
        return np.array([2 * mach.H for mach in self.machines]) / self.omega_s

    def index(self, machine_id) -> int:
        try:
            return self.ids.index(str(machine_id))
        except ValueError:
            raise FormatError(f"unknown machine {machine_id!r}") from None

    def electrical_power(self, delta, G=None, B=None) -> np.ndarray:
        G = self.G if G is None else G
        B = self.B if B is None else B
        E = np.array([mach.E for mach in self.machines])
        diff = delta[:, None] - delta[None, :]
        return E * ((B * np.sin(diff) + G * np.cos(diff)) @ E)


@dataclass(frozen=True)
class FaultEvent:
    """Multiply admittance entry (i, j) by ``scale`` during [t_start, t_end)."""

    t_start: float
    t_end: float
    i: str
    j: str
    scale: float = 0.0

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ConfigError(f"fault must have t_start < t_end, got {self.t_start}, {self.t_end}")
        if self.scale < 0:
            raise ConfigError(f"fault scale must be >= 0, got {self.scale}")


def load_system_json(path) -> SwingSystem:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read system file {path}: {exc}") from None
    return system_from_dict(doc)


def system_from_dict(doc) -> SwingSystem:
    try:
        machines = [
            Machine(
                id=str(m["id"]),
                H=float(m["H"]),
                D=float(m["D"]),
                Pm=float(m["Pm"]),
                E=float(m["E"]),
                delta0=None if m.get("delta0") is None else float(m["delta0"]),
                omega0=float(m.get("omega0", 0.0)),
            )
            for m in doc["machines"]
        ]
        ids = [m.id for m in machines]
        if len(set(ids)) != len(ids):
            raise FormatError("duplicate machine ids")
        pos = {mid: k for k, mid in enumerate(ids)}
        n = len(machines)
        G = np.zeros((n, n))
        B = np.zeros((n, n))
        lines = []
        for entry in doc["admittance"]:
            i, j = pos[str(entry["i"])], pos[str(entry["j"])]
            G[i, j] = G[j, i] = float(entry.get("G", 0.0))
            B[i, j] = B[j, i] = float(entry.get("B", 0.0))
            if i != j:
                lines.append((min(i, j), max(i, j)))
        return SwingSystem(
            machines=machines, G=G, B=B, nominal_hz=float(doc.get("nominal_hz", 60.0)), lines=lines
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed system description: {exc!r}") from None


def load_faults_json(path) -> list:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return [
            FaultEvent(
                t_start=float(f["t_start"]),
                t_end=float(f["t_end"]),
                i=str(f["i"]),
                j=str(f["j"]),
                scale=float(f.get("scale", 0.0)),
            )
            for f in doc
        ]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"cannot read fault schedule {path}: {exc!r}") from None


def default_system() -> SwingSystem:
    """Bundled 9-machine, three-area test system."""
    text = resources.files("gridcoherency").joinpath("data/nine_machine.json").read_text("utf-8")
    return system_from_dict(json.loads(text))


def default_faults() -> list:
    text = resources.files("gridcoherency").joinpath("data/nine_machine_faults.json").read_text("utf-8")
    doc = json.loads(text)
    return [FaultEvent(**{**f, "i": str(f["i"]), "j": str(f["j"])}) for f in doc]


def solve_equilibrium(system: SwingSystem) -> np.ndarray:
    """Angles with P_e = P_m everywhere, the first machine pinned at 0."""
    pm = np.array([m.Pm for m in system.machines])
    n = len(pm)
    if n == 1:
        return np.zeros(1)

    def resid(x):
        delta = np.concatenate(([0.0], x))
        return (pm - system.electrical_power(delta))[1:]

    sol = root(resid, np.zeros(n - 1), method="hybr", tol=1e-14)
    delta = np.concatenate(([0.0], sol.x))
    mismatch = np.max(np.abs(pm - system.electrical_power(delta)))
    if mismatch > 1e-9:
        raise ConfigError(f"no power-flow equilibrium found (mismatch {mismatch:.3g} pu)")
    return delta


def initial_state(system: SwingSystem):
    if all(m.delta0 is not None for m in system.machines):
        delta = np.array([m.delta0 for m in system.machines])
    else:
        delta = solve_equilibrium(system)
    omega = np.array([m.omega0 for m in system.machines])
    return delta, omega


def _admittance_at(system, faults, t, dt):
    G, B = system.G, system.B
    active = [f for f in faults if f.t_start <= t + 1e-9 * dt < f.t_end]
    if not active:
        return G, B
    G, B = G.copy(), B.copy()
    for f in active:
        i, j = system.index(f.i), system.index(f.j)
        G[i, j] *= f.scale
        B[i, j] *= f.scale
        if i != j:
            G[j, i] *= f.scale
            B[j, i] *= f.scale
    return G, B


def simulate_states(system: SwingSystem, faults=(), delta0=None, omega0=None, dt=0.01, t_end=10.0):
    """Fixed-step RK4 on the classical swing equations.

    The admittance in force during a step is the one active at the step's
    start time. Returns ``(delta, omega)``, each machines x (steps + 1),
    sampled every ``dt`` from t = 0.
    """
    if not 0 < dt <= MAX_DT:
        raise ConfigError(f"dt must lie in (0, {MAX_DT}], got {dt}")
    if delta0 is None or omega0 is None:
        d0, w0 = initial_state(system)
        delta0 = d0 if delta0 is None else delta0
        omega0 = w0 if omega0 is None else omega0
    delta = np.array(delta0, dtype=float)
    omega = np.array(omega0, dtype=float)
    if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(omega))):
        raise ConfigError("initial state must be finite")
    faults = list(faults)
    for f in faults:
        system.index(f.i), system.index(f.j)
    pm = np.array([m.Pm for m in system.machines])
    damp = np.array([m.D for m in system.machines])
    minv = 1.0 / system.inertia_coeff()

    steps = int(round(t_end / dt))
    out_d = np.empty((len(delta), steps + 1))
    out_w = np.empty_like(out_d)
    out_d[:, 0], out_w[:, 0] = delta, omega
    for k in range(steps):
        t = k * dt
        G, B = _admittance_at(system, faults, t, dt)

        def rhs(d, w):
            return w, minv * (pm - damp * w - system.electrical_power(d, G, B))

        k1d, k1w = rhs(delta, omega)
        k2d, k2w = rhs(delta + 0.5 * dt * k1d, omega + 0.5 * dt * k1w)
        k3d, k3w = rhs(delta + 0.5 * dt * k2d, omega + 0.5 * dt * k2w)
        k4d, k4w = rhs(delta + dt * k3d, omega + dt * k3w)
        delta = delta + dt / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
        omega = omega + dt / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
        if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(omega))) or np.max(np.abs(delta)) > ANGLE_LIMIT:
            raise IntegrationDivergedError(t + dt)
        out_d[:, k + 1], out_w[:, k + 1] = delta, omega
    return out_d, out_w


def integrate_swing(system: SwingSystem, faults=(), delta0=None, omega0=None, dt=0.01, t_end=10.0) -> AngleTraceSet:
    """Machine angles from :func:`simulate_states` as an angle trace set."""
    angles, _ = simulate_states(system, faults, delta0, omega0, dt, t_end)
    return AngleTraceSet(
        bus_ids=system.ids, angles=angles, meta=SamplingMeta(dt=dt, t0=0.0, count=angles.shape[1])
    )


@dataclass(frozen=True)
class GroupSpec:
    groups: list
    freq_hz: list
    amplitude: list
    phase_rad: list
    jitter: float = 0.0
    trend: float = 0.0

    def __post_init__(self):
        flat = [str(b) for g in self.groups for b in g]
        if len(set(flat)) != len(flat):
            raise ConfigError("planted groups must be disjoint")
        n = len(self.groups)
        if not (len(self.freq_hz) == len(self.amplitude) == len(self.phase_rad) == n):
            raise ConfigError("need one frequency, amplitude and phase per group")
        if any(not f > 0 for f in self.freq_hz):
            raise ConfigError("group frequencies must be positive")
        if self.jitter < 0:
            raise ConfigError("jitter must be >= 0")

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(
                groups=[[str(b) for b in g] for g in doc["groups"]],
                freq_hz=[float(x) for x in doc["freq_hz"]],
                amplitude=[float(x) for x in doc["amplitude"]],
                phase_rad=[float(x) for x in doc["phase_rad"]],
                jitter=float(doc.get("jitter", 0.0)),
                trend=float(doc.get("trend", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed group spec: {exc!r}") from None


def planted_group_signals(spec: GroupSpec, dt=0.01, t_end=10.0, seed=0) -> AngleTraceSet:
    """Angles ``trend*t + a_g*sin(2*pi*f_g*t + phi_g)`` plus independent per-bus jitter."""
    steps = int(round(t_end / dt))
    t = dt * np.arange(steps + 1)
    rng = np.random.default_rng(seed)
    rows, ids = [], []
    for members, f, a, phi in zip(spec.groups, spec.freq_hz, spec.amplitude, spec.phase_rad):
        base = spec.trend * t + a * np.sin(2 * np.pi * f * t + phi)
        for bus in members:
            ids.append(str(bus))
            rows.append(base + (spec.jitter * rng.standard_normal(t.size) if spec.jitter else 0.0))
    return AngleTraceSet(
        bus_ids=ids, angles=np.array(rows), meta=SamplingMeta(dt=dt, t0=0.0, count=t.size)
    )
