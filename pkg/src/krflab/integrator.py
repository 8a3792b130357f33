"""Kahler-Ricci flow of the momentum profile.

Under the U(m)-invariant ansatz ``log det g = -m rho + (m-1) log phi + log phi'``
and the flow reduces to

    d phi / dt = d/drho log det g = (m-1) phi'/phi + phi''/phi' - m,

which is solved by backward Euler in flux form with a damped Newton
iteration.  The end values are pinned to the exact class coefficients
``a(t) = e - (m-1) t`` and ``b(t) = h - (m+1) t``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import kernels
from .cohomology import (KahlerClass, NotKahlerError, ScenarioKind, class_at, classify,
                         first_singular_time)
from .profile import (DEFAULT_L, DEFAULT_N, DegenerateProfileError, FlowProfile, ProfileError,
                      init_profile, make_grid, sigmoid)

log = logging.getLogger(__name__)

DT_UNDERFLOW = 1e-12
DT_GROWTH = 1.2
DT_CAP_FRACTION = 0.1


class StepFailure(RuntimeError):
    """Newton did not converge; the caller should retry with a smaller step."""


class SingularityReached(RuntimeError):
    """The step size underflowed before the requested stop time."""

    def __init__(self, msg, trajectory=None, last_profile=None):
        super().__init__(msg)
        self.trajectory = trajectory
        self.last_profile = last_profile


def pm_singular_time(m: int, h: float = 1.0) -> float:
    """Extinction time of ``h[H]`` on ``P^m`` (the formal ``e = 0`` class)."""
    return h / (m + 1.0)


def exact_pm_profile(m: int, t: float, rho) -> FlowProfile:
    """Homothetically shrinking Fubini-Study solution on ``P^m``.

    ``phi = (1 - (m+1) t) sigmoid(rho)``; the right-hand side of the reduced
    equation is ``-(m+1) sigmoid`` for every scale, so this solves the flow.
    """
    if not 0.0 <= t < pm_singular_time(m):
        raise ValueError(f"t={t} outside [0, 1/(m+1))")
    rho = np.asarray(rho, dtype=float)
    L = float(rho[-1])
    if not np.allclose(rho, make_grid(L, rho.size), rtol=0, atol=1e-12 * max(1.0, L)):
        raise ProfileError("exact profile needs the uniform symmetric grid")
    s = 1.0 - (m + 1.0) * t
    return FlowProfile(m, L, s * sigmoid(rho), t=t, a=0.0, b=s, validation=True)


@dataclass
class FlowConfig:
    """Settings for one flow run.

    ``dt_max`` and ``dt_init`` are absolute times; ``dt_max=None`` means
    ``2.5e-4 * T``.  With ``validation`` the run is the pure ``P^m`` flow of
    ``h[H]`` and ``c0.e`` must be 0.
    """

    c0: KahlerClass
    L: float = DEFAULT_L
    N: int = DEFAULT_N
    dt_init: float = 1e-5
    dt_max: float | None = None
    stop_fraction: float = 1e-3
    newton_tol: float = 1e-10
    newton_maxit: int = 20
    snap_uniform: int = 20
    snaps_per_decade: int = 20
    validation: bool = False

    def __post_init__(self):
        if not 0.0 < self.stop_fraction < 1.0:
            raise ValueError("stop_fraction must lie in (0, 1)")
        if self.dt_init <= 0:
            raise ValueError("dt_init must be positive")
        if self.dt_max is not None and self.dt_max <= 0:
            raise ValueError("dt_max must be positive")
        if self.N < 64 or self.L < 8:
            raise ProfileError("grid too coarse (need N >= 64, L >= 8)")
        if self.snap_uniform < 1 or self.snaps_per_decade < 1:
            raise ValueError("snapshot cadence must be positive")
        if self.validation:
            if self.c0.e != 0.0 or self.c0.h <= 0:
                raise NotKahlerError("validation mode needs a class h[H] with h > 0 and e = 0")
        elif not self.c0.is_kahler():
            raise NotKahlerError(f"class not Kähler: h={self.c0.h}, e={self.c0.e}")

    @property
    def T(self) -> float:
        if self.validation:
            return pm_singular_time(self.c0.m, self.c0.h)
        return first_singular_time(self.c0)

    @property
    def t_stop(self) -> float:
        return self.T * (1.0 - self.stop_fraction)

    @property
    def effective_dt_max(self) -> float:
        return self.dt_max if self.dt_max is not None else 2.5e-4 * self.T

    def refined(self, factor: int = 2) -> "FlowConfig":
        """Same run with ``N`` intervals, ``1/dt`` and the snapshot density
        multiplied by ``factor``.

        Snapshot spacing is refined too because the monitors difference
        across snapshots in time.
        """
        kw = asdict(self)
        kw["c0"] = self.c0
        kw["snap_uniform"] = self.snap_uniform * factor
        kw["snaps_per_decade"] = self.snaps_per_decade * factor
        kw["N"] = (self.N - 1) * factor + 1 if self.N % 2 == 1 else self.N * factor
        kw["dt_init"] = self.dt_init / factor
        kw["dt_max"] = self.effective_dt_max / factor
        return FlowConfig(**kw)

    def snapshot_times(self) -> np.ndarray:
        """Uniform on ``[0, 0.9 T]``, then geometric in ``T - t`` up to ``t_stop``."""
        T, t_stop = self.T, self.t_stop
        uni = np.linspace(0.0, 0.9 * T, self.snap_uniform + 1)
        decades = math.log10(0.1 / self.stop_fraction)
        times = list(uni[uni < t_stop])
        if decades > 0:
            k = int(math.ceil(decades * self.snaps_per_decade - 1e-9))
            gaps = 0.1 * T * 10.0 ** (-np.arange(1, k + 1) / self.snaps_per_decade)
            times += [T - g for g in gaps if T - g < t_stop]
        times.append(t_stop)
        return np.array(sorted(set(times)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c0"] = self.c0.as_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FlowConfig":
        d = dict(d)
        c0 = d.pop("c0")
        if not isinstance(c0, KahlerClass):
            c0 = KahlerClass(**c0)
        allowed = set(cls.__dataclass_fields__) - {"c0"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown FlowConfig fields: {sorted(unknown)}")
        return cls(c0=c0, **d)


@dataclass
class FlowTrajectory:
    """Snapshots of one run plus the step statistics needed by the monitors."""

    config: FlowConfig
    snapshots: list = field(default_factory=list)
    dt_last: list = field(default_factory=list)
    newton_iters: list = field(default_factory=list)
    n_steps: int = 0
    n_rejected: int = 0
    completed: bool = False

    @property
    def T_predicted(self) -> float:
        return self.config.T

    @property
    def scenario(self) -> ScenarioKind | None:
        if self.config.validation:
            return None
        return classify(self.config.c0)

    @property
    def c0(self) -> KahlerClass:
        return self.config.c0

    @property
    def m(self) -> int:
        return self.config.c0.m

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.snapshots])

    @property
    def initial(self) -> FlowProfile:
        return self.snapshots[0]

    def __len__(self):
        return len(self.snapshots)

    def check_invariants(self) -> None:
        times = self.times
        if np.any(np.diff(times) <= 0) or np.any(times >= self.T_predicted):
            raise DegenerateProfileError("snapshot times not increasing below T")
        b0 = self.snapshots[0].b
        for p in self.snapshots:
            p.check_invariants(b0)
            if not self.config.validation:
                c = class_at(self.c0, p.t)
                if abs(p.a - c.e) > 1e-9 or abs(p.b - c.h) > 1e-9:
                    raise DegenerateProfileError(f"class data drifted at t={p.t}")


def boundary_values(p: FlowProfile, t_new: float, c0: KahlerClass | None) -> tuple[float, float, float, float]:
    """``(a, b, phi(-L), phi(L))`` at ``t_new``.

    Blow-up runs pin to the class coefficients; validation runs pin to the
    exact shrinking Fubini-Study values ``b sigmoid(+-L)``.
    """
    m = p.m
    if p.validation:
        b = p.b - (m + 1) * (t_new - p.t)
        s = sigmoid(np.array([-p.L, p.L]))
        return 0.0, b, float(b * s[0]), float(b * s[1])
    if c0 is not None:
        c = class_at(c0, t_new)
        a, b = c.e, c.h
    else:
        a = p.a - (m - 1) * (t_new - p.t)
        b = p.b - (m + 1) * (t_new - p.t)
    return a, b, a, b


def step(p: FlowProfile, dt: float, c0: KahlerClass | None = None,
         tol: float = 1e-10, maxit: int = 20) -> tuple[FlowProfile, int]:
    """One backward-Euler step of size ``dt``.

    Returns the new profile and the number of Newton iterations.  Raises
    :class:`StepFailure` if Newton stalls or cannot keep the profile
    strictly increasing.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not p.is_monotone():
        raise DegenerateProfileError(f"input profile degenerate at t={p.t}")
    t_new = p.t + dt
    a, b, lo, hi = boundary_values(p, t_new, c0)
    if not hi > lo:
        raise StepFailure("boundary values crossed")
    old = p.phi
    # affine predictor in phi-space keeps the guess monotone and matches the pins
    beta = (hi - lo) / (old[-1] - old[0])
    phi = lo + beta * (old - old[0])
    phi[0], phi[-1] = lo, hi
    h, m = p.h, p.m
    # relative test per node: the tails are tiny and feed second differences
    floor = 1e-12 * max(abs(hi), abs(lo))
    def small(d, x):
        return float(np.max(np.abs(d) / np.maximum(np.abs(x[1:-1]), floor))) <= tol
    for it in range(1, maxit + 1):
        delta, res = kernels.be_newton_direction(phi, old, h, dt, m)
        if delta is None or not np.all(np.isfinite(delta)):
            raise StepFailure("singular Newton system")
        lam = 1.0
        while True:
            trial = phi.copy()
            trial[1:-1] += lam * delta
            r = kernels.be_residual(trial, old, h, dt, m)
            if r is not None:
                rn = float(np.abs(r).max())
                if rn <= res or small(lam * delta, trial):
                    break
            lam *= 0.5
            if lam < 1.0 / 1024:
                raise StepFailure(f"line search failed at Newton iteration {it}")
        phi = trial
        if small(lam * delta, phi):
            new = FlowProfile(m, p.L, phi, t=t_new, a=a, b=b, validation=p.validation)
            return new, it
    raise StepFailure(f"Newton did not converge in {maxit} iterations")


def run_flow(cfg: FlowConfig, initial: FlowProfile | None = None) -> FlowTrajectory:
    """Integrate from ``initial`` (default: the sigmoid reference metric) to ``t_stop``.

    Step size adapts: halved on failure, grown by 1.2 on success, capped by
    ``dt_max`` and by ``0.1 (T - t)``.  On step-size underflow a
    :class:`SingularityReached` carrying the partial trajectory is raised.
    """
    if initial is None:
        if cfg.validation:
            initial = exact_pm_profile(cfg.c0.m, 0.0, make_grid(cfg.L, cfg.N))
            if cfg.c0.h != 1.0:
                initial = initial.scaled(cfg.c0.h)
        else:
            initial = init_profile(cfg.c0, cfg.L, cfg.N)
    T = cfg.T
    c0 = None if cfg.validation else cfg.c0
    targets = list(cfg.snapshot_times())
    traj = FlowTrajectory(cfg)
    traj.snapshots.append(initial)
    traj.dt_last.append(0.0)
    traj.newton_iters.append(0)
    targets = [s for s in targets if s > 0.0]

    p = initial
    dt = cfg.dt_init
    dt_max = cfg.effective_dt_max
    iters_since = 0
    last_dt = 0.0
    while targets:
        nxt = targets[0]
        dt_eff = min(dt, DT_CAP_FRACTION * (T - p.t), dt_max)
        clipped = p.t + dt_eff >= nxt - 1e-14 * T
        if clipped:
            dt_eff = nxt - p.t
        try:
            new, its = step(p, dt_eff, c0, cfg.newton_tol, cfg.newton_maxit)
        except (StepFailure, FloatingPointError) as exc:
            traj.n_rejected += 1
            dt = 0.5 * dt_eff
            log.debug("step rejected at t=%.6g (dt=%.3g): %s", p.t, dt_eff, exc)
            if dt < DT_UNDERFLOW:
                raise SingularityReached(
                    f"step size underflow at t={p.t:.10g} (T={T:.10g})", traj, p) from exc
            continue
        traj.n_steps += 1
        iters_since += its
        last_dt = dt_eff
        if clipped:
            new = new.replace(t=nxt)
            targets.pop(0)
            traj.snapshots.append(new)
            traj.dt_last.append(last_dt)
            traj.newton_iters.append(iters_since)
            iters_since = 0
        else:
            dt = DT_GROWTH * dt_eff
        p = new
    traj.completed = True
    return traj


def max_error_vs_exact(traj: FlowTrajectory) -> np.ndarray:
    """Max-norm distance of each snapshot to the exact ``P^m`` solution."""
    if not traj.config.validation:
        raise ValueError("exact comparison needs a validation-mode trajectory")
    h = traj.config.c0.h
    errs = []
    for p in traj.snapshots:
        ex = exact_pm_profile(p.m, p.t / h, p.rho).phi * h
        errs.append(float(np.abs(p.phi - ex).max()))
    return np.array(errs)
