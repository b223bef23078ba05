"""Exact event-driven simulation of the relay feedback loop.

The closed loop is  x' = A x - B sign(C x)  with an ideal relay.  Between
switches the dynamics are affine, so states are propagated in closed form
through the matrix exponential; switching instants are located as first
zeros of the scalar output along the affine flow (forward march plus Brent
refinement), never by fixed-step integration.

Sign conventions: ``sign=+1`` means the relay output is +1 and the active
field is A x - B; exits from the negative sign reuse the central-symmetry
identities  tau_-(x) = tau_+(-x)  and  psi_-(x) = -psi_+(-x).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import numerics
from .errors import InvalidStartError, NoCrossingError, SlidingError
from .plant import StateSpace

#: |C x| below PLANE_TOL * (1 + ||x||) counts as "on the switching plane".
PLANE_TOL = 1e-10

#: Output-speed magnitudes below this raise the grazing flag.
GRAZE_TOL = 1e-8


@dataclass(frozen=True)
class RelayState:
    """Plant state, current relay output, and time."""

    x: np.ndarray
    relay_sign: int
    t: float


@dataclass(frozen=True)
class SwitchEvent:
    """A transversal arrival on the switching plane.

    ``transversal_speed`` is the output derivative under the incoming field,
    C (A x - s B); the crossing is flagged as grazing when its magnitude is
    numerically zero.
    """

    t: float
    x: np.ndarray
    incoming_sign: int
    transversal_speed: float
    grazing_flag: bool


@dataclass
class Trajectory:
    """Piecewise-affine trajectory: per-segment records, the switch events,
    an optional dense sample grid, and the state reached at the end."""

    segments: list[tuple[np.ndarray, float, int]] = field(default_factory=list)
    events: list[SwitchEvent] = field(default_factory=list)
    times: np.ndarray | None = None
    states: np.ndarray | None = None
    relay_signs: np.ndarray | None = None
    certified: bool = True
    final_state: RelayState | None = None


@dataclass(frozen=True)
class SlidingReport:
    """Whether the simulation hit the sliding set (no non-sliding escape)."""

    entered_sliding: bool
    entry_time: float | None = None
    entry_state: np.ndarray | None = None


class _AffineFlow:
    """Closed-form evaluation of the flow of x' = A x - s B.

    Uses the eigendecomposition of A when it is well conditioned (fast,
    vectorizable in t); falls back to scipy's Pade matrix exponential
    otherwise.  Singular A (pole at the origin) is handled by propagating
    the augmented state [x; 1] with the constant input folded in, so no
    formula ever needs A^{-1}.
    """

    _FAST_COND_LIMIT = 1e4

    def __init__(self, ss: StateSpace):
        self.A = np.asarray(ss.A, dtype=float)
        self.B = np.asarray(ss.B, dtype=float)
        self.C = np.asarray(ss.C, dtype=float)
        self.n = self.A.shape[0]
        lam = np.linalg.eigvals(self.A)
        self.eigenvalues = lam
        scale = max(1.0, np.abs(lam).max())
        self.singular = bool(np.abs(lam).min() < 1e-12 * scale)
        self.spectral_abscissa = float(lam.real.max())
        self.is_hurwitz = self.spectral_abscissa < 0.0
        self.slowest_decay = -self.spectral_abscissa if self.is_hurwitz else None

        if not self.singular:
            self.x_eq = np.linalg.solve(self.A, self.B)  # equilibrium of x' = A x - B
        else:
            self.x_eq = None

        self._fast = False
        if not self.singular:
            w, V = np.linalg.eig(self.A)
            cond = np.linalg.cond(V)
            if np.isfinite(cond) and cond < self._FAST_COND_LIMIT:
                self._fast = True
                self._lam = w
                self._V = V
                self._Vinv = np.linalg.inv(V)
                self._CV = self.C @ V

    # -- matrix exponential -------------------------------------------------
    def expAt(self, t: float) -> np.ndarray:
        if self._fast:
            return ((self._V * np.exp(self._lam * t)) @ self._Vinv).real
        return numerics.expm(self.A, t)

    # -- trajectory of x' = A x - s B starting at xi ------------------------
    def state(self, xi: np.ndarray, s: int, t: float) -> np.ndarray:
        if self.singular:
            M = np.zeros((self.n + 1, self.n + 1))
            M[: self.n, : self.n] = self.A
            M[: self.n, self.n] = -s * self.B
            z = scipy.linalg.expm(M * t) @ np.append(xi, 1.0)
            return z[: self.n]
        dev = xi - s * self.x_eq
        if self._fast:
            w = self._Vinv @ dev
            return (self._V @ (w * np.exp(self._lam * t))).real + s * self.x_eq
        return self.expAt(t) @ dev + s * self.x_eq

    def output(self, xi: np.ndarray, s: int, t):
        """C x(t); accepts scalar or array t (array requires nonsingular A)."""
        if self.singular:
            return float(self.C @ self.state(xi, s, float(t)))
        dev = xi - s * self.x_eq
        y_inf = s * float(self.C @ self.x_eq)
        scalar = np.ndim(t) == 0
        if self._fast:
            coef = self._CV * (self._Vinv @ dev)
            ta = np.atleast_1d(np.asarray(t, dtype=float))
            vals = (coef @ np.exp(np.outer(self._lam, ta))).real + y_inf
            return float(vals[0]) if scalar else vals
        if scalar:
            return float(self.C @ (self.expAt(float(t)) @ dev)) + y_inf
        return np.array([float(self.C @ (self.expAt(tk) @ dev)) for tk in np.asarray(t)]) + y_inf

    def output_speed(self, x: np.ndarray, s: int) -> float:
        """Output derivative C (A x - s B) at a state under relay sign s."""
        return float(self.C @ (self.A @ x - s * self.B))


class RelaySystem:
    """Relay feedback loop around a realized plant.

    Precomputes the affine-flow machinery once so that exit times, exit
    maps, and whole simulations can be evaluated repeatedly at low cost.

    Parameters
    ----------
    ss : StateSpace
        Observer-canonical realization of the plant.
    step_hint : float, optional
        Marching step for crossing detection.  Pass a quarter of the
        minimum inter-switch bound when one is available; the default is
        t_max / 1e4.
    t_max : float, optional
        Default search horizon for exit times; defaults to 50 slow time
        constants (50 / min |Re eigenvalue|) for a stable plant, which the
        finiteness of exit times makes a generous certificate horizon.
    """

    def __init__(self, ss: StateSpace, *, step_hint: float | None = None,
                 t_max: float | None = None):
        self.ss = ss
        self.flow = _AffineFlow(ss)
        if t_max is None:
            if self.flow.is_hurwitz:
                t_max = 50.0 / min(abs(self.flow.eigenvalues.real))
            else:
                t_max = 100.0
        self.t_max = float(t_max)
        self.step_hint = float(step_hint) if step_hint is not None else self.t_max / 1e4
        self.b_tail = float(ss.B[-1])  # C B, the output-derivative jump half

    # -- exit computations ---------------------------------------------------
    def exit_time(self, xi: np.ndarray, sign: int = +1,
                  t_max: float | None = None) -> float:
        """First time the output crosses zero under fixed relay sign.

        The start must satisfy sign * C xi >= 0 (on-plane starts must depart
        consistently).  Raises NoCrossingError("quiescent ...") when the
        output never crosses before the horizon, which cannot happen for a
        stable plant with positive DC gain.
        """
        xi = np.asarray(xi, dtype=float)
        s = int(sign)
        if s not in (+1, -1):
            raise ValueError("sign must be +1 or -1")
        horizon = float(t_max) if t_max is not None else self.t_max
        y0 = float(self.flow.C @ xi)
        scale = 1.0 + float(np.linalg.norm(xi))
        # tolerate slightly wrong-sided starts: the analytic continuation of
        # the crossing time exists there and finite-difference probing of the
        # exit map relies on it
        if s * y0 < -1e-3 * scale:
            raise InvalidStartError(
                f"start output {y0:g} is on the wrong side for sign {s:+d}")
        if abs(y0) <= PLANE_TOL * scale:
            depart = s * self.flow.output_speed(xi, s)
            if depart < -GRAZE_TOL:
                # the flow leaves the sign region transversally at once; the
                # first exit is the start itself
                return 0.0

        f = lambda t: s * self.flow.output(xi, s, t)
        try:
            return numerics.find_first_root(
                f, 0.0, horizon, self.step_hint,
                vectorized=not self.flow.singular, check_grazing=False,
                allow_negative_start=True)
        except NoCrossingError as exc:
            raise NoCrossingError(
                f"quiescent: output does not cross zero within {horizon:g} "
                "time units (plant is not restless from this state)") from exc

    def exit_event(self, xi: np.ndarray, sign: int = +1,
                   t_max: float | None = None) -> tuple[float, np.ndarray, SwitchEvent]:
        """Exit time, landing state, and the corresponding SwitchEvent.

        The landing state is corrected by one Newton step along the flow so
        the residual output is at roundoff level rather than at the root
        finder's tolerance; this prevents drift over thousands of switches.
        """
        xi = np.asarray(xi, dtype=float)
        s = int(sign)
        tau = self.exit_time(xi, s, t_max)
        x_land = self.flow.state(xi, s, tau)
        speed = self.flow.output_speed(x_land, s)
        if abs(speed) > GRAZE_TOL:
            tau = tau - float(self.flow.C @ x_land) / speed
            x_land = self.flow.state(xi, s, tau)
            speed = self.flow.output_speed(x_land, s)
        grazing = abs(speed) <= GRAZE_TOL
        event = SwitchEvent(t=tau, x=x_land, incoming_sign=s,
                            transversal_speed=speed, grazing_flag=grazing)
        return tau, x_land, event

    def exit_map(self, xi: np.ndarray, sign: int = +1) -> np.ndarray:
        """Landing state on the switching plane: psi(xi; 1) under ``sign``."""
        _, x_land, _ = self.exit_event(xi, sign)
        return x_land

    def kth_exit_map(self, xi: np.ndarray, k: int,
                     collect_events: bool = False):
        """k-fold exit map with alternating sign flips.

        psi(x; k) = psi(-psi(x; k-1); 1), evaluated with the positive-sign
        flow throughout via the central symmetry of the loop.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        x = np.asarray(xi, dtype=float)
        events: list[SwitchEvent] = []
        for j in range(k):
            try:
                _, x, ev = self.exit_event(x, +1)
            except (NoCrossingError, InvalidStartError) as exc:
                raise NoCrossingError(
                    f"iterate {j + 1} of {k} failed: {exc}") from exc
            events.append(ev)
            if j < k - 1:
                x = -x
        if collect_events:
            return x, events
        return x

    # -- relay sign selection on the plane ------------------------------------
    def _select_sign_on_plane(self, x: np.ndarray):
        """Non-sliding relay output at an on-plane state.

        Returns (sign, both_depart) or raises SlidingError when both fields
        aim at the plane (possible only when C B > 0).  When both fields
        depart (the repelling strip |x_{n-1}| < |C B|), +1 is chosen
        deterministically.
        """
        d_plus = self.flow.output_speed(x, +1)   # y' under relay output +1
        d_minus = self.flow.output_speed(x, -1)  # y' under relay output -1
        plus_departs = d_plus >= 0.0
        minus_departs = d_minus <= 0.0
        if plus_departs and minus_departs:
            return +1, True
        if plus_departs:
            return +1, False
        if minus_departs:
            return -1, False
        raise SlidingError("sliding set reached: both vector fields point "
                           "at the switching plane")

    # -- full simulation -------------------------------------------------------
    def simulate(self, x0: np.ndarray, t_end: float, *,
                 dense_dt: float | None = None,
                 max_switches: int = 1_000_000) -> tuple[Trajectory, SlidingReport]:
        """Simulate the relay loop from ``x0`` for ``t_end`` time units.

        Propagation between switches is exact (matrix exponential); switch
        states are appended as events.  If the state reaches the sliding set
        where no non-sliding continuation exists, the trajectory stops there
        and the SlidingReport says so.  Grazing arrivals mark the trajectory
        as non-certified but the simulation continues.
        """
        if t_end <= 0:
            raise ValueError("t_end must be positive")
        x = np.asarray(x0, dtype=float).copy()
        t = 0.0
        traj = Trajectory()
        sliding = SlidingReport(False)

        dense_t: list[np.ndarray] = []
        dense_x: list[np.ndarray] = []
        dense_u: list[np.ndarray] = []

        y0 = float(self.flow.C @ x)
        scale = 1.0 + float(np.linalg.norm(x))
        if abs(y0) <= PLANE_TOL * scale:
            try:
                sign, _ = self._select_sign_on_plane(x)
            except SlidingError:
                return traj, SlidingReport(True, 0.0, x)
        else:
            sign = +1 if y0 > 0 else -1

        while t < t_end and len(traj.events) < max_switches:
            remaining = t_end - t
            try:
                tau, x_land, ev = self.exit_event(x, sign, t_max=self.t_max)
            except NoCrossingError:
                tau, x_land, ev = np.inf, None, None

            seg_len = min(tau, remaining)
            if dense_dt is not None:
                m = max(int(np.ceil(seg_len / dense_dt)), 1)
                ts = np.linspace(0.0, seg_len, m + 1)
                xs = np.stack([self.flow.state(x, sign, tk) for tk in ts])
                dense_t.append(t + ts)
                dense_x.append(xs)
                dense_u.append(np.full(len(ts), sign, dtype=float))

            traj.segments.append((x, seg_len, sign))
            if tau >= remaining:
                traj.final_state = RelayState(self.flow.state(x, sign, remaining),
                                              sign, t_end)
                break

            t += tau
            x = x_land
            traj.events.append(SwitchEvent(t=t, x=x, incoming_sign=ev.incoming_sign,
                                           transversal_speed=ev.transversal_speed,
                                           grazing_flag=ev.grazing_flag))
            if ev.grazing_flag:
                traj.certified = False
            try:
                new_sign, _ = self._select_sign_on_plane(x)
            except SlidingError:
                sliding = SlidingReport(True, t, x)
                break
            sign = new_sign
            if len(traj.events) >= max_switches:
                traj.final_state = RelayState(x, sign, t)

        if dense_dt is not None and dense_t:
            traj.times = np.concatenate(dense_t)
            traj.states = np.concatenate(dense_x)
            traj.relay_signs = np.concatenate(dense_u)
        return traj, sliding


# ---------------------------------------------------------------------------
# module-level operation wrappers


def exit_time(ss: StateSpace, xi, sign: int = +1, t_max: float | None = None,
              step_hint: float | None = None) -> float:
    """First exit time from ``sign`` for the plant ``ss`` started at ``xi``."""
    return RelaySystem(ss, step_hint=step_hint).exit_time(xi, sign, t_max)


def exit_map(ss: StateSpace, xi, sign: int = +1,
             step_hint: float | None = None) -> np.ndarray:
    """First exit map from ``sign``: the landing state on the plane."""
    return RelaySystem(ss, step_hint=step_hint).exit_map(xi, sign)


def kth_exit_map(ss: StateSpace, xi, k: int, collect_events: bool = False,
                 step_hint: float | None = None):
    """k-th exit map with the alternating sign recursion."""
    return RelaySystem(ss, step_hint=step_hint).kth_exit_map(xi, k, collect_events)


def simulate(ss: StateSpace, x0, t_end: float, *, dense_dt: float | None = None,
             step_hint: float | None = None,
             max_switches: int = 1_000_000) -> tuple[Trajectory, SlidingReport]:
    """Event-driven simulation of the relay loop (see RelaySystem.simulate)."""
    return RelaySystem(ss, step_hint=step_hint).simulate(
        x0, t_end, dense_dt=dense_dt, max_switches=max_switches)


# ---------------------------------------------------------------------------
# export helpers


def trajectory_to_csv(traj: Trajectory, path, *, version: str = "") -> None:
    """Write the dense samples as CSV: t, x_1..x_n, u, is_switch."""
    if traj.times is None:
        raise ValueError("trajectory has no dense samples; simulate with dense_dt")
    n = traj.states.shape[1]
    switch_times = {round(ev.t, 12) for ev in traj.events}
    with open(path, "w", newline="") as fh:
        fh.write(f"# relayosc {version}; units: t in seconds, x dimensionless\n")
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x_{i+1}" for i in range(n)] + ["u", "is_switch"])
        for t, xrow, u in zip(traj.times, traj.states, traj.relay_signs):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in xrow]
                            + [repr(float(u)), int(round(t, 12) in switch_times)])


def events_to_json(traj: Trajectory, sliding: SlidingReport, *, version: str = "") -> str:
    """Serialize the switch-event log (and sliding report) to JSON."""
    payload = {
        "schema_version": 1,
        "toolkit_version": version,
        "certified": traj.certified,
        "events": [
            {
                "t": ev.t,
                "x": [float(v) for v in ev.x],
                "incoming_sign": ev.incoming_sign,
                "transversal_speed": ev.transversal_speed,
                "grazing_flag": ev.grazing_flag,
            }
            for ev in traj.events
        ],
        "sliding": {
            "entered_sliding": sliding.entered_sliding,
            "entry_time": sliding.entry_time,
            "entry_state": None if sliding.entry_state is None
            else [float(v) for v in sliding.entry_state],
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True)
