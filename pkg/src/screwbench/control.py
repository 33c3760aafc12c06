"""Closed-loop screwing/unscrewing controller.

Force law: the axial-force setpoint tracks the running torque times a
human-derived force/torque ratio (with a safety margin), slew-rate limited
so the force builds gradually. A detected cam-out (sharp torque drop)
switches to the faster escalation rate. Position commands come from a PID
force loop with a spring feed-forward term. Pure step function: the caller
owns the loop and the state.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFitError
from .sim import Direction, FtSample


class Phase(str, enum.Enum):
    APPROACH = "approach"
    ENGAGE = "engage"
    DRIVE = "drive"
    SEATED = "seated"
    FREE = "free"
    DONE = "done"
    FAULT = "fault"


# Declared transition graph; done and fault are absorbing.
ALLOWED_TRANSITIONS = {
    Phase.APPROACH: {Phase.APPROACH, Phase.ENGAGE, Phase.FAULT},
    Phase.ENGAGE: {Phase.ENGAGE, Phase.DRIVE, Phase.FAULT},
    Phase.DRIVE: {Phase.DRIVE, Phase.SEATED, Phase.FREE, Phase.FAULT},
    Phase.SEATED: {Phase.SEATED, Phase.DONE, Phase.FAULT},
    Phase.FREE: {Phase.FREE, Phase.DONE, Phase.FAULT},
    Phase.DONE: {Phase.DONE},
    Phase.FAULT: {Phase.FAULT},
}


class Terminal(str, enum.Enum):
    NONE = "none"
    SEATED = "seated"
    FREE = "free"


@dataclass
class ToolCommand:
    z_cmd: float  # m, carriage position
    spindle_speed: float  # rad/s, signed (positive = screwing)


@dataclass
class ControllerConfig:
    direction: Direction = Direction.UNSCREWING
    nu: float = 106.0  # 1/m, force/torque gain from human data
    margin: float = 2.0  # multiplier on nu
    f_min: float = 1.0  # N
    f_max: float = 50.0  # N
    kp: float = 1.0e-4  # m/N
    ki: float = 5.0e-3  # m/(N·s)
    kd: float = 0.0  # m·s/N
    theta_slip: float = 0.5  # torque-drop fraction for cam-out detection
    tau_stop: float = 0.25  # N·m, seating threshold
    noise_floor: float = 0.01  # N·m, torque treated as zero below this
    window: int = 30  # samples in the torque moving window
    base_ramp: float = 3.0  # N/s, force-target slew rate
    slip_ramp: float = 8.0  # N/s, slew rate while slippage is detected
    k_spring_est: float = 5000.0  # N/m, feed-forward spring estimate
    spindle_speed: float = 2.0 * math.pi  # rad/s magnitude while driving
    approach_speed: float = 0.005  # m/s carriage advance before contact
    contact_threshold: float = 0.5  # N, force that marks contact
    travel_limit: float = 0.02  # m, carriage offset limit around contact
    integrator_limit: float = 4.0  # N·s anti-windup clamp
    overload_torque: float = 0.4  # N·m, fault threshold
    slip_limit: int = 2000  # fault after this many slip-detected steps
    free_spin_time: float = 2.0  # s extra spin to fully withdraw the screw

    def __post_init__(self):
        self.direction = Direction(self.direction)
        if not 0.0 < self.theta_slip < 1.0:
            raise ValueError("theta_slip must be in (0, 1)")
        if self.f_min > self.f_max:
            raise ValueError("f_min must be <= f_max")
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.tau_stop <= self.noise_floor:
            raise ValueError("tau_stop must exceed noise_floor")


@dataclass
class ControllerState:
    phase: Phase = Phase.APPROACH
    integrator: float = 0.0  # N·s
    prev_error: float = 0.0  # N
    torque_window: deque = field(default_factory=deque)
    force_target: float = 0.0  # N
    slip_count: int = 0  # slip-detected steps
    time_in_phase: float = 0.0  # s
    # loop-keeping fields
    z_cmd: float = 0.0
    contact_z_est: float = 0.0
    torque_seen: bool = False  # torque has exceeded the noise floor
    camout_events: int = 0  # rising edges of the slip detector
    camout_prev: bool = False


def new_controller_state(cfg: ControllerConfig) -> ControllerState:
    return ControllerState(torque_window=deque(maxlen=cfg.window))


def target_force(tau_filtered: float, cfg: ControllerConfig) -> float:
    """Force setpoint from torque: clamp(margin * nu * tau, f_min, f_max)."""
    if tau_filtered < 0:
        raise ValueError("tau_filtered must be >= 0")
    return min(cfg.f_max, max(cfg.f_min, cfg.margin * cfg.nu * tau_filtered))


def detect_camout(torque_window, cfg: ControllerConfig) -> bool:
    """Sharp torque drop: latest below theta_slip of the window maximum,
    with the maximum above the noise floor."""
    w = list(torque_window)
    if len(w) < 2:
        raise ValueError("window length must be >= 2")
    peak = max(w)
    return peak > cfg.noise_floor and w[-1] < cfg.theta_slip * peak


def detect_terminal(torque_window, direction: Direction,
                    cfg: ControllerConfig, engaged: bool = True) -> Terminal:
    """Completion detection.

    Screwing: seated when a sustained rise crosses tau_stop (latest at or
    above the threshold with the window tail strictly rising). Unscrewing:
    free when the whole window sits below the noise floor; `engaged` must
    say the torque has previously exceeded the floor.
    """
    w = list(torque_window)
    if len(w) < 2:
        raise ValueError("window length must be >= 2")
    direction = Direction(direction)
    if direction == Direction.SCREWING:
        if w[-1] < cfg.tau_stop:
            return Terminal.NONE
        tail = min(3, len(w) - 1)  # rising steps required
        if all(w[-i] > w[-i - 1] for i in range(1, tail + 1)):
            return Terminal.SEATED
        return Terminal.NONE
    if engaged and all(v < cfg.noise_floor for v in w):
        return Terminal.FREE
    return Terminal.NONE


def pid_force_step(state: ControllerState, f_meas: float, f_target: float,
                   dt: float, cfg: ControllerConfig) -> float:
    """One PID + feed-forward step.

    Returns the carriage offset from the estimated contact position:
    kp*e + ki*int(e) + kd*de/dt + f_target/k_spring_est, clamped to the
    travel limit. The integrator is held (anti-windup) whenever the
    unclamped command would exceed the travel limit.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    e = f_target - f_meas
    de = (e - state.prev_error) / dt
    integ = state.integrator + e * dt
    integ = min(cfg.integrator_limit, max(-cfg.integrator_limit, integ))
    u = cfg.kp * e + cfg.ki * integ + cfg.kd * de + f_target / cfg.k_spring_est
    if -cfg.travel_limit <= u <= cfg.travel_limit:
        state.integrator = integ
    else:
        u = min(cfg.travel_limit, max(-cfg.travel_limit, u))
    state.prev_error = e
    return u


def _enter(state: ControllerState, phase: Phase) -> None:
    state.phase = phase
    state.time_in_phase = 0.0


def _slew_force_target(state: ControllerState, camout: bool,
                       goal: float, dt: float, cfg: ControllerConfig) -> None:
    if camout:
        state.slip_count += 1
        if not state.camout_prev:
            state.camout_events += 1
        state.force_target = min(cfg.f_max,
                                 state.force_target + cfg.slip_ramp * dt)
    else:
        step = cfg.base_ramp * dt
        delta = goal - state.force_target
        state.force_target += min(step, max(-step, delta))
    state.force_target = min(cfg.f_max, max(cfg.f_min, state.force_target))
    state.camout_prev = camout


def update(state: ControllerState, sample: FtSample, dt: float,
           cfg: ControllerConfig):
    """Full state-machine step: (state, sample) -> (state, command).

    Mutates and returns `state`. Fault is the error channel; in-band sensor
    values never raise.
    """
    state.time_in_phase += dt
    hold = ToolCommand(z_cmd=state.z_cmd, spindle_speed=0.0)
    if state.phase in (Phase.DONE, Phase.FAULT):
        return state, hold
    if not (math.isfinite(sample.fz) and math.isfinite(sample.mz)):
        _enter(state, Phase.FAULT)
        return state, hold

    state.torque_window.append(sample.mz)
    if sample.mz > cfg.noise_floor:
        state.torque_seen = True
    if sample.mz > cfg.overload_torque:
        _enter(state, Phase.FAULT)
        return state, hold

    if state.phase == Phase.APPROACH:
        state.z_cmd += cfg.approach_speed * dt
        if sample.fz > cfg.contact_threshold:
            state.contact_z_est = state.z_cmd - sample.fz / cfg.k_spring_est
            state.force_target = cfg.f_min
            state.integrator = 0.0
            state.prev_error = 0.0
            _enter(state, Phase.ENGAGE)
        return state, ToolCommand(z_cmd=state.z_cmd, spindle_speed=0.0)

    sign = 1.0 if cfg.direction == Direction.SCREWING else -1.0
    w = state.torque_window
    spindle = sign * cfg.spindle_speed

    if state.phase in (Phase.ENGAGE, Phase.DRIVE):
        camout = len(w) >= 2 and detect_camout(w, cfg)
        tau_f = max(w)  # moving-window maximum: the torque envelope
        _slew_force_target(state, camout, target_force(tau_f, cfg), dt, cfg)

        # at most one phase transition per step
        if state.phase == Phase.ENGAGE and tau_f > cfg.noise_floor:
            _enter(state, Phase.DRIVE)
        elif state.phase == Phase.DRIVE:
            if state.slip_count > cfg.slip_limit:
                _enter(state, Phase.FAULT)
                return state, hold
            if len(w) >= 2:
                window_full = len(w) == cfg.window
                term = detect_terminal(w, cfg.direction, cfg,
                                       engaged=state.torque_seen and window_full)
                if (term == Terminal.SEATED
                        and cfg.direction == Direction.SCREWING):
                    _enter(state, Phase.SEATED)
                    spindle = 0.0
                elif (term == Terminal.FREE
                        and cfg.direction == Direction.UNSCREWING):
                    _enter(state, Phase.FREE)
    elif state.phase == Phase.SEATED:
        spindle = 0.0
        if state.time_in_phase >= dt:
            _enter(state, Phase.DONE)
            spindle = 0.0
    elif state.phase == Phase.FREE:
        # keep spinning briefly so the last threads fully disengage
        if state.time_in_phase >= cfg.free_spin_time:
            _enter(state, Phase.DONE)
            spindle = 0.0

    if state.phase in (Phase.DONE, Phase.FAULT):
        return state, ToolCommand(z_cmd=state.z_cmd, spindle_speed=0.0)

    offset = pid_force_step(state, sample.fz, state.force_target, dt, cfg)
    state.z_cmd = state.contact_z_est + offset
    return state, ToolCommand(z_cmd=state.z_cmd, spindle_speed=spindle)


@dataclass
class CalibrationResult:
    gain: float  # N per potentiometer unit
    offset: float  # N
    residual_rms: float  # N


def calibrate_force(pairs) -> CalibrationResult:
    """Least-squares line ref_force ~ gain * pot_reading + offset."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise DegenerateFitError("need at least 2 calibration pairs")
    x = np.asarray([p[0] for p in pairs], dtype=float)
    y = np.asarray([p[1] for p in pairs], dtype=float)
    if np.ptp(x) == 0.0:
        raise DegenerateFitError("potentiometer readings are constant")
    gain, offset = np.polyfit(x, y, 1)
    resid = y - (gain * x + offset)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return CalibrationResult(gain=float(gain), offset=float(offset),
                             residual_rms=rms)
