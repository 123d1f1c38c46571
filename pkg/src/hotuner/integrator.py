"""Fixed-step explicit Euler simulation of the tuner family.

One step is: evaluate the signal, apply the online recording rule (for
buffer-driven kinds running online), emit an output row if due, evaluate the
field with the current buffer, update the state. Recording therefore takes
effect from the very step at which a sample is kept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .databuffer import DataBuffer, maybe_record
from .dynamics import (
    BUFFER_KINDS,
    Gains,
    SystemKind,
    TunerState,
    _rhs_arrays,
)
from .signals import RegressorSignal

__all__ = [
    "NumericalDivergence",
    "SimConfig",
    "Trajectory",
    "simulate",
    "simulate_with_buffer",
]


class NumericalDivergence(RuntimeError):
    """Raised when the integration state stops being finite."""


@dataclass(frozen=True)
class SimConfig:
    """Time grid and output decimation for one simulation."""

    t_end: float
    t_start: float = 0.0
    step_h: float = 1e-3
    record_every: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.step_h <= 0.0:
            raise ValueError("step_h must be positive")
        if self.t_end < self.t_start:
            raise ValueError("t_end must not precede t_start")
        if self.record_every < 1:
            raise ValueError("record_every must be a positive integer")

    @property
    def num_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.step_h))


@dataclass
class Trajectory:
    """Decimated simulation output.

    Row k holds time t[k], the two state vectors, the parameter error norm
    |theta - theta*|, the companion gap |vartheta - theta|, and the number of
    recorded samples at that time. The optional column v carries a Lyapunov
    value along the run when one has been attached.
    """

    kind: SystemKind
    t: np.ndarray
    theta: np.ndarray
    vartheta: np.ndarray
    err_norm: np.ndarray
    p_norm: np.ndarray
    n_samples: np.ndarray
    v: np.ndarray | None = None

    @property
    def n_rows(self) -> int:
        return self.t.shape[0]

    def with_v(self, values: np.ndarray) -> "Trajectory":
        values = np.asarray(values, dtype=float)
        if values.shape != self.t.shape:
            raise ValueError("v must hold one value per trajectory row")
        return Trajectory(
            kind=self.kind,
            t=self.t,
            theta=self.theta,
            vartheta=self.vartheta,
            err_norm=self.err_norm,
            p_norm=self.p_norm,
            n_samples=self.n_samples,
            v=values,
        )

    def to_csv(self) -> str:
        """Render rows as CSV; floats use shortest round-trip formatting."""
        n = self.theta.shape[1]
        header = (
            ["t"]
            + [f"theta_{i + 1}" for i in range(n)]
            + [f"vartheta_{i + 1}" for i in range(n)]
            + ["err_norm", "p_norm", "n_samples"]
        )
        if self.v is not None:
            header.append("V")
        lines = [",".join(header)]
        for k in range(self.n_rows):
            cells = [repr(float(self.t[k]))]
            cells += [repr(float(x)) for x in self.theta[k]]
            cells += [repr(float(x)) for x in self.vartheta[k]]
            cells += [
                repr(float(self.err_norm[k])),
                repr(float(self.p_norm[k])),
                str(int(self.n_samples[k])),
            ]
            if self.v is not None:
                cells.append(repr(float(self.v[k])))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _run(
    kind: SystemKind,
    signal: RegressorSignal,
    gains: Gains,
    sim: SimConfig,
    init: TunerState,
    buffer: DataBuffer,
    online: bool,
) -> tuple[Trajectory, DataBuffer]:
    n = signal.dimension
    if init.theta.shape != (n,):
        raise ValueError("initial state dimension does not match the signal")
    h = sim.step_h
    num_steps = sim.num_steps
    theta_star = signal.theta_star
    records = online and kind in BUFFER_KINDS

    n_rows = num_steps // sim.record_every + 1
    out_t = np.empty(n_rows)
    out_theta = np.empty((n_rows, n))
    out_vartheta = np.empty((n_rows, n))
    out_err = np.empty(n_rows)
    out_p = np.empty(n_rows)
    out_n = np.empty(n_rows, dtype=int)

    theta = init.theta.astype(float).copy()
    vartheta = init.vartheta.astype(float).copy()
    row = 0
    for k in range(num_steps + 1):
        t = sim.t_start + k * h
        phi, y_star = signal.eval(t)
        if records and k < num_steps and not buffer.frozen:
            buffer, _ = maybe_record(buffer, t, phi, y_star)
        if k % sim.record_every == 0:
            out_t[row] = t
            out_theta[row] = theta
            out_vartheta[row] = vartheta
            out_err[row] = np.linalg.norm(theta - theta_star)
            out_p[row] = np.linalg.norm(vartheta - theta)
            out_n[row] = len(buffer)
            row += 1
        if k == num_steps:
            break
        dtheta, dvartheta = _rhs_arrays(kind, theta, vartheta, phi, y_star, buffer, gains)
        theta = theta + h * dtheta
        vartheta = vartheta + h * dvartheta
        if not (np.isfinite(theta).all() and np.isfinite(vartheta).all()):
            raise NumericalDivergence(
                f"non-finite state for '{kind.value}' at t={t + h:.6g} (after step {k + 1})"
            )
    trajectory = Trajectory(
        kind=kind,
        t=out_t[:row],
        theta=out_theta[:row],
        vartheta=out_vartheta[:row],
        err_norm=out_err[:row],
        p_norm=out_p[:row],
        n_samples=out_n[:row],
    )
    return trajectory, buffer


def simulate(
    kind: SystemKind,
    signal: RegressorSignal,
    gains: Gains,
    sim: SimConfig,
    init: TunerState,
    cl_online: bool = False,
    epsilon: float | None = None,
    N_bar: int | None = None,
) -> tuple[Trajectory, DataBuffer]:
    """Simulate one system, recording samples online for buffer-driven kinds.

    Buffer-driven kinds need cl_online=True together with the recording
    threshold epsilon and the sample budget N_bar; to run them against fixed
    pre-recorded data use simulate_with_buffer instead.
    """
    if kind in BUFFER_KINDS:
        if not cl_online:
            raise ValueError(
                f"'{kind.value}' needs recorded data: run with cl_online=True "
                "or supply a buffer via simulate_with_buffer"
            )
        if epsilon is None or N_bar is None:
            raise ValueError("cl_online runs need both epsilon and N_bar")
        buffer = DataBuffer.empty(capacity=N_bar, epsilon=epsilon)
    else:
        buffer = DataBuffer.empty(capacity=max(N_bar or 1, 1), epsilon=epsilon or 1.0)
    return _run(kind, signal, gains, sim, init, buffer, online=cl_online)


def simulate_with_buffer(
    kind: SystemKind,
    signal: RegressorSignal,
    gains: Gains,
    sim: SimConfig,
    init: TunerState,
    buffer: DataBuffer,
) -> Trajectory:
    """Simulate with a fixed pre-recorded buffer (no online recording)."""
    if kind in BUFFER_KINDS and len(buffer) == 0:
        raise ValueError(f"'{kind.value}' needs a nonempty buffer")
    trajectory, _ = _run(kind, signal, gains, sim, init, buffer, online=False)
    return trajectory
