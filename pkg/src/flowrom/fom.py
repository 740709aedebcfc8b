"""Full-order Navier-Stokes time stepping with Newton's method.

Each step solves the fully implicit momentum/continuity system on the
Taylor-Hood space: find ``(u, p)`` with

    (D_t u, v) + b(u, u, v) - (p, div v) + nu (grad u, grad v) = (f, v)
    (div u, q) = 0

for all free test functions, where ``D_t`` is the backward-Euler or BDF2
difference and ``b`` is the configured nonlinear form.  The saddle-point
Newton system is solved monolithically by a direct sparse factorization.

Initial-condition builders for the package's experiments (Kelvin-Helmholtz
shear layer, cylinder channel, Taylor-Green vortex) live here as well.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fem import NonlinearForm, apply_constraints, nonlinear_jacobian, nonlinear_residual
from .numerics import factorize, solve_sparse
from .pod import SnapshotSet
from .diagnostics import ScalarSeries, drag_coefficient, energy_enstrophy


class NewtonConvergenceError(RuntimeError):
    """Newton failed to reach tolerance; usually means the time step is too large."""

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


@dataclass
class FomConfig:
    """Settings of a full-order run.

    ``boundary`` maps mesh labels to essential conditions (see
    ``TaylorHoodSpace.dirichlet_data``); ``forcing`` is ``None`` or a callable
    ``(x, y, t) -> (f1, f2)`` interpolated onto the velocity space.  The
    snapshot window is a closed time interval; snapshots are taken every
    ``snapshot_stride``-th step inside it.
    """

    nu: float
    dt: float
    t_end: float
    form: NonlinearForm = NonlinearForm.SKEW
    scheme: str = "bdf2"
    boundary: dict = field(default_factory=dict)
    forcing: object = None
    snapshot_window: tuple = None
    snapshot_stride: int = 1
    newton_tol: float = 1e-10
    newton_max_iter: int = 20
    newton_damping: float = 1.0
    drag_label: str = None
    keep_states: bool = False
    project_initial: bool = False

    def __post_init__(self):
        self.form = NonlinearForm.parse(self.form)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.scheme not in ("backward_euler", "bdf2"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.snapshot_window is not None:
            ta, tb = self.snapshot_window
            if not (0.0 <= ta <= tb <= self.t_end + 1e-12 * self.t_end):
                raise ValueError("snapshot window must lie inside [0, t_end]")


@dataclass
class FomState:
    """Solver state after ``step`` steps: ``t = step * dt``."""

    u: np.ndarray
    p: np.ndarray
    t: float
    step: int
    u_prev: np.ndarray = None


# ----------------------------------------------------------------------
# experiment data

def kelvin_helmholtz_velocity(x, y, t=0.0):
    """Shear-layer initial condition: tanh profile plus a small stream-function ripple."""
    s = 28.0
    base = np.tanh(s * (2.0 * y - 1.0))
    g = np.exp(-(s**2) * (y - 0.5) ** 2)
    cosx = np.cos(8 * np.pi * x) + np.cos(20 * np.pi * x)
    dpsi_dy = -2.0 * s**2 * (y - 0.5) * g * cosx
    dpsi_dx = g * (-8 * np.pi * np.sin(8 * np.pi * x) - 20 * np.pi * np.sin(20 * np.pi * x))
    return base + 1e-3 * dpsi_dy, np.broadcast_to(-1e-3 * dpsi_dx, np.shape(base)).copy()


def taylor_green_velocity(x, y, t=0.0, nu=0.01):
    """Decaying vortex array, an exact solution on the doubly periodic 2x2 square."""
    f = np.exp(-2.0 * np.pi**2 * nu * t)
    return (-np.cos(np.pi * x) * np.sin(np.pi * y) * f,
            np.sin(np.pi * x) * np.cos(np.pi * y) * f)


def taylor_green_gradient(x, y, t=0.0, nu=0.01):
    """Gradient rows (du_i/dx_j) of the Taylor-Green velocity."""
    f = np.exp(-2.0 * np.pi**2 * nu * t)
    cx, sx = np.cos(np.pi * x), np.sin(np.pi * x)
    cy, sy = np.cos(np.pi * y), np.sin(np.pi * y)
    return ((np.pi * sx * sy * f, -np.pi * cx * cy * f),
            (np.pi * cx * cy * f, -np.pi * sx * sy * f))


def cylinder_inflow(x, y, t=0.0):
    """Parabolic channel profile 6/0.41^2 y (0.41 - y) in the x-direction."""
    u1 = 6.0 / 0.41**2 * y * (0.41 - y)
    return u1, np.zeros_like(u1)


def kelvin_helmholtz_boundary():
    """No-penetration top/bottom; the periodic sides carry no essential values."""
    return {"top": ("component", 1, 0.0), "bottom": ("component", 1, 0.0)}


def cylinder_boundary():
    """Inflow/outflow parabolic profile, no-slip walls and cylinder."""
    return {
        "inflow": ("velocity", cylinder_inflow),
        "outflow": ("velocity", cylinder_inflow),
        "wall": ("noslip",),
        "cylinder": ("noslip",),
    }


def stokes_project(space, u, boundary=None, time=0.0):
    """L2-project a velocity field onto the discretely divergence-free subspace.

    Solves the constrained projection (w, v) - (lam, div v) = (u, v),
    (div w, q) = 0 with the essential values of ``boundary`` held fixed.
    Interpolated initial data generally violates the weak mass constraint;
    projecting it makes every snapshot of a run satisfy it, which the POD
    space inherits.
    """
    mass = space.mass()
    div = space.divergence()
    sys_mat = sp.bmat([[mass, -div.T], [div, None]], format="csr")
    rhs = np.concatenate([mass @ u, np.zeros(space.n_press)])
    a, b = apply_constraints(space, sys_mat, rhs, boundary or {}, time)
    x = solve_sparse(a, b)
    return x[: space.n_vel]


def build_initial_condition(problem, space):
    """Interpolate an experiment's initial velocity onto the P2 nodes.

    ``problem`` is one of ``"kelvin-helmholtz"``, ``"cylinder-channel"``,
    ``"taylor-green"``, or a callable ``(x, y, t) -> (u1, u2)`` for custom
    data.  The cylinder starts from rest (zero field with the boundary
    profile applied).
    """
    if callable(problem):
        return space.interpolate_velocity(problem)
    if problem == "kelvin-helmholtz":
        return space.interpolate_velocity(kelvin_helmholtz_velocity)
    if problem == "taylor-green":
        return space.interpolate_velocity(taylor_green_velocity)
    if problem == "cylinder-channel":
        u = np.zeros(space.n_vel)
        mask, vals = space.dirichlet_data(cylinder_boundary(), 0.0)
        u[mask] = vals[mask]
        return u
    raise ValueError(f"unknown problem {problem!r}")


# ----------------------------------------------------------------------
# time stepping

def _forcing_vector(space, config, t):
    if config.forcing is None:
        return None
    f = space.interpolate_velocity(config.forcing, time=t)
    return space.mass() @ f


def scheme_residual(space, config, u, p, u_old, u_prev, t, bdf2_step):
    """Momentum + continuity residual of the implicit scheme at ``(u, p)``.

    Constrained velocity rows and the pinned pressure row are zeroed, so the
    norm of the returned vector is the quantity Newton drives below
    tolerance.
    """
    mass = space.mass()
    stiff = space.stiffness()
    div = space.divergence()
    if bdf2_step:
        time_term = mass @ (1.5 * u - 2.0 * u_old + 0.5 * u_prev) / config.dt
    else:
        time_term = mass @ (u - u_old) / config.dt
    r_u = time_term + nonlinear_residual(space, config.form, u) \
        + config.nu * (stiff @ u) - div.T @ p
    g = _forcing_vector(space, config, t)
    if g is not None:
        r_u -= g
    r_p = div @ u
    mask, _ = space.dirichlet_data(config.boundary, t)
    r_u[mask] = 0.0
    r_p[space.pinned_pressure] = 0.0
    return np.concatenate([r_u, r_p])


def advance_step(state, config, space):
    """Advance one implicit step, returning the new state.

    BDF2 uses backward Euler for the very first step (no second history
    level yet).  Raises :class:`NewtonConvergenceError` when Newton does not
    reach tolerance within the configured iteration budget.
    """
    dt = config.dt
    t_new = state.t + dt
    bdf2 = config.scheme == "bdf2" and state.u_prev is not None
    alpha = 1.5 if bdf2 else 1.0

    mass = space.mass()
    stiff = space.stiffness()
    div = space.divergence()
    nvel, npress = space.n_vel, space.n_press
    mask, vals = space.dirichlet_data(config.boundary, t_new)
    fullmask = np.zeros(nvel + npress, dtype=bool)
    fullmask[:nvel] = mask
    fullmask[nvel + space.pinned_pressure] = True
    keep = sp.diags((~fullmask).astype(float), format="csr")
    pin_eye = sp.diags(fullmask.astype(float), format="csr")

    # time-extrapolated initial guess saves one Newton factorization per step
    if state.u_prev is not None:
        u = 2.0 * state.u - state.u_prev
    else:
        u = state.u.copy()
    u[mask] = vals[mask]
    p = state.p.copy()
    p[space.pinned_pressure] = 0.0

    fixed_block = alpha / dt * mass + config.nu * stiff

    for it in range(config.newton_max_iter + 1):
        residual = scheme_residual(space, config, u, p, state.u, state.u_prev, t_new, bdf2)
        res_norm = np.linalg.norm(residual)
        if res_norm <= config.newton_tol:
            break
        if it == config.newton_max_iter or not np.isfinite(res_norm):
            raise NewtonConvergenceError(
                f"Newton stalled at step {state.step + 1} (t={t_new:g}): "
                f"residual {res_norm:.3e} after {it} iterations",
                step=state.step + 1,
                residual=res_norm,
            )
        jac_n = nonlinear_jacobian(space, config.form, u)
        jac = sp.bmat([[fixed_block + jac_n, -div.T], [div, None]], format="csr")
        jac = keep @ jac + pin_eye
        delta = factorize(sp.csc_matrix(jac)).solve(-residual)
        u += config.newton_damping * delta[:nvel]
        p += config.newton_damping * delta[nvel:]

    # pressure gauge: remove the mean so p lives in L^2_0
    vol = space.pressure_volume()
    p = p - (vol @ p) / vol.sum()
    return FomState(u=u, p=p, t=t_new, step=state.step + 1, u_prev=state.u)


def rom_drag_series(space, config, basis, trajectory, stride=10, label=None):
    """Drag series of a reduced trajectory via one-step pressure recovery.

    The reduced model evolves no pressure, so the drag's pressure part is
    recovered as the multiplier of one implicit full-order step taken from
    the reconstructed state at the previous time level; the viscous part
    uses the reduced velocity itself.  Sampled every ``stride``-th step.
    """
    import dataclasses

    from .rom import reconstruct_field

    label = label or config.drag_label
    if label is None:
        raise ValueError("no drag boundary label configured")
    times = trajectory.times
    if times.size < 2:
        raise ValueError("trajectory too short for pressure recovery")
    dt = float(times[1] - times[0])
    cfg = dataclasses.replace(config, dt=dt, t_end=max(config.t_end, dt))
    out_t, out_v = [], []
    for n in range(stride, times.size, stride):
        w_prev = reconstruct_field(basis, trajectory.coeffs[n - 1])
        w_n = reconstruct_field(basis, trajectory.coeffs[n])
        st = FomState(u=w_prev, p=np.zeros(space.n_press), t=float(times[n - 1]), step=n - 1)
        recovered = advance_step(st, cfg, space)
        out_t.append(float(times[n]))
        out_v.append(drag_coefficient(space, w_n, recovered.p, label, config.nu))
    return np.array(out_t), np.array(out_v)


def snapshot_steps(window, stride, dt, n_steps):
    """Step indices (0-based, initial state included) recorded as snapshots."""
    if window is None:
        ta, tb = 0.0, n_steps * dt
    else:
        ta, tb = window
    eps = 1e-9 * max(dt, 1.0)
    n_start = int(np.ceil(ta / dt - eps))
    n_stop = int(np.floor(tb / dt + eps))
    n_stop = min(n_stop, n_steps)
    return list(range(n_start, n_stop + 1, stride))


def run_fom(config, mesh, space, u0):
    """Run the full-order solver, recording snapshots and scalar series.

    Returns ``(states, snapshots, series)`` where ``states`` is the list of
    per-step :class:`FomState` objects when ``config.keep_states`` is set
    (otherwise empty), ``snapshots`` is a :class:`SnapshotSet`, and
    ``series`` maps names (``energy``, ``enstrophy``, ``div_error`` and
    ``drag`` when configured) to :class:`ScalarSeries` sampled at every step
    including the initial state.
    """
    dt = config.dt
    n_steps = int(round(config.t_end / dt))
    if abs(n_steps * dt - config.t_end) > 1e-9 * max(1.0, config.t_end):
        raise ValueError("t_end must be an integer multiple of dt")

    mask, vals = space.dirichlet_data(config.boundary, 0.0)
    u0 = np.array(u0, dtype=float, copy=True)
    u0[mask] = vals[mask]
    if config.project_initial:
        u0 = stokes_project(space, u0, config.boundary, 0.0)
    state = FomState(u=u0, p=np.zeros(space.n_press), t=0.0, step=0)

    snap_at = set(snapshot_steps(config.snapshot_window, config.snapshot_stride, dt, n_steps))
    columns, snap_times = [], []
    series = {name: [] for name in ("energy", "enstrophy", "div_error")}
    if config.drag_label is not None:
        series["drag"] = []
    times = []
    states = [state] if config.keep_states else []

    def record(st):
        times.append(st.t)
        energy, enstrophy = energy_enstrophy(space, st.u)
        series["energy"].append(energy)
        series["enstrophy"].append(enstrophy)
        divsq = st.u @ (space.div_form() @ st.u)
        series["div_error"].append(float(np.sqrt(max(divsq, 0.0))))
        if config.drag_label is not None:
            series["drag"].append(drag_coefficient(space, st.u, st.p, config.drag_label, config.nu))
        if st.step in snap_at:
            columns.append(st.u.copy())
            snap_times.append(st.t)

    record(state)
    for _ in range(n_steps):
        try:
            state = advance_step(state, config, space)
        except NewtonConvergenceError:
            raise
        record(state)
        if config.keep_states:
            states.append(state)

    t_arr = np.array(times)
    out_series = {name: ScalarSeries(times=t_arr, values=np.array(vals_), label=name)
                  for name, vals_ in series.items()}
    snapshots = SnapshotSet(
        matrix=np.array(columns).T if columns else np.zeros((space.n_vel, 0)),
        times=np.array(snap_times),
        space=space,
    )
    return states, snapshots, out_series
