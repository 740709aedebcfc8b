"""Shear-layer locking study: consistent vs inconsistent reduced models.

Generates snapshots with the skew-symmetric full-order solver on the desk
Kelvin-Helmholtz configuration (h = 1/32, Re = 100, dt = 0.02, T = 3), then
runs Galerkin ROMs that either reuse the skew form (consistent) or switch to
EMAC (inconsistent) at mode counts r = 10..40.  The consistent family
converges to the FOM as r grows; the inconsistent family stalls at a floor
set by the FOM divergence error -- the locking behavior the error bound
predicts, whose inconsistency terms scale with ||div u_h||.

Writes kh_locking.csv and, if matplotlib is importable, kh_locking.png.

Run:  python3 demos/kh_locking.py   (takes a few minutes; the FOM dominates)
"""

import numpy as np

from flowrom import TaylorHoodSpace, identify_periodic, uniform_rect_mesh
from flowrom.diagnostics import trajectory_error
from flowrom.fom import FomConfig, build_initial_condition, kelvin_helmholtz_boundary, run_fom
from flowrom.pod import build_pod_basis, project_field
from flowrom.rom import RomNewtonError, assemble_rom_operators, run_rom

NU = 1.0 / 2800.0  # Re = 1/(28 nu) = 100
DT, T_END = 0.02, 3.0
R_VALUES = (10, 20, 30, 40)

mesh = identify_periodic(uniform_rect_mesh(32, 32), "x")
space = TaylorHoodSpace(mesh)
u0 = build_initial_condition("kelvin-helmholtz", space)
cfg = FomConfig(nu=NU, dt=DT, t_end=T_END, form="skew", scheme="backward_euler",
                boundary=kelvin_helmholtz_boundary(), snapshot_window=(0.0, T_END),
                project_initial=True)
print("running the skew-form FOM (150 implicit steps)...")
_, snaps, series = run_fom(cfg, mesh, space, u0)

mass, stiff = space.mass(), space.stiffness()
basis = build_pod_basis(snaps, mass, stiff)
print(f"POD basis rank {basis.rank} from {snaps.count} snapshots")

div_fields = [snaps.matrix[:, j] for j in range(snaps.count)]
div_20 = np.sqrt(DT * np.sum(series["div_error"].values[1:] ** 2))
print(f"FOM divergence error ||div u||_2,0 = {div_20:.4f} "
      "(the fuel of the inconsistency terms)")

rows = []
print(f"\n{'form':>6} {'r':>4} {'linf_l2':>12} {'l2_h1':>12}")
for form in ("skew", "emac"):
    for r in R_VALUES:
        ops = assemble_rom_operators(space, basis, r, form, nu=NU)
        a0 = project_field(basis, r, snaps.matrix[:, 0], mass)
        try:
            traj = run_rom(ops, a0, DT, T_END, scheme="backward_euler")
            err = trajectory_error(space, snaps, traj, basis, NU)
            rows.append((form, r, err.linf_l2, err.l2_h1))
            print(f"{form:>6} {r:4d} {err.linf_l2:12.4e} {err.l2_h1:12.4e}")
        except RomNewtonError as exc:
            rows.append((form, r, np.inf, np.inf))
            print(f"{form:>6} {r:4d}   diverged at step {exc.step}")

plateau = rows[-1][2] / max(div_20**2, 1e-300)
print(f"\ninconsistent floor / ||div u||^2_2,0 = {plateau:.3f} (reported, not asserted)")

with open("kh_locking.csv", "w") as fh:
    fh.write("form,r,linf_l2,l2_h1\n")
    for form, r, a, b in rows:
        fh.write(f"{form},{r},{a:.17g},{b:.17g}\n")
print("wrote kh_locking.csv")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.6))
    for form, marker in (("skew", "o"), ("emac", "s")):
        errs = [row[2] for row in rows if row[0] == form]
        label = "consistent (skew/skew)" if form == "skew" else "inconsistent (skew/emac)"
        ax.semilogy(R_VALUES, errs, marker + "-", label=label)
    ax.set_xlabel("modes r")
    ax.set_ylabel(r"$\max_n \|w_r^n - u_h^n\|$")
    ax.legend()
    fig.tight_layout()
    fig.savefig("kh_locking.png", dpi=150)
    print("wrote kh_locking.png")
except ImportError:
    pass
