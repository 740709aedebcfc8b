"""Taylor-Hood (P2/P1) spaces, operator assembly, and the four nonlinear forms.

Velocity fields are flat coefficient arrays over velocity DOFs, pressure
fields over pressure DOFs.  The scalar P2 nodes are the mesh vertices
followed by the edge midpoints; after periodic merging the velocity DOF of
merged scalar node ``s`` and component ``c`` is ``2*s + c``.  Pressure DOFs
are the merged vertices.

The convective term can be discretized four ways.  With ``u`` advecting,
``v`` transported, and ``w`` the test field, the generalized trilinear forms
are

* convective:      (u . grad v, w)
* skew-symmetric:  (u . grad v, w) + 1/2 ((div u) v, w)
* rotational:      ((curl u) x v, w), with the 2D reading
                   curl u = dx u2 - dy u1 and (curl u) x v = omega (-v2, v1)
* emac:            ((grad u + grad u^T) v, w) + ((div u) v, w)

all of which reduce to the standard single-field forms at v = u.  A single
degree-5 rule makes every one of these integrals exact for P2 arguments on
affine elements, which is what turns the classical energy identities
(b_s(u,v,v) = 0 and friends) into machine-precision statements.
"""

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .numerics import triangle_quadrature


class NonlinearForm(str, enum.Enum):
    """Tag selecting the discretization of the convective term."""

    CONVECTIVE = "convective"
    SKEW = "skew"
    ROTATIONAL = "rotational"
    EMAC = "emac"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            valid = ", ".join(f.value for f in cls)
            raise ValueError(f"unknown nonlinear form {name!r}; expected one of: {valid}") from None


@dataclass(frozen=True)
class FieldNorms:
    l2: float
    h1_semi: float
    div_l2: float
    curl_l2: float


def _p2_basis(bary):
    """P2 basis values at barycentric points: (nq, 6)."""
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1,
    ])


def _p2_ref_grads(bary):
    """P2 reference gradients at barycentric points: (nq, 6, 2)."""
    nq = bary.shape[0]
    # gradients of barycentric coordinates on the reference triangle
    gl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    out = np.zeros((nq, 6, 2))
    for q in range(nq):
        l = bary[q]
        for i in range(3):
            out[q, i] = (4 * l[i] - 1) * gl[i]
        out[q, 3] = 4 * (l[1] * gl[2] + l[2] * gl[1])
        out[q, 4] = 4 * (l[2] * gl[0] + l[0] * gl[2])
        out[q, 5] = 4 * (l[0] * gl[1] + l[1] * gl[0])
    return out


def _resolve_roots(master):
    """Collapse master chains (slave of a slave) to their final root."""
    master = master.copy()
    while True:
        nxt = master[master]
        if np.array_equal(nxt, master):
            return master
        master = nxt


class TaylorHoodSpace:
    """P2 vector velocity / P1 pressure degree-of-freedom layout on a mesh.

    Periodic vertex pairs of the mesh are folded: slave P2 nodes (vertices
    and midpoints of slave edges) share the DOF of their master, both for
    velocity and pressure.  One pressure DOF (index 0) is pinned during
    solves since neither experiment carries an essential pressure condition.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        nv = mesh.num_vertices
        tris = mesh.triangles

        # global edges as sorted vertex pairs; local edge i is opposite vertex i
        local = np.stack([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]], axis=1)
        keys = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        self.edges = edges
        self.cell_edges = inverse.reshape(-1, 3)
        ne = edges.shape[0]

        self.n_vertices = nv
        self.n_edges = ne
        self.n_scalar_raw = nv + ne
        self.n_vel_raw = 2 * self.n_scalar_raw

        # periodic folding: vertices from the mesh pairs, midpoints through
        # the induced edge identification
        vroot = np.arange(nv)
        for m, s in mesh.periodic_pairs:
            vroot[s] = m
        vroot = _resolve_roots(vroot)
        # edges whose endpoint roots coincide are translated copies of one
        # another across a periodic seam; the first such edge is the master
        canonical = {}
        eroot = np.arange(ne)
        for i, (a, b) in enumerate(edges):
            ra, rb = int(vroot[a]), int(vroot[b])
            key = (min(ra, rb), max(ra, rb))
            eroot[i] = canonical.setdefault(key, i)
        eroot = _resolve_roots(eroot)

        scalar_root = np.concatenate([vroot, nv + eroot])
        scalar_root = _resolve_roots(scalar_root)
        roots = np.unique(scalar_root)
        self.scalar_index = np.searchsorted(roots, scalar_root)
        self.n_scalar = roots.size
        self.n_vel = 2 * self.n_scalar

        proots = np.unique(vroot)
        self.pressure_index = np.searchsorted(proots, vroot)
        self.n_press = proots.size
        self.pinned_pressure = 0

        # representative coordinates of merged nodes (master's position)
        raw_xy = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])])
        self.scalar_xy = raw_xy[roots]

        # connectivity in merged numbering
        raw_cell_scalar = np.hstack([tris, nv + self.cell_edges])
        self.cell_scalar = self.scalar_index[raw_cell_scalar]          # (nt, 6)
        self.cell_press = self.pressure_index[tris]                    # (nt, 3)
        cv = np.empty((tris.shape[0], 12), dtype=int)
        cv[:, 0::2] = 2 * self.cell_scalar
        cv[:, 1::2] = 2 * self.cell_scalar + 1
        self.cell_vel = cv

        # affine geometry and basis tables at the shared quadrature rule
        p = mesh.vertices
        j11 = p[tris[:, 1], 0] - p[tris[:, 0], 0]
        j12 = p[tris[:, 2], 0] - p[tris[:, 0], 0]
        j21 = p[tris[:, 1], 1] - p[tris[:, 0], 1]
        j22 = p[tris[:, 2], 1] - p[tris[:, 0], 1]
        det = j11 * j22 - j12 * j21
        if np.any(det <= 0):
            raise ValueError("mesh has non-CCW or degenerate triangles")
        self.det_j = det
        inv_jt = np.empty((tris.shape[0], 2, 2))
        inv_jt[:, 0, 0] = j22 / det
        inv_jt[:, 0, 1] = -j21 / det
        inv_jt[:, 1, 0] = -j12 / det
        inv_jt[:, 1, 1] = j11 / det
        self.inv_jt = inv_jt

        self.quadrature = triangle_quadrature(5)
        bary = self.quadrature.points
        self.qweights = self.quadrature.weights
        self.phi = _p2_basis(bary)                       # (nq, 6)
        ref_grads = _p2_ref_grads(bary)                  # (nq, 6, 2)
        # physical gradients: dphi[e, q, l, d] = sum_k invJT[e, d, k] ref[q, l, k]
        self.dphi = np.einsum("edk,qlk->eqld", inv_jt, ref_grads)
        self.psi = bary                                  # P1 basis = barycentric
        v0 = p[tris[:, 0]]
        jmat = np.stack([np.stack([j11, j12], axis=-1), np.stack([j21, j22], axis=-1)], axis=1)
        self.qp_xy = v0[:, None, :] + np.einsum("eij,qj->eqi", jmat, bary[:, 1:])

        self._cache = {}

    # ------------------------------------------------------------------
    # assembled operators (cached, unscaled)

    def _scalar_matrix(self, elem):
        rows = np.broadcast_to(self.cell_scalar[:, :, None], elem.shape)
        cols = np.broadcast_to(self.cell_scalar[:, None, :], elem.shape)
        m = sp.coo_matrix((elem.ravel(), (rows.ravel(), cols.ravel())),
                          shape=(self.n_scalar, self.n_scalar))
        return m.tocsr()

    def _vector_from_paired(self, elem):
        """Assemble (nt, 6, 2, 6, 2) local blocks into the velocity DOF space."""
        nt = elem.shape[0]
        flat = elem.reshape(nt, 12, 12)
        rows = np.broadcast_to(self.cell_vel[:, :, None], flat.shape)
        cols = np.broadcast_to(self.cell_vel[:, None, :], flat.shape)
        m = sp.coo_matrix((flat.ravel(), (rows.ravel(), cols.ravel())),
                          shape=(self.n_vel, self.n_vel))
        return m.tocsr()

    def mass(self):
        """Vector mass matrix (u, v)."""
        if "mass" not in self._cache:
            elem = np.einsum("q,e,qa,qb->eab", self.qweights, self.det_j, self.phi, self.phi)
            m = self._scalar_matrix(elem)
            m = 0.5 * (m + m.T)
            self._cache["mass"] = sp.kron(m, sp.eye(2), format="csr")
        return self._cache["mass"]

    def stiffness(self):
        """Vector stiffness matrix (grad u, grad v), unscaled by viscosity."""
        if "stiffness" not in self._cache:
            elem = np.einsum("q,e,eqad,eqbd->eab", self.qweights, self.det_j, self.dphi, self.dphi)
            m = self._scalar_matrix(elem)
            m = 0.5 * (m + m.T)
            self._cache["stiffness"] = sp.kron(m, sp.eye(2), format="csr")
        return self._cache["stiffness"]

    def divergence(self):
        """Divergence operator B with (B u)_q = (div u, psi_q)."""
        if "divergence" not in self._cache:
            elem = np.einsum("q,e,qp,eqlc->eplc", self.qweights, self.det_j, self.psi, self.dphi)
            nt = elem.shape[0]
            flat = elem.reshape(nt, 3, 12)
            rows = np.broadcast_to(self.cell_press[:, :, None], flat.shape)
            cols = np.broadcast_to(self.cell_vel[:, None, :], flat.shape)
            m = sp.coo_matrix((flat.ravel(), (rows.ravel(), cols.ravel())),
                              shape=(self.n_press, self.n_vel))
            self._cache["divergence"] = m.tocsr()
        return self._cache["divergence"]

    def div_form(self):
        """Operator for ||div u||^2 = u^T G u."""
        if "div_form" not in self._cache:
            # divergence coefficient of local dof (l, c) is d_c phi_l
            coef = self.dphi  # (e, q, l, c) with c the component
            elem = np.einsum("q,e,eqla,eqmb->elamb", self.qweights, self.det_j, coef, coef)
            m = self._vector_from_paired(elem)
            self._cache["div_form"] = 0.5 * (m + m.T)
        return self._cache["div_form"]

    def curl_form(self):
        """Operator for ||curl u||^2 = u^T G u (scalar 2D curl)."""
        if "curl_form" not in self._cache:
            coef = np.empty_like(self.dphi)
            coef[..., 0] = -self.dphi[..., 1]   # component u1 contributes -dy phi
            coef[..., 1] = self.dphi[..., 0]    # component u2 contributes +dx phi
            elem = np.einsum("q,e,eqla,eqmb->elamb", self.qweights, self.det_j, coef, coef)
            m = self._vector_from_paired(elem)
            self._cache["curl_form"] = 0.5 * (m + m.T)
        return self._cache["curl_form"]

    def pressure_volume(self):
        """Vector of integrals of the pressure basis functions."""
        if "pressure_volume" not in self._cache:
            elem = np.einsum("q,e,qp->ep", self.qweights, self.det_j, self.psi)
            v = np.zeros(self.n_press)
            np.add.at(v, self.cell_press, elem)
            self._cache["pressure_volume"] = v
        return self._cache["pressure_volume"]

    # ------------------------------------------------------------------
    # field evaluation

    def local_coeffs(self, u):
        """Per-element local coefficients: (nt, 6, 2)."""
        u = self._check_velocity(u)
        return u.reshape(self.n_scalar, 2)[self.cell_scalar]

    def values_and_grads(self, u):
        """Velocity values (nt, nq, 2) and gradients (nt, nq, 2, 2) at quadrature.

        ``grads[e, q, i, j]`` is du_i/dx_j.
        """
        ue = self.local_coeffs(u)
        vals = np.einsum("eli,ql->eqi", ue, self.phi, optimize=True)
        grads = np.einsum("eli,eqld->eqid", ue, self.dphi, optimize=True)
        return vals, grads

    def evaluate(self, u, cells, bary):
        """Velocity values/gradients at barycentric points of given cells.

        ``bary`` is (npts, 3); returns ``vals`` (ncells, npts, 2) and
        ``grads`` (ncells, npts, 2, 2).
        """
        u = self._check_velocity(u)
        phi = _p2_basis(bary)
        ref = _p2_ref_grads(bary)
        ue = u.reshape(self.n_scalar, 2)[self.cell_scalar[cells]]
        vals = np.einsum("eli,ql->eqi", ue, phi)
        dphi = np.einsum("edk,qlk->eqld", self.inv_jt[cells], ref)
        grads = np.einsum("eli,eqld->eqid", ue, dphi)
        return vals, grads

    def evaluate_pressure(self, p, cells, bary):
        """Pressure values at barycentric points of given cells: (ncells, npts)."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_press,):
            raise ValueError(f"pressure field has length {p.shape}, expected ({self.n_press},)")
        pe = p[self.cell_press[cells]]
        return np.einsum("el,ql->eq", pe, np.asarray(bary))

    def interpolate_velocity(self, fn, time=0.0):
        """Nodal interpolation of ``fn(x, y, t) -> (u1, u2)`` onto the P2 nodes."""
        x, y = self.scalar_xy[:, 0], self.scalar_xy[:, 1]
        u1, u2 = fn(x, y, time)
        u = np.empty(self.n_vel)
        u[0::2] = u1
        u[1::2] = u2
        return u

    def _check_velocity(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_vel,):
            raise ValueError(f"velocity field has shape {u.shape}, expected ({self.n_vel},)")
        return u

    # ------------------------------------------------------------------
    # essential constraints

    def _edge_lookup(self):
        if "edge_lookup" not in self._cache:
            self._cache["edge_lookup"] = {(int(a), int(b)): i for i, (a, b) in enumerate(self.edges)}
        return self._cache["edge_lookup"]

    def boundary_scalar_nodes(self, label):
        """Merged scalar node ids (vertices + midpoints) on edges labeled ``label``."""
        key = ("boundary_nodes", label)
        if key in self._cache:
            return self._cache[key]
        idx = self.mesh.boundary_edges_with_label(label)
        if idx.size == 0:
            raise ValueError(f"mesh has no boundary edges labeled {label!r}")
        lookup = self._edge_lookup()
        nodes = set()
        for a, b in self.mesh.boundary_edges[idx]:
            nodes.add(int(self.scalar_index[a]))
            nodes.add(int(self.scalar_index[b]))
            nodes.add(int(self.scalar_index[self.n_vertices + lookup[(min(a, b), max(a, b))]]))
        out = np.array(sorted(nodes), dtype=int)
        self._cache[key] = out
        return out

    def dirichlet_data(self, boundary_values, time=0.0):
        """Evaluate a boundary spec into an essential mask and value vector.

        ``boundary_values`` maps labels to conditions:

        * ``("noslip",)``                    -- both components zero
        * ``("velocity", fn_or_pair)``       -- both components prescribed
        * ``("component", c, fn_or_value)``  -- single component prescribed

        Callables receive ``(x, y, t)`` arrays.  Labels missing from the mesh
        raise ``ValueError``.
        """
        mask = np.zeros(self.n_vel, dtype=bool)
        vals = np.zeros(self.n_vel)
        for label, cond in boundary_values.items():
            nodes = self.boundary_scalar_nodes(label)
            x, y = self.scalar_xy[nodes, 0], self.scalar_xy[nodes, 1]
            kind = cond[0]
            if kind == "noslip":
                comps = ((0, 0.0), (1, 0.0))
            elif kind == "velocity":
                val = cond[1]
                u1, u2 = val(x, y, time) if callable(val) else val
                comps = ((0, u1), (1, u2))
            elif kind == "component":
                c, val = cond[1], cond[2]
                comps = ((c, val(x, y, time) if callable(val) else val),)
            else:
                raise ValueError(f"unknown boundary condition kind {kind!r} for label {label!r}")
            for c, val in comps:
                dofs = 2 * nodes + c
                mask[dofs] = True
                vals[dofs] = val
        return mask, vals


def assemble_linear_operators(mesh, space, nu):
    """Mass, viscous stiffness (scaled by ``nu``) and divergence operators."""
    if space.mesh is not mesh:
        raise ValueError("space was not built on the given mesh")
    return space.mass(), nu * space.stiffness(), space.divergence()


def field_norms(space, u):
    """L2, H1-seminorm, divergence and curl norms of a velocity field."""
    u = space._check_velocity(u)
    l2sq = u @ (space.mass() @ u)
    h1sq = u @ (space.stiffness() @ u)
    divsq = u @ (space.div_form() @ u)
    curlsq = u @ (space.curl_form() @ u)
    clip = lambda v: float(np.sqrt(max(v, 0.0)))
    return FieldNorms(clip(l2sq), clip(h1sq), clip(divsq), clip(curlsq))


# ----------------------------------------------------------------------
# trilinear forms

def _density(form, uvals, ugrads, vvals, vgrads):
    """Pointwise vector s with b(u, v, w) = integral of s . w."""
    if form == NonlinearForm.CONVECTIVE:
        return np.einsum("...j,...ij->...i", uvals, vgrads, optimize=True)
    if form == NonlinearForm.SKEW:
        s = np.einsum("...j,...ij->...i", uvals, vgrads, optimize=True)
        udiv = ugrads[..., 0, 0] + ugrads[..., 1, 1]
        return s + 0.5 * udiv[..., None] * vvals
    if form == NonlinearForm.ROTATIONAL:
        omega = ugrads[..., 1, 0] - ugrads[..., 0, 1]
        return np.stack([-omega * vvals[..., 1], omega * vvals[..., 0]], axis=-1)
    if form == NonlinearForm.EMAC:
        twod = ugrads + np.swapaxes(ugrads, -1, -2)
        s = np.einsum("...ij,...j->...i", twod, vvals, optimize=True)
        udiv = ugrads[..., 0, 0] + ugrads[..., 1, 1]
        return s + udiv[..., None] * vvals
    raise ValueError(f"unknown nonlinear form {form!r}")


def trilinear_value(space, form, u, v, w):
    """Exact value of b(u, v, w) for the selected form."""
    form = NonlinearForm.parse(form)
    uvals, ugrads = space.values_and_grads(u)
    vvals, vgrads = space.values_and_grads(v)
    wvals, _ = space.values_and_grads(w)
    s = _density(form, uvals, ugrads, vvals, vgrads)
    return float(np.einsum("q,e,eqi,eqi->", space.qweights, space.det_j, s, wvals, optimize=True))


def nonlinear_residual(space, form, u):
    """Vector of b(u, u, phi_i) over all velocity test functions."""
    form = NonlinearForm.parse(form)
    uvals, ugrads = space.values_and_grads(u)
    s = _density(form, uvals, ugrads, uvals, ugrads)
    local = np.einsum("q,e,eqa,qm->ema", space.qweights, space.det_j, s, space.phi, optimize=True)
    # local[e, m, a] pairs with velocity dof 2*cell_scalar[e, m] + a
    r = np.zeros(space.n_vel)
    np.add.at(r, space.cell_vel, local.reshape(-1, 12))
    return r


def nonlinear_jacobian(space, form, u):
    """Exact derivative of :func:`nonlinear_residual` with respect to ``u``.

    Assembled from the two linearizations b(du, u, phi) + b(u, du, phi),
    evaluated with the same pointwise density as the residual so the pair is
    consistent by construction.
    """
    form = NonlinearForm.parse(form)
    uvals, ugrads = space.values_and_grads(u)
    nt, nq = uvals.shape[:2]
    # all 12 local basis directions at once, leading axis d = 2*l + c
    dvals = np.zeros((12, 1, nq, 2))
    dgrads = np.zeros((12, nt, nq, 2, 2))
    for l in range(6):
        for c in range(2):
            d = 2 * l + c
            dvals[d, 0, :, c] = space.phi[:, l]
            dgrads[d, :, :, c, :] = space.dphi[:, :, l, :]
    s = _density(form, dvals, dgrads, uvals, ugrads) + _density(form, uvals, ugrads, dvals, dgrads)
    local = np.einsum("q,e,deqa,qm->emad", space.qweights, space.det_j, s, space.phi, optimize=True)
    local = local.reshape(nt, 12, 12)
    rows = np.broadcast_to(space.cell_vel[:, :, None], local.shape)
    cols = np.broadcast_to(space.cell_vel[:, None, :], local.shape)
    m = sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                      shape=(space.n_vel, space.n_vel))
    return m.tocsr()


def nonlinear_residual_and_jacobian(space, form, u):
    """Residual b(u, u, phi_i) and its exact Jacobian in one call."""
    return nonlinear_residual(space, form, u), nonlinear_jacobian(space, form, u)


# ----------------------------------------------------------------------
# constraints

def apply_constraints(space, matrix, rhs, boundary_values, time=0.0, symmetric=False):
    """Impose essential conditions on an assembled system.

    Works on velocity-only systems (size ``n_vel``) or full saddle-point
    systems (size ``n_vel + n_press``); in the latter case the pinned
    pressure DOF row is also replaced.  Constrained rows become identity rows
    carrying the prescribed values; with ``symmetric=True`` the matching
    columns are eliminated into the right-hand side, preserving symmetry.
    Periodic slaves are already folded by the DOF numbering.
    """
    n = matrix.shape[0]
    if n not in (space.n_vel, space.n_vel + space.n_press):
        raise ValueError(f"system size {n} matches neither velocity nor saddle-point layout")
    mask_v, vals_v = space.dirichlet_data(boundary_values, time)
    mask = np.zeros(n, dtype=bool)
    vals = np.zeros(n)
    mask[: space.n_vel] = mask_v
    vals[: space.n_vel] = vals_v
    if n > space.n_vel:
        mask[space.n_vel + space.pinned_pressure] = True

    a = sp.csr_matrix(matrix, copy=True)
    rhs = np.array(rhs, dtype=float, copy=True)
    fixed = np.flatnonzero(mask)
    if symmetric:
        # move known values to the rhs, then zero the columns
        rhs -= a[:, fixed] @ vals[fixed]
        az = a.tolil()
        az[:, fixed] = 0.0
        a = az.tocsr()
    keep = sp.diags((~mask).astype(float))
    a = keep @ a + sp.diags(mask.astype(float))
    rhs[fixed] = vals[fixed]
    return a.tocsr(), rhs


# ----------------------------------------------------------------------
# error quadrature against analytic fields

def l2_error(space, u, fn, time=0.0):
    """L2 distance between a velocity field and an analytic ``fn(x, y, t)``."""
    vals, _ = space.values_and_grads(u)
    x, y = space.qp_xy[..., 0], space.qp_xy[..., 1]
    e1, e2 = fn(x, y, time)
    diff = np.stack([vals[..., 0] - e1, vals[..., 1] - e2], axis=-1)
    val = np.einsum("q,e,eqi,eqi->", space.qweights, space.det_j, diff, diff)
    return float(np.sqrt(max(val, 0.0)))


def h1_semi_error(space, u, grad_fn, time=0.0):
    """H1-seminorm distance to an analytic gradient ``grad_fn(x, y, t) -> (2,2) rows du_i/dx_j``."""
    _, grads = space.values_and_grads(u)
    x, y = space.qp_xy[..., 0], space.qp_xy[..., 1]
    g = grad_fn(x, y, time)
    exact = np.empty_like(grads)
    for i in range(2):
        for j in range(2):
            exact[..., i, j] = g[i][j]
    diff = grads - exact
    val = np.einsum("q,e,eqij,eqij->", space.qweights, space.det_j, diff, diff)
    return float(np.sqrt(max(val, 0.0)))
