"""Independent numerical oracles used by the test suite.

These implementations deliberately share no code with the package: the
diffusion oracle is a fine-grid finite-difference discretization solved
with an implicit ODE integrator.
"""

import numpy as np
from scipy.integrate import solve_ivp


def fd_spherical_relaxation(c0, radius, diffusivity, t_end_s, n_r=200, surface_flux=0.0):
    """Relax a spherically symmetric concentration profile.

    ``c0`` maps radius to initial concentration. Returns the radial grid
    and the concentration profile at ``t_end_s``. Second-order central
    differences with a symmetry ghost at r=0 and a flux ghost at r=R,
    integrated with BDF at tight tolerance.
    """
    r = np.linspace(0.0, radius, n_r)
    h = r[1] - r[0]
    d = diffusivity

    def rhs(_t, c):
        dc = np.empty_like(c)
        # center: dc/dt = 3 D c'' with symmetric ghost
        dc[0] = 3.0 * d * 2.0 * (c[1] - c[0]) / h**2
        interior = slice(1, n_r - 1)
        c_pp = (c[2:] - 2.0 * c[1:-1] + c[:-2]) / h**2
        c_p = (c[2:] - c[:-2]) / (2.0 * h)
        dc[interior] = d * (c_pp + 2.0 * c_p / r[interior])
        # surface: ghost from the imposed gradient surface_flux / D
        ghost = c[-2] + 2.0 * h * surface_flux / d
        c_pp_end = (ghost - 2.0 * c[-1] + c[-2]) / h**2
        dc[-1] = d * (c_pp_end + 2.0 * (surface_flux / d) / radius)
        return dc

    sol = solve_ivp(
        rhs,
        (0.0, t_end_s),
        np.asarray([c0(ri) for ri in r], dtype=float),
        method="BDF",
        rtol=1e-9,
        atol=1e-6,
    )
    if not sol.success:
        raise RuntimeError(f"oracle integration failed: {sol.message}")
    return r, sol.y[:, -1]
