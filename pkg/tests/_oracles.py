"""Independent oracles used to pin expected values before the main build.

Nothing here imports the package under test.  The equilibrium oracle uses
closed-form polylogarithm moment formulas with mpmath root finding; the
convolution and entropy-production oracles are plain double loops.  Run as
a script to print the golden values frozen into the test modules.
"""

import numpy as np
import mpmath as mp

mp.mp.dps = 30


# -- Fermi-Dirac moments in closed form --------------------------------------
#
# For M(r) = a exp(-b r^2) / (1 + eps a exp(-b r^2)):
#   integral M dv        = -(pi/b)^(3/2) Li_{3/2}(-eps a) / eps
#   integral M |v|^2 dv  = -(3/2) (1/b) (pi/b)^(3/2) Li_{5/2}(-eps a) / eps
# (expand the Fermi factor as a geometric series and integrate Gaussians).

def fd_mass(a, b, eps):
    a, b, eps = mp.mpf(a), mp.mpf(b), mp.mpf(eps)
    if eps == 0:
        return a * (mp.pi / b) ** mp.mpf("1.5")
    return -(mp.pi / b) ** mp.mpf("1.5") * mp.polylog(mp.mpf("1.5"), -eps * a) / eps


def fd_energy(a, b, eps):
    a, b, eps = mp.mpf(a), mp.mpf(b), mp.mpf(eps)
    if eps == 0:
        return mp.mpf(3) / (2 * b) * a * (mp.pi / b) ** mp.mpf("1.5")
    return (-mp.mpf(3) / (2 * b) * (mp.pi / b) ** mp.mpf("1.5")
            * mp.polylog(mp.mpf("2.5"), -eps * a) / eps)


def solve_equilibrium(rho, E, eps):
    """Newton solve of the two closed-form moment equations."""
    rho, E, eps = mp.mpf(rho), mp.mpf(E), mp.mpf(eps)
    a0 = rho / (2 * mp.pi * E) ** mp.mpf("1.5")
    b0 = 1 / (2 * E)

    def system(la, lb):
        a, b = mp.e**la, mp.e**lb
        return (fd_mass(a, b, eps) - rho, fd_energy(a, b, eps) - 3 * rho * E)

    la, lb = mp.findroot(system, (mp.log(a0), mp.log(b0)))
    return mp.e**la, mp.e**lb


def fd_entropy_radial(a, b, eps, npts=4000, rmax=40.0):
    """-1/eps int [x log x + (1-x) log(1-x)] dv, x = eps M_eps(r), radial."""
    a, b, eps = mp.mpf(a), mp.mpf(b), mp.mpf(eps)

    def integrand(r):
        x = eps * a * mp.e ** (-b * r * r)
        x = x / (1 + x)  # eps * M_eps
        if x <= 0 or x >= 1:
            return mp.mpf(0)
        s = x * mp.log(x) + (1 - x) * mp.log(1 - x)
        return -4 * mp.pi * r * r * s / eps

    return mp.quad(integrand, [0, mp.mpf(rmax)])


# -- direct-sum convolution oracle -------------------------------------------

def direct_convolution_scalar(nodes, gvals, h3, kernel):
    """(k * g)(v_i) by a plain double loop; kernel maps z (3,) to a scalar."""
    N = nodes.shape[0]
    out = np.zeros(N)
    for i in range(N):
        acc = 0.0
        for j in range(N):
            acc += kernel(nodes[i] - nodes[j]) * gvals[j]
        out[i] = acc * h3
    return out


# -- entropy-production oracle ------------------------------------------------

def production_double_loop(nodes, f, u, eps, gamma, h3, fmin_frac=1e-14):
    """(1/2) h^6 sum_ij |z|^(gamma+2) F F* |Pi(z)(u_i - u_j)|^2.

    f: (N,) values; u: (N, 3) logit-gradient samples; F = f (1 - eps f).
    Same node truncation rule as the implementation under test.
    """
    N = nodes.shape[0]
    keep = np.nonzero(f > fmin_frac * f.max())[0]
    F = f * (1.0 - eps * f)
    total = 0.0
    for ii in keep:
        zi = nodes[ii]
        for jj in keep:
            if jj <= ii:
                continue
            z = zi - nodes[jj]
            r2 = z @ z
            if r2 == 0.0:
                continue
            du = u[ii] - u[jj]
            proj = du - (du @ z) / r2 * z
            total += (r2 ** ((gamma + 2.0) / 2.0)) * F[ii] * F[jj] * (proj @ proj)
    return total * h3 * h3


def weight_mass_radial(a, b, eps):
    """integral of m = M_eps (1 - eps M_eps) over R^3, radial quadrature."""
    a, b, eps = mp.mpf(a), mp.mpf(b), mp.mpf(eps)

    def integrand(r):
        M = a * mp.e ** (-b * r * r) / (1 + eps * a * mp.e ** (-b * r * r))
        return r * r * M * (1 - eps * M)

    return 4 * mp.pi * mp.quad(integrand, [0, 5, 15, 40])


def entropy_gap_radial(rho, E, eps):
    """Signed H(M_0) - H(M_eps), both classical Boltzmann entropies.

    M_0 is the Maxwellian with the same (rho, E); always <= 0.
    """
    rho, E, eps = mp.mpf(rho), mp.mpf(E), mp.mpf(eps)
    a, b = solve_equilibrium(rho, E, eps)
    h_classical = rho * (mp.log(rho) - mp.mpf("1.5") * mp.log(2 * mp.pi * E)) \
        - mp.mpf("1.5") * rho

    def integrand(r):
        y = a * mp.e ** (-b * r * r)
        M = y / (1 + eps * y)
        return r * r * M * mp.log(M) if M > 0 else mp.mpf(0)

    h_eps = 4 * mp.pi * mp.quad(integrand, [0, 5, 15, 40])
    return h_classical - h_eps


if __name__ == "__main__":
    print("# golden equilibrium parameters, (rho, E) = (1, 1)")
    for eps in ("1e-12", "0.01", "0.1", "1.0", "4.0"):
        a, b = solve_equilibrium(1, 1, mp.mpf(eps))
        mass = fd_mass(a, b, eps)
        ener = fd_energy(a, b, eps)
        print(f"eps={eps}: a={mp.nstr(a, 17)} b={mp.nstr(b, 17)} "
              f"(mass resid {mp.nstr(mass - 1, 3)}, energy resid {mp.nstr(ener - 3, 3)})")
    a1, b1 = solve_equilibrium(1, 1, 1)
    print("# Fermi-Dirac entropy of the eps=1 equilibrium")
    print("S_eps(M_eps) =", mp.nstr(fd_entropy_radial(a1, b1, 1), 17))
    print("# mass of the linearization weight m = M_eps(1 - eps M_eps), eps=1")
    print("weight_mass =", mp.nstr(weight_mass_radial(a1, b1, 1), 17))
    print("# classical parameters")
    print("a0 =", mp.nstr(1 / (2 * mp.pi) ** mp.mpf("1.5"), 17))
    print("# squared L2 norm of M_0(rho=1, E=1): a^2 (pi/2b)^(3/2)")
    a0 = 1 / (2 * mp.pi) ** mp.mpf("1.5")
    print("M0_L2sq =", mp.nstr(a0 * a0 * mp.pi ** mp.mpf("1.5"), 17))
    print("# thresholds at (1, 1)")
    print("eps_max =", mp.nstr(4 * mp.pi / 3 * 5 ** mp.mpf("1.5"), 17))
    print("eps_bar =", mp.nstr((mp.mpf(2) / 5) ** mp.mpf("2.5")
                               * (6 * mp.pi) ** mp.mpf("1.5"), 17))
    print("eps_dagger =", mp.nstr(
        5 ** mp.mpf("-2.5") * 3 ** (mp.mpf(21) / 4) / (3 + 4 * mp.sqrt(2)) ** 2
        * (2 * mp.pi) ** mp.mpf("1.5") / 2, 17))
    print("eps_one =", mp.nstr((mp.mpf(3) / 5) ** mp.mpf("2.5")
                               * (2 * mp.pi) ** mp.mpf("1.5"), 17))
    print("lambda2 classical floor =", mp.nstr(
        mp.mpf(3) ** 6 / (32 * (3 + 4 * mp.sqrt(2)) ** 5), 17))
