"""High-precision oracle for the manufactured solution, built from the
closed-form fields with mpmath numerical differentiation."""

import mpmath

mpmath.mp.dps = 40


def manufactured_oracle(t, nu=mpmath.mpf("0.3"), E=1, kappa=mpmath.mpf(5) / 6):
    t = mpmath.mpf(t)

    def b1(x, y):
        return 100 * y**3 * (y - 1) ** 3 * x**2 * (x - 1) ** 2 * (2 * x - 1)

    def b2(x, y):
        return 100 * x**3 * (x - 1) ** 3 * y**2 * (y - 1) ** 2 * (2 * y - 1)

    def w(x, y):
        return 100 * (x**3 * (x - 1) ** 3 * y**3 * (y - 1) ** 3 / 3
                      - 2 * t**2 / (5 * (1 - nu)) * (
                          y**3 * (y - 1) ** 3 * x * (x - 1) * (5 * x**2 - 5 * x + 1)
                          + x**3 * (x - 1) ** 3 * y * (y - 1) * (5 * y**2 - 5 * y + 1)))

    lam = kappa * E / (2 * (1 + nu))
    Dc = E / (12 * (1 - nu**2))
    d = mpmath.diff

    def residual_a(x, y):
        # div D eps(beta) + lam t^-2 (grad w - beta)
        e11x = d(b1, (x, y), (2, 0))
        e22y = d(b2, (x, y), (0, 2))
        e12x = (d(b1, (x, y), (1, 1)) + d(b2, (x, y), (2, 0))) / 2
        e12y = (d(b1, (x, y), (0, 2)) + d(b2, (x, y), (1, 1))) / 2
        e22x = d(b2, (x, y), (1, 1))
        e11y = d(b1, (x, y), (1, 1))
        divD = [Dc * ((1 - nu) * (e11x + e12y) + nu * (e11x + e22x)),
                Dc * ((1 - nu) * (e12x + e22y) + nu * (e11y + e22y))]
        shear = [lam / t**2 * (d(w, (x, y), (1, 0)) - b1(x, y)),
                 lam / t**2 * (d(w, (x, y), (0, 1)) - b2(x, y))]
        return [divD[i] + shear[i] for i in range(2)], [max(abs(divD[i]), abs(shear[i])) for i in range(2)]

    def load(x, y):
        lap = d(w, (x, y), (2, 0)) + d(w, (x, y), (0, 2))
        divb = d(b1, (x, y), (1, 0)) + d(b2, (x, y), (0, 1))
        return -lam / t**2 * (lap - divb)

    return dict(b1=b1, b2=b2, w=w, residual_a=residual_a, load=load)
