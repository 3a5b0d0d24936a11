"""Re-derive the quartic for the v_k^2 symbolically and compare with the
quoted coefficients.  Needs sympy."""
import sympy as sp

from biflat.painleve3 import painleve_vi2_lhs, quartic_coefficients

f, fp, fpp, z, R2, D, d13, d23 = sp.symbols("f fp fpp z R2 D d13 d23")
d21 = d23 - d13
g1 = f - z * fp - R2 / 2
g2 = -f + (z - 1) * fp - R2 / 2
phi = D - d23 * g1 - d13 * g2
identity = sp.expand((z * (z - 1) * fpp) ** 2 - 4 * fp * g1 * g2 - phi**2)
print("equation for f matches the expanded identity:",
      sp.expand(painleve_vi2_lhs(f, fp, fpp, z, R2, D, d13, d21, d23) - identity) == 0)

# read the symmetric functions off the shifted equation
s, s1, s2 = sp.symbols("s s1 s2")
a, b = d21**2 / 4, -d21 * d23 / 4
shifted = sp.expand(painleve_vi2_lhs(s + a * z + b, s1 + a, s2, z, R2, D, d13, d21, d23))
W = sp.Symbol("W")
poly = sp.Poly(sp.expand(shifted.subs(s, z * s1 - W)), W, s1, s2)
vprod = -poly.coeff_monomial(W) / 4
e1 = -poly.coeff_monomial(s1**2)
e2 = -poly.coeff_monomial(s1) + 2 * vprod
e3 = -poly.coeff_monomial(1)
derived = (e1, e2, e3, vprod)
quoted = quartic_coefficients(R2, D, d13, d21, d23, "displayed")
for name, d, q in zip(("lambda^3", "lambda^2", "lambda^1", "sqrt(lambda^0)"), derived, quoted):
    diff = sp.factor(sp.expand(d - q))
    print(f"{name:15s} derived - quoted = {diff}")
