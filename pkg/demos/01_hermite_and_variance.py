"""From an observable to a predicted limit variance.

Expands H(x) = x^3 in Wick-scaled Hermite polynomials, computes the
limit constant C for a nearest-neighbour field in d = 2, and watches the
exact finite-N variance of <Phi_N, f> approach its limit.
"""

from bmlab import CovarianceModel, TestFunction, limit_constant
from bmlab.chaos import exact_variance, limit_variance
from bmlab.hermite import expand_power

e = expand_power(3)
print("x^3 =", " + ".join(f"{c:g} He{q}" for q, c in sorted(e.coeffs.items())))

model = CovarianceModel.nearest_neighbour(2, 0.2)
C = limit_constant(e, model)
print(f"C = {C.signed:.6f} (tail estimate {C.tail_estimate:.1e})")

f = TestFunction.eigenfunction((1, 1))
for q, c in sorted(e.coeffs.items()):
    lim = limit_variance(q, c, model, f)
    print(f"\nchaos q={q}: limit variance {lim:.6f}")
    for N in (5, 9, 17, 33, 65):
        v = exact_variance(q, c, model, f, N)
        print(f"  N={N:3d}  exact {v:.6f}  gap {v - lim:+.2e}")
