#!/usr/bin/env python3
"""Derive the elastostatic half-space surface Green's tensor and emit C++ kernels.

The displacement field of a unit point force in the half space x3 <= 0 with a
traction-free boundary at x3 = 0 is built from the full-space Kelvin solution
plus a correction expanded in image-point potential fields (image Kelvin
fields, their vertical/horizontal derivatives, gradients of image-centered
harmonics, and Papkovich-Neuber blocks).  The correction coefficients are
polynomials in the source depth h with nu-dependent entries; they are fixed by
requiring the surface traction to vanish identically, which reduces to a
polynomial identity after rationalization.

Verification strategy: every candidate basis block is checked against the
Navier operator exactly, by substituting rational points at which all radicals
collapse to rationals (Pythagorean quadruples) while nu stays symbolic; the
solved total field is re-checked the same way for the surface traction, and
numerically for reciprocity and far-field decay.  A field with the Kelvin
singularity, zero Navier residual, zero surface traction, and decay at
infinity is the half-space Green's tensor by uniqueness of the exterior
traction problem, so these checks pin the result.

Outputs (written into src/):
  green_force_gen.inc     G_ip(x; source) for interior field points
  disloc_interior_gen.inc T_ipq = dG_ip/dsource_q for interior field points
  disloc_surface_gen.inc  T_ipq specialized to field points on x3 = 0

Also prints frozen numeric reference values used by the C++ unit tests.

Run from the repository root:  python3 tools/dev/generate_green_kernels.py
"""

import sys
import time

import mpmath
import sympy as sp
from sympy import sqrt, log, Rational, symbols, diff, together, cancel, expand

t0 = time.time()


def stamp(msg):
    print(f"[{time.time() - t0:7.1f}s] {msg}", flush=True)


x, y, z = symbols("x y z", real=True)
h = symbols("h", positive=True)
nu = symbols("nu", real=True)
kappa = 3 - 4 * nu

R1 = sqrt(x * x + y * y + (z + h) ** 2)   # distance to the source (0,0,-h)
R2 = sqrt(x * x + y * y + (z - h) ** 2)   # distance to the image (0,0,+h)
r1v = sp.Matrix([x, y, z + h])
r2v = sp.Matrix([x, y, z - h])
chi = log(R2 + h - z)                      # harmonic, regular for x3 <= 0

EX, EY, EZ = (sp.Matrix(c) for c in ([1, 0, 0], [0, 1, 0], [0, 0, 1]))
COORDS = (x, y, z)


def kelvin(rv, R, k):
    """Unnormalized Kelvin displacement for a unit force along axis k."""
    ek = (EX, EY, EZ)[k]
    return kappa / R * ek + (rv[k] / R ** 3) * rv


def pn(psi):
    """Papkovich-Neuber displacement for vector potential psi (phi = 0)."""
    rdotpsi = (r2v.T * psi)[0]
    return 4 * (1 - nu) * psi - sp.Matrix([diff(rdotpsi, c) for c in COORDS])


def grad(f):
    return sp.Matrix([diff(f, c) for c in COORDS])


def navier(u):
    """Navier operator divided by mu: Laplacian(u) + grad(div u)/(1-2nu)."""
    divu = sum(diff(u[i], COORDS[i]) for i in range(3))
    out = []
    for i in range(3):
        lap = sum(diff(u[i], c, 2) for c in COORDS)
        out.append(lap + diff(divu, COORDS[i]) / (1 - 2 * nu))
    return sp.Matrix(out)


def traction_z(u):
    """(sigma_13, sigma_23, sigma_33) divided by mu, lam/mu = 2nu/(1-2nu)."""
    lam_over_mu = 2 * nu / (1 - 2 * nu)
    divu = sum(diff(u[i], COORDS[i]) for i in range(3))
    t = []
    for i in range(3):
        e_i3 = (diff(u[i], z) + diff(u[2], COORDS[i])) / 2
        s = 2 * e_i3
        if i == 2:
            s += lam_over_mu * divu
        t.append(s)
    return sp.Matrix(t)


# Points with x^2+y^2+(z+h)^2 and x^2+y^2+(z-h)^2 both perfect squares, so
# substitution turns every radical into a rational and leaves a rational
# function of nu alone, which cancel() decides exactly.
NAVIER_POINTS = [
    {x: 3, y: 4, z: -6, h: 6},                                   # R1=5, R2=13
    {x: 8, y: 6, z: -12, h: 12},                                 # R1=10,R2=26
    {x: Rational(3, 2), y: 2, z: -3, h: 3},
    {x: 4, y: 3, z: -6, h: 6},
    {x: -3, y: 4, z: -6, h: 6},
    {x: 3, y: -4, z: -6, h: 6},
]

# Surface points (z = 0) with x^2+y^2+h^2 a perfect square.
SURFACE_POINTS = [
    {x: 1, y: 2, z: 0, h: 2},
    {x: 2, y: 3, z: 0, h: 6},
    {x: 1, y: 4, z: 0, h: 8},
    {x: 4, y: 4, z: 0, h: 7},
    {x: -2, y: 6, z: 0, h: 9},
    {x: Rational(1, 2), y: 1, z: 0, h: 1},
    {x: 6, y: -2, z: 0, h: 9},
]


def exact_zero(expr, pts):
    """True when expr vanishes identically on the given exact points."""
    for pt in pts:
        v = cancel(together(expr.subs(pt)))
        if v != 0:
            return False
    return True


# ---------------------------------------------------------------------------
# Correction bases.  Every block decays at infinity and is regular in x3 <= 0.
# ---------------------------------------------------------------------------

p0 = 1 / R2
p_z = diff(p0, z)
p_x = diff(p0, x)
c_x = diff(chi, x)
# theta = (h-z)*chi - R2 is harmonic with d(theta)/dz = -chi; its x-derivative
# -x/(R2+h-z) generates the Cerruti-type groups free of a 1/R2 factor
th_x = -x / (R2 + h - z)

basis_z = [
    kelvin(r2v, R2, 2),
    sp.Matrix([diff(c, z) for c in kelvin(r2v, R2, 2)]),
    grad(p0),
    grad(p_z),
    grad(chi),
    pn(EZ * p_z),
    grad(diff(p0, z, 2)),
]

basis_x = [
    kelvin(r2v, R2, 0),
    sp.Matrix([diff(c, z) for c in kelvin(r2v, R2, 0)]),
    sp.Matrix([diff(c, x) for c in kelvin(r2v, R2, 2)]),
    grad(p_x),
    grad(c_x),
    grad(diff(p_x, z)),
    pn(EX * c_x),
    pn(EZ * p_x),
    pn(EZ * c_x),
    pn(EY * diff(c_x, y)),
    pn(EX * p_z),
    pn(EX * diff(c_x, x)),
    grad(diff(c_x, x, 2)),
    grad(th_x),
    pn(EX * diff(th_x, x)),
    pn(EY * diff(th_x, y)),
]

stamp("verifying Navier equation for each basis block (exact points)")
for name, blocks in (("z", basis_z), ("x", basis_x)):
    for idx, b in enumerate(blocks):
        for comp in navier(b):
            if not exact_zero(comp, NAVIER_POINTS):
                sys.exit(f"FATAL: basis_{name}[{idx}] violates Navier")
for j in range(3):
    for comp in navier(kelvin(r1v, R1, j)):
        if not exact_zero(comp, NAVIER_POINTS):
            sys.exit(f"FATAL: source Kelvin field {j} violates Navier")
stamp("all blocks satisfy Navier")


# ---------------------------------------------------------------------------
# Solve the traction matching at z = 0.
# ---------------------------------------------------------------------------

R0 = symbols("R0", positive=True)
rho2 = x * x + y * y + h * h


def rationalize_on_surface(expr):
    """Turn a z=0 traction component into a polynomial in (x, y, h, R0).

    On z = 0 both distances collapse to R0 = sqrt(x^2+y^2+h^2).  The chi-type
    terms carry (R0 + h) denominators; clearing those and reducing even powers
    of R0 via R0^2 = x^2 + y^2 + h^2 leaves a genuine polynomial identity.
    """
    e = expr.subs(z, 0)
    e = e.subs(sqrt(rho2), R0).subs(rho2, R0 * R0)
    if e.has(sqrt(rho2)):
        sys.exit("FATAL: radical left after surface substitution")
    e = together(cancel(together(e)))
    num, den = sp.fraction(e)
    num = expand(num)
    if num.has(sp.Pow):
        for p in num.atoms(sp.Pow):
            if p.exp.is_Rational and not p.exp.is_Integer:
                sys.exit(f"FATAL: fractional power survives: {p}")
    # reduce R0 powers >= 2 to keep monomials independent
    num = expand(sp.Poly(expr_reduce(num), x, y, h, R0).as_expr())
    return num, den


def expr_reduce(num):
    num = expand(num)
    changed = True
    while changed:
        changed = False
        newnum = 0
        for term in sp.Add.make_args(num):
            c, p = term.as_coeff_exponent(R0)
            if p >= 2:
                k = int(p) // 2
                newnum += c * (rho2 ** k) * R0 ** (int(p) - 2 * k)
                changed = changed or k > 0
            else:
                newnum += term
        num = expand(newnum)
    return num


def solve_case(src_axis, blocks, tag):
    ncoef = []
    unknowns = []
    for a in range(len(blocks)):
        row = symbols(f"c{tag}{a}_0 c{tag}{a}_1 c{tag}{a}_2")
        ncoef.append(row[0] + row[1] * h + row[2] * h * h)
        unknowns.extend(row)

    total = kelvin(r1v, R1, src_axis)
    for c, b in zip(ncoef, blocks):
        total = total + c * b

    trac = traction_z(total)
    eqs = []
    for comp in trac:
        num, _den = rationalize_on_surface(comp)
        poly = sp.Poly(num, x, y, h, R0)
        eqs.extend(poly.coeffs())
    stamp(f"force-{tag}: {len(eqs)} monomial equations, {len(unknowns)} unknowns")
    sol = sp.linsolve(eqs, unknowns)
    if not sol:
        sys.exit(f"FATAL: traction matching for force-{tag} is infeasible")
    solvec = list(sol)[0]
    subs_map = {}
    free = 0
    for u_, v_ in zip(unknowns, solvec):
        if v_.has(*unknowns):
            free += 1
        subs_map[u_] = v_
    # null directions of an overcomplete basis: set free parameters to zero
    for u_ in unknowns:
        subs_map[u_] = subs_map[u_].subs({w: 0 for w in unknowns})
    stamp(f"force-{tag}: solved ({free} free parameters zeroed)")
    coeffs = [cancel(c.subs(subs_map)) for c in ncoef]
    for a, c in enumerate(coeffs):
        print(f"    c[{tag}][{a}] = {c}", flush=True)
    total = kelvin(r1v, R1, src_axis)
    for c, b in zip(coeffs, blocks):
        total = total + c * b

    stamp(f"force-{tag}: exact surface-traction recheck")
    for comp in traction_z(total):
        if not exact_zero(comp, SURFACE_POINTS):
            sys.exit(f"FATAL: solved force-{tag} field fails traction recheck")
    return total


stamp("matching surface traction for the vertical force")
uz_field = solve_case(2, basis_z, "z")
stamp("matching surface traction for the horizontal force")
ux_field = solve_case(0, basis_x, "x")

# force along y from the x case by swapping the two horizontal axes
swap = {x: y, y: x}
uy_field = sp.Matrix([
    ux_field[1].subs(swap, simultaneous=True),
    ux_field[0].subs(swap, simultaneous=True),
    ux_field[2].subs(swap, simultaneous=True),
])

# columns j = force direction, rows i = displacement component; the overall
# factor 1/(16 pi mu (1-nu)) is applied in the emitted code
Gcols = [ux_field, uy_field, uz_field]


# ---------------------------------------------------------------------------
# Numeric verification of the assembled tensor.
# ---------------------------------------------------------------------------

stamp("numeric verification: reciprocity and decay")
mpmath.mp.dps = 40
nut = Rational(1, 4)


def G_num(xi, yi, zi, hi):
    subs = {x: sp.nsimplify(xi), y: sp.nsimplify(yi), z: sp.nsimplify(zi),
            h: sp.nsimplify(hi), nu: nut}
    pref = 1 / (16 * sp.pi * (1 - nut))  # mu = 1
    return sp.Matrix(3, 3,
                     lambda i, j: sp.N(pref * Gcols[j][i].subs(subs), 30))


import random

random.seed(7)

max_rec = 0.0
for _ in range(5):
    p = [Rational(random.randint(-200, 200), 10) for _ in range(2)]
    p.append(Rational(random.randint(-300, -10), 10))
    q = [Rational(random.randint(-200, 200), 10) for _ in range(2)]
    q.append(Rational(random.randint(-300, -10), 10))
    # general receiver/source pair via horizontal translation invariance
    Gpq = G_num(p[0] - q[0], p[1] - q[1], p[2], -q[2])
    Gqp = G_num(q[0] - p[0], q[1] - p[1], q[2], -p[2])
    for i in range(3):
        for j in range(3):
            d = abs(Gpq[i, j] - Gqp[j, i]) / max(abs(Gpq[i, j]), 1e-30)
            max_rec = max(max_rec, float(d))
if max_rec > 1e-20:
    sys.exit(f"FATAL: reciprocity residual {max_rec:.3e}")
stamp(f"reciprocity residual {max_rec:.2e}")

v1 = G_num(100, 50, -40, 10)
v2 = G_num(200, 100, -80, 10)
ratio = float(abs(v1[0, 0] / v2[0, 0]))
if not 1.8 < ratio < 2.2:
    sys.exit(f"FATAL: far-field decay ratio {ratio}")
stamp(f"far-field decay ratio at doubled distance {ratio:.4f}")


# ---------------------------------------------------------------------------
# Dislocation kernels: derivatives with respect to the source position.
# ---------------------------------------------------------------------------

stamp("building source-derivative kernels")
s1, s2, s3 = symbols("s1 s2 s3", real=True)
x1f, x2f, x3f = symbols("x1 x2 x3", real=True)

src_subs = {x: x1f - s1, y: x2f - s2, z: x3f, h: -s3}

Gfull = sp.Matrix(3, 3, lambda i, j: Gcols[j][i].subs(src_subs,
                                                      simultaneous=True))

T_interior = [[[diff(Gfull[i, p], (s1, s2, s3)[q]) for q in range(3)]
               for p in range(3)] for i in range(3)]
stamp("interior derivative tensor built")
T_surface = [[[T_interior[i][p][q].subs(x3f, 0) for q in range(3)]
              for p in range(3)] for i in range(3)]
stamp("surface specialization built")


# ---------------------------------------------------------------------------
# C++ code emission with common subexpression elimination.
# ---------------------------------------------------------------------------

def emit(fname, func_name, arg_syms, exprs, out_name, doc):
    repl, red = sp.cse(exprs, optimizations="basic",
                       symbols=sp.numbered_symbols("t"))
    lines = [
        "// Generated by tools/dev/generate_green_kernels.py; do not edit.",
        f"// {doc}",
        "// The prefactor 1/(16 pi (1-nu) mu) is included; mu enters only there.",
        f"inline void {func_name}(" +
        ", ".join(f"double {s}" for s in arg_syms) +
        f", double nu, double mu, double* {out_name}) {{",
        "  const double pref = 1.0 / (16.0 * M_PI * (1.0 - nu) * mu);",
    ]
    for sym, ex in repl:
        lines.append(f"  const double {sym} = {sp.ccode(ex)};")
    for k, ex in enumerate(red):
        lines.append(f"  {out_name}[{k}] = pref * ({sp.ccode(ex)});")
    lines.append("}")
    with open(fname, "w") as f:
        f.write("\n".join(lines) + "\n")
    stamp(f"wrote {fname}: {len(repl)} temporaries, {len(red)} outputs")


stamp("emitting green_force_gen.inc")
g_exprs = [Gcols[j][i] for i in range(3) for j in range(3)]
emit("src/green_force_gen.inc", "green_force_kernel",
     ["x", "y", "z", "h"], g_exprs, "G",
     "Row-major G[3*i+j]: displacement i at (x,y,z), unit force j at (0,0,-h).")

stamp("emitting disloc_interior_gen.inc (this is the large one)")
ti_exprs = [T_interior[i][p][q]
            for i in range(3) for p in range(3) for q in range(3)]
emit("src/disloc_interior_gen.inc", "disloc_interior_kernel",
     ["x1", "x2", "x3", "s1", "s2", "s3"], ti_exprs, "T",
     "T[9*i+3*p+q] = dG_ip/ds_q: receiver (x1,x2,x3), source (s1,s2,s3).")

stamp("emitting disloc_surface_gen.inc")
ts_exprs = [T_surface[i][p][q]
            for i in range(3) for p in range(3) for q in range(3)]
emit("src/disloc_surface_gen.inc", "disloc_surface_kernel",
     ["x1", "x2", "s1", "s2", "s3"], ts_exprs, "T",
     "T[9*i+3*p+q] = dG_ip/ds_q at receiver (x1,x2,0), source (s1,s2,s3).")


# ---------------------------------------------------------------------------
# Frozen reference values for the C++ unit tests.
# ---------------------------------------------------------------------------

stamp("reference values (nu = 0.25, mu = 1)")


def show(tag, M):
    for i in range(3):
        row = ", ".join(mpmath.nstr(mpmath.mpf(str(M[i, j])), 17)
                        for j in range(3))
        print(f"    {tag}[{i}] = {{{row}}};", flush=True)


GA = G_num(10, 10, 0, 14)
print("  G at receiver (10,10,0), source (0,0,-14):")
show("GA", GA)

GB = G_num(Rational(-3, 2), Rational(5, 2), Rational(-11, 10),
           Rational(19, 4))
print("  G at receiver (-1.5,2.5,-1.1), source (0,0,-4.75):")
show("GB", GB)

subsT = {x1f: 10, x2f: 10, s1: 0, s2: 0, s3: -14, nu: nut}
prefv = 1 / (16 * sp.pi * (1 - nut))
print("  T (surface) receiver (10,10), source (0,0,-14), i,p,q flattened:")
for i in range(3):
    vals = []
    for p in range(3):
        for q in range(3):
            vals.append(sp.N(prefv * T_surface[i][p][q].subs(subsT), 20))
    print(f"    TS[{i}] = {{" + ", ".join(mpmath.nstr(mpmath.mpf(str(v)), 17)
                                          for v in vals) + "}};", flush=True)

stamp("done")
