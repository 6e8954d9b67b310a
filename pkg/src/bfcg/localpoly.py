"""Local polynomial functionals on a spatial lattice with exact gradients.

Constraint densities of the canonical analysis are polynomials of degree
at most three in the phase-space entries and their central differences.
They are represented here as explicit term lists:

    Factor   = (block, comp, daxis)   one field entry, optionally centrally
                                      differenced along lattice axis daxis
                                      (daxis = -1 means no derivative)
    Term     = (coeff, (factor, ...)) a monomial
    Density  = [(free_comp, [terms]), ...]

Because every density is such a shallow polynomial graph, derivatives are
propagated exactly (forward differentiation of each monomial, with the
summation-by-parts adjoint -D for differenced factors); there is no
truncation anywhere, so Poisson-bracket antisymmetry holds to machine
precision.

Phase points are dicts block name -> array with component axes first and
the three lattice axes last.  Each stored component of each block is one
canonical degree of freedom; the lattice bracket normalization is
{q(x), p(y)} = delta_xy / a^3, matching the continuum delta function.
"""

from __future__ import annotations

import numpy as np

from .lattice import Lattice

__all__ = [
    "term",
    "scale_terms",
    "mul_terms",
    "Density",
    "evaluate_density",
    "LocalFunctional",
    "smear",
    "evaluate_smeared",
    "functional_gradient",
    "poisson_bracket",
]

_TINY = 1e-15


def term(coeff, *factors):
    """Build one monomial; factors are (block, comp) or (block, comp, daxis)."""
    norm = []
    for f in factors:
        if len(f) == 2:
            norm.append((f[0], tuple(f[1]), -1))
        else:
            norm.append((f[0], tuple(f[1]), f[2]))
    return (float(coeff), tuple(norm))


def scale_terms(terms, c):
    if abs(c) < _TINY:
        return []
    return [(coeff * c, factors) for coeff, factors in terms]


def mul_terms(terms_a, terms_b, c=1.0):
    """Product of two term lists (polynomial multiplication)."""
    out = []
    for ca, fa in terms_a:
        for cb, fb in terms_b:
            coeff = c * ca * cb
            if abs(coeff) >= _TINY:
                out.append((coeff, fa + fb))
    return out


class Density:
    """A local density with free components.

    comp_shape is the shape of the free-component index block; per_comp maps
    a free-component tuple to its term list.
    """

    def __init__(self, comp_shape, per_comp=None):
        self.comp_shape = tuple(comp_shape)
        self.per_comp = dict(per_comp or {})

    def add(self, fc, terms):
        fc = tuple(fc)
        self.per_comp.setdefault(fc, []).extend(
            t for t in terms if abs(t[0]) >= _TINY)

    def items(self):
        return self.per_comp.items()

    def compress(self):
        """Merge terms with identical factor tuples (order-sensitive key)."""
        for fc, terms in self.per_comp.items():
            acc = {}
            for coeff, factors in terms:
                key = tuple(sorted(factors))
                if key in acc:
                    acc[key] = (acc[key][0] + coeff, acc[key][1])
                else:
                    acc[key] = (coeff, factors)
            self.per_comp[fc] = [
                (c, f) for c, f in acc.values() if abs(c) >= _TINY]
        return self


def _central(arr, axis3, a):
    ax = arr.ndim - 3 + axis3
    return (np.roll(arr, -1, axis=ax) - np.roll(arr, 1, axis=ax)) / (2.0 * a)


class _FactorCache:
    def __init__(self, point, a):
        self.point = point
        self.a = a
        self.cache = {}

    def get(self, factor):
        if factor not in self.cache:
            block, comp, daxis = factor
            arr = self.point[block][comp]
            if daxis >= 0:
                arr = _central(arr, daxis, self.a)
            self.cache[factor] = arr
        return self.cache[factor]


def evaluate_density(density: Density, point: dict, lattice: Lattice) -> np.ndarray:
    """Pointwise values of the density, shape (comp_shape..., n, n, n)."""
    shape = density.comp_shape + lattice.shape
    out = np.zeros(shape)
    fcache = _FactorCache(point, lattice.a)
    for fc, terms in density.items():
        acc = out[fc]
        for coeff, factors in terms:
            prod = None
            for f in factors:
                v = fcache.get(f)
                prod = v.copy() if prod is None else prod * v
            if prod is None:
                acc += coeff
            else:
                acc += coeff * prod
    return out


class LocalFunctional:
    """a^3 * sum_x sum_entries coeff * weight(x) * prod factors(x).

    weight is an (n,n,n) array, a scalar, or None (meaning 1).
    """

    def __init__(self, lattice: Lattice, entries):
        self.lattice = lattice
        self.entries = [e for e in entries if abs(e[0]) >= _TINY]

    def value(self, point: dict) -> float:
        a3 = self.lattice.a ** 3
        fcache = _FactorCache(point, self.lattice.a)
        total = 0.0
        for coeff, weight, factors in self.entries:
            prod = None
            for f in factors:
                v = fcache.get(f)
                prod = v.copy() if prod is None else prod * v
            if prod is None:
                if weight is None:
                    total += coeff * self.lattice.n ** 3
                else:
                    total += coeff * float(np.sum(weight))
            else:
                if weight is not None:
                    prod = prod * weight
                total += coeff * float(np.sum(prod))
        return a3 * total

    def gradient(self, point: dict) -> dict:
        """Exact partial derivatives w.r.t. every stored entry of every block."""
        a3 = self.lattice.a ** 3
        a = self.lattice.a
        fcache = _FactorCache(point, a)
        grad = {name: np.zeros_like(arr) for name, arr in point.items()}
        shape = self.lattice.shape
        for coeff, weight, factors in self.entries:
            vals = [fcache.get(f) for f in factors]
            for j, (block, comp, daxis) in enumerate(factors):
                if block not in grad:
                    continue
                partial = np.full(shape, coeff * a3) if weight is None \
                    else coeff * a3 * (weight * np.ones(shape))
                for k, v in enumerate(vals):
                    if k != j:
                        partial = partial * v
                if daxis < 0:
                    grad[block][comp] += partial
                else:
                    # adjoint of the central difference on a periodic lattice
                    grad[block][comp] -= _central(partial, daxis, a)
        return grad


def smear(density: Density, test, lattice: Lattice) -> LocalFunctional:
    """Pair a density with a test field: value = a^3 sum_x test . density.

    test is an array of shape (comp_shape..., n, n, n) or (comp_shape...,)
    (constant test), or None for an unsmeared scalar density.
    """
    entries = []
    if test is None:
        for fc, terms in density.items():
            for coeff, factors in terms:
                entries.append((coeff, None, factors))
        return LocalFunctional(lattice, entries)
    test = np.asarray(test, dtype=float)
    ncomp = len(density.comp_shape)
    if test.shape[:ncomp] != density.comp_shape:
        raise ValueError(
            f"test shape {test.shape} does not match free components "
            f"{density.comp_shape}")
    per_site = test.ndim == ncomp + 3
    if not per_site and test.shape != density.comp_shape:
        raise ValueError(f"bad test shape {test.shape}")
    for fc, terms in density.items():
        w = test[fc]
        if not per_site:
            w = float(w)
            if abs(w) < _TINY:
                continue
            for coeff, factors in terms:
                entries.append((coeff * w, None, factors))
        else:
            for coeff, factors in terms:
                entries.append((coeff, w, factors))
    return LocalFunctional(lattice, entries)


def evaluate_smeared(fn: LocalFunctional, point: dict) -> float:
    return fn.value(point)


def functional_gradient(fn: LocalFunctional, point: dict) -> dict:
    return fn.gradient(point)


def poisson_bracket(fn_f: LocalFunctional, fn_g: LocalFunctional, point: dict,
                    pairs) -> float:
    """{F, G} with the lattice pairing {q(x), p(y)} = delta_xy / a^3.

    pairs lists the canonical (coordinate block, momentum block) names.
    """
    if fn_f.lattice != fn_g.lattice:
        raise ValueError("functionals live on different lattices")
    gf = fn_f.gradient(point)
    gg = fn_g.gradient(point)
    a3 = fn_f.lattice.a ** 3
    total = 0.0
    for qb, pb in pairs:
        total += float(np.sum(gf[qb] * gg[pb]) - np.sum(gf[pb] * gg[qb]))
    return total / a3
