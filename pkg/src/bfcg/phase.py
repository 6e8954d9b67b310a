"""Canonical phase space on a spatial 3-lattice.

A PhasePoint stores every spacetime component of the four fields plus the
conjugate momenta, as a dict of blocks (component axes first, three lattice
axes last):

    coordinates (upper Lie index)        momenta (lower Lie index)
    A0   (p,)      A^a_0                 pA0   (p,)     pi(A)_a^0
    A    (3, p)    A^a_i                 pA    (3, p)   pi(A)_a^i
    B0   (3, p)    B^a_{0i}              pB0   (3, p)   pi(B)_a^{0i}
    B    (3, p)    B^a_{jk}, j<k         pB    (3, p)   pi(B)_a^{jk}
    C0   (q,)      C^al_0                pC0   (q,)     pi(C)_al^0
    C    (3, q)    C^al_i                pC    (3, q)   pi(C)_al^i
    be0  (3, q)    beta^al_{0i}          pbe0  (3, q)   pi(beta)_al^{0i}
    be   (3, q)    beta^al_{jk}, j<k     pbe   (3, q)   pi(beta)_al^{jk}

Antisymmetric components sit on ordered pairs; every stored entry is one
canonical degree of freedom, so {q(x), p(y)} = delta_xy / a^3 reproduces
the continuum fundamental brackets with the unweighted antisymmetrized
delta on pair indices.

The on-shell momentum rule

    pi(A)_a^i = 1/2 eps^{ijk} B_{a jk},   pi(beta)_al^{ij} = -eps^{ijk} C_{al k},
    pi(B) = pi(C) = 0,  pi(A)_a^0 = 0,    pi(beta)_al^{0i} = 0

makes every primary constraint vanish identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import (EPS3_PAIR, FieldConfiguration, Lattice,
                      _random_recipe, pairs)

__all__ = [
    "PhasePoint",
    "block_shapes",
    "CANONICAL_PAIRS",
    "GAUGE_FIXED_PAIRS",
    "zero_phase_point",
    "phase_from_config",
    "PhaseRecipe",
    "make_phase_recipe",
    "random_phase_point",
    "onshell_momenta",
    "dump_phase_point",
    "load_phase_point",
]

CANONICAL_PAIRS = (
    ("A0", "pA0"), ("A", "pA"), ("B0", "pB0"), ("B", "pB"),
    ("C0", "pC0"), ("C", "pC"), ("be0", "pbe0"), ("be", "pbe"),
)

GAUGE_FIXED_PAIRS = (("A", "pA"), ("be", "pbe"))

COORD_BLOCKS = ("A0", "A", "B0", "B", "C0", "C", "be0", "be")
MOMENTUM_BLOCKS = ("pA0", "pA", "pB0", "pB", "pC0", "pC", "pbe0", "pbe")


def block_shapes(p: int, q: int) -> dict:
    base = {
        "A0": (p,), "A": (3, p), "B0": (3, p), "B": (3, p),
        "C0": (q,), "C": (3, q), "be0": (3, q), "be": (3, q),
    }
    base.update({"p" + k: v for k, v in base.items()})
    return base


@dataclass
class PhasePoint:
    """All canonical coordinates and momenta on a spatial lattice."""

    lattice: Lattice
    p: int
    q: int
    blocks: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lattice.D != 3:
            raise ValueError("phase points live on D=3 lattices")
        want = block_shapes(self.p, self.q)
        for name, comp in want.items():
            if name not in self.blocks:
                self.blocks[name] = np.zeros(comp + self.lattice.shape)
            else:
                arr = np.asarray(self.blocks[name], dtype=float)
                if arr.shape != comp + self.lattice.shape:
                    raise ValueError(f"block {name!r} has shape {arr.shape}")
                if arr.size and not np.all(np.isfinite(arr)):
                    raise ValueError(f"block {name!r} has non-finite entries")
                self.blocks[name] = arr

    def copy(self) -> "PhasePoint":
        return PhasePoint(self.lattice, self.p, self.q,
                          {k: v.copy() for k, v in self.blocks.items()})

    def __getitem__(self, name):
        return self.blocks[name]


def zero_phase_point(cm, lattice: Lattice) -> PhasePoint:
    return PhasePoint(lattice, cm.p, cm.q, {})


def onshell_momenta(cm, blocks: dict, lattice: Lattice) -> dict:
    """Momenta that make every primary constraint vanish exactly."""
    p, q = cm.p, cm.q
    shape = lattice.shape
    out = {
        "pA0": np.zeros((p,) + shape),
        "pB0": np.zeros((3, p) + shape),
        "pB": np.zeros((3, p) + shape),
        "pC0": np.zeros((q,) + shape),
        "pC": np.zeros((3, q) + shape),
        "pbe0": np.zeros((3, q) + shape),
    }
    # pi(A)_a^i = 1/2 eps^{ijk} B_{a jk} = sum_P s(i,P) (Q B)[P]
    B_low = np.einsum("ab,Pb...->Pa...", cm.Q, blocks["B"])
    pA = np.zeros((3, p) + shape)
    for i in range(3):
        for P in range(3):
            s = EPS3_PAIR[i, P]
            if s:
                pA[i] += s * B_low[P]
    out["pA"] = pA
    # pi(beta)_al^{jk} = -eps^{jkl} C_{al l'} = -s(dual,P) (qf C)[dual(P)]
    pbe = np.zeros((3, q) + shape)
    if q:
        C_low = np.einsum("xy,my...->mx...", cm.qf, blocks["C"])
        for P, (j, k) in enumerate(pairs(3)):
            dual = 3 - j - k
            pbe[P] = -EPS3_PAIR[dual, P] * C_low[dual]
    out["pbe"] = pbe
    return out


def phase_from_config(cm, cfg: FieldConfiguration, momentum_rule: str = "on_shell",
                      time_slice: int = 0, seed: int = 0) -> PhasePoint:
    """Restrict a D=4 configuration to one time slice and attach momenta.

    momentum_rule "on_shell" gives exactly vanishing primary constraints;
    "random" draws independent smooth momenta (a generic off-constraint
    point), deterministic in seed.
    """
    if cfg.lattice.D != 4:
        raise ValueError("phase_from_config expects a D=4 configuration")
    n, a = cfg.lattice.n, cfg.lattice.a
    lat3 = Lattice(D=3, n=n, a=a)
    t = time_slice % n
    P4 = pairs(4)
    temporal = [P4.index((0, i + 1)) for i in range(3)]
    spatial = [P4.index((i + 1, j + 1)) for (i, j) in pairs(3)]

    blocks = {
        "A0": cfg.A[0][:, t],
        "A": np.stack([cfg.A[1 + i][:, t] for i in range(3)]),
        "C0": cfg.C[0][:, t],
        "C": np.stack([cfg.C[1 + i][:, t] for i in range(3)]),
        "B0": np.stack([cfg.B[P][:, t] for P in temporal]),
        "B": np.stack([cfg.B[P][:, t] for P in spatial]),
        "be0": np.stack([cfg.beta[P][:, t] for P in temporal]),
        "be": np.stack([cfg.beta[P][:, t] for P in spatial]),
    }
    if momentum_rule == "on_shell":
        blocks.update(onshell_momenta(cm, blocks, lat3))
    elif momentum_rule == "random":
        rng_seed = seed
        shapes = block_shapes(cm.p, cm.q)
        rng = np.random.default_rng(rng_seed)
        for name in MOMENTUM_BLOCKS:
            rec = _random_recipe(rng, 3, shapes[name], 1)
            blocks[name] = rec.realize(lat3)
    else:
        raise ValueError(f"unknown momentum rule {momentum_rule!r}")
    return PhasePoint(lat3, cm.p, cm.q, blocks)


@dataclass
class PhaseRecipe:
    """Resolution-independent recipes for every phase-space block.

    With rule "on_shell" the momenta are derived from the realized
    coordinate fields; with rule "random" they have their own recipes.
    """

    p: int
    q: int
    rule: str
    coord: dict
    mom: dict

    def realize_with(self, cm, lattice: Lattice) -> PhasePoint:
        blocks = {name: rec.realize(lattice) for name, rec in self.coord.items()}
        if self.rule == "on_shell":
            blocks.update(onshell_momenta(cm, blocks, lattice))
        else:
            for name, rec in self.mom.items():
                blocks[name] = rec.realize(lattice)
        return PhasePoint(lattice, self.p, self.q, blocks)


def make_phase_recipe(cm, mode_count: int, seed: int, rule: str = "random",
                      scale: float = 1.0) -> PhaseRecipe:
    if rule not in ("random", "on_shell"):
        raise ValueError(f"unknown momentum rule {rule!r}")
    rng = np.random.default_rng(seed)
    shapes = block_shapes(cm.p, cm.q)
    coord = {name: _random_recipe(rng, 3, shapes[name], mode_count, scale)
             for name in COORD_BLOCKS}
    mom = {}
    if rule == "random":
        mom = {name: _random_recipe(rng, 3, shapes[name], mode_count, scale)
               for name in MOMENTUM_BLOCKS}
    return PhaseRecipe(p=cm.p, q=cm.q, rule=rule, coord=coord, mom=mom)


def random_phase_point(cm, lattice: Lattice, seed: int, rule: str = "random",
                       mode_count: int = 1, scale: float = 1.0) -> PhasePoint:
    """Generic smooth phase point, deterministic in seed."""
    return make_phase_recipe(cm, mode_count, seed, rule, scale).realize_with(cm, lattice)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_BLOCK_ORDER = COORD_BLOCKS + MOMENTUM_BLOCKS


def dump_phase_point(point: PhasePoint, module_name: str = "") -> str:
    lat = point.lattice
    lines = [
        "# phase-point v1",
        "# blocks: coordinates then momenta; pair components on ordered j<k",
        f"module {module_name or 'unnamed'}",
        f"p {point.p}",
        f"q {point.q}",
        f"n {lat.n}",
        f"a {lat.a!r}",
    ]
    for name in _BLOCK_ORDER:
        arr = point.blocks[name]
        dims = " ".join(str(d) for d in arr.shape)
        lines.append(f"block {name} {dims}")
        flat = arr.reshape(-1)
        for start in range(0, flat.size, 6):
            lines.append(" ".join(repr(float(v)) for v in flat[start:start + 6]))
    return "\n".join(lines) + "\n"


def load_phase_point(text: str) -> PhasePoint:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    meta, arrays = {}, {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if parts[0] in ("module", "p", "q", "n", "a"):
            meta[parts[0]] = parts[1]
            i += 1
        elif parts[0] == "block":
            name = parts[1]
            shape = tuple(int(s) for s in parts[2:])
            need = int(np.prod(shape)) if shape else 1
            vals = []
            i += 1
            while len(vals) < need:
                if i >= len(lines):
                    raise ValueError(f"block {name!r}: truncated data")
                vals.extend(float(tok) for tok in lines[i].split())
                i += 1
            arrays[name] = np.array(vals).reshape(shape)
        else:
            raise ValueError(f"unrecognized line: {lines[i]!r}")
    lat = Lattice(D=3, n=int(meta["n"]), a=float(meta["a"]))
    return PhasePoint(lat, int(meta["p"]), int(meta["q"]), arrays)
