"""Periodic hypercubic lattices, discrete derivatives, and smooth test fields.

Fields live on a periodic n^D lattice with spacing a; arrays carry the
component axes first and the D lattice axes last, so field[comp] is an
(n, ..., n) site array.  The only derivative used anywhere is the central
difference

    (D_mu f)(x) = (f(x + e_mu) - f(x - e_mu)) / (2a),

which on a periodic lattice satisfies summation by parts exactly:
sum_x g (D f) = -sum_x (D g) f.

Antisymmetric form components are stored on ordered index pairs mu < nu
(and ordered triples for 3-forms); reconstruction uses X_{nu mu} = -X_{mu nu}.

Smooth configurations are real trigonometric polynomials.  A FieldRecipe
stores Fourier coefficients against integer frequencies of the fixed
physical box (extent L = n*a held constant under refinement), so the same
continuum field can be realized on any resolution for Richardson studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Lattice",
    "make_lattice",
    "discrete_derivative",
    "pairs",
    "triples",
    "pair_index",
    "pair_sign_table",
    "FieldRecipe",
    "make_config_recipe",
    "sample_smooth_fields",
    "FieldConfiguration",
    "dump_field_configuration",
    "load_field_configuration",
    "fit_order",
    "convergence_study",
]


@dataclass(frozen=True)
class Lattice:
    """Periodic hypercubic lattice descriptor."""

    D: int
    n: int
    a: float

    def __post_init__(self):
        if self.D not in (3, 4):
            raise ValueError(f"D must be 3 or 4, got {self.D}")
        if self.n < 4:
            raise ValueError(f"n must be >= 4 for second-order stencils, got {self.n}")
        if not self.a > 0:
            raise ValueError(f"lattice spacing must be positive, got {self.a}")

    @property
    def sites(self) -> int:
        return self.n ** self.D

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.D

    @property
    def extent(self) -> float:
        """Physical box size L = n * a."""
        return self.n * self.a

    @property
    def volume_element(self) -> float:
        return self.a ** self.D


def make_lattice(D: int, n: int, a: float) -> Lattice:
    return Lattice(D=D, n=n, a=a)


def discrete_derivative(field: np.ndarray, axis: int, lattice: Lattice) -> np.ndarray:
    """Central difference along lattice axis `axis` (0-based, 0..D-1).

    The lattice axes are the trailing D axes of `field`.
    """
    ax = field.ndim - lattice.D + axis
    return (np.roll(field, -1, axis=ax) - np.roll(field, 1, axis=ax)) / (2.0 * lattice.a)


# ---------------------------------------------------------------------------
# ordered index pairs / triples
# ---------------------------------------------------------------------------

def pairs(D: int) -> list:
    """Ordered index pairs mu < nu for a D-dimensional lattice."""
    return [(m, n) for m in range(D) for n in range(m + 1, D)]


def triples(D: int) -> list:
    return [(l, m, n) for l in range(D) for m in range(l + 1, D) for n in range(m + 1, D)]


def pair_index(D: int):
    """Map (mu, nu) with mu != nu -> (pair position, sign)."""
    table = {}
    for P, (m, n) in enumerate(pairs(D)):
        table[(m, n)] = (P, 1.0)
        table[(n, m)] = (P, -1.0)
    return table


def pair_sign_table():
    """3d duality signs s(i, P) = eps^{i j k} for the stored pair P=(j,k), j<k.

    Returns (dual_axis_of_pair, sign) per stored 3d pair, plus the full
    s[i][P] table.  Only the pair not containing i contributes.
    """
    P3 = pairs(3)
    s = np.zeros((3, 3))
    for Pi, (j, k) in enumerate(P3):
        for i in range(3):
            if i in (j, k):
                continue
            perm = [i, j, k]
            sign = 1.0
            # parity of the 3-permutation
            if perm in ([0, 1, 2], [1, 2, 0], [2, 0, 1]):
                sign = 1.0
            else:
                sign = -1.0
            s[i, Pi] = sign
    return s


EPS3_PAIR = pair_sign_table()  # EPS3_PAIR[i, P] = eps^{i,j,k}, P=(j,k) stored


def eps4(perm) -> float:
    """Sign of a 4-permutation of (0,1,2,3); 0 if repeated entries."""
    perm = list(perm)
    if sorted(perm) != [0, 1, 2, 3]:
        return 0.0
    sign = 1.0
    p = perm[:]
    for i in range(4):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


# ---------------------------------------------------------------------------
# spectral recipes for smooth periodic fields
# ---------------------------------------------------------------------------

class FieldRecipe:
    """Trigonometric-polynomial recipe for one tensor field.

    coeffs maps an integer frequency vector k (tuple of length D) to a pair
    of real coefficient arrays (cos_amp, sin_amp) of the component shape.
    The realized field on an n-lattice is

        f(m) = sum_k cos_amp_k cos(2 pi k.m / n) + sin_amp_k sin(2 pi k.m / n),

    an exact trigonometric polynomial of the fixed physical box.
    """

    def __init__(self, D: int, comp_shape: tuple, coeffs: dict):
        self.D = D
        self.comp_shape = tuple(comp_shape)
        self.coeffs = coeffs

    def realize(self, lattice: Lattice) -> np.ndarray:
        if lattice.D != self.D:
            raise ValueError("recipe dimension mismatch")
        n = lattice.n
        spec = np.zeros(self.comp_shape + lattice.shape, dtype=complex)
        for k, (ca, sa) in self.coeffs.items():
            amp = 0.5 * (np.asarray(ca) - 1j * np.asarray(sa))
            idx = tuple(np.mod(ki, n) for ki in k)
            nidx = tuple(np.mod(-ki, n) for ki in k)
            spec[(Ellipsis,) + idx] += amp
            spec[(Ellipsis,) + nidx] += np.conj(amp)
        axes = tuple(range(-self.D, 0))
        out = np.fft.ifftn(spec, axes=axes) * (n ** self.D)
        return np.ascontiguousarray(out.real)

    def realize_derivative(self, lattice: Lattice, axis: int) -> np.ndarray:
        """Exact analytic derivative of the trig polynomial along one axis."""
        n = lattice.n
        L = lattice.extent
        out = np.zeros(self.comp_shape + lattice.shape)
        deriv = {}
        for k, (ca, sa) in self.coeffs.items():
            w = 2.0 * np.pi * k[axis] / L
            # d/dx [ca cos + sa sin] = w (sa cos - ca sin)
            deriv[k] = (w * np.asarray(sa), -w * np.asarray(ca))
        del out
        return FieldRecipe(self.D, self.comp_shape, deriv).realize(lattice)


def _random_recipe(rng, D: int, comp_shape: tuple, mode_count: int,
                   scale: float = 1.0) -> FieldRecipe:
    """Random recipe over the lowest mode_count Fourier modes per axis.

    The mode set is the constant mode plus the axis-aligned frequencies
    1..mode_count on each axis (one representative of each {k, -k} pair);
    this keeps the spectrum soft enough for clean second-order refinement
    fits while remaining fully generic in the components.
    """
    ks = [(0,) * D]
    for axis in range(D):
        for k in range(1, mode_count + 1):
            kt = [0] * D
            kt[axis] = k
            ks.append(tuple(kt))
    norm = scale / np.sqrt(max(len(ks), 1))
    coeffs = {}
    for kt in ks:
        ca = rng.normal(size=comp_shape) * norm
        sa = rng.normal(size=comp_shape) * norm
        if kt == (0,) * D:
            sa = np.zeros(comp_shape)
        coeffs[kt] = (ca, sa)
    return FieldRecipe(D, comp_shape, coeffs)


# ---------------------------------------------------------------------------
# field configurations
# ---------------------------------------------------------------------------

@dataclass
class FieldConfiguration:
    """Lattice samples of the 2-connection (A, beta) and multipliers (B, C).

    Shapes (lattice axes trailing):
        A:    (D, p)      1-form
        beta: (npairs, q) 2-form on ordered pairs
        B:    (npairs, p) 2-form on ordered pairs
        C:    (D, q)      1-form
    """

    lattice: Lattice
    A: np.ndarray
    beta: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        D = self.lattice.D
        npairs = len(pairs(D))
        shp = self.lattice.shape
        for name, arr, lead in (("A", self.A, (D,)), ("beta", self.beta, (npairs,)),
                                ("B", self.B, (npairs,)), ("C", self.C, (D,))):
            arr = np.asarray(arr, dtype=float)
            if arr.shape[:len(lead)] != lead or arr.shape[len(lead) + 1:] != shp:
                raise ValueError(f"field {name} has shape {arr.shape}")
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError(f"field {name} has non-finite entries")
            setattr(self, name, arr)

    def copy(self) -> "FieldConfiguration":
        return FieldConfiguration(self.lattice, self.A.copy(), self.beta.copy(),
                                  self.B.copy(), self.C.copy())


@dataclass
class ConfigRecipe:
    """Resolution-independent recipes for all four fields."""

    D: int
    p: int
    q: int
    A: FieldRecipe
    beta: FieldRecipe
    B: FieldRecipe
    C: FieldRecipe

    def realize(self, lattice: Lattice) -> FieldConfiguration:
        return FieldConfiguration(
            lattice=lattice,
            A=self.A.realize(lattice),
            beta=self.beta.realize(lattice),
            B=self.B.realize(lattice),
            C=self.C.realize(lattice),
        )


def make_config_recipe(cm, D: int, mode_count: int, seed: int,
                       scale: float = 1.0) -> ConfigRecipe:
    """Deterministic smooth random recipe for a full field configuration."""
    if mode_count < 1:
        raise ValueError("mode_count must be >= 1")
    rng = np.random.default_rng(seed)
    npairs = len(pairs(D))
    return ConfigRecipe(
        D=D, p=cm.p, q=cm.q,
        A=_random_recipe(rng, D, (D, cm.p), mode_count, scale),
        beta=_random_recipe(rng, D, (npairs, cm.q), mode_count, scale),
        B=_random_recipe(rng, D, (npairs, cm.p), mode_count, scale),
        C=_random_recipe(rng, D, (D, cm.q), mode_count, scale),
    )


def sample_smooth_fields(cm, lattice: Lattice, mode_count: int,
                         seed: int) -> FieldConfiguration:
    """Random trigonometric-polynomial configuration, deterministic in seed."""
    return make_config_recipe(cm, lattice.D, mode_count, seed).realize(lattice)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def dump_field_configuration(cfg: FieldConfiguration, module_name: str = "") -> str:
    lat = cfg.lattice
    lines = [
        "# field-configuration v1",
        "# storage: component axes first, lattice axes last;",
        "# 2-forms on ordered pairs mu<nu in lexicographic order",
        f"module {module_name or 'unnamed'}",
        f"D {lat.D}",
        f"n {lat.n}",
        f"a {lat.a!r}",
    ]
    for name in ("A", "beta", "B", "C"):
        arr = getattr(cfg, name)
        dims = " ".join(str(d) for d in arr.shape)
        lines.append(f"field {name} {dims}")
        flat = arr.reshape(-1)
        for start in range(0, flat.size, 6):
            lines.append(" ".join(repr(float(v)) for v in flat[start:start + 6]))
    return "\n".join(lines) + "\n"


def load_field_configuration(text: str) -> FieldConfiguration:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    meta = {}
    arrays = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if parts[0] in ("module", "D", "n", "a"):
            meta[parts[0]] = parts[1]
            i += 1
        elif parts[0] == "field":
            name = parts[1]
            shape = tuple(int(s) for s in parts[2:])
            need = int(np.prod(shape))
            vals = []
            i += 1
            while len(vals) < need:
                if i >= len(lines):
                    raise ValueError(f"field {name!r}: truncated data")
                for tok in lines[i].split():
                    vals.append(float(tok))
                i += 1
            arrays[name] = np.array(vals).reshape(shape)
        else:
            raise ValueError(f"unrecognized line: {lines[i]!r}")
    lat = Lattice(D=int(meta["D"]), n=int(meta["n"]), a=float(meta["a"]))
    return FieldConfiguration(lattice=lat, A=arrays["A"], beta=arrays["beta"],
                              B=arrays["B"], C=arrays["C"])


# ---------------------------------------------------------------------------
# convergence harness
# ---------------------------------------------------------------------------

EXACT_FLOOR = 1e-11


def fit_order(spacings, residuals, exact_floor: float = EXACT_FLOOR):
    """Least-squares slope of log(residual) vs log(a).

    Returns the fitted order as float, or the string "exact" when every
    residual is at the numerical noise floor.
    """
    residuals = np.asarray(residuals, dtype=float)
    spacings = np.asarray(spacings, dtype=float)
    if len(residuals) < 3:
        raise ValueError("need at least 3 resolutions to fit an order")
    if np.all(residuals <= exact_floor):
        return "exact"
    mask = residuals > 0
    if mask.sum() < 2:
        return "exact"
    slope = np.polyfit(np.log(spacings[mask]), np.log(residuals[mask]), 1)[0]
    return float(slope)


def convergence_study(evaluator, lattices, exact_floor: float = EXACT_FLOOR):
    """Evaluate a residual functional on each lattice and fit the order.

    evaluator(lattice) -> non-negative residual.  Returns a dict with the
    residual table and the fitted order ("exact" for all-zero sequences).
    """
    lattices = list(lattices)
    if len(lattices) < 3:
        raise ValueError("need at least 3 resolutions")
    residuals = [float(evaluator(lat)) for lat in lattices]
    spacings = [lat.a for lat in lattices]
    order = fit_order(spacings, residuals, exact_floor=exact_floor)
    return {
        "n": [lat.n for lat in lattices],
        "a": spacings,
        "residuals": residuals,
        "order": order,
    }
