"""Finite reflection groups from simple roots: closure, classes, characters.

Groups are generated numerically by worklist closure over 3x3 reflection
matrices (element equality at Frobenius tolerance 1e-9; the roots involve the
golden ratio, so exact arithmetic is deliberately avoided).  Conjugacy classes
come from explicit conjugation orbits and are labeled by rotation angle,
parity, and element order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CharacterTableError, NonCoxeterRootsError
from .masses import CoxeterSpec, MassSequence, brackets_for_rank, coxeter_spec
from .polynomials import HomogeneousPolynomial, linear_form

__all__ = [
    "OrthogonalElement",
    "ConjugacyClass",
    "ReflectionGroup",
    "generate_group",
    "group_from_masses",
    "conjugacy_classes",
    "o3_character",
    "degeneracy",
    "lambda_spectrum",
    "spectrum_generators",
    "invariant_polynomials",
    "group_to_json",
]

_MATCH_TOL = 1e-9
_MAX_ORDER = 120  # largest rank-3 group in the table


@dataclass(frozen=True)
class OrthogonalElement:
    """One orthogonal 3x3 matrix with its rotation-angle/parity labels."""

    matrix: np.ndarray
    det: int
    rotation_angle: float
    parity: int

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "OrthogonalElement":
        m = np.asarray(m, dtype=float)
        det = int(round(float(np.linalg.det(m))))
        if det not in (-1, 1):
            raise ValueError("matrix is not orthogonal")
        tr = float(np.trace(m))
        # proper: cos(phi) = (tr-1)/2 ; improper (rotoreflection): cos(phi) = (tr+1)/2
        cos_phi = (tr - 1.0) / 2.0 if det == 1 else (tr + 1.0) / 2.0
        angle = math.acos(min(1.0, max(-1.0, cos_phi)))
        return cls(matrix=m, det=det, rotation_angle=angle, parity=det)

    def is_reflection(self) -> bool:
        return self.det == -1 and abs(float(np.trace(self.matrix)) - 1.0) < 1e-9


@dataclass(frozen=True)
class ConjugacyClass:
    angle: float
    parity: int
    element_order: int
    size: int
    members: tuple = field(repr=False, default=())


@dataclass(eq=False)
class ReflectionGroup:
    spec: CoxeterSpec
    elements: list
    simple_roots: np.ndarray
    reflections: list
    classes: list

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def matrices(self) -> np.ndarray:
        return np.stack([e.matrix for e in self.elements])

    @property
    def dets(self) -> np.ndarray:
        return np.array([e.det for e in self.elements], dtype=float)

    def reflection_normals(self) -> np.ndarray:
        """Unit normals of all reflection planes (eigenvector at -1)."""
        normals = []
        for el in self.reflections:
            w, v = np.linalg.eigh(el.matrix)
            normals.append(v[:, np.argmin(w)])
        return np.array(normals)


def _identify_bracket(roots: np.ndarray, tol: float = 1e-8) -> CoxeterSpec:
    """Match pairwise root angles to a rank-3 table bracket."""
    dots = [abs(float(roots[0] @ roots[1])), abs(float(roots[1] @ roots[2]))]
    if abs(float(roots[0] @ roots[2])) > tol:
        raise NonCoxeterRootsError("non-adjacent roots are not orthogonal")
    for spec in brackets_for_rank(3):
        target = [math.cos(math.pi / q) for q in spec.bracket]
        if all(abs(d - t) < tol for d, t in zip(dots, target)):
            return spec
        if all(abs(d - t) < tol for d, t in zip(dots, target[::-1])):
            return spec
    raise NonCoxeterRootsError(f"root angles {dots} match no rank-3 bracket")


def _match_index(candidate: np.ndarray, matrices: np.ndarray) -> int:
    """Index of candidate in the stack, or -1 (Frobenius tolerance)."""
    if len(matrices) == 0:
        return -1
    d = np.abs(matrices - candidate).sum(axis=(1, 2))
    i = int(np.argmin(d))
    return i if d[i] < _MATCH_TOL * 9 else -1


def generate_group(simple_root_normals) -> ReflectionGroup:
    """Close the three root reflections into a finite group."""
    roots = np.asarray(simple_root_normals, dtype=float)
    if roots.shape != (3, 3):
        raise NonCoxeterRootsError("need exactly three rank-3 simple roots")
    norms = np.linalg.norm(roots, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-8):
        raise NonCoxeterRootsError("simple roots must be unit vectors")
    spec = _identify_bracket(roots)
    generators = [np.eye(3) - 2.0 * np.outer(g, g) for g in roots]

    stack = np.empty((0, 3, 3))
    elements: list[np.ndarray] = []

    def add(m) -> bool:
        nonlocal stack
        if _match_index(m, stack) >= 0:
            return False
        elements.append(m)
        stack = np.concatenate([stack, m[None]], axis=0)
        return True

    add(np.eye(3))
    frontier = [np.eye(3)]
    while frontier:
        new_frontier = []
        for m in frontier:
            for g in generators:
                prod = g @ m
                if add(prod):
                    new_frontier.append(prod)
        if len(elements) > 2 * _MAX_ORDER:
            raise NonCoxeterRootsError(
                f"closure exceeded {2 * _MAX_ORDER} elements; roots do not generate "
                "a finite Coxeter group from the table"
            )
        frontier = new_frontier

    if len(elements) != spec.order:
        raise NonCoxeterRootsError(
            f"closure produced {len(elements)} elements, expected {spec.order} for {spec.name}"
        )
    orth = [OrthogonalElement.from_matrix(m) for m in elements]
    reflections = [e for e in orth if e.is_reflection()]
    if len(reflections) != spec.lambda0:
        raise NonCoxeterRootsError(
            f"{len(reflections)} reflections found, expected {spec.lambda0}"
        )
    group = ReflectionGroup(
        spec=spec, elements=orth, simple_roots=roots, reflections=reflections, classes=[]
    )
    group.classes = conjugacy_classes(group)
    return group


def group_from_masses(masses: MassSequence) -> ReflectionGroup:
    """Group generated by the bounding planes of the 1..N ordering sector."""
    from .geometry import coincidence_normals, coxeter_simple_roots

    return generate_group(coxeter_simple_roots(coincidence_normals(masses)))


def conjugacy_classes(group: ReflectionGroup) -> list:
    """Conjugation orbits labeled by (angle, parity, order, size)."""
    mats = group.matrices
    n = len(mats)
    inv = np.transpose(mats, (0, 2, 1))  # orthogonal inverse
    assigned = np.full(n, -1, dtype=int)
    classes = []
    for i in range(n):
        if assigned[i] >= 0:
            continue
        conj = mats @ mats[i] @ inv  # h g h^T for all h
        members = set()
        for c in conj:
            j = _match_index(c, mats)
            if j < 0:
                raise CharacterTableError("conjugate fell outside the group")
            members.add(j)
        label = len(classes)
        for j in members:
            assigned[j] = label
        rep = group.elements[i]
        classes.append(
            ConjugacyClass(
                angle=rep.rotation_angle,
                parity=rep.parity,
                element_order=_element_order(mats[i]),
                size=len(members),
                members=tuple(sorted(members)),
            )
        )
    if sum(c.size for c in classes) != n:
        raise CharacterTableError("classes do not partition the group")
    return sorted(classes, key=lambda c: (-c.parity, c.angle, c.size))


def _element_order(m: np.ndarray, cap: int = 64) -> int:
    p = np.eye(3)
    for k in range(1, cap + 1):
        p = p @ m
        if np.abs(p - np.eye(3)).max() < 1e-8:
            return k
    raise CharacterTableError("element order exceeds cap")


def o3_character(lam: int, cls: ConjugacyClass) -> float:
    """Character of the degree-lam harmonic representation on one class.

    chi = sum_{mu=-lam..lam} cos(mu*phi) * parity^(lam-mu); for proper classes
    this is the Dirichlet kernel sin((lam+1/2)phi)/sin(phi/2).
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    phi = cls.angle if cls.parity == 1 else cls.angle + math.pi
    # sum over mu of e^{i mu phi'} with phi' = phi (+pi for improper), times parity^lam
    s = math.sin(0.5 * phi)
    if abs(s) < 1e-12:
        kernel = 2.0 * lam + 1.0
    else:
        kernel = math.sin((lam + 0.5) * phi) / s
    return kernel if cls.parity == 1 else (-1.0) ** lam * kernel


def degeneracy(lam: int, group: ReflectionGroup) -> int:
    """Multiplicity of the anti-invariant irrep inside the degree-lam harmonics."""
    total = 0.0
    for cls in group.classes:
        total += cls.size * cls.parity * o3_character(lam, cls)
    a = total / group.order
    nearest = round(a)
    if abs(a - nearest) > 1e-6 or nearest < 0:
        raise CharacterTableError(f"a_lambda = {a!r} is not a non-negative integer")
    return int(nearest)


def spectrum_generators(spec: CoxeterSpec) -> tuple:
    """Degrees (a, b) of the two symmetric-invariant generators above rho^2."""
    key = spec.name
    if key == "A3":
        return (3, 4)
    if key == "C3":
        return (4, 6)
    if key == "H3":
        return (6, 10)
    if spec.rank == 2:
        return (spec.bracket[0], None)
    raise ValueError(f"no ladder spectrum implemented for {spec.name}")


def lambda_spectrum(spec: CoxeterSpec, lambda_max: int) -> dict:
    """Multiplicity of every allowed lambda = lambda0 + a*n1 + b*n2 <= lambda_max."""
    a, b = spectrum_generators(spec)
    out: dict[int, int] = {}
    if b is None:
        for n1 in range((lambda_max - spec.lambda0) // a + 1):
            lam = spec.lambda0 + a * n1
            if lam <= lambda_max:
                out[lam] = out.get(lam, 0) + 1
        return dict(sorted(out.items()))
    n1 = 0
    while spec.lambda0 + a * n1 <= lambda_max:
        n2 = 0
        while spec.lambda0 + a * n1 + b * n2 <= lambda_max:
            lam = spec.lambda0 + a * n1 + b * n2
            out[lam] = out.get(lam, 0) + 1
            n2 += 1
        n1 += 1
    return dict(sorted(out.items()))


def _rotation_axes(group: ReflectionGroup, angle: float, tol: float = 1e-8) -> np.ndarray:
    """Axes of the proper rotations with the given angle, one per +/- pair."""
    axes = []
    for el in group.elements:
        if el.det != 1 or abs(el.rotation_angle - angle) > tol:
            continue
        w, v = np.linalg.eigh(0.5 * (el.matrix + el.matrix.T))
        axis = v[:, np.argmax(w)]  # eigenvalue +1 of the symmetric part
        # residual check: the axis must be fixed by the rotation
        if np.abs(el.matrix @ axis - axis).max() > 1e-8:
            raise CharacterTableError("axis extraction failed")
        for known in axes:
            if min(np.abs(known - axis).max(), np.abs(known + axis).max()) < 1e-6:
                break
        else:
            axes.append(axis)
    return np.array(axes)


def _tetrahedral_signs(axes: np.ndarray) -> np.ndarray:
    """Orient the four 3-fold axes pairwise obtuse (tetrahedron vertices)."""
    out = [axes[0]]
    for ax in axes[1:]:
        out.append(ax if ax @ out[0] < 0 else -ax)
    return np.array(out)


def invariant_polynomials(group: ReflectionGroup) -> list:
    """Power sums over the characteristic axis set, one per invariant degree.

    H3: six 5-fold axes, degrees (2, 6, 10).  C3: three 4-fold axes, degrees
    (2, 4, 6).  A3: four 3-fold axes oriented as a tetrahedron, degrees
    (2, 3, 4).  Unnormalized; invariance is verified coefficient-wise.
    """
    name = group.spec.name
    if name == "H3":
        axes = _rotation_axes(group, 2.0 * math.pi / 5.0)
        degrees = (2, 6, 10)
        expected_axes = 6
    elif name == "C3":
        axes = _rotation_axes(group, math.pi / 2.0)
        degrees = (2, 4, 6)
        expected_axes = 3
    elif name == "A3":
        axes = _rotation_axes(group, 2.0 * math.pi / 3.0)
        degrees = (2, 3, 4)
        expected_axes = 4
    else:
        raise CharacterTableError(f"no axis construction for {name}")
    if len(axes) != expected_axes:
        raise CharacterTableError(
            f"found {len(axes)} axes for {name}, expected {expected_axes}"
        )
    if name == "A3":
        axes = _tetrahedral_signs(axes)
    polys = []
    for m in degrees:
        total = HomogeneousPolynomial(m)
        for ax in axes:
            form = linear_form(ax)
            power = HomogeneousPolynomial.constant(1.0)
            for _ in range(m):
                power = power * form
            total = total + power
        polys.append(total)
    # invariance must hold exactly (up to float round-off) for every element
    for q in polys:
        scale = q.max_abs_coeff()
        for el in group.elements:
            if not (q.compose(el.matrix) - q).is_zero(1e-10 * scale):
                raise CharacterTableError(
                    f"axis power sum of degree {q.degree} is not invariant"
                )
    return polys


def group_to_json(group: ReflectionGroup) -> str:
    data = {
        "name": group.spec.name,
        "bracket": list(group.spec.bracket),
        "order": group.order,
        "reflections": len(group.reflections),
        "classes": [
            {
                "angle": float(f"{c.angle:.12g}"),
                "parity": c.parity,
                "element_order": c.element_order,
                "size": c.size,
            }
            for c in group.classes
        ],
    }
    return json.dumps(data, indent=2)
