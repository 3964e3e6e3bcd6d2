"""Exact symmetry augmentation of measurement rows.

A measurement row is a concatenation of typed fields (joint-space vectors,
spatial vectors, pseudovectors, per-leg quantities, categorical contact
states, flattened poses, invariant scalars).  A schema plus a group bundle
compiles into one linear block transform per group element, so augmenting a
dataset is |G| batched matrix products.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, ParseError, SchemaError
from .groups import (
    FiniteGroup,
    GenPermMatrix,
    Representation,
    extend_by_words,
    load_representation,
)

FIELD_KINDS = (
    "joint_space",
    "e3_vector",
    "e3_pseudovector",
    "kron_perm_vector",
    "categorical_contact",
    "pose_conjugation",
    "invariant_scalar",
)

PLAN_TOL = 1e-12


class IsometrySet:
    """One orthogonal d x d matrix (with its determinant) per group element.

    These are the spatial rotations/reflections the group imitates; they are
    restricted to linear isometries fixing the origin.
    """

    def __init__(self, group: FiniteGroup, matrices):
        self.group = group
        self.matrices = tuple(np.asarray(m, dtype=float) for m in matrices)
        if len(self.matrices) != group.order:
            raise ValueError("need one isometry per group element")
        d = self.matrices[0].shape[0]
        self.dim = d
        dets = []
        for g, r in enumerate(self.matrices):
            if r.shape != (d, d):
                raise ValueError(f"isometry {g} has shape {r.shape}, expected ({d},{d})")
            if np.abs(r.T @ r - np.eye(d)).max() > PLAN_TOL:
                raise ValueError(f"isometry {g} is not orthogonal")
            det = float(np.linalg.det(r))
            if abs(abs(det) - 1.0) > 1e-9:
                raise ValueError(f"isometry {g} has |det| != 1")
            dets.append(1 if det > 0 else -1)
        if np.abs(self.matrices[group.identity] - np.eye(d)).max() > PLAN_TOL:
            raise ValueError("identity element must map to the identity isometry")
        for g in group.elements():
            for h in group.elements():
                gh = group.cayley[g][h]
                if np.abs(self.matrices[g] @ self.matrices[h] - self.matrices[gh]).max() > 1e-9:
                    raise ValueError(f"isometries violate the Cayley table at ({g},{h})")
        self.dets = tuple(dets)

    @classmethod
    def from_generators(cls, group: FiniteGroup, generator_matrices: dict[int, np.ndarray], dim: int = 3):
        mats = extend_by_words(
            group,
            {g: np.asarray(m, dtype=float) for g, m in generator_matrices.items()},
            lambda a, b: a @ b,
            np.eye(dim),
        )
        return cls(group, mats)

    def rotation(self, g: int) -> np.ndarray:
        return self.matrices[g]

    def det(self, g: int) -> int:
        return self.dets[g]

    def pseudo(self, g: int) -> np.ndarray:
        """Transform for axial vectors: det(R) R."""
        return self.dets[g] * self.matrices[g]

    def homogeneous(self, g: int) -> np.ndarray:
        h = np.eye(self.dim + 1)
        h[: self.dim, : self.dim] = self.matrices[g]
        return h


@dataclass(frozen=True)
class SchemaField:
    name: str
    kind: str
    dim: int


@dataclass(frozen=True)
class MeasurementSchema:
    fields: tuple[SchemaField, ...]

    @property
    def width(self) -> int:
        return sum(f.dim for f in self.fields)

    def column_names(self) -> list[str]:
        names = []
        for f in self.fields:
            names.extend(f"{f.name}_{i}" for i in range(f.dim))
        return names

    def slices(self) -> list[slice]:
        out, off = [], 0
        for f in self.fields:
            out.append(slice(off, off + f.dim))
            off += f.dim
        return out


def contact_state_rep(num_legs: int, leg_perm: GenPermMatrix) -> GenPermMatrix:
    """Permutation of the 2^L categorical contact states induced by a leg
    permutation.

    State s is read as an L-bit string with leg 0 in the most significant
    bit; the output permutation sends each state to the state whose legs are
    permuted accordingly.
    """
    if num_legs > 16:
        raise SchemaError(f"{num_legs} legs would give 2^{num_legs} states; capped at 16")
    if leg_perm.dim != num_legs:
        raise DimMismatch(f"leg permutation has dim {leg_perm.dim}, expected {num_legs}")
    if not leg_perm.is_unsigned:
        raise SchemaError("contact states carry no sign; leg permutation must be unsigned")
    size = 1 << num_legs
    target = []
    for state in range(size):
        bits = [(state >> (num_legs - 1 - leg)) & 1 for leg in range(num_legs)]
        permuted = [0] * num_legs
        for leg in range(num_legs):
            permuted[leg_perm.target[leg]] = bits[leg]
        target.append(sum(b << (num_legs - 1 - i) for i, b in enumerate(permuted)))
    return GenPermMatrix(size, tuple(target), (1,) * size)


def _field_matrix(
    f: SchemaField,
    g: int,
    joint_rep: Representation | None,
    isometries: IsometrySet | None,
    leg_perm: Representation | None,
    contact_reps: dict[int, GenPermMatrix],
) -> np.ndarray:
    if f.kind == "joint_space":
        return joint_rep.matrices[g].as_dense().astype(float)  # type: ignore[union-attr]
    if f.kind == "e3_vector":
        return isometries.rotation(g)  # type: ignore[union-attr]
    if f.kind == "e3_pseudovector":
        return isometries.pseudo(g)  # type: ignore[union-attr]
    if f.kind == "kron_perm_vector":
        perm = leg_perm.matrices[g].as_dense().astype(float)  # type: ignore[union-attr]
        return np.kron(perm, isometries.rotation(g))  # type: ignore[union-attr]
    if f.kind == "categorical_contact":
        return contact_reps[g].as_dense().astype(float)
    if f.kind == "pose_conjugation":
        # X -> H X H^-1 on the flattened homogeneous matrix; H is orthogonal
        # with zero translation, so this is the Kronecker conjugation below
        # under row-major flattening.
        h = isometries.homogeneous(g)  # type: ignore[union-attr]
        return np.kron(h, h)
    if f.kind == "invariant_scalar":
        return np.eye(f.dim)
    raise SchemaError(f"field {f.name!r}: unknown kind {f.kind!r}")


class AugmentationPlan:
    """Per-group-element block-diagonal transforms over a measurement row."""

    def __init__(self, schema: MeasurementSchema, group: FiniteGroup, blocks):
        self.schema = schema
        self.group = group
        self.blocks = blocks  # blocks[g][field_index] -> dense block
        self._slices = schema.slices()

    @property
    def width(self) -> int:
        return self.schema.width

    def transform_matrix(self, g: int) -> np.ndarray:
        t = np.zeros((self.width, self.width))
        for blk, sl in zip(self.blocks[g], self._slices):
            t[sl, sl] = blk
        return t

    def apply_rows(self, g: int, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        out = np.empty_like(rows)
        for blk, sl in zip(self.blocks[g], self._slices):
            out[..., sl] = rows[..., sl] @ blk.T
        return out

    def verify(self, tol: float = PLAN_TOL) -> float:
        """Worst |T(g)T(h) - T(gh)| over all pairs; raises above tol."""
        mats = [self.transform_matrix(g) for g in self.group.elements()]
        worst = 0.0
        for g in self.group.elements():
            for h in self.group.elements():
                gh = self.group.cayley[g][h]
                worst = max(worst, float(np.abs(mats[g] @ mats[h] - mats[gh]).max()))
        if worst > tol:
            raise SchemaError(f"plan transforms violate the Cayley table by {worst:.3e}")
        return worst


def resolve_schema(
    raw_fields,
    joint_rep: Representation | None = None,
    isometries: IsometrySet | None = None,
    leg_perm: Representation | None = None,
) -> MeasurementSchema:
    """Fill in field dims from the group context and validate them."""
    d = isometries.dim if isometries is not None else 3
    fields = []
    for raw in raw_fields:
        name = raw["name"]
        kind = raw["kind"]
        if kind not in FIELD_KINDS:
            raise SchemaError(f"field {name!r}: unknown kind {kind!r}")
        if kind == "joint_space":
            if joint_rep is None:
                raise SchemaError(f"field {name!r}: schema needs a joint-space representation")
            dim = joint_rep.dim
        elif kind in ("e3_vector", "e3_pseudovector"):
            if isometries is None:
                raise SchemaError(f"field {name!r}: schema needs an isometry set")
            dim = d
        elif kind == "kron_perm_vector":
            if leg_perm is None or isometries is None:
                raise SchemaError(f"field {name!r}: schema needs leg permutations and isometries")
            dim = leg_perm.dim * d
        elif kind == "categorical_contact":
            if leg_perm is None:
                raise SchemaError(f"field {name!r}: schema needs leg permutations")
            dim = 1 << leg_perm.dim
        elif kind == "pose_conjugation":
            if isometries is None:
                raise SchemaError(f"field {name!r}: schema needs an isometry set")
            dim = (d + 1) ** 2
        else:  # invariant_scalar
            dim = int(raw.get("dim", 1))
        declared = raw.get("dim")
        if declared is not None and int(declared) != dim:
            raise SchemaError(f"field {name!r}: declared dim {declared} but kind implies {dim}")
        fields.append(SchemaField(name, kind, dim))
    return MeasurementSchema(tuple(fields))


def compile_schema(
    schema: MeasurementSchema,
    group: FiniteGroup,
    joint_rep: Representation | None = None,
    isometries: IsometrySet | None = None,
    leg_perm: Representation | None = None,
) -> AugmentationPlan:
    """Build the per-element block transforms for a resolved schema."""
    contact_reps: dict[int, GenPermMatrix] = {}
    if any(f.kind == "categorical_contact" for f in schema.fields):
        if leg_perm is None:
            raise SchemaError("categorical_contact fields need leg permutations")
        for g in group.elements():
            contact_reps[g] = contact_state_rep(leg_perm.dim, leg_perm.matrices[g])
    blocks = []
    for g in group.elements():
        row = []
        for f in schema.fields:
            try:
                blk = _field_matrix(f, g, joint_rep, isometries, leg_perm, contact_reps)
            except AttributeError as exc:
                raise SchemaError(f"field {f.name!r}: missing group context") from exc
            if blk.shape != (f.dim, f.dim):
                raise SchemaError(
                    f"field {f.name!r}: transform is {blk.shape}, field dim is {f.dim}"
                )
            row.append(blk)
        blocks.append(row)
    return AugmentationPlan(schema, group, blocks)


def augment_row(plan: AugmentationPlan, g: int, row: np.ndarray) -> np.ndarray:
    """Apply T(g) to one measurement row."""
    row = np.asarray(row, dtype=float)
    if row.shape[-1] != plan.width:
        raise DimMismatch(f"row width {row.shape[-1]}, plan width {plan.width}")
    return plan.apply_rows(g, row)


def augment_dataset(plan: AugmentationPlan, rows: np.ndarray) -> np.ndarray:
    """Emit the |G| symmetric copies of a dataset, g-major.

    The identity block comes first, so the original rows open the output.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != plan.width:
        raise DimMismatch(f"rows have width {rows.shape[1]}, plan width {plan.width}")
    return np.vstack([plan.apply_rows(g, rows) for g in plan.group.elements()])


def orbit_average(plan: AugmentationPlan, target_rows: np.ndarray) -> np.ndarray:
    """Replace each orbit of evaluated targets with its group average.

    ``target_rows`` holds |G| g-major blocks of N rows each (the layout
    ``augment_dataset`` produces): block g carries the targets evaluated at
    the g-transformed inputs.  Every block is replaced by T(g) applied to
    the average of T(g)^-1 over the blocks, which projects the targets onto
    the exactly-equivariant set; applying it twice changes nothing.
    """
    rows = np.atleast_2d(np.asarray(target_rows, dtype=float))
    order = plan.group.order
    if rows.shape[0] % order != 0:
        raise DimMismatch(f"{rows.shape[0]} rows is not a multiple of group order {order}")
    if rows.shape[1] != plan.width:
        raise DimMismatch(f"rows have width {rows.shape[1]}, plan width {plan.width}")
    n = rows.shape[0] // order
    mean = np.zeros((n, plan.width))
    for g in plan.group.elements():
        ginv = plan.group.inverse[g]
        mean += plan.apply_rows(ginv, rows[g * n : (g + 1) * n])
    mean /= order
    return np.vstack([plan.apply_rows(g, mean) for g in plan.group.elements()])


@dataclass
class GroupBundle:
    """Group plus the concrete representations a schema can reference."""

    group: FiniteGroup
    joint_rep: Representation
    isometries: IsometrySet | None = None
    leg_perm: Representation | None = None


def load_group_bundle(path: str, order_cap: int = 1024) -> GroupBundle:
    """Load a representation file with optional per-generator extensions.

    Beyond the core {"dim", "generators": [{"target", "sign"}]} layout, each
    generator may carry an "isometry" (d x d row-major matrix) and a
    "leg_perm" (target array over the legs); both are extended to the whole
    group along the closure.
    """
    group, joint_rep = load_representation(path, order_cap=order_cap)
    with open(path) as f:
        data = json.load(f)
    gens = data["generators"]
    isometries = None
    leg_perm = None
    if all("isometry" in g for g in gens):
        mats = {}
        for gi, entry in zip(group.generator_indices, gens):
            mats[gi] = np.asarray(entry["isometry"], dtype=float)
        d = next(iter(mats.values())).shape[0] if mats else 3
        try:
            isometries = IsometrySet.from_generators(group, mats, dim=d)
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from exc
    elif any("isometry" in g for g in gens):
        raise ParseError(f"{path}: either all generators carry an isometry or none")
    if all("leg_perm" in g for g in gens):
        from .groups import verify_homomorphism

        nlegs = len(gens[0]["leg_perm"])
        perms = {}
        for gi, entry in zip(group.generator_indices, gens):
            perms[gi] = GenPermMatrix.from_permutation(entry["leg_perm"])
        mats = extend_by_words(
            group, perms, lambda a, b: a @ b, GenPermMatrix.identity(nlegs)
        )
        leg_perm = Representation(group, nlegs, tuple(mats))
        check = verify_homomorphism(leg_perm)
        if not check.passed:
            raise ParseError(
                f"{path}: leg permutations do not respect the group relations ({check})"
            )
    elif any("leg_perm" in g for g in gens):
        raise ParseError(f"{path}: either all generators carry a leg_perm or none")
    return GroupBundle(group, joint_rep, isometries, leg_perm)


def load_schema(path: str) -> list[dict]:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict) or "fields" not in data:
        raise ParseError(f"{path}: expected an object with a 'fields' list")
    return data["fields"]


def write_csv(path: str, column_names: list[str], rows: np.ndarray) -> None:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    with open(path, "w") as f:
        f.write(",".join(column_names) + "\n")
        for row in rows:
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_csv(path: str) -> tuple[list[str], np.ndarray]:
    with open(path) as f:
        header = f.readline().strip()
        if not header:
            raise ParseError(f"{path}: missing header line")
        names = header.split(",")
        body = f.read().strip()
    if not body:
        return names, np.zeros((0, len(names)))
    try:
        rows = np.array(
            [[float(v) for v in line.split(",")] for line in body.splitlines()]
        )
    except ValueError as exc:
        raise ParseError(f"{path}: malformed numeric row: {exc}") from exc
    if rows.shape[1] != len(names):
        raise ParseError(f"{path}: rows have {rows.shape[1]} columns, header has {len(names)}")
    return names, rows
