"""Charge-blocked dense linear algebra for U(1)-symmetric bond spaces.

Bond states carry an integer charge: the total spin to the left of the
bond minus its value in the initial antiferromagnetic configuration,
counted in units of single spin flips. Vectors and matrices over bond
spaces are stored as one dense block per charge sector. A matrix with
``charge_shift`` d maps column sector q + d to row sector q, so each row
sector pairs with exactly one column sector and blocked operations never
touch entries forbidden by the selection rule.

SVDs decompose each sector independently; truncation merges all sectors
into one global list before cutting, so the kept set is the same one an
unblocked decomposition would keep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SvdError

Charge = int

#: Relative floor under which singular values are treated as round-off
#: and dropped before any truncation counting.
SINGULAR_VALUE_FLOOR = 1e-14


def _sorted_block_dict(blocks):
    return {q: blocks[q] for q in sorted(blocks)}


class GradedVector:
    """A vector over a charged bond space, one dense block per sector."""

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        cleaned = {}
        for q, arr in blocks.items():
            arr = np.asarray(arr, dtype=complex).reshape(-1)
            if arr.size:
                cleaned[int(q)] = arr
        self.blocks = _sorted_block_dict(cleaned)

    @classmethod
    def basis_vector(cls, sector_dims, q, index):
        """Unit vector e_(q, index) in a space with the given sector dims."""
        if q not in sector_dims or not 0 <= index < sector_dims[q]:
            raise ValueError(f"no basis state (q={q}, index={index})")
        arr = np.zeros(sector_dims[q], dtype=complex)
        arr[index] = 1.0
        return cls({q: arr})

    @property
    def charges(self):
        return list(self.blocks)

    @property
    def sector_dims(self):
        return {q: b.size for q, b in self.blocks.items()}

    def norm2(self) -> float:
        return sum(float(np.vdot(b, b).real) for b in self.blocks.values())

    def scaled(self, factor) -> "GradedVector":
        return GradedVector({q: b * factor for q, b in self.blocks.items()})


class GradedMatrix:
    """A charge-conserving linear map between bond spaces.

    Blocks are keyed by (row charge, column charge) on input and every
    key must satisfy col = row + charge_shift; anything else is rejected.
    Internally one dense block is kept per row charge. Instances are
    treated as immutable after construction.
    """

    __slots__ = ("charge_shift", "blocks")

    def __init__(self, charge_shift: int, blocks=None):
        self.charge_shift = int(charge_shift)
        stored = {}
        for key, arr in (blocks or {}).items():
            if isinstance(key, tuple):
                q_row, q_col = key
                if q_col != q_row + self.charge_shift:
                    raise ValueError(
                        f"block ({q_row}, {q_col}) violates the selection rule "
                        f"for charge_shift {self.charge_shift}"
                    )
            else:
                q_row = key
            arr = np.asarray(arr, dtype=complex)
            if arr.ndim != 2:
                raise ValueError("graded matrix blocks must be 2d")
            if arr.size:
                stored[int(q_row)] = arr
        self.blocks = _sorted_block_dict(stored)

    def block(self, q_row):
        return self.blocks.get(q_row)

    def items(self):
        """Yield ((row charge, col charge), block) in sorted row order."""
        for q, arr in self.blocks.items():
            yield (q, q + self.charge_shift), arr

    @property
    def row_dims(self):
        return {q: b.shape[0] for q, b in self.blocks.items()}

    @property
    def col_dims(self):
        return {q + self.charge_shift: b.shape[1] for q, b in self.blocks.items()}

    def dagger(self) -> "GradedMatrix":
        out = {}
        for q_row, arr in self.blocks.items():
            out[q_row + self.charge_shift] = arr.conj().T
        return GradedMatrix(-self.charge_shift, out)

    def scaled(self, factor) -> "GradedMatrix":
        return GradedMatrix(
            self.charge_shift, {q: b * factor for q, b in self.blocks.items()}
        )

    def __matmul__(self, other: "GradedMatrix") -> "GradedMatrix":
        if not isinstance(other, GradedMatrix):
            return NotImplemented
        out = {}
        for q_row, left in self.blocks.items():
            right = other.blocks.get(q_row + self.charge_shift)
            if right is None:
                continue
            if left.shape[1] != right.shape[0]:
                raise ValueError(
                    f"sector {q_row + self.charge_shift}: inner dims "
                    f"{left.shape[1]} vs {right.shape[0]}"
                )
            out[q_row] = left @ right
        return GradedMatrix(self.charge_shift + other.charge_shift, out)

    def add(self, other: "GradedMatrix") -> "GradedMatrix":
        """Blockwise sum; both operands must carry the same shift."""
        if other.charge_shift != self.charge_shift:
            raise ValueError("cannot add matrices with different charge shifts")
        out = dict(self.blocks)
        for q, arr in other.blocks.items():
            if q in out:
                if out[q].shape != arr.shape:
                    raise ValueError(f"sector {q}: shape mismatch in add")
                out[q] = out[q] + arr
            else:
                out[q] = arr
        return GradedMatrix(self.charge_shift, out)

    def to_dense(self, row_layout=None, col_layout=None):
        """Densify into an ordinary matrix, forgetting the grading.

        Layouts are SectorLayout instances; when omitted they are built
        from this matrix's own dims. Used by tests and by the unblocked
        comparison paths, not by production updates.
        """
        row_layout = row_layout or SectorLayout(self.row_dims)
        col_layout = col_layout or SectorLayout(self.col_dims)
        dense = np.zeros((row_layout.total, col_layout.total), dtype=complex)
        for q_row, arr in self.blocks.items():
            r0 = row_layout.offset(q_row)
            c0 = col_layout.offset(q_row + self.charge_shift)
            dense[r0 : r0 + arr.shape[0], c0 : c0 + arr.shape[1]] = arr
        return dense


class SectorLayout:
    """Fixed ordering of a charged space: sectors ascending by charge."""

    __slots__ = ("charges", "dims", "offsets", "total")

    def __init__(self, sector_dims):
        self.charges = sorted(sector_dims)
        self.dims = {q: int(sector_dims[q]) for q in self.charges}
        self.offsets = {}
        off = 0
        for q in self.charges:
            self.offsets[q] = off
            off += self.dims[q]
        self.total = off

    def offset(self, q):
        return self.offsets[q]

    def position(self, q, index):
        return self.offsets[q] + index


def graded_matvec(m: GradedMatrix, v: GradedVector, side: str = "right") -> GradedVector:
    """Apply a graded matrix to a graded vector.

    side="right" computes m @ v (column vector): a component in sector q
    comes from v's sector q + charge_shift. side="left" computes v @ m
    (row vector): sector q of v feeds sector q + charge_shift of the
    result. Sector dimensions are checked and mismatches rejected.
    """
    out = {}
    if side == "right":
        for q_row, arr in m.blocks.items():
            src = v.blocks.get(q_row + m.charge_shift)
            if src is None:
                continue
            if arr.shape[1] != src.size:
                raise ValueError(
                    f"sector {q_row + m.charge_shift}: dim {src.size} does not "
                    f"match matrix columns {arr.shape[1]}"
                )
            out[q_row] = arr @ src
    elif side == "left":
        for q_row, arr in m.blocks.items():
            src = v.blocks.get(q_row)
            if src is None:
                continue
            if arr.shape[0] != src.size:
                raise ValueError(
                    f"sector {q_row}: dim {src.size} does not match matrix "
                    f"rows {arr.shape[0]}"
                )
            q_col = q_row + m.charge_shift
            piece = src @ arr
            if q_col in out:
                out[q_col] = out[q_col] + piece
            else:
                out[q_col] = piece
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return GradedVector(out)


class SchmidtSpectrum:
    """Schmidt values of a bond, grouped by sector, descending within each.

    The merged view interleaves all sectors into one globally ordered
    list; ties order by distance of the charge from zero, then by the
    more negative charge, then by position, so every consumer sees the
    same deterministic ranking.
    """

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        cleaned = {}
        for q, vals in blocks.items():
            vals = np.asarray(vals, dtype=float).reshape(-1)
            if vals.size:
                cleaned[int(q)] = -np.sort(-vals)
        self.blocks = _sorted_block_dict(cleaned)

    @property
    def sector_dims(self):
        return {q: v.size for q, v in self.blocks.items()}

    @property
    def total_dim(self) -> int:
        return sum(v.size for v in self.blocks.values())

    @property
    def total_weight(self) -> float:
        return sum(float(v @ v) for v in self.blocks.values())

    @property
    def entries(self):
        """Merged list of (charge, value, index-within-sector), ranked."""
        merged = [
            (q, float(w), i)
            for q, vals in self.blocks.items()
            for i, w in enumerate(vals)
        ]
        merged.sort(key=lambda e: (-e[1], abs(e[0]), e[0], e[2]))
        return merged

    def entropy(self) -> float:
        """Von Neumann entropy -sum p ln p with p the squared values."""
        p = np.concatenate([v**2 for v in self.blocks.values()]) if self.blocks else np.array([])
        p = p[p > 0.0]
        if p.size == 0:
            return 0.0
        return float(-np.sum(p * np.log(p)))

    def normalized(self) -> "SchmidtSpectrum":
        norm = np.sqrt(self.total_weight)
        return SchmidtSpectrum({q: v / norm for q, v in self.blocks.items()})


@dataclass
class TruncationReport:
    """What a truncation discarded and how the kept set is laid out."""

    discarded_weight: float
    kept_per_sector: dict = field(default_factory=dict)
    largest_block_dim: int = 0


def block_svd(theta: GradedMatrix):
    """Sector-by-sector SVD of a graded matrix.

    Returns (x, spectrum, y) with theta = x * diag(spectrum) * y blockwise.
    x has charge shift 0, y inherits theta's shift, and the spectrum's
    sectors are labelled by theta's row charges. The phase of every left
    singular vector is fixed so its largest-magnitude entry is real and
    positive, making repeated decompositions reproducible.
    """
    x_blocks, s_blocks, y_blocks = {}, {}, {}
    for q_row, arr in theta.blocks.items():
        try:
            u, s, vh = np.linalg.svd(arr, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise SvdError(
                f"SVD did not converge in sector {q_row} "
                f"({arr.shape[0]}x{arr.shape[1]})"
            ) from exc
        # Phase convention: largest-|entry| of each left singular vector
        # becomes real positive; the compensating phase moves into vh.
        for j in range(u.shape[1]):
            k = int(np.argmax(np.abs(u[:, j])))
            mag = abs(u[k, j])
            if mag > 0.0:
                phase = u[k, j] / mag
                u[:, j] *= phase.conjugate()
                vh[j, :] *= phase
        x_blocks[q_row] = u
        s_blocks[q_row] = s
        y_blocks[q_row] = vh
    return (
        GradedMatrix(0, x_blocks),
        SchmidtSpectrum(s_blocks),
        GradedMatrix(theta.charge_shift, y_blocks),
    )


def merged_truncate(spectrum: SchmidtSpectrum, k_max: int):
    """Keep the k_max globally largest Schmidt values across all sectors.

    Values below SINGULAR_VALUE_FLOOR times the largest are dropped first
    as round-off. Ties at the cut keep the charge closer to zero, then
    the more negative charge. The kept spectrum is renormalized to unit
    total weight; the report carries the raw discarded weight (sum of
    squares of everything dropped, before renormalization) and the kept
    count per sector.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    merged = spectrum.entries
    if not merged:
        raise ValueError("cannot truncate an empty spectrum")
    floor = merged[0][1] * SINGULAR_VALUE_FLOOR
    discarded = 0.0
    survivors = []
    for q, w, i in merged:
        if w < floor:
            discarded += w * w
        else:
            survivors.append((q, w, i))
    kept = survivors[:k_max]
    for _, w, _ in survivors[k_max:]:
        discarded += w * w
    kept_per_sector: dict = {}
    kept_vals: dict = {}
    for q, w, _ in kept:
        kept_per_sector[q] = kept_per_sector.get(q, 0) + 1
        kept_vals.setdefault(q, []).append(w)
    new_spec = SchmidtSpectrum(kept_vals).normalized()
    report = TruncationReport(
        discarded_weight=discarded,
        kept_per_sector={q: kept_per_sector[q] for q in sorted(kept_per_sector)},
    )
    return new_spec, report
