"""
Scalar Robin-boundary diffusion on a perforated domain, solved on a masked
uniform lattice.

Cells are classified by their centre as exterior to D, hole, or interior of
D_ε. The cell-centred finite-volume scheme uses the 7-point stencil between
interior cells and, on every face between an interior cell and a non-interior
one, the Robin flux −κ ∂θ/∂n = L(θ − θ₀) eliminated through the half-cell
conductance. The resulting matrix is symmetric positive definite and is
solved by preconditioned conjugate gradients: Jacobi by default, or a
smoothed-aggregation AMG cycle for large lattices.

This is a linear temperature proxy for the homogenization limit: reports
label its output "proxy".
"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial, wraps
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.integrate import lebedev_rule
from scipy.interpolate import RegularGridInterpolator
from scipy.ndimage import distance_transform_edt
from pyamg import smoothed_aggregation_solver
from scipy.sparse.linalg import cg
from tenacity import before_sleep_log, retry, retry_if_exception_type, stop_after_attempt

from core.errors import DomainError, ParameterError, ResourceError, SolverConvergenceError
from tools.models import (
    DomainSpec,
    HomogenizationRow,
    ProcessParams,
    ProxyProblem,
    TraceNorm,
)
from tools.perforation import PerforatedDomain, build_perforated
from tools.stochastic_geometry import sample_marked
from utils.workflow_utils import aggregate_mean_se, fan_out_seeds

logger = logging.getLogger(__name__)

EXTERIOR, INTERIOR, HOLE = 0, 1, 2
LEBEDEV_ORDER = 17
FIELD_HEADER = "# scalar-field v1"


@dataclass(frozen=True, eq=False)
class RobinFaces:
    cells: np.ndarray  # (k, 3) lattice index of the interior cell
    centers: np.ndarray  # (k, 3) face centre
    axis: np.ndarray  # (k,) normal axis
    on_hole: np.ndarray  # (k,) True for faces shared with a hole cell

    def __len__(self) -> int:
        return len(self.axis)


@dataclass(frozen=True, eq=False)
class ScalarField:
    origin: np.ndarray
    h: float
    shape: Tuple[int, int, int]
    labels: np.ndarray
    faces: RobinFaces
    values: Optional[np.ndarray] = None
    dropped_holes: int = 0
    resolved_holes: int = 0
    residual_history: List[float] = field(default_factory=list, repr=False)

    @property
    def interior(self) -> np.ndarray:
        return self.labels == INTERIOR

    @property
    def interior_cells(self) -> int:
        return int(np.count_nonzero(self.interior))

    def axis_coordinates(self) -> List[np.ndarray]:
        return [self.origin[d] + (np.arange(n) + 0.5) * self.h for d, n in enumerate(self.shape)]

    def cell_centers(self) -> np.ndarray:
        grids = np.meshgrid(*self.axis_coordinates(), indexing="ij")
        return np.stack(grids, axis=-1)

    def with_values(self, values: np.ndarray, residual_history=None) -> "ScalarField":
        return replace(self, values=values, residual_history=list(residual_history or []))


@dataclass(frozen=True)
class SolverOptions:
    rtol: float = 1e-8
    max_iterations: int = 20000
    restarts: int = 3
    preconditioner: str = "jacobi"


# ------------------------------------------------------------------- lattice


def lattice_shape(domain: DomainSpec, h: float) -> Tuple[int, int, int]:
    lo, hi = domain.bounding_box()
    # Tolerance keeps a box whose width is a multiple of h from gaining a cell
    return tuple(int(math.ceil((b - a) / h - 1e-9)) for a, b in zip(lo, hi))


def _check_cell_cap(domain: DomainSpec, h: float, max_cells: float):
    n = math.prod(lattice_shape(domain, h))
    if n > max_cells:
        raise ResourceError(f"h={h:.4g} needs {n} cells, above the cap of {max_cells:.3g}")


def build_mask(pd: PerforatedDomain, h: float, max_cells: float = math.inf) -> ScalarField:
    if not h > 0:
        raise ParameterError(f"grid spacing must be positive, got {h}")
    domain = pd.domain
    _check_cell_cap(domain, h, max_cells)
    lo, hi = domain.bounding_box()
    shape = lattice_shape(domain, h)
    origin = 0.5 * (lo + hi) - 0.5 * h * np.asarray(shape)

    axes = [origin[d] + (np.arange(n) + 0.5) * h for d, n in enumerate(shape)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    labels = np.where(domain.contains(centers), INTERIOR, EXTERIOR).astype(np.int8)

    resolved = pd.radii >= 0.5 * h
    dropped = int(np.count_nonzero(~resolved))
    if dropped:
        logger.warning(f"{dropped} holes below h/2 = {0.5 * h:.3g} dropped from the mask")

    for c, a in zip(pd.centers[resolved], pd.radii[resolved]):
        i0 = np.maximum(np.floor((c - a - origin) / h).astype(int), 0)
        i1 = np.minimum(np.ceil((c + a - origin) / h).astype(int) + 1, shape)
        box = tuple(slice(s, e) for s, e in zip(i0, i1))
        local = centers[box]
        in_hole = np.linalg.norm(local - c, axis=-1) <= a
        sub = labels[box]
        sub[in_hole & (sub == INTERIOR)] = HOLE

    if not np.any(labels == INTERIOR):
        raise DomainError(f"no interior cells at h={h:.4g}")

    faces = _robin_faces(labels, centers, h)
    logger.debug(
        f"mask h={h:.4g} shape={shape}: {int(np.sum(labels == INTERIOR))} interior cells, "
        f"{len(faces)} Robin faces"
    )
    return ScalarField(
        origin=origin,
        h=h,
        shape=shape,
        labels=labels,
        faces=faces,
        dropped_holes=dropped,
        resolved_holes=int(np.count_nonzero(resolved)),
    )


def _robin_faces(labels: np.ndarray, centers: np.ndarray, h: float) -> RobinFaces:
    padded = np.pad(labels, 1, constant_values=EXTERIOR)
    inner = tuple(slice(1, -1) for _ in range(3))
    cells, face_centers, axes, on_hole = [], [], [], []
    for axis in range(3):
        for side in (-1, 1):
            neighbour = np.roll(padded, -side, axis=axis)[inner]
            hit = (labels == INTERIOR) & (neighbour != INTERIOR)
            idx = np.argwhere(hit)
            offset = np.zeros(3)
            offset[axis] = 0.5 * side * h
            cells.append(idx)
            face_centers.append(centers[hit] + offset)
            axes.append(np.full(len(idx), axis))
            on_hole.append(neighbour[hit] == HOLE)
    return RobinFaces(
        cells=np.concatenate(cells),
        centers=np.concatenate(face_centers),
        axis=np.concatenate(axes),
        on_hole=np.concatenate(on_hole),
    )


# ------------------------------------------------------------------ assembly


def _face_conductance(problem: ProxyProblem, h: float) -> float:
    # Half-cell conduction in series with the Robin transfer
    kappa, L = problem.conductivity, problem.robin_coefficient
    return 2.0 * kappa * L / (2.0 * kappa + L * h)


def _active_faces(problem: ProxyProblem, faces: RobinFaces) -> np.ndarray:
    insulated = np.isin(faces.axis, problem.insulated_axes)
    return faces.on_hole | ~insulated


def assemble_system(
    problem: ProxyProblem, mask: ScalarField, source_field: Optional[np.ndarray] = None
) -> Tuple[sparse.csr_matrix, np.ndarray, np.ndarray]:
    """Return (A, b, index) where index maps lattice cells to unknowns (-1 off interior)."""
    h = mask.h
    interior = mask.interior
    n = int(interior.sum())
    index = np.full(mask.shape, -1, dtype=np.int64)
    index[interior] = np.arange(n)

    rows, cols, data = [], [], []
    conductance = problem.conductivity * h
    for axis in range(3):
        a = np.moveaxis(index, axis, 0)[:-1].ravel()
        b = np.moveaxis(index, axis, 0)[1:].ravel()
        pair = (a >= 0) & (b >= 0)
        a, b = a[pair], b[pair]
        c = np.full(len(a), conductance)
        rows += [a, b, a, b]
        cols += [a, b, b, a]
        data += [c, c, -c, -c]

    faces = mask.faces
    active = _active_faces(problem, faces)
    face_cells = index[tuple(faces.cells[active].T)]
    theta0 = problem.boundary_datum(faces.centers[active])
    if len(theta0) and theta0.min() < problem.min_temperature:
        raise ParameterError(
            f"boundary datum {theta0.min():.4g} below the minimum temperature "
            f"{problem.min_temperature:g}"
        )
    if not len(face_cells):
        raise DomainError("no Robin faces: the problem has no boundary coupling")
    robin = np.full(len(face_cells), h * h * _face_conductance(problem, h))
    rows.append(face_cells)
    cols.append(face_cells)
    data.append(robin)

    A = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    b = np.bincount(face_cells, weights=robin * theta0, minlength=n)
    if source_field is not None:
        source_field = np.asarray(source_field, dtype=float)
        if source_field.shape != tuple(mask.shape):
            raise ParameterError(
                f"source field shape {source_field.shape} does not match the lattice {mask.shape}"
            )
        b += source_field[interior] * h**3
    else:
        b += problem.source * h**3
    return A, b, index


# -------------------------------------------------------------------- solver


# Retry decorator that restarts a stalled solve
def retry_solver_call(
    max_attempts: int = 4,
    exceptions: tuple = (SolverConvergenceError,),
):
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        @retry(
            stop=stop_after_attempt(max_attempts),
            retry=retry_if_exception_type(exceptions),
            before_sleep=before_sleep_log(logger, logging.WARNING),
            reraise=True,
        )
        def wrapper(*args, **kwargs) -> Any:
            return func(*args, **kwargs)

        return wrapper

    return decorator


def _preconditioner(A, kind: str):
    if kind == "amg":
        # Smoothed-aggregation V-cycle
        hierarchy = smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=500)
        return hierarchy.aspreconditioner(cycle="V")
    if kind == "jacobi":
        return sparse.diags(1.0 / A.diagonal())
    raise ParameterError(f"unknown preconditioner {kind!r}; use 'jacobi' or 'amg'")


def _cg_with_restarts(A, b, options: SolverOptions) -> Tuple[np.ndarray, List[float]]:
    """CG from the last iterate on each restart.

    The history holds one relative residual per attempt, computed once when the
    attempt stops; the iteration callback only counts.
    """
    preconditioner = _preconditioner(A, options.preconditioner)
    b_norm = float(np.linalg.norm(b)) or 1.0
    state = {"x": np.zeros_like(b), "history": [], "iterations": 0}

    def count(_xk):
        state["iterations"] += 1

    @retry_solver_call(max_attempts=options.restarts + 1)
    def attempt():
        x, info = cg(
            A,
            b,
            x0=state["x"],
            rtol=options.rtol,
            atol=0.0,
            maxiter=options.max_iterations,
            M=preconditioner,
            callback=count,
        )
        state["x"] = x
        residual = float(np.linalg.norm(b - A @ x)) / b_norm
        state["history"].append(residual)
        if info != 0:
            raise SolverConvergenceError(
                f"CG stopped at relative residual {residual:.3e} after "
                f"{state['iterations']} iterations (target {options.rtol:g})",
                state["history"],
            )
        return x

    x = attempt()
    logger.debug(
        f"CG ({options.preconditioner}) converged in {state['iterations']} iterations "
        f"on {len(b)} unknowns"
    )
    return x, state["history"]


def solve_robin(
    problem: ProxyProblem,
    mask: ScalarField,
    source_field: Optional[np.ndarray] = None,
    options: SolverOptions = SolverOptions(),
) -> ScalarField:
    A, b, index = assemble_system(problem, mask, source_field)
    x, history = _cg_with_restarts(A, b, options)
    values = np.full(mask.shape, np.nan)
    values[mask.interior] = x
    return mask.with_values(values, history)


def robin_flux_balance(
    problem: ProxyProblem, field: ScalarField, source_field: Optional[np.ndarray] = None
) -> Tuple[float, float]:
    """(total Robin outflow, total source) over the solved field."""
    if field.values is None:
        raise ParameterError("field has no values")
    h = field.h
    faces = field.faces
    active = _active_faces(problem, faces)
    theta_cell = field.values[tuple(faces.cells[active].T)]
    theta0 = problem.boundary_datum(faces.centers[active])
    # Face temperature from the half-cell / Robin series elimination
    kappa, L = problem.conductivity, problem.robin_coefficient
    theta_face = (2.0 * kappa * theta_cell + L * h * theta0) / (2.0 * kappa + L * h)
    outflow = math.fsum(L * (theta_face - theta0) * h * h)
    if source_field is not None:
        produced = math.fsum(np.asarray(source_field)[field.interior] * h**3)
    else:
        produced = problem.source * h**3 * field.interior_cells
    return outflow, produced


# ------------------------------------------------------------ homogenization


def relative_l2_distance(field: ScalarField, baseline: ScalarField) -> float:
    """‖θ_ε − θ₀‖₂ / ‖θ₀‖₂ on the cells interior to both lattices."""
    if field.shape != baseline.shape:
        raise ParameterError("fields live on different lattices")
    common = field.interior & baseline.interior
    diff = field.values[common] - baseline.values[common]
    ref = float(np.linalg.norm(baseline.values[common]))
    return float(np.linalg.norm(diff)) / ref if ref > 0 else 0.0


def no_hole_domain(pd: PerforatedDomain) -> PerforatedDomain:
    return PerforatedDomain.from_holes(pd.domain, pd.eps, pd.alpha, np.empty((0, 3)), [])


def homogenization_distance(
    pd: PerforatedDomain,
    problem: ProxyProblem,
    h: float,
    baseline: Optional[ScalarField] = None,
    options: SolverOptions = SolverOptions(),
    max_cells: float = math.inf,
) -> Tuple[float, ScalarField, ScalarField]:
    if baseline is None:
        baseline = solve_robin(problem, build_mask(no_hole_domain(pd), h, max_cells), options=options)
    field = solve_robin(problem, build_mask(pd, h, max_cells), options=options)
    return relative_l2_distance(field, baseline), field, baseline


def sweep_grid_spacing(
    eps_list: Sequence[float],
    alpha: float,
    typical_radius: float,
    h_max: float,
    cells_per_radius: float,
) -> float:
    finest = min(eps_list) ** alpha * typical_radius / cells_per_radius
    return min(h_max, finest) if finest > 0 else h_max


def _finest_feasible_eps(
    domain: DomainSpec, alpha: float, typical_radius: float, cells_per_radius: float, max_cells: float
) -> float:
    lo, hi = domain.bounding_box()
    h_cap = (float(np.prod(hi - lo)) / max_cells) ** (1.0 / 3.0)
    return (cells_per_radius * h_cap / typical_radius) ** (1.0 / alpha)


def _coupled_seed(
    params: ProcessParams,
    domain: DomainSpec,
    alpha: float,
    problem: ProxyProblem,
    eps_list: Sequence[float],
    h: float,
    baseline: ScalarField,
    options: SolverOptions,
    max_cells: float,
    max_expected_points: float,
    trace_p: Optional[float],
    trace_cells_per_radius: float,
    keep_fields: bool,
    trial: int,
) -> List[Tuple[float, int, int, int, Optional[TraceNorm], Optional[ScalarField]]]:
    # Domains are convex and centred at 0, so D/ε ⊂ D/ε_min for every ε in the
    # sweep and restricting one realization gives each ε its own Poisson sample
    sample = sample_marked(params, domain.scaled(1.0 / min(eps_list)), trial, max_expected_points)
    out = []
    for eps in eps_list:
        pd = build_perforated(domain, sample, eps, alpha)
        distance, field, _ = homogenization_distance(
            pd, problem, h, baseline=baseline, options=options, max_cells=max_cells
        )
        trace = None
        if trace_p is not None:
            trace = discrete_trace_norm(field, pd, trace_p, trace_cells_per_radius)
        kept = field if keep_fields and trial == 0 else None
        out.append(
            (distance, pd.hole_count, field.dropped_holes, field.interior_cells, trace, kept)
        )
        logger.debug(f"proxy eps={eps} seed {trial}: distance {distance:.4g}, {pd.hole_count} holes")
    return out


def homogenization_sweep(
    params: ProcessParams,
    domain: DomainSpec,
    alpha: float,
    problem: ProxyProblem,
    eps_list: Sequence[float],
    n_seeds: int = 1,
    h_max: float = 1.0 / 32.0,
    cells_per_radius: float = 2.0,
    max_cells: float = math.inf,
    max_expected_points: float = math.inf,
    options: SolverOptions = SolverOptions(),
    trace_p: Optional[float] = None,
    trace_cells_per_radius: float = 4.0,
    workers: int = 1,
    field_sink: Optional[Callable[[float, ScalarField], None]] = None,
) -> List[HomogenizationRow]:
    """Distance to the hole-free solution along an ε sweep.

    Each seed draws a single realization that every ε in the sweep filters
    and rescales, so a seed's distances follow one ω as ε decreases.
    """
    eps_list = list(eps_list)
    if not eps_list:
        raise ParameterError("eps list is empty")
    if n_seeds < 1:
        raise ParameterError("n_seeds must be at least 1")
    if alpha <= 3:
        logger.warning(f"alpha={alpha} <= 3: the proxy limit is not expected to hold")

    r_ref = params.radius_law.typical_radius
    h = problem.grid_spacing or sweep_grid_spacing(eps_list, alpha, r_ref, h_max, cells_per_radius)
    if math.prod(lattice_shape(domain, h)) > max_cells:
        finest = _finest_feasible_eps(domain, alpha, r_ref, cells_per_radius, max_cells)
        raise ResourceError(
            f"h={h:.4g} exceeds the grid cap of {max_cells:.3g} cells; "
            f"finest feasible eps is about {finest:.3g}"
        )
    logger.info(f"proxy sweep on h={h:.4g}, lattice {lattice_shape(domain, h)}")

    empty = PerforatedDomain.from_holes(domain, eps_list[0], alpha, np.empty((0, 3)), [])
    baseline = solve_robin(problem, build_mask(empty, h, max_cells), options=options)

    task = partial(
        _coupled_seed,
        params,
        domain,
        alpha,
        problem,
        eps_list,
        h,
        baseline,
        options,
        max_cells,
        max_expected_points,
        trace_p,
        trace_cells_per_radius,
        field_sink is not None,
    )
    per_seed = fan_out_seeds(task, n_seeds, workers)

    rows = []
    for k, eps in enumerate(eps_list):
        results = [seed[k] for seed in per_seed]
        if field_sink is not None:
            field_sink(eps, results[0][5])
        distance, distance_se = aggregate_mean_se([r[0] for r in results])
        traces = [r[4].value for r in results if r[4] is not None and r[4].holes_used > 0]
        rows.append(
            HomogenizationRow(
                eps=eps,
                distance=distance,
                distance_se=distance_se,
                hole_count=math.fsum(r[1] for r in results) / n_seeds,
                dropped_holes=math.fsum(r[2] for r in results) / n_seeds,
                grid_spacing=h,
                interior_cells=results[0][3],
                trace_norm=math.fsum(traces) / len(traces) if traces else None,
            )
        )
        logger.info(f"proxy eps={eps}: relative L2 distance {distance:.4g}")
    return rows


# --------------------------------------------------------------------- trace


def _filled_interpolator(field: ScalarField) -> RegularGridInterpolator:
    # Non-interior cells take the value of their nearest interior cell
    _, nearest = distance_transform_edt(~field.interior, return_indices=True)
    filled = field.values[tuple(nearest)]
    return RegularGridInterpolator(
        field.axis_coordinates(), filled, method="linear", bounds_error=False, fill_value=None
    )


def discrete_trace_norm(
    field: ScalarField, pd: PerforatedDomain, p: float, min_cells_per_radius: float = 4.0
) -> TraceNorm:
    """(Σ_i ∮_{∂B_i} |θ|^p dS)^{1/p} by Lebedev quadrature on each resolved sphere."""
    if not p >= 1:
        raise ParameterError(f"trace exponent must be >= 1, got {p}")
    if field.values is None:
        raise ParameterError("field has no values")
    used = pd.radii >= min_cells_per_radius * field.h
    excluded = int(np.count_nonzero(~used))
    if excluded:
        logger.warning(
            f"{excluded} holes under {min_cells_per_radius:g} cells per radius excluded from the trace"
        )
    if not used.any():
        return TraceNorm(value=0.0, p=p, holes_used=0, holes_excluded=excluded)

    nodes, weights = lebedev_rule(LEBEDEV_ORDER)
    centers, radii = pd.centers[used], pd.radii[used]
    points = centers[:, None, :] + radii[:, None, None] * nodes.T[None, :, :]
    theta = _filled_interpolator(field)(points.reshape(-1, 3)).reshape(len(radii), -1)
    total = math.fsum((radii[:, None] ** 2 * weights[None, :] * np.abs(theta) ** p).ravel())
    return TraceNorm(
        value=total ** (1.0 / p),
        p=p,
        holes_used=int(used.sum()),
        holes_excluded=excluded,
    )


# -------------------------------------------------------------------- output


def write_field(field: ScalarField, path: Union[str, Path]) -> Path:
    """Plain-text lattice dump: header lines, then 'i j k label value' per cell."""
    path = Path(path)
    idx = np.indices(field.shape).reshape(3, -1).T
    values = field.values if field.values is not None else np.full(field.shape, np.nan)
    table = np.column_stack([idx, field.labels.ravel(), values.ravel()])
    header = "\n".join(
        [
            FIELD_HEADER.lstrip("# "),
            "shape " + " ".join(str(n) for n in field.shape),
            f"h {field.h!r}",
            "origin " + " ".join(repr(float(v)) for v in field.origin),
            f"legend {EXTERIOR}=exterior {INTERIOR}=interior {HOLE}=hole",
        ]
    )
    np.savetxt(path, table, fmt=["%d", "%d", "%d", "%d", "%.12g"], header=header)
    return path
