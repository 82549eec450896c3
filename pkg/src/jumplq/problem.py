"""Problem data model: time grid, coefficient paths, validation, JSON I/O.

A problem bundles the state/control dimensions, a uniform time grid, a finite
jump mark space (weighted atoms), time-dependent coefficient paths for the
dynamics and the running cost, and the terminal data.  Coefficient paths are
either constant or sampled per grid point with linear interpolation in
between; evaluation at a grid point reproduces the stored sample exactly.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import OutOfHorizon, ProblemFormatError, ProblemValidationError
from .linalg import is_symmetric


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``steps`` intervals on [t0, T]."""

    t0: float
    T: float
    steps: int

    @property
    def h(self):
        return (self.T - self.t0) / self.steps

    def times(self):
        return np.linspace(self.t0, self.T, self.steps + 1)


class CoefficientPath:
    """Coefficient as a function of time: a constant or per-grid samples."""

    __slots__ = ("const", "samples")

    def __init__(self, const=None, samples=None):
        if (const is None) == (samples is None):
            raise ValueError("provide exactly one of const, samples")
        self.const = None if const is None else np.asarray(const, dtype=float)
        self.samples = None if samples is None else np.asarray(samples, dtype=float)

    @staticmethod
    def constant(value):
        return CoefficientPath(const=value)

    @staticmethod
    def sampled(values):
        return CoefficientPath(samples=values)

    @property
    def is_const(self):
        return self.const is not None

    def value_shape(self):
        return self.const.shape if self.is_const else self.samples.shape[1:]

    def at(self, t, grid):
        """Evaluate at time ``t``; raises OutOfHorizon outside [t0, T]."""
        slack = 1e-12 * (1.0 + abs(grid.t0) + abs(grid.T))
        if t < grid.t0 - slack or t > grid.T + slack:
            raise OutOfHorizon(f"t={t!r} outside [{grid.t0!r}, {grid.T!r}]")
        if self.is_const:
            return self.const
        s = (t - grid.t0) / grid.h
        k = int(round(s))
        if abs(s - k) <= 1e-9:
            # Snap to the grid point so stored samples are reproduced exactly.
            return self.samples[min(max(k, 0), grid.steps)]
        i = min(max(int(np.floor(s)), 0), grid.steps - 1)
        w = s - i
        return (1.0 - w) * self.samples[i] + w * self.samples[i + 1]

    def __eq__(self, other):
        if not isinstance(other, CoefficientPath):
            return NotImplemented
        if self.is_const != other.is_const:
            return False
        if self.is_const:
            return self.const.shape == other.const.shape and np.array_equal(self.const, other.const)
        return self.samples.shape == other.samples.shape and np.array_equal(self.samples, other.samples)


@dataclass
class ProblemSpec:
    """Raw problem data, structurally well formed but not yet validated."""

    n: int
    m: int
    grid: TimeGrid
    mark_ids: list
    weights: np.ndarray       # (K,) jump intensities per mark
    A: CoefficientPath        # (n, n) drift
    B: CoefficientPath        # (n, m) control-to-drift
    C: CoefficientPath        # (n, n) diffusion
    D: CoefficientPath        # (n, m) control-to-diffusion
    F: list                   # K paths, (n, n) jump amplitude per mark
    G: list                   # K paths, (n, m) control-to-jump per mark
    b: CoefficientPath        # (n,) drift offset
    sigma: CoefficientPath    # (n,) diffusion offset
    f: list                   # K paths, (n,) jump offset per mark
    Q: CoefficientPath        # (n, n) symmetric state weight
    S: CoefficientPath        # (m, n) cross weight
    R: CoefficientPath        # (m, m) symmetric control weight
    q: CoefficientPath        # (n,) linear state cost
    rho: CoefficientPath      # (m,) linear control cost
    H: np.ndarray             # (n, n) symmetric terminal weight
    g: np.ndarray             # (n,) linear terminal cost
    x0: np.ndarray            # (n,) initial state

    @property
    def K(self):
        return len(self.mark_ids)

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        scalars = (
            self.n == other.n and self.m == other.m and self.grid == other.grid
            and self.mark_ids == other.mark_ids
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.H, other.H)
            and np.array_equal(self.g, other.g)
            and np.array_equal(self.x0, other.x0)
        )
        if not scalars:
            return False
        paths = all(getattr(self, name) == getattr(other, name)
                    for name in ("A", "B", "C", "D", "b", "sigma", "Q", "S", "R", "q", "rho"))
        marks = all(self.F[i] == other.F[i] and self.G[i] == other.G[i] and self.f[i] == other.f[i]
                    for i in range(self.K))
        return paths and marks


class ValidatedProblem:
    """Validated problem with evaluated coefficient access.

    ``A(t)``, ``B(t)``, ... return the coefficient value at time t;
    ``Fs(t)``, ``Gs(t)``, ``fs(t)`` return all marks stacked along axis 0,
    with zero-length leading axis when there are no marks.
    """

    def __init__(self, spec):
        self.spec = spec
        self.n = spec.n
        self.m = spec.m
        self.K = spec.K
        self.grid = spec.grid
        self.times = spec.grid.times()
        self.h = spec.grid.h
        self.weights = np.asarray(spec.weights, dtype=float)
        self.H = np.asarray(spec.H, dtype=float)
        self.g = np.asarray(spec.g, dtype=float)
        self.x0 = np.asarray(spec.x0, dtype=float)

    def A(self, t):
        return self.spec.A.at(t, self.grid)

    def B(self, t):
        return self.spec.B.at(t, self.grid)

    def C(self, t):
        return self.spec.C.at(t, self.grid)

    def D(self, t):
        return self.spec.D.at(t, self.grid)

    def b(self, t):
        return self.spec.b.at(t, self.grid)

    def sigma(self, t):
        return self.spec.sigma.at(t, self.grid)

    def Q(self, t):
        return self.spec.Q.at(t, self.grid)

    def S(self, t):
        return self.spec.S.at(t, self.grid)

    def R(self, t):
        return self.spec.R.at(t, self.grid)

    def q(self, t):
        return self.spec.q.at(t, self.grid)

    def rho(self, t):
        return self.spec.rho.at(t, self.grid)

    def Fs(self, t):
        if self.K == 0:
            return np.zeros((0, self.n, self.n))
        return np.stack([p.at(t, self.grid) for p in self.spec.F])

    def Gs(self, t):
        if self.K == 0:
            return np.zeros((0, self.n, self.m))
        return np.stack([p.at(t, self.grid) for p in self.spec.G])

    def fs(self, t):
        if self.K == 0:
            return np.zeros((0, self.n))
        return np.stack([p.at(t, self.grid) for p in self.spec.f])


def _check_path(errors, name, path, shape, steps, symmetric=False):
    want = tuple(shape)
    if path.is_const:
        values = path.const[None, ...]
        labels = [None]
    else:
        if path.samples.shape[0] != steps + 1:
            errors.append(f"{name}: sampled path has {path.samples.shape[0]} samples, expected {steps + 1}")
            return
        values = path.samples
        labels = list(range(steps + 1))
    if values.shape[1:] != want:
        got = values.shape[1:] if not path.is_const else path.const.shape
        errors.append(f"{name}: shape {got} does not match expected {want}")
        return
    if not np.all(np.isfinite(values)):
        where = np.argwhere(~np.isfinite(values))[0]
        at = "" if path.is_const else f" at sample {where[0]}"
        errors.append(f"{name}: non-finite entry{at}")
        return
    if symmetric:
        for j, val in enumerate(values):
            if not is_symmetric(val):
                at = "" if labels[j] is None else f" at sample {labels[j]}"
                errors.append(f"{name}: not symmetric{at}")
                return


def validation_errors(spec):
    """Collect every validation violation; empty list means valid."""
    errors = []
    if not isinstance(spec.n, int) or spec.n < 1:
        errors.append(f"n: must be a positive integer, got {spec.n!r}")
    if not isinstance(spec.m, int) or spec.m < 1:
        errors.append(f"m: must be a positive integer, got {spec.m!r}")
    g = spec.grid
    if not isinstance(g.steps, int) or g.steps < 1:
        errors.append(f"grid.steps: must be a positive integer, got {g.steps!r}")
    if not (np.isfinite(g.t0) and np.isfinite(g.T) and g.t0 < g.T):
        errors.append(f"grid: requires finite t0 < T, got t0={g.t0!r}, T={g.T!r}")
    if errors:
        # Dimension and sample-count checks below need sane n, m, steps.
        return errors

    K = spec.K
    seen = set()
    for i, mark in enumerate(spec.mark_ids):
        if not isinstance(mark, str) or not mark:
            errors.append(f"marks[{i}].id: must be a non-empty string")
        elif mark in seen:
            errors.append(f"marks[{i}].id: duplicate id {mark!r}")
        else:
            seen.add(mark)
    weights = np.asarray(spec.weights, dtype=float)
    if weights.shape != (K,):
        errors.append(f"marks: {K} ids but {weights.shape[0]} intensities")
        return errors
    for i, w in enumerate(weights):
        if not np.isfinite(w) or w < 0.0:
            errors.append(f"marks[{i}].pi: negative or non-finite jump intensity {w!r}")
    if not (len(spec.F) == len(spec.G) == len(spec.f) == K):
        errors.append(f"F/G/f: per-mark path counts ({len(spec.F)}, {len(spec.G)}, {len(spec.f)}) "
                      f"do not all match the {K} marks")
        return errors

    n, m, steps = spec.n, spec.m, g.steps
    _check_path(errors, "A", spec.A, (n, n), steps)
    _check_path(errors, "B", spec.B, (n, m), steps)
    _check_path(errors, "C", spec.C, (n, n), steps)
    _check_path(errors, "D", spec.D, (n, m), steps)
    _check_path(errors, "b", spec.b, (n,), steps)
    _check_path(errors, "sigma", spec.sigma, (n,), steps)
    for i in range(K):
        _check_path(errors, f"F[{i}]", spec.F[i], (n, n), steps)
        _check_path(errors, f"G[{i}]", spec.G[i], (n, m), steps)
        _check_path(errors, f"f[{i}]", spec.f[i], (n,), steps)
    _check_path(errors, "Q", spec.Q, (n, n), steps, symmetric=True)
    _check_path(errors, "S", spec.S, (m, n), steps)
    _check_path(errors, "R", spec.R, (m, m), steps, symmetric=True)
    _check_path(errors, "q", spec.q, (n,), steps)
    _check_path(errors, "rho", spec.rho, (m,), steps)

    for name, arr, shape in (("H", spec.H, (n, n)), ("g", spec.g, (n,)), ("x0", spec.x0, (n,))):
        a = np.asarray(arr, dtype=float)
        if a.shape != shape:
            errors.append(f"{name}: shape {a.shape} does not match expected {shape}")
        elif not np.all(np.isfinite(a)):
            errors.append(f"{name}: non-finite entry")
        elif name == "H" and not is_symmetric(a):
            errors.append("H: not symmetric")
    return errors


def validate(spec):
    """Return a ValidatedProblem or raise ProblemValidationError listing every violation."""
    errors = validation_errors(spec)
    if errors:
        raise ProblemValidationError(errors)
    return ValidatedProblem(spec)


_TOP_KEYS = ("n", "m", "grid", "marks", "A", "B", "C", "D", "F", "G",
             "b", "sigma", "f", "Q", "S", "R", "q", "rho", "H", "g", "x0")


def _array_from_json(node, name):
    try:
        arr = np.asarray(node, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{name}: not a numeric array ({exc})") from exc
    if arr.dtype != np.float64:
        raise ProblemFormatError(f"{name}: not a numeric array")
    return arr


def _path_from_json(node, name):
    if not isinstance(node, dict) or len(node) != 1 or next(iter(node)) not in ("const", "sampled"):
        raise ProblemFormatError(f'{name}: expected an object with exactly one of "const" or "sampled"')
    kind, payload = next(iter(node.items()))
    arr = _array_from_json(payload, name)
    if kind == "const":
        return CoefficientPath.constant(arr)
    if arr.ndim < 1:
        raise ProblemFormatError(f"{name}: sampled payload must be a list of samples")
    return CoefficientPath.sampled(arr)


def _path_list_from_json(node, name, count):
    if not isinstance(node, list):
        raise ProblemFormatError(f"{name}: expected a list of paths, one per mark")
    if len(node) != count:
        raise ProblemFormatError(f"{name}: {len(node)} paths for {count} marks")
    return [_path_from_json(p, f"{name}[{i}]") for i, p in enumerate(node)]


def problem_from_dict(doc):
    """Build a ProblemSpec from a decoded JSON document; schema errors raise ProblemFormatError."""
    if not isinstance(doc, dict):
        raise ProblemFormatError("top-level document must be an object")
    for key in _TOP_KEYS:
        if key not in doc:
            raise ProblemFormatError(f'missing required key "{key}"')
    for key in doc:
        if key not in _TOP_KEYS:
            raise ProblemFormatError(f'unrecognized key "{key}"')

    grid_doc = doc["grid"]
    if not isinstance(grid_doc, dict) or set(grid_doc) != {"t0", "T", "steps"}:
        raise ProblemFormatError('grid: expected an object with keys "t0", "T", "steps"')
    try:
        grid = TimeGrid(t0=float(grid_doc["t0"]), T=float(grid_doc["T"]), steps=int(grid_doc["steps"]))
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"grid: {exc}") from exc

    marks_doc = doc["marks"]
    if not isinstance(marks_doc, list):
        raise ProblemFormatError("marks: expected a list")
    mark_ids, weights = [], []
    for i, mark in enumerate(marks_doc):
        if not isinstance(mark, dict) or set(mark) != {"id", "pi"}:
            raise ProblemFormatError(f'marks[{i}]: expected an object with keys "id", "pi"')
        mark_ids.append(mark["id"])
        try:
            weights.append(float(mark["pi"]))
        except (TypeError, ValueError) as exc:
            raise ProblemFormatError(f"marks[{i}].pi: {exc}") from exc
    K = len(mark_ids)

    try:
        n = int(doc["n"])
        m = int(doc["m"])
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"n/m: {exc}") from exc

    return ProblemSpec(
        n=n, m=m, grid=grid, mark_ids=mark_ids, weights=np.asarray(weights, dtype=float),
        A=_path_from_json(doc["A"], "A"), B=_path_from_json(doc["B"], "B"),
        C=_path_from_json(doc["C"], "C"), D=_path_from_json(doc["D"], "D"),
        F=_path_list_from_json(doc["F"], "F", K), G=_path_list_from_json(doc["G"], "G", K),
        b=_path_from_json(doc["b"], "b"), sigma=_path_from_json(doc["sigma"], "sigma"),
        f=_path_list_from_json(doc["f"], "f", K),
        Q=_path_from_json(doc["Q"], "Q"), S=_path_from_json(doc["S"], "S"),
        R=_path_from_json(doc["R"], "R"),
        q=_path_from_json(doc["q"], "q"), rho=_path_from_json(doc["rho"], "rho"),
        H=_array_from_json(doc["H"], "H"), g=_array_from_json(doc["g"], "g"),
        x0=_array_from_json(doc["x0"], "x0"),
    )


def _path_to_json(path):
    if path.is_const:
        return {"const": path.const.tolist()}
    return {"sampled": path.samples.tolist()}


def problem_to_dict(spec):
    return {
        "n": spec.n, "m": spec.m,
        "grid": {"t0": spec.grid.t0, "T": spec.grid.T, "steps": spec.grid.steps},
        "marks": [{"id": mid, "pi": float(w)} for mid, w in zip(spec.mark_ids, spec.weights)],
        "A": _path_to_json(spec.A), "B": _path_to_json(spec.B),
        "C": _path_to_json(spec.C), "D": _path_to_json(spec.D),
        "F": [_path_to_json(p) for p in spec.F], "G": [_path_to_json(p) for p in spec.G],
        "b": _path_to_json(spec.b), "sigma": _path_to_json(spec.sigma),
        "f": [_path_to_json(p) for p in spec.f],
        "Q": _path_to_json(spec.Q), "S": _path_to_json(spec.S), "R": _path_to_json(spec.R),
        "q": _path_to_json(spec.q), "rho": _path_to_json(spec.rho),
        "H": np.asarray(spec.H, dtype=float).tolist(),
        "g": np.asarray(spec.g, dtype=float).tolist(),
        "x0": np.asarray(spec.x0, dtype=float).tolist(),
    }


def load_problem(path):
    """Read and structurally decode a problem document from a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ProblemFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return problem_from_dict(doc)


def save_problem(spec, path):
    """Write a problem document; load_problem(save_problem(spec)) is bit-exact."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(spec), fh, indent=2)
        fh.write("\n")


def with_steps(spec, steps):
    """Copy of the problem on a grid with ``steps`` intervals.

    Sampled coefficient paths are resampled onto the new grid by linear
    interpolation on the old one; constants pass through unchanged.
    """
    if steps == spec.grid.steps:
        return spec
    new_grid = TimeGrid(t0=spec.grid.t0, T=spec.grid.T, steps=int(steps))
    new_times = new_grid.times()

    def resample(path):
        if path.is_const:
            return path
        vals = np.stack([path.at(t, spec.grid) for t in new_times])
        return CoefficientPath.sampled(vals)

    return ProblemSpec(
        n=spec.n, m=spec.m, grid=new_grid, mark_ids=list(spec.mark_ids),
        weights=np.array(spec.weights, dtype=float, copy=True),
        A=resample(spec.A), B=resample(spec.B), C=resample(spec.C), D=resample(spec.D),
        F=[resample(p) for p in spec.F], G=[resample(p) for p in spec.G],
        b=resample(spec.b), sigma=resample(spec.sigma), f=[resample(p) for p in spec.f],
        Q=resample(spec.Q), S=resample(spec.S), R=resample(spec.R),
        q=resample(spec.q), rho=resample(spec.rho),
        H=spec.H, g=spec.g, x0=spec.x0,
    )


def homogeneous_part(spec):
    """Problem with all offsets and linear cost terms removed and x0 = 0.

    Used by the convexity probe: the cost of this problem evaluated on an
    arbitrary control is the quadratic functional whose nonnegativity
    characterizes a convex problem.
    """
    n, m = spec.n, spec.m
    zero_n = CoefficientPath.constant(np.zeros(n))
    zero_m = CoefficientPath.constant(np.zeros(m))
    return ProblemSpec(
        n=n, m=m, grid=spec.grid, mark_ids=list(spec.mark_ids),
        weights=np.array(spec.weights, dtype=float, copy=True),
        A=spec.A, B=spec.B, C=spec.C, D=spec.D,
        F=list(spec.F), G=list(spec.G),
        b=zero_n, sigma=zero_n, f=[zero_n for _ in range(spec.K)],
        Q=spec.Q, S=spec.S, R=spec.R, q=zero_n, rho=zero_m,
        H=spec.H, g=np.zeros(n), x0=np.zeros(n),
    )
