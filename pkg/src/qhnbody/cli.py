"""Command-line front end: config ingestion, dispatch, serialization.

The subcommands mirror the library layers: central-configuration
solvers (``cc-collinear``, ``cc-planar3``, ``simultaneous``), Cartesian
integration (``simulate``), collision-manifold runs and spectra
(``collision-flow``, ``eigen``), and the invariant-plane construction
(``homothetic``).  Every run is driven by a JSON config carrying a
``schema: 1`` field.  Summaries are JSON with sorted keys and floats
printed to 17 significant digits, so identical configs produce
byte-identical files; time series are CSV with the same float format.

Exit codes: 0 success, 2 config validation, 3 numerical failure (the
stderr line names the failing error class).  ``QH_THREADS`` caps the
worker threads used for per-ordering and mass-grid fan-out.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .central_config import (
    CCQuery,
    CCResult,
    Ordering,
    cc_index,
    cc_residual,
    equilateral_cc,
    equilateral_configuration,
    equilateral_side,
    euler_collinear_homogeneous,
    f_root,
    simultaneous_gap,
    solve_collinear_ordering,
)
from .collision_flow import find_equilibria, integrate_on_C, min_separation, transversality_necessary
from .errors import DegenerateError, ManevOnlyError, QHError
from .homothetic import heteroclinic_orbit
from .mcgehee import McGeheeState, collision_manifold_residual, from_mcgehee, pack_mcgehee, unpack_mcgehee
from .model import (
    Configuration,
    MassSystem,
    PhaseState,
    PotentialParams,
    angular_momentum,
    cartesian_field,
    centered,
    hamiltonian,
    mass_inner,
    moment_of_inertia,
    pack_phase,
    potential_V,
    unpack_phase,
)
from .integrate import integrate

SCHEMA = 1

_TOP_KEYS = frozenset(
    {
        "schema",
        "masses",
        "potential",
        "inertia_I0",
        "energy_h",
        "initial_state",
        "tolerances",
        "options",
    }
)


class ConfigError(ValueError):
    """A config file (or QH_THREADS) violates a documented precondition."""


# ---------------------------------------------------------------------------
# deterministic serialization


def _json_text(obj, indent: int = 0) -> str:
    # Hand-rolled so float formatting is pinned: json.dump offers no hook
    # for serializable types, and repr() digits vary with the value.
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {_json_text(obj[k], indent + 1)}'
            for k in sorted(obj)
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}  {_json_text(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, np.ndarray):
        return _json_text(obj.tolist(), indent)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return json.dumps(repr(x))
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(_json_text(payload) + "\n")
    return path


def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])
    return path


# ---------------------------------------------------------------------------
# fan-out


def _thread_count() -> int:
    raw = os.environ.get("QH_THREADS", "")
    if not raw:
        return 1
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError(f"QH_THREADS must be an integer, got {raw!r}") from None
    if k < 1:
        raise ConfigError(f"QH_THREADS must be >= 1, got {k}")
    return k


def _pmap(fn, items):
    items = list(items)
    workers = min(_thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# config


@dataclass
class RunConfig:
    """Validated run description shared by every subcommand."""

    ms: MassSystem
    pp: PotentialParams
    inertia_I0: float = 1.0
    energy_h: float | None = None
    initial_state: dict | None = None
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def opt(self, name: str, default=None):
        return self.options.get(name, default)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        p = Path(path)
        try:
            raw = json.loads(p.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(raw) - _TOP_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if raw.get("schema") != SCHEMA:
            raise ConfigError(
                f"config schema must be {SCHEMA}, got {raw.get('schema')!r}"
            )
        if "masses" not in raw:
            raise ConfigError("config needs a masses array")
        try:
            ms = MassSystem(np.asarray(raw["masses"], dtype=float))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid masses: {exc}") from None

        pot = raw.get("potential", {})
        if not isinstance(pot, dict):
            raise ConfigError("potential must be an object")
        bad = sorted(set(pot) - {"a", "b", "alpha", "beta"})
        if bad:
            raise ConfigError(f"unknown potential keys: {bad}")
        try:
            pp = PotentialParams(**{k: float(v) for k, v in pot.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid potential: {exc}") from None

        inertia = float(raw.get("inertia_I0", 1.0))
        if not (np.isfinite(inertia) and inertia > 0.0):
            raise ConfigError(f"inertia_I0 must be positive, got {inertia!r}")
        energy_h = raw.get("energy_h")
        if energy_h is not None:
            energy_h = float(energy_h)
            if not np.isfinite(energy_h):
                raise ConfigError("energy_h must be finite")
        initial_state = raw.get("initial_state")
        if initial_state is not None and not isinstance(initial_state, dict):
            raise ConfigError("initial_state must be an object")
        tolerances = raw.get("tolerances", {})
        if not isinstance(tolerances, dict):
            raise ConfigError("tolerances must be an object")
        options = raw.get("options", {})
        if not isinstance(options, dict):
            raise ConfigError("options must be an object")
        return cls(
            ms=ms,
            pp=pp,
            inertia_I0=inertia,
            energy_h=energy_h,
            initial_state=initial_state,
            tolerances={k: float(v) for k, v in tolerances.items()},
            options=options,
            base_dir=p.resolve().parent,
        )


# ---------------------------------------------------------------------------
# payload builders


def _potential_payload(pp: PotentialParams) -> dict:
    return {"a": pp.a, "b": pp.b, "alpha": pp.alpha, "beta": pp.beta}


def _ordering_payload(ordering: Ordering | None):
    return None if ordering is None else list(ordering.perm)


def _cc_payload(r: CCResult) -> dict:
    out = {
        "kind": r.kind,
        "ordering": _ordering_payload(r.ordering),
        "positions": r.config.positions,
        "sigma": r.sigma,
        "residual": r.residual,
        "index": r.index,
        "hessian_eigenvalues": r.hess_eigs,
        "inertia_I0": r.inertia_I0,
    }
    if r.sigma1 is not None:
        out["sigma1"] = r.sigma1
        out["sigma2"] = r.sigma2
    return out


def _complex_pairs(z: np.ndarray) -> list:
    z = np.sort_complex(np.asarray(z, dtype=complex).ravel())
    return [[float(c.real), float(c.imag)] for c in z]


# ---------------------------------------------------------------------------
# initial states


def _state_columns(n: int, dim: int) -> list[str]:
    if dim == 2:
        names = [f"r{i}{ax}" for i in range(n) for ax in ("x", "y")]
        names += [f"p{i}{ax}" for i in range(n) for ax in ("x", "y")]
    else:
        names = [f"r{i}" for i in range(n)] + [f"p{i}" for i in range(n)]
    return names


def _mcgehee_columns(n: int, dim: int) -> list[str]:
    if dim == 2:
        names = [f"s{i}{ax}" for i in range(n) for ax in ("x", "y")]
        names += [f"u{i}{ax}" for i in range(n) for ax in ("x", "y")]
    else:
        names = [f"s{i}" for i in range(n)] + [f"u{i}" for i in range(n)]
    return names


def _as_state_array(value, n: int, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != n or arr.shape[1] not in (1, 2):
        raise ConfigError(f"{what} must be an {n} x 1 or {n} x 2 array")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what} must be finite")
    return arr


def _read_csv_row(cfg: RunConfig, spec: dict) -> tuple[float, PhaseState]:
    if "path" not in spec:
        raise ConfigError("csv initial_state needs a path")
    path = Path(spec["path"])
    if not path.is_absolute():
        path = cfg.base_dir / path
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
    except (OSError, StopIteration) as exc:
        raise ConfigError(f"cannot read state csv {path}: {exc}") from None
    if not rows:
        raise ConfigError(f"state csv {path} has no data rows")
    idx = int(spec.get("row", -1))
    try:
        row = rows[idx]
    except IndexError:
        raise ConfigError(
            f"row {idx} out of range for {len(rows)} csv rows"
        ) from None
    cols = {name: k for k, name in enumerate(header)}
    n = cfg.ms.n
    for dim in (2, 1):
        names = _state_columns(n, dim)
        if all(name in cols for name in names) and "t" in cols:
            vals = np.array([float(row[cols[name]]) for name in names])
            sz = n * dim
            state = PhaseState(
                config=Configuration(vals[:sz].reshape(n, dim)),
                momenta=vals[sz:].reshape(n, dim),
            )
            return float(row[cols["t"]]), state
    raise ConfigError(
        f"state csv {path} lacks the r/p columns for {n} bodies"
    )


def _initial_cartesian(cfg: RunConfig) -> tuple[float, PhaseState]:
    """Starting time and phase state for the Cartesian integrator."""
    st = cfg.initial_state
    if st is None:
        raise ConfigError("simulate needs an initial_state")
    kind = st.get("kind")
    if kind == "cartesian":
        n = cfg.ms.n
        r = _as_state_array(st.get("positions"), n, "initial positions")
        p = _as_state_array(st.get("momenta"), n, "initial momenta")
        if r.shape != p.shape:
            raise ConfigError("positions and momenta must have matching shape")
        return 0.0, PhaseState(config=Configuration(r), momenta=p)
    if kind == "mcgehee":
        n = cfg.ms.n
        s = _as_state_array(st.get("s"), n, "initial s")
        u = _as_state_array(st.get("u"), n, "initial u")
        try:
            mst = McGeheeState(
                rho=float(st.get("rho", 0.0)), v=float(st.get("v", 0.0)), s=s, u=u
            )
            return 0.0, from_mcgehee(mst, cfg.ms, cfg.pp)
        except (ValueError, QHError) as exc:
            raise ConfigError(f"invalid blow-up state: {exc}") from None
    if kind == "csv":
        return _read_csv_row(cfg, st)
    raise ConfigError(
        f"initial_state kind must be cartesian, mcgehee or csv, got {kind!r}"
    )


def _pure_b_cc(cfg: RunConfig, case: dict) -> CCResult:
    """A CC of the b-term alone on the unit sphere, from a case spec."""
    ms, pp = cfg.ms, cfg.pp
    ppb = PotentialParams(a=0.0, b=pp.b, alpha=0.0, beta=1.0)
    kind = case.get("kind")
    if kind == "equilateral":
        if ms.n != 3:
            raise ConfigError("equilateral case needs exactly 3 masses")
        config = equilateral_configuration(ms, 1.0)[0]
        sigma, res = cc_residual(config, ms, ppb)
        report = cc_index(config, ms, ppb, ambient="planar", inertia_I0=1.0)
        return CCResult(
            config=config,
            kind="equilateral",
            sigma=sigma,
            residual=res,
            index=report.index,
            hess_eigs=report.eigenvalues,
            inertia_I0=1.0,
        )
    if kind == "collinear":
        perm = case.get("ordering")
        if perm is None:
            raise ConfigError("collinear case needs an ordering")
        try:
            ordering = Ordering(tuple(int(k) for k in perm))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid ordering {perm!r}: {exc}") from None
        if ordering.n != ms.n:
            raise ConfigError("ordering length must match the mass count")
        return euler_collinear_homogeneous(
            ms, pp.b, ordering, 1.0, cfg.tol("grad_tol", 1e-12)
        )
    raise ConfigError(f"case kind must be equilateral or collinear, got {kind!r}")


def _default_cases(cfg: RunConfig) -> list[dict]:
    cases: list[dict] = []
    if cfg.ms.n == 3:
        cases.append({"kind": "equilateral"})
    cases += [
        {"kind": "collinear", "ordering": list(o.perm)}
        for o in Ordering.all_canonical(cfg.ms.n)
    ]
    return cases


def _tangent_perturbation(s: np.ndarray, scale: float, seed: int) -> np.ndarray:
    """Seeded random u with zero total momentum and s . u = 0."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(s.shape)
    flat = g.ravel()
    n, dim = s.shape
    constraints = []
    for ax in range(dim):  # total momentum rows
        e = np.zeros_like(s)
        e[:, ax] = 1.0
        constraints.append(e.ravel())
    constraints.append(s.ravel())
    cmat = np.array(constraints)
    coeffs = np.linalg.solve(cmat @ cmat.T, cmat @ flat)
    flat = flat - cmat.T @ coeffs
    norm = np.linalg.norm(flat)
    if norm == 0.0:
        return np.zeros_like(s)
    return scale * (flat / norm).reshape(n, dim)


def _initial_on_C(cfg: RunConfig) -> McGeheeState:
    st = cfg.initial_state
    ms, pp = cfg.ms, cfg.pp
    if st is not None:
        if st.get("kind") != "mcgehee":
            raise ConfigError("collision-flow initial_state must have kind mcgehee")
        s = _as_state_array(st.get("s"), ms.n, "initial s")
        u = _as_state_array(st.get("u"), ms.n, "initial u")
        rho = float(st.get("rho", 0.0))
        if rho != 0.0:
            raise ConfigError(f"collision-flow needs rho = 0, got {rho!r}")
        try:
            return McGeheeState(rho=0.0, v=float(st.get("v", 0.0)), s=s, u=u)
        except ValueError as exc:
            raise ConfigError(f"invalid blow-up state: {exc}") from None

    start = cfg.opt("start")
    if not isinstance(start, dict):
        raise ConfigError("collision-flow needs initial_state or options.start")
    case = start.get("shape", "equilateral")
    if case == "equilateral":
        case = {"kind": "equilateral"}
    elif isinstance(case, dict) and "ordering" in case and "kind" not in case:
        case = {"kind": "collinear", "ordering": case["ordering"]}
    cc = _pure_b_cc(cfg, case)
    r = cc.config.positions
    if r.shape[1] == 1:
        r = np.column_stack([r[:, 0], np.zeros(ms.n)])
    s = r / np.sqrt(mass_inner(r, r, ms))
    u = _tangent_perturbation(
        s, float(start.get("perturbation_scale", 0.0)), int(start.get("seed", 0))
    )
    v_sign = int(start.get("v_sign", -1))
    if v_sign not in (-1, 1):
        raise ConfigError(f"v_sign must be +1 or -1, got {v_sign!r}")
    v2 = 2.0 * potential_V(Configuration(s), ms, pp) - float(
        np.sum(u * u / ms.masses[:, None])
    )
    if v2 < 0.0:
        raise ConfigError("perturbation_scale too large: no real v on the manifold")
    return McGeheeState(rho=0.0, v=v_sign * float(np.sqrt(v2)), s=s, u=u)


def _unit_shape(cfg: RunConfig) -> Configuration:
    """Shape on the unit inertia sphere selected by options.shape."""
    ms, pp = cfg.ms, cfg.pp
    case = cfg.opt("shape", "equilateral")
    if case == "equilateral":
        if ms.n != 3:
            raise ConfigError("equilateral shape needs exactly 3 masses")
        return equilateral_configuration(ms, 1.0)[0]
    if isinstance(case, dict) and "positions" in case:
        r = _as_state_array(case["positions"], ms.n, "shape positions")
        if r.shape[1] == 1:
            r = np.column_stack([r[:, 0], np.zeros(ms.n)])
        r = centered(r, ms)
        inertia = mass_inner(r, r, ms)
        if inertia <= 0.0:
            raise ConfigError("shape has zero size")
        return Configuration(r / np.sqrt(inertia))
    if isinstance(case, dict) and "ordering" in case:
        try:
            ordering = Ordering(tuple(int(k) for k in case["ordering"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid ordering: {exc}") from None
        q = CCQuery(ms=ms, pp=pp, inertia_I0=1.0, grad_tol=cfg.tol("grad_tol", 1e-12))
        return solve_collinear_ordering(ordering, q).config
    raise ConfigError(f"unrecognized shape spec {case!r}")


# ---------------------------------------------------------------------------
# equilibrium matching


def _rotation_aligned_distance(
    s: np.ndarray, target: np.ndarray, masses: np.ndarray
) -> float:
    """Mass-metric distance min over rotations of the target shape."""
    w = masses[:, None]
    dots = float(np.sum(w * s * target))
    cross = float(
        np.sum(masses * (target[:, 0] * s[:, 1] - target[:, 1] * s[:, 0]))
    )
    overlap = float(np.hypot(dots, cross))
    return float(np.sqrt(max(2.0 - 2.0 * overlap, 0.0)))


def _nearest_equilibrium(cfg: RunConfig, s: np.ndarray, v: float) -> dict:
    best = None
    for case in _default_cases(cfg):
        cc = _pure_b_cc(cfg, case)
        r = cc.config.positions
        if r.shape[1] == 1:
            r = np.column_stack([r[:, 0], np.zeros(cfg.ms.n)])
        target = r / np.sqrt(mass_inner(r, r, cfg.ms))
        v_star = float(np.sqrt(2.0 * potential_V(Configuration(target), cfg.ms, cfg.pp)))
        dist = _rotation_aligned_distance(s, target, cfg.ms.masses)
        for sign in (1, -1):
            score = float(np.hypot(dist, v - sign * v_star))
            entry = {
                "kind": cc.kind,
                "ordering": _ordering_payload(cc.ordering),
                "v_sign": sign,
                "v_value": sign * v_star,
                "shape_distance": dist,
                "v_distance": abs(v - sign * v_star),
            }
            if best is None or score < best[0]:
                best = (score, entry)
    return best[1]


# ---------------------------------------------------------------------------
# subcommands


def cmd_cc_collinear(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.ms.n > 6:
        raise ConfigError(f"cc-collinear supports at most 6 bodies, got {cfg.ms.n}")
    q = CCQuery(
        ms=cfg.ms,
        pp=cfg.pp,
        inertia_I0=cfg.inertia_I0,
        grad_tol=cfg.tol("grad_tol", 1e-12),
    )
    orderings = Ordering.all_canonical(cfg.ms.n)
    results = _pmap(lambda o: solve_collinear_ordering(o, q), orderings)
    expected = math.factorial(cfg.ms.n) // 2
    if len(results) != expected:
        raise QHError(f"found {len(results)} classes, expected {expected}")
    payload = {
        "command": "cc-collinear",
        "schema": SCHEMA,
        "masses": cfg.ms.masses,
        "potential": _potential_payload(cfg.pp),
        "inertia_I0": cfg.inertia_I0,
        "count": len(results),
        "max_residual": max(r.residual for r in results),
        "results": [_cc_payload(r) for r in results],
    }
    print(f"wrote {_write_json(out_dir / 'cc_collinear.json', payload)}")
    return 0


def cmd_cc_planar3(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.ms.n != 3:
        raise ConfigError(f"cc-planar3 needs exactly 3 masses, got {cfg.ms.n}")
    if cfg.pp.a != 1.0:
        raise ConfigError(f"cc-planar3 needs a = 1, got a = {cfg.pp.a!r}")
    if cfg.pp.beta <= 0.0 or cfg.pp.alpha <= 0.0:
        raise ConfigError("cc-planar3 needs alpha > 0 and beta > 0")
    q = CCQuery(
        ms=cfg.ms,
        pp=cfg.pp,
        inertia_I0=cfg.inertia_I0,
        grad_tol=cfg.tol("grad_tol", 1e-12),
    )
    plus, minus = equilateral_cc(q)
    # The side certificate: with unit coefficients the side solves the
    # scalar equation behind f_root, so recompute sigma in that gauge.
    unit_pp = PotentialParams(a=1.0, b=cfg.pp.b, alpha=1.0, beta=1.0)
    unit_sigma, _ = cc_residual(plus.config, cfg.ms, unit_pp)
    fr = f_root(unit_sigma, cfg.pp.b, cfg.ms.total_mass)
    payload = {
        "command": "cc-planar3",
        "schema": SCHEMA,
        "masses": cfg.ms.masses,
        "potential": _potential_payload(cfg.pp),
        "inertia_I0": cfg.inertia_I0,
        "side": equilateral_side(cfg.ms, cfg.inertia_I0),
        "side_certificate": {
            "root": fr.root,
            "f_at_root": fr.f_at_root,
            "sign_changes": fr.sign_changes,
            "grid_points": fr.grid_points,
            "unit_sigma": unit_sigma,
        },
        "results": [_cc_payload(plus), _cc_payload(minus)],
    }
    print(f"wrote {_write_json(out_dir / 'cc_planar3.json', payload)}")
    return 0


def cmd_simultaneous(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.pp.alpha <= 0.0 or cfg.pp.beta <= 0.0:
        raise ConfigError("simultaneous needs alpha > 0 and beta > 0")
    if cfg.pp.a == 0.0:
        raise ConfigError("simultaneous needs a > 0: a = 0 has no shape equation")
    if cfg.ms.n > 6:
        raise ConfigError(f"simultaneous supports at most 6 bodies, got {cfg.ms.n}")
    gap_tol = cfg.tol("gap_tol", 1e-10)
    grad_tol = cfg.tol("grad_tol", 1e-13)
    orderings = Ordering.all_canonical(cfg.ms.n)

    def one(o: Ordering) -> dict:
        gap = simultaneous_gap(cfg.ms, cfg.pp, o, cfg.inertia_I0, grad_tol)
        return {
            "ordering": _ordering_payload(o),
            "gap": gap,
            "simultaneous": bool(gap <= gap_tol),
        }

    records = _pmap(one, orderings)
    payload = {
        "command": "simultaneous",
        "schema": SCHEMA,
        "masses": cfg.ms.masses,
        "potential": _potential_payload(cfg.pp),
        "inertia_I0": cfg.inertia_I0,
        "gap_tol": gap_tol,
        "results": records,
    }

    grid = cfg.opt("mass_grid")
    if grid is not None:
        if cfg.ms.n != 3:
            raise ConfigError("mass_grid sweeps need exactly 3 masses")
        try:
            lo1, hi1 = (float(x) for x in grid["m1"])
            lo2, hi2 = (float(x) for x in grid["m2"])
            m3 = float(grid.get("m3", 1.0))
            points = int(grid.get("points", 11))
            perm = tuple(int(k) for k in grid.get("ordering", (1, 2, 3)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid mass_grid: {exc}") from None
        if points < 2 or min(lo1, lo2, m3) <= 0.0:
            raise ConfigError("mass_grid needs points >= 2 and positive masses")
        ordering = Ordering(perm)
        m1_vals = np.linspace(lo1, hi1, points)
        m2_vals = np.linspace(lo2, hi2, points)
        cells = [(m1, m2) for m1 in m1_vals for m2 in m2_vals]

        def cell(args) -> tuple:
            m1, m2 = args
            ms = MassSystem(np.array([m1, m2, m3]))
            gap = simultaneous_gap(ms, cfg.pp, ordering, cfg.inertia_I0, grad_tol)
            return m1, m2, m3, gap

        rows = _pmap(cell, cells)
        csv_path = _write_csv(
            out_dir / "simultaneous_grid.csv", ["m1", "m2", "m3", "gap"], rows
        )
        payload["mass_grid"] = {
            "points": points,
            "rows": len(rows),
            "ordering": list(perm),
            "csv": csv_path.name,
        }
        print(f"wrote {csv_path}")

    print(f"wrote {_write_json(out_dir / 'simultaneous.json', payload)}")
    return 0


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> int:
    t_start, state = _initial_cartesian(cfg)
    ms, pp = cfg.ms, cfg.pp
    n, dim = state.config.positions.shape
    h0 = hamiltonian(state, ms, pp)
    if cfg.energy_h is not None:
        slack = cfg.tol("energy_match_tol", 1e-8) * max(1.0, abs(cfg.energy_h))
        if abs(h0 - cfg.energy_h) > slack:
            raise ConfigError(
                f"energy_h = {cfg.energy_h!r} does not match the initial state "
                f"(H = {h0!r})"
            )
    span = cfg.opt("t_span")
    if span is None:
        span = [t_start, t_start + 10.0]
    try:
        t0, t1 = (float(x) for x in span)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid t_span: {exc}") from None
    if not t1 > t0:
        raise ConfigError(f"t_span must satisfy t1 > t0, got {span!r}")

    l0 = angular_momentum(state, ms)
    field_fn = cartesian_field(ms, pp, dim)

    def energy_res(t, y):
        return abs(hamiltonian(unpack_phase(y, n, dim), ms, pp) - h0)

    def angmom_res(t, y):
        return abs(angular_momentum(unpack_phase(y, n, dim), ms) - l0)

    tr = integrate(
        field_fn,
        pack_phase(state),
        (t0, t1),
        rel_tol=cfg.tol("rel_tol", 1e-10),
        abs_tol=cfg.tol("abs_tol", 1e-12),
        monitors={"energy": energy_res, "angular_momentum": angmom_res},
        max_step=float(cfg.opt("max_step", np.inf)),
    )
    header = ["t"] + _state_columns(n, dim) + ["energy_residual", "angmom_residual"]
    rows = [
        [tr.times[k], *tr.states[k], tr.conserved_residuals["energy"][k],
         tr.conserved_residuals["angular_momentum"][k]]
        for k in range(len(tr.times))
    ]
    csv_path = _write_csv(out_dir / "simulate.csv", header, rows)
    final = unpack_phase(tr.final_state, n, dim)
    payload = {
        "command": "simulate",
        "schema": SCHEMA,
        "masses": ms.masses,
        "potential": _potential_payload(pp),
        "t_span": [t0, t1],
        "steps": len(tr.times) - 1,
        "termination": tr.termination,
        "t_final": tr.times[-1],
        "energy_initial": h0,
        "energy_residual_max": float(np.max(tr.conserved_residuals["energy"])),
        "angmom_residual_max": float(
            np.max(tr.conserved_residuals["angular_momentum"])
        ),
        "final_positions": final.config.positions,
        "final_momenta": final.momenta,
        "csv": csv_path.name,
    }
    print(f"wrote {csv_path}")
    print(f"wrote {_write_json(out_dir / 'simulate.json', payload)}")
    return 0


def cmd_collision_flow(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.pp.a != 1.0 or cfg.pp.beta <= 0.0:
        raise ConfigError("collision-flow needs a = 1 with beta > 0")
    st0 = _initial_on_C(cfg)
    ms, pp = cfg.ms, cfg.pp
    n, dim = st0.n, st0.dim
    tr = integrate_on_C(
        st0,
        ms,
        pp,
        tau_max=float(cfg.opt("tau_max", 50.0)),
        rel_tol=cfg.tol("rel_tol", 1e-10),
        abs_tol=cfg.tol("abs_tol", 1e-12),
        equilibrium_tol=cfg.tol("equilibrium_tol", 1e-9),
        separation_floor=cfg.tol("separation_floor", 0.05),
    )
    sz = n * dim
    header = ["tau", "v", "manifold_residual", "min_separation"] + _mcgehee_columns(
        n, dim
    )
    rows = []
    for k in range(len(tr.times)):
        y = tr.states[k]
        rows.append(
            [
                tr.times[k],
                y[1],
                tr.conserved_residuals["manifold"][k],
                min_separation(y[2 : 2 + sz].reshape(n, dim)),
                *y[2:],
            ]
        )
    csv_path = _write_csv(out_dir / "collision_flow.csv", header, rows)

    v_series = np.asarray(tr.conserved_residuals["v"])
    # v is monotone except for roundoff: allow slack at integrator scale.
    slack = 1e-9 * max(1.0, float(np.abs(v_series).max()))
    diffs = np.diff(v_series)
    final = unpack_mcgehee(tr.final_state, n, dim)
    payload = {
        "command": "collision-flow",
        "schema": SCHEMA,
        "masses": ms.masses,
        "potential": _potential_payload(pp),
        "termination": tr.termination,
        "tau_final": tr.times[-1],
        "v_start": v_series[0],
        "v_end": v_series[-1],
        "v_decrease_total": v_series[0] - v_series[-1],
        "v_monotone_nonincreasing": bool(np.all(diffs <= slack)),
        "v_monotone_nondecreasing": bool(np.all(diffs >= -slack)),
        "manifold_residual_max": float(
            np.abs(tr.conserved_residuals["manifold"]).max()
        ),
        "nearest_equilibrium": _nearest_equilibrium(cfg, final.s, final.v),
        "csv": csv_path.name,
    }
    print(f"wrote {csv_path}")
    print(f"wrote {_write_json(out_dir / 'collision_flow.json', payload)}")
    return 0


def cmd_eigen(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.pp.a != 1.0 or cfg.pp.beta <= 0.0:
        raise ConfigError("eigen needs a = 1 with beta > 0")
    if cfg.pp.b <= 2.0:
        raise ConfigError(f"equilibrium spectra need b > 2, got b = {cfg.pp.b!r}")
    cases = cfg.opt("cases")
    if cases is None:
        cases = _default_cases(cfg)
    if not isinstance(cases, list) or not cases:
        raise ConfigError("options.cases must be a non-empty array")
    ccs = [_pure_b_cc(cfg, case) for case in cases]
    reports = find_equilibria(cfg.ms, cfg.pp, ccs, tol=cfg.tol("cc_tol", 1e-9))
    records = []
    for rep in reports:
        rec = {
            "kind": rep.kind,
            "ordering": _ordering_payload(rep.ordering),
            "ambient": rep.ambient,
            "v_sign": rep.v_sign,
            "v_value": rep.v_value,
            "cc_defect": rep.cc_defect,
            "shape": rep.s0.positions,
            "restricted_eigenvalues": rep.lam,
            "exponents": _complex_pairs(rep.mu),
            "spectrum": _complex_pairs(rep.spectrum),
            "index": rep.index,
            "zero_modes": rep.zero_modes,
            "dim_unstable": rep.dim_unstable,
            "dim_stable": rep.dim_stable,
            "dim_energy_surface": rep.dim_energy_surface,
        }
        if rep.ambient == "planar":
            try:
                rec["transversality_necessary"] = transversality_necessary(
                    rep.s0, cfg.ms, cfg.pp
                )
            except DegenerateError:
                rec["transversality_necessary"] = None
        records.append(rec)
    payload = {
        "command": "eigen",
        "schema": SCHEMA,
        "masses": cfg.ms.masses,
        "potential": _potential_payload(cfg.pp),
        "equilibria": records,
    }
    print(f"wrote {_write_json(out_dir / 'eigen.json', payload)}")
    return 0


def cmd_homothetic(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.energy_h is None:
        raise ConfigError("homothetic needs energy_h")
    s0 = _unit_shape(cfg)
    orbit = heteroclinic_orbit(
        s0,
        cfg.ms,
        cfg.pp,
        cfg.energy_h,
        rho_floor=cfg.tol("rho_floor", 1e-8),
        rel_tol=cfg.tol("rel_tol", 1e-11),
        abs_tol=cfg.tol("abs_tol", 1e-13),
    )
    k_series = orbit.trajectory.conserved_residuals["K"]
    rows = [
        [orbit.taus[k], orbit.rhos[k], orbit.vs[k], k_series[k]]
        for k in range(len(orbit.taus))
    ]
    csv_path = _write_csv(
        out_dir / "homothetic.csv", ["tau", "rho", "v", "k_defect"], rows
    )
    payload = {
        "command": "homothetic",
        "schema": SCHEMA,
        "masses": cfg.ms.masses,
        "potential": _potential_payload(cfg.pp),
        "energy_h": orbit.h,
        "shape": s0.positions,
        "K": orbit.K,
        "k_drift": orbit.k_drift,
        "rho_max_orbit": orbit.rho_max_orbit,
        "rho_max_bisect": orbit.rho_max_bisect,
        "rho_max_gap": abs(orbit.rho_max_orbit - orbit.rho_max_bisect),
        "v_start": orbit.vs[0],
        "v_end": orbit.vs[-1],
        "termination": orbit.termination,
        "csv": csv_path.name,
    }
    print(f"wrote {csv_path}")
    print(f"wrote {_write_json(out_dir / 'homothetic.json', payload)}")
    return 0


_COMMANDS = {
    "cc-collinear": cmd_cc_collinear,
    "cc-planar3": cmd_cc_planar3,
    "simultaneous": cmd_simultaneous,
    "simulate": cmd_simulate,
    "collision-flow": cmd_collision_flow,
    "eigen": cmd_eigen,
    "homothetic": cmd_homothetic,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qh",
        description="Quasihomogeneous n-body toolkit: central configurations, "
        "collision-manifold dynamics and homothetic orbits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run config (schema 1)")
        p.add_argument("--out", default=None, help="output directory (default: cwd)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config)
        out_dir = Path(args.out) if args.out else Path.cwd()
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ManevOnlyError as exc:
        # a != 1 (or beta = 0) is a config problem, not a numerical one
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QHError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
