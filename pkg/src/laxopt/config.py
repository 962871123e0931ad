"""Problem ingestion from INI-style config files.

A problem file is key/value text with nested dotted sections. The smallest
useful file selects a builtin:

    [problem]
    preset = gear

    [grid]
    steps = 100

A full definition spells out dimensions, the state matrix, named builtin or
polynomial dynamics/cost pieces, the control set, the constraint box, the
grid, and x0. Vectors are whitespace-separated, matrices use ';' between
rows, and 'inf'/'-inf' are accepted where a bound can be open. Polynomial
tables list monomials as rows 'coef t_exp a1_exp .. am_exp'.
"""

from __future__ import annotations

import configparser
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .model import (Box, BoxConstraint, CostSpec, FiniteSet,
                    HalfspaceConstraint, Problem, ProductSet, QuadraticCost,
                    StructuredDynamics, TimeGrid, _gear_control_term,
                    gear_preset)

__all__ = [
    "ConfigError",
    "PRESETS",
    "preset_problem",
    "load_problem",
    "load_run_options",
]


class ConfigError(ValueError):
    """A config file is missing, malformed, or inconsistent."""


PRESETS: Dict[str, Callable[[int], Problem]] = {
    "gear": gear_preset,
}

CONTROL_TERM_BUILTINS: Dict[str, Callable] = {
    "gear": _gear_control_term,
}

STAGE_CONTROL_BUILTINS: Dict[str, Callable[[float, np.ndarray], float]] = {
    "gear": lambda t, a: float(a[1]),
}


def preset_problem(name: str, steps: Optional[int] = None) -> Problem:
    """Instantiate a builtin preset, optionally overriding the step count."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
    return factory(steps) if steps is not None else factory()


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.replace(",", " ").split()])
    except ValueError as exc:
        raise ConfigError(f"bad vector {text!r}: {exc}") from None


def _matrix(text: str) -> np.ndarray:
    rows = [r for r in (row.strip() for row in text.split(";")) if r]
    data = [_vector(r) for r in rows]
    widths = {v.size for v in data}
    if len(widths) > 1:
        raise ConfigError(f"ragged matrix rows in {text!r}")
    return np.array(data)


def _poly_terms(text: str, nargs: int) -> np.ndarray:
    """Monomial rows 'coef t_exp a1_exp .. am_exp'."""
    table = _matrix(text)
    if table.shape[1] != nargs + 2:
        raise ConfigError(
            f"polynomial rows need {nargs + 2} columns "
            f"(coef, t exponent, {nargs} control exponents); got {table.shape[1]}")
    return table


def _poly_eval(table: np.ndarray, t: float, a: np.ndarray) -> float:
    args = np.concatenate([[t], np.asarray(a, dtype=float)])
    return float(np.sum(table[:, 0] * np.prod(args ** table[:, 1:], axis=1)))


def _quadratic(section, dim: int) -> QuadraticCost:
    const = float(section.get("const", "0"))
    lin = _vector(section["lin"]) if "lin" in section else None
    quad = _vector(section["quad"]) if "quad" in section else None
    for name, v in (("lin", lin), ("quad", quad)):
        if v is not None and v.size != dim:
            raise ConfigError(f"{name} has {v.size} entries, expected {dim}")
    return QuadraticCost(dim, const=const, lin=lin, quad=quad)


def _control_set(section):
    if "factors" in section:
        factors = []
        for part in section["factors"].split("|"):
            part = part.strip()
            if part.startswith("finite:"):
                vals = _vector(part[len("finite:"):])
                factors.append(FiniteSet([[v] for v in vals]))
            elif part.startswith("box:"):
                b = _vector(part[len("box:"):])
                if b.size != 2:
                    raise ConfigError(f"1-d box factor needs 'lo hi', got {part!r}")
                factors.append(Box([b[0]], [b[1]]))
            else:
                raise ConfigError(f"unknown control factor {part!r}")
        return ProductSet(factors)
    kind = section.get("kind", "box")
    if kind == "box":
        return Box(_vector(section["lo"]), _vector(section["hi"]))
    if kind == "finite":
        return FiniteSet(_matrix(section["points"]))
    raise ConfigError(f"unknown control set kind {kind!r}")


def _constraint(parser, n: int):
    if not parser.has_section("constraint"):
        return None
    section = parser["constraint"]
    kind = section.get("kind", "box")
    if kind == "none":
        return None
    if kind == "box":
        lo = _vector(section["lo"]) if "lo" in section else np.full(n, -np.inf)
        hi = _vector(section["hi"]) if "hi" in section else np.full(n, np.inf)
        return BoxConstraint(lo, hi)
    if kind == "halfspace":
        return HalfspaceConstraint(_matrix(section["C"]), _vector(section["d"]))
    raise ConfigError(f"unknown constraint kind {kind!r}")


def _grid(parser, default_t0=0.0, default_t_end=1.0) -> TimeGrid:
    section = parser["grid"] if parser.has_section("grid") else {}
    t0 = float(section.get("t0", default_t0))
    t_end = float(section.get("t_end", default_t_end))
    if t_end <= t0:
        raise ConfigError("grid needs t_end > t0")
    if "steps" in section:
        return TimeGrid.uniform(t0, t_end, int(section["steps"]))
    if "dt" in section:
        return TimeGrid.uniform(t0, t_end, steps_for(t0, t_end, float(section["dt"])))
    return TimeGrid.uniform(t0, t_end, 100)


def steps_for(t0: float, t_end: float, dt: float) -> int:
    """Step count for a uniform dt; dt must divide the horizon."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    ratio = (t_end - t0) / dt
    steps = int(round(ratio))
    if steps < 1 or abs(ratio - steps) > 1e-9 * max(1.0, ratio):
        raise ConfigError(
            f"dt={dt} does not divide the horizon [{t0}, {t_end}] evenly")
    return steps


def _dynamics(parser, n: int, m: int) -> StructuredDynamics:
    if not parser.has_section("dynamics"):
        raise ConfigError("missing [dynamics] section")
    section = parser["dynamics"]
    A = _matrix(section["A"]) if "A" in section else np.zeros((n, n))
    if A.shape != (n, n):
        raise ConfigError(f"A has shape {A.shape}, expected ({n}, {n})")
    name = section.get("control_term")
    if name is not None:
        try:
            term = CONTROL_TERM_BUILTINS[name]
        except KeyError:
            raise ConfigError(
                f"unknown control term builtin {name!r}; "
                f"available: {sorted(CONTROL_TERM_BUILTINS)}") from None
        return StructuredDynamics(A=A, control_term=term)
    if not parser.has_section("dynamics.control_term"):
        raise ConfigError("dynamics needs control_term = <builtin> or a "
                          "[dynamics.control_term] polynomial table")
    tables = []
    poly = parser["dynamics.control_term"]
    for i in range(n):
        key = f"h{i+1}"
        tables.append(_poly_terms(poly[key], m) if key in poly else None)

    def term(t: float, a: np.ndarray) -> np.ndarray:
        return np.array([0.0 if tb is None else _poly_eval(tb, t, a)
                         for tb in tables])

    return StructuredDynamics(A=A, control_term=term)


def _stage_control(parser, m: int) -> Callable[[float, np.ndarray], float]:
    if not parser.has_section("cost.stage_control"):
        return lambda t, a: 0.0
    section = parser["cost.stage_control"]
    name = section.get("builtin")
    if name is not None:
        try:
            return STAGE_CONTROL_BUILTINS[name]
        except KeyError:
            raise ConfigError(
                f"unknown stage control builtin {name!r}; "
                f"available: {sorted(STAGE_CONTROL_BUILTINS)}") from None
    if "terms" in section:
        table = _poly_terms(section["terms"], m)
        return lambda t, a: _poly_eval(table, t, a)
    form = _quadratic(section, m)
    return lambda t, a: form(np.asarray(a, dtype=float))


def load_problem(path: str) -> Problem:
    """Build a Problem from a config file.

    A `preset` key in [problem] loads the builtin (grid keys still apply);
    otherwise the file must define dimensions, dynamics, controls, and
    costs.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    if not parser.has_section("problem"):
        raise ConfigError("missing [problem] section")
    prob = parser["problem"]

    preset = prob.get("preset")
    if preset is not None:
        base = preset_problem(preset)
        grid = _grid(parser, base.grid.t0, base.grid.t_end)
        return Problem(dynamics=base.dynamics, cost=base.cost,
                       controls=base.controls, grid=grid, x0=base.x0,
                       constraint=base.constraint, name=base.name)

    try:
        n = int(prob["n"])
    except KeyError:
        raise ConfigError("[problem] needs n = <state dimension> "
                          "(or preset = <name>)") from None
    x0 = _vector(prob["x0"]) if "x0" in prob else np.zeros(n)
    if x0.size != n:
        raise ConfigError(f"x0 has {x0.size} entries, expected {n}")
    if not parser.has_section("controls"):
        raise ConfigError("missing [controls] section")
    controls = _control_set(parser["controls"])
    m = controls.dim
    dynamics = _dynamics(parser, n, m)

    s_form = (_quadratic(parser["cost.stage_state"], n)
              if parser.has_section("cost.stage_state") else QuadraticCost(n))
    g_form = (_quadratic(parser["cost.terminal"], n)
              if parser.has_section("cost.terminal") else QuadraticCost(n))
    r_fun = _stage_control(parser, m)
    cost = CostSpec(
        stage_state=lambda t, x: s_form(np.asarray(x, dtype=float)),
        stage_control=r_fun,
        terminal=lambda x: g_form(np.asarray(x, dtype=float)),
        stage_state_form=s_form,
        terminal_form=g_form,
    )
    return Problem(dynamics=dynamics, cost=cost, controls=controls,
                   grid=_grid(parser), x0=x0,
                   constraint=_constraint(parser, n),
                   name=prob.get("name", "config"))


def load_run_options(path: str) -> Dict[str, str]:
    """Raw key/value pairs of the optional [run] section of a config file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path!r}")
    if not parser.has_section("run"):
        return {}
    return dict(parser["run"])
