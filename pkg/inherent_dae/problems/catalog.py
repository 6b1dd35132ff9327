"""
Built-in problem catalog.
This is the adapter layer - turns a ProblemSpec into a DAE, an initial value
and the measurements reported for one integration.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..core.diagnostics import SuiteInputs
from ..core.errors import ConfigurationError
from ..core.geom import propagate_flow
from ..core.integrate import integrate
from ..core.models import CharValues, IntegratorSpec, Method, ProblemSpec, SolverConfig, Symmetry, Version
from . import flows, pendulum, wensch

logger = logging.getLogger(__name__)

# (method, stages, version) rows of an experiment table
PresetRow = Tuple[Method, int, Version]


@dataclass
class Measurement:
    """What one integration of a catalog problem reports"""
    steps: int
    max_error: Optional[float] = None
    geometric_error: Optional[float] = None
    constraint_residual: Optional[float] = None


@dataclass
class ProblemEntry:
    """Catalog entry with defaults of the corresponding experiment"""
    name: str
    description: str
    chars: CharValues
    symmetry: Symmetry
    params: Dict[str, float]
    t_span: Tuple[float, float]
    preset: List[PresetRow]
    tol: Optional[float] = None
    n_steps: Optional[int] = None
    nonlinear: bool = False
    runner: Optional[Callable[[Dict[str, float], IntegratorSpec, Tuple[float, float], SolverConfig], Measurement]] = field(
        default=None, repr=False
    )

    def summary(self) -> str:
        c = self.chars
        params = ", ".join(f"{k}={v:g}" for k, v in self.params.items()) or "-"
        return (
            f"{self.name:<9} mu={c.mu} a={c.a} d={c.d}  {self.symmetry.value:<13} "
            f"params: {params:<20} {self.description}"
        )


def _run_wensch(params, spec, t_span, config) -> Measurement:
    dae = wensch.wensch_dae(params["delta"], params["eta"])
    trajectory = integrate(spec, dae, t_span, wensch.initial_value(), chars=wensch.CHARS, config=config)
    error = np.max(np.abs(trajectory.states - wensch.exact_solution(trajectory.times)))
    return Measurement(steps=trajectory.steps_taken, max_error=float(error))


def _run_pendulum(params, spec, t_span, config) -> Measurement:
    if t_span[0] != 0.0:
        raise ConfigurationError("The pendulum reference starts at t=0")
    trajectory = integrate(spec, pendulum.pendulum_dae(), t_span, pendulum.initial_value(), config=config)
    return Measurement(
        steps=trajectory.steps_taken,
        max_error=pendulum.solution_error(trajectory.times, trajectory.states),
        constraint_residual=pendulum.constraint_residual(trajectory.states),
    )


def _flow_runner(name: str):
    definition = flows.DEFINITIONS[name]

    def run(params, spec, t_span, config) -> Measurement:
        omega = params["omega"]
        dae = flows.flow_dae(name, omega)
        report = propagate_flow(
            dae, spec, t_span, definition.X, to_hat=flows.to_hat_map(definition.n, omega),
            chars=definition.chars, config=config,
        )
        exact = flows.exact_flow(name, report.times - report.times[0])
        return Measurement(
            steps=report.steps_taken,
            max_error=float(np.max(np.abs(report.Phi - exact))),
            geometric_error=report.max_error,
        )

    return run


def _flow_preset(structured: Version) -> List[PresetRow]:
    return [
        (Method.GAUSS_LOBATTO, 2, Version.DIRECT),
        (Method.DORMAND_PRINCE, 7, Version.INHERENT),
        (Method.GAUSS, 2, Version.ROTATED),
        (Method.GAUSS, 2, structured),
    ]


def _flow_entry(name: str, description: str, structured: Version) -> ProblemEntry:
    definition = flows.DEFINITIONS[name]
    return ProblemEntry(
        name=name,
        description=description,
        chars=definition.chars,
        symmetry=definition.symmetry,
        params=dict(flows.DEFAULTS),
        t_span=(0.0, 200.0 * np.pi),
        preset=_flow_preset(structured),
        n_steps=1000,
        runner=_flow_runner(name),
    )


CATALOG: Dict[str, ProblemEntry] = {
    "wensch": ProblemEntry(
        name="wensch",
        description="stiff linear DAE, exact solution exp(-t)",
        chars=wensch.CHARS,
        symmetry=Symmetry.NONE,
        params=dict(wensch.DEFAULTS),
        t_span=(0.0, 1.0),
        preset=[
            (Method.IMPLICIT_EULER, 1, Version.DIRECT),
            (Method.IMPLICIT_EULER, 1, Version.INHERENT),
            (Method.IMPLICIT_EULER, 1, Version.SPIN_STABILIZED),
            (Method.IMPLICIT_EULER, 1, Version.ROTATED),
        ],
        tol=1e-5,
        runner=_run_wensch,
    ),
    "pendulum": ProblemEntry(
        name="pendulum",
        description="nonlinear pendulum in Cartesian coordinates",
        chars=pendulum.CHARS,
        symmetry=Symmetry.SELF_ADJOINT,
        params={},
        t_span=(0.0, 10.0),
        preset=[
            (Method.GAUSS_LOBATTO, 2, Version.DIRECT),
            (Method.RADAU, 4, Version.DIRECT),
            (Method.DORMAND_PRINCE, 7, Version.INHERENT),
            (Method.DORMAND_PRINCE, 13, Version.INHERENT),
            (Method.GAUSS, 2, Version.INHERENT),
            (Method.RADAU, 4, Version.INHERENT),
        ],
        tol=1e-5,
        nonlinear=True,
        runner=_run_pendulum,
    ),
    "self3": _flow_entry("self3", "self-adjoint DAE with a symplectic flow", Version.SELF_ADJOINT),
    "skew4": _flow_entry("skew4", "skew-adjoint DAE with an orthogonal flow", Version.SKEW_ADJOINT),
    "indef5": _flow_entry("indef5", "skew-adjoint DAE with a flow in O(2,1)", Version.SKEW_ADJOINT),
}


def list_problems() -> List[ProblemEntry]:
    """Catalog entries in a stable order."""
    return list(CATALOG.values())


def get_problem(name: str) -> ProblemEntry:
    """
    Look up a catalog entry.

    Raises:
        ConfigurationError: For an unknown name
    """
    if name not in CATALOG:
        raise ConfigurationError(f"Unknown problem '{name}' (choose from {', '.join(CATALOG)})")
    return CATALOG[name]


def resolve_params(spec: ProblemSpec) -> Dict[str, float]:
    """
    Defaults of the problem overridden by the spec's parameters.

    Raises:
        ConfigurationError: For parameters the problem does not declare
    """
    entry = get_problem(spec.name)
    unknown = sorted(set(spec.params) - set(entry.params))
    if unknown:
        allowed = ", ".join(entry.params) or "none"
        raise ConfigurationError(f"Unknown parameter(s) {', '.join(unknown)} for '{spec.name}' (allowed: {allowed})")
    params = dict(entry.params)
    params.update({k: float(v) for k, v in spec.params.items()})
    return params


def measure(
    spec: ProblemSpec,
    integrator: IntegratorSpec,
    t_span: Optional[Tuple[float, float]] = None,
    config: Optional[SolverConfig] = None,
) -> Measurement:
    """
    Integrate a catalog problem and measure the errors it reports.

    Raises:
        ConfigurationError: For bad parameters or combinations
        InherentDaeError: Any numerical failure of the integration
    """
    entry = get_problem(spec.name)
    params = resolve_params(spec)
    integrator.validate()
    if entry.nonlinear and integrator.version not in (Version.INHERENT, Version.PRESCRIBED, Version.DIRECT):
        raise ConfigurationError(
            f"{integrator.version.value} needs a linear DAE; '{entry.name}' accepts INHERENT, PRESCRIBED or DIRECT"
        )
    span = entry.t_span if t_span is None else t_span
    logger.info("Measuring '%s' with %s (%s)", entry.name, integrator.method.value, integrator.version.value)
    return entry.runner(params, integrator, span, config or SolverConfig())


def suite_inputs() -> SuiteInputs:
    """Catalog problems the property suite runs on."""
    structured = [
        (flows.flow_dae(name), flows.DEFINITIONS[name].chars, version)
        for name, version in (
            ("self3", Version.SELF_ADJOINT),
            ("skew4", Version.SKEW_ADJOINT),
            ("indef5", Version.SKEW_ADJOINT),
        )
    ]
    return SuiteInputs(
        nonlinear=pendulum.pendulum_dae(),
        nonlinear_x0=pendulum.initial_value(),
        linear=wensch.wensch_dae(delta=-3.0, eta=0.5),
        linear_chars=wensch.CHARS,
        structured=structured,
    )
