"""JSON configuration documents: parsing, validation, problem construction.

A config document has five sections::

    {
      "system":    {"A": [[...]], "B": [[...]]},
      "penalties": {"Q": [[...]], "R": [[...]]},
      "noise":     {"kind": "gaussian", "mean": [...], "cov": [[...]],
                    "channel": "state"},          # or "input"
      "risk":      {"rho": 8.0},                  # or {"rho_bar": 15.0}
      "solver":    {"schedule": {"kind": "constant", "zeta": 0.1},
                    "max_iter": 500, "stop_tol": 1e-6, "lambda1": 0.0},
      "sim":       {"T": 100000, "seeds": [0], "burn_in": 1000, "x0": [...]}
    }

Noise kinds: ``gaussian`` (mean, cov), ``mixture`` (components, each with
weight/mean/cov), ``empirical`` (samples).  ``channel: "input"`` declares a
disturbance entering the dynamics as B(u + w); it is folded into the state
equation with effective disturbance Bw before the problem is built.

Validation is collected, not fail-fast: every violated invariant is
reported with the config path of the offending field.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import noise as noise_mod
from .dual import StepSchedule
from .errors import ConfigError
from .problem import ProblemSpec

_SCHEDULE_DEFAULT = {"kind": "diminishing", "c": 0.1}
_SOLVER_DEFAULTS = {"max_iter": 500, "stop_tol": 1e-6, "lambda1": 0.0}
_SIM_DEFAULTS = {"T": 100_000, "seeds": [0], "burn_in": None, "x0": None}


@dataclass
class ConfigDocument:
    """Validated configuration; matrices are numpy arrays, noise is a model."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    noise: noise_mod.NoiseModel
    noise_channel: str
    rho: float | None
    rho_bar: float | None
    solver: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)

    def effective_noise(self):
        """Noise model in state-equation form (input-channel folded through B)."""
        if self.noise_channel == "input":
            return noise_mod.transform(self.noise, self.B)
        return self.noise

    def build_problem(self, m4_draws=noise_mod.MIXTURE_M4_DRAWS,
                      m4_seed=noise_mod.MIXTURE_M4_SEED, certify=True):
        return ProblemSpec.create(
            self.A, self.B, self.Q, self.R, self.effective_noise(),
            rho=self.rho, rho_bar=self.rho_bar,
            m4_draws=m4_draws, m4_seed=m4_seed, certify=certify,
        )

    def step_schedule(self):
        """Schedule from the solver section; None means certified bounds
        were omitted and must be estimated by warm-up."""
        sched = self.solver["schedule"]
        kind = sched["kind"]
        if kind == "constant":
            return StepSchedule.constant(sched["zeta"])
        if kind == "diminishing":
            return StepSchedule.diminishing(sched["c"])
        return StepSchedule.certified(sched["b"], sched["e"]) if "b" in sched else None

    def x0(self):
        x0 = self.sim.get("x0")
        return None if x0 is None else np.asarray(x0, dtype=float)


def _matrix(raw, path, problems, square=False):
    try:
        M = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        problems.append(f"{path}: not a numeric matrix")
        return None
    if M.ndim != 2 or 0 in M.shape:
        problems.append(f"{path}: must be a non-empty 2-d array, got shape {M.shape}")
        return None
    if not np.isfinite(M).all():
        problems.append(f"{path}: entries must be finite")
        return None
    if square and M.shape[0] != M.shape[1]:
        problems.append(f"{path}: must be square, got {M.shape[0]}x{M.shape[1]}")
        return None
    return M


def _vector(raw, path, problems):
    try:
        v = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        problems.append(f"{path}: not a numeric vector")
        return None
    if v.ndim != 1 or v.size == 0:
        problems.append(f"{path}: must be a non-empty 1-d array")
        return None
    if not np.isfinite(v).all():
        problems.append(f"{path}: entries must be finite")
        return None
    return v


def _parse_noise(raw, problems):
    if not isinstance(raw, dict):
        problems.append("noise: must be an object")
        return None, "state"
    channel = raw.get("channel", "state")
    if channel not in ("state", "input"):
        problems.append(f"noise.channel: must be 'state' or 'input', got {channel!r}")
        channel = "state"
    kind = raw.get("kind")
    try:
        if kind == "gaussian":
            mean = _vector(raw.get("mean"), "noise.mean", problems)
            cov = _matrix(raw.get("cov"), "noise.cov", problems, square=True)
            if mean is None or cov is None:
                return None, channel
            return noise_mod.Gaussian(mean=mean, cov=cov), channel
        if kind == "mixture":
            comps = raw.get("components")
            if not isinstance(comps, list) or not comps:
                problems.append("noise.components: must be a non-empty list")
                return None, channel
            weights, means, covs = [], [], []
            for i, comp in enumerate(comps):
                if not isinstance(comp, dict):
                    problems.append(f"noise.components[{i}]: must be an object")
                    return None, channel
                w = comp.get("weight")
                mean = _vector(comp.get("mean"), f"noise.components[{i}].mean", problems)
                cov = _matrix(comp.get("cov"), f"noise.components[{i}].cov", problems,
                              square=True)
                if w is None or not isinstance(w, (int, float)):
                    problems.append(f"noise.components[{i}].weight: must be a number")
                    return None, channel
                if mean is None or cov is None:
                    return None, channel
                weights.append(float(w))
                means.append(mean)
                covs.append(cov)
            return noise_mod.GaussianMixture(weights=weights, means=means, covs=covs), channel
        if kind == "empirical":
            samples = _matrix(raw.get("samples"), "noise.samples", problems)
            if samples is None:
                return None, channel
            return noise_mod.Empirical(samples=samples), channel
        problems.append(f"noise.kind: must be gaussian, mixture or empirical, got {kind!r}")
    except ValueError as exc:
        problems.append(f"noise: {exc}")
    return None, channel


def _parse_schedule(raw, problems):
    if not isinstance(raw, dict):
        problems.append("solver.schedule: must be an object")
        return dict(_SCHEDULE_DEFAULT)
    kind = raw.get("kind")
    params = {
        "constant": ("zeta",),
        "diminishing": ("c",),
        "certified": ("b", "e"),
    }
    if kind not in params:
        problems.append(
            f"solver.schedule.kind: must be constant, diminishing or certified, got {kind!r}"
        )
        return dict(_SCHEDULE_DEFAULT)
    out = {"kind": kind}
    for name in params[kind]:
        value = raw.get(name)
        # certified bounds may be omitted: they are then estimated by warm-up
        if kind == "certified" and value is None:
            continue
        if not isinstance(value, (int, float)) or not value > 0.0:
            problems.append(f"solver.schedule.{name}: must be a positive number")
        else:
            out[name] = float(value)
    return out


def parse_config(text):
    """Parse and validate a JSON config document.

    Raises ConfigError carrying every violated invariant (or the JSON
    parse error with its line and column).
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level: must be a JSON object")

    problems = []
    for section in ("system", "penalties", "noise", "risk"):
        if section not in raw:
            problems.append(f"{section}: required section missing")
        elif not isinstance(raw[section], dict):
            problems.append(f"{section}: must be an object")
    if problems:
        raise ConfigError(problems)

    A = _matrix(raw["system"].get("A"), "system.A", problems, square=True)
    B = _matrix(raw["system"].get("B"), "system.B", problems)
    Q = _matrix(raw["penalties"].get("Q"), "penalties.Q", problems, square=True)
    R = _matrix(raw["penalties"].get("R"), "penalties.R", problems, square=True)
    noise_model, channel = _parse_noise(raw["noise"], problems)

    n = A.shape[0] if A is not None else None
    m = B.shape[1] if B is not None else None
    if A is not None and B is not None and B.shape[0] != n:
        problems.append(f"system.B: must have {n} rows to match system.A, got {B.shape[0]}")
    if Q is not None and n is not None and Q.shape != (n, n):
        problems.append(f"penalties.Q: must be {n}x{n}, got {Q.shape[0]}x{Q.shape[1]}")
    if R is not None and m is not None and R.shape != (m, m):
        problems.append(f"penalties.R: must be {m}x{m}, got {R.shape[0]}x{R.shape[1]}")
    if noise_model is not None and n is not None and m is not None:
        want = m if channel == "input" else n
        if noise_model.dim != want:
            problems.append(
                f"noise: dimension {noise_model.dim} does not match the "
                f"{'input' if channel == 'input' else 'state'} dimension {want}"
            )

    risk = raw["risk"]
    rho = risk.get("rho")
    rho_bar = risk.get("rho_bar")
    if (rho is None) == (rho_bar is None):
        problems.append("risk: exactly one of rho and rho_bar must be present")
    if rho is not None and (not isinstance(rho, (int, float)) or not rho > 0.0):
        problems.append("risk.rho: must be a positive number")
    if rho_bar is not None and not isinstance(rho_bar, (int, float)):
        problems.append("risk.rho_bar: must be a number")

    solver = dict(_SOLVER_DEFAULTS)
    solver_raw = raw.get("solver", {})
    if not isinstance(solver_raw, dict):
        problems.append("solver: must be an object")
        solver_raw = {}
    solver["schedule"] = _parse_schedule(
        solver_raw.get("schedule", dict(_SCHEDULE_DEFAULT)), problems
    )
    for key, check, desc in (
        ("max_iter", lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
        ("stop_tol", lambda v: isinstance(v, (int, float)) and v >= 0.0, "a number >= 0"),
        ("lambda1", lambda v: isinstance(v, (int, float)) and v >= 0.0, "a number >= 0"),
    ):
        if key in solver_raw:
            value = solver_raw[key]
            if not check(value):
                problems.append(f"solver.{key}: must be {desc}")
            else:
                solver[key] = value

    sim = dict(_SIM_DEFAULTS)
    sim_raw = raw.get("sim", {})
    if not isinstance(sim_raw, dict):
        problems.append("sim: must be an object")
        sim_raw = {}
    if "T" in sim_raw:
        if not isinstance(sim_raw["T"], int) or sim_raw["T"] < 1:
            problems.append("sim.T: must be an integer >= 1")
        else:
            sim["T"] = sim_raw["T"]
    if "seeds" in sim_raw:
        seeds = sim_raw["seeds"]
        if (not isinstance(seeds, list) or not seeds
                or not all(isinstance(s, int) for s in seeds)):
            problems.append("sim.seeds: must be a non-empty list of integers")
        else:
            sim["seeds"] = seeds
    if "burn_in" in sim_raw:
        burn = sim_raw["burn_in"]
        if not isinstance(burn, int) or burn < 0 or burn >= sim["T"]:
            problems.append("sim.burn_in: must be an integer in [0, T)")
        else:
            sim["burn_in"] = burn
    if "x0" in sim_raw and sim_raw["x0"] is not None:
        x0 = _vector(sim_raw["x0"], "sim.x0", problems)
        if x0 is not None and n is not None and x0.size != n:
            problems.append(f"sim.x0: must have length {n}, got {x0.size}")
        else:
            sim["x0"] = None if x0 is None else x0.tolist()

    if problems:
        raise ConfigError(problems)
    return ConfigDocument(
        A=A, B=B, Q=Q, R=R, noise=noise_model, noise_channel=channel,
        rho=None if rho is None else float(rho),
        rho_bar=None if rho_bar is None else float(rho_bar),
        solver=solver, sim=sim,
    )


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
