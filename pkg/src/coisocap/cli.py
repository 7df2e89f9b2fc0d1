"""Command line front end: flow, capacity, chord, nonsqueeze.

One JSON config per run; outputs are bit-stable (sorted keys, 17
significant digits, '\\n' line endings, no timestamps) and every file
embeds the tool version, the sha256 of the config bytes, and the seed.

Exit codes: 0 success, 2 config/parse failure, 3 integrator failure,
4 admissibility certification failure, 5 no convergence of the chord
search (including unverifiable linking bounds), 6 candidate validation
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .chord import (ActionFunctional, GalerkinSpace, LinkingConfig,
                    NoConvergence, ValidationFailed, minimax_estimate)
from .dynamics import (StepFailure, first_return_radial, integrate,
                       trajectory_to_csv)
from .capacity import area_A, lower_bound_capacity, nonsqueeze_check
from .geometry import CoisoSpace
from .hamiltonian import (HALF_PI, RadialProfile, canonical_lower_profile,
                          default_extension_eps, extend_hamiltonian,
                          simple_hamiltonian, steep_profile)
from .spectral import path_to_json

VERSION = "0.1.0"


class CliError(Exception):
    """Configuration problem; the message names the offending field."""


# ---------------------------------------------------------------------------
# plumbing


def _load_config(path: str) -> tuple[dict, str]:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as e:
        raise CliError(f"config file {path!r} unreadable: {e}") from e
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as e:
        raise CliError(f"config file {path!r} is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise CliError(f"config file {path!r} must hold a JSON object")
    return cfg, hashlib.sha256(raw).hexdigest()


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise CliError(f"missing required config field {key!r}")
    return cfg[key]


def _space_from(cfg: dict) -> CoisoSpace:
    sp = _need(cfg, "space")
    try:
        return CoisoSpace(n=int(_need(sp, "n")), k=int(_need(sp, "k")))
    except (TypeError, ValueError) as e:
        raise CliError(f"bad space field: {e}") from e


def _profile_from(spec: dict) -> RadialProfile:
    kind = _need(spec, "kind")
    try:
        if kind == "canonical":
            return canonical_lower_profile(float(_need(spec, "abs_a")),
                                           eps=float(spec.get("eps", 1e-3)),
                                           delta=float(spec.get("delta", 1e-3)))
        if kind == "steep":
            kw = {}
            if "eps" in spec:
                kw["eps"] = float(spec["eps"])
            if "ramp_frac" in spec:
                kw["ramp_frac"] = float(spec["ramp_frac"])
            return steep_profile(float(_need(spec, "m_target")), **kw)
        if kind == "linear":
            # domain margin past 1 keeps unit-radius orbits away from the
            # support cutoff, where the slope would truncate discontinuously
            c = float(_need(spec, "slope"))
            return RadialProfile(knots=np.array([0.0, 2.0]),
                                 values=np.array([0.0, 2.0 * c]),
                                 derivs=np.array([c, c]), mode="lower_bound",
                                 abs_a=float(spec.get("abs_a", 0.0)))
        if kind == "file":
            return RadialProfile.from_json(Path(_need(spec, "path")).read_text())
    except CliError:
        raise
    except Exception as e:
        raise CliError(f"profile field invalid: {e}") from e
    raise CliError(f"unknown profile kind {kind!r}")


def _envelope(sha: str, seed, results: dict) -> dict:
    return {"tool": "coisocap", "version": VERSION, "config_sha256": sha,
            "seed": seed, "results": results}


def _write_json(out: Path, name: str, payload: dict):
    out.joinpath(name).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_csv(out: Path, name: str, header: list, rows: list):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            v if isinstance(v, str) else f"{v:.17g}" for v in row))
    out.joinpath(name).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_flow(cfg: dict, sha: str, out: Path) -> int:
    space = _space_from(cfg)
    profile = _profile_from(_need(cfg, "profile"))
    abs_a = float(cfg.get("abs_a", profile.abs_a))
    ham = simple_hamiltonian(space, profile, abs_a=abs_a)
    x0 = np.asarray(_need(cfg, "x0"), dtype=float)
    if x0.shape != (space.dim_ambient,):
        raise CliError(f"x0 must have length {space.dim_ambient}")
    t_max = float(_need(cfg, "t_max"))
    tol = float(cfg.get("tol", 1e-10))
    seed = cfg.get("seed", 0)

    if t_max == 0.0:
        _write_csv(out, cfg.get("csv", "flow.csv"),
                   ["t"] + [f"x{i}" for i in range(1, space.n + 1)]
                   + [f"y{i}" for i in range(1, space.n + 1)]
                   + ["H", "q_pi", "r2"], [])
        _write_json(out, "flow.json", _envelope(sha, seed, {
            "n_samples": 0, "t_max": 0.0, "return_time": None,
            "return_kind": "empty"}))
        print("flow: empty trajectory (t_max = 0)")
        return 0

    traj = integrate(ham, x0, t_max, tol=tol)
    csv_text = trajectory_to_csv(traj, ham)
    out.joinpath(cfg.get("csv", "flow.csv")).write_text(csv_text)
    ev = first_return_radial(ham, x0, t_max=t_max)
    results = {
        "n_samples": int(traj.times.size),
        "t_max": t_max,
        "energy_drift": traj.energy_drift,
        "return_time": ev.T if ev.returned else None,
        "return_kind": ev.kind,
        "return_residual": ev.residual if ev.returned else None,
    }
    _write_json(out, "flow.json", _envelope(sha, seed, results))
    if ev.returned:
        print(f"flow: first leafwise return at T = {ev.T:.12g} "
              f"(residual {ev.residual:.3e})")
    else:
        print(f"flow: no leafwise return within t_max = {t_max} ({ev.kind})")
    return 0


def cmd_capacity(cfg: dict, sha: str, out: Path) -> int:
    space = _space_from(cfg)
    abs_a = float(_need(cfg, "abs_a"))
    eps = float(cfg.get("eps", 1e-3))
    delta = float(cfg.get("delta", 1e-3))
    seed = cfg.get("seed", 0)
    try:
        report = lower_bound_capacity(space, abs_a, delta_margin=delta, eps=eps)
    except ValueError as e:
        print(f"capacity: admissibility certification failed: {e}",
              file=sys.stderr)
        return 4
    r_grid = [float(r) for r in cfg.get("r_grid",
                                        [0.0, 0.25, 0.5, 0.75, 1.0])]
    rows = [(r, area_A(r)) for r in r_grid]
    _write_csv(out, "area_table.csv", ["r", "area_A"], rows)
    _write_json(out, "capacity.json",
                _envelope(sha, seed, json.loads(report.to_json())))
    print(f"capacity: certified lower bound {report.lower:.12g} "
          f"(target {report.witnesses['target']:.12g}, upper {report.upper:.12g})")
    return 0


def cmd_chord(cfg: dict, sha: str, out: Path) -> int:
    space = _space_from(cfg)
    m_target = float(_need(cfg, "m_target"))
    prof_spec = cfg.get("profile", {"kind": "steep", "m_target": m_target})
    profile = _profile_from(prof_spec)
    if abs(profile.m_h - m_target) > 1e-9:
        raise CliError(
            f"declared m_target {m_target} does not match profile value "
            f"{profile.m_h}")
    ham = simple_hamiltonian(space, profile)
    seed = cfg.get("seed", 11)
    eps = cfg.get("eps")
    if ham.m_h <= HALF_PI:
        extended = False
    else:
        threshold = HALF_PI + (float(eps) if eps is not None
                               else default_extension_eps(m_target))
        extended = ham.m_h > threshold
    if extended:
        target = extend_hamiltonian(ham, eps=None if eps is None else float(eps),
                                    n_scale=cfg.get("n_scale"))
    else:
        target = ham
    gal = GalerkinSpace(space, int(cfg.get("max_freq", 32)))
    F = ActionFunctional(gal, target)
    link_cfg = cfg.get("linking", {})
    link = LinkingConfig(
        tau=link_cfg.get("tau"), alpha=link_cfg.get("alpha"),
        seed=int(seed), require_linking=bool(link_cfg.get("require_linking",
                                                          True)),
        min_positive=float(link_cfg.get("min_positive", 1e-4)))

    def emit_log(records):
        _write_json(out, "chord_log.json", _envelope(sha, seed, {
            "extended": extended, "m_h": ham.m_h,
            "records": list(records)}))

    try:
        value, result = minimax_estimate(F, link)
    except (NoConvergence, ValidationFailed) as e:
        emit_log(getattr(e, "records", ()))
        code = 6 if isinstance(e, ValidationFailed) else 5
        outcome = "validation failed" if code == 6 else "no convergence"
        print(f"chord: FAIL ({outcome}): {e}", file=sys.stderr)
        return code

    emit_log(result.records)
    results = {
        "minimax_value": value,
        "action": result.action,
        "grad_norm": result.grad_norm,
        "ode_residual": result.ode_residual,
        "leaf_res": result.leaf_res,
        "inside": result.inside_flag,
        "extended": extended,
        "path": json.loads(path_to_json(result.path)),
    }
    _write_json(out, "chord_result.json", _envelope(sha, seed, results))
    gates = [
        ("action > 0", result.action > 0),
        ("grad_norm < 1e-7", result.grad_norm < 1e-7),
        ("ode_residual < 1e-4", result.ode_residual < 1e-4),
        ("leaf_res < 1e-8", result.leaf_res < 1e-8),
        ("path inside truncation region", result.inside_flag),
    ]
    for label, ok in gates:
        print(f"chord: {'PASS' if ok else 'FAIL'} {label}")
    print(f"chord: action = {result.action:.12g}, "
          f"minimax value = {value:.12g}")
    return 0


def cmd_nonsqueeze(cfg: dict, sha: str, out: Path) -> int:
    pairs = _need(cfg, "pairs")
    seed = cfg.get("seed", 0)
    rows = []
    verdicts = []
    for item in pairs:
        try:
            r, A = float(item[0]), float(item[1])
        except (TypeError, ValueError, IndexError) as e:
            raise CliError(f"pairs entries must be [r, A] numbers: {e}") from e
        rep = nonsqueeze_check(r, A)
        rows.append((r, A, rep.radius_bound, rep.verdict))
        verdicts.append(json.loads(rep.to_json()))
    _write_csv(out, "nonsqueeze.csv", ["r", "A", "radius_bound", "verdict"],
               rows)
    _write_json(out, "nonsqueeze.json", _envelope(sha, seed,
                                                  {"verdicts": verdicts}))
    for r, A, Rb, verdict in rows:
        print(f"nonsqueeze: r={r:g} A={A:g} R(A)={Rb:.12g} -> {verdict}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coisocap",
        description="Numerical laboratory for leafwise chords and "
                    "coisotropic capacity bounds")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, doc in [
        ("flow", cmd_flow, "integrate a Hamiltonian orbit, report returns"),
        ("capacity", cmd_capacity, "certified capacity lower bound + table"),
        ("chord", cmd_chord, "minimax search for a leafwise chord"),
        ("nonsqueeze", cmd_nonsqueeze, "evaluate the non-squeezing verdicts"),
    ]:
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="path to JSON config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="solver thread budget (reserved; single-threaded)")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg, sha = _load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return args.func(cfg, sha, out)
    except CliError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except StepFailure as e:
        print(f"integrator failure: {e}", file=sys.stderr)
        return 3
    except NoConvergence as e:
        print(f"no convergence: {e}", file=sys.stderr)
        return 5
    except ValidationFailed as e:
        print(f"validation failed: {e}", file=sys.stderr)
        return 6


if __name__ == "__main__":
    sys.exit(main())
