"""Command-line entry point: ``finsler-hmx <command> --config PATH``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import Callable

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .finsler import connections, fundamental_tensors
from .hmatsumoto import barred_direct, barred_fundamentals
from .hvector import ChangeDomainError, ef_tensors, samples_from_space, search_h_vector
from .hypersurface import (
    ChartError,
    barred_fundamentals_hs,
    barred_hypersurface,
    chart_frame,
    chart_from_config,
    fundamentals,
    induced_connections,
    parallel_collapse,
    relative_derivative_check,
)
from .jets import JetError, PointDirection
from .verify import chain as chainmod
from .verify import core as coremod
from .verify.fixtures import mock_fixture, seeded_fixture
from .verify.probes import fixture_probes, space_probes
from .verify.report import CONVENTIONS, Report, check, emit_report, exploratory, skipped

COMMANDS = ("frame", "transform", "verify-core", "verify-chain", "hypersurface", "search-hvector")

HS_REFS = {
    "hs.frame.normal_orthogonal": "g_ij B^i_a B^j = 0",
    "hs.frame.normal_unit": "g_ij B^i B^j = 1",
    "hs.frame.inverse_projection": "B^a_i = g^ab g_ij B^j_b",
    "hs.frame.duality_ab": "B^i_a B^b_i = delta^b_a",
    "hs.frame.duality_a_normal": "B^i_a B_i = 0",
    "hs.frame.duality_normal_a": "B^i B^a_i = 0",
    "hs.frame.duality_normal": "B^i B_i = 1",
    "hs.frame.completeness": "B^i_a B^a_j + B^i B_j = delta^i_j",
    "hs.frame.y_normal": "y_j B^j = 0",
    "hs.relation.H_0a": "H_0a = H_a",
    "hs.relation.H_a0": "H_a0 = H_a + M_a H_0",
    "hs.relation.M_ab_symmetry": "M_ab = M_ba",
    "hs.relative.tangent_h": "B^i_a|b = H_ab B^i",
    "hs.relative.tangent_v": "B^i_a|_b = M_ab B^i",
    "hs.relative.normal_h": "B^i_|b = -H_ab B^a_j g^ij",
    "hs.relative.normal_v": "B^i|_b = -M_ab B^a_j g^ij",
    "hs.induced.reconstruction_K": "K^i_bc = B^i_d P^d_bc + B^i B_h K^h_bc",
    "hs.induced.reconstruction_A": "A^i_bc = B^i_d G^d_bc + B^i B_h A^h_bc",
    "hs.barred.normal_length": "gbar_ij B^i B^j = p + p3 (m_j B^j)^2",
    "hs.barred.normal_mixed": "gbar_ij B^i_a B^j = Q_i B^i_a (m_j B^j)",
    "hs.barred.duality_ab": "Bbar^a_i B^i_b = delta^a_b with Bbar^a_i = gbar^ab gbar_ij B^j_b",
    "hs.barred.duality_a_normal": "B^i_a Bbar_i = 0",
    "hs.barred.duality_normal_a": "Bbar^i Bbar^a_i = 0",
    "hs.barred.duality_normal": "Bbar^i Bbar_i = 1",
    "hs.barred.normal_closed": "Bbar^i = B^i / sqrt(p) when b_i B^i = 0",
    "hs.barred.normal_low_closed": "Bbar_i = sqrt(p) B_i when b_i B^i = 0",
    "hs.barred.orthonormal_orth": "gbar_ij B^i_a (B^j / sqrt(p)) = 0",
    "hs.barred.orthonormal_unit": "gbar_ij (B^i / sqrt(p)) (B^j / sqrt(p)) = 1",
    "hs.barred.H0_formula": "Hbar_0 = sqrt(p)(H_0 + B_i D^i)",
    "hs.barred.H0_scaled": "Hbar_0 = sqrt(p) H_0 (gradient b, tangent b)",
    "hs.barred.M_closed": "Mbar_ab = sqrt(p) M_ab against closed-form Cbar on B_a, B_b, Bbar",
    "hs.barred.M_direct": "Mbar_ab = sqrt(p) M_ab against jet-direct Cbar on B_a, B_b, Bbar",
    "hs.barred.second_fundamental": chainmod.REFS["chain.second_fundamental"],
    "hs.parallel.D": "D^i = 0 when b_i|j = 0",
    "hs.parallel.Dj": "D^i_j = 0 when b_i|j = 0",
    "hs.parallel.Djk": "D^i_jk = 0 when b_i|j = 0",
    "hs.parallel.P_ind": "Pbar^a_bc = P^a_bc on a hyperplane of the first kind",
    "hs.parallel.G_ind": "Gbar^a_bc = G^a_bc on a hyperplane of the first kind",
    "hs.probe.condition_ii": "L C^h_ij b_h - rho h_ij (exploratory)",
}

_TRANSFORM_REFS = {
    "hvector.weak": "L dot_j b_i = rho h_ij",
    "hvector.condition_ii": "L C^h_ij b_h - rho h_ij (exploratory)",
    "transform.lbar": "closed-form lbar_i vs jet-direct",
    "transform.Lbar": "Lbar = L^2 / (L - beta)",
    "transform.hbar": "closed-form hbar_ij vs jet-direct",
    "transform.gbar": "closed-form gbar_ij vs jet-direct",
    "transform.Cbar": "Cbar_ijk = p C_ijk + V_ijk vs jet-direct",
    "transform.inverse_closed": "gbar^ik gbar_kj = delta (closed-form inverse)",
    "transform.inverse_numeric": "gbar^ik gbar_kj = delta (numerical inverse)",
    "scalar.p_plus_p1": "p + p1 = tau^2/(tau-1)^2",
    "scalar.q_times_p": "q p = 1",
    "transform.v_contraction_m": "V_ijk m^i closed form",
    "transform.v_contraction_g": "V_ijk g^ir closed form",
}
_PROBE_REFS = {
    "probe.beta_cartan": "beta_r C^r_ij with beta_r = beta_{|r} (exploratory)",
    "probe.spray_gap": "Gbar^i - G^i - D^i (exploratory)",
    "probe.nonlinear_gap": "Gbar^i_j - G^i_j - D^i_j (exploratory)",
    "probe.connection_gap": "Fbar^i_jk - F^i_jk - D^i_jk (exploratory)",
    "probe.printed_q1_inverse": "inverse with the printed q1 (exploratory)",
    "probe.projection_printed": "normal projection of D^i_jk, printed coefficient (exploratory)",
    "probe.projection_assembled": "normal projection of D^i_jk, assembled coefficient (exploratory)",
}
_BASE_REFS = {f"base.{k}": v for k, v in coremod.BASE_REFS.items()}

REGISTRY = {
    "frame": _BASE_REFS,
    "transform": _TRANSFORM_REFS,
    "verify-core": {**_BASE_REFS, **_TRANSFORM_REFS, **_PROBE_REFS},
    "verify-chain": {**chainmod.REFS, **_PROBE_REFS},
    "hypersurface": HS_REFS,
    "search-hvector": {"search.normalized_residual": "least-squares residual of L C^h_ij b_h = rho h_ij per unit rho"},
}

DOMAIN_ERRORS = (ConfigError, ChangeDomainError, ChartError, JetError, np.linalg.LinAlgError)


class DomainError(Exception):
    pass


def _describe(pt: PointDirection) -> str:
    return f"x={list(pt.x)}, y={list(pt.y)}"


def _admissible_change(space, field, min_gap: float) -> Callable[[PointDirection], bool]:
    def ok(pt: PointDirection) -> bool:
        try:
            frame = connections(space, pt)
            hv = ef_tensors(frame, field.jet(space.jet(pt, (1, 4)), pt), field.rho0)
            hmf = barred_fundamentals(frame, hv)
        except DOMAIN_ERRORS:
            return False
        if abs(hv.tau - 1.0) < min_gap or hmf.scalars.p <= 0:
            return False
        return bool(np.min(np.linalg.eigvalsh(hmf.gbar)) > 0)

    return ok


def _admissible_base(space) -> Callable[[PointDirection], bool]:
    def ok(pt: PointDirection) -> bool:
        try:
            fundamental_tensors(space, pt)
        except DOMAIN_ERRORS:
            return False
        return True

    return ok


def _points(cfg: dict, space, field=None) -> list[PointDirection]:
    pts = cfgmod.explicit_points(cfg)
    if pts is not None:
        return pts
    if field is not None:
        return cfgmod.sample_points(cfg, _admissible_change(space, field, cfg["sampler"]["min_tau_gap"]))
    return cfgmod.sample_points(cfg, _admissible_base(space))


def _per_point(points, fn):
    """Run ``fn(k, pt)`` on each point, naming the point on domain errors."""
    for k, pt in enumerate(points):
        try:
            fn(k, pt)
        except DOMAIN_ERRORS as exc:
            raise DomainError(f"point {k} ({_describe(pt)}): {type(exc).__name__}: {exc}") from None


def _require_field(cfg: dict, command: str):
    field = cfgmod.build_field(cfg)
    if field is None:
        raise ConfigError(f"command {command!r} needs an hvector block")
    return field


# commands --------------------------------------------------------------------


def cmd_frame(cfg: dict, report: Report) -> None:
    space = cfgmod.build_space(cfg)
    tol = cfg["tolerances"]["base"]

    def run(k, pt):
        tag = f"{k:03d}"
        fr = connections(space, pt)
        report.put(f"frame.{tag}", {
            "x": list(pt.x), "y": list(pt.y), "L": fr.L, "l": fr.l, "g": fr.g, "C": fr.C,
            "spray": fr.spray, "N": fr.N,
        })
        report.add(*coremod.base_checks(space, pt, tag, tol))

    _per_point(_points(cfg, space), run)


def cmd_transform(cfg: dict, report: Report) -> None:
    space = cfgmod.build_space(cfg)
    field = _require_field(cfg, "transform")

    def run(k, pt):
        tag = f"{k:03d}"
        report.add(*coremod.transform_checks(space, field, pt, tag, cfg["tolerances"]))
        frame = connections(space, pt)
        hv = ef_tensors(frame, field.jet(space.jet(pt, (1, 4)), pt), field.rho0)
        hmf = barred_fundamentals(frame, hv)
        report.put(f"scalars.{tag}", dataclasses.asdict(hmf.scalars))
        report.put(f"transform.{tag}", {"x": list(pt.x), "y": list(pt.y), "Lbar": hmf.Lbar, "gbar": hmf.gbar})

    _per_point(_points(cfg, space, field), run)


def cmd_verify_core(cfg: dict, report: Report) -> None:
    space = cfgmod.build_space(cfg)
    field = cfgmod.build_field(cfg)
    points = _points(cfg, space, field)
    tols = cfg["tolerances"]

    def run(k, pt):
        tag = f"{k:03d}"
        report.add(*coremod.base_checks(space, pt, tag, tols["base"]))
        if field is not None:
            report.add(*coremod.transform_checks(space, field, pt, tag, tols))
            if cfg["probes"]:
                for rec in space_probes(space, field, [pt]):
                    rec.check_id = rec.check_id.rsplit("#", 1)[0] + f"#{tag}"
                    report.add(rec)

    _per_point(points, run)


def cmd_verify_chain(cfg: dict, report: Report) -> None:
    fx_cfg = cfg["fixtures"]
    tol = cfg["tolerances"]["chain"]
    fixtures = [("M", mock_fixture(3, 2.0, 0.05, (0.0, 0.3, 0.4), 2.0))]
    for k in range(fx_cfg["count"]):
        fixtures.append((f"{k:03d}", seeded_fixture(fx_cfg["seed"] * 100003 + k, fx_cfg["n"])))
    for tag, fx in fixtures:
        report.add(*chainmod.chain_suite(fx, tag, tol))
        if cfg["probes"]:
            report.add(*fixture_probes(fx, tag))


def _tangent_c(cfg: dict, hf) -> np.ndarray:
    """Constant c_i = s g_ij B^j_1: a gradient field with c_i B^i = 0 at the sample."""
    return cfg["hvector"]["tangent_scale"] * (hf.base.g @ hf.B_alpha[:, 0])


def cmd_hypersurface(cfg: dict, report: Report) -> None:
    hs = cfg["hypersurface"]
    if hs is None:
        raise ConfigError("command 'hypersurface' needs a hypersurface block")
    space = cfgmod.build_space(cfg)
    n = cfg["space"]["dim"]
    try:
        chart = chart_from_config(hs, n)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"hypersurface block: {exc}") from None
    tols = cfg["tolerances"]

    def rec(cid, tag, value, tol, basis, dig):
        report.add(check(f"{cid}#{tag}", HS_REFS[cid], value, tol, basis, dig))

    def gate(cid, tag, tol, reason, dig):
        report.add(skipped(f"{cid}#{tag}", HS_REFS[cid], tol, "gated identity", reason, dig))

    for k, sample in enumerate(hs["samples"]):
        tag = f"{k:03d}"
        dig = {"chart": chart.family, "params": chart.params, "u": sample["u"], "v": sample["v"]}
        try:
            hf = chart_frame(space, chart, sample["u"], sample["v"])
            _hypersurface_sample(cfg, space, chart, hf, tag, dig, tols, rec, gate, report)
        except DOMAIN_ERRORS as exc:
            raise DomainError(f"sample {k} (u={sample['u']}, v={sample['v']}): {type(exc).__name__}: {exc}") from None


def _hypersurface_sample(cfg, space, chart, hf, tag, dig, tols, rec, gate, report):
    fund = fundamentals(hf, tols["classify"])
    for key, val in hf.identity_residuals().items():
        rec(f"hs.frame.{key}", tag, val, tols["frame"], "frame identity", dig)
    for key, val in fund.relation_residuals(hf.v).items():
        rec(f"hs.relation.{key}", tag, val, tols["relation"], "contraction identity", dig)
    for key, val in relative_derivative_check(space, chart, hf, fund).items():
        rec(f"hs.relative.{key}", tag, val, tols["relative"], "chart jets plus central differences of the normal", dig)
    ic = induced_connections(hf, fund)
    for key, val in ic.reconstruction.items():
        rec(f"hs.induced.reconstruction_{key}", tag, val, tols["relation"], "completeness relation", dig)
    report.put(f"hypersurface.{tag}", {
        "x": hf.x, "y": hf.y, "B": hf.B_up, "kind": fund.kind, "kind_residuals": fund.kind_residuals,
        "classify_tol": fund.tol, "H_a": fund.H_a, "H_ab": fund.H_ab, "M_ab": fund.M_ab,
    })
    if cfg["hvector"] is None:
        return
    c_over = _tangent_c(cfg, hf) if cfg["hvector"]["c"] == "tangent" else None
    field = cfgmod.build_field(cfg, c_over)
    pt = PointDirection(hf.x, hf.y)
    bjet = field.jet(space.jet(pt, (1, 4)), pt)
    hv = ef_tensors(hf.base, bjet, field.rho0)
    hmf = barred_fundamentals(hf.base, hv)
    bh = barred_hypersurface(hf, hv, hmf)
    direct = barred_direct(space, field, pt, connections=True)
    bf = barred_fundamentals_hs(hf, fund, hv, hmf, bh, direct, tols["tangency"])
    report.add(exploratory(f"hs.probe.condition_ii#{tag}", HS_REFS["hs.probe.condition_ii"], bf.condition_ii,
                           digest_of=dig))
    tb = tols["barred"]
    not_tangent = f"b_i B^i = {bh.tangency!r} is not zero"
    for key in ("normal_length", "normal_mixed", "duality_ab", "duality_a_normal", "duality_normal_a", "duality_normal"):
        rec(f"hs.barred.{key}", tag, bh.residuals[key], tb, "direct solve in gbar", dig)
    for key in ("normal_closed", "normal_low_closed", "orthonormal_orth", "orthonormal_unit"):
        if bh.tangent:
            rec(f"hs.barred.{key}", tag, bh.residuals[key], tb, "closed form vs direct solve", dig)
        else:
            gate(f"hs.barred.{key}", tag, tb, not_tangent, dig)
    scale = max(1.0, abs(bf.H0_direct))
    if bh.tangent:
        rec("hs.barred.H0_formula", tag, abs(bf.H0_direct - bf.H0_formula) / scale, tb,
            "jet-direct transformed spray vs difference vector", dig)
        Mscale = max(1.0, float(np.max(np.abs(bf.M_ab_scaled))))
        rec("hs.barred.M_closed", tag, float(np.max(np.abs(bf.M_ab_scaled - bf.M_ab_closed))) / Mscale, tb,
            "scaled base tensor vs closed-form Cbar contraction", dig)
        rec("hs.barred.M_direct", tag, float(np.max(np.abs(bf.M_ab_scaled - bf.M_ab_direct))) / Mscale, tb,
            "scaled base tensor vs jet-direct Cbar contraction", dig)
    else:
        for key in ("H0_formula", "M_closed", "M_direct"):
            gate(f"hs.barred.{key}", tag, tb, not_tangent, dig)
    if bh.tangent and bf.gradient < tols["tangency"]:
        rec("hs.barred.H0_scaled", tag, abs(bf.H0_direct - bf.H0_scaled) / scale, tb,
            "jet-direct transformed spray vs scaled base normal curvature", dig)
    else:
        gate("hs.barred.H0_scaled", tag, tb, f"needs tangent and gradient b (tangency {bh.tangency!r}, "
             f"max|F_ij| {bf.gradient!r})", dig)
    if bf.second_fundamental is None:
        gate("hs.barred.second_fundamental", tag, tb,
             f"needs tangent, gradient b, E_i0 B^i = 0 and L C^h_ij b_h = rho h_ij; residuals: tangency "
             f"{bh.tangency!r}, gradient {bf.gradient!r}, predicate {bf.predicate!r}, condition {bf.condition_ii!r}", dig)
    else:
        rec("hs.barred.second_fundamental", tag, bf.second_fundamental, tb, "jet-direct transformed connection", dig)
    pc = parallel_collapse(hf, hv, hmf, bh)
    tc = tols["collapse"]
    for key in ("D", "Dj", "Djk"):
        rec(f"hs.parallel.{key}", tag, pc[key], tc, "difference tensors with b_i|j = 0 injected", dig)
    for key in ("P_ind", "G_ind"):
        if pc["first_kind"] and bh.tangent:
            rec(f"hs.parallel.{key}", tag, pc[key], tc, "induced connections of both spaces", dig)
        else:
            gate(f"hs.parallel.{key}", tag, tc, f"needs first kind (max|H_a| = {fund.kind_residuals['first']!r}) "
                 f"and tangent b (tangency {bh.tangency!r})", dig)


def cmd_search_hvector(cfg: dict, report: Report) -> None:
    space = cfgmod.build_space(cfg)
    points = _points(cfg, space)
    if len(points) < 10:
        raise ConfigError(f"search-hvector needs at least 10 point-directions, got {len(points)}")
    s = cfg["search"]
    try:
        res = search_h_vector(samples_from_space(space, points), s["degree"], tuple(s["rho_bounds"]), s["grid"], s["tol"])
    except ValueError as exc:
        raise ConfigError(f"search block: {exc}") from None
    report.put("search", {
        "status": res.status, "best_rho0": res.best_rho0, "best_residual": res.best_residual,
        "normalized_residual": res.normalized_residual, "rank": res.rank, "monomials": res.monomials,
        "coefficients": res.coefficients, "direction": res.direction, "curve": res.curve,
    })
    report.add(exploratory("search.normalized_residual", REGISTRY["search-hvector"]["search.normalized_residual"],
                           res.normalized_residual, f"status {res.status}"))


HANDLERS = {
    "frame": cmd_frame,
    "transform": cmd_transform,
    "verify-core": cmd_verify_core,
    "verify-chain": cmd_verify_chain,
    "hypersurface": cmd_hypersurface,
    "search-hvector": cmd_search_hvector,
}


def run_command(command: str, cfg: dict) -> Report:
    report = Report(command, {"config": cfg, "conventions": dict(CONVENTIONS)})
    HANDLERS[command](cfg, report)
    return report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="finsler-hmx", description="h-Matsumoto change identity harness")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML or JSON run configuration")
    ap.add_argument("--output", help="report path (default: stdout)")
    ap.add_argument("--format", choices=("machine", "human"), help="report format")
    ap.add_argument("--seed-override", type=int, help="replace every seed in the config")
    ap.add_argument("--list-checks", action="store_true", help="print the check registry for the command and exit")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_checks:
        for cid, ref in sorted(REGISTRY[args.command].items()):
            print(f"{cid}\t{ref}")
        return 0
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return 2
    if args.seed_override is not None and args.seed_override < 0:
        print("error: --seed-override must be non-negative", file=sys.stderr)
        return 2
    try:
        cfg = cfgmod.load_config(args.config, args.seed_override)
        if args.format:
            cfg["output"]["format"] = args.format
        if args.output:
            cfg["output"]["path"] = args.output
        report = run_command(args.command, cfg)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    out = cfg["output"]
    try:
        text = emit_report(report, out["format"], out["path"])
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return 2
    if out["path"] is None:
        sys.stdout.write(text)
    else:
        print(f"{args.command}: {report.status} -> {out['path']}", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
