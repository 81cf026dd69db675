"""Command line entry point ``dgrom``.

Exit statuses: 0 success, 1 bad input (config, parameter), 2 solver
failure, 3 missing archive, 4 reduced dimension out of range, 5 other
offline stage failure. The ``online`` command only imports the archive
loader and the coefficient code.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config

log = logging.getLogger("dgrom")

OK, BAD_INPUT, SOLVE_FAILED, NO_ARCHIVE, BAD_N, STAGE_FAILED = range(6)


def _mu(text):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    return (x, y)


def build_parser():
    ap = argparse.ArgumentParser(prog="dgrom", description="DG Stokes reduced basis workflow")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help, mu=False, n=False):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", type=Path, help="flat key = value configuration file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", type=Path, help="output directory (default: config output_dir)")
        if mu:
            p.add_argument("--mu", type=_mu, help="parameter as x,y (default: reference parameter)")
        if n:
            p.add_argument("--n-basis", type=int, required=True, help="reduced dimension N")
        return p

    add("fom", "full-order solve at one parameter", mu=True)
    add("offline", "snapshots, POD and projected blocks")
    p = add("online", "reduced solve from an offline archive", mu=True, n=True)
    p.add_argument("--fom", type=Path, help="full-order solution (.npz from 'fom') for error fields")
    add("report", "error-vs-N and timing tables over the test set")
    add("validate-affine", "affine expansion against direct assembly", mu=True)
    add("validate-fom", "channel flow exactness check")
    return ap


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.out is not None:
        cfg = cfg.replace(output_dir=str(args.out))
    return cfg


def _out(cfg) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _tag(mu):
    return f"{float(mu[0])!r}_{float(mu[1])!r}"


def cmd_fom(args, cfg):
    from . import io
    from .fom import SolverError
    from .workflow import check_parameter, setup, timed_fom

    mu = check_parameter(cfg, args.mu or cfg.mu_bar)
    out = _out(cfg)
    prob = setup(cfg)
    try:
        U, P, ta, ts = timed_fom(prob, mu)
    except SolverError as exc:
        log.error("solve failed: %s", exc)
        return SOLVE_FAILED
    uv, pv = prob.space.vertex_values(U, P)
    io.fields_vtk(out / f"fom_{_tag(mu)}.vtk", prob.mesh.element_coords(), uv, pv,
                  title=f"dgrom fom mu={mu.tolist()} seed={cfg.seed}")
    np.savez(out / f"fom_{_tag(mu)}.npz", U=U, P=P, mu=mu, t_assemble=ta, t_solve=ts)
    (out / f"fom_{_tag(mu)}.log").write_text(
        f"mu = {mu.tolist()}\nn_u = {prob.space.n_u}\nn_p = {prob.space.n_p}\n"
        f"c11 = {prob.physics.c11!r}\nt_assemble = {ta!r}\nt_solve = {ts!r}\nseed = {cfg.seed}\n")
    log.info("fom at mu=%s: n_u=%d n_p=%d (%.3fs + %.3fs)", mu.tolist(), prob.space.n_u, prob.space.n_p, ta, ts)
    return OK


def cmd_offline(args, cfg):
    from .fom import SolverError
    from .workflow import run_offline

    try:
        _, _, stats = run_offline(cfg, _out(cfg))
    except Exception as exc:
        log.error("offline stage '%s' failed: %s", getattr(exc, "stage", "?"), exc)
        return SOLVE_FAILED if isinstance(exc, SolverError) else STAGE_FAILED
    log.info("offline done: %s", json.dumps(stats, default=float))
    return OK


def _load_model(cfg):
    from .online import ReducedModel

    path = Path(cfg.output_dir) / "offline.npz"
    if not path.exists():
        log.error("offline archive %s not found; run 'dgrom offline' first", path)
        return None
    return ReducedModel.load(path)


def cmd_online(args, cfg):
    # only the archive, geometry and coefficient code are used here
    from . import io
    from .geometry import as_parameter
    from .online import ReducedSolveError

    model = _load_model(cfg)
    if model is None:
        return NO_ARCHIVE
    n = args.n_basis
    if n < 1 or n > model.max_n:
        log.error("reduced dimension N=%d out of range; usable maximum is %d", n, model.max_n)
        return BAD_N
    mu = as_parameter(args.mu or cfg.mu_bar, model.domain.box).array
    try:
        r = model.solve(mu, n)
    except ReducedSolveError as exc:
        log.error("%s", exc)
        return SOLVE_FAILED
    U, P = r.reconstruct(model.Bv, model.Bp)
    out = _out(cfg)
    uv, pv = model.vertex_fields(U, P)
    extra, timing = {}, [mu[0], mu[1], float("nan"), float("nan"), r.t_assemble, r.t_solve, float("nan")]
    if args.fom is not None:
        with np.load(args.fom) as z:
            Uf, Pf, ta, ts = z["U"], z["P"], float(z["t_assemble"]), float(z["t_solve"])
        fv, fp = model.vertex_fields(Uf, Pf)
        extra = {"abs_err_u_x": np.abs(fv[..., 0] - uv[..., 0]), "abs_err_u_y": np.abs(fv[..., 1] - uv[..., 1]),
                 "abs_err_p": np.abs(fp - pv)}
        ev, ep = _relative_errors(model, (Uf, Pf), (U, P))
        io.write_csv(out / f"online_errors_{_tag(mu)}_N{n}.csv", ("N", "e_v", "e_p"), [[n, ev, ep]])
        timing[2:4] = [ta, ts]
        timing[6] = (ta + ts) / (r.t_assemble + r.t_solve)
        log.info("relative errors e_v=%.3e e_p=%.3e", ev, ep)
    io.fields_vtk(out / f"rom_{_tag(mu)}_N{n}.vtk", model.aux["cells"], uv, pv, extra=extra,
                  title=f"dgrom rom mu={mu.tolist()} N={n} seed={model.extras.get('seed')}")
    io.write_csv(out / f"online_timing_{_tag(mu)}_N{n}.csv", io.TIMING_COLUMNS, [timing])
    log.info("online at mu=%s N=%d: %.2e s assemble, %.2e s solve", mu.tolist(), n, r.t_assemble, r.t_solve)
    return OK


def _relative_errors(model, fom, rom):
    out = []
    for a, b, M in zip(fom, rom, (model.aux["Mv"], model.aux["Mp"])):
        d = a - b
        out.append(float(np.sqrt(d @ (M @ d) / (a @ (M @ a)))))
    return out


def cmd_report(args, cfg):
    from .fom import SolverError
    from .online import ReducedSolveError
    from .workflow import REFERENCE_SPEEDUP, run_report

    model = _load_model(cfg)
    if model is None:
        return NO_ARCHIVE
    if max(cfg.n_basis_list) > model.max_n:
        log.error("n_basis_list reaches N=%d; usable maximum is %d", max(cfg.n_basis_list), model.max_n)
        return BAD_N
    try:
        rows, _, speedup = run_report(cfg, model, _out(cfg))
    except (SolverError, ReducedSolveError) as exc:
        log.error("report failed: %s", exc)
        return SOLVE_FAILED
    for n, mev, xev, mep, xep in rows:
        log.info("N=%2d  mean e_v=%.3e  max e_v=%.3e  mean e_p=%.3e  max e_p=%.3e", n, mev, xev, mep, xep)
    print(f"average speedup {speedup:.1f} (reference value {REFERENCE_SPEEDUP})")
    return OK


def cmd_validate_affine(args, cfg):
    from .validate import affine_report
    from .workflow import check_parameter, setup

    mu = check_parameter(cfg, args.mu or cfg.mu_bar)
    rep = affine_report(setup(cfg), mu)
    for term, err in rep.errors.items():
        print(f"{term:16s} {err:.3e}")
    print(f"penalty vs reference {rep.penalty_error:.3e}")
    print("PASS" if rep.passed else "FAIL")
    return OK if rep.passed else BAD_INPUT


def cmd_validate_fom(args, cfg):
    from .workflow import solve_poiseuille

    t0 = time.perf_counter()
    (ev, ep), prob, _ = solve_poiseuille(cfg)
    dt = time.perf_counter() - t0
    ok = ev <= 1e-8 and ep <= 1e-8
    print(f"channel flow: e_v={ev:.3e} e_p={ep:.3e} (N_el={prob.mesh.n_elements}, {dt:.2f}s) {'PASS' if ok else 'FAIL'}")
    return OK if ok else BAD_INPUT


COMMANDS = {"fom": cmd_fom, "offline": cmd_offline, "online": cmd_online, "report": cmd_report,
            "validate-affine": cmd_validate_affine, "validate-fom": cmd_validate_fom}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
    except (ConfigError, OSError) as exc:
        log.error("config: %s", exc)
        return BAD_INPUT
    try:
        return COMMANDS[args.command](args, cfg)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
