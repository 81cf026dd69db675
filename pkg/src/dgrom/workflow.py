"""End-to-end stages shared by the command line and the benchmark harness."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import io
from .affine import AffineOperator, assemble_online, decompose
from .config import RunConfig
from .dgspace import DGSpace
from .fom import (
    InnerProducts, PhysicsConfig, StokesSystem, assemble_inner_products, assemble_terms, solve_stokes,
)
from .geometry import DomainDescription, as_parameter, build_maps, build_reference_domain
from .mesh import FacetList, build_facets, deform_mesh, generate_mesh
from .online import ReducedModel
from .rom import collect_snapshots, error_metrics, pod, project, sample_parameters, velocity_pod

log = logging.getLogger(__name__)

ARCHIVE = "offline.npz"
REFERENCE_SPEEDUP = 20.6


@dataclass
class Problem:
    cfg: RunConfig
    domain: DomainDescription
    mesh: object
    facets: FacetList
    space: DGSpace
    physics: PhysicsConfig
    ip: InnerProducts
    op: AffineOperator | None = None


def poiseuille_exact(nu=1.0):
    """Channel flow ``u = (y(1-y), 0)``, ``p = 2 nu (1-x)`` on the unit square."""
    def u(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = x[..., 1] * (1.0 - x[..., 1])
        return out

    def p(x):
        return 2.0 * nu * (1.0 - np.asarray(x, dtype=float)[..., 0])

    return u, p


def setup(cfg: RunConfig, kind: str = "obstacle", affine: bool = True) -> Problem:
    """Reference mesh, DG space, penalty and (optionally) the affine decomposition."""
    domain = build_reference_domain(kind, box=cfg.param_box, mu_bar=cfg.mu_bar)
    mesh = generate_mesh(domain, cfg.refinement)
    facets = build_facets(mesh, domain)
    space = DGSpace(mesh, cfg.degree)
    kw = dict(nu=cfg.nu, c11=cfg.penalty(mesh.h_min()), nu_scaled_volume=cfg.nu_scaled_volume)
    if kind == "channel":
        kw["u_dirichlet"] = poiseuille_exact(cfg.nu)[0]
    physics = PhysicsConfig(**kw)
    prob = Problem(cfg, domain, mesh, facets, space, physics, assemble_inner_products(space))
    if affine and kind == "obstacle":
        prob.op = decompose(space, facets, physics, domain, alpha_scaling=cfg.alpha_scaling)
    return prob


def train_test(cfg: RunConfig):
    mus = sample_parameters(cfg.param_box, cfg.n_snapshots + cfg.n_test, cfg.seed)
    return mus[: cfg.n_snapshots], mus[cfg.n_snapshots:]


def timed_fom(prob: Problem, mu):
    """Full-order solve at ``mu`` through the affine sum; returns ``(U, P, t_assemble, t_solve)``."""
    t0 = time.perf_counter()
    system = assemble_online(prob.op, prob.op.theta(build_maps(prob.domain, mu)))
    t1 = time.perf_counter()
    U, P = solve_stokes(system)
    t2 = time.perf_counter()
    return U, P, t1 - t0, t2 - t1


def direct_system(prob: Problem, mu) -> tuple[StokesSystem, dict]:
    """Assembly on the physically deformed mesh (no affine expansion)."""
    mesh = deform_mesh(prob.mesh, build_maps(prob.domain, mu))
    space = DGSpace(mesh, prob.cfg.degree)
    facets = build_facets(mesh, prob.domain)
    return assemble_terms(space, facets, prob.physics)


def solve_poiseuille(cfg: RunConfig):
    """Channel validation: relative ``M_v``/``M_p`` errors against the analytic flow."""
    prob = setup(cfg, kind="channel", affine=False)
    from .fom import assemble_system

    U, P = solve_stokes(assemble_system(prob.space, prob.facets, prob.physics))
    u, p = poiseuille_exact(cfg.nu)
    Ue, Pe = prob.space.interpolate_velocity(u), prob.space.interpolate_pressure(p)
    return error_metrics((Ue, Pe), (U, P), prob.ip), prob, (U, P)


def eigen_rows(ev_components, ev_joint, ev_p):
    """One row per snapshot index: x, y, joint velocity and pressure eigenvalues."""
    cols = np.column_stack([ev_components[0], ev_components[1], ev_joint, ev_p])
    return [[i + 1, *row] for i, row in enumerate(cols)]


def run_offline(cfg: RunConfig, out: Path, prob: Problem | None = None):
    """Decompose, collect snapshots, POD both fields, project and persist.

    Returns ``(model, snapshots, stats)``. Stage names are attached to
    raised exceptions as ``exc.stage``.
    """
    out.mkdir(parents=True, exist_ok=True)
    stage = "setup"
    try:
        t0 = time.perf_counter()
        prob = prob or setup(cfg)
        stage = "snapshots"
        train, _ = train_test(cfg)
        snaps = collect_snapshots(prob.op, prob.domain, train)
        stage = "pod"
        comps = velocity_pod(snaps.Sv, prob.ip.Mv, prob.space.dofmap, "componentwise", tol=cfg.pod_tol)
        joint = velocity_pod(snaps.Sv, prob.ip.Mv, prob.space.dofmap, "joint", tol=cfg.pod_tol)
        bp = pod(snaps.Sp, prob.ip.Mp, tol=cfg.pod_tol)
        bases_v = comps if cfg.velocity_pod == "componentwise" else joint
        stage = "projection"
        extras = {"seed": cfg.seed, "config": cfg.to_text(), "n_elements": prob.mesh.n_elements,
                  "vel_local": prob.space.dofmap.vel.shape[2]}
        model = project(prob.op, prob.domain, bases_v, bp, extras=extras)
        model.aux = {"cells": prob.mesh.element_coords(), "Mv": prob.ip.Mv, "Mp": prob.ip.Mp}
        stage = "write"
        model.save(out / ARCHIVE)
        io.write_csv(out / "eigenvalues.csv", io.EIGEN_COLUMNS,
                     eigen_rows([b.eigenvalues for b in comps], joint[0].eigenvalues, bp.eigenvalues))
        io.write_mesh_text(out / "mesh.json", prob.mesh, prob.domain)
        write_gnuplot(out)
        stats = {"t_offline": time.perf_counter() - t0, "ranks_v": [b.rank for b in bases_v],
                 "rank_p": bp.rank, "n_u": prob.space.n_u, "n_p": prob.space.n_p}
        write_run_info(out, cfg, "offline", stats)
    except Exception as exc:
        exc.stage = stage
        raise
    return model, snaps, stats


def run_report(cfg: RunConfig, model: ReducedModel, out: Path, prob: Problem | None = None):
    """Errors for every ``N`` in the list and timings at ``N = min(10, max_n)``."""
    prob = prob or setup(cfg)
    _, test = train_test(cfg)
    n_list = list(cfg.n_basis_list)
    if max(n_list) > model.max_n:
        raise ValueError(f"n_basis_list entry {max(n_list)} exceeds usable maximum {model.max_n}")
    ip = InnerProducts(model.aux["Mv"], model.aux["Mp"])
    n_time = min(10, model.max_n)
    errs = np.empty((len(n_list), len(test), 2))
    timing = []
    for j, mu in enumerate(test):
        U, P, ta, ts = timed_fom(prob, mu)
        for i, n in enumerate(n_list):
            r = model.solve(mu, n)
            errs[i, j] = error_metrics((U, P), r, ip, (model.Bv, model.Bp))
        r = model.solve(mu, n_time)
        t_on = r.t_assemble + r.t_solve
        timing.append([mu[0], mu[1], ta, ts, r.t_assemble, r.t_solve, (ta + ts) / t_on])
    rows = [[n, errs[i, :, 0].mean(), errs[i, :, 0].max(), errs[i, :, 1].mean(), errs[i, :, 1].max()]
            for i, n in enumerate(n_list)]
    io.write_csv(out / "errors.csv", io.ERROR_COLUMNS, rows)
    io.write_csv(out / "timings.csv", io.TIMING_COLUMNS, timing)
    speedup = float(np.mean([t[-1] for t in timing]))
    write_run_info(out, cfg, "report", {"n_timing": n_time, "mean_speedup": speedup})
    return np.array(rows, dtype=float), np.array(timing), speedup


def write_run_info(out: Path, cfg: RunConfig, command: str, stats: dict):
    path = out / f"run_{command}.json"
    doc = {"command": command, "seed": cfg.seed, "prng": "numpy PCG64", "config": asdict(cfg), "stats": stats}
    path.write_text(json.dumps(doc, indent=1, default=float))


def write_gnuplot(out: Path):
    (out / "plots.gp").write_text(
        "set datafile separator ','\n"
        "set logscale y\n"
        "set key autotitle columnhead\n"
        "set terminal pngcairo\n"
        "set output 'eigenvalues.png'\n"
        "plot 'eigenvalues.csv' using 1:2 with lines, '' using 1:3 with lines, '' using 1:5 with lines\n"
        "set output 'errors.png'\n"
        "plot 'errors.csv' using 1:2 with linespoints, '' using 1:4 with linespoints\n"
    )


def check_parameter(cfg: RunConfig, mu):
    return as_parameter(mu, cfg.param_box).array

