"""Registered experiments.

Each experiment has a runner ``run(cfg, out_dir) -> list[Path]`` that writes CSV
artifacts and a summarizer ``summarize(echo, out_dir) -> list[Check]`` that
recomputes its pass/fail table from those CSVs and the config echo alone, so a
report can be regenerated from a manifest.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import solver as S
from ..divfree import divfree_check, stream_function, truncate_divfree
from ..fields import Grid, ScalarField, TensorField, grad, perp_grad
from ..generators import band_limited_scalar, random_bump, sinusoidal_nondecaying
from ..littlewood import DyadicSpec, bernstein_check, interpolation_check
from ..pressure import lemma02_bound
from ..weights import EstimateReport, theta_convolution_check, theta_scaled, ul_norm, weighted_norm


@dataclass
class Check:
    claim: str
    measured: str
    threshold: str
    passed: bool

    def row(self):
        return [self.claim, self.measured, self.threshold, "PASS" if self.passed else "FAIL"]


def _g(x):
    return f"{x:.6g}"


def _read_columns(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def _run_saved(scfg, s0, path, observer=None, extra=()):
    """Run the solver and write the trajectory CSV, also when the run fails."""
    try:
        traj = S.run(scfg, s0, observer=observer, extra_columns=extra)
    except Exception as err:
        partial = getattr(err, "trajectory", None)
        if partial is not None and len(partial):
            partial.to_csv(path)
        raise
    traj.to_csv(path)
    return traj


def _snapshots(traj, out, prefix):
    return traj.write_snapshots(out, prefix) if traj.snapshots else []


def _sweep_rng(seed, sub):
    return np.random.default_rng([int(seed), int(sub)])


def _l2b(f):
    """``L^2_b`` norm (unit balls); zero for a missing field."""
    return 0.0 if f is None else ul_norm(f, 2, 1.0)


# --- max_principle -------------------------------------------------------------


def run_max_principle(cfg, out):
    files = []
    for sub in cfg.params["seeds"]:
        rng = _sweep_rng(cfg.seed, sub)
        u0 = cfg.make_initial(rng)
        g = cfg.make_forcing(rng)
        s0 = S.init_state(u0)
        for alpha in cfg.params["alphas"]:
            scfg = cfg.solver_config(forcing=g, alpha=alpha)
            tol = S.max_principle_tolerance(scfg)

            def observer(st, scfg=scfg, s0=s0, tol=tol):
                lo, hi = S.max_principle_envelope(s0.omega, scfg, st.t)
                wmin, wmax = float(st.omega.values.min()), float(st.omega.values.max())
                bad = wmin < lo - tol or wmax > hi + tol
                return wmin, wmax, lo, hi, tol, float(bad)

            path = out / f"traj_seed{sub}_alpha{alpha:g}.csv"
            traj = _run_saved(scfg, s0, path, observer,
                              ("omega_min", "omega_max", "lower", "upper", "tol", "violation"))
            files.append(path)
            files += _snapshots(traj, out, f"omega_seed{sub}_alpha{alpha:g}")
    return files


def summarize_max_principle(echo, out):
    violations, worst, tol = 0, -math.inf, 0.0
    count = 0
    for path in sorted(out.glob("traj_seed*_alpha*.csv")):
        c = _read_columns(path)
        excess = np.maximum(c["omega_max"] - c["upper"], c["lower"] - c["omega_min"])
        violations += int(np.sum(excess > c["tol"]))
        worst = max(worst, float(np.max(excess)))
        tol = float(c["tol"][0])
        count += 1
    return [
        Check(f"vorticity envelope violations over {count} runs", str(violations), "== 0", violations == 0),
        Check("max excess beyond the envelope", _g(worst), f"<= tol={_g(tol)}", worst <= tol),
    ]


# --- dissipative ---------------------------------------------------------------


def _level(echo_params, g_norm, alpha):
    if "level" in echo_params:
        return float(echo_params["level"])
    return float(echo_params["level_factor"]) * g_norm / alpha


def run_dissipative(cfg, out):
    rng = cfg.rng()
    u0 = cfg.make_initial(rng)
    g = cfg.make_forcing(rng)
    scfg = cfg.solver_config(forcing=g)
    if scfg.alpha <= 0:
        raise ValueError("the dissipative experiment needs alpha > 0")
    s0 = S.init_state(u0)
    p = cfg.params
    gamma = float(p.get("gamma", scfg.alpha / 4))
    A = _l2b(u0) + s0.omega.max_abs()
    B = _l2b(g) + scfg.rot_forcing_inf
    cap = cfg.grid.L / 2 - cfg.grid.h

    def observer(st):
        R = p["radius_scale"] * (A * math.exp(-gamma * st.t) + B) ** 2
        Rc = min(R, cap)
        return R, Rc, float(R > cap), ul_norm(st.u, 2, Rc) / Rc

    path = out / "trajectory.csv"
    traj = _run_saved(scfg, s0, path, observer, ("R_t", "R_used", "R_capped", "u_ulRt_scaled"))
    level = _level(p, ul_norm(g, 2, scfg.diag_R) if g is not None else 0.0, scfg.alpha)
    with open(out / "level.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "gamma", "A", "B"])
        w.writerow([repr(level), repr(gamma), repr(A), repr(B)])
    return [path, out / "level.csv"] + _snapshots(traj, out, "omega")


def summarize_dissipative(echo, out):
    c = _read_columns(out / "trajectory.csv")
    lv = _read_columns(out / "level.csv")
    level = float(lv["level"][0])
    p = echo["params"]
    t_end = echo["solver"]["t_end"]
    t_half = float(p.get("t_half", t_end / 2))
    t, d = c["t"], c["u_ulR"]
    below = np.nonzero(d <= level)[0]
    entered = float(t[below[0]]) if below.size else math.inf
    after = d[t >= entered] if below.size else np.array([math.inf])
    peak = float(after.max()) / level if level > 0 else math.inf
    stay = float(p["stay_factor"])
    capped = c["R_capped"] > 0
    cap_note = f"R(t) capped until t={_g(float(t[capped][-1]))}" if capped.any() else "R(t) never capped"
    return [
        Check(f"u_ulR first below level {_g(level)} at t", _g(entered), f"<= t_half={_g(t_half)}", entered <= t_half),
        Check("max u_ulR / level after entering", _g(peak), f"<= {_g(stay)}", peak <= stay),
        Check(f"sup R(t)^-1 ||u||_L2b,R(t) ({cap_note})", _g(float(c["u_ulRt_scaled"].max())), "recorded", True),
    ]


# --- growth --------------------------------------------------------------------


def run_growth(cfg, out):
    rng = cfg.rng()
    u0 = cfg.make_initial(rng)
    u0 = u0 - type(u0).constant(cfg.grid, u0.mean()) if u0 is not None else None
    s0 = S.init_state(u0)
    p = cfg.params
    cap = cfg.grid.L / 2 - cfg.grid.h
    files = []

    g = cfg.make_forcing(rng)
    scfg = cfg.solver_config(forcing=g, alpha=0.0)
    e = float(p["poly_exponent"])
    path = out / "trajectory_bounded.csv"
    traj = _run_saved(scfg, s0, path, lambda st: (ul_norm(st.u, 2, scfg.diag_R) / (st.t + 1) ** e,),
                      ("poly_ratio",))
    files += [path] + _snapshots(traj, out, "omega_bounded")

    c = np.asarray(p["constant"], dtype=float)
    const = type(s0.u).constant(cfg.grid, c)
    scfg_c = cfg.solver_config(forcing=const, alpha=0.0)
    m0 = ul_norm(s0.u, 2, 1.0)
    speed = math.sqrt(math.pi) * float(np.hypot(*c))
    k = float(p["radius_exponent"])

    def observer(st):
        rho = (st.t + 1) ** k
        used = min(rho, cap)
        M = ul_norm(st.u, 2, used) / used
        return (ul_norm(st.u, 2, scfg_c.diag_R) / (st.t + 1) ** e, rho, used, float(rho > cap), M,
                M / (m0 + speed * st.t), st.t * c[0], st.t * c[1])

    path = out / "trajectory_constant.csv"
    traj = _run_saved(scfg_c, s0, path, observer,
                      ("poly_ratio", "rho", "rho_used", "rho_capped", "mean_value", "linear_ratio",
                       "baseline_u1", "baseline_u2"))
    files += [path] + _snapshots(traj, out, "omega_constant")
    return files


def summarize_growth(echo, out):
    p = echo["params"]
    a = _read_columns(out / "trajectory_bounded.csv")
    b = _read_columns(out / "trajectory_constant.csv")
    t0 = float(p["t_monotone"])
    checks = []
    for label, c in (("bounded rot g", a), ("constant g", b)):
        r = c["poly_ratio"][c["t"] >= t0]
        ups = int(np.sum(np.diff(r) > 0))
        checks.append(Check(f"sup ||u||_L2b,R/(t+1)^5, {label}", _g(float(c["poly_ratio"].max())), "recorded", True))
        checks.append(Check(f"increases of ||u||/(t+1)^5 after t={_g(t0)}, {label}", str(ups), "== 0", ups == 0))
    err = float(max(np.abs(b["mean_u1"] - b["baseline_u1"]).max(), np.abs(b["mean_u2"] - b["baseline_u2"]).max()))
    tol = float(p["mean_tol"])
    checks.append(Check("max |mean u - t g|, constant g", _g(err), f"<= {_g(tol)}", err <= tol))
    f = float(p["linear_factor"])
    lr = b["linear_ratio"]
    ok = lr.min() >= 1 / f and lr.max() <= f
    capped = b["rho_capped"] > 0
    cap_t = _g(float(b["t"][capped][0])) if capped.any() else "never"
    checks.append(Check(f"mean-value / linear reference range (radius capped from t={cap_t})",
                        f"[{_g(float(lr.min()))}, {_g(float(lr.max()))}]", f"within [1/{_g(f)}, {_g(f)}]", ok))
    return checks


# --- uniqueness ----------------------------------------------------------------


def run_uniqueness(cfg, out):
    rng = cfg.rng()
    u0 = cfg.make_initial(rng)
    g = cfg.make_forcing(rng)
    p = cfg.params
    v = random_bump(cfg.grid, rng, count=2, radius=float(p["perturbation_radius"]),
                    spread=float(p["perturbation_radius"]), velocity="spectral")
    t_end = float(cfg.solver["t_end"])
    times = tuple(t_end * (i + 1) / p["samples"] for i in range(int(p["samples"])))
    scfg = cfg.solver_config(forcing=g, snapshot_times=times)
    w = theta_scaled(float(p["weight_R"]), tuple(cfg.solver["diag_center"]))
    files = []
    path = out / "traj_base.csv"
    base = _run_saved(scfg, S.init_state(u0), path)
    files.append(path)
    rows = {t: [t] for t in sorted(base.snapshots)}
    for i, eps in enumerate(p["epsilons"]):
        path = out / f"traj_eps{i}.csv"
        pert = _run_saved(scfg, S.init_state(u0 + v * eps), path)
        files.append(path)
        d0 = weighted_norm(v * eps, w, 2)
        for t in rows:
            diff = pert.snapshots[t].u - base.snapshots[t].u
            rows[t].append(weighted_norm(diff, w, 2) / d0)
    path = out / "lipschitz.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t"] + [f"amp_eps{i}" for i in range(len(p["epsilons"]))])
        for t in sorted(rows):
            wr.writerow([repr(float(x)) for x in rows[t]])
    files.append(path)
    return files


def summarize_uniqueness(echo, out):
    c = _read_columns(out / "lipschitz.csv")
    amps = np.array([c[k] for k in c if k.startswith("amp_")])
    final = amps[:, -1]
    spread = float(final.max() / final.min())
    stab = float(echo["params"]["stability"])
    worst = float((amps.max(axis=0) / amps.min(axis=0)).max())
    return [
        Check("Lipschitz amplification at T (max over eps)", _g(float(final.max())), "finite",
              bool(np.all(np.isfinite(final)))),
        Check("amplification spread over eps at T (max/min)", _g(spread), f"<= {_g(stab)}", spread <= stab),
        Check("amplification spread over eps, all sample times", _g(worst), f"<= {_g(stab)}", worst <= stab),
    ]


# --- smoothing -----------------------------------------------------------------


def _grad_field(u):
    gs = [grad(c) for c in u.components]
    return ScalarField(u.grid, np.sqrt(sum(q.u1.values**2 + q.u2.values**2 for q in gs)))


def run_smoothing(cfg, out):
    rng = cfg.rng()
    u0 = cfg.make_initial(rng)
    g = cfg.make_forcing(rng)
    scfg = cfg.solver_config(forcing=g)
    R = float(cfg.params["grad_R"])

    def observer(st):
        gn = ul_norm(_grad_field(st.u), 2, R)
        return gn, math.sqrt(st.t) * gn

    path = out / "trajectory.csv"
    traj = _run_saved(scfg, S.init_state(u0), path, observer, ("grad_ulR", "sqrt_t_grad"))
    return [path] + _snapshots(traj, out, "omega")


def summarize_smoothing(echo, out):
    c = _read_columns(out / "trajectory.csv")
    t, gn, w = c["t"][1:], c["grad_ulR"][1:], c["omega_inf"][1:]
    slopes = np.diff(np.log(gn)) / np.diff(np.log(t))
    floor = float(echo["params"]["slope_floor"])
    # observed exponent of the vorticity decay over the first decade of samples
    k = max(2, min(len(t), int(np.searchsorted(t, 10 * t[0])) + 1))
    n_obs = -float(np.polyfit(np.log(t[:k]), np.log(w[:k]), 1)[0])
    return [
        Check("min log-log slope of ||grad u||_L2b,R", _g(float(slopes.min())), f">= {_g(floor)}",
              float(slopes.min()) >= floor),
        Check("sup t^(1/2) ||grad u||_L2b,R", _g(float(c["sqrt_t_grad"].max())), "finite",
              bool(np.isfinite(c["sqrt_t_grad"]).all())),
        Check("observed decay exponent N of ||omega||_inf (first decade)", _g(n_obs), "recorded", True),
    ]


# --- lemmas --------------------------------------------------------------------


def _lemma_reports(cfg, sub):
    rng = _sweep_rng(cfg.seed, sub)
    grid = cfg.grid
    p = cfg.params
    reps = []
    for _ in range(int(p["triples"])):
        R = float(np.exp(rng.uniform(np.log(0.5), np.log(8.0))))
        x0, y0 = rng.uniform(-10, 10, 2), rng.uniform(-10, 10, 2)
        reps.append(theta_convolution_check(R, x0, y0))
    half = grid.L / 2 - grid.h
    for R in p["R"]:
        R = float(R)
        if 3 * R <= half:
            u = random_bump(grid, rng, count=3, radius=2 * R, spread=R, velocity="spectral")
            w = TensorField.outer(u)
            for _ in range(int(p["centers"])):
                r, a = 2 * R * math.sqrt(rng.uniform()), rng.uniform(0, 2 * math.pi)
                reps.append(lemma02_bound(w, u, R, (r * math.cos(a), r * math.sin(a)), p=p["p"], q=p["q"]))
        if 2 * R + 1.5 * R <= half:
            x0 = tuple(rng.uniform(-0.2, 0.2, 2) * half)
            x0 = x0 if np.hypot(*x0) + 2 * R <= half else (0.0, 0.0)
            u = random_bump(grid, rng, count=3, radius=R, spread=R / 2, center=x0)
            reps.append(interpolation_check(u, R, x0, "L3"))
            reps.append(interpolation_check(u, R, x0, "Linf", p=p["linf_p"]))
    # Bernstein on a 2 pi box with the same n, where the blocks 2..6 are resolved
    bgrid = Grid(grid.n, 2 * math.pi)
    spec = DyadicSpec.for_grid(bgrid)
    f = band_limited_scalar(bgrid, rng, min(bgrid.n // 3, 2 ** spec.j_max))
    for j in p["bernstein_j"]:
        if spec.j_min <= j <= spec.j_max:
            reps += bernstein_check(f, int(j), spec=spec)
    # stream function roundtrip and truncation
    u = random_bump(grid, rng, count=3, radius=min(12.0, half / 3), spread=min(4.0, half / 6), velocity="spectral")
    back = perp_grad(stream_function(u))
    reps.append(EstimateReport("stream_roundtrip", (back - u).magnitude().max(), u.magnitude().max()))
    s = sinusoidal_nondecaying(grid)
    base = ul_norm(s, 2, 1.0)
    N = 8.0
    while 2 * N <= half:
        uN = truncate_divfree(s, N)
        reps.append(EstimateReport("truncation", ul_norm(uN, 2, 1.0), base,
                                   params={"N": N, "div_res": divfree_check(uN)}))
        N *= 2
    return reps


def run_lemmas(cfg, out):
    path = out / "lemmas.csv"
    rows = []
    for sub in cfg.params["seeds"]:
        for rep in _lemma_reports(cfg, sub):
            rows.append([str(sub)] + rep.to_csv_row())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "name", "lhs", "rhs", "ratio", "params"])
        w.writerows(rows)
    return [path]


def summarize_lemmas(echo, out):
    ratios: dict = {}
    with open(out / "lemmas.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            rep = EstimateReport.from_csv_row(row[1:])
            ratios.setdefault(rep.name, []).append(rep.ratio)
    cap = echo["params"]["max_ratio"]
    cap = math.inf if cap == "inf" else float(cap)
    checks = []
    for name in sorted(ratios):
        r = np.array(ratios[name])
        ok = bool(np.all(np.isfinite(r))) and r.max() <= cap
        checks.append(Check(f"{name}: max ratio over {r.size} reports", _g(float(r.max())),
                            "finite" if math.isinf(cap) else f"<= {_g(cap)}", ok))
    return checks


RUNNERS = {
    "max_principle": run_max_principle,
    "dissipative": run_dissipative,
    "growth": run_growth,
    "uniqueness": run_uniqueness,
    "smoothing": run_smoothing,
    "lemmas": run_lemmas,
}

SUMMARIZERS = {
    "max_principle": summarize_max_principle,
    "dissipative": summarize_dissipative,
    "growth": summarize_growth,
    "uniqueness": summarize_uniqueness,
    "smoothing": summarize_smoothing,
    "lemmas": summarize_lemmas,
}


def summarize(echo, out):
    return SUMMARIZERS[echo["experiment"]](echo, Path(out))
