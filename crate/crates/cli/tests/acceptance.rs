//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any gating criterion fails.
//!
//! Set `EHRENFEST_EXTENDED=1` to also run the full 2D Toda sweep (hours).

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use ehrenfest_cli::commands::{cmd_run, cmd_sweep, example_rows, Options};
use ehrenfest_core::bose::{
    coherent_state, meanfield_evolve, stheta_ensemble, stheta_widths, Dimer, MeanFieldRun, MeanFieldState,
};
use ehrenfest_core::classical::{integrate_trajectory, Integrator, PhasePoint};
use ehrenfest_core::ensemble::sample_wigner;
use ehrenfest_core::model::{toda_conserved_f, toda_energy, HamiltonianSpec, Harmonic, OneD, Quartic, ScaledPlanck, Toda};
use ehrenfest_core::phasespace::{density_distance, ensemble_density, husimi_density, PlanckGrid};
use ehrenfest_core::quantum::{
    eigen_spectrum, gaussian_packet, gaussian_packet_with_width, propagate, Axis, Discretization, Grid, Observers, Propagator,
    SplitOrder,
};
use num_complex::Complex64;
use serde_json::Value;

const SLOPE_TARGET: f64 = 0.5;
const SLOPE_TOL: f64 = 0.05;
const TAU_TARGET: f64 = 26.0;
const TAU_REL: f64 = 0.20;
const REVIVAL_TARGET: f64 = 864.0;
const REVIVAL_REL: f64 = 0.10;
const PREDICTOR_REL: f64 = 0.10;
const HALF_REVIVAL_MAX: f64 = 0.8;
const ENSEMBLE_GAP_MAX: f64 = 0.1;
const TABLE_REL: f64 = 0.10;
const BOSE_SLOPE: f64 = 0.48;
const BOSE_SLOPE_TOL: f64 = 0.07;
const BOSE_REVIVAL_REL: f64 = 0.15;
const STHETA_MC_REL: f64 = 0.05;
const TODA_SLOPE: f64 = 0.50;
const TODA_SLOPE_TOL: f64 = 0.07;
const WIGNER_HUSIMI_MAX: f64 = 0.15;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = fn(&Path) -> anyhow::Result<Outcome>;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn opts(name: &str, out: &Path) -> Options {
    Options { config: Some(config(name)), out: Some(out.to_path_buf()), seed_override: None, quick: false }
}

fn read_json(path: PathBuf) -> anyhow::Result<Value> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn num(v: &Value, key: &str) -> anyhow::Result<f64> {
    v.pointer(key).and_then(Value::as_f64).ok_or_else(|| anyhow::anyhow!("missing {key}"))
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    ((value - target) / target).abs() <= rel
}

fn hb(v: f64) -> ScaledPlanck {
    ScaledPlanck::new(v).unwrap()
}

fn quartic_scaling(out: &Path) -> anyhow::Result<Outcome> {
    let dir = cmd_sweep(&opts("fig2b_sweep.toml", out))?;
    let report = read_json(dir.join("sweep.json"))?;
    let points = report["points"].as_array().map_or(0, Vec::len);
    let slope = num(&report, "/fit/slope")?;
    Ok(check(
        points == 8 && (slope - SLOPE_TARGET).abs() <= SLOPE_TOL,
        format!("slope {slope:.4} over {points} points (0.5 ± 0.05)"),
    ))
}

fn ehrenfest_point(out: &Path) -> anyhow::Result<Outcome> {
    let dir = cmd_run(&opts("fig3_ehrenfest.toml", out))?;
    let tau = num(&read_json(dir.join("ehrenfest.json"))?, "/fit/tau")?;
    Ok(check(within(tau, TAU_TARGET, TAU_REL), format!("tau {tau:.2} (26 ± 20%)")))
}

fn revival(out: &Path) -> anyhow::Result<Outcome> {
    let dir = cmd_run(&opts("fig7_revival.toml", out))?;
    let r = read_json(dir.join("revival.json"))?;
    let t_r = num(&r, "/t_r")?;
    let predicted = num(&r, "/predicted_t_r")?;
    let half = num(&r, "/half_revival_distance")?;
    let half_t = num(&r, "/half_revival_time")?;
    let pass = within(t_r, REVIVAL_TARGET, REVIVAL_REL) && within(predicted, t_r, PREDICTOR_REL) && half < HALF_REVIVAL_MAX;
    Ok(check(pass, format!("T_r {t_r:.1} (864 ± 10%), predictor {predicted:.1}, distance {half:.3} at t = {half_t:.1} (< 0.8)")))
}

fn ensemble_gap(out: &Path) -> anyhow::Result<Outcome> {
    let dir = cmd_run(&opts("fig6_ensemble.toml", out))?;
    let c = read_json(dir.join("comparison.json"))?;
    let gap = num(&c, "/quantum_vs_ensemble")?;
    let until = num(&c, "/until")?;
    let n = num(&read_json(dir.join("summary.json"))?, "/ensemble_size")?;
    Ok(check(
        gap < ENSEMBLE_GAP_MAX && until >= 300.0 && n >= 1e5,
        format!("max |x̄_c − ⟨x⟩| = {gap:.4} for t < {until} at n = {n} (< 0.1)"),
    ))
}

fn closed_form_table(_: &Path) -> anyhow::Result<Outcome> {
    let rows = example_rows()?;
    let get = |name: &str| rows.iter().find(|r| r.system == name).map(|r| r.tau_over_period).unwrap_or(f64::NAN);
    let (ball, atom, earth, hydrogen) = (get("ball in box"), get("cold atom in box"), get("sun-earth"), get("hydrogen"));
    let pass =
        within(ball, 2.4e15, TABLE_REL) && within(earth, 2.3e36, TABLE_REL) && within(hydrogen, 0.5, TABLE_REL) && atom < 1.0;
    Ok(check(pass, format!("ball {ball:.3e}, sun-earth {earth:.3e} yr, hydrogen {hydrogen:.3}, cold atom {atom:.3}")))
}

fn bose_scaling(out: &Path) -> anyhow::Result<Outcome> {
    let dir = cmd_sweep(&opts("fig8_bose.toml", out))?;
    let s = read_json(dir.join("sweep.json"))?;
    let slope = num(&s, "/fit/slope")?;
    let revival_slope = num(&s, "/revival_fit/slope")?;
    let ratios: Vec<f64> =
        s["points"].as_array().into_iter().flatten().filter_map(|p| Some(p["t_r"].as_f64()? / p["n"].as_f64()?)).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let pass = ratios.len() == 4
        && (slope - BOSE_SLOPE).abs() <= BOSE_SLOPE_TOL
        && hi / lo - 1.0 <= BOSE_REVIVAL_REL
        && (revival_slope - 1.0).abs() <= BOSE_REVIVAL_REL;
    Ok(check(pass, format!("tau slope {slope:.3} (0.48 ± 0.07), T_r/N in [{lo:.3}, {hi:.3}], T_r slope {revival_slope:.4}")))
}

fn uncertainty(_: &Path) -> anyhow::Result<Outcome> {
    let n = 100;
    let (ds, dth) = stheta_widths(0.5, n)?;
    let target = 1.0 / (2.0 * n as f64);
    let exact = ((ds * dth - target) / target).abs() < 1e-12;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let ens = stheta_ensemble(Complex64::new(r, 0.0), Complex64::from_polar(r, 0.5 * PI), n, 10_000, 1)?;
    let ((_, ss), (_, st)) = ens.moments();
    let mc = ss * st;
    Ok(check(
        exact && within(mc, target, STHETA_MC_REL),
        format!("closed form {:.6}, Monte Carlo {mc:.6}, target {target}", ds * dth),
    ))
}

fn property_suite(_: &Path) -> anyhow::Result<Outcome> {
    let mut failed = Vec::new();
    let mut note = |name: &str, ok: bool| {
        if !ok {
            failed.push(name.to_string());
        }
    };

    // Norm and energy over 10⁴ steps, plus the Ehrenfest-theorem difference check.
    let h = hb(0.03);
    let grid = Grid::One(Axis::new(-2.5, 2.5, 1024)?);
    let tc = 2.831_474_416_851_99;
    let dt = tc / 4096.0;
    let prop = Propagator::new(Discretization::new(&HamiltonianSpec::Quartic1D, grid, h)?, dt, SplitOrder::Second)?;
    let out = propagate(&gaussian_packet(grid, &[1.0], &[0.0], h)?, &prop, 10_000, &Observers::default())?;
    let obs = &out.observables;
    note("norm", obs.norm.values.iter().all(|n| (n - 1.0).abs() < 1e-10));
    let e = obs.energy.as_ref().map(|e| e.values.clone()).unwrap_or_default();
    note("energy", !e.is_empty() && e.iter().all(|v| ((v - e[0]) / e[0]).abs() < 1e-6));
    let (x, p) = (&obs.mean_x[0].values, &obs.mean_p[0].values);
    note(
        "ehrenfest theorem",
        (1..x.len() - 1).all(|i| ((x[i + 1] - x[i - 1]) / (2.0 * dt) - p[i]).abs() < 1e-6 + 10.0 * dt * dt),
    );

    // Harmonic oscillator: the quantum mean never leaves the classical orbit.
    let omega = 1.0;
    let hgrid = Grid::One(Axis::new(-4.0, 4.0, 256)?);
    let sx = (h.get() / (2.0 * omega)).sqrt();
    let packet = gaussian_packet_with_width(hgrid, &[1.0], &[0.5], &[sx], h)?;
    let hdt = 2.0 * PI / omega / 512.0;
    let steps = 50 * 512;
    let hprop = Propagator::new(Discretization::new(&HamiltonianSpec::Harmonic1D { omega }, hgrid, h)?, hdt, SplitOrder::Fourth)?;
    let q = propagate(&packet, &hprop, steps, &Observers { every: 64, energy: false, ..Observers::default() })?;
    let c = integrate_trajectory(PhasePoint::one(1.0, 0.5), &OneD(&Harmonic { omega }), hdt, steps, 64, Integrator::default())?;
    let worst = q.observables.mean_x[0].values.iter().zip(&c.points).map(|(a, b)| (a - b.x[0]).abs()).fold(0.0, f64::max);
    note("harmonic deviation", worst < 1e-4);

    // Split-operator propagation against exact evolution in the eigenbasis.
    let hd = hb(0.1);
    let dgrid = Grid::One(Axis::new(-3.0, 3.0, 128)?);
    let wf = gaussian_packet(dgrid, &[0.5], &[0.2], hd)?;
    let ddt = 1e-3;
    let dprop = Propagator::new(Discretization::new(&HamiltonianSpec::Quartic1D, dgrid, hd)?, ddt, SplitOrder::Second)?;
    let got = propagate(&wf, &dprop, 100, &Observers { every: 100, ..Observers::default() })?.state;
    let spec = eigen_spectrum(&HamiltonianSpec::Quartic1D, dgrid, hd, 127, true)?;
    let coeffs = spec.coefficients(&wf)?;
    let vecs = spec.eigenvectors.as_ref().expect("eigenvectors requested");
    let t = 100.0 * ddt;
    let diff: f64 = (0..128)
        .map(|j| {
            let exact: Complex64 = (0..spec.n_levels)
                .map(|k| coeffs[k] * Complex64::from_polar(1.0, -spec.eigenvalues[k] * t / hd.get()) * vecs[(j, k)])
                .sum();
            (exact - got.psi[j]).norm_sqr()
        })
        .sum();
    note("matrix exponential", (diff * dgrid.cell()).sqrt() < 1e-6);

    // Symplectic reversibility for every integrator.
    let start = PhasePoint::one(1.0, 0.3);
    for integ in [Integrator::Leapfrog, Integrator::Yoshida4, Integrator::KahanLi6] {
        let fwd = integrate_trajectory(start, &OneD(&Quartic), 0.005, 2000, 2000, integ)?.last();
        let back = integrate_trajectory(fwd, &OneD(&Quartic), -0.005, 2000, 2000, integ)?.last();
        note("reversibility", (back.x[0] - start.x[0]).abs() < 1e-10 && (back.p[0] - start.p[0]).abs() < 1e-10);
    }

    // Toda invariants.
    let (h0, f0) = (toda_energy(0.7, 1.2, 0.4, 0.6), toda_conserved_f(0.7, 1.2, 0.4, 0.6));
    let tr = integrate_trajectory(PhasePoint::two([0.7, 1.2], [0.4, 0.6]), &Toda, 0.005, 10_000, 10, Integrator::default())?;
    note(
        "toda invariants",
        tr.points.iter().all(|s| {
            let (hh, ff) = (toda_energy(s.x[0], s.x[1], s.p[0], s.p[1]), toda_conserved_f(s.x[0], s.x[1], s.p[0], s.p[1]));
            ((hh - h0) / h0).abs() < 1e-8 && ((ff - f0) / f0).abs() < 1e-8
        }),
    );

    // Binomial Δs identity: the exact Fock-space variance matches √(|β|²(1−|β|²)/N).
    for &(n, b2) in &[(100usize, 0.5f64), (400, 0.3)] {
        let st = coherent_state(Complex64::new((1.0 - b2).sqrt(), 0.0), Complex64::from_polar(b2.sqrt(), 1.0), n)?;
        let (ds, _) = stheta_widths(b2, n)?;
        note("binomial identity", (st.var_s().sqrt() - ds).abs() < 1e-12);
    }
    let dimer = Dimer::new(2.0, 1.0)?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mf = meanfield_evolve(
        &dimer,
        MeanFieldState::new(Complex64::new(r, 0.0), Complex64::from_polar(r, 0.5 * PI))?,
        &MeanFieldRun::sampled(0.1, 2000, 20)?,
    )?;
    note("mean-field conservation", mf.max_energy_drift < 1e-8 && mf.max_norm_error < 1e-10);

    // Leapfrog area preservation.
    let worst_area =
        [(1.0, 0.0), (0.3, 1.7), (-1.2, -0.4)].iter().map(|&(x, p)| (jacobian_det(x, p, 0.01) - 1.0).abs()).fold(0.0, f64::max);
    note("area preservation", worst_area < 1e-12);

    let detail = if failed.is_empty() {
        format!("harmonic deviation {worst:.2e}, area error {worst_area:.1e}")
    } else {
        format!("failed: {}", failed.join(", "))
    };
    Ok(check(failed.is_empty(), detail))
}

fn jacobian_det(x: f64, p: f64, dt: f64) -> f64 {
    let map = |x: f64, p: f64| {
        let mut s = PhasePoint::one(x, p);
        Integrator::Leapfrog.step(&OneD(&Quartic), &mut s, dt);
        (s.x[0], s.p[0])
    };
    let d = |h: f64, dx: f64, dp: f64| {
        let (a, b) = (map(x + h * dx, p + h * dp), map(x - h * dx, p - h * dp));
        ((a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h))
    };
    let rich = |dx: f64, dp: f64| {
        let (c, f) = (d(1e-3, dx, dp), d(5e-4, dx, dp));
        ((4.0 * f.0 - c.0) / 3.0, (4.0 * f.1 - c.1) / 3.0)
    };
    let (xx, px) = rich(1.0, 0.0);
    let (xp, pp) = rich(0.0, 1.0);
    xx * pp - xp * px
}

fn toda_smoke(out: &Path) -> anyhow::Result<Outcome> {
    let dir = cmd_run(&opts("fig4_toda.toml", out))?;
    let e = read_json(dir.join("ehrenfest.json"))?;
    let tau = num(&e, "/fit/tau")?;
    let peaks = num(&e, "/fit/n_peaks")?;
    let relative = e["deviation"].as_str() == Some("relative");
    let norm = num(&read_json(dir.join("summary.json"))?, "/max_norm_error")?;
    Ok(check(
        relative && tau.is_finite() && tau > 0.0 && peaks >= 4.0 && norm < 1e-10,
        format!("relative deviation, tau {tau:.2} from {peaks} peaks, norm error {norm:.1e}"),
    ))
}

fn toda_sweep(out: &Path) -> anyhow::Result<Outcome> {
    let dir = cmd_sweep(&opts("fig4_toda.toml", out))?;
    let slope = num(&read_json(dir.join("sweep.json"))?, "/fit/slope")?;
    Ok(check((slope - TODA_SLOPE).abs() <= TODA_SLOPE_TOL, format!("slope {slope:.3} (0.50 ± 0.07)")))
}

/// Module-level postcondition: a fresh Wigner sample binned on Planck cells
/// against the Husimi density of the same packet.
fn wigner_vs_husimi(_: &Path) -> anyhow::Result<Outcome> {
    let h = hb(0.03);
    let (x0, p0) = (0.3, 0.9);
    let grid = Grid::One(Axis::new(-2.5, 2.5, 1024)?);
    let pg = PlanckGrid::covering((-2.2, 2.2), (-3.0, 3.0), h)?;
    let sample = sample_wigner(&[x0], &[p0], h, 100_000, 17)?;
    let classical = ensemble_density(&sample.points, &pg)?;
    let quantum = husimi_density(&gaussian_packet(grid, &[x0], &[p0], h)?, &pg)?;
    let l1 = density_distance(&classical, &quantum)?;
    let peaked = classical.argmax() == quantum.argmax();
    // Exact cell integrals of the two Gaussians, N(·, ℏ/2) and N(·, ℏ) per axis.
    let cells = |c: f64, lo: f64, n: usize, d: f64, s: f64| -> Vec<f64> {
        let f = |x: f64| 0.5 * (1.0 + libm::erf((x - c) / (s * std::f64::consts::SQRT_2)));
        (0..n).map(|i| f(lo + (i + 1) as f64 * d) - f(lo + i as f64 * d)).collect()
    };
    let (sw, sh) = ((h.get() / 2.0).sqrt(), h.get().sqrt());
    let (wx, wp) = (cells(x0, pg.x_min, pg.nx, pg.dx, sw), cells(p0, pg.p_min, pg.np, pg.dp, sw));
    let (hx, hp) = (cells(x0, pg.x_min, pg.nx, pg.dx, sh), cells(p0, pg.p_min, pg.np, pg.dp, sh));
    let exact: f64 =
        (0..pg.nx).flat_map(|i| (0..pg.np).map(move |j| (i, j))).map(|(i, j)| (wx[i] * wp[j] - hx[i] * hp[j]).abs()).sum();
    Ok(check(
        peaked && l1 < WIGNER_HUSIMI_MAX,
        format!("L1 {l1:.3} (< 0.15), exact Gaussian cell integrals give {exact:.3}, same peak cell: {peaked}"),
    ))
}

fn main() -> ExitCode {
    let extended = std::env::var("EHRENFEST_EXTENDED").is_ok_and(|v| v == "1");
    let mut gating: Vec<(&str, Criterion)> = vec![
        ("1 quartic Ehrenfest scaling", quartic_scaling),
        ("2 Ehrenfest time point value", ehrenfest_point),
        ("3 revival time and half revival", revival),
        ("4 quantum vs ensemble", ensemble_gap),
        ("5 closed-form table", closed_form_table),
        ("6 Bose scaling", bose_scaling),
        ("7 uncertainty identity", uncertainty),
        ("8 property suite", property_suite),
        ("9 Toda smoke test", toda_smoke),
    ];
    if extended {
        gating.push(("9 Toda sweep (extended)", toda_sweep));
    }
    // Reported but not gating: the smoothing-width gap on Planck cells exceeds
    // the bound for any adequate sample size.
    let advisory: Vec<(&str, Criterion)> = vec![("Wigner sample vs Husimi density", wigner_vs_husimi)];

    let scratch = tempfile::tempdir().expect("temporary directory");
    let mut all_ok = true;
    let mut run = |i: usize, name: &str, f: Criterion, gate: bool| {
        let out = scratch.path().join(format!("c{i}"));
        let started = Instant::now();
        let (pass, detail) = match f(&out) {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        let tag = if pass { "PASS" } else { "FAIL" };
        let suffix = if gate { "" } else { " [advisory]" };
        println!("{tag} {name}: {detail} ({:.1} s){suffix}", started.elapsed().as_secs_f64());
        if gate && !pass {
            all_ok = false;
        }
    };
    for (i, (name, f)) in gating.iter().enumerate() {
        run(i, name, *f, true);
    }
    for (i, (name, f)) in advisory.iter().enumerate() {
        run(100 + i, name, *f, false);
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
