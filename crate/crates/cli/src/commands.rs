//! The four subcommands. Each validates its whole configuration before the
//! output directory is created.

use std::io;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde_json::{json, Value};

use delta_lab::acceptance::{run_suite, EIGEN_TOL, JUMP_TOL, MASS_TOL, ROUTE_TOL};
use delta_lab::charge::{solve, ChargeSolution, Method, SolverConfig};
use delta_lab::coupling::{chi, CouplingPath, SUPPORT};
use delta_lab::dyadic::{build_partition, BernsteinLine, ProductLaw};
use delta_lab::fixtures::{Problem, Resolution};
use delta_lab::oracles::{bound_state_evolution, GaussianPacket};
use delta_lab::regularity::{
    bernstein_battery, chgvar_battery, cutoff_scaling, default_dilations, default_gaps, dilation_scaling_check,
    product_law_battery, synthesize_alpha_with, trace_bound_battery, RatioBattery, ScalingReport,
    SynthesisOptions,
};
use delta_lab::signal::{Axis, ComplexSignal, UniformGrid};
use delta_lab::wavefield::{
    attach_jump_residuals, mass_and_h1, reconstruct_duhamel, reconstruct_fourier, WaveField,
};
use delta_lab::LabError;

use crate::artifacts::{num, strip_hash_lines, Artifacts};
use crate::config::{fixture_by_name, ConfigError, CouplingSpec, InitialSpec, MethodSpec, RouteSpec, RunConfig};

pub enum Failure {
    Config(ConfigError),
    Numerical { stage: String, error: LabError },
    /// Computations finished but thresholds or criteria failed.
    Checks(Vec<String>),
    Io(io::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

fn stage(name: &str) -> impl Fn(LabError) -> Failure + '_ {
    move |error| Failure::Numerical { stage: name.to_string(), error }
}

fn config_err(e: LabError) -> ConfigError {
    ConfigError(e.to_string())
}

/// A problem built from the configuration, with its solver settings.
pub struct Setup {
    pub problem: Problem,
    pub solver: SolverConfig<f64>,
    pub method: Method,
}

fn coupling(cfg: &RunConfig) -> Result<(CouplingPath<f64>, String), ConfigError> {
    let recorded = |horizon: f64| UniformGrid::spanning(-horizon / 2.0, horizon / 2.0, 257).map_err(config_err);
    Ok(match &cfg.coupling {
        CouplingSpec::Zero { horizon } => (CouplingPath::zero(recorded(*horizon)?, *horizon).map_err(config_err)?, "zero".into()),
        CouplingSpec::Constant { value, horizon } => (
            CouplingPath::constant(*value, recorded(*horizon)?, *horizon).map_err(config_err)?,
            format!("constant_{value}"),
        ),
        CouplingSpec::Synthesized { nu, offset, amplitude, support, samples } => {
            let opts = SynthesisOptions { samples: *samples, offset: *offset, amplitude: *amplitude };
            let a = synthesize_alpha_with(*nu, cfg.seed, *support, opts).map_err(config_err)?;
            (a, format!("synthesized_h{nu}"))
        }
        CouplingSpec::Fixture { name } => (fixture_by_name(name)?.coupling().map_err(config_err)?, name.clone()),
    })
}

fn datum(cfg: &RunConfig, space: UniformGrid<f64>) -> Result<(ComplexSignal<f64>, String), ConfigError> {
    Ok(match &cfg.initial {
        InitialSpec::Gaussian { width, center, momentum } => {
            let p = GaussianPacket::new(*width, *center, *momentum).map_err(config_err)?;
            (p.at(0.0, space), "gaussian".into())
        }
        InitialSpec::BoundState { kappa } => {
            let k = *kappa;
            (ComplexSignal::from_real_fn(space, Axis::Space, |x| (-k * x.abs()).exp()), "bound_state".into())
        }
        InitialSpec::Csv { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            let u0 = ComplexSignal::<f64>::read_csv(strip_hash_lines(&text).as_bytes()).map_err(config_err)?;
            let g = u0.grid();
            let tol = 1e-9 * space.step();
            if g.count() != space.count() || (g.start() - space.start()).abs() > tol || (g.step() - space.step()).abs() > tol {
                return Err(ConfigError(format!(
                    "{}: samples are not on the configured space grid ({} nodes from {})",
                    path.display(),
                    space.count(),
                    space.start()
                )));
            }
            (u0, "csv".into())
        }
    })
}

pub fn setup(cfg: &RunConfig, resolution: Resolution) -> Result<Setup, ConfigError> {
    cfg.validate()?;
    let space = resolution.space().map_err(config_err)?;
    let (alpha, a_label) = coupling(cfg)?;
    let (u0, u_label) = datum(cfg, space)?;
    let mut solver = SolverConfig::new(resolution.charge().map_err(config_err)?);
    solver.tol = cfg.solver.tol;
    solver.max_iterations = cfg.solver.max_iterations;
    solver.min_window = cfg.solver.min_window;
    solver.initial_window = cfg.solver.initial_window;
    solver.validate().map_err(config_err)?;
    resolution.times().map_err(config_err)?;
    let method = match cfg.solver.method {
        MethodSpec::March => Method::March,
        MethodSpec::Picard => Method::Picard,
    };
    let problem = Problem { label: format!("{a_label}/{u_label}"), alpha, u0, resolution };
    Ok(Setup { problem, solver, method })
}

impl Setup {
    fn charge(&self) -> Result<ChargeSolution<f64>, Failure> {
        solve(&self.problem.alpha, &self.problem.u0, &self.solver, self.method).map_err(stage("charge"))
    }

    fn field(&self, q: &ChargeSolution<f64>, duhamel: bool) -> Result<WaveField<f64>, Failure> {
        let times = self.problem.resolution.times().map_err(stage("reconstruct"))?;
        let mut f = if duhamel {
            reconstruct_duhamel(&self.problem.u0, q, &times)
        } else {
            reconstruct_fourier(&self.problem.u0, q, &times)
        }
        .map_err(stage("reconstruct"))?;
        attach_jump_residuals(&mut f, &self.problem.alpha).map_err(stage("jump_residual"))?;
        Ok(f)
    }

    /// `Some(kappa)` when the datum is the bound state of the configured constant coupling.
    fn bound_state_kappa(&self, cfg: &RunConfig) -> Option<f64> {
        match (&cfg.initial, &cfg.coupling) {
            (InitialSpec::BoundState { kappa }, CouplingSpec::Constant { value, .. })
                if (value + 2.0 * kappa).abs() < 1e-12 =>
            {
                Some(*kappa)
            }
            _ => None,
        }
    }
}

fn max_jump(field: &WaveField<f64>) -> f64 {
    field.diagnostics.iter().filter_map(|d| d.jump_residual).fold(0.0, f64::max)
}

fn route_distance(a: &WaveField<f64>, b: &WaveField<f64>) -> Result<f64, Failure> {
    let mut worst = 0.0f64;
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        worst = worst.max(x.relative_distance(y).map_err(stage("route_distance"))?);
    }
    Ok(worst)
}

fn field_json(field: &WaveField<f64>) -> Result<Value, Failure> {
    let d = mass_and_h1(field).map_err(stage("diagnostics"))?;
    let snapshots: Vec<Value> = d
        .snapshots
        .iter()
        .map(|s| {
            json!({
                "time": num(s.time),
                "mass": num(s.mass),
                "h1": num(s.h1),
                "jump_residual": s.jump_residual.map(num),
                "trace_at_0": [num(s.trace_at_0.re), num(s.trace_at_0.im)],
            })
        })
        .collect();
    Ok(json!({
        "route": field.route,
        "mass_drift": num(d.mass_drift),
        "h1_max": num(d.h1_max),
        "modulus_of_continuity": num(d.modulus_of_continuity),
        "max_jump_residual": num(max_jump(field)),
        "snapshots": snapshots,
    }))
}

fn timestamp(started: Instant) -> Value {
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    json!({ "unix_seconds": unix, "elapsed_seconds": started.elapsed().as_secs_f64() })
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let started = Instant::now();
    let s = setup(cfg, cfg.grid.resolution())?;
    let art = Artifacts::create(out, &cfg.hash())?;
    art.json("config.json", json!({ "config": cfg }))?;
    let q = s.charge()?;
    art.csv("q.csv", |w| q.write_csv(w))?;
    let routes: &[bool] = match cfg.solver.route {
        RouteSpec::Fourier => &[false],
        RouteSpec::Duhamel => &[true],
        RouteSpec::Both => &[false, true],
    };
    let mut fields = Vec::new();
    for &duhamel in routes {
        let f = s.field(&q, duhamel)?;
        let name = if duhamel { "duhamel" } else { "fourier" };
        for (k, u) in f.snapshots.iter().enumerate() {
            art.csv(&format!("snapshots/{name}_{k:03}.csv"), |w| u.write_csv(w))?;
        }
        fields.push((name, f));
    }
    let mut per_route = serde_json::Map::new();
    for (name, f) in &fields {
        per_route.insert(name.to_string(), field_json(f)?);
    }
    let distance = match fields.as_slice() {
        [(_, a), (_, b)] => Some(route_distance(a, b)?),
        _ => None,
    };
    art.json(
        "diagnostics.json",
        json!({
            "problem": s.problem.label,
            "charge_residual": num(q.residual),
            "routes": per_route,
            "route_distance": distance.map(num),
        }),
    )?;
    art.json("telemetry.json", json!({ "charge": q.telemetry(), "timestamp": timestamp(started) }))?;
    if cfg.strict {
        let mut failures = Vec::new();
        for (name, f) in &fields {
            let d = mass_and_h1(f).map_err(stage("diagnostics"))?;
            if !(d.mass_drift <= MASS_TOL) {
                failures.push(format!("{name}: mass drift {:.3e} > {MASS_TOL:e}", d.mass_drift));
            }
            let j = max_jump(f);
            if !(j <= JUMP_TOL) {
                failures.push(format!("{name}: jump residual {j:.3e} > {JUMP_TOL:e}"));
            }
        }
        if let Some(d) = distance.filter(|d| !(*d <= ROUTE_TOL)) {
            failures.push(format!("route distance {d:.3e} > {ROUTE_TOL:e}"));
        }
        if !failures.is_empty() {
            return Err(Failure::Checks(failures));
        }
    }
    Ok(())
}

/// Checks of the configured problem run by `verify`.
fn problem_checks(cfg: &RunConfig, s: &Setup) -> Result<(Value, Vec<String>), Failure> {
    let q = s.charge()?;
    let fourier = s.field(&q, false)?;
    let duhamel = s.field(&q, true)?;
    let drift = mass_and_h1(&fourier).map_err(stage("diagnostics"))?.mass_drift;
    let distance = route_distance(&fourier, &duhamel)?;
    let mut failures = Vec::new();
    if !(drift <= MASS_TOL) {
        failures.push(format!("problem: mass drift {drift:.3e} > {MASS_TOL:e}"));
    }
    if !(distance <= ROUTE_TOL) {
        failures.push(format!("problem: route distance {distance:.3e} > {ROUTE_TOL:e}"));
    }
    let mut metrics = json!({ "mass_drift": num(drift), "route_distance": num(distance) });
    if let Some(kappa) = s.bound_state_kappa(cfg) {
        let mut err = 0.0f64;
        for (k, t) in fourier.times.points().enumerate() {
            let exact = bound_state_evolution(-2.0 * kappa, t, fourier.space).map_err(stage("oracle"))?;
            // the oracle is normalized; the datum is not
            let exact = exact.map(|_, v| v / kappa.sqrt());
            err = err.max(fourier.snapshots[k].relative_distance(&exact).map_err(stage("oracle"))?);
        }
        let jump = max_jump(&fourier);
        if !(err <= EIGEN_TOL) {
            failures.push(format!("problem: eigen-evolution error {err:.3e} > {EIGEN_TOL:e}"));
        }
        if !(jump <= JUMP_TOL) {
            failures.push(format!("problem: jump residual {jump:.3e} > {JUMP_TOL:e}"));
        }
        metrics["eigen_error"] = num(err);
        metrics["max_jump_residual"] = num(jump);
    }
    let report = json!({ "problem": s.problem.label, "passed": failures.is_empty(), "metrics": metrics, "failures": failures });
    Ok((report, failures))
}

pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    cfg.validate_verify()?;
    let s = if cfg.verify.problem { Some(setup(cfg, cfg.grid.resolution())?) } else { None };
    let art = Artifacts::create(out, &cfg.hash())?;
    let report = run_suite(&cfg.verify.criteria, |o| println!("{}", o.line()));
    let mut failures: Vec<String> = report
        .outcomes
        .iter()
        .filter(|o| !o.passed)
        .flat_map(|o| {
            let head = format!("criterion {} {}", o.id, o.name);
            if o.failures.is_empty() {
                vec![head]
            } else {
                o.failures.iter().map(|f| format!("{head}: {f}")).collect()
            }
        })
        .collect();
    let problem = match &s {
        Some(s) => {
            let (v, f) = problem_checks(cfg, s)?;
            println!("problem {} {}", s.problem.label, if f.is_empty() { "PASS" } else { "FAIL" });
            failures.extend(f);
            v
        }
        None => Value::Null,
    };
    art.json(
        "verify.json",
        json!({
            "passed": failures.is_empty(),
            "criteria": report.outcomes,
            "problem": problem,
            "failures": failures,
        }),
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failures))
    }
}

/// `log2(e_k / e_{k+1})` for consecutive entries.
fn orders(errors: &[f64]) -> Vec<Option<f64>> {
    (0..errors.len())
        .map(|k| errors.get(k + 1).map(|next| (errors[k] / next).log2()).filter(|o| o.is_finite()))
        .collect()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    cfg.validate_sweep()?;
    let base = cfg.grid.resolution();
    let charge_setups = cfg
        .sweep
        .charge_nodes
        .iter()
        .map(|&n| setup(cfg, Resolution { charge_nodes: n, ..base }))
        .collect::<Result<Vec<_>, _>>()?;
    let space_setups = cfg
        .sweep
        .space_nodes
        .iter()
        .map(|&n| setup(cfg, Resolution { space_nodes: n, ..base }))
        .collect::<Result<Vec<_>, _>>()?;
    let art = Artifacts::create(out, &cfg.hash())?;

    // each point is independent and writes only its own files
    let charges = charge_setups
        .par_iter()
        .map(|s| {
            let q = s.charge()?;
            let n = s.problem.resolution.charge_nodes;
            art.csv(&format!("sweep/charge/q_n{n}.csv"), |w| q.write_csv(w))?;
            Ok(q)
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let charge_errors: Vec<f64> = charges
        .windows(2)
        .map(|w| {
            let fine = w[1].q.values();
            w[0].q.values().iter().enumerate().map(|(k, v)| (v - fine[2 * k]).norm()).fold(0.0, f64::max)
        })
        .collect();
    let charge_orders = orders(&charge_errors);
    art.csv("charge_convergence.csv", |w| {
        writeln!(w, "nodes,step,error,order")?;
        for (k, q) in charges.iter().enumerate() {
            let err = charge_errors.get(k).copied();
            let order = charge_orders.get(k).copied().flatten();
            writeln!(w, "{},{},{},{}", q.q.len(), q.q.grid().step(), opt_cell(err), opt_cell(order))?;
        }
        Ok(())
    })?;

    let points = space_setups
        .par_iter()
        .map(|s| {
            let q = s.charge()?;
            let fourier = s.field(&q, false)?;
            let distance = if cfg.sweep.route_agreement { Some(route_distance(&fourier, &s.field(&q, true)?)?) } else { None };
            // the t = 0 residual measures the datum, not the evolution
            let jump = fourier.diagnostics.iter().skip(1).filter_map(|d| d.jump_residual).fold(0.0, f64::max);
            let drift = mass_and_h1(&fourier).map_err(stage("diagnostics"))?.mass_drift;
            let n = s.problem.resolution.space_nodes;
            let point = json!({
                "space_nodes": n,
                "step": num(s.problem.resolution.space().map_err(stage("grid"))?.step()),
                "max_jump_residual": num(jump),
                "mass_drift": num(drift),
                "route_distance": distance.map(num),
            });
            art.json(&format!("sweep/space/point_n{n}.json"), point.clone())?;
            Ok((n, point, jump, distance))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let jumps: Vec<f64> = points.iter().map(|p| p.2).collect();
    let jump_orders: Vec<Option<f64>> = orders(&jumps);
    art.csv("jump_convergence.csv", |w| {
        writeln!(w, "space_nodes,step,max_jump_residual,order")?;
        for (k, (n, point, jump, _)) in points.iter().enumerate() {
            let order = jump_orders[k];
            writeln!(w, "{n},{},{jump},{}", point["step"], opt_cell(order))?;
        }
        Ok(())
    })?;
    if cfg.sweep.route_agreement {
        art.csv("route_agreement.csv", |w| {
            writeln!(w, "space_nodes,charge_nodes,route_distance")?;
            for (n, _, _, d) in &points {
                writeln!(w, "{n},{},{}", base.charge_nodes, opt_cell(*d))?;
            }
            Ok(())
        })?;
    }
    art.json(
        "sweep.json",
        json!({
            "problem": charge_setups[0].problem.label,
            "charge": {
                "nodes": cfg.sweep.charge_nodes,
                "errors": charge_errors.iter().map(|e| num(*e)).collect::<Vec<_>>(),
                "orders": charge_orders.iter().filter_map(|o| o.map(num)).collect::<Vec<_>>(),
            },
            "space": points.iter().map(|p| p.1.clone()).collect::<Vec<_>>(),
            "jump_orders": jump_orders.iter().filter_map(|o| o.map(num)).collect::<Vec<_>>(),
        }),
    )?;
    Ok(())
}

fn battery_pair(label: &str, coarse: RatioBattery, fine: RatioBattery) -> Value {
    json!({
        "label": label,
        "coarse": coarse,
        "fine": fine,
        "drift": num(coarse.drift(&fine)),
    })
}

fn report_csv(art: &Artifacts, rel: &str, r: &ScalingReport) -> io::Result<()> {
    art.csv(rel, |w| r.write_csv(w))
}

pub fn cmd_lemmas(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    cfg.validate_lemmas()?;
    let l = &cfg.lemmas;
    let art = Artifacts::create(out, &cfg.hash())?;
    let seed = cfg.seed;
    let n = l.nodes;
    let cutoff = l
        .cutoff_nu
        .par_iter()
        .map(|&nu| cutoff_scaling(nu, &default_gaps()).map_err(stage("cutoff_scaling")))
        .collect::<Result<Vec<_>, _>>()?;
    for (nu, r) in l.cutoff_nu.iter().zip(&cutoff) {
        report_csv(&art, &format!("lemmas/cutoff_nu{nu}.csv"), r)?;
    }
    let dilation = l
        .dilation_mu
        .iter()
        .map(|&mu| dilation_scaling_check(chi, SUPPORT, &default_dilations(), mu).map_err(stage("dilation")))
        .collect::<Result<Vec<_>, _>>()?;
    for (mu, r) in l.dilation_mu.iter().zip(&dilation) {
        report_csv(&art, &format!("lemmas/dilation_mu{mu}.csv"), r)?;
    }
    let grid = |len: f64, n: usize| UniformGrid::centered(len, n).map_err(stage("grid"));
    let mut chgvar = Vec::new();
    for &s in &l.chgvar_s {
        let b = |n| chgvar_battery(s, l.samples, grid(4.0, n)?, 1.0, seed).map_err(stage("chgvar"));
        chgvar.push(battery_pair(&format!("chgvar s={s}"), b(n)?, b(2 * n)?));
    }
    let mut trace = Vec::new();
    for &nu in &l.trace_nu {
        let b = |n| trace_bound_battery(nu, l.samples, grid(80.0, n)?, seed).map_err(stage("trace_bound"));
        trace.push(battery_pair(&format!("trace nu={nu}"), b(n)?, b(2 * n)?));
    }
    let mut laws = Vec::new();
    if l.product_laws {
        for law in [ProductLaw::A { s: 0.25 }, ProductLaw::C { s: 0.25, s2: 0.375 }, ProductLaw::D { s: 0.5 }] {
            let b = |n| product_law_battery(law, l.samples, grid(40.0, n)?, seed).map_err(stage("product_law"));
            laws.push(battery_pair(&format!("{law:?}"), b(n)?, b(2 * n)?));
        }
    }
    let mut bernstein = Vec::new();
    if l.bernstein {
        for (line, b_exp) in [(BernsteinLine::Block, 2.0), (BernsteinLine::LowPass, f64::INFINITY)] {
            let b = |n| bernstein_battery(line, 1, 2.0, b_exp, l.samples, grid(40.0, n)?, seed).map_err(stage("bernstein"));
            bernstein.push(battery_pair(&format!("{line:?}"), b(n)?, b(2 * n)?));
        }
    }
    let mut unity = serde_json::Map::new();
    for m in [n, 2 * n] {
        let r = build_partition(&grid(40.0, m)?).map_err(stage("partition"))?.unity_residual();
        unity.insert(m.to_string(), num(r));
    }
    art.json(
        "lemmas.json",
        json!({
            "cutoff": cutoff,
            "dilation": dilation,
            "chgvar": chgvar,
            "trace": trace,
            "product_laws": laws,
            "bernstein": bernstein,
            "unity_residual": unity,
        }),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_of_halving_errors() {
        let o = orders(&[4.0, 1.0, 0.25]);
        assert_eq!(o.len(), 3);
        assert!((o[0].unwrap() - 2.0).abs() < 1e-12);
        assert!((o[1].unwrap() - 2.0).abs() < 1e-12);
        assert!(o[2].is_none());
    }

    #[test]
    fn setup_rejects_bad_grids_before_any_output() {
        let mut cfg = RunConfig::default();
        cfg.grid.space_nodes = 1000;
        assert!(setup(&cfg, cfg.grid.resolution()).is_err());
    }
}
