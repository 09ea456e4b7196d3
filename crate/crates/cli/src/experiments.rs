//! The seven experiments behind the subcommands. Each returns its tables,
//! optional snapshots and checks; persistence lives in [`crate::run`].

use flockmf::coupling::{observable_error, CouplingRun, Observable};
use flockmf::dynamics::{paired_inequality_residuals, simulate, SimOptions, TrajectoryRecord};
use flockmf::io::{trajectory_table, Table};
use flockmf::lemma::{
    envelope_report_on, lyapunov_series, sample_grid, solve_saturated_on, standard_grid, ComparisonSystem, Drift,
    EnvelopeReport, Functional, SourceTerm,
};
use flockmf::meanfield::{
    empirical_cauchy_experiment, kinetic_diameter_experiment, poc_experiment, stability_experiment, PocConfig,
    StabilityOptions,
};
use flockmf::metrics::{calibrate_envelope, fit_power_law, linear_fit};
use flockmf::model::Regime;
use flockmf::rng::{stream, TAG_INITIAL, TAG_REFERENCE};
use flockmf::stochastic::{coupled_sweep, exponential_moment_c0, CouplingConfig};
use flockmf::{AgentEnsemble, KernelSpec};
use rand::Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind, Pairing};
use crate::run::Check;
use crate::CliError;

/// Everything an experiment produces.
#[derive(Default)]
pub struct Outputs {
    pub tables: Vec<(String, Table)>,
    pub snapshots: Vec<(String, AgentEnsemble)>,
    pub checks: Vec<Check>,
}

impl Outputs {
    fn table(&mut self, name: &str, t: Table) {
        self.tables.push((name.into(), t));
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    match cfg.experiment {
        ExperimentKind::Simulate => run_simulate(cfg),
        ExperimentKind::FlockingRates => run_rates(cfg),
        ExperimentKind::Stability => run_stability(cfg),
        ExperimentKind::Cauchy => run_cauchy(cfg),
        ExperimentKind::Poc => run_poc(cfg),
        ExperimentKind::StochasticCoupling => run_stochastic(cfg),
        ExperimentKind::LemmaLab => run_lemmas(cfg),
    }
}

fn initial(cfg: &ExperimentConfig) -> AgentEnsemble {
    cfg.initial.sample(cfg.run.n.unwrap_or(1), cfg.model.d, cfg.seed, &[TAG_INITIAL])
}

fn sim_options(cfg: &ExperimentConfig) -> SimOptions {
    SimOptions { store_snapshots: cfg.output.snapshots, ..SimOptions::with_control(cfg.step_control()) }
}

fn max_increase(xs: &[f64]) -> f64 {
    xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// Checks every deterministic trajectory must satisfy.
fn trajectory_checks(rec: &TrajectoryRecord, out: &mut Outputs) {
    let v = rec.velocity();
    out.checks.push(Check::at_most("velocity_diameter_nonincreasing", max_increase(&v), 1e-9, "V(t) <= V(s), t >= s"));
    let d = rec.spatial();
    let growth = rec.times.iter().zip(&d).map(|(t, x)| x - d[0] - v[0] * t).fold(f64::NEG_INFINITY, f64::max);
    out.checks.push(Check::at_most("spatial_growth_bound", growth, 1e-9 * (1.0 + d[0]), "D(t) <= D(0) + V(0) t"));
    let res = paired_inequality_residuals(rec);
    let scale = rec.diameters.windows(2).map(|w| (w[1].velocity - w[0].velocity).abs() / (w[1].t - w[0].t)).fold(0.0, f64::max);
    let worst = res.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.checks.push(Check::at_most(
        "paired_inequality",
        worst,
        1e-6 * scale + 1e-12,
        "V' <= -2^(2-p) phi(D) V^(p-1)",
    ));
}

/// `|v1 − v2|(t)` of two agents with `φ ≡ 1`.
pub fn two_particle_gap(w0: f64, p: f64, t: f64) -> f64 {
    if p == 2.0 {
        w0 * (-t).exp()
    } else {
        (w0.powf(2.0 - p) + (p - 2.0) * t).powf(-1.0 / (p - 2.0))
    }
}

fn closed_form_applies(cfg: &ExperimentConfig) -> bool {
    let m = &cfg.model;
    cfg.run.n == Some(2) && m.alpha == 0.0 && m.sigma2 == 0.0 && !m.domain.is_torus() && m.kernel == flockmf::kernels::KernelForm::PowerLaw
}

fn run_simulate(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let params = cfg.model_params();
    let init = initial(cfg);
    let rec = simulate(&init, &params, cfg.run.t_end, &cfg.output.sampling, &sim_options(cfg))?;
    let mut out = Outputs::default();
    let mut table = trajectory_table(&rec, false);
    if closed_form_applies(cfg) {
        let w0 = rec.diameters[0].velocity;
        let exact: Vec<f64> = rec.times.iter().map(|t| two_particle_gap(w0, cfg.model.p, *t)).collect();
        let err = rec.velocity().iter().zip(&exact).map(|(v, e)| (v - e).abs() / e).fold(0.0, f64::max);
        out.checks.push(Check::at_most("two_particle_closed_form", err, 1e-6, "(w0^(2-p) + (p-2) t)^(-1/(p-2))"));
        table = table.column("V_exact", exact);
    }
    trajectory_checks(&rec, &mut out);
    out.table("trajectory.csv", table);
    if let Some(last) = rec.last_snapshot() {
        out.snapshots.push(("final.fmf".into(), last.clone()));
    }
    Ok(out)
}

fn run_rates(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let params = cfg.model_params();
    let init = initial(cfg);
    let window = cfg.run.window.map(|[a, b]| (a, b));
    let r = kinetic_diameter_experiment(&init, &params, cfg.run.t_end, &cfg.output.sampling, &sim_options(cfg), window)?;
    let mut out = Outputs::default();
    let p = cfg.model.p;
    let tol = cfg.run.rate_tolerance;
    let mut table = trajectory_table(&r.record, false).meta("v_exponent_fit", r.v_fit.exponent);
    if let Some(e) = r.table.v_exponent {
        table = table.meta("v_exponent_theory", e);
    }
    if let Some(err) = r.v_exponent_error {
        if p != 3.0 {
            out.checks.push(Check::at_most(
                "v_exponent",
                err,
                tol,
                format!("V ~ <t>^{}, fitted {:.4}", r.table.v_exponent.unwrap(), r.v_fit.exponent),
            ));
        }
    }
    if let Some(c) = &r.compensated_fit {
        table = table.meta("compensated_slope", c.exponent);
        out.checks.push(Check::at_most(
            "compensated_slope",
            c.exponent.abs(),
            tol,
            format!("<t> V / (log<t>)^{} ~ const", r.table.v_log_power),
        ));
    }
    if p > 2.0 && p < 3.0 && params.regime() == Regime::FatPLt3 {
        out.checks.push(Check::at_most("spatial_plateau", r.d_final_decade_growth, 0.01, "D(t) bounded: final-decade growth"));
    }
    trajectory_checks(&r.record, &mut out);
    out.table("trajectory.csv", table);
    Ok(out)
}

fn run_stability(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let params = cfg.model_params();
    let mu = initial(cfg);
    let pairing = cfg.run.pairing.clone().unwrap_or(Pairing::VelocityShift { shift: 0.1 });
    let (nu, spec) = match pairing {
        Pairing::VelocityShift { shift } => {
            let mut nu = mu.clone();
            nu.velocities.iter_mut().step_by(cfg.model.d).for_each(|v| *v += shift);
            (nu, format!("mu0 with v_1 += {shift}"))
        }
        Pairing::Independent => (
            cfg.initial.sample(mu.n(), cfg.model.d, cfg.seed, &[TAG_INITIAL, 1]),
            "independent sample".to_string(),
        ),
    };
    let opts = StabilityOptions {
        sim: SimOptions::with_control(cfg.step_control()),
        window: cfg.run.window.map(|[a, b]| (a, b)),
        support: None,
        slack: cfg.run.slack,
        mu0_spec: "initial sample".into(),
        nu0_spec: spec,
    };
    let r = stability_experiment(&mu, &nu, &params, cfg.run.t_end, &cfg.output.sampling, &opts)?;
    let mut out = Outputs::default();
    let mut table = Table::new()
        .meta("regime", format!("{:?}", r.regime))
        .column("t", r.times.clone())
        .column("w1", r.w1_series.clone())
        .column("ratio", r.ratio.clone());
    match &r.envelope {
        Some(env) => {
            let c = env.check.constant;
            let bound: Vec<f64> = r
                .times
                .iter()
                .map(|t| {
                    let (pre, g) = env.shape.parts(*t);
                    c * pre * (env.c_bar * g.unwrap_or(0.0)).exp()
                })
                .collect();
            table = table.meta("shape", format!("{:?}", env.shape)).meta("c_bar", env.c_bar).meta("constant", c).column("envelope", bound);
            out.checks.push(Check::at_most(
                "stability_envelope",
                env.check.worst_ratio,
                env.check.slack,
                format!("{:?} with C = {c:.4e}, C_bar = {:.4e} on [{}, {}]", env.shape, env.c_bar, env.window.0, env.window.1),
            ));
        }
        None => {
            let m = r.w1_series.iter().copied().fold(0.0, f64::max);
            out.checks.push(Check::at_most("identical_data_stay_identical", m, 0.0, "W1(mu_t, nu_t) = 0"));
        }
    }
    out.table("stability.csv", table);
    Ok(out)
}

fn run_cauchy(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let params = cfg.model_params();
    let n_list = cfg.run.n_list.clone().unwrap_or_default();
    let times = cfg.sample_times();
    let r = empirical_cauchy_experiment(&cfg.initial, &params, &n_list, &times, &SimOptions::with_control(cfg.step_control()), cfg.seed)?;
    let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
    for i in 0..n_list.len() {
        for j in i + 1..n_list.len() {
            cols.push((format!("w1_{}_{}", n_list[i], n_list[j]), (0..r.times.len()).map(|t| r.at(t, i, j)).collect()));
        }
    }
    let mut table = Table::new().meta("fitted_rate", r.fitted_rate).column("t", r.times.clone());
    for (name, c) in cols {
        table = table.column(name, c);
    }
    let mut out = Outputs::default();
    out.checks.push(Check::at_most(
        "cauchy_envelope",
        r.worst_ratio,
        r.slack,
        format!("W1(t) <= W1(0) exp({:.4e} t)", r.fitted_rate),
    ));
    out.table("cauchy.csv", table);
    Ok(out)
}

fn series_columns(mut table: Table, label: &str, n: usize, mean: &[f64], se: &[f64]) -> Table {
    table = table.column(format!("{label}_{n}"), mean.to_vec());
    table.column(format!("{label}_se_{n}"), se.to_vec())
}

fn initial_zero_check(runs: &[CouplingRun], out: &mut Outputs) {
    let m = runs
        .iter()
        .flat_map(|r| r.replica_ex.iter().chain(&r.replica_ev).map(|row| row[0].abs()))
        .fold(0.0, f64::max);
    out.checks.push(Check::at_most("initial_coupling_zero", m, 0.0, "P(0) = K(0) = 0"));
}

fn run_poc(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let params = cfg.model_params();
    let r = &cfg.run;
    let fit_time = r.fit_times.as_ref().unwrap()[0];
    let pc = PocConfig {
        n_list: r.n_list.clone().unwrap(),
        replicas: r.replicas.unwrap(),
        reference_size: r.reference_size.unwrap(),
        tracked: r.tracked,
        k: r.k,
        times: r.times.clone().unwrap(),
        fit_time,
        control: cfg.step_control(),
        sampler: cfg.initial.clone(),
        seed: cfg.seed,
    };
    let rep = poc_experiment(&params, &pc)?;
    let mut out = Outputs::default();
    initial_zero_check(&rep.runs, &mut out);
    let times = rep.runs[0].times.clone();
    let mut series = Table::new().meta("k", rep.k).column("t", times.clone());
    for run in &rep.runs {
        let (p, k, q) = (run.p_series(), run.k_series(), run.proxy(rep.k));
        series = series_columns(series, "P", run.n, &p.mean, &p.se);
        series = series_columns(series, "K", run.n, &k.mean, &k.se);
        series = series_columns(series, "proxy", run.n, &q.mean, &q.se);
        if params.p > 2.0 && params.p < 3.0 && cfg.run.t_end >= 100.0 {
            let t_end = cfg.run.t_end;
            let pf = fit_power_law(&times, &p.mean, Some((t_end / 10.0, t_end)))?;
            out.checks.push(Check::at_most(&format!("potential_growth_n{}", run.n), pf.exponent, 2.1, "P(t) <~ <t>^2"));
            let kc = calibrate_envelope(&times, &k.mean, t_end / 2.0, cfg.run.slack)?;
            out.checks.push(Check::at_most(&format!("kinetic_bounded_n{}", run.n), kc.worst_ratio, kc.slack, format!("K(t) <= C, C = {:.4e}", kc.constant)));
        }
        if params.p >= 3.0 && params.regime() != Regime::General {
            if let Some(c) = log_concavity(&times, &q.mean)? {
                out.checks.push(Check::at_most(
                    &format!("log_proxy_subexponential_n{}", run.n),
                    c.0,
                    c.1,
                    "log proxy concave in t: late slope <= early slope",
                ));
            }
        }
    }
    out.table("coupling.csv", series);
    let ns: Vec<f64> = rep.proxy_at_fit.iter().map(|q| q.n as f64).collect();
    let mut scaling = Table::new()
        .meta("fit_time", fit_time)
        .column("n", ns)
        .column("proxy", rep.proxy_at_fit.iter().map(|q| q.mean).collect())
        .column("proxy_se", rep.proxy_at_fit.iter().map(|q| q.se).collect());
    if let Some((slope, se, _)) = rep.slope_fit {
        scaling = scaling.meta("slope", slope).meta("slope_se", se);
        let [lo, hi] = r.slope_range;
        out.checks.push(Check::within("proxy_slope", slope, lo, hi, format!("proxy ~ N^(-1/2) at t = {fit_time}")));
    }
    out.table("scaling.csv", scaling);
    for m in &rep.marginal_checks {
        out.checks.push(Check::new(
            &format!("marginal_w2_n{}", m.n),
            m.passed,
            m.w2,
            format!("<= {:.4e}", m.tolerance),
            "W2(k-marginal, mean-field law) <= proxy + 3 se",
        ));
    }
    out.checks.push(Check::at_most("potential_rate", rep.potential_rate_excess, 0.0, "d sqrt(P)/dt <= sqrt(K)"));
    Ok(out)
}

/// Late-half slope of `log y` against `t` and the early-half slope plus 10%,
/// over the positive samples; `None` with fewer than four of them.
fn log_concavity(t: &[f64], y: &[f64]) -> Result<Option<(f64, f64)>, CliError> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(s, v)| **s > 0.0 && **v > 0.0).map(|(s, v)| (*s, v.ln())).collect();
    if pts.len() < 4 {
        return Ok(None);
    }
    let half = pts.len() / 2;
    let slope = |p: &[(f64, f64)]| -> Result<f64, CliError> {
        let (x, y): (Vec<f64>, Vec<f64>) = p.iter().copied().unzip();
        Ok(linear_fit(&x, &y)?.0)
    };
    let (early, late) = (slope(&pts[..half])?, slope(&pts[half..])?);
    Ok(Some((late, early + 0.1 * early.abs())))
}

/// Fitted `N` exponent of `E` at sample `i`.
fn n_exponent(runs: &[CouplingRun], i: usize) -> Result<f64, CliError> {
    let lx: Vec<f64> = runs.iter().map(|r| (r.n as f64).ln()).collect();
    let ly: Vec<f64> = runs.iter().map(|r| r.e().mean[i].ln()).collect();
    Ok(linear_fit(&lx, &ly)?.0)
}

fn run_stochastic(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let params = cfg.model_params();
    let r = &cfg.run;
    let observables = r.observables.iter().map(|s| Observable::parse(s)).collect::<Result<Vec<_>, _>>()?;
    let cc = CouplingConfig {
        n_list: r.n_list.clone().unwrap(),
        replicas: r.replicas.unwrap(),
        agent_budget: r.agent_budget,
        reference_size: r.reference_size.unwrap(),
        tracked: r.tracked,
        k: r.k,
        dt: r.dt.unwrap(),
        t_end: r.t_end,
        sample_every: r.sample_every.unwrap(),
        observables: observables.clone(),
        positivity_floor: 1e-6,
        sampler: cfg.initial.clone(),
        seed: cfg.seed,
    };
    let runs = coupled_sweep(&params, &cc)?;
    let mut out = Outputs::default();
    initial_zero_check(&runs, &mut out);
    let times = runs[0].times.clone();
    let mut series = Table::new().column("t", times.clone());
    for run in &runs {
        let e = run.e();
        series = series_columns(series, "E", run.n, &e.mean, &e.se);
        for o in &observables {
            let err = observable_error(run, &o.id())?;
            series = series_columns(series, &format!("obs[{}]", o.id()), run.n, &err.mean, &err.se);
            let s = run.observables.iter().find(|s| s.observable == *o).unwrap();
            let want = s.reference_variance[0] / run.n as f64;
            let z = (err.mean[0] - want).abs() / err.se[0].max(f64::MIN_POSITIVE);
            out.checks.push(Check::at_most(&format!("variance_identity_{}_n{}", o.id(), run.n), z, 3.0, "E|gap(0)|^2 = Var/N, in standard errors"));
        }
        if let Some(pos) = run.positivity {
            out.checks.push(Check::at_most(&format!("strength_positivity_n{}", run.n), pos.violations as f64, 0.0, format!("s_i >= {}", pos.floor)));
        }
        if let Some(m) = run.martingale() {
            let z = m.mean.iter().zip(&m.se).map(|(a, s)| if *s > 0.0 { a.abs() / s } else { a.abs() / f64::MIN_POSITIVE.max(a.abs()) }).fold(0.0, f64::max);
            out.checks.push(Check::at_most(&format!("martingale_mean_n{}", run.n), z, 4.0, "noise-mismatch martingale has zero mean"));
        }
    }
    out.table("coupling.csv", series);
    let fit_times = r.fit_times.clone().unwrap();
    let idx: Vec<usize> = fit_times.iter().map(|t| times.iter().position(|s| (s - t).abs() < 1e-9).unwrap()).collect();
    let mut scaling = Table::new().column("n", runs.iter().map(|r| r.n as f64).collect());
    let mut exps = Vec::new();
    for (&t, &i) in fit_times.iter().zip(&idx) {
        let e: Vec<f64> = runs.iter().map(|r| r.e().mean[i]).collect();
        scaling = scaling.column(format!("E_t{t}"), e.clone()).column(format!("E_se_t{t}"), runs.iter().map(|r| r.e().se[i]).collect());
        let worst = e.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        if runs.len() >= 2 && t > 0.0 {
            out.checks.push(Check::new(&format!("decreasing_in_n_t{t}"), worst < 1.0, worst, "< 1", "E(t) strictly decreasing in N"));
            let x = n_exponent(&runs, i)?;
            scaling = scaling.meta(format!("exponent_t{t}"), x);
            exps.push(x);
        }
    }
    if exps.len() >= 2 {
        let gap = exps[0] - exps[exps.len() - 1];
        out.checks.push(Check::new("exponent_degrades", gap < 0.0, gap, "< 0", "N exponent at the first fit time below the last (N^-exp(-Ct))"));
    }
    let reference = cfg.initial.sample(cc.reference_size, cfg.model.d, cfg.seed, &[TAG_REFERENCE]);
    scaling = scaling.meta("c0_reference", exponential_moment_c0(&reference, cfg.model.p, 0.05));
    out.table("scaling.csv", scaling);
    Ok(out)
}

fn run_lemmas(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let times = sample_grid(cfg.run.t_end, cfg.run.grid_samples);
    let mut grid = standard_grid();
    for alpha in [0.0, 0.25, 0.5] {
        for c in [0.1, 1.0, 10.0] {
            for a0 in [0.0, 1.0, 5.0] {
                for b0 in [0.0, 1.0, 5.0] {
                    for g in [SourceTerm::Zero, SourceTerm::Power { coeff: 1.0, exponent: -2.0 }] {
                        grid.push(ComparisonSystem::log_corrected(alpha, c, a0, b0, g));
                    }
                }
            }
        }
    }
    let mut rng = stream(cfg.seed, &[TAG_INITIAL]);
    for k in 0..126 {
        let c = 10f64.powf(rng.random_range(-1.0..1.0));
        let (a0, b0) = (rng.random_range(0.0..5.0), rng.random_range(0.0..5.0));
        let g = if rng.random_bool(0.5) {
            SourceTerm::Zero
        } else {
            SourceTerm::Power { coeff: rng.random_range(0.0..2.0), exponent: rng.random_range(-3.0..-1.0) }
        };
        grid.push(if k % 2 == 0 {
            ComparisonSystem::power(rng.random_range(0.0..3.0), c, a0, b0, g)
        } else {
            ComparisonSystem::log_corrected(rng.random_range(0.0..0.5), c, a0, b0, g)
        });
    }
    let reports = grid.par_iter().map(|s| envelope_report_on(s, &times)).collect::<Result<Vec<_>, _>>()?;
    let violations = reports.iter().filter(|r| !r.passed()).count();
    let mut out = Outputs::default();
    out.checks.push(Check::at_most(
        "envelope_domination",
        violations as f64,
        0.0,
        format!("{} systems, saturated solution below envelope (rel 1e-6)", grid.len()),
    ));
    let mut incr = Vec::new();
    for (beta, which) in [(1.0, Functional::L2), (2.0, Functional::L3)] {
        for c in [0.1, 1.0, 10.0] {
            let s = lyapunov_series(&ComparisonSystem::power(beta, c, 1.0, 1.0, SourceTerm::Zero), &times, which)?;
            incr.push((which, s.max_increase() / s.values[0].abs().max(1.0)));
        }
    }
    for alpha in [0.0, 0.25, 0.5] {
        let s = lyapunov_series(&ComparisonSystem::log_corrected(alpha, 1.0, 1.0, 1.0, SourceTerm::Zero), &times, Functional::L4)?;
        incr.push((Functional::L4, s.max_increase() / s.values[0].abs().max(1.0)));
    }
    for f in [Functional::L2, Functional::L3, Functional::L4] {
        let worst = incr.iter().filter(|(w, _)| *w == f).map(|(_, x)| *x).fold(f64::NEG_INFINITY, f64::max);
        out.checks.push(Check::at_most(&format!("lyapunov_{f:?}_nonincreasing"), worst, 1e-8, "g = 0"));
    }
    let mut gap: f64 = 0.0;
    for c in [0.1, 1.0, 10.0] {
        let a = solve_saturated_on(&ComparisonSystem::log_corrected(0.0, c, 1.0, 1.0, SourceTerm::Zero), &times)?;
        let b = solve_saturated_on(&ComparisonSystem::power(2.0, c, 1.0, 1.0, SourceTerm::Zero), &times)?;
        for i in 0..times.len() {
            gap = gap.max((a.a[i] - b.a[i]).abs() / b.a[i].abs().max(1.0)).max((a.b[i] - b.b[i]).abs() / b.b[i].abs().max(1.0));
        }
    }
    out.checks.push(Check::at_most("log_corrected_alpha0_is_critical", gap, 1e-9, "alpha = 0 reduces to beta = 2"));
    let beta = |s: &ComparisonSystem| match s.drift {
        Drift::Power { beta } => beta,
        Drift::LogCorrected { .. } => f64::NAN,
    };
    let log_alpha = |s: &ComparisonSystem| match s.drift {
        Drift::LogCorrected { alpha } => alpha,
        Drift::Power { .. } => f64::NAN,
    };
    let source = |s: &ComparisonSystem| match s.g {
        SourceTerm::Power { coeff, exponent } => (coeff, exponent),
        _ => (0.0, 0.0),
    };
    let col = |f: &dyn Fn(&EnvelopeReport) -> f64| reports.iter().map(f).collect::<Vec<f64>>();
    let table = Table::new()
        .meta("t_end", cfg.run.t_end)
        .meta("samples", cfg.run.grid_samples)
        .column("beta", col(&|r| beta(&r.system)))
        .column("log_alpha", col(&|r| log_alpha(&r.system)))
        .column("c", col(&|r| r.system.c))
        .column("a0", col(&|r| r.system.a0))
        .column("b0", col(&|r| r.system.b0))
        .column("g_coeff", col(&|r| source(&r.system).0))
        .column("g_exponent", col(&|r| source(&r.system).1))
        .column("worst_relative_margin", col(&|r| r.worst_relative_margin()))
        .column("passed", col(&|r| if r.passed() { 1.0 } else { 0.0 }));
    out.table("grid.csv", table);
    Ok(out)
}

/// Kernel with compact support, used to exercise the general regime.
pub fn compact_kernel() -> KernelSpec {
    KernelSpec::table(0.0, vec![0.0, 0.5, 1.0], vec![1.0, 1.0, 0.0])
}
