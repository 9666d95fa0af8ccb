//! Experiment dispatch.

use rayon::prelude::*;
use serde_json::json;
use subradcool_core::baselines::n_independent_optimal;
use subradcool_core::lindblad::{build_liouvillian, cooling_curve, Truncation};
use subradcool_core::motion::{stability_margin, EffectiveModel};
use subradcool_core::scenarios::{
    build_geometry, critical_rate_scan, ensemble_sweep, isolated_target, regime_map, ring_target_cooling, sequential_protocol, subradiant_drive, Geometry, Pipeline,
};
use subradcool_core::spin::{build_spin_hamiltonian, collective_modes, Convention, DriveField, EmitterArray};

use crate::config::{ArrayConfig, Detuning, Experiment, GeometryConfig, PipelineConfig, RunConfig};
use crate::output::{Cell, Table};
use crate::RunError;

/// Tables, a JSON result record and warnings from one experiment.
pub struct Outcome {
    pub atoms: usize,
    pub tables: Vec<Table>,
    pub results: serde_json::Value,
    pub warnings: Vec<String>,
}

pub fn experiment_name(e: &Experiment) -> &'static str {
    match e {
        Experiment::Spectrum => "spectrum",
        Experiment::CoolEffective { .. } => "cool-effective",
        Experiment::CoolFull { .. } => "cool-full",
        Experiment::RegimeMap { .. } => "regime-map",
        Experiment::CriticalRate => "critical-rate",
        Experiment::RingTarget { .. } => "ring-target",
        Experiment::Sequential { .. } => "sequential",
        Experiment::Ensemble { .. } => "ensemble",
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    convention: Convention,
    warnings: Vec<String>,
}

impl Ctx<'_> {
    fn array(&self, array: &ArrayConfig) -> Result<EmitterArray, RunError> {
        Ok(build_geometry(&array.spec(self.cfg.seed)?)?)
    }

    fn drive(&self, array: &EmitterArray) -> Result<DriveField, RunError> {
        let d = &self.cfg.drive;
        Ok(match d.detuning {
            Detuning::Value(delta) => DriveField::new(d.omega, d.direction, delta)?,
            Detuning::Keyword(_) => subradiant_drive(array, d.omega, d.direction, self.convention)?,
        })
    }

    fn warn_effective(&mut self, label: &str, array: &EmitterArray, model: &EffectiveModel, n: &[f64]) {
        let tag = |w: String| if label.is_empty() { w } else { format!("{label}: {w}") };
        let mut ws = model.rates.validity_warnings();
        ws.extend(array.lamb_dicke_warnings(n));
        ws.extend(model.spins.weak_excitation_warning(0.1));
        self.warnings.extend(ws.into_iter().map(tag));
    }

    fn nu_grid(&self, values: &Option<Vec<f64>>) -> Vec<f64> {
        values.clone().unwrap_or_else(|| vec![self.cfg.array.trap.nu_bar()])
    }

    fn array_at(&self, nu: f64) -> Result<EmitterArray, RunError> {
        let a = ArrayConfig { trap: self.cfg.array.trap.with_nu_bar(nu), ..self.cfg.array };
        self.array(&a)
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mut ctx = Ctx { cfg, convention: cfg.convention.into(), warnings: Vec::new() };
    let base = ctx.array(&cfg.array)?;
    let atoms = base.len();
    let (tables, results) = match &cfg.experiment {
        Experiment::Spectrum => spectrum(&mut ctx, &base)?,
        Experiment::CoolEffective { nu_bar_values } => cool_effective(&mut ctx, nu_bar_values)?,
        Experiment::CoolFull { nu_bar_values, samples } => cool_full(&mut ctx, nu_bar_values, *samples)?,
        Experiment::RegimeMap { delta_nu, omega, pipeline } => regime(&mut ctx, delta_nu, omega, *pipeline)?,
        Experiment::CriticalRate => critical(&mut ctx, &base)?,
        Experiment::RingTarget { delta_ts } => ring_target(&mut ctx, *delta_ts)?,
        Experiment::Sequential { resonant, block_detuning, pipeline } => sequential(&mut ctx, &base, resonant, *block_detuning, *pipeline)?,
        Experiment::Ensemble { sigma, realizations, pipeline } => ensemble(&mut ctx, *sigma, *realizations, *pipeline)?,
    };
    Ok(Outcome { atoms, tables, results, warnings: ctx.warnings })
}

type Produced = (Vec<Table>, serde_json::Value);

fn spectrum(ctx: &mut Ctx, array: &EmitterArray) -> Result<Produced, RunError> {
    let delta = match ctx.cfg.drive.detuning {
        Detuning::Value(d) => d,
        Detuning::Keyword(_) => 0.0,
    };
    let drive = DriveField::new(ctx.cfg.drive.omega, ctx.cfg.drive.direction, delta)?;
    let s = collective_modes(&build_spin_hamiltonian(array, &drive, ctx.convention)?)?;
    let mut modes: Vec<(f64, f64)> = (0..s.len()).map(|l| (s.shift(l, delta), s.linewidth(l))).collect();
    modes.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let mut t = Table::new("spectrum", &["mode_index", "J_lambda", "gamma_lambda"], 1);
    for (k, (j, g)) in modes.iter().enumerate() {
        t.push(vec![k.into(), (*j).into(), (*g).into()]);
    }
    let results = json!({
        "narrowest_linewidth": modes.first().map(|m| m.1),
        "broadest_linewidth": modes.last().map(|m| m.1),
        "completeness_residual": s.completeness_residual(),
    });
    Ok((vec![t], results))
}

fn cool_effective(ctx: &mut Ctx, values: &Option<Vec<f64>>) -> Result<Produced, RunError> {
    let grid = ctx.nu_grid(values);
    let (omega, eta) = (ctx.cfg.drive.omega, ctx.cfg.array.eta);
    let points: Vec<(EmitterArray, EffectiveModel, Vec<f64>, f64)> = grid
        .par_iter()
        .map(|&nu| -> Result<_, RunError> {
            let a = ctx.array_at(nu)?;
            let dr = ctx.drive(&a)?;
            let m = EffectiveModel::build(&a, &dr, ctx.convention)?;
            let occ = m.steady_state()?.occupations();
            let rate = -2.0 * stability_margin(&m.rates)?;
            Ok((a, m, occ, rate))
        })
        .collect::<Result<_, _>>()?;
    let mut t = Table::new("cooling", &["nu_bar", "n_ss", "n_ind", "ratio", "rate"], 1);
    for (nu, (a, m, occ, rate)) in grid.iter().zip(&points) {
        let n = occ.iter().sum::<f64>() / occ.len() as f64;
        let n_ind = n_independent_optimal(*nu, omega, eta)?.n_ss;
        t.push(vec![(*nu).into(), n.into(), n_ind.into(), (n / n_ind).into(), (*rate).into()]);
        ctx.warn_effective(&format!("nu_bar={nu}"), a, m, occ);
    }
    Ok((vec![t], json!({ "points": grid.len() })))
}

fn cool_full(ctx: &mut Ctx, values: &Option<Vec<f64>>, samples: usize) -> Result<Produced, RunError> {
    let grid = ctx.nu_grid(values);
    let (omega, eta) = (ctx.cfg.drive.omega, ctx.cfg.array.eta);
    let truncation: Truncation = ctx.cfg.truncation.into();
    let runs: Vec<_> = grid
        .par_iter()
        .map(|&nu| -> Result<_, RunError> {
            let a = ctx.array_at(nu)?;
            let dr = ctx.drive(&a)?;
            let eff = EffectiveModel::build(&a, &dr, ctx.convention)?;
            let guess = -2.0 * stability_margin(&eff.rates)?;
            let m = build_liouvillian(&a, &dr, truncation)?;
            Ok(cooling_curve(&m, 5.0 / guess, samples)?)
        })
        .collect::<Result<_, _>>()?;
    let mut t = Table::new("cooling", &["nu_bar", "n_ss", "n_ind", "ratio", "rate"], 1);
    let mut traj = Table::new("trajectory", &["nu_bar", "time", "n_mean"], 2);
    for (nu, cc) in grid.iter().zip(&runs) {
        let n_ind = n_independent_optimal(*nu, omega, eta)?.n_ss;
        let n = cc.steady_state_phonons;
        t.push(vec![(*nu).into(), n.into(), n_ind.into(), (n / n_ind).into(), cc.fit.rate.into()]);
        for (time, x) in cc.times.iter().zip(&cc.mean_phonons) {
            traj.push(vec![(*nu).into(), (*time).into(), (*x).into()]);
        }
        if cc.truncation_unreliable {
            ctx.warnings.push(format!("nu_bar={nu}: steady-state weight {:.3e} on the truncation boundary", cc.boundary_population));
        }
    }
    Ok((vec![t, traj], json!({ "points": grid.len(), "truncation": format!("{truncation:?}") })))
}

fn regime(ctx: &mut Ctx, deltas: &[f64], omegas: &[f64], pipeline: PipelineConfig) -> Result<Produced, RunError> {
    let GeometryConfig::Chain { n: 2, d } = ctx.cfg.array.geometry else {
        return Err(RunError::Schema("regime-map needs a two-atom chain geometry".into()));
    };
    let pol = ctx.cfg.array.polarization.resolve()?;
    let nu_bar = ctx.cfg.array.trap.nu_bar();
    let pts = regime_map(d, pol, nu_bar, ctx.cfg.array.eta, deltas, omegas, pipeline.resolve(ctx.cfg.truncation), ctx.convention)?;
    let mut t = Table::new("regime_map", &["delta_nu", "Omega", "n_ratio", "regime_label", "n_ss", "n_ind"], 2);
    for p in &pts {
        if let Some(e) = &p.error {
            ctx.warnings.push(format!("delta_nu={} Omega={}: {e}", p.delta_nu, p.omega));
        }
        let label = p.classification.label.to_string();
        t.push(vec![p.delta_nu.into(), p.omega.into(), p.ratio().into(), label.as_str().into(), p.n_ss.into(), p.n_ind.into()]);
    }
    let best = pts.iter().filter_map(|p| p.ratio().map(|r| (r, p))).min_by(|a, b| a.0.total_cmp(&b.0));
    let results = json!({
        "min_ratio": best.map(|b| b.0),
        "min_at": best.map(|b| json!({ "delta_nu": b.1.delta_nu, "Omega": b.1.omega, "regime": b.1.classification.label })),
    });
    Ok((vec![t], results))
}

fn critical(ctx: &mut Ctx, array: &EmitterArray) -> Result<Produced, RunError> {
    let cr = critical_rate_scan(array, ctx.cfg.drive.direction, ctx.cfg.truncation.into(), ctx.convention)?;
    let mut t = Table::new("scan", &["Omega", "n_ss", "rate", "truncation_unreliable"], 1);
    for p in &cr.points {
        t.push(vec![p.omega.into(), p.n_ss.into(), p.rate.into(), (p.truncation_unreliable as usize).into()]);
        if p.truncation_unreliable {
            ctx.warnings.push(format!("Omega={}: steady state leaks onto the truncation boundary", p.omega));
        }
    }
    let pair = |x: Option<(f64, f64)>| x.map(|(rate, omega)| json!({ "rate": rate, "Omega": omega }));
    if cr.gamma_c.is_none() {
        ctx.warnings.push("no admissible drive for the optimal-reference constraint".into());
    }
    let results = json!({
        "n_opt": cr.n_opt,
        "n_ind": cr.n_ind,
        "gamma_c": pair(cr.gamma_c),
        "gamma_c_prime": pair(cr.gamma_c_prime),
    });
    Ok((vec![t], results))
}

fn ring_target(ctx: &mut Ctx, delta_ts: Option<f64>) -> Result<Produced, RunError> {
    let GeometryConfig::RingPlusCenter { n, radius } = ctx.cfg.array.geometry else {
        return Err(RunError::Schema("ring-target needs a ring-plus-center geometry".into()));
    };
    let (nu_t, eta_t, omega) = (ctx.cfg.array.trap.nu_bar(), ctx.cfg.array.eta, ctx.cfg.drive.omega);
    if !matches!(ctx.cfg.drive.detuning, Detuning::Keyword(_)) {
        ctx.warnings.push("ring-target chooses its own detuning; the configured value is ignored".into());
    }
    let r = ring_target_cooling(n, radius, delta_ts, nu_t, eta_t, omega)?;
    let iso = isolated_target(nu_t, eta_t, omega)?;
    let mut t = Table::new("target", &["time", "n_t"], 1);
    for (time, x) in r.times.iter().zip(&r.trajectory) {
        t.push(vec![(*time).into(), (*x).into()]);
    }
    let results = json!({
        "delta_ts": r.delta_ts,
        "detuning": r.detuning,
        "gamma_d": r.gamma_d,
        "r_minus": r.r_minus,
        "r_plus": r.r_plus,
        "n_t": r.n_t,
        "rate": r.rate,
        "n_isolated": iso.n_ss,
        "reduction": iso.n_ss / r.n_t,
    });
    Ok((vec![t], results))
}

fn sequential(ctx: &mut Ctx, array: &EmitterArray, resonant: &[usize], block_detuning: f64, pipeline: PipelineConfig) -> Result<Produced, RunError> {
    if !matches!(ctx.cfg.drive.detuning, Detuning::Keyword(_)) {
        ctx.warnings.push("sequential runs choose the drive by a mode scan; the configured detuning is ignored".into());
    }
    let d = &ctx.cfg.drive;
    let r = sequential_protocol(array, resonant, block_detuning, d.omega, d.direction, pipeline.resolve(ctx.cfg.truncation), ctx.convention)?;
    let names: Vec<String> = std::iter::once("time".to_string()).chain((0..array.len()).map(|j| format!("n_{j}"))).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = Table::new("occupations", &refs, 1);
    for (time, occ) in r.times.iter().zip(&r.occupations) {
        t.push(std::iter::once(Cell::from(*time)).chain(occ.iter().map(|x| Cell::from(*x))).collect());
    }
    ctx.warnings.extend(r.warnings.iter().cloned());
    let results = json!({
        "detuning": r.drive.detuning,
        "resonant": r.resonant,
        "detuned": r.detuned,
        "resonant_rate": r.resonant_fit.rate,
        "resonant_n_ss": r.resonant_n_ss,
        "detuned_drift": r.detuned_drift,
    });
    Ok((vec![t], results))
}

fn ensemble(ctx: &mut Ctx, sigma: f64, realizations: usize, pipeline: PipelineConfig) -> Result<Produced, RunError> {
    let spec = ctx.cfg.array.spec(ctx.cfg.seed)?;
    let n = Geometry::len(&spec.geometry);
    let d = &ctx.cfg.drive;
    let pipe: Pipeline = pipeline.resolve(ctx.cfg.truncation);
    let s = ensemble_sweep(&spec, sigma, ctx.cfg.seed, realizations, d.omega, d.direction, pipe, ctx.convention)?;
    let mut names = vec!["realization".to_string(), "seed".into(), "n_ss".into(), "rate".into(), "error".into()];
    names.extend((0..n).map(|j| format!("nu_{j}")));
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = Table::new("realizations", &refs, 1);
    for (k, r) in s.realizations.iter().enumerate() {
        let (nss, rate, err) = match &r.outcome {
            Ok((a, b)) => (*a, *b, String::new()),
            Err(e) => {
                ctx.warnings.push(format!("realization {k}: {e}"));
                (f64::NAN, f64::NAN, e.clone())
            }
        };
        let mut row = vec![k.into(), r.seed.into(), nss.into(), rate.into(), Cell::Text(err)];
        row.extend((0..n).map(|j| Cell::from(r.frequencies.get(j).copied())));
        t.push(row);
    }
    let results = json!({ "n_ss": s.n_ss, "rate": s.rate, "n_ind": s.n_ind });
    Ok((vec![t], results))
}
