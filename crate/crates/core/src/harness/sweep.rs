//! The Mach-parameter sweep: one model-H reference run, then one
//! compressible run per `eps` compared against it.

use rayon::prelude::*;

use super::config::Config;
use super::initial::well_prepared_initial_data;
use crate::compressible::{run_compressible, stable_dt, CompressibleState, Diagnostics, Stepping};
use crate::energetics::{
    energy_inequality_from, norm_distances, relative_energy, uniform_bound_ratios, uniform_estimates_report,
    InequalityReport, NormDistances, RelativeEnergyValue, UniformEstimates,
};
use crate::error::{Error, Result};
use crate::model_h::{interpolate, model_h_stable_dt, run_model_h, IncompressibleState};

/// Relative tolerance of the per-run energy-inequality check.
pub const ENERGY_TOL: f64 = 1e-6;

/// Least-squares slope of `log(value)` against `log(eps)`.
pub fn fit_convergence_order(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientData(format!("{} pairs; at least 3 required", pairs.len())));
    }
    if let Some(&(e, v)) = pairs.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0 && e.is_finite() && v.is_finite())) {
        return Err(Error::InvalidParameter(format!("non-positive pair ({e}, {v})")));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all eps values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub sup_etilde: f64,
    /// `(t, relative energy)` at every sample.
    pub relative: Vec<(f64, RelativeEnergyValue)>,
    pub final_norms: NormDistances,
    /// Largest distance over all samples, per norm.
    pub sup_norms: NormDistances,
    pub uniform: UniformEstimates,
    pub energy: InequalityReport,
    pub diagnostics: Vec<Diagnostics>,
    pub steps: usize,
    pub final_state: CompressibleState,
}

#[derive(Clone, Debug)]
pub struct SweepRecord {
    pub eps: f64,
    /// Run summary, or the message of the error that stopped the run.
    pub outcome: std::result::Result<RunSummary, String>,
}

#[derive(Clone, Debug)]
pub struct ReferenceRun {
    pub dt: f64,
    pub steps: usize,
    pub diagnostics: Vec<Diagnostics>,
    pub final_state: IncompressibleState,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub fitted_order: f64,
    pub reference: ReferenceRun,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assessment {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

impl SweepResult {
    pub fn summaries(&self) -> impl Iterator<Item = (f64, &RunSummary)> {
        self.records.iter().filter_map(|r| r.outcome.as_ref().ok().map(|s| (r.eps, s)))
    }

    pub fn uniform_ratios(&self) -> [f64; 5] {
        let u: Vec<UniformEstimates> = self.summaries().map(|(_, s)| s.uniform).collect();
        uniform_bound_ratios(&u)
    }

    /// Order fitted to the exterior-set integral; `None` if it vanishes
    /// for some run.
    pub fn exterior_order(&self) -> Option<f64> {
        let pairs: Vec<(f64, f64)> = self.summaries().map(|(e, s)| (e, s.uniform.sup_exterior)).collect();
        fit_convergence_order(&pairs).ok()
    }

    /// Slope between consecutive successful runs; `NaN` for the first.
    pub fn running_orders(&self) -> Vec<f64> {
        let mut prev: Option<(f64, f64)> = None;
        self.records
            .iter()
            .map(|r| match &r.outcome {
                Ok(s) => {
                    let out = prev.map_or(f64::NAN, |(e0, v0)| (s.sup_etilde / v0).ln() / (r.eps / e0).ln());
                    prev = Some((r.eps, s.sup_etilde));
                    out
                }
                Err(_) => f64::NAN,
            })
            .collect()
    }

    /// Checks of the low-Mach convergence claim on this sweep.
    pub fn assess(&self, fit_threshold: f64) -> Vec<Assessment> {
        let mut out = Vec::new();
        let failed: Vec<String> = self
            .records
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| format!("eps = {}: {e}", r.eps)))
            .collect();
        out.push(Assessment {
            name: "all runs completed".into(),
            passed: failed.is_empty(),
            detail: if failed.is_empty() { "ok".into() } else { failed.join("; ") },
        });
        let sups: Vec<f64> = self.summaries().map(|(_, s)| s.sup_etilde).collect();
        out.push(Assessment {
            name: "sup_t Etilde strictly decreasing in eps".into(),
            passed: strictly_decreasing(&sups),
            detail: format!("{sups:?}"),
        });
        out.push(Assessment {
            name: format!("fitted order >= {fit_threshold}"),
            passed: self.fitted_order >= fit_threshold,
            detail: format!("{}", self.fitted_order),
        });
        let norms: [(&str, fn(&NormDistances) -> f64); 3] = [
            ("final ||rho - 1||_L1", |n| n.l1_rho),
            ("final ||v_eps - v||_L2", |n| n.l2_v),
            ("final ||c_eps - c||_H1", |n| n.h1_c),
        ];
        for (name, get) in norms {
            let vals: Vec<f64> = self.summaries().map(|(_, s)| get(&s.final_norms)).collect();
            out.push(Assessment {
                name: format!("{name} strictly decreasing in eps"),
                passed: strictly_decreasing(&vals),
                detail: format!("{vals:?}"),
            });
        }
        let worst = self
            .summaries()
            .map(|(_, s)| s.energy.violation / s.diagnostics[0].e_total.abs().max(f64::MIN_POSITIVE))
            .fold(0.0_f64, f64::max);
        out.push(Assessment {
            name: "energy inequality in every run".into(),
            passed: self.summaries().all(|(_, s)| s.energy.passed),
            detail: format!("worst relative violation {worst:e}"),
        });
        out
    }
}

/// Runs the compressible problem for one `eps` and compares it with the
/// reference trajectory.
pub fn run_single(
    cfg: &Config,
    eps: f64,
    reference: &crate::compressible::Trajectory<IncompressibleState>,
) -> Result<RunSummary> {
    let params = cfg.params()?;
    let (initial, _) = well_prepared_initial_data(cfg, eps)?;
    let traj = run_compressible(
        &initial,
        &params,
        cfg.time.t_end,
        cfg.time.sample_every,
        Stepping::Cfl(cfg.time.cfl),
    )?;
    let mut relative = Vec::with_capacity(traj.len());
    let mut sup_etilde: f64 = 0.0;
    let mut sup_norms = NormDistances::default();
    let mut final_norms = NormDistances::default();
    for st in &traj.states {
        let r = interpolate(reference, st.t)?;
        let e = relative_energy(st, &r, &params)?;
        sup_etilde = sup_etilde.max(e.value_etilde);
        relative.push((st.t, e));
        final_norms = norm_distances(st, &r)?;
        sup_norms.l1_rho = sup_norms.l1_rho.max(final_norms.l1_rho);
        sup_norms.l2_v = sup_norms.l2_v.max(final_norms.l2_v);
        sup_norms.h1_c = sup_norms.h1_c.max(final_norms.h1_c);
    }
    let energy = energy_inequality_from(&traj.diagnostics, ENERGY_TOL)?;
    let uniform = uniform_estimates_report(&traj, &params);
    Ok(RunSummary {
        sup_etilde,
        relative,
        final_norms,
        sup_norms,
        uniform,
        energy,
        steps: traj.steps,
        final_state: traj.states.last().cloned().expect("trajectory holds the initial state"),
        diagnostics: traj.diagnostics,
    })
}

/// Reference step: half the smallest initial step of the model-H run and
/// of every compressible run.
pub fn reference_dt(cfg: &Config) -> Result<f64> {
    let params = cfg.params()?;
    let (_, r0) = well_prepared_initial_data(cfg, cfg.sweep.epsilons[0])?;
    let mut dt = model_h_stable_dt(&r0, &params, cfg.time.cfl)?;
    for &eps in &cfg.sweep.epsilons {
        let (c0, _) = well_prepared_initial_data(cfg, eps)?;
        dt = dt.min(stable_dt(&c0, &params, cfg.time.cfl)?);
    }
    Ok(0.5 * dt)
}

pub fn run_reference(cfg: &Config) -> Result<(crate::compressible::Trajectory<IncompressibleState>, f64)> {
    let params = cfg.params()?;
    let dt = reference_dt(cfg)?;
    let (_, r0) = well_prepared_initial_data(cfg, cfg.sweep.epsilons[0])?;
    let traj = run_model_h(&r0, &params, cfg.time.t_end, cfg.time.sample_every, Stepping::Fixed(dt))?;
    Ok((traj, dt))
}

/// Builds the result from per-`eps` outcomes; the fit uses the successful
/// runs and needs at least three of them.
pub fn assemble(records: Vec<SweepRecord>, reference: ReferenceRun) -> Result<SweepResult> {
    if records.is_empty() {
        return Err(Error::InsufficientData("empty sweep".into()));
    }
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|s| (r.eps, s.sup_etilde)))
        .collect();
    if pairs.len() < 3 {
        let why: Vec<String> = records
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| format!("eps = {}: {e}", r.eps)))
            .collect();
        return Err(Error::InsufficientData(format!(
            "only {} runs succeeded ({})",
            pairs.len(),
            why.join("; ")
        )));
    }
    let fitted_order = fit_convergence_order(&pairs)?;
    Ok(SweepResult {
        records,
        fitted_order,
        reference,
    })
}

/// Reference run followed by the per-`eps` runs (in parallel on the
/// current rayon pool, aggregated in `epsilons` order).
pub fn run_sweep(cfg: &Config) -> Result<SweepResult> {
    let (reference, dt) = run_reference(cfg)?;
    let records: Vec<SweepRecord> = cfg
        .sweep
        .epsilons
        .par_iter()
        .map(|&eps| SweepRecord {
            eps,
            outcome: run_single(cfg, eps, &reference).map_err(|e| e.to_string()),
        })
        .collect();
    let meta = ReferenceRun {
        dt,
        steps: reference.steps,
        final_state: reference.states.last().cloned().expect("reference holds its initial state"),
        diagnostics: reference.diagnostics,
    };
    assemble(records, meta)
}
