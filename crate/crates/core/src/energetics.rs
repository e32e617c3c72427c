//! Energy functionals, relative energies and the inequality checks run on
//! trajectories.

use crate::compressible::{velocity_of, CompressibleState, Diagnostics, PhysParams, Trajectory};
use crate::constitutive::ViscosityLaw;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::model_h::IncompressibleState;
use crate::operators::{self, grad_raw};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub pressure_part: f64,
    pub gradient_part: f64,
    pub potential_part: f64,
    pub dissipation_rate: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RelativeEnergyValue {
    pub kinetic_rel: f64,
    pub pressure_rel: f64,
    pub gradient_rel: f64,
    pub potential_rel: f64,
    pub convexify: f64,
    pub value_e: f64,
    pub value_etilde: f64,
}

fn sum_sq(comps: &[Vec<f64>]) -> f64 {
    comps.iter().flatten().map(|x| x * x).sum()
}

/// `(int 2 nu(c) |Dv|^2, int eta(c) (div v)^2)`.
pub fn viscous_dissipation(v: &VectorField, c: &ScalarField, visc: &ViscosityLaw) -> (f64, f64) {
    let grid = v.grid();
    let gv = operators::velocity_gradient(v);
    let dev = operators::sym_traceless_of(&gv);
    let div = gv.trace();
    let d = grid.dim();
    let (mut shear, mut bulk) = (0.0, 0.0);
    for n in 0..grid.len() {
        let cn = c.values()[n];
        let mut sq = 0.0;
        for a in 0..d {
            for b in 0..d {
                let x = dev.entry(a, b)[n];
                sq += x * x;
            }
        }
        shear += 2.0 * visc.nu(cn) * sq;
        let dv = div.values()[n];
        bulk += visc.eta(cn) * dv * dv;
    }
    let m = grid.cell_measure();
    (shear * m, bulk * m)
}

fn grad_sq_integral(grid: &Grid, f: &[f64]) -> f64 {
    sum_sq(&grad_raw(grid, f)) * grid.cell_measure()
}

/// Energy of a compressible state with the pressure potential normalized
/// to `H(rho) / eps^2`.
pub fn total_energy(state: &CompressibleState, params: &PhysParams) -> EnergyBreakdown {
    let grid = *state.grid();
    let m = grid.cell_measure();
    let law = &params.pressure;
    let spec = &params.potential;
    let inv_e2 = 1.0 / (state.eps * state.eps);
    let (mut kin, mut pre, mut pot) = (0.0, 0.0, 0.0);
    for n in 0..grid.len() {
        let r = state.rho.values()[n];
        let msq: f64 = state.mom.comps().iter().map(|c| c[n] * c[n]).sum();
        kin += 0.5 * msq / r;
        pre += law.rel_potential(r);
        pot += r * spec.g(state.c.values()[n]);
    }
    let kinetic = kin * m;
    let pressure_part = pre * m * inv_e2;
    let potential_part = pot * m;
    let gradient_part = 0.5 * grad_sq_integral(&grid, state.c.values());
    let v = state.velocity();
    let (shear, bulk) = viscous_dissipation(&v, &state.c, &params.viscosity);
    let diff = params.mobility * grad_sq_integral(&grid, state.mu.values());
    EnergyBreakdown {
        kinetic,
        pressure_part,
        gradient_part,
        potential_part,
        dissipation_rate: shear + bulk + diff,
        total: kinetic + pressure_part + gradient_part + potential_part,
    }
}

/// Model-H energy `int |v|^2/2 + |grad c|^2/2 + G(c)` with dissipation
/// `int 2 nu |Dv|^2 + |grad mu|^2`.
pub fn model_h_energy(state: &IncompressibleState, params: &PhysParams) -> EnergyBreakdown {
    let grid = *state.v.grid();
    let m = grid.cell_measure();
    let kinetic = 0.5 * sum_sq(state.v.comps()) * m;
    let gradient_part = 0.5 * grad_sq_integral(&grid, state.c.values());
    let potential_part = state.c.values().iter().map(|&c| params.potential.g(c)).sum::<f64>() * m;
    let (shear, _) = viscous_dissipation(&state.v, &state.c, &params.viscosity);
    let diff = params.mobility * grad_sq_integral(&grid, state.mu.values());
    EnergyBreakdown {
        kinetic,
        pressure_part: 0.0,
        gradient_part,
        potential_part,
        dissipation_rate: shear + diff,
        total: kinetic + gradient_part + potential_part,
    }
}

/// Relative energy of `comp` with respect to `(1, ref.v, ref.c)` and its
/// convexified variant.
pub fn relative_energy(
    comp: &CompressibleState,
    reference: &IncompressibleState,
    params: &PhysParams,
) -> Result<RelativeEnergyValue> {
    let grid = *comp.grid();
    grid.check_same(reference.c.grid())?;
    grid.check_same(reference.v.grid())?;
    let m = grid.cell_measure();
    let spec = &params.potential;
    let inv_e2 = 1.0 / (comp.eps * comp.eps);
    let d = grid.dim();
    let (mut kin, mut pre, mut pot, mut cvx) = (0.0, 0.0, 0.0, 0.0);
    for n in 0..grid.len() {
        let r = comp.rho.values()[n];
        let mut dv2 = 0.0;
        for a in 0..d {
            let dv = comp.mom.comp(a)[n] / r - reference.v.comp(a)[n];
            dv2 += dv * dv;
        }
        kin += 0.5 * r * dv2;
        pre += params.pressure.rel_potential(r);
        let (ce, c) = (comp.c.values()[n], reference.c.values()[n]);
        let dc = ce - c;
        pot += r * (spec.g(ce) - spec.dg(c) * dc - spec.g(c));
        cvx += 0.5 * spec.kappa() * r * dc * dc;
    }
    let dc: Vec<f64> = comp
        .c
        .values()
        .iter()
        .zip(reference.c.values())
        .map(|(a, b)| a - b)
        .collect();
    let kinetic_rel = kin * m;
    let pressure_rel = pre * m * inv_e2;
    let gradient_rel = 0.5 * grad_sq_integral(&grid, &dc);
    let potential_rel = pot * m;
    let convexify = cvx * m;
    let value_e = kinetic_rel + pressure_rel + gradient_rel + potential_rel;
    Ok(RelativeEnergyValue {
        kinetic_rel,
        pressure_rel,
        gradient_rel,
        potential_rel,
        convexify,
        value_e,
        value_etilde: value_e + convexify,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityReport {
    /// Smallest `E(s) - E(t) - (D(t) - D(s))` over sample pairs `s < t`.
    pub worst_slack: f64,
    /// Indices `(s, t)` attaining `worst_slack`.
    pub worst_pair: Option<(usize, usize)>,
    /// `max(0, -worst_slack)`.
    pub violation: f64,
    pub passed: bool,
}

/// Checks `E(t) + D(t) - D(s) <= E(s) + tol_rel E(0)` for all `s < t`.
pub fn energy_inequality_check(energy: &[f64], dissipation_cum: &[f64], tol_rel: f64) -> Result<InequalityReport> {
    if energy.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    if energy.len() != dissipation_cum.len() {
        return Err(Error::ShapeMismatch("energy and dissipation series differ in length".into()));
    }
    let mut worst_slack = f64::INFINITY;
    let mut worst_pair = None;
    let (mut best_s, mut best_phi) = (0, energy[0] + dissipation_cum[0]);
    for t in 1..energy.len() {
        let s = best_s;
        let slack = energy[s] - energy[t] - (dissipation_cum[t] - dissipation_cum[s]);
        if slack < worst_slack {
            worst_slack = slack;
            worst_pair = Some((s, t));
        }
        let phi = energy[t] + dissipation_cum[t];
        if phi < best_phi {
            best_phi = phi;
            best_s = t;
        }
    }
    let violation = if worst_slack.is_finite() { (-worst_slack).max(0.0) } else { 0.0 };
    Ok(InequalityReport {
        worst_slack,
        worst_pair,
        violation,
        passed: violation <= tol_rel * energy[0].abs(),
    })
}

pub fn energy_inequality_from(diags: &[Diagnostics], tol_rel: f64) -> Result<InequalityReport> {
    let e: Vec<f64> = diags.iter().map(|d| d.e_total).collect();
    let d: Vec<f64> = diags.iter().map(|d| d.dissipation_cum).collect();
    energy_inequality_check(&e, &d, tol_rel)
}

/// The a priori quantities of the uniform estimates for one run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UniformEstimates {
    pub eps: f64,
    /// `sup_t || sqrt(rho) v ||_{L2}`
    pub sup_sqrt_rho_v: f64,
    /// `sup_t int_{1/2 <= rho <= 2} |(rho - 1) / eps|^2`
    pub sup_interior: f64,
    /// `sup_t int_{outside} (1 + rho^gamma)`
    pub sup_exterior: f64,
    /// `sup_t || grad c ||_{L2}`
    pub sup_grad_c: f64,
    /// `int_0^T || grad mu ||_{L2}^2 dt` (trapezoidal in the samples)
    pub int_grad_mu_sq: f64,
    /// `sup_t || c ||_{L2}`
    pub sup_c: f64,
    /// `int_0^T || mu ||_{L2}^2 dt`
    pub int_mu_sq: f64,
}

impl UniformEstimates {
    pub const NAMES: [&'static str; 5] = [
        "sup |sqrt(rho) v|",
        "sup int_interior |(rho-1)/eps|^2",
        "sup int_exterior (1+rho^gamma)",
        "sup |grad c|",
        "int |grad mu|^2 dt",
    ];

    /// The five primary quantities in the order of `NAMES`.
    pub fn primary(&self) -> [f64; 5] {
        [
            self.sup_sqrt_rho_v,
            self.sup_interior,
            self.sup_exterior,
            self.sup_grad_c,
            self.int_grad_mu_sq,
        ]
    }
}

/// Single-state density integrals `(interior, exterior)`.
pub fn density_deviation_integrals(rho: &ScalarField, eps: f64, gamma: f64) -> (f64, f64) {
    let m = rho.grid().cell_measure();
    let (mut inner, mut outer) = (0.0, 0.0);
    for &r in rho.values() {
        if (0.5..=2.0).contains(&r) {
            let q = (r - 1.0) / eps;
            inner += q * q;
        } else {
            outer += 1.0 + r.powf(gamma);
        }
    }
    (inner * m, outer * m)
}

pub fn uniform_estimates_report(traj: &Trajectory<CompressibleState>, params: &PhysParams) -> UniformEstimates {
    let mut out = UniformEstimates::default();
    let mut prev: Option<(f64, f64, f64)> = None;
    for st in &traj.states {
        let grid = *st.grid();
        let m = grid.cell_measure();
        out.eps = st.eps;
        let ke: f64 = (0..grid.len())
            .map(|n| st.mom.comps().iter().map(|c| c[n] * c[n]).sum::<f64>() / st.rho.values()[n])
            .sum::<f64>()
            * m;
        out.sup_sqrt_rho_v = out.sup_sqrt_rho_v.max(ke.sqrt());
        let (inner, outer) = density_deviation_integrals(&st.rho, st.eps, params.pressure.gamma());
        out.sup_interior = out.sup_interior.max(inner);
        out.sup_exterior = out.sup_exterior.max(outer);
        out.sup_grad_c = out.sup_grad_c.max(grad_sq_integral(&grid, st.c.values()).sqrt());
        out.sup_c = out.sup_c.max((st.c.values().iter().map(|c| c * c).sum::<f64>() * m).sqrt());
        let gmu = grad_sq_integral(&grid, st.mu.values());
        let mu2 = st.mu.values().iter().map(|x| x * x).sum::<f64>() * m;
        if let Some((t0, g0, m0)) = prev {
            let dt = st.t - t0;
            out.int_grad_mu_sq += 0.5 * dt * (g0 + gmu);
            out.int_mu_sq += 0.5 * dt * (m0 + mu2);
        }
        prev = Some((st.t, gmu, mu2));
    }
    out
}

/// Ratio `max / min` across a sweep for each primary quantity; 1 when the
/// quantity vanishes for every run, infinite when it vanishes for some.
pub fn uniform_bound_ratios(reports: &[UniformEstimates]) -> [f64; 5] {
    let mut ratios = [1.0; 5];
    for (k, r) in ratios.iter_mut().enumerate() {
        let vals = reports.iter().map(|u| u.primary()[k]);
        let max = vals.clone().fold(0.0_f64, f64::max);
        let min = vals.fold(f64::INFINITY, f64::min);
        *r = if max == 0.0 {
            1.0
        } else if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        };
    }
    ratios
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainRuleResidual {
    pub residual: f64,
    /// Largest half-width of the centered time differences.
    pub delta: f64,
    pub h: f64,
}

/// `max_k | dP/dt(t_k) + m int grad mu . grad c |` with `P = int rho c^2 / 2`
/// and `dP/dt` from centered differences of the samples.
pub fn chain_rule_residual(traj: &Trajectory<CompressibleState>, params: &PhysParams) -> Result<ChainRuleResidual> {
    let n = traj.states.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} samples; at least 3 required")));
    }
    let grid = *traj.states[0].grid();
    let m = grid.cell_measure();
    let p: Vec<f64> = traj
        .states
        .iter()
        .map(|s| {
            s.rho
                .values()
                .iter()
                .zip(s.c.values())
                .map(|(r, c)| 0.5 * r * c * c)
                .sum::<f64>()
                * m
        })
        .collect();
    let mut residual: f64 = 0.0;
    let mut delta: f64 = 0.0;
    for k in 1..n - 1 {
        let (a, b) = (&traj.states[k - 1], &traj.states[k + 1]);
        let span = b.t - a.t;
        delta = delta.max(0.5 * span);
        let dp = (p[k + 1] - p[k - 1]) / span;
        let s = &traj.states[k];
        let gm = grad_raw(&grid, s.mu.values());
        let gc = grad_raw(&grid, s.c.values());
        let flux: f64 = gm.iter().zip(&gc).map(|(x, y)| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()).sum::<f64>() * m;
        residual = residual.max((dp + params.mobility * flux).abs());
    }
    Ok(ChainRuleResidual {
        residual,
        delta,
        h: grid.h_min(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NormDistances {
    pub l1_rho: f64,
    pub l2_v: f64,
    pub h1_c: f64,
}

/// `(||rho - 1||_{L1}, ||v_eps - v||_{L2}, ||c_eps - c||_{H1})`.
pub fn norm_distances(comp: &CompressibleState, reference: &IncompressibleState) -> Result<NormDistances> {
    let grid = *comp.grid();
    grid.check_same(reference.c.grid())?;
    grid.check_same(reference.v.grid())?;
    let m = grid.cell_measure();
    let l1_rho = comp.rho.values().iter().map(|r| (r - 1.0).abs()).sum::<f64>() * m;
    let v = velocity_of(&comp.rho, &comp.mom);
    let l2_v = (sum_sq(v.sub(&reference.v).comps()) * m).sqrt();
    let dc: Vec<f64> = comp
        .c
        .values()
        .iter()
        .zip(reference.c.values())
        .map(|(a, b)| a - b)
        .collect();
    let l2 = dc.iter().map(|x| x * x).sum::<f64>() * m;
    let h1_c = (l2 + grad_sq_integral(&grid, &dc)).sqrt();
    Ok(NormDistances { l1_rho, l2_v, h1_c })
}
