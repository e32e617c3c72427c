//! Explicit-acoustics integrator for the scaled compressible
//! Navier-Stokes/Cahn-Hilliard system with Mach number `eps^2`.
//!
//! One step: Rusanov finite volumes for `(rho, rho v)`, centered viscous
//! stress and capillary force, transport of `rho c` with the same mass
//! fluxes, then a stabilized linearly implicit Cahn-Hilliard correction.

use crate::constitutive::{PotentialSpec, PressureLaw, ViscosityLaw};
use crate::energetics;
use crate::error::{Error, Result};
use crate::grid::{BcMode, Grid, ScalarField, TensorField, VectorField};
use crate::linsolve::{pcg, solve_poisson, CgOptions, SpectralLaplacian};
use crate::operators::{self, divergence_tensor, grad_raw, lap_raw, TensorBc};

/// Densities at or below this value abort the run.
pub const RHO_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysParams {
    pub pressure: PressureLaw,
    pub potential: PotentialSpec,
    pub viscosity: ViscosityLaw,
    pub mobility: f64,
    pub solver: CgOptions,
}

impl PhysParams {
    pub fn new(
        pressure: PressureLaw,
        potential: PotentialSpec,
        viscosity: ViscosityLaw,
        mobility: f64,
        solver: CgOptions,
    ) -> Result<Self> {
        if !(mobility.is_finite() && mobility > 0.0) {
            return Err(Error::InvalidParameter(format!("mobility = {mobility} must be positive")));
        }
        if !(solver.tol > 0.0 && solver.max_iter > 0) {
            return Err(Error::InvalidParameter("solver tolerance and iteration cap must be positive".into()));
        }
        Ok(PhysParams {
            pressure,
            potential,
            viscosity,
            mobility,
            solver,
        })
    }
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            pressure: PressureLaw::new(2.4, 1.0).unwrap(),
            potential: PotentialSpec::new(1.0, 2.0).unwrap(),
            viscosity: ViscosityLaw::new(0.1, 0.02, 0.05).unwrap(),
            mobility: 1.0,
            solver: CgOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressibleState {
    pub rho: ScalarField,
    pub mom: VectorField,
    pub c: ScalarField,
    pub mu: ScalarField,
    pub eps: f64,
    pub t: f64,
}

impl CompressibleState {
    /// Builds a state and fills `mu` from `(rho, c)`.
    pub fn new(
        rho: ScalarField,
        mom: VectorField,
        c: ScalarField,
        eps: f64,
        t: f64,
        spec: &PotentialSpec,
    ) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
        }
        rho.grid().check_same(mom.grid())?;
        rho.grid().check_same(c.grid())?;
        let mu = chemical_potential_solve(&rho, &c, spec)?;
        Ok(CompressibleState {
            rho,
            mom,
            c,
            mu,
            eps,
            t,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn velocity(&self) -> VectorField {
        velocity_of(&self.rho, &self.mom)
    }
}

pub(crate) fn velocity_of(rho: &ScalarField, mom: &VectorField) -> VectorField {
    let comps = mom
        .comps()
        .iter()
        .map(|m| m.iter().zip(rho.values()).map(|(m, r)| m / r).collect())
        .collect();
    VectorField::from_raw(*rho.grid(), comps)
}

fn check_floor(rho: &[f64]) -> Result<()> {
    for (cell, &value) in rho.iter().enumerate() {
        if !(value > RHO_FLOOR) {
            return Err(Error::DensityFloor {
                cell,
                value,
                floor: RHO_FLOOR,
            });
        }
    }
    Ok(())
}

/// `mu = G'(c) - laplacian(c) / rho`.
pub fn chemical_potential_solve(rho: &ScalarField, c: &ScalarField, spec: &PotentialSpec) -> Result<ScalarField> {
    rho.grid().check_same(c.grid())?;
    check_floor(rho.values())?;
    let lap = lap_raw(c.grid(), c.values());
    let mu = c
        .values()
        .iter()
        .zip(&lap)
        .zip(rho.values())
        .map(|((&c, l), r)| spec.dg(c) - l / r)
        .collect();
    Ok(ScalarField::from_raw(*c.grid(), mu))
}

/// `-div(grad c (x) grad c - |grad c|^2 / 2 I)`.
pub fn capillary_div_form(c: &ScalarField) -> VectorField {
    let grid = *c.grid();
    let d = grid.dim();
    let g = grad_raw(&grid, c.values());
    let mut t = TensorField::zeros(grid);
    for a in 0..d {
        for b in 0..d {
            let e = t.entry_mut(a, b);
            for n in 0..e.len() {
                e[n] = g[a][n] * g[b][n];
                if a == b {
                    let sq: f64 = g.iter().map(|gk| gk[n] * gk[n]).sum();
                    e[n] -= 0.5 * sq;
                }
            }
        }
    }
    divergence_tensor(&t, TensorBc::Product).scaled(-1.0)
}

/// `(rho mu - rho G'(c)) grad c`.
pub fn capillary_mu_form(
    rho: &ScalarField,
    mu: &ScalarField,
    c: &ScalarField,
    spec: &PotentialSpec,
) -> Result<VectorField> {
    rho.grid().check_same(mu.grid())?;
    rho.grid().check_same(c.grid())?;
    let grid = *c.grid();
    let g = grad_raw(&grid, c.values());
    let factor: Vec<f64> = (0..grid.len())
        .map(|n| rho.values()[n] * (mu.values()[n] - spec.dg(c.values()[n])))
        .collect();
    let comps = g
        .into_iter()
        .map(|gk| gk.iter().zip(&factor).map(|(g, f)| g * f).collect())
        .collect();
    Ok(VectorField::from_raw(grid, comps))
}

/// l2 norm of the difference of the two capillary forms with its discrete
/// gradient part removed by a Poisson solve.
pub fn capillary_equivalence_residual(state: &CompressibleState, params: &PhysParams) -> Result<f64> {
    let spec = &params.potential;
    let fresh = chemical_potential_solve(&state.rho, &state.c, spec)?;
    let scale = 1.0 + fresh.values().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let err = fresh
        .values()
        .iter()
        .zip(state.mu.values())
        .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
    if err > 1e-8 * scale {
        return Err(Error::InconsistentPotential(err));
    }
    let grid = *state.grid();
    let diff = capillary_div_form(&state.c).sub(&capillary_mu_form(&state.rho, &state.mu, &state.c, spec)?);
    let div = operators::div_raw(&grid, diff.comps());
    // -lap(phi) = -div(diff)  =>  grad phi is the gradient part of diff
    let rhs: Vec<f64> = div.iter().map(|v| -v).collect();
    let spectral = SpectralLaplacian::new(&grid);
    let opts = CgOptions {
        tol: params.solver.tol.min(1e-12),
        max_iter: params.solver.max_iter,
    };
    let (phi, _) = solve_poisson(&spectral, &rhs, opts)?;
    let gphi = grad_raw(&grid, &phi);
    let rest = VectorField::from_raw(
        grid,
        diff.comps()
            .iter()
            .zip(&gphi)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect(),
    );
    Ok(rest.l2_norm())
}

/// Time-step bound; `eps = None` disables the acoustic part, `rho = None`
/// means unit density.
pub(crate) fn dt_bound(
    grid: &Grid,
    rho: Option<&[f64]>,
    vel: &VectorField,
    eps: Option<f64>,
    params: &PhysParams,
    cfl: f64,
) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidParameter(format!("cfl = {cfl} must lie in (0, 1]")));
    }
    let h = grid.h_min();
    let visc = 4.0 * params.viscosity.nu_sup() + 2.0 * params.viscosity.eta0();
    let mut bound = f64::INFINITY;
    for n in 0..grid.len() {
        let r = rho.map_or(1.0, |r| r[n]);
        let speed: f64 = vel.comps().iter().map(|v| v[n] * v[n]).sum::<f64>().sqrt();
        let wave = match eps {
            Some(e) => speed + params.pressure.dp(r).sqrt() / e,
            None => speed,
        };
        if !(r.is_finite() && wave.is_finite()) {
            return Err(Error::NonFinite(format!("time-step bound input at cell {n}")));
        }
        if wave > 0.0 {
            bound = bound.min(h / wave);
        }
        bound = bound.min(r * h * h / visc);
    }
    Ok(cfl * bound)
}

/// `cfl * min[h / (|v| + sqrt(p'(rho)) / eps), rho h^2 / (4 nu^* + 2 eta0)]`.
/// The Cahn-Hilliard part is linearly implicit and adds no restriction.
pub fn stable_dt(state: &CompressibleState, params: &PhysParams, cfl: f64) -> Result<f64> {
    let v = state.velocity();
    dt_bound(state.grid(), Some(state.rho.values()), &v, Some(state.eps), params, cfl)
}

#[derive(Clone, Copy)]
struct Cell {
    rho: f64,
    m: [f64; 2],
    c: f64,
}

struct FaceFlux {
    rho: f64,
    m: [f64; 2],
    rhoc: f64,
}

fn rusanov(l: &Cell, r: &Cell, k: usize, law: &PressureLaw, eps: f64) -> FaceFlux {
    let p1 = law.p(1.0);
    let inv_e2 = 1.0 / (eps * eps);
    let phys = |s: &Cell| {
        let v = s.m[k] / s.rho;
        let p = (law.p(s.rho) - p1) * inv_e2;
        let mut f = [s.m[k], s.m[0] * v, s.m[1] * v];
        f[1 + k] += p;
        (f, v.abs() + law.dp(s.rho).sqrt() / eps)
    };
    let (fl, al) = phys(l);
    let (fr, ar) = phys(r);
    let alpha = al.max(ar);
    let ul = [l.rho, l.m[0], l.m[1]];
    let ur = [r.rho, r.m[0], r.m[1]];
    let f: Vec<f64> = (0..3).map(|q| 0.5 * (fl[q] + fr[q]) - 0.5 * alpha * (ur[q] - ul[q])).collect();
    let upwind = if f[0] >= 0.0 { l.c } else { r.c };
    FaceFlux {
        rho: f[0],
        m: [f[1], f[2]],
        rhoc: f[0] * upwind,
    }
}

/// Accumulates `-(F_{i+1/2} - F_{i-1/2}) / h` for `rho`, `m` and `rho c`.
fn convective_rates(state: &CompressibleState, law: &PressureLaw) -> (Vec<f64>, [Vec<f64>; 2], Vec<f64>) {
    let grid = state.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let periodic = grid.bc() == BcMode::Periodic;
    let d = grid.dim();
    let len = grid.len();
    let mut drho = vec![0.0; len];
    let mut dm = [vec![0.0; len], vec![0.0; len]];
    let mut drc = vec![0.0; len];
    let rho = state.rho.values();
    let c = state.c.values();
    let cell = |n: usize| Cell {
        rho: rho[n],
        m: [state.mom.comp(0)[n], if d > 1 { state.mom.comp(1)[n] } else { 0.0 }],
        c: c[n],
    };
    let ghost = |s: Cell| Cell {
        rho: s.rho,
        m: [-s.m[0], -s.m[1]],
        c: s.c,
    };
    let mut faces: Vec<FaceFlux> = Vec::with_capacity(nx.max(ny) + 1);
    for k in 0..d {
        let (n, lines, stride, h) = if k == 0 {
            (nx, ny, 1, grid.hx())
        } else {
            (ny, nx, nx, grid.hy())
        };
        let inv_h = 1.0 / h;
        for line in 0..lines {
            let base = if k == 0 { line * nx } else { line };
            let at = |i: usize| base + i * stride;
            faces.clear();
            if periodic {
                // face f sits left of cell f
                for f in 0..n {
                    let l = cell(at((f + n - 1) % n));
                    faces.push(rusanov(&l, &cell(at(f)), k, law, state.eps));
                }
            } else {
                for f in 0..=n {
                    let (l, r) = if f == 0 {
                        let s = cell(at(0));
                        (ghost(s), s)
                    } else if f == n {
                        let s = cell(at(n - 1));
                        (s, ghost(s))
                    } else {
                        (cell(at(f - 1)), cell(at(f)))
                    };
                    faces.push(rusanov(&l, &r, k, law, state.eps));
                }
            }
            for i in 0..n {
                let left = &faces[i];
                let right = if periodic { &faces[(i + 1) % n] } else { &faces[i + 1] };
                let idx = at(i);
                drho[idx] -= (right.rho - left.rho) * inv_h;
                drc[idx] -= (right.rhoc - left.rhoc) * inv_h;
                for a in 0..d {
                    dm[a][idx] -= (right.m[a] - left.m[a]) * inv_h;
                }
            }
        }
    }
    (drho, dm, drc)
}

/// Viscous stress `2 nu(c) Dv + eta(c) div v I` of a no-slip velocity.
pub(crate) fn viscous_stress(v: &VectorField, c: &ScalarField, visc: &ViscosityLaw) -> TensorField {
    let grid = *v.grid();
    let d = grid.dim();
    let gv = operators::velocity_gradient(v);
    let dev = operators::sym_traceless_of(&gv);
    let div = gv.trace();
    let mut s = TensorField::zeros(grid);
    for a in 0..d {
        for b in 0..d {
            let src = dev.entry(a, b);
            let out = s.entry_mut(a, b);
            for n in 0..out.len() {
                let cn = c.values()[n];
                out[n] = 2.0 * visc.nu(cn) * src[n];
                if a == b {
                    out[n] += visc.eta(cn) * div.values()[n];
                }
            }
        }
    }
    s
}

/// Quantities produced alongside a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    /// Dissipation rate of the new level, with the diffusive part taken
    /// from the implicit chemical potential of the step.
    pub dissipation_rate: f64,
    pub solver_iterations: usize,
}

/// Advances one step of size `dt`.
pub fn compressible_step(state: &CompressibleState, params: &PhysParams, dt: f64) -> Result<CompressibleState> {
    advance(state, params, dt, None).map(|(s, _)| s)
}

pub(crate) fn advance(
    state: &CompressibleState,
    params: &PhysParams,
    dt: f64,
    spectral: Option<&SpectralLaplacian>,
) -> Result<(CompressibleState, StepInfo)> {
    let grid = *state.grid();
    let bound = stable_dt(state, params, 1.0)?;
    if !(dt > 0.0 && dt <= bound * (1.0 + 1e-12)) {
        return Err(Error::UnstableStep { dt, bound });
    }
    let d = grid.dim();
    let len = grid.len();
    let spec = &params.potential;
    let v = state.velocity();

    // (1) convective and pressure part, transport of rho c
    let (drho, dm, drc) = convective_rates(state, &params.pressure);
    let rho_new: Vec<f64> = (0..len).map(|n| state.rho.values()[n] + dt * drho[n]).collect();
    check_floor(&rho_new)?;

    // (2) viscous stress and capillary force at the old level
    let stress = viscous_stress(&v, &state.c, &params.viscosity);
    let div_s = divergence_tensor(&stress, TensorBc::Stress);
    let cap = capillary_mu_form(&state.rho, &state.mu, &state.c, spec)?;
    let mut mom = Vec::with_capacity(d);
    for a in 0..d {
        let m = state.mom.comp(a);
        mom.push(
            (0..len)
                .map(|n| m[n] + dt * (dm[a][n] + div_s.comp(a)[n] + cap.comp(a)[n]))
                .collect::<Vec<f64>>(),
        );
    }

    // (3) Cahn-Hilliard correction with the new density
    let rhoc_tilde: Vec<f64> = (0..len)
        .map(|n| state.rho.values()[n] * state.c.values()[n] + dt * drc[n])
        .collect();
    let c_tilde: Vec<f64> = (0..len).map(|n| rhoc_tilde[n] / rho_new[n]).collect();
    let local;
    let spectral = match spectral {
        Some(s) => s,
        None => {
            local = SpectralLaplacian::new(&grid);
            &local
        }
    };
    let (mu_star, iterations) = ch_correction(&grid, &rho_new, &c_tilde, dt, params, spectral)?;
    let lap_mu = lap_raw(&grid, &mu_star);
    let mob = params.mobility;
    let c_new: Vec<f64> = (0..len)
        .map(|n| (rhoc_tilde[n] + dt * mob * lap_mu[n]) / rho_new[n])
        .collect();

    let rho = ScalarField::from_raw(grid, rho_new);
    let c = ScalarField::from_raw(grid, c_new);
    let mom = VectorField::from_raw(grid, mom);
    for (what, ok) in [
        ("momentum", mom.comps().iter().flatten().all(|x| x.is_finite())),
        ("concentration", c.is_finite()),
    ] {
        if !ok {
            return Err(Error::NonFinite(what.into()));
        }
    }
    let next = CompressibleState::new(rho, mom, c, state.eps, state.t + dt, spec)?;
    let vn = next.velocity();
    let (visc, bulk) = energetics::viscous_dissipation(&vn, &next.c, &params.viscosity);
    let g = grad_raw(&grid, &mu_star);
    let diff: f64 = g.iter().flatten().map(|x| x * x).sum::<f64>() * grid.cell_measure();
    Ok((
        next,
        StepInfo {
            dissipation_rate: visc + bulk + mob * diff,
            solver_iterations: iterations,
        },
    ))
}

/// Solves for `u = c* - c~` and returns `mu*`:
/// `(rho / (m dt)) u - s lap u + lap(rho^{-1} lap u) = lap(G'(c~) - rho^{-1} lap c~)`.
fn ch_correction(
    grid: &Grid,
    rho: &[f64],
    c_tilde: &[f64],
    dt: f64,
    params: &PhysParams,
    spectral: &SpectralLaplacian,
) -> Result<(Vec<f64>, usize)> {
    let spec = &params.potential;
    let s = spec.stabilization();
    let mob = params.mobility;
    let len = grid.len();
    let lap_c = lap_raw(grid, c_tilde);
    let base: Vec<f64> = (0..len).map(|n| spec.dg(c_tilde[n]) - lap_c[n] / rho[n]).collect();
    let rhs = lap_raw(grid, &base);
    let apply = |u: &[f64], out: &mut [f64]| {
        let lu = lap_raw(grid, u);
        let w: Vec<f64> = lu.iter().zip(rho).map(|(l, r)| l / r).collect();
        let lw = lap_raw(grid, &w);
        for n in 0..len {
            out[n] = rho[n] / (mob * dt) * u[n] - s * lu[n] + lw[n];
        }
    };
    let rbar = rho.iter().sum::<f64>() / len as f64;
    let shift = rbar / (mob * dt);
    let precond = |r: &[f64], z: &mut [f64]| spectral.apply_function(r, z, |l| 1.0 / (shift + s * l + l * l / rbar));
    let mut u = vec![0.0; len];
    let report = pcg(apply, precond, &rhs, &mut u, params.solver)?;
    let cu: Vec<f64> = (0..len).map(|n| c_tilde[n] + u[n]).collect();
    let lap_cu = lap_raw(grid, &cu);
    let mu = (0..len)
        .map(|n| spec.dg(c_tilde[n]) + s * u[n] - lap_cu[n] / rho[n])
        .collect();
    Ok((mu, report.iterations))
}

/// How run drivers choose their step size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stepping {
    /// Adaptive step `stable_dt(state, params, cfl)`.
    Cfl(f64),
    /// Constant step; rejected if it ever exceeds the stability bound.
    Fixed(f64),
}

/// One row of run diagnostics, recorded at every sample time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub phase_mass: f64,
    pub e_total: f64,
    pub e_kinetic: f64,
    /// Pressure potential; always 0 for model H.
    pub e_pressure: f64,
    pub e_gradient: f64,
    pub e_potential: f64,
    pub dissipation_cum: f64,
    /// Last step size before this sample (0 for the initial sample).
    pub dt: f64,
    /// l2 norm of the velocity divergence (model H only).
    pub div_residual: f64,
}

impl Diagnostics {
    /// Relative (mass, phase-mass) drift from `self` to `later`. Phase mass
    /// is often near zero for symmetric data, so its drift is measured
    /// against `max(|phase mass|, mass)`.
    pub fn conservation_drift(&self, later: &Diagnostics) -> (f64, f64) {
        let m = self.mass.abs().max(f64::MIN_POSITIVE);
        let pm = self.phase_mass.abs().max(m);
        ((later.mass - self.mass).abs() / m, (later.phase_mass - self.phase_mass).abs() / pm)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub states: Vec<S>,
    pub diagnostics: Vec<Diagnostics>,
    pub steps: usize,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.t).collect()
    }

    pub fn last(&self) -> Option<&S> {
        self.states.last()
    }
}

/// Sample times `t0 + k * every` for `k = 0..=floor((t_end - t0) / every)`.
pub(crate) fn sample_times(t0: f64, t_end: f64, every: f64) -> Result<Vec<f64>> {
    if !(t_end.is_finite() && t0.is_finite()) || t_end < t0 {
        return Err(Error::InvalidParameter(format!("t_end = {t_end} precedes t0 = {t0}")));
    }
    if !(every.is_finite() && every > 0.0) {
        return Err(Error::InvalidParameter(format!("sample interval {every} must be positive")));
    }
    let k = ((t_end - t0) / every * (1.0 + 1e-12)).floor() as usize;
    Ok((0..=k).map(|i| t0 + i as f64 * every).collect())
}

/// Shared stepping loop: advances to each sample time, landing on it exactly.
pub(crate) fn drive<S: Clone>(
    initial: &S,
    t_of: impl Fn(&S) -> f64,
    set_t: impl Fn(&mut S, f64),
    t_end: f64,
    sample_every: f64,
    stepping: Stepping,
    bound: impl Fn(&S) -> Result<f64>,
    mut step: impl FnMut(&S, f64) -> Result<(S, f64)>,
    diag: impl Fn(&S, f64, f64) -> Diagnostics,
) -> Result<Trajectory<S>> {
    let t0 = t_of(initial);
    let times = sample_times(t0, t_end, sample_every)?;
    let (Stepping::Cfl(c) | Stepping::Fixed(c)) = stepping;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!("step control {c} must be positive")));
    }
    let mut state = initial.clone();
    let mut cum = 0.0;
    let mut last_dt = 0.0;
    let mut steps = 0;
    let mut states = vec![state.clone()];
    let mut diagnostics = vec![diag(&state, cum, 0.0)];
    for &target in &times[1..] {
        loop {
            let t = t_of(&state);
            let remaining = target - t;
            if remaining <= 1e-12 * target.abs().max(1.0) {
                set_t(&mut state, target);
                break;
            }
            let wrap = |e: Error| Error::StepFailed { t, source: Box::new(e) };
            let mut dt = match stepping {
                Stepping::Cfl(cfl) => bound(&state).map_err(|e| wrap(e))? * cfl,
                Stepping::Fixed(dt) => dt,
            };
            if dt >= remaining * (1.0 - 1e-9) {
                dt = remaining;
            } else if dt > 0.5 * remaining {
                // avoid a sliver step before the sample time
                dt = 0.5 * remaining;
            }
            let (next, rate) = step(&state, dt).map_err(|e| wrap(e))?;
            cum += dt * rate;
            last_dt = dt;
            steps += 1;
            state = next;
        }
        diagnostics.push(diag(&state, cum, last_dt));
        states.push(state.clone());
    }
    Ok(Trajectory {
        states,
        diagnostics,
        steps,
    })
}

pub(crate) fn compressible_diag(state: &CompressibleState, params: &PhysParams, cum: f64, dt: f64) -> Diagnostics {
    let e = energetics::total_energy(state, params);
    let m = state.grid().cell_measure();
    Diagnostics {
        t: state.t,
        mass: state.rho.values().iter().sum::<f64>() * m,
        phase_mass: state
            .rho
            .values()
            .iter()
            .zip(state.c.values())
            .map(|(r, c)| r * c)
            .sum::<f64>()
            * m,
        e_total: e.total,
        e_kinetic: e.kinetic,
        e_pressure: e.pressure_part,
        e_gradient: e.gradient_part,
        e_potential: e.potential_part,
        dissipation_cum: cum,
        dt,
        div_residual: 0.0,
    }
}

/// Integrates from `initial.t` to `t_end`, sampling every `sample_every`.
pub fn run_compressible(
    initial: &CompressibleState,
    params: &PhysParams,
    t_end: f64,
    sample_every: f64,
    stepping: Stepping,
) -> Result<Trajectory<CompressibleState>> {
    if let Stepping::Cfl(cfl) = stepping {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl = {cfl} must lie in (0, 1]")));
        }
    }
    let spectral = SpectralLaplacian::new(initial.grid());
    drive(
        initial,
        |s| s.t,
        |s, t| s.t = t,
        t_end,
        sample_every,
        stepping,
        |s| stable_dt(s, params, 1.0),
        |s, dt| advance(s, params, dt, Some(&spectral)).map(|(n, info)| (n, info.dissipation_rate)),
        |s, cum, dt| compressible_diag(s, params, cum, dt),
    )
}
