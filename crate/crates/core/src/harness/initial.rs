//! Well-prepared initial data: `rho = 1 + eps^2 g`, common velocity and
//! concentration for the compressible run and its model-H reference.

use std::f64::consts::PI;

use super::config::{ConcentrationProfile, Config, DensityProfile, VelocityProfile};
use crate::compressible::{CompressibleState, RHO_FLOOR};
use crate::error::{Error, Result};
use crate::grid::{BcMode, Grid, ScalarField, VectorField};
use crate::linsolve::{divergence_scale, solve_poisson_scaled, CgOptions, SpectralLaplacian};
use crate::model_h::{mu_incompressible, IncompressibleState};
use crate::operators::{self, div_raw, grad_raw, TensorBc};

fn poisson_opts() -> CgOptions {
    CgOptions {
        tol: 1e-13,
        max_iter: 500,
    }
}

pub fn initial_concentration(cfg: &Config, grid: Grid) -> ScalarField {
    let (lx, ly) = (grid.lx(), grid.ly());
    let a = cfg.ic.c_amplitude;
    let w = cfg.ic.c_width;
    let two_d = grid.dim() > 1;
    match cfg.ic.concentration {
        ConcentrationProfile::TanhStripe => match grid.bc() {
            BcMode::Walls => ScalarField::from_fn(grid, |x, _| a * ((x - 0.5 * lx) / w).tanh()),
            // a band, so that the profile is periodic up to exponentially small terms
            BcMode::Periodic => ScalarField::from_fn(grid, |x, _| {
                a * (((x - 0.25 * lx) / w).tanh() - ((x - 0.75 * lx) / w).tanh() - 1.0)
            }),
        },
        ConcentrationProfile::Cosine => ScalarField::from_fn(grid, |x, y| {
            let k = if grid.bc() == BcMode::Walls { PI } else { 2.0 * PI };
            let cy = if two_d { (k * y / ly).cos() } else { 1.0 };
            a * (k * x / lx).cos() * cy
        }),
    }
}

/// Removes the discrete gradient part of `w`.
fn project_div_free(w: &VectorField) -> Result<VectorField> {
    let grid = *w.grid();
    let div = div_raw(&grid, w.comps());
    let rhs: Vec<f64> = div.iter().map(|x| -x).collect();
    let scale = divergence_scale(&grid, w.comps());
    let (phi, _) = solve_poisson_scaled(&SpectralLaplacian::new(&grid), &rhs, poisson_opts(), scale)?;
    let g = grad_raw(&grid, &phi);
    Ok(VectorField::from_raw(
        grid,
        w.comps()
            .iter()
            .zip(&g)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect(),
    ))
}

pub fn initial_velocity(cfg: &Config, grid: Grid) -> Result<VectorField> {
    match cfg.ic.velocity {
        VelocityProfile::None => Ok(VectorField::zeros(grid)),
        VelocityProfile::Vortex => {
            if grid.dim() < 2 {
                return Err(Error::Config("vortex velocity needs a two-dimensional grid".into()));
            }
            let (lx, ly) = (grid.lx(), grid.ly());
            let a = cfg.ic.velocity_amplitude;
            // psi = a sin^2(pi x / lx) sin^2(pi y / ly), v = (psi_y, -psi_x)
            let v = VectorField::from_fn(grid, |x, y| {
                let (sx, sy) = ((PI * x / lx).sin(), (PI * y / ly).sin());
                [
                    a * sx * sx * (2.0 * PI * y / ly).sin() * PI / ly,
                    -a * sy * sy * (2.0 * PI * x / lx).sin() * PI / lx,
                ]
            });
            project_div_free(&v)
        }
    }
}

/// Pressure `pi` (mean zero) with `grad pi` the gradient part of `force`.
fn pressure_of(force: &[Vec<f64>], grid: Grid) -> Result<Vec<f64>> {
    let div = div_raw(&grid, force);
    let rhs: Vec<f64> = div.iter().map(|x| -x).collect();
    let scale = divergence_scale(&grid, force);
    let (phi, _) = solve_poisson_scaled(&SpectralLaplacian::new(&grid), &rhs, poisson_opts(), scale)?;
    Ok(phi.iter().map(|x| -x).collect())
}

fn convective(v: &VectorField) -> Result<Vec<Vec<f64>>> {
    let vv = operators::outer(v, v)?;
    Ok(operators::divergence_tensor(&vv, TensorBc::Stress).comps().to_vec())
}

/// Density profile `g` (before the `eps^2` scaling and amplitude).
pub fn density_profile(cfg: &Config, grid: Grid, v: &VectorField, c: &ScalarField) -> Result<ScalarField> {
    let (lx, ly) = (grid.lx(), grid.ly());
    let two_d = grid.dim() > 1;
    let g = match cfg.ic.density {
        DensityProfile::Zero => ScalarField::constant(grid, 0.0),
        DensityProfile::Cosine => ScalarField::from_fn(grid, |x, y| {
            let cy = if two_d { (2.0 * PI * y / ly).cos() } else { 1.0 };
            (2.0 * PI * x / lx).cos() * cy
        }),
        DensityProfile::Sine => ScalarField::from_fn(grid, |x, _| (2.0 * PI * x / lx).sin()),
        DensityProfile::Balanced => {
            // p_e'(1) g = pi with grad pi = -lap c grad c - div(v (x) v)
            let lap = operators::lap_raw(&grid, c.values());
            let gc = grad_raw(&grid, c.values());
            let conv = convective(v)?;
            let force: Vec<Vec<f64>> = gc
                .iter()
                .zip(&conv)
                .map(|(g, cv)| (0..grid.len()).map(|n| -lap[n] * g[n] - cv[n]).collect())
                .collect();
            let pi = pressure_of(&force, grid)?;
            let dp1 = cfg.params()?.pressure.dp(1.0);
            ScalarField::from_raw(grid, pi.iter().map(|x| x / dp1).collect())
        }
    };
    Ok(g)
}

/// Builds `(compressible state, model-H state)` at `t = 0` for Mach
/// parameter `eps`.
pub fn well_prepared_initial_data(cfg: &Config, eps: f64) -> Result<(CompressibleState, IncompressibleState)> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let spec = params.potential;
    let c = initial_concentration(cfg, grid);
    let v = initial_velocity(cfg, grid)?;
    let g = density_profile(cfg, grid, &v, &c)?;
    let amp = cfg.ic.density_amplitude * eps * eps;
    let rho = g.map(|g| 1.0 + amp * g);
    if let Some((cell, &value)) = rho.values().iter().enumerate().find(|(_, &r)| !(r > RHO_FLOOR)) {
        return Err(Error::DensityFloor {
            cell,
            value,
            floor: RHO_FLOOR,
        });
    }
    let mom = VectorField::from_raw(
        grid,
        v.comps()
            .iter()
            .map(|vk| vk.iter().zip(rho.values()).map(|(a, r)| a * r).collect())
            .collect(),
    );
    let comp = CompressibleState::new(rho, mom, c.clone(), eps, 0.0, &spec)?;

    // model-H pressure balancing mu grad c - grad G(c) - div(v (x) v)
    let mu = mu_incompressible(&c, &spec);
    let gc = grad_raw(&grid, c.values());
    let gpot: Vec<f64> = c.values().iter().map(|&x| spec.g(x)).collect();
    let gg = grad_raw(&grid, &gpot);
    let conv = convective(&v)?;
    let force: Vec<Vec<f64>> = (0..grid.dim())
        .map(|a| {
            (0..grid.len())
                .map(|n| mu.values()[n] * gc[a][n] - gg[a][n] - conv[a][n])
                .collect()
        })
        .collect();
    let p = ScalarField::from_raw(grid, pressure_of(&force, grid)?);
    let reference = IncompressibleState::new(v, p, c, &spec)?;
    Ok((comp, reference))
}
