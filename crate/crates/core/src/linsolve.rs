//! Matrix-free preconditioned conjugate gradients and the separable spectral
//! preconditioner for the discrete Laplacian.
//!
//! The composed Laplacian is diagonalised exactly by cosine modes
//! `cos(pi k (i + 1/2) / n)` at walls (mirror-even extension) and by the real
//! Fourier basis in periodic mode, with eigenvalues `-(sin(theta_k) / h)^2`.
//! Any constant-coefficient polynomial in the Laplacian is therefore inverted
//! by one forward and one inverse transform; with variable coefficients it
//! serves as a preconditioner.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{BcMode, Grid};

/// Orthonormal eigenbasis of the 1D composed Laplacian along one axis.
#[derive(Clone, Debug)]
struct AxisBasis {
    n: usize,
    /// `q[i * n + k]`: value of mode `k` at cell `i`.
    q: Vec<f64>,
    /// Eigenvalues of `-laplacian`, nonnegative.
    lambda: Vec<f64>,
}

impl AxisBasis {
    fn new(n: usize, h: f64, bc: BcMode) -> Self {
        let mut q = vec![0.0; n * n];
        let mut lambda = vec![0.0; n];
        let nf = n as f64;
        match bc {
            BcMode::Walls => {
                for k in 0..n {
                    let alpha = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    let theta = PI * k as f64 / nf;
                    lambda[k] = (theta.sin() / h).powi(2);
                    for i in 0..n {
                        q[i * n + k] = alpha * (theta * (i as f64 + 0.5)).cos();
                    }
                }
            }
            BcMode::Periodic => {
                let mut col = 0;
                let mut push = |theta: f64, f: &dyn Fn(usize) -> f64, q: &mut Vec<f64>| {
                    lambda[col] = (theta.sin() / h).powi(2);
                    for i in 0..n {
                        q[i * n + col] = f(i);
                    }
                    col += 1;
                };
                let c0 = (1.0 / nf).sqrt();
                push(0.0, &|_| c0, &mut q);
                let c = (2.0 / nf).sqrt();
                let half = n / 2;
                for k in 1..n.div_ceil(2) {
                    let w = 2.0 * PI * k as f64 / nf;
                    push(w, &|i| c * (w * i as f64).cos(), &mut q);
                    push(w, &|i| c * (w * i as f64).sin(), &mut q);
                }
                if n % 2 == 0 {
                    let w = 2.0 * PI * half as f64 / nf;
                    push(w, &|i| if i % 2 == 0 { c0 } else { -c0 }, &mut q);
                }
                debug_assert_eq!(col, n);
            }
        }
        AxisBasis { n, q, lambda }
    }
}

/// Separable spectral representation of the Laplacian on a grid.
#[derive(Clone, Debug)]
pub struct SpectralLaplacian {
    grid: Grid,
    x: AxisBasis,
    y: Option<AxisBasis>,
}

impl SpectralLaplacian {
    pub fn new(grid: &Grid) -> Self {
        let x = AxisBasis::new(grid.nx(), grid.hx(), grid.bc());
        let y = (grid.dim() == 2).then(|| AxisBasis::new(grid.ny(), grid.hy(), grid.bc()));
        SpectralLaplacian { grid: *grid, x, y }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalue of `-laplacian` for coefficient index `cell`.
    fn eigen(&self, cell: usize) -> f64 {
        let nx = self.x.n;
        let (kx, ky) = (cell % nx, cell / nx);
        self.x.lambda[kx] + self.y.as_ref().map_or(0.0, |y| y.lambda[ky])
    }

    fn transform(&self, src: &[f64], out: &mut [f64], forward: bool) {
        let nx = self.x.n;
        let ny = self.grid.ny();
        let mut tmp = vec![0.0; src.len()];
        // x direction
        for j in 0..ny {
            let row = &src[j * nx..(j + 1) * nx];
            let o = &mut tmp[j * nx..(j + 1) * nx];
            for (a, oa) in o.iter_mut().enumerate() {
                let mut s = 0.0;
                if forward {
                    for (i, r) in row.iter().enumerate() {
                        s += self.x.q[i * nx + a] * r;
                    }
                } else {
                    for (k, r) in row.iter().enumerate() {
                        s += self.x.q[a * nx + k] * r;
                    }
                }
                *oa = s;
            }
        }
        match &self.y {
            None => out.copy_from_slice(&tmp),
            Some(yb) => {
                let mut col = vec![0.0; ny];
                for i in 0..nx {
                    for j in 0..ny {
                        col[j] = tmp[j * nx + i];
                    }
                    for a in 0..ny {
                        let mut s = 0.0;
                        if forward {
                            for (j, c) in col.iter().enumerate() {
                                s += yb.q[j * ny + a] * c;
                            }
                        } else {
                            for (k, c) in col.iter().enumerate() {
                                s += yb.q[a * ny + k] * c;
                            }
                        }
                        out[a * nx + i] = s;
                    }
                }
            }
        }
    }

    /// `out = Q diag(g(lambda)) Q^T r`, where `lambda >= 0` are the
    /// eigenvalues of `-laplacian`.
    pub fn apply_function(&self, r: &[f64], out: &mut [f64], g: impl Fn(f64) -> f64) {
        let mut coef = vec![0.0; r.len()];
        self.transform(r, &mut coef, true);
        for (cell, c) in coef.iter_mut().enumerate() {
            *c *= g(self.eigen(cell));
        }
        self.transform(&coef, out, false);
    }

    /// Pseudo-inverse of `-laplacian`: zero on the null space.
    pub fn solve_neg_laplacian(&self, r: &[f64], out: &mut [f64]) {
        let tiny = 1e-12 * self.max_eigen();
        self.apply_function(r, out, |l| if l > tiny { 1.0 / l } else { 0.0 });
    }

    pub fn max_eigen(&self) -> f64 {
        let mx = self.x.lambda.iter().copied().fold(0.0, f64::max);
        let my = self
            .y
            .as_ref()
            .map_or(0.0, |y| y.lambda.iter().copied().fold(0.0, f64::max));
        mx + my
    }
}

/// Smallest relative residual `pcg` will insist on; an exact spectral
/// preconditioner stalls around here.
pub const ROUNDOFF_FLOOR: f64 = 1e3 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for a symmetric positive
/// (semi-)definite operator. `x` holds the initial guess on entry.
///
/// For singular operators the right-hand side must be consistent and the
/// preconditioner must vanish on the null space. Tolerances below
/// [`ROUNDOFF_FLOOR`] are clamped to it.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    opts: CgOptions,
) -> Result<CgReport> {
    pcg_scaled(apply, precond, b, x, opts, 0.0)
}

/// `pcg` with residuals measured against `max(|b|, scale)`. Use when `b`
/// is a small difference of large terms of size `scale`, so that round-off
/// in `b` does not set an unreachable target.
pub fn pcg_scaled(
    apply: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    opts: CgOptions,
    scale: f64,
) -> Result<CgReport> {
    let n = b.len();
    let braw = dot(b, b).sqrt();
    if braw == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let bnorm = braw.max(scale);
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / bnorm;
    if !res.is_finite() {
        return Err(Error::NonFinite("linear system right-hand side".into()));
    }
    let tol = opts.tol.max(ROUNDOFF_FLOOR);
    for it in 0..opts.max_iter {
        if res <= tol {
            return Ok(CgReport {
                iterations: it,
                relative_residual: res,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= tol {
        return Ok(CgReport {
            iterations: opts.max_iter,
            relative_residual: res,
        });
    }
    Err(Error::SolverNonConvergence {
        iterations: opts.max_iter,
        residual: res,
    })
}

/// Natural size of `div(w)`: `|w|_2 / h_min`.
pub fn divergence_scale(grid: &Grid, w: &[Vec<f64>]) -> f64 {
    w.iter().flatten().map(|x| x * x).sum::<f64>().sqrt() / grid.h_min()
}

/// Solves `-laplacian(phi) = rhs` for mean-zero `phi` (Neumann or periodic).
pub fn solve_poisson(
    spectral: &SpectralLaplacian,
    rhs: &[f64],
    opts: CgOptions,
) -> Result<(Vec<f64>, CgReport)> {
    solve_poisson_scaled(spectral, rhs, opts, 0.0)
}

/// `solve_poisson` with the residual scale of [`pcg_scaled`]. The mean of
/// `rhs` (the null-space component) is removed first.
pub fn solve_poisson_scaled(
    spectral: &SpectralLaplacian,
    rhs: &[f64],
    opts: CgOptions,
    scale: f64,
) -> Result<(Vec<f64>, CgReport)> {
    let grid = *spectral.grid();
    let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
    let rhs: Vec<f64> = rhs.iter().map(|x| x - mean).collect();
    let rhs = &rhs[..];
    let mut phi = vec![0.0; rhs.len()];
    let report = pcg_scaled(
        |u, out| {
            let l = crate::operators::lap_raw(&grid, u);
            for (o, v) in out.iter_mut().zip(l) {
                *o = -v;
            }
        },
        |r, z| spectral.solve_neg_laplacian(r, z),
        rhs,
        &mut phi,
        opts,
        scale,
    )?;
    let mean = phi.iter().sum::<f64>() / phi.len() as f64;
    phi.iter_mut().for_each(|v| *v -= mean);
    Ok((phi, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::operators::lap_raw;

    fn check_eigenbasis(grid: Grid) {
        let sp = SpectralLaplacian::new(&grid);
        let n = grid.len();
        // each basis vector is an eigenvector of the composed operator
        for cell in (0..n).step_by(n / 7 + 1) {
            let mut e = vec![0.0; n];
            e[cell] = 1.0;
            let mut mode = vec![0.0; n];
            sp.transform(&e, &mut mode, false);
            let l = lap_raw(&grid, &mode);
            let lam = sp.eigen(cell);
            for (a, b) in l.iter().zip(&mode) {
                assert!((a + lam * b).abs() < 1e-8 * (1.0 + lam), "{a} vs {}", -lam * b);
            }
        }
        // orthonormal: transform round trip
        let f: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mut c = vec![0.0; n];
        let mut back = vec![0.0; n];
        sp.transform(&f, &mut c, true);
        sp.transform(&c, &mut back, false);
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenbases_diagonalise_the_laplacian() {
        check_eigenbasis(make_grid(12, 1, 1.0, 1.0, BcMode::Walls).unwrap());
        check_eigenbasis(make_grid(12, 1, 1.0, 1.0, BcMode::Periodic).unwrap());
        check_eigenbasis(make_grid(9, 1, 1.0, 1.0, BcMode::Periodic).unwrap());
        check_eigenbasis(make_grid(8, 6, 1.0, 0.5, BcMode::Walls).unwrap());
        check_eigenbasis(make_grid(8, 6, 1.0, 0.5, BcMode::Periodic).unwrap());
    }

    #[test]
    fn poisson_solve_recovers_mean_zero_solution() {
        let grid = make_grid(16, 12, 1.0, 1.0, BcMode::Walls).unwrap();
        let sp = SpectralLaplacian::new(&grid);
        let exact: Vec<f64> = (0..grid.len()).map(|i| ((i * 37) % 11) as f64).collect();
        let mean = exact.iter().sum::<f64>() / exact.len() as f64;
        let exact: Vec<f64> = exact.iter().map(|v| v - mean).collect();
        let rhs: Vec<f64> = lap_raw(&grid, &exact).iter().map(|v| -v).collect();
        let (phi, rep) = solve_poisson(&sp, &rhs, CgOptions::default()).unwrap();
        assert!(rep.iterations <= 3);
        for (a, b) in phi.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let b = vec![1.0, 2.0, 3.0];
        let mut x = vec![0.0; 3];
        let r = pcg(
            |u, out| {
                out[0] = 4.0 * u[0] + u[1];
                out[1] = u[0] + 3.0 * u[1] + u[2];
                out[2] = u[1] + 2.0 * u[2];
            },
            |r, z| z.copy_from_slice(r),
            &b,
            &mut x,
            CgOptions { tol: 1e-14, max_iter: 1 },
        );
        assert!(matches!(r, Err(Error::SolverNonConvergence { .. })));
    }
}
