//! Centered second-order difference operators on the collocated grid.
//!
//! Every derivative is the centered difference `(f[i+1] - f[i-1]) / 2h`. At a
//! wall the missing neighbour comes from a mirror ghost cell whose sign is
//! set by the parity of the differentiated quantity: even for scalars with a
//! homogeneous Neumann condition, odd for quantities vanishing at the wall
//! (no-slip velocity, normal fluxes). Derivatives flip parity, so
//! `divergence(gradient(f))` uses even ghosts for `f` and odd ghosts for the
//! gradient. With these choices `gradient` and `-divergence` are exact
//! adjoints and `laplacian` is literally their composition.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, TensorField, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ghost {
    Even,
    Odd,
}

/// Ghost layout for the divergence of a tensor field at walls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorBc {
    /// All entries mirrored evenly (stress built from a no-slip velocity
    /// gradient). Makes `v . div S` the exact adjoint of `S : grad v`.
    Stress,
    /// Diagonal even, off-diagonal odd (products `grad c (x) grad c` of
    /// Neumann scalars).
    Product,
}

/// Centered derivative along `axis` (0 = x, 1 = y) written into `out`.
pub(crate) fn diff_into(grid: &Grid, src: &[f64], axis: usize, ghost: Ghost, out: &mut [f64]) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let periodic = grid.bc() == crate::grid::BcMode::Periodic;
    let sign = match ghost {
        Ghost::Even => 1.0,
        Ghost::Odd => -1.0,
    };
    if axis == 0 {
        let inv = 0.5 / grid.hx();
        for j in 0..ny {
            let row = &src[j * nx..(j + 1) * nx];
            let o = &mut out[j * nx..(j + 1) * nx];
            let (left0, right_end) = if periodic {
                (row[nx - 1], row[0])
            } else {
                (sign * row[0], sign * row[nx - 1])
            };
            o[0] = (row[1] - left0) * inv;
            for i in 1..nx - 1 {
                o[i] = (row[i + 1] - row[i - 1]) * inv;
            }
            o[nx - 1] = (right_end - row[nx - 2]) * inv;
        }
    } else {
        debug_assert!(ny > 1);
        let inv = 0.5 / grid.hy();
        for j in 0..ny {
            for i in 0..nx {
                let down = if j > 0 {
                    src[(j - 1) * nx + i]
                } else if periodic {
                    src[(ny - 1) * nx + i]
                } else {
                    sign * src[i]
                };
                let up = if j + 1 < ny {
                    src[(j + 1) * nx + i]
                } else if periodic {
                    src[i]
                } else {
                    sign * src[(ny - 1) * nx + i]
                };
                out[j * nx + i] = (up - down) * inv;
            }
        }
    }
}

pub(crate) fn diff(grid: &Grid, src: &[f64], axis: usize, ghost: Ghost) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    diff_into(grid, src, axis, ghost, &mut out);
    out
}

/// Gradient of a raw scalar array with Neumann (even) ghosts.
pub(crate) fn grad_raw(grid: &Grid, f: &[f64]) -> Vec<Vec<f64>> {
    (0..grid.dim())
        .map(|k| diff(grid, f, k, Ghost::Even))
        .collect()
}

/// Divergence of raw components with odd ghosts (zero normal component).
pub(crate) fn div_raw(grid: &Grid, w: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    let mut tmp = vec![0.0; grid.len()];
    for (k, comp) in w.iter().enumerate() {
        diff_into(grid, comp, k, Ghost::Odd, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += t;
        }
    }
    out
}

pub(crate) fn lap_raw(grid: &Grid, f: &[f64]) -> Vec<f64> {
    div_raw(grid, &grad_raw(grid, f))
}

pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField::from_raw(*f.grid(), grad_raw(f.grid(), f.values()))
}

pub fn divergence(w: &VectorField) -> ScalarField {
    ScalarField::from_raw(*w.grid(), div_raw(w.grid(), w.comps()))
}

/// `divergence(gradient(f))`; annihilates constants exactly.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    ScalarField::from_raw(*f.grid(), lap_raw(f.grid(), f.values()))
}

/// `(grad v)_{ab} = d_b v_a` with no-slip (odd) ghosts.
pub fn velocity_gradient(v: &VectorField) -> TensorField {
    let grid = *v.grid();
    let d = grid.dim();
    let mut t = TensorField::zeros(grid);
    for a in 0..d {
        for b in 0..d {
            diff_into(&grid, v.comp(a), b, Ghost::Odd, t.entry_mut(a, b));
        }
    }
    t
}

/// `1/2 (grad v + grad v^T) - (1/d) (div v) I`.
pub fn sym_grad_traceless(v: &VectorField) -> TensorField {
    sym_traceless_of(&velocity_gradient(v))
}

pub(crate) fn sym_traceless_of(g: &TensorField) -> TensorField {
    let grid = *g.grid();
    let d = grid.dim();
    let div = g.trace();
    let mut t = TensorField::zeros(grid);
    for a in 0..d {
        for b in 0..d {
            let (gab, gba) = (g.entry(a, b), g.entry(b, a));
            let out = t.entry_mut(a, b);
            for n in 0..out.len() {
                out[n] = 0.5 * (gab[n] + gba[n]);
                if a == b {
                    out[n] -= div.values()[n] / d as f64;
                }
            }
        }
    }
    t
}

/// Row-wise divergence `(div T)_a = sum_b d_b T_ab`.
pub fn divergence_tensor(t: &TensorField, bc: TensorBc) -> VectorField {
    let grid = *t.grid();
    let d = grid.dim();
    let mut comps = vec![vec![0.0; grid.len()]; d];
    let mut tmp = vec![0.0; grid.len()];
    for (a, comp) in comps.iter_mut().enumerate() {
        for b in 0..d {
            let ghost = match bc {
                TensorBc::Stress => Ghost::Even,
                TensorBc::Product if a == b => Ghost::Even,
                TensorBc::Product => Ghost::Odd,
            };
            diff_into(&grid, t.entry(a, b), b, ghost, &mut tmp);
            for (o, x) in comp.iter_mut().zip(&tmp) {
                *o += x;
            }
        }
    }
    VectorField::from_raw(grid, comps)
}

/// Cell-wise outer product `u (x) w`.
pub fn outer(u: &VectorField, w: &VectorField) -> Result<TensorField> {
    u.grid().check_same(w.grid())?;
    if u.dim() != w.dim() {
        return Err(Error::ShapeMismatch("vector dimensions differ".into()));
    }
    let d = u.dim();
    let mut t = TensorField::zeros(*u.grid());
    for a in 0..d {
        for b in 0..d {
            let (ua, wb) = (u.comp(a), w.comp(b));
            for (n, o) in t.entry_mut(a, b).iter_mut().enumerate() {
                *o = ua[n] * wb[n];
            }
        }
    }
    Ok(t)
}
