//! CSV, field-snapshot and plot files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::plot::{render, Plot, Series};
use super::sweep::SweepResult;
use crate::compressible::Diagnostics;
use crate::error::{Error, Result};
use crate::grid::write_fields;

pub const COMPRESSIBLE_COLUMNS: [&str; 10] = [
    "t",
    "mass",
    "phase_mass",
    "E_total",
    "E_kinetic",
    "E_pressure",
    "E_gradient",
    "E_potential",
    "dissipation_cum",
    "dt",
];

pub const MODEL_H_COLUMNS: [&str; 10] = [
    "t",
    "mass",
    "phase_mass",
    "E_total",
    "E_kinetic",
    "E_gradient",
    "E_potential",
    "dissipation_cum",
    "dt",
    "div_residual",
];

pub const SWEEP_COLUMNS: [&str; 7] = [
    "epsilon",
    "sup_Etilde",
    "order_running",
    "final_l1_rho",
    "final_l2_v",
    "final_h1_c",
    "energy_violation",
];

fn column(d: &Diagnostics, name: &str) -> f64 {
    match name {
        "t" => d.t,
        "mass" => d.mass,
        "phase_mass" => d.phase_mass,
        "E_total" => d.e_total,
        "E_kinetic" => d.e_kinetic,
        "E_pressure" => d.e_pressure,
        "E_gradient" => d.e_gradient,
        "E_potential" => d.e_potential,
        "dissipation_cum" => d.dissipation_cum,
        "dt" => d.dt,
        "div_residual" => d.div_residual,
        _ => unreachable!("unknown diagnostics column {name}"),
    }
}

fn set_column(d: &mut Diagnostics, name: &str, v: f64) -> bool {
    let slot = match name {
        "t" => &mut d.t,
        "mass" => &mut d.mass,
        "phase_mass" => &mut d.phase_mass,
        "E_total" => &mut d.e_total,
        "E_kinetic" => &mut d.e_kinetic,
        "E_pressure" => &mut d.e_pressure,
        "E_gradient" => &mut d.e_gradient,
        "E_potential" => &mut d.e_potential,
        "dissipation_cum" => &mut d.dissipation_cum,
        "dt" => &mut d.dt,
        "div_residual" => &mut d.div_residual,
        _ => return false,
    };
    *slot = v;
    true
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn join(row: &[f64]) -> String {
    row.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

/// Writes diagnostics rows with the given column set.
pub fn write_diagnostics(path: &Path, rows: &[Diagnostics], columns: &[&str]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", columns.join(",")).map_err(io)?;
    for d in rows {
        let vals: Vec<f64> = columns.iter().map(|c| column(d, c)).collect();
        writeln!(w, "{}", join(&vals)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a diagnostics CSV written by either solver; missing columns are 0.
pub fn read_diagnostics(path: &Path) -> Result<Vec<Diagnostics>> {
    let table = read_table(path)?;
    let mut out = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let mut d = Diagnostics::default();
        for (name, &v) in table.header.iter().zip(row) {
            if !set_column(&mut d, name, v) {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: 1,
                    msg: format!("unknown diagnostics column '{name}'"),
                });
            }
        }
        out.push(d);
    }
    Ok(out)
}

/// A numeric CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let mut lines = BufReader::new(file).lines();
    let header: Vec<String> = match lines.next() {
        Some(l) => l
            .map_err(|e| Error::io(path, e))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect(),
        None => {
            return Err(Error::Parse {
                path: origin,
                line: 1,
                msg: "empty file".into(),
            })
        }
    };
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::Parse {
            path: origin.clone(),
            line: k + 2,
            msg: e.to_string(),
        })?;
        if row.len() != header.len() {
            return Err(Error::Parse {
                path: origin.clone(),
                line: k + 2,
                msg: format!("{} fields, header has {}", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", SWEEP_COLUMNS.join(",")).map_err(io)?;
    for (rec, order) in result.records.iter().zip(result.running_orders()) {
        let row = match &rec.outcome {
            Ok(s) => [
                rec.eps,
                s.sup_etilde,
                order,
                s.final_norms.l1_rho,
                s.final_norms.l2_v,
                s.final_norms.h1_c,
                s.energy.violation,
            ],
            Err(_) => [rec.eps, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN],
        };
        writeln!(w, "{}", join(&row)).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn eps_tag(eps: f64) -> String {
    format!("eps_{eps}")
}

/// Writes every sweep artifact into `dir`; returns the written paths.
pub fn emit_outputs(result: &SweepResult, dir: &Path, emit_fields: bool, emit_plots: bool) -> Result<Vec<PathBuf>> {
    if result.records.is_empty() {
        return Err(Error::InsufficientData("empty sweep".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let p = dir.join("sweep.csv");
    write_sweep_csv(&p, result)?;
    written.push(p);

    let p = dir.join("reference_modelh.csv");
    write_diagnostics(&p, &result.reference.diagnostics, &MODEL_H_COLUMNS)?;
    written.push(p);

    let p = dir.join("uniform_estimates.csv");
    {
        let mut w = create(&p)?;
        let io = |e| Error::io(&p, e);
        writeln!(
            w,
            "epsilon,sup_sqrt_rho_v,sup_interior,sup_exterior,sup_grad_c,int_grad_mu_sq,sup_c,int_mu_sq"
        )
        .map_err(io)?;
        for (eps, s) in result.summaries() {
            let u = &s.uniform;
            let row = [
                eps,
                u.sup_sqrt_rho_v,
                u.sup_interior,
                u.sup_exterior,
                u.sup_grad_c,
                u.int_grad_mu_sq,
                u.sup_c,
                u.int_mu_sq,
            ];
            writeln!(w, "{}", join(&row)).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    written.push(p);

    for (eps, s) in result.summaries() {
        let p = dir.join(format!("diagnostics_{}.csv", eps_tag(eps)));
        write_diagnostics(&p, &s.diagnostics, &COMPRESSIBLE_COLUMNS)?;
        written.push(p);

        let p = dir.join(format!("relative_energy_{}.csv", eps_tag(eps)));
        let mut w = create(&p)?;
        let io = |e| Error::io(&p, e);
        writeln!(w, "t,kinetic_rel,pressure_rel,gradient_rel,potential_rel,convexify,E,Etilde").map_err(io)?;
        for (t, r) in &s.relative {
            let row = [
                *t,
                r.kinetic_rel,
                r.pressure_rel,
                r.gradient_rel,
                r.potential_rel,
                r.convexify,
                r.value_e,
                r.value_etilde,
            ];
            writeln!(w, "{}", join(&row)).map_err(io)?;
        }
        w.flush().map_err(io)?;
        written.push(p);

        if emit_fields {
            let st = &s.final_state;
            let p = dir.join(format!("fields_{}.txt", eps_tag(eps)));
            let mut w = create(&p)?;
            let mut cols: Vec<&[f64]> = vec![st.rho.values()];
            cols.extend(st.mom.comps().iter().map(|c| c.as_slice()));
            cols.push(st.c.values());
            cols.push(st.mu.values());
            write_fields(&mut w, st.grid(), &cols).map_err(|e| Error::io(&p, e))?;
            w.flush().map_err(|e| Error::io(&p, e))?;
            written.push(p);
        }
    }
    if emit_fields {
        let st = &result.reference.final_state;
        let p = dir.join("fields_reference.txt");
        let mut w = create(&p)?;
        let mut cols: Vec<&[f64]> = st.v.comps().iter().map(|c| c.as_slice()).collect();
        cols.push(st.p.values());
        cols.push(st.c.values());
        cols.push(st.mu.values());
        write_fields(&mut w, st.grid(), &cols).map_err(|e| Error::io(&p, e))?;
        w.flush().map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }

    if emit_plots {
        let pts: Vec<(f64, f64)> = result.summaries().map(|(e, s)| (e, s.sup_etilde)).collect();
        let first = pts.first().copied().unwrap_or((1.0, 1.0));
        let guide: Vec<(f64, f64)> = pts.iter().map(|&(e, _)| (e, first.1 * e / first.0)).collect();
        let svg = render(
            &Plot {
                title: "sup_t modified relative energy",
                x_label: "eps",
                y_label: "sup Etilde",
                log_x: true,
                log_y: true,
            },
            &[
                Series {
                    name: "measured".into(),
                    points: pts,
                },
                Series {
                    name: "slope 1".into(),
                    points: guide,
                },
            ],
        );
        let p = dir.join("sweep_loglog.svg");
        fs::write(&p, svg).map_err(|e| Error::io(&p, e))?;
        written.push(p);

        let series: Vec<Series> = result
            .summaries()
            .map(|(e, s)| Series {
                name: format!("eps = {e}"),
                points: s.diagnostics.iter().map(|d| (d.t, d.e_total)).collect(),
            })
            .chain(std::iter::once(Series {
                name: "model H".into(),
                points: result.reference.diagnostics.iter().map(|d| (d.t, d.e_total)).collect(),
            }))
            .collect();
        let svg = render(
            &Plot {
                title: "total energy",
                x_label: "t",
                y_label: "E",
                log_x: false,
                log_y: false,
            },
            &series,
        );
        let p = dir.join("energy_vs_time.svg");
        fs::write(&p, svg).map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}
