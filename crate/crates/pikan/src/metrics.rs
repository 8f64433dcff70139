//! Error metrics for comparing predicted displacement fields against a
//! reference field sampled at the same points.

use crate::error::{PikanError, Result};
use crate::geometry::Point2;
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy)]
pub struct FieldSample {
    pub point: Point2,
    pub u: (f64, f64),
    /// (sigma_xx, sigma_yy, sigma_xy) when the source carries stresses.
    pub stress: Option<(f64, f64, f64)>,
}

pub fn u_mag(ux: f64, uy: f64) -> f64 {
    ux.hypot(uy)
}

/// Coordinate tolerance used when matching up two sampled fields.
const POINT_TOL: f64 = 1e-9;

fn check_matching(pred: &[FieldSample], reference: &[FieldSample]) -> Result<()> {
    if pred.len() != reference.len() {
        return Err(PikanError::Metrics(format!(
            "point count mismatch: {} vs {}",
            pred.len(),
            reference.len()
        )));
    }
    for (p, r) in pred.iter().zip(reference) {
        if p.point.dist(&r.point) > POINT_TOL {
            return Err(PikanError::Metrics(format!(
                "point mismatch: ({}, {}) vs ({}, {})",
                p.point.x, p.point.y, r.point.x, r.point.y
            )));
        }
    }
    Ok(())
}

/// Componentwise |u_pred − u_ref| at each shared point.
pub fn abs_error(pred: &[FieldSample], reference: &[FieldSample]) -> Result<Vec<(f64, f64)>> {
    check_matching(pred, reference)?;
    Ok(pred
        .iter()
        .zip(reference)
        .map(|(p, r)| ((p.u.0 - r.u.0).abs(), (p.u.1 - r.u.1).abs()))
        .collect())
}

/// Componentwise |(u_pred − u_ref) / u_ref| in percent. Points where the
/// reference component is effectively zero are skipped and counted.
#[derive(Debug, Clone)]
pub struct RelErrorReport {
    /// Percent error per evaluated point (component value, point index).
    pub values: Vec<(usize, f64)>,
    pub skipped: usize,
}

pub fn rel_error(
    pred: &[FieldSample],
    reference: &[FieldSample],
    component: usize,
) -> Result<RelErrorReport> {
    check_matching(pred, reference)?;
    let comp = |s: &FieldSample| if component == 0 { s.u.0 } else { s.u.1 };
    let scale = reference
        .iter()
        .map(|r| comp(r).abs())
        .fold(0.0f64, f64::max);
    let mut values = Vec::new();
    let mut skipped = 0usize;
    for (i, (p, r)) in pred.iter().zip(reference).enumerate() {
        let denom = comp(r);
        if denom.abs() < 1e-12 * scale.max(1e-300) {
            skipped += 1;
            continue;
        }
        values.push((i, ((comp(p) - denom) / denom).abs() * 100.0));
    }
    if values.is_empty() {
        return Err(PikanError::Metrics(
            "relative error undefined: reference is zero at every point".into(),
        ));
    }
    Ok(RelErrorReport { values, skipped })
}

/// Relative L2 norm error:
/// sqrt(Σ‖u_pred − u_ref‖²) / sqrt(Σ‖u_ref‖²) with per-point 2-vector norms.
pub fn rel_l2(pred: &[FieldSample], reference: &[FieldSample]) -> Result<f64> {
    check_matching(pred, reference)?;
    if pred.is_empty() {
        return Err(PikanError::Metrics("empty field".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, r) in pred.iter().zip(reference) {
        num += (p.u.0 - r.u.0).powi(2) + (p.u.1 - r.u.1).powi(2);
        den += r.u.0 * r.u.0 + r.u.1 * r.u.1;
    }
    if den == 0.0 {
        return Err(PikanError::Metrics("reference field has zero norm".into()));
    }
    Ok((num / den).sqrt())
}

/// Reads a sampled field from CSV `x,y,ux,uy[,sxx,syy,sxy]`; a header row
/// is detected and skipped.
pub fn read_field_csv(path: &Path) -> Result<Vec<FieldSample>> {
    let file = std::fs::File::open(path)
        .map_err(|e| PikanError::Metrics(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line =
            line.map_err(|e| PikanError::Metrics(format!("{}: {e}", path.display())))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if lineno == 0 && fields[0].parse::<f64>().is_err() {
            continue; // header
        }
        let parse = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .ok_or_else(|| {
                    PikanError::Metrics(format!(
                        "{}:{}: expected at least {} columns",
                        path.display(),
                        lineno + 1,
                        i + 1
                    ))
                })?
                .parse::<f64>()
                .map_err(|e| {
                    PikanError::Metrics(format!("{}:{}: {e}", path.display(), lineno + 1))
                })
        };
        let sample = FieldSample {
            point: Point2::new(parse(0)?, parse(1)?),
            u: (parse(2)?, parse(3)?),
            stress: if fields.len() >= 7 {
                Some((parse(4)?, parse(5)?, parse(6)?))
            } else {
                None
            },
        };
        if !sample.point.x.is_finite()
            || !sample.point.y.is_finite()
            || !sample.u.0.is_finite()
            || !sample.u.1.is_finite()
        {
            return Err(PikanError::Metrics(format!(
                "{}:{}: non-finite value",
                path.display(),
                lineno + 1
            )));
        }
        out.push(sample);
    }
    Ok(out)
}

/// Writes the per-point absolute errors next to a human-readable summary.
pub fn write_comparison(
    out: &mut dyn Write,
    pred: &[FieldSample],
    reference: &[FieldSample],
) -> Result<()> {
    let abs = abs_error(pred, reference)?;
    let l2 = rel_l2(pred, reference)?;
    let report = |e: &mut dyn Write| -> std::io::Result<()> {
        writeln!(e, "points: {}", pred.len())?;
        let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
        for &(ax, ay) in &abs {
            max_x = max_x.max(ax);
            max_y = max_y.max(ay);
        }
        writeln!(e, "max |u_x error|: {max_x:.6e}")?;
        writeln!(e, "max |u_y error|: {max_y:.6e}")?;
        for (label, comp) in [("u_x", 0usize), ("u_y", 1usize)] {
            match rel_error(pred, reference, comp) {
                Ok(r) => {
                    let mean: f64 = r.values.iter().map(|v| v.1).sum::<f64>() / r.values.len() as f64;
                    writeln!(
                        e,
                        "mean relative {label} error: {mean:.4}% ({} points skipped, zero reference)",
                        r.skipped
                    )?;
                }
                Err(_) => writeln!(e, "mean relative {label} error: n/a (zero reference)")?,
            }
        }
        writeln!(e, "relative L2 norm error: {l2:.6e}")
    };
    report(out).map_err(PikanError::Io)
}
