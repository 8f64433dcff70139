//! Energy-based loss assembly: admissible displacement fields, per-region
//! internal strain energy by quadrature, external work of the prescribed
//! tractions, and their parameter gradients.

use crate::autodiff::{DualScalar, InputAxis, Tape, ZERO};
use crate::elasticity::{energy_density_on_tape, Material};
use crate::error::{PikanError, Result};
use crate::geometry::{pairwise_sum, Point2, QuadratureRule};
use crate::kan::KanNetwork;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Fixed work unit for parallel loss evaluation. Chunk boundaries, and
/// therefore the floating-point reduction tree, do not depend on the
/// worker count.
const CHUNK: usize = 1024;

/// Any architecture that maps two normalized coordinates to two outputs on
/// the tape can drive the energy method; the admissible field and loss
/// assembly are architecture-agnostic.
pub trait FieldNetwork: Send + Sync {
    fn n_params(&self) -> usize;
    fn init(&self, seed: u64) -> Vec<f64>;
    fn forward(&self, tape: &mut Tape, x: DualScalar, y: DualScalar) -> Vec<DualScalar>;
}

impl FieldNetwork for KanNetwork {
    fn n_params(&self) -> usize {
        KanNetwork::n_params(self)
    }

    fn init(&self, seed: u64) -> Vec<f64> {
        KanNetwork::init(self, seed)
    }

    fn forward(&self, tape: &mut Tape, x: DualScalar, y: DualScalar) -> Vec<DualScalar> {
        KanNetwork::forward(self, tape, x, y)
    }
}

/// Maps physical coordinates (mm) to the normalized network inputs
/// x̃ = (x − origin) / length.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Normalization {
    pub length: f64,
    pub origin: (f64, f64),
}

impl Normalization {
    pub fn for_extent(origin: Point2, width: f64, height: f64) -> Self {
        Normalization { length: width.max(height), origin: (origin.x, origin.y) }
    }

    pub fn to_normalized(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.origin.0) / self.length, (p.y - self.origin.1) / self.length)
    }
}

/// Closed-form distance factor multiplying one displacement component;
/// vanishes exactly on the essential boundary constraining that component.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceFactor {
    /// Component unconstrained: factor 1.
    One,
    /// Distance to the vertical line x = at (clamps, symmetry planes).
    XPlane { at: f64 },
    /// Distance to the horizontal line y = at.
    YPlane { at: f64 },
    /// Smoothed distance to a single pinned point,
    /// sqrt(dx² + dy² + eps²) − eps; zero exactly at the pin.
    Point { x0: f64, y0: f64, eps: f64 },
    /// Smoothed minimum distance to a set of segments (softmin with the
    /// given temperature). Generic fallback; the bundled problems all use
    /// the closed forms above.
    SoftMinSegments { segments: Vec<((f64, f64), (f64, f64))>, temperature: f64 },
}

impl DistanceFactor {
    /// Value and physical-space gradient at `p`.
    pub fn eval(&self, p: Point2) -> (f64, f64, f64) {
        match self {
            DistanceFactor::One => (1.0, 0.0, 0.0),
            DistanceFactor::XPlane { at } => (p.x - at, 1.0, 0.0),
            DistanceFactor::YPlane { at } => (p.y - at, 0.0, 1.0),
            DistanceFactor::Point { x0, y0, eps } => {
                let (dx, dy) = (p.x - x0, p.y - y0);
                let r = (dx * dx + dy * dy + eps * eps).sqrt();
                (r - eps, dx / r, dy / r)
            }
            DistanceFactor::SoftMinSegments { segments, temperature } => {
                softmin_segments(segments, *temperature, p)
            }
        }
    }
}

fn segment_distance(a: (f64, f64), b: (f64, f64), p: Point2) -> (f64, f64, f64) {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.0) * abx + (p.y - a.1) * aby) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * abx, a.1 + t * aby);
    let (dx, dy) = (p.x - cx, p.y - cy);
    let eps = 1e-12;
    let r = (dx * dx + dy * dy + eps * eps).sqrt();
    (r, dx / r, dy / r)
}

fn softmin_segments(
    segments: &[((f64, f64), (f64, f64))],
    temperature: f64,
    p: Point2,
) -> (f64, f64, f64) {
    // softmin_T(d_i) = -T ln Σ exp(-d_i/T); gradient is the
    // exp-weighted average of the individual gradients
    let dists: Vec<(f64, f64, f64)> =
        segments.iter().map(|&(a, b)| segment_distance(a, b, p)).collect();
    let dmin = dists.iter().fold(f64::INFINITY, |m, d| m.min(d.0));
    let mut z = 0.0;
    let (mut gx, mut gy) = (0.0, 0.0);
    for &(d, dgx, dgy) in &dists {
        let w = (-(d - dmin) / temperature).exp();
        z += w;
        gx += w * dgx;
        gy += w * dgy;
    }
    (dmin - temperature * z.ln(), gx / z, gy / z)
}

/// Boundary extension carrying inhomogeneous essential data; zero for all
/// bundled problems.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Extension {
    Zero,
    /// a0 + ax·x + ay·y (mm).
    Affine { a0: f64, ax: f64, ay: f64 },
}

impl Extension {
    pub fn eval(&self, p: Point2) -> (f64, f64, f64) {
        match self {
            Extension::Zero => (0.0, 0.0, 0.0),
            Extension::Affine { a0, ax, ay } => (a0 + ax * p.x + ay * p.y, *ax, *ay),
        }
    }
}

/// The trainable displacement ansatz u = P + D ⊙ F(x̃; θ): a network output
/// shaped by closed-form distance and extension functions so essential
/// boundary conditions hold for every θ.
#[derive(Clone)]
pub struct AdmissibleField<N: FieldNetwork = KanNetwork> {
    pub network: N,
    pub normalization: Normalization,
    pub distance: [DistanceFactor; 2],
    pub extension: [Extension; 2],
}

impl<N: FieldNetwork> AdmissibleField<N> {
    /// Displacement components at `p` with tangent channels carrying
    /// derivatives with respect to the PHYSICAL coordinates.
    pub fn displacement(&self, tape: &mut Tape, p: Point2) -> [DualScalar; 2] {
        let (xn, yn) = self.normalization.to_normalized(p);
        let xd = tape.lift_input(xn, InputAxis::X);
        let yd = tape.lift_input(yn, InputAxis::Y);
        let f = self.network.forward(tape, xd, yd);
        let inv_l = 1.0 / self.normalization.length;
        let mut out = [DualScalar { v: ZERO, dx: ZERO, dy: ZERO }; 2];
        for c in 0..2 {
            let (d, ddx, ddy) = self.distance[c].eval(p);
            let (pv, pdx, pdy) = self.extension[c].eval(p);
            // u = P + D·F; F's tangents are w.r.t. x̃, so the chain rule
            // contributes a 1/L on each network tangent
            let v = tape.scale(f[c].v, d);
            let v = tape.add_const(v, pv);
            let dx = tape.lincomb(f[c].v, ddx, f[c].dx, d * inv_l);
            let dx = tape.add_const(dx, pdx);
            let dy = tape.lincomb(f[c].v, ddy, f[c].dy, d * inv_l);
            let dy = tape.add_const(dy, pdy);
            out[c] = DualScalar { v, dx, dy };
        }
        out
    }

}

/// Energy bookkeeping for one loss evaluation; total = Σ internal − external.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossReport {
    /// Internal strain energy per region (N·mm), index = region id − 1.
    pub internal: Vec<f64>,
    /// External work of the prescribed tractions (N·mm).
    pub external: f64,
    pub total: f64,
}

/// One natural-boundary sample: position, arc-length weight (mm) and
/// traction (N/mm).
#[derive(Debug, Clone, Copy)]
pub struct TractionSample {
    pub p: Point2,
    pub weight: f64,
    pub tx: f64,
    pub ty: f64,
}

/// Everything the loss needs besides θ: the ansatz, interior quadrature,
/// per-region materials and pre-sampled natural boundary points.
pub struct DemProblem<N: FieldNetwork = KanNetwork> {
    pub field: AdmissibleField<N>,
    pub interior: QuadratureRule,
    /// Material per region, index = region id − 1.
    pub materials: Vec<Material>,
    pub tractions: Vec<TractionSample>,
}

struct ChunkOutput {
    internal: Vec<f64>,
    external: f64,
    grad: Vec<f64>,
}

impl<N: FieldNetwork> DemProblem<N> {
    pub fn n_regions(&self) -> usize {
        self.materials.len()
    }

    fn interior_chunk(&self, theta: &[f64], points_range: std::ops::Range<usize>) -> Result<ChunkOutput> {
        let mut tape = Tape::new();
        tape.register_params(theta);
        let mark = tape.watermark();
        let mut grad = vec![0.0; theta.len()];
        let mut terms: Vec<Vec<f64>> = vec![Vec::new(); self.n_regions()];
        for q in &self.interior.points[points_range] {
            let region = q.region;
            if region == 0 || region > self.materials.len() {
                return Err(PikanError::UnknownRegion { x: q.p.x, y: q.p.y });
            }
            let u = self.field.displacement(&mut tape, q.p);
            let psi = energy_density_on_tape(
                &mut tape,
                &self.materials[region - 1],
                u[0].dx,
                u[0].dy,
                u[1].dx,
                u[1].dy,
            );
            terms[region - 1].push(q.weight * tape.value(psi));
            tape.backward_into(psi, q.weight, &mut grad);
            tape.rewind(mark);
        }
        let internal = terms.iter().map(|t| pairwise_sum(t)).collect();
        Ok(ChunkOutput { internal, external: 0.0, grad })
    }

    fn traction_chunk(&self, theta: &[f64], range: std::ops::Range<usize>) -> Result<ChunkOutput> {
        let mut tape = Tape::new();
        tape.register_params(theta);
        let mark = tape.watermark();
        let mut grad = vec![0.0; theta.len()];
        let mut terms = Vec::with_capacity(range.len());
        for s in &self.tractions[range] {
            let u = self.field.displacement(&mut tape, s.p);
            // p̄ · u, recorded so its θ-gradient can be pulled back
            let work = tape.lincomb(u[0].v, s.tx, u[1].v, s.ty);
            terms.push(s.weight * tape.value(work));
            // external work is subtracted from the loss
            tape.backward_into(work, -s.weight, &mut grad);
            tape.rewind(mark);
        }
        Ok(ChunkOutput {
            internal: vec![0.0; self.n_regions()],
            external: pairwise_sum(&terms),
            grad,
        })
    }

    /// Loss report and parameter gradient at θ. Deterministic: the chunked
    /// reduction has a fixed shape regardless of how many workers run.
    pub fn loss_and_grad(&self, theta: &[f64]) -> Result<(LossReport, Vec<f64>)> {
        let n_int = self.interior.points.len();
        let n_trac = self.tractions.len();
        let int_chunks: Vec<std::ops::Range<usize>> = (0..n_int)
            .step_by(CHUNK)
            .map(|s| s..(s + CHUNK).min(n_int))
            .collect();
        let trac_chunks: Vec<std::ops::Range<usize>> = (0..n_trac)
            .step_by(CHUNK)
            .map(|s| s..(s + CHUNK).min(n_trac))
            .collect();

        let interior_parts: Result<Vec<ChunkOutput>> = int_chunks
            .into_par_iter()
            .map(|r| self.interior_chunk(theta, r))
            .collect();
        let traction_parts: Result<Vec<ChunkOutput>> = trac_chunks
            .into_par_iter()
            .map(|r| self.traction_chunk(theta, r))
            .collect();

        let mut internal = vec![0.0; self.n_regions()];
        let mut external = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for part in interior_parts?.iter().chain(traction_parts?.iter()) {
            for (acc, v) in internal.iter_mut().zip(&part.internal) {
                *acc += v;
            }
            external += part.external;
            for (g, p) in grad.iter_mut().zip(&part.grad) {
                *g += p;
            }
        }
        let total = pairwise_sum(&internal) - external;
        Ok((LossReport { internal, external, total }, grad))
    }

    /// Per-region internal energy only (no gradient); evaluation helper.
    pub fn internal_energy(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let (report, _) = self.loss_and_grad(theta)?;
        Ok(report.internal)
    }

    /// External work only.
    pub fn external_work(&self, theta: &[f64]) -> Result<f64> {
        let (report, _) = self.loss_and_grad(theta)?;
        Ok(report.external)
    }
}

/// Writes a training history as CSV: step, per-region internal energies,
/// external work, total loss.
pub fn write_loss_history(path: &std::path::Path, history: &[(usize, LossReport)]) -> Result<()> {
    use std::io::Write;
    let n_regions = history.first().map_or(0, |(_, r)| r.internal.len());
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "step")?;
    for i in 1..=n_regions {
        write!(out, ",psi_in_{i}")?;
    }
    writeln!(out, ",psi_ex,total")?;
    for (step, r) in history {
        write!(out, "{step}")?;
        for v in &r.internal {
            write!(out, ",{v:.17e}")?;
        }
        writeln!(out, ",{:.17e},{:.17e}", r.external, r.total)?;
    }
    Ok(())
}
