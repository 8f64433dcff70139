//! Comparator solvers: a plain tanh MLP driving the same energy method,
//! and a domain-decomposition variant with one subnetwork per material
//! region coupled by an interface displacement penalty.

use crate::autodiff::{DualScalar, Tape};
use crate::dem::{
    AdmissibleField, DemProblem, FieldNetwork, TractionSample,
};
use crate::elasticity::{energy_density_on_tape, Material};
use crate::error::{PikanError, Result};
use crate::geometry::{pairwise_sum, Point2, QuadratureRule};
use crate::optimize::{minimize, LbfgsConfig, OptimResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const CHUNK: usize = 1024;

/// Fully connected network with tanh hidden activations. Layer l maps
/// N_l inputs to N_{l+1} outputs; parameters are row-major weights
/// followed by biases per layer, optionally offset within a larger
/// parameter vector (used when several subnetworks share one vector).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub shape: Vec<usize>,
    /// First parameter slot of this network in the registered vector.
    pub param_offset: usize,
    n_params: usize,
}

pub fn mlp_param_count(shape: &[usize]) -> usize {
    shape.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl Mlp {
    pub fn new(shape: Vec<usize>) -> Result<Self> {
        if shape.len() < 2 || shape.iter().any(|&n| n == 0) {
            return Err(PikanError::Config(format!("invalid network shape {shape:?}")));
        }
        let n_params = mlp_param_count(&shape);
        Ok(Mlp { shape, param_offset: 0, n_params })
    }

    pub fn with_offset(mut self, offset: usize) -> Self {
        self.param_offset = offset;
        self
    }

    /// Slot of weight (j, i) of layer `l` relative to the offset.
    fn weight_index(&self, layer_base: usize, n_in: usize, j: usize, i: usize) -> usize {
        layer_base + j * n_in + i
    }

    fn bias_index(&self, layer_base: usize, n_in: usize, n_out: usize, j: usize) -> usize {
        layer_base + n_out * n_in + j
    }
}

impl FieldNetwork for Mlp {
    fn n_params(&self) -> usize {
        self.n_params
    }

    /// Xavier-uniform hidden weights, zero biases, and a zero final layer
    /// so the initial field (and its energy) is exactly zero.
    fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; self.n_params];
        let mut base = 0;
        let last = self.shape.len() - 2;
        for (l, w) in self.shape.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            for j in 0..n_out {
                for i in 0..n_in {
                    let v = rng.gen_range(-bound..bound);
                    if l < last {
                        theta[self.weight_index(base, n_in, j, i)] = v;
                    }
                }
            }
            base += (n_in + 1) * n_out;
        }
        theta
    }

    fn forward(&self, tape: &mut Tape, x: DualScalar, y: DualScalar) -> Vec<DualScalar> {
        let mut acts = vec![x, y];
        debug_assert_eq!(acts.len(), self.shape[0]);
        let last = self.shape.len() - 2;
        let mut base = 0;
        for (l, w) in self.shape.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let mut acc = tape.param_dual(
                    self.param_offset + self.bias_index(base, n_in, n_out, j),
                );
                for (i, &a) in acts.iter().enumerate() {
                    let wji = tape.param_dual(
                        self.param_offset + self.weight_index(base, n_in, j, i),
                    );
                    let term = tape.dmul(wji, a);
                    acc = tape.dadd(acc, term);
                }
                next.push(if l < last { tape.dtanh(acc) } else { acc });
            }
            acts = next;
            base += (n_in + 1) * n_out;
        }
        acts
    }
}

/// Penalty weight β = −λ·ln(tanh(N_inter / N_dom)) with λ = 1000.
pub fn penalty_weight(n_inter: usize, n_dom: usize) -> f64 {
    let lambda = 1000.0;
    -lambda * ((n_inter as f64 / n_dom as f64).tanh()).ln()
}

/// Domain-decomposition problem: one subnetwork per material region, all
/// parameters in one concatenated vector, coupled by a displacement
/// continuity penalty at sampled interface points.
pub struct CennProblem {
    /// Admissible field per region, index = region id − 1. Each network's
    /// `param_offset` locates its slice of the shared parameter vector.
    pub fields: Vec<AdmissibleField<Mlp>>,
    pub interior: QuadratureRule,
    pub materials: Vec<Material>,
    /// Traction samples with the region id owning each sample point.
    pub tractions: Vec<(TractionSample, usize)>,
    /// Interface points with the two adjacent region ids.
    pub interface_points: Vec<(Point2, usize, usize)>,
    pub beta: f64,
}

struct Chunk {
    terms: Vec<f64>,
    grad: Vec<f64>,
}

impl CennProblem {
    pub fn n_params(&self) -> usize {
        self.fields.iter().map(|f| f.network.n_params).sum()
    }

    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut theta = vec![0.0; self.n_params()];
        for (k, f) in self.fields.iter().enumerate() {
            let part = f.network.init(seed.wrapping_add(k as u64));
            let o = f.network.param_offset;
            theta[o..o + part.len()].copy_from_slice(&part);
        }
        theta
    }

    fn field_for(&self, region: usize) -> Result<&AdmissibleField<Mlp>> {
        self.fields.get(region - 1).ok_or_else(|| {
            PikanError::Config(format!("region {region} has no subnetwork"))
        })
    }

    fn interior_chunk(&self, theta: &[f64], range: std::ops::Range<usize>) -> Result<Chunk> {
        let mut tape = Tape::new();
        tape.register_params(theta);
        let mark = tape.watermark();
        let mut grad = vec![0.0; theta.len()];
        let mut terms = Vec::with_capacity(range.len());
        for q in &self.interior.points[range] {
            tape.rewind(mark);
            let field = self.field_for(q.region)?;
            let material = self.materials.get(q.region - 1).ok_or(
                PikanError::UnknownRegion { x: q.p.x, y: q.p.y },
            )?;
            let u = field.displacement(&mut tape, q.p);
            let psi = energy_density_on_tape(
                &mut tape, material, u[0].dx, u[0].dy, u[1].dx, u[1].dy,
            );
            terms.push(q.weight * tape.value(psi));
            tape.backward_into(psi, q.weight, &mut grad);
        }
        Ok(Chunk { terms, grad })
    }

    fn traction_chunk(&self, theta: &[f64], range: std::ops::Range<usize>) -> Result<Chunk> {
        let mut tape = Tape::new();
        tape.register_params(theta);
        let mark = tape.watermark();
        let mut grad = vec![0.0; theta.len()];
        let mut terms = Vec::with_capacity(range.len());
        for (s, region) in &self.tractions[range] {
            tape.rewind(mark);
            let field = self.field_for(*region)?;
            let u = field.displacement(&mut tape, s.p);
            let ux = tape.scale(u[0].v, s.tx);
            let uy = tape.scale(u[1].v, s.ty);
            let work = tape.add(ux, uy);
            terms.push(s.weight * tape.value(work));
            // external work is subtracted from the loss
            tape.backward_into(work, -s.weight, &mut grad);
        }
        Ok(Chunk { terms, grad })
    }

    fn interface_chunk(&self, theta: &[f64], range: std::ops::Range<usize>) -> Result<Chunk> {
        let mut tape = Tape::new();
        tape.register_params(theta);
        let mark = tape.watermark();
        let mut grad = vec![0.0; theta.len()];
        let mut terms = Vec::with_capacity(range.len());
        for &(p, ra, rb) in &self.interface_points[range] {
            tape.rewind(mark);
            let ua = self.field_for(ra)?.displacement(&mut tape, p);
            let ub = self.field_for(rb)?.displacement(&mut tape, p);
            let dx = tape.sub(ua[0].v, ub[0].v);
            let dy = tape.sub(ua[1].v, ub[1].v);
            let dx2 = tape.mul(dx, dx);
            let dy2 = tape.mul(dy, dy);
            let mismatch = tape.add(dx2, dy2);
            terms.push(tape.value(mismatch));
            tape.backward_into(mismatch, self.beta, &mut grad);
        }
        Ok(Chunk { terms, grad })
    }

    /// (internal energy, external work, penalty, total loss) and gradient.
    /// Deterministic for a fixed point ordering, independent of worker
    /// count (fixed chunking, ordered combine, pairwise sums).
    pub fn loss_and_grad(&self, theta: &[f64]) -> Result<(f64, f64, f64, f64, Vec<f64>)> {
        let ranges = |n: usize| -> Vec<std::ops::Range<usize>> {
            (0..n).step_by(CHUNK).map(|s| s..(s + CHUNK).min(n)).collect()
        };
        let combine = |chunks: Vec<Chunk>, n: usize| -> (f64, Vec<f64>) {
            let mut terms = Vec::new();
            let mut grad = vec![0.0; n];
            for c in chunks {
                terms.extend(c.terms);
                for (g, d) in grad.iter_mut().zip(&c.grad) {
                    *g += d;
                }
            }
            (pairwise_sum(&terms), grad)
        };
        let n = theta.len();
        let interior: Result<Vec<Chunk>> = ranges(self.interior.points.len())
            .into_par_iter()
            .map(|r| self.interior_chunk(theta, r))
            .collect();
        let (energy, g_int) = combine(interior?, n);
        let traction: Result<Vec<Chunk>> = ranges(self.tractions.len())
            .into_par_iter()
            .map(|r| self.traction_chunk(theta, r))
            .collect();
        let (work, g_trac) = combine(traction?, n);
        let interface: Result<Vec<Chunk>> = ranges(self.interface_points.len())
            .into_par_iter()
            .map(|r| self.interface_chunk(theta, r))
            .collect();
        let (mismatch, g_pen) = combine(interface?, n);
        let penalty = self.beta * mismatch;
        let loss = energy - work + penalty;
        let grad: Vec<f64> = (0..n).map(|i| g_int[i] + g_trac[i] + g_pen[i]).collect();
        Ok((energy, work, penalty, loss, grad))
    }

    /// Mean squared interface displacement mismatch of the current field.
    pub fn interface_mismatch(&self, theta: &[f64]) -> Result<f64> {
        if self.interface_points.is_empty() {
            return Ok(0.0);
        }
        let (_, _, penalty, _, _) = self.loss_and_grad(theta)?;
        Ok(penalty / self.beta / self.interface_points.len() as f64)
    }
}

/// Samples `n_per_chain` points on every material interface of the
/// domain, identifying the two adjacent regions by probing a small
/// distance `eps` to either side along the local normal. Points where
/// both probes land in the same region (chain endpoints grazing a corner)
/// are skipped.
pub fn interface_samples(
    domain: &crate::geometry::Domain,
    n_per_chain: usize,
    eps: f64,
) -> Result<Vec<(Point2, usize, usize)>> {
    let mut out = Vec::new();
    for chain in &domain.interface_chains {
        let lengths: Vec<f64> = chain.iter().map(|c| c.length()).collect();
        let total: f64 = lengths.iter().sum();
        if total <= 0.0 {
            return Err(PikanError::Geometry("zero-length interface chain".into()));
        }
        for (curve, len) in chain.iter().zip(&lengths) {
            let m = ((n_per_chain as f64 * len / total).round() as usize).max(1);
            for i in 0..m {
                let t = (i as f64 + 0.5) / m as f64;
                let p = curve.point(t);
                let h = 1e-6;
                let a = curve.point((t - h).max(0.0));
                let b = curve.point((t + h).min(1.0));
                let (dx, dy) = (b.x - a.x, b.y - a.y);
                let norm = dx.hypot(dy);
                if norm == 0.0 {
                    continue;
                }
                let (nx, ny) = (-dy / norm, dx / norm);
                let plus = domain.region_of(Point2::new(p.x + eps * nx, p.y + eps * ny));
                let minus = domain.region_of(Point2::new(p.x - eps * nx, p.y - eps * ny));
                match (plus, minus) {
                    (Some(ra), Some(rb)) if ra != rb => out.push((p, ra, rb)),
                    _ => {}
                }
            }
        }
    }
    if out.is_empty() && !domain.interface_chains.is_empty() {
        return Err(PikanError::Geometry(
            "no usable interface sample points found".into(),
        ));
    }
    Ok(out)
}

/// Trains an MLP under the same energy pipeline used by the spline
/// network; only the architecture differs.
pub fn mlp_dem_solve(
    problem: &DemProblem<Mlp>,
    cfg: &LbfgsConfig,
    seed: u64,
    mut callback: impl FnMut(&crate::optimize::OptimStep, &[f64]),
) -> Result<OptimResult> {
    let theta0 = problem.field.network.init(seed);
    minimize(
        |theta| {
            let (report, grad) = problem.loss_and_grad(theta)?;
            Ok((report.total, grad))
        },
        &theta0,
        cfg,
        &mut callback,
    )
}

/// Trains the domain-decomposition comparator.
pub fn cenn_solve(
    problem: &CennProblem,
    cfg: &LbfgsConfig,
    seed: u64,
    mut callback: impl FnMut(&crate::optimize::OptimStep, &[f64]),
) -> Result<OptimResult> {
    let theta0 = problem.init(seed);
    minimize(
        |theta| {
            let (_, _, _, loss, grad) = problem.loss_and_grad(theta)?;
            Ok((loss, grad))
        },
        &theta0,
        cfg,
        &mut callback,
    )
}
