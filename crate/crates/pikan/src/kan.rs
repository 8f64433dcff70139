//! Kolmogorov-Arnold network: layers of learnable B-spline edge functions
//! with per-edge scaling coefficients and an auxiliary weighted base
//! activation, tanh-clamped between layers.

use crate::autodiff::{DualScalar, Tape};
use crate::bspline::BSplineGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BaseActivation {
    #[default]
    Silu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanConfig {
    pub shape: Vec<usize>,
    pub grid_size: usize,
    pub order: usize,
    pub grid_range: (f64, f64),
    #[serde(default)]
    pub base_activation: BaseActivation,
}

/// Parameter layout of one layer inside the flat parameter vector:
/// spline coefficients (n_out * n_in * (G+k)), then scales (n_out * n_in),
/// then base weights (n_out * n_in). Edge (j, i) is stored at row-major
/// index `j * n_in + i`.
#[derive(Debug, Clone)]
pub struct KanLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub offset: usize,
    pub n_coeff: usize,
}

impl KanLayer {
    fn coeff_index(&self, j: usize, i: usize, p: usize) -> usize {
        self.offset + (j * self.n_in + i) * self.n_coeff + p
    }
    fn scale_index(&self, j: usize, i: usize) -> usize {
        self.offset + self.n_out * self.n_in * self.n_coeff + j * self.n_in + i
    }
    fn weight_index(&self, j: usize, i: usize) -> usize {
        self.offset + self.n_out * self.n_in * (self.n_coeff + 1) + j * self.n_in + i
    }
    fn n_params(&self) -> usize {
        self.n_in * self.n_out * (self.n_coeff + 2)
    }
}

#[derive(Debug, Clone)]
pub struct KanNetwork {
    pub config: KanConfig,
    pub grid: BSplineGrid,
    pub layers: Vec<KanLayer>,
    n_params: usize,
}

/// Total trainable parameter count for a shape and grid configuration:
/// sum over layers of N_l * N_{l+1} * (G + k + 2).
pub fn param_count(shape: &[usize], grid_size: usize, order: usize) -> usize {
    shape
        .windows(2)
        .map(|w| w[0] * w[1] * (grid_size + order + 2))
        .sum()
}

impl KanNetwork {
    pub fn new(config: KanConfig) -> Self {
        assert!(config.shape.len() >= 2, "need at least one layer");
        let grid = BSplineGrid::new(config.grid_range, config.grid_size, config.order);
        let n_coeff = grid.n_basis();
        let mut layers = Vec::new();
        let mut offset = 0;
        for w in config.shape.windows(2) {
            let layer = KanLayer {
                n_in: w[0],
                n_out: w[1],
                offset,
                n_coeff,
            };
            offset += layer.n_params();
            layers.push(layer);
        }
        KanNetwork {
            config,
            grid,
            layers,
            n_params: offset,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Deterministic initialization: spline coefficients from
    /// Normal(0, 0.1/sqrt(G+k)), scales 1, base weights Xavier-uniform.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; self.n_params];
        let sigma = 0.1 / (self.grid.n_basis() as f64).sqrt();
        for layer in &self.layers {
            for j in 0..layer.n_out {
                for i in 0..layer.n_in {
                    for p in 0..layer.n_coeff {
                        theta[layer.coeff_index(j, i, p)] = sigma * normal_sample(&mut rng);
                    }
                    theta[layer.scale_index(j, i)] = 1.0;
                    let bound = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
                    theta[layer.weight_index(j, i)] = rng.gen_range(-bound..bound);
                }
            }
        }
        theta
    }

    fn base_act(&self, tape: &mut Tape, x: DualScalar) -> DualScalar {
        match self.config.base_activation {
            BaseActivation::Silu => tape.dsilu(x),
            BaseActivation::Tanh => tape.dtanh(x),
        }
    }

    /// Single edge function: m * sum_p c_p B_p(x) + w * sigma(x).
    /// Parameters are read from the tape's registered slots.
    pub fn edge_eval(
        &self,
        tape: &mut Tape,
        layer_idx: usize,
        j: usize,
        i: usize,
        x: DualScalar,
    ) -> DualScalar {
        let layer = &self.layers[layer_idx];
        let (first, basis) = self.grid.basis_nonzero_dual(tape, x);
        let sigma = self.base_act(tape, x);
        self.edge_from_parts(tape, layer, j, i, first, &basis, sigma)
    }

    fn edge_from_parts(
        &self,
        tape: &mut Tape,
        layer: &KanLayer,
        j: usize,
        i: usize,
        first: usize,
        basis: &[DualScalar],
        sigma: DualScalar,
    ) -> DualScalar {
        let mut spline: Option<DualScalar> = None;
        for (p, b) in basis.iter().enumerate() {
            let c = tape.param_dual(layer.coeff_index(j, i, first + p));
            let term = tape.dmul(c, *b);
            spline = Some(match spline {
                Some(s) => tape.dadd(s, term),
                None => term,
            });
        }
        let w = tape.param_dual(layer.weight_index(j, i));
        let base = tape.dmul(w, sigma);
        match spline {
            // outside the spline band only the base activation contributes
            None => base,
            Some(spline) => {
                let m = tape.param_dual(layer.scale_index(j, i));
                let scaled = tape.dmul(m, spline);
                tape.dadd(scaled, base)
            }
        }
    }

    /// Full forward pass on normalized coordinates. Intermediate layer
    /// outputs are tanh-clamped; the final layer output is returned raw.
    pub fn forward(&self, tape: &mut Tape, x: DualScalar, y: DualScalar) -> Vec<DualScalar> {
        let mut acts: Vec<DualScalar> = vec![x, y];
        debug_assert_eq!(acts.len(), self.config.shape[0]);
        let n_layers = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            // shared per-input quantities
            let mut parts = Vec::with_capacity(layer.n_in);
            for &xi in &acts {
                let (first, basis) = self.grid.basis_nonzero_dual(tape, xi);
                let sigma = self.base_act(tape, xi);
                parts.push((first, basis, sigma));
            }
            let mut next = Vec::with_capacity(layer.n_out);
            for j in 0..layer.n_out {
                let mut acc: Option<DualScalar> = None;
                for (i, (first, basis, sigma)) in parts.iter().enumerate() {
                    let e = self.edge_from_parts(tape, layer, j, i, *first, basis, *sigma);
                    acc = Some(match acc {
                        Some(a) => tape.dadd(a, e),
                        None => e,
                    });
                }
                let mut out = acc.expect("non-empty layer");
                if l + 1 < n_layers {
                    out = tape.dtanh(out);
                }
                next.push(out);
            }
            acts = next;
        }
        acts
    }
}

fn normal_sample(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; deterministic given the stream position
    loop {
        let u1: f64 = rng.gen_range(0.0..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        if u1 > 1e-300 {
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}
