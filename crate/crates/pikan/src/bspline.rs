//! Uniform B-spline basis evaluation (Cox-de Boor recursion).

use crate::autodiff::{DualScalar, Tape};
use serde::{Deserialize, Serialize};

/// Uniform knot grid on `[a, b]` with `grid_size` intervals and spline
/// order (degree) `order`, extended by `order` extra uniform knots on each
/// side. The basis has `grid_size + order` functions; their union of
/// supports is `[a - order*h, b + order*h]` where `h` is the knot spacing.
/// Outside that band every basis function is identically zero, so inputs
/// that stray past the grid see a zero spline term rather than a runaway
/// polynomial extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineGrid {
    pub range: (f64, f64),
    pub grid_size: usize,
    pub order: usize,
}

impl BSplineGrid {
    pub fn new(range: (f64, f64), grid_size: usize, order: usize) -> Self {
        assert!(grid_size >= 1 && order >= 1, "G >= 1 and k >= 1 required");
        assert!(range.1 > range.0, "empty grid range");
        BSplineGrid {
            range,
            grid_size,
            order,
        }
    }

    pub fn n_basis(&self) -> usize {
        self.grid_size + self.order
    }

    pub fn knot_spacing(&self) -> f64 {
        (self.range.1 - self.range.0) / self.grid_size as f64
    }

    /// Knot position `a + i*h`; `i` may be negative (left extension).
    fn tau(&self, i: isize) -> f64 {
        self.range.0 + i as f64 * self.knot_spacing()
    }

    /// Knot span index `j` such that `x` lies in `[tau(j), tau(j+1))`,
    /// restricted to spans where at least one basis function is non-zero.
    /// `None` when `x` is outside the extended band.
    fn span(&self, x: f64) -> Option<isize> {
        let (a, b) = self.range;
        let k = self.order as isize;
        let h = self.knot_spacing();
        let ext = self.order as f64 * h;
        if !x.is_finite() || x < a - ext || x >= b + ext {
            return None;
        }
        let raw = ((x - a) / h).floor() as isize;
        Some(raw.clamp(-k, self.grid_size as isize + k - 1))
    }

    /// De Boor triangle: values at `x` of the `deg + 1` degree-`deg`
    /// functions supported on span `span`, lowest index first.
    fn triangle(&self, x: f64, span: isize, deg: usize) -> Vec<f64> {
        let mut n = vec![0.0; deg + 1];
        let mut left = vec![0.0; deg + 1];
        let mut right = vec![0.0; deg + 1];
        n[0] = 1.0;
        for j in 1..=deg {
            left[j] = x - self.tau(span + 1 - j as isize);
            right[j] = self.tau(span + j as isize) - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let tmp = n[r] / denom;
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        n
    }

    /// Drop entries whose basis index falls outside `0..n_basis()`.
    fn trim<T: Clone>(&self, span: isize, vals: &[T]) -> (usize, Vec<T>) {
        let first = span;
        let n_basis = self.n_basis() as isize;
        let lo = (-first).max(0) as usize;
        let hi = ((n_basis - first).min(vals.len() as isize)).max(0) as usize;
        if lo >= hi {
            return (0, Vec::new());
        }
        ((first + lo as isize) as usize, vals[lo..hi].to_vec())
    }

    /// The basis functions that are non-zero at `x`, together with the
    /// index of the first of them: `values[j]` is basis function
    /// `first + j`. At most `order + 1` entries; fewer near the grid ends
    /// and none outside the extended band.
    pub fn basis_nonzero(&self, x: f64) -> (usize, Vec<f64>) {
        let Some(s) = self.span(x) else {
            return (0, Vec::new());
        };
        let n = self.triangle(x, s, self.order);
        self.trim(s, &n)
    }

    /// Full basis vector of length `n_basis()`.
    pub fn basis_full(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_basis()];
        let (first, vals) = self.basis_nonzero(x);
        for (j, v) in vals.into_iter().enumerate() {
            out[first + j] = v;
        }
        out
    }

    /// Analytic first derivatives of the non-zero basis functions at `x`,
    /// indexed like `basis_nonzero`.
    pub fn basis_nonzero_deriv(&self, x: f64) -> (usize, Vec<f64>) {
        // dB_p/dx = (N_{p-1} - N_p) / h with N_q the degree-(order-1)
        // functions on the same uniform knots.
        let k = self.order;
        let Some(s) = self.span(x) else {
            return (0, Vec::new());
        };
        let lo = self.triangle(x, s, k - 1); // N_{s..s+k-1}
        let h = self.knot_spacing();
        let mut d = vec![0.0; k + 1];
        for (r, dr) in d.iter_mut().enumerate() {
            let nm = if r >= 1 { lo[r - 1] } else { 0.0 };
            let np = if r < k { lo[r] } else { 0.0 };
            *dr = (nm - np) / h;
        }
        self.trim(s, &d)
    }

    /// Same recursion on the tape: `x` is a dual, knots are constants.
    /// Returns the first non-zero index and the non-zero basis duals.
    pub fn basis_nonzero_dual(&self, tape: &mut Tape, x: DualScalar) -> (usize, Vec<DualScalar>) {
        let k = self.order;
        let xv = tape.value(x.v);
        let Some(s) = self.span(xv) else {
            return (0, Vec::new());
        };
        let one = tape.lift_const(1.0);
        let mut n: Vec<DualScalar> = vec![one; k + 1];
        for j in 1..=k {
            let mut saved: Option<DualScalar> = None;
            for r in 0..j {
                let t_hi = self.tau(s + r as isize + 1);
                let t_lo = self.tau(s + 1 - (j - r) as isize);
                let denom = t_hi - t_lo; // constant for a uniform grid
                let left = tape.dadd_const(x, -t_lo); // x - t_lo
                let right = tape.dconst_sub(t_hi, x); // t_hi - x
                let tmp = tape.dscale(n[r], 1.0 / denom);
                let rt = tape.dmul(right, tmp);
                n[r] = match saved {
                    Some(sv) => tape.dadd(sv, rt),
                    None => rt,
                };
                saved = Some(tape.dmul(left, tmp));
            }
            n[j] = saved.unwrap();
        }
        self.trim(s, &n)
    }

    /// Greville abscissae, the canonical collocation sites for coefficient
    /// fitting.
    pub fn greville_abscissae(&self) -> Vec<f64> {
        let k = self.order as isize;
        (0..self.n_basis() as isize)
            .map(|p| {
                (p + 1 - k..=p).map(|i| self.tau(i)).sum::<f64>() / self.order as f64
            })
            .collect()
    }
}
