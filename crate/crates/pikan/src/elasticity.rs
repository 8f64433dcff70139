//! Constitutive and kinematic relations of 2D isotropic linear elasticity.

use crate::autodiff::{NodeId, Tape};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlaneAssumption {
    #[default]
    PlaneStress,
    PlaneStrain,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Material {
    /// Young's modulus (MPa).
    pub e: f64,
    /// Poisson's ratio.
    pub nu: f64,
    pub assumption: PlaneAssumption,
}

impl Material {
    pub fn new(e: f64, nu: f64, assumption: PlaneAssumption) -> Self {
        assert!(e > 0.0, "E must be positive");
        assert!(nu > -1.0 && nu < 0.5, "nu out of range");
        Material { e, nu, assumption }
    }

    /// Shear modulus mu = E / (2 (1 + nu)).
    pub fn mu(&self) -> f64 {
        self.e / (2.0 * (1.0 + self.nu))
    }

    /// The Lame coefficient entering sigma = lam * tr(eps) I + 2 mu eps.
    /// Plane strain uses the 3D lambda; plane stress its effective
    /// replacement lam* = 2 lam mu / (lam + 2 mu).
    pub fn lambda_eff(&self) -> f64 {
        let lam = self.e * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu));
        match self.assumption {
            PlaneAssumption::PlaneStrain => lam,
            PlaneAssumption::PlaneStress => {
                let mu = self.mu();
                2.0 * lam * mu / (lam + 2.0 * mu)
            }
        }
    }

    /// Uniaxial constrained modulus lam* + 2 mu (stress from a pure
    /// eps_xx strain state).
    pub fn constrained_modulus(&self) -> f64 {
        self.lambda_eff() + 2.0 * self.mu()
    }
}

/// Tensor strain components; `xy` is the tensor component, not the
/// engineering shear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainState {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressState {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

/// eps_ij = (u_{i,j} + u_{j,i}) / 2.
pub fn strain_from_gradient(dux_dx: f64, dux_dy: f64, duy_dx: f64, duy_dy: f64) -> StrainState {
    StrainState {
        xx: dux_dx,
        yy: duy_dy,
        xy: 0.5 * (dux_dy + duy_dx),
    }
}

/// sigma = lam* tr(eps) I + 2 mu eps.
pub fn stress(material: &Material, eps: &StrainState) -> StressState {
    let lam = material.lambda_eff();
    let mu = material.mu();
    let tr = eps.xx + eps.yy;
    StressState {
        xx: lam * tr + 2.0 * mu * eps.xx,
        yy: lam * tr + 2.0 * mu * eps.yy,
        xy: 2.0 * mu * eps.xy,
    }
}

/// Strain energy density psi = sigma : eps / 2 (MPa = N mm / mm^3).
pub fn energy_density(sigma: &StressState, eps: &StrainState) -> f64 {
    0.5 * (sigma.xx * eps.xx + sigma.yy * eps.yy + 2.0 * sigma.xy * eps.xy)
}

/// Plane-stress von Mises equivalent stress.
pub fn von_mises(sigma: &StressState) -> f64 {
    (sigma.xx * sigma.xx - sigma.xx * sigma.yy + sigma.yy * sigma.yy
        + 3.0 * sigma.xy * sigma.xy)
        .sqrt()
}

/// On-tape strain energy density from displacement-gradient nodes; the
/// same formulas as above, recorded so theta-gradients flow through.
pub fn energy_density_on_tape(
    tape: &mut Tape,
    material: &Material,
    dux_dx: NodeId,
    dux_dy: NodeId,
    duy_dx: NodeId,
    duy_dy: NodeId,
) -> NodeId {
    let lam = material.lambda_eff();
    let mu = material.mu();
    let exx = dux_dx;
    let eyy = duy_dy;
    let exy = tape.lincomb(dux_dy, 0.5, duy_dx, 0.5);
    let sxx = {
        let tr = tape.lincomb(exx, lam + 2.0 * mu, eyy, lam);
        tr
    };
    let syy = tape.lincomb(exx, lam, eyy, lam + 2.0 * mu);
    let sxy = tape.scale(exy, 2.0 * mu);
    let t1 = tape.mul(sxx, exx);
    let t2 = tape.mul(syy, eyy);
    let t3 = tape.mul(sxy, exy);
    let t12 = tape.add(t1, t2);
    let t = tape.lincomb(t12, 0.5, t3, 1.0);
    t
}
