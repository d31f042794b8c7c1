//! Hyperslabs, Euclidean projections, and the two-stage averaged-projection
//! weight update.
//!
//! A slab `{a : lo <= a'k <= hi}` encodes either consistency with one
//! measurement or the stability constraint. The weight update first averages
//! the projections onto the recently violated measurement slabs, then projects
//! the result onto the stability slab, so the output always satisfies the
//! stability constraint.

use crate::error::{Error, Result};
use crate::kernel::Dictionary;
use crate::setmem::DataPoint;

/// Absolute tolerance on the scalar `a'k` when testing slab membership.
/// Avoids thrashing on boundary points.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Two-sided linear constraint on the weight vector.
#[derive(Debug, Clone)]
pub struct Slab {
    pub k: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl Slab {
    /// Emptiness is a reported condition, not a construction failure.
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn value(&self, a: &[f64]) -> f64 {
        self.k.iter().zip(a).map(|(ki, ai)| ki * ai).sum()
    }

    pub fn contains(&self, a: &[f64], tol: f64) -> bool {
        let v = self.value(a);
        v >= self.lo - tol && v <= self.hi + tol
    }

    /// Degenerate slab through the midpoint, used as the optional fallback
    /// when the stability slab comes out empty.
    pub fn midpoint_hyperplane(&self) -> Slab {
        let mid = 0.5 * (self.lo + self.hi);
        Slab {
            k: self.k.clone(),
            lo: mid,
            hi: mid,
        }
    }
}

/// Controller weights, one entry per dictionary center.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(len: usize) -> Self {
        WeightVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Zero-pads the weights up to the new dictionary size; existing entries keep
/// their positions, so function values at old regressors are unchanged.
pub fn extend_weights(a: &WeightVector, new_len: usize) -> Result<WeightVector> {
    if new_len < a.len() {
        return Err(Error::WeightShrink {
            have: a.len(),
            requested: new_len,
        });
    }
    let mut v = a.0.clone();
    v.resize(new_len, 0.0);
    Ok(WeightVector(v))
}

/// Slab of weights consistent with one measurement: |a'K(w_j) - u_j| <= delta_eff.
pub fn build_measurement_slab(dp: &DataPoint, dict: &Dictionary, delta_eff: f64) -> Result<Slab> {
    if delta_eff < 0.0 {
        return Err(Error::InvalidParam(format!(
            "delta_eff must be nonnegative, got {delta_eff}"
        )));
    }
    Ok(Slab {
        k: dict.kernel_vector(&dp.omega)?,
        lo: dp.u - delta_eff,
        hi: dp.u + delta_eff,
    })
}

/// Stability slab at `omega_plus`:
///
/// ```text
/// upper_f - gamma_delta*||x|| - sigma  <=  a'K(omega_plus)  <=  lower_f + gamma_delta*||x|| + sigma
/// ```
///
/// `lower_f`/`upper_f` are the set-membership bounds at `omega_plus`; `x_norm`
/// is the current state norm in the configured norm. The slab can come out
/// empty; callers decide whether that is fatal.
pub fn build_stability_slab(
    omega_plus: &crate::kernel::Regressor,
    x_norm: f64,
    gamma_delta: f64,
    sigma: f64,
    lower_f: f64,
    upper_f: f64,
    dict: &Dictionary,
) -> Result<Slab> {
    if gamma_delta < 0.0 || sigma < 0.0 {
        return Err(Error::InvalidParam(format!(
            "gamma_delta and sigma must be nonnegative, got {gamma_delta}, {sigma}"
        )));
    }
    let slack = gamma_delta * x_norm + sigma;
    Ok(Slab {
        k: dict.kernel_vector(omega_plus)?,
        lo: upper_f - slack,
        hi: lower_f + slack,
    })
}

/// Euclidean projection onto a slab. Points inside are returned unchanged;
/// outside points move along `k` onto the nearest face.
pub fn project_onto_slab(a: &WeightVector, s: &Slab) -> Result<WeightVector> {
    if a.len() != s.k.len() {
        return Err(Error::DimensionMismatch(a.len(), s.k.len()));
    }
    if s.is_empty() {
        return Err(Error::EmptySlab { lo: s.lo, hi: s.hi });
    }
    let v = s.value(a.as_slice());
    if v >= s.lo && v <= s.hi {
        return Ok(a.clone());
    }
    let k_sq: f64 = s.k.iter().map(|ki| ki * ki).sum();
    if k_sq == 0.0 {
        return Err(Error::InfeasibleProjection);
    }
    let target = if v > s.hi { s.hi } else { s.lo };
    let step = (v - target) / k_sq;
    let out: Vec<f64> = a
        .as_slice()
        .iter()
        .zip(&s.k)
        .map(|(ai, ki)| ai - step * ki)
        .collect();
    Ok(WeightVector(out))
}

/// Two-stage update: averaged projections onto the violated recent slabs,
/// then projection onto the stability slab.
///
/// `recent` holds the slabs of the last q measurements; only those not
/// containing `a_plus` (within [`MEMBERSHIP_TOL`]) contribute, with uniform
/// weights. An empty stability slab is an error; convert it with
/// [`Slab::midpoint_hyperplane`] first to get the fallback behavior.
pub fn apsm_update(
    a_plus: &WeightVector,
    recent: &[Slab],
    stability: &Slab,
) -> Result<WeightVector> {
    if stability.is_empty() {
        return Err(Error::EmptySlab {
            lo: stability.lo,
            hi: stability.hi,
        });
    }
    let violated: Vec<&Slab> = recent
        .iter()
        .filter(|s| !s.contains(a_plus.as_slice(), MEMBERSHIP_TOL))
        .collect();
    if violated.is_empty() {
        return project_onto_slab(a_plus, stability);
    }
    let weight = 1.0 / violated.len() as f64;
    let mut combined = a_plus.0.clone();
    for s in violated {
        let proj = project_onto_slab(a_plus, s)?;
        for ((c, p), base) in combined.iter_mut().zip(proj.0).zip(a_plus.as_slice()) {
            *c += weight * (p - base);
        }
    }
    project_onto_slab(&WeightVector(combined), stability)
}
