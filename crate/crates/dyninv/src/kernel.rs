//! Kernel evaluation, coherence, and sparsity-controlled dictionary growth.
//!
//! The controller dictionary holds regressors `w = (x, x_next)` (training) or
//! `w = (x, r_next)` (operation) as kernel centers. A candidate center is
//! admitted only if its coherence, the largest kernel value against the stored
//! centers, does not exceed the threshold `mu_bar`, which keeps the dictionary
//! size bounded on bounded input domains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in regressor space: the current state paired with the successor
/// state (training) or the reference (operation).
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    coords: Vec<f64>,
}

impl Regressor {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParam("regressor must be nonempty".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParam(
                "regressor entries must be finite".into(),
            ));
        }
        Ok(Self { coords })
    }

    /// Builds `(state || successor-or-reference)` from its two halves.
    pub fn from_parts(state: &[f64], tail: &[f64]) -> Result<Self> {
        if state.len() != tail.len() {
            return Err(Error::DimensionMismatch(state.len(), tail.len()));
        }
        let mut coords = Vec::with_capacity(state.len() * 2);
        coords.extend_from_slice(state);
        coords.extend_from_slice(tail);
        Self::new(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// First half: the state part, given the state dimension.
    pub fn state_part(&self, n_x: usize) -> &[f64] {
        &self.coords[..n_x]
    }

    /// Second half: the successor state or reference part.
    pub fn tail_part(&self, n_x: usize) -> &[f64] {
        &self.coords[n_x..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
}

/// Kernel family and its length scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub width: f64,
}

impl KernelSpec {
    pub fn gaussian(width: f64) -> Result<Self> {
        let spec = Self {
            kind: KernelKind::Gaussian,
            width,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width <= 0.0 || !self.width.is_finite() {
            return Err(Error::InvalidParam(format!(
                "kernel width must be positive and finite, got {}",
                self.width
            )));
        }
        Ok(())
    }
}

/// k(a, b) = exp(-||a-b||_2^2 / (2 width^2)), in (0, 1], symmetric.
///
/// The kernel distance is always the 2-norm regardless of the norm configured
/// for bounds and stability checks.
pub fn kernel_eval(spec: &KernelSpec, a: &Regressor, b: &Regressor) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    spec.validate()?;
    let sq_dist: f64 = a
        .coords
        .iter()
        .zip(&b.coords)
        .map(|(ai, bi)| (ai - bi) * (ai - bi))
        .sum();
    Ok((-sq_dist / (2.0 * spec.width * spec.width)).exp())
}

/// Ordered set of kernel centers with an admission threshold.
#[derive(Debug, Clone)]
pub struct Dictionary {
    spec: KernelSpec,
    mu_bar: f64,
    centers: Vec<Regressor>,
}

impl Dictionary {
    pub fn new(spec: KernelSpec, mu_bar: f64) -> Result<Self> {
        spec.validate()?;
        if !(mu_bar > 0.0 && mu_bar < 1.0) {
            return Err(Error::InvalidParam(format!(
                "coherence threshold must lie in (0, 1), got {mu_bar}"
            )));
        }
        Ok(Self {
            spec,
            mu_bar,
            centers: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Regressor] {
        &self.centers
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn mu_bar(&self) -> f64 {
        self.mu_bar
    }

    /// K(w, W) = [k(w, c_1), ..., k(w, c_L)], in center order. Empty dictionary
    /// gives an empty vector.
    pub fn kernel_vector(&self, omega: &Regressor) -> Result<Vec<f64>> {
        self.centers
            .iter()
            .map(|c| kernel_eval(&self.spec, omega, c))
            .collect()
    }

    /// mu(w, W) = max_i |k(w, c_i)|; 0 for an empty dictionary so the first
    /// regressor is always admitted.
    pub fn coherence(&self, omega: &Regressor) -> Result<f64> {
        let mut best = 0.0_f64;
        for c in &self.centers {
            let v = kernel_eval(&self.spec, omega, c)?.abs();
            if v > best {
                best = v;
            }
        }
        Ok(best)
    }

    /// Appends `omega` as a new center iff its coherence is at most `mu_bar`.
    /// Returns whether the center was added.
    pub fn maybe_add_center(&mut self, omega: Regressor) -> Result<bool> {
        if let Some(first) = self.centers.first() {
            if first.dim() != omega.dim() {
                return Err(Error::DimensionMismatch(first.dim(), omega.dim()));
            }
        }
        if self.coherence(&omega)? <= self.mu_bar {
            self.centers.push(omega);
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reg(coords: &[f64]) -> Regressor {
        Regressor::new(coords.to_vec()).unwrap()
    }

    fn spec(width: f64) -> KernelSpec {
        KernelSpec::gaussian(width).unwrap()
    }

    #[test]
    fn self_kernel_is_one() {
        let w = reg(&[0.3, -1.2, 4.0, 0.0]);
        assert_eq!(kernel_eval(&spec(0.7), &w, &w).unwrap(), 1.0);
    }

    #[test]
    fn unit_width_unit_distance() {
        let a = reg(&[0.0, 0.0]);
        let b = reg(&[1.0, 0.0]);
        let v = kernel_eval(&spec(1.0), &a, &b).unwrap();
        assert!((v - (-0.5_f64).exp()).abs() < 1e-15);
        assert!((v - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn kernel_symmetry_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sp = spec(0.9);
        for _ in 0..100 {
            let a = reg(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
            let b = reg(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
            assert_eq!(
                kernel_eval(&sp, &a, &b).unwrap(),
                kernel_eval(&sp, &b, &a).unwrap()
            );
        }
    }

    #[test]
    fn kernel_dimension_mismatch() {
        let a = reg(&[0.0, 0.0]);
        let b = reg(&[0.0, 0.0, 0.0]);
        assert!(matches!(
            kernel_eval(&spec(1.0), &a, &b),
            Err(Error::DimensionMismatch(2, 3))
        ));
    }

    #[test]
    fn kernel_vector_empty_and_self() {
        let mut dict = Dictionary::new(spec(1.0), 0.5).unwrap();
        let w = reg(&[1.0, 2.0]);
        assert!(dict.kernel_vector(&w).unwrap().is_empty());
        assert!(dict.maybe_add_center(w.clone()).unwrap());
        assert_eq!(dict.kernel_vector(&w).unwrap(), vec![1.0]);
    }

    #[test]
    fn kernel_vector_matches_elementwise_eval() {
        let sp = spec(0.8);
        let mut dict = Dictionary::new(sp, 0.5).unwrap();
        let c1 = reg(&[0.0, 0.0]);
        let c2 = reg(&[2.0, -1.0]);
        dict.maybe_add_center(c1.clone()).unwrap();
        dict.maybe_add_center(c2.clone()).unwrap();
        let q = reg(&[0.4, 0.4]);
        let kv = dict.kernel_vector(&q).unwrap();
        assert_eq!(kv.len(), 2);
        assert_eq!(kv[0], kernel_eval(&sp, &q, &c1).unwrap());
        assert_eq!(kv[1], kernel_eval(&sp, &q, &c2).unwrap());
    }

    #[test]
    fn coherence_stored_center_is_one() {
        let mut dict = Dictionary::new(spec(1.0), 0.5).unwrap();
        let w = reg(&[0.5, -0.5]);
        dict.maybe_add_center(w.clone()).unwrap();
        assert_eq!(dict.coherence(&w).unwrap(), 1.0);
    }

    #[test]
    fn coherence_empty_dictionary_is_zero() {
        let dict = Dictionary::new(spec(1.0), 0.5).unwrap();
        assert_eq!(dict.coherence(&reg(&[1.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn coherence_distant_center_closed_form() {
        let mut dict = Dictionary::new(spec(1.0), 0.5).unwrap();
        dict.maybe_add_center(reg(&[0.0, 0.0])).unwrap();
        let far = reg(&[10.0, 0.0]);
        let mu = dict.coherence(&far).unwrap();
        assert!((mu - (-50.0_f64).exp()).abs() < 1e-30);
    }

    #[test]
    fn duplicate_center_rejected() {
        let mut dict = Dictionary::new(spec(1.0), 0.9).unwrap();
        let w = reg(&[1.0, 1.0]);
        assert!(dict.maybe_add_center(w.clone()).unwrap());
        assert!(!dict.maybe_add_center(w).unwrap());
        assert_eq!(dict.len(), 1);
    }

    #[test]
    fn pairwise_coherence_bounded_after_insertions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sp = spec(0.5);
        let mut dict = Dictionary::new(sp, 0.7).unwrap();
        for _ in 0..500 {
            let w = reg(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            dict.maybe_add_center(w).unwrap();
        }
        let centers = dict.centers().to_vec();
        for (i, a) in centers.iter().enumerate() {
            for b in centers.iter().skip(i + 1) {
                assert!(kernel_eval(&sp, a, b).unwrap() <= 0.7 + 1e-12);
            }
        }
    }

    #[test]
    fn saturation_on_compact_box() {
        // Streaming from a fixed box must plateau: the dictionary is a packing
        // at kernel distance mu_bar, which the box can only hold finitely.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut dict = Dictionary::new(spec(0.4), 0.9).unwrap();
        let mut size_at_9k = 0;
        for i in 0..10_000 {
            let w = reg(&[rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]);
            dict.maybe_add_center(w).unwrap();
            if i == 8_999 {
                size_at_9k = dict.len();
            }
        }
        assert!(dict.len() < 10_000);
        assert_eq!(
            dict.len(),
            size_at_9k,
            "dictionary still growing in final 1e3 inserts"
        );
    }

    #[test]
    fn kernel_spec_serde_shape() {
        let sp = spec(0.75);
        let json = serde_json::to_string(&sp).unwrap();
        assert_eq!(json, r#"{"kind":"gaussian","width":0.75}"#);
        let back: KernelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sp);
    }
}
