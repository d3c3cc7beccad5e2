//! Hardware limitations as parameter transforms.
//!
//! Constraints act on the RBM parametrisation directly. After each gradient
//! step the trainer clips every weight and bias to `[-cap, cap]` and then
//! zeroes the weights the connectivity mask forbids. Biases are never masked.

use alloc::{format, string::String, vec::Vec};

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::rbm::RbmParams;
use crate::rng::{stream, Domain};

/// How a mask was produced; recorded alongside results.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskProvenance {
    Dense,
    RandomDrop { p: f64, seed: u64 },
    Chimera { mapping: String },
    /// Read back from a mask file, which does not carry its provenance.
    Loaded,
}

impl MaskProvenance {
    /// Short tag used in result tables.
    pub fn kind(&self) -> String {
        match self {
            MaskProvenance::Dense => "dense".into(),
            MaskProvenance::RandomDrop { p, .. } => format!("random_drop:{p}"),
            MaskProvenance::Chimera { mapping } => format!("chimera:{mapping}"),
            MaskProvenance::Loaded => "loaded".into(),
        }
    }
}

/// Which weights may be non-zero, stored `N × D` like the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMask {
    num_visible: usize,
    num_hidden: usize,
    allowed: Vec<bool>,
    allowed_count: usize,
    provenance: MaskProvenance,
}

impl ConnectivityMask {
    pub fn from_allowed(
        num_visible: usize,
        num_hidden: usize,
        allowed: Vec<bool>,
        provenance: MaskProvenance,
    ) -> Result<Self> {
        check_len("mask entries", num_visible * num_hidden, allowed.len())?;
        let allowed_count = allowed.iter().filter(|&&a| a).count();
        Ok(Self {
            num_visible,
            num_hidden,
            allowed,
            allowed_count,
            provenance,
        })
    }

    pub fn dense(num_visible: usize, num_hidden: usize) -> Self {
        Self {
            num_visible,
            num_hidden,
            allowed: alloc::vec![true; num_visible * num_hidden],
            allowed_count: num_visible * num_hidden,
            provenance: MaskProvenance::Dense,
        }
    }

    /// Drops each connection independently with probability `p`.
    pub fn random_drop(num_visible: usize, num_hidden: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("p", format!("{p} is outside [0, 1]")));
        }
        let mut rng = stream(seed, Domain::Mask, 0);
        let allowed = (0..num_visible * num_hidden)
            .map(|_| rng.random::<f64>() >= p)
            .collect();
        Self::from_allowed(
            num_visible,
            num_hidden,
            allowed,
            MaskProvenance::RandomDrop { p, seed },
        )
    }

    pub fn num_visible(&self) -> usize {
        self.num_visible
    }

    pub fn num_hidden(&self) -> usize {
        self.num_hidden
    }

    #[inline]
    pub fn is_allowed(&self, hidden: usize, visible: usize) -> bool {
        self.allowed[hidden * self.num_visible + visible]
    }

    pub fn allowed(&self) -> &[bool] {
        &self.allowed
    }

    pub fn allowed_count(&self) -> usize {
        self.allowed_count
    }

    /// Fraction of allowed connections.
    pub fn density(&self) -> f64 {
        let total = self.num_visible * self.num_hidden;
        if total == 0 {
            0.0
        } else {
            self.allowed_count as f64 / total as f64
        }
    }

    pub fn provenance(&self) -> &MaskProvenance {
        &self.provenance
    }

    /// The same mask with visible and hidden roles exchanged.
    pub fn transposed(&self) -> Self {
        let (d, n) = (self.num_visible, self.num_hidden);
        let mut allowed = alloc::vec![false; d * n];
        for j in 0..n {
            for i in 0..d {
                allowed[i * n + j] = self.allowed[j * d + i];
            }
        }
        Self {
            num_visible: n,
            num_hidden: d,
            allowed,
            allowed_count: self.allowed_count,
            provenance: self.provenance.clone(),
        }
    }

    fn check_shape(&self, params: &RbmParams) -> Result<()> {
        check_len("mask visible units", params.num_visible(), self.num_visible)?;
        check_len("mask hidden units", params.num_hidden(), self.num_hidden)
    }
}

/// Convenience wrapper for [`ConnectivityMask::random_drop`].
pub fn random_drop_mask(
    num_visible: usize,
    num_hidden: usize,
    p: f64,
    seed: u64,
) -> Result<ConnectivityMask> {
    ConnectivityMask::random_drop(num_visible, num_hidden, p, seed)
}

/// Noise levels, magnitude cap and connectivity of a simulated device.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub sigma_w: f64,
    pub sigma_b: f64,
    /// `f64::INFINITY` disables clipping.
    pub magnitude_cap: f64,
    /// `None` is a dense mask.
    pub mask: Option<ConnectivityMask>,
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        Self::unconstrained()
    }
}

impl ConstraintSpec {
    pub fn unconstrained() -> Self {
        Self {
            sigma_w: 0.0,
            sigma_b: 0.0,
            magnitude_cap: f64::INFINITY,
            mask: None,
        }
    }

    pub fn with_noise(mut self, sigma_w: f64, sigma_b: f64) -> Self {
        self.sigma_w = sigma_w;
        self.sigma_b = sigma_b;
        self
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.magnitude_cap = cap;
        self
    }

    pub fn with_mask(mut self, mask: ConnectivityMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, sigma) in [("sigma_w", self.sigma_w), ("sigma_b", self.sigma_b)] {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::invalid(name, format!("{sigma} is not a finite non-negative std")));
            }
        }
        if !(self.magnitude_cap > 0.0) {
            return Err(Error::invalid(
                "magnitude_cap",
                format!("{} must be positive", self.magnitude_cap),
            ));
        }
        Ok(())
    }

    pub fn mask_kind(&self) -> String {
        self.mask
            .as_ref()
            .map_or_else(|| "dense".into(), |m| m.provenance().kind())
    }

    pub fn mask_density(&self) -> f64 {
        self.mask.as_ref().map_or(1.0, ConnectivityMask::density)
    }

    /// Clip then mask, in place.
    pub fn enforce(&self, params: &mut RbmParams) -> Result<()> {
        if self.magnitude_cap.is_finite() {
            clip_in_place(params, self.magnitude_cap)?;
        }
        if let Some(mask) = &self.mask {
            mask_in_place(params, mask)?;
        }
        Ok(())
    }

    /// Every masked weight is exactly zero and every entry is within the cap.
    pub fn is_satisfied_by(&self, params: &RbmParams) -> bool {
        let cap = self.magnitude_cap;
        let in_range = params.iter_all().all(|x| x.abs() <= cap);
        let masked_zero = self.mask.as_ref().is_none_or(|m| {
            m.allowed()
                .iter()
                .zip(params.weights())
                .all(|(&ok, &w)| ok || w == 0.0)
        });
        in_range && masked_zero
    }
}

fn check_cap(cap: f64) -> Result<()> {
    if cap > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("cap", format!("{cap} must be positive")))
    }
}

pub(crate) fn clip_in_place(params: &mut RbmParams, cap: f64) -> Result<()> {
    check_cap(cap)?;
    params.for_each_mut(|x| *x = x.clamp(-cap, cap));
    Ok(())
}

pub(crate) fn mask_in_place(params: &mut RbmParams, mask: &ConnectivityMask) -> Result<()> {
    mask.check_shape(params)?;
    for (w, &ok) in params.weights_mut().iter_mut().zip(mask.allowed()) {
        if !ok {
            *w = 0.0;
        }
    }
    Ok(())
}

/// Clamps every weight and bias to `[-cap, cap]`.
pub fn clip_params(params: &RbmParams, cap: f64) -> Result<RbmParams> {
    let mut out = params.clone();
    clip_in_place(&mut out, cap)?;
    Ok(out)
}

/// Zeroes disallowed weights; biases are untouched.
pub fn apply_mask(params: &RbmParams, mask: &ConnectivityMask) -> Result<RbmParams> {
    let mut out = params.clone();
    mask_in_place(&mut out, mask)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{self, sigmoid};
    use crate::rbm::BinaryState;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn clip_examples() {
        let p = RbmParams::from_parts(2, 1, vec![1.5, -2.0], vec![0.3, -0.2], vec![4.0]).unwrap();
        let c = clip_params(&p, 1.0).unwrap();
        assert_eq!(c.weights(), &[1.0, -1.0]);
        assert_eq!(c.visible_bias(), &[0.3, -0.2]);
        assert_eq!(c.hidden_bias(), &[1.0]);
        assert!(clip_params(&p, 0.0).is_err());
        assert!(clip_params(&p, -1.0).is_err());

        let fresh = RbmParams::random(10, 8, 0.01, 0.0, &mut stream(1, Domain::Init, 0)).unwrap();
        assert_eq!(clip_params(&fresh, 100.0).unwrap(), fresh);
    }

    #[test]
    fn mask_examples() {
        let p = RbmParams::random(3, 2, 1.0, 1.0, &mut stream(2, Domain::Init, 0)).unwrap();
        assert_eq!(apply_mask(&p, &ConnectivityMask::dense(3, 2)).unwrap(), p);

        let none = ConnectivityMask::random_drop(3, 2, 1.0, 0).unwrap();
        let q = apply_mask(&p, &none).unwrap();
        assert!(q.weights().iter().all(|&w| w == 0.0));
        assert_eq!(q.visible_bias(), p.visible_bias());
        // Without weights the joint factorises into independent sigmoids.
        let log_z = q.exact_log_z().unwrap();
        for idx in 0..32 {
            let s = BinaryState::from_index(idx, 3, 2);
            let mut want = 1.0;
            for (&x, &b) in s.v.iter().zip(q.visible_bias()) {
                want *= if x { sigmoid(b) } else { 1.0 - sigmoid(b) };
            }
            for (&x, &c) in s.h.iter().zip(q.hidden_bias()) {
                want *= if x { sigmoid(c) } else { 1.0 - sigmoid(c) };
            }
            let got = math::exp(-q.energy(&s).unwrap() - log_z);
            assert!((got - want).abs() < 1e-12);
        }

        assert!(apply_mask(&p, &ConnectivityMask::dense(2, 3)).is_err());
    }

    #[test]
    fn random_drop_is_seed_reproducible() {
        let a = ConnectivityMask::random_drop(784, 784, 0.5, 7).unwrap();
        let b = ConnectivityMask::random_drop(784, 784, 0.5, 7).unwrap();
        assert_eq!(a.allowed_count(), b.allowed_count());
        assert_eq!(a, b);
        let c = ConnectivityMask::random_drop(784, 784, 0.5, 8).unwrap();
        assert_ne!(a.allowed(), c.allowed());
    }

    #[test]
    fn random_drop_extremes_and_concentration() {
        assert_eq!(ConnectivityMask::random_drop(20, 30, 0.0, 1).unwrap().density(), 1.0);
        assert_eq!(ConnectivityMask::random_drop(20, 30, 1.0, 1).unwrap().density(), 0.0);
        let m = ConnectivityMask::random_drop(784, 784, 0.99, 3).unwrap();
        assert!((0.009..=0.011).contains(&m.density()), "{}", m.density());
        assert!(ConnectivityMask::random_drop(2, 2, 1.5, 1).is_err());
        assert!(ConnectivityMask::random_drop(2, 2, -0.1, 1).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ConstraintSpec::unconstrained().validate().is_ok());
        assert!(ConstraintSpec::unconstrained().with_noise(-0.1, 0.0).validate().is_err());
        assert!(ConstraintSpec::unconstrained().with_cap(0.0).validate().is_err());
        assert_eq!(ConstraintSpec::unconstrained().mask_kind(), "dense");
    }

    fn arb_params() -> impl Strategy<Value = RbmParams> {
        (1usize..5, 1usize..5, any::<u64>()).prop_map(|(d, n, seed)| {
            RbmParams::random(d, n, 2.0, 2.0, &mut stream(seed, Domain::Init, 0)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn clip_and_mask_are_idempotent_and_commute(p in arb_params(), cap in 0.01f64..3.0,
                                                    drop in 0.0f64..1.0, seed in any::<u64>()) {
            let mask = ConnectivityMask::random_drop(p.num_visible(), p.num_hidden(), drop, seed).unwrap();
            let c = clip_params(&p, cap).unwrap();
            prop_assert_eq!(clip_params(&c, cap).unwrap(), c.clone());
            let m = apply_mask(&p, &mask).unwrap();
            prop_assert_eq!(apply_mask(&m, &mask).unwrap(), m.clone());
            prop_assert_eq!(apply_mask(&c, &mask).unwrap(), clip_params(&m, cap).unwrap());

            let spec = ConstraintSpec::unconstrained().with_cap(cap).with_mask(mask);
            let mut q = p.clone();
            spec.enforce(&mut q).unwrap();
            prop_assert!(spec.is_satisfied_by(&q));
        }
    }
}
