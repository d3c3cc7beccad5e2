//! Sufficient statistics `⟨v⟩`, `⟨h⟩`, `⟨h vᵀ⟩` and the gradients built from them.

use alloc::{vec, vec::Vec};

use crate::error::{Error, Result};
use crate::rbm::RbmParams;

/// First and second moments of the two layers, shaped like [`RbmParams`]
/// (`pairwise` is `N × D` row-major). Also used for gradients, which are a
/// difference of two statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub visible: Vec<f64>,
    pub hidden: Vec<f64>,
    pub pairwise: Vec<f64>,
}

impl Stats {
    pub fn zeros(num_visible: usize, num_hidden: usize) -> Self {
        Self {
            visible: vec![0.0; num_visible],
            hidden: vec![0.0; num_hidden],
            pairwise: vec![0.0; num_visible * num_hidden],
        }
    }

    pub fn num_visible(&self) -> usize {
        self.visible.len()
    }

    pub fn num_hidden(&self) -> usize {
        self.hidden.len()
    }

    /// Positive-phase statistics with hidden samples replaced by their
    /// conditional means `ĥ = p(h = 1 | v)`, averaged over the batch.
    pub fn mean_field(params: &RbmParams, batch: &[Vec<bool>]) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::invalid("batch", "at least one example is required"));
        }
        let (d, n) = (params.num_visible(), params.num_hidden());
        let mut stats = Self::zeros(d, n);
        let scale = 1.0 / batch.len() as f64;
        for v in batch {
            let h_hat = params.hidden_probs(v)?;
            stats.accumulate(v, &h_hat, scale);
        }
        Ok(stats)
    }

    /// Monte Carlo statistics from binary joint states, averaged.
    pub fn from_states<'a, I>(num_visible: usize, num_hidden: usize, states: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [bool], &'a [bool])>,
    {
        let states: Vec<_> = states.into_iter().collect();
        let mut stats = Self::zeros(num_visible, num_hidden);
        if states.is_empty() {
            return Ok(stats);
        }
        let scale = 1.0 / states.len() as f64;
        let mut h_buf = vec![0.0; num_hidden];
        for (v, h) in states {
            crate::error::check_len("chain visible", num_visible, v.len())?;
            crate::error::check_len("chain hidden", num_hidden, h.len())?;
            for (o, &bit) in h_buf.iter_mut().zip(h) {
                *o = if bit { 1.0 } else { 0.0 };
            }
            stats.accumulate(v, &h_buf, scale);
        }
        Ok(stats)
    }

    fn accumulate(&mut self, v: &[bool], h: &[f64], scale: f64) {
        let d = self.visible.len();
        for (i, _) in v.iter().enumerate().filter(|(_, &on)| on) {
            self.visible[i] += scale;
        }
        for (j, &hj) in h.iter().enumerate() {
            self.hidden[j] += scale * hj;
            if hj == 0.0 {
                continue;
            }
            let row = &mut self.pairwise[j * d..(j + 1) * d];
            for (i, _) in v.iter().enumerate().filter(|(_, &on)| on) {
                row[i] += scale * hj;
            }
        }
    }

    /// `self - other`.
    pub fn difference(&self, other: &Stats) -> Stats {
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Stats {
            visible: sub(&self.visible, &other.visible),
            hidden: sub(&self.hidden, &other.hidden),
            pairwise: sub(&self.pairwise, &other.pairwise),
        }
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, other: &Stats, factor: f64) {
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += factor * y);
        add(&mut self.visible, &other.visible);
        add(&mut self.hidden, &other.hidden);
        add(&mut self.pairwise, &other.pairwise);
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairwise
            .iter()
            .chain(&self.visible)
            .chain(&self.hidden)
            .copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Stats) -> f64 {
        self.iter()
            .zip(other.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sigmoid;

    #[test]
    fn mean_field_examples() {
        let p = RbmParams::zeros(3, 2).unwrap();
        let s = Stats::mean_field(&p, &[vec![true, false, true], vec![false; 3]]).unwrap();
        assert_eq!(s.hidden, vec![0.5, 0.5]);
        assert_eq!(s.visible, vec![0.5, 0.0, 0.5]);

        let p = RbmParams::from_parts(1, 1, vec![2.0], vec![0.0], vec![-1.0]).unwrap();
        let s = Stats::mean_field(&p, &[vec![true]]).unwrap();
        assert_eq!(s.pairwise, vec![sigmoid(1.0)]);
        assert!(Stats::mean_field(&p, &[]).is_err());
    }

    #[test]
    fn chain_statistics() {
        let zeros = [false; 3];
        let hz = [false; 2];
        let s = Stats::from_states(3, 2, [(&zeros[..], &hz[..]), (&zeros[..], &hz[..])]).unwrap();
        assert_eq!(s.max_abs(), 0.0);

        let v = [true, false, true];
        let h = [false, true];
        let s = Stats::from_states(3, 2, [(&v[..], &h[..])]).unwrap();
        assert_eq!(s.visible, vec![1.0, 0.0, 1.0]);
        assert_eq!(s.hidden, vec![0.0, 1.0]);
        assert_eq!(s.pairwise, vec![0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    }
}
