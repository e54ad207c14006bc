//! Dirichlet-Multinomial belief over the partner's guilt type.
//!
//! The posterior is approximated by adding, for each guilt type, the
//! probability that a partner of that type would have produced the observed
//! action. The exact nested Bayesian filter over interactive states is not
//! used; this accumulation rule is the only learning in the model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GuiltType;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DirMultBelief {
    params: [f64; 3],
}

impl Default for DirMultBelief {
    fn default() -> Self {
        DirMultBelief::prior()
    }
}

impl DirMultBelief {
    pub const fn prior() -> Self {
        DirMultBelief {
            params: [1.0, 1.0, 1.0],
        }
    }

    /// Builds a belief from raw parameters; each must be finite and ≥ 1.
    pub fn from_params(params: [f64; 3]) -> Result<Self> {
        for &p in &params {
            if !(p.is_finite() && p >= 1.0) {
                return Err(Error::InvalidRecord(alloc::format!(
                    "belief parameter {p} below 1"
                )));
            }
        }
        Ok(DirMultBelief { params })
    }

    pub fn params(&self) -> [f64; 3] {
        self.params
    }

    pub fn predictive(&self) -> [f64; 3] {
        let total: f64 = self.params.iter().sum();
        [
            self.params[0] / total,
            self.params[1] / total,
            self.params[2] / total,
        ]
    }

    pub fn probability(&self, guilt: GuiltType) -> f64 {
        self.predictive()[guilt.index()]
    }

    /// Most probable guilt type; ties resolve to the lower index.
    pub fn mode(&self) -> GuiltType {
        let mut best = 0;
        for i in 1..3 {
            if self.params[i] > self.params[best] {
                best = i;
            }
        }
        GuiltType::from_index(best)
    }

    pub fn update(&self, likelihoods: [f64; 3]) -> Result<Self> {
        for &l in &likelihoods {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::LikelihoodOutOfRange(l));
            }
        }
        Ok(self.update_unchecked(likelihoods))
    }

    pub(crate) fn update_unchecked(&self, likelihoods: [f64; 3]) -> Self {
        DirMultBelief {
            params: [
                self.params[0] + likelihoods[0],
                self.params[1] + likelihoods[1],
                self.params[2] + likelihoods[2],
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: [f64; 3], b: [f64; 3]) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn prior_is_uniform() {
        let p = DirMultBelief::prior();
        assert_eq!(p.params(), [1.0, 1.0, 1.0]);
        assert!(close(p.predictive(), [1.0 / 3.0; 3]));
        assert_eq!(DirMultBelief::prior(), DirMultBelief::default());
    }

    #[test]
    fn predictive_examples() {
        let b = DirMultBelief::from_params([2.0, 1.0, 1.0]).unwrap();
        assert!(close(b.predictive(), [0.5, 0.25, 0.25]));
        let b = DirMultBelief::from_params([1.0, 1.0, 2.0]).unwrap();
        assert!(close(b.predictive(), [0.25, 0.25, 0.5]));
        assert_eq!(b.mode(), GuiltType::Guilty);
    }

    #[test]
    fn update_examples() {
        let p = DirMultBelief::prior();
        assert_eq!(p.update([0.0; 3]).unwrap(), p);
        let u = p.update([1.0; 3]).unwrap();
        assert_eq!(u.params(), [2.0, 2.0, 2.0]);
        assert!(close(u.predictive(), p.predictive()));
        let u = p.update([0.1, 0.3, 0.9]).unwrap();
        assert!(close(u.params(), [1.1, 1.3, 1.9]));
        // original untouched
        assert_eq!(p.params(), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn update_rejects_bad_likelihood() {
        let p = DirMultBelief::prior();
        assert_eq!(
            p.update([0.0, 1.5, 0.0]),
            Err(Error::LikelihoodOutOfRange(1.5))
        );
        assert!(p.update([-0.1, 0.0, 0.0]).is_err());
        assert!(DirMultBelief::from_params([0.5, 1.0, 1.0]).is_err());
    }

    fn likelihood() -> impl Strategy<Value = [f64; 3]> {
        prop::array::uniform3(0.0f64..=1.0)
    }

    proptest! {
        #[test]
        fn params_monotone_and_bounded(seq in prop::collection::vec(likelihood(), 0..20)) {
            let mut b = DirMultBelief::prior();
            for l in &seq {
                let next = b.update(*l).unwrap();
                for i in 0..3 {
                    prop_assert!(next.params()[i] >= b.params()[i]);
                    prop_assert!(next.params()[i] - b.params()[i] <= 1.0);
                }
                let s: f64 = next.predictive().iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                b = next;
            }
        }

        #[test]
        fn order_of_updates_is_irrelevant(seq in prop::collection::vec(likelihood(), 1..12)) {
            let forward = seq.iter().fold(DirMultBelief::prior(), |b, l| b.update(*l).unwrap());
            let backward = seq.iter().rev().fold(DirMultBelief::prior(), |b, l| b.update(*l).unwrap());
            for i in 0..3 {
                prop_assert!((forward.params()[i] - backward.params()[i]).abs() < 1e-9);
            }
        }
    }
}
