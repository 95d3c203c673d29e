//! Weighted-sum score fusion over module subsets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ModuleId;

/// Calibrated per-module scores for a set of samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub user_ids: Vec<String>,
    pub end_seconds: Vec<u32>,
    pub labels: Vec<bool>,
    pub scores: BTreeMap<ModuleId, Vec<f64>>,
}

impl ScoreSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Scores of sample `i` keyed by module.
    pub fn sample(&self, i: usize) -> BTreeMap<ModuleId, f64> {
        self.scores.iter().map(|(m, s)| (*m, s[i])).collect()
    }

    /// Fused score of every sample.
    pub fn fuse_all(&self, config: &FusionConfig) -> Result<Vec<f64>> {
        let cols: Vec<(&Vec<f64>, f64)> = config
            .weights
            .iter()
            .map(|(m, w)| self.scores.get(m).map(|s| (s, *w)).ok_or(Error::MissingScore(*m)))
            .collect::<Result<_>>()?;
        Ok((0..self.len())
            .map(|i| cols.iter().map(|(s, w)| w * s[i]).sum())
            .collect())
    }
}

/// Module subset with weights normalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    weights: BTreeMap<ModuleId, f64>,
}

impl FusionConfig {
    pub fn new(weights: impl IntoIterator<Item = (ModuleId, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (m, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidParams(format!("weight for {m} must be nonnegative, got {w}")));
            }
            if map.insert(m, w).is_some() {
                return Err(Error::InvalidParams(format!("module {m} listed twice")));
            }
        }
        let total: f64 = map.values().sum();
        if map.is_empty() || total <= 0.0 {
            return Err(Error::InvalidParams("fusion needs at least one module with positive weight".into()));
        }
        map.values_mut().for_each(|w| *w /= total);
        Ok(Self { weights: map })
    }

    pub fn equal(modules: &[ModuleId]) -> Result<Self> {
        Self::new(modules.iter().map(|&m| (m, 1.0)))
    }

    pub fn modules(&self) -> Vec<ModuleId> {
        self.weights.keys().copied().collect()
    }

    pub fn weights(&self) -> &BTreeMap<ModuleId, f64> {
        &self.weights
    }

    pub fn name(&self) -> String {
        subset_name(&self.modules())
    }
}

/// `s = sum_m w_m s_m`. A singleton reproduces its input bit for bit.
pub fn fuse(sample: &BTreeMap<ModuleId, f64>, config: &FusionConfig) -> Result<f64> {
    if let [(m, _)] = config.weights.iter().collect::<Vec<_>>()[..] {
        return sample.get(m).copied().ok_or(Error::MissingScore(*m));
    }
    config
        .weights
        .iter()
        .map(|(m, w)| sample.get(m).map(|s| w * s).ok_or(Error::MissingScore(*m)))
        .sum()
}

/// Every nonempty subset, by size and then lexicographically by module id.
pub fn enumerate_combinations(available: &[ModuleId]) -> Vec<Vec<ModuleId>> {
    let mut mods = available.to_vec();
    mods.sort();
    mods.dedup();
    let n = mods.len();
    let mut out: Vec<Vec<ModuleId>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).map(|i| mods[i]).collect())
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Sorted lowercase ids joined by `+`, e.g. `eb+expr+hp`.
pub fn subset_name(modules: &[ModuleId]) -> String {
    let mut m = modules.to_vec();
    m.sort();
    m.dedup();
    m.iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ModuleId::*;

    fn sample(v: &[(ModuleId, f64)]) -> BTreeMap<ModuleId, f64> {
        v.iter().copied().collect()
    }

    #[test]
    fn equal_weights_average() {
        let s = sample(&[(Eb, 0.2), (Hp, 0.4), (Ear, 0.6), (Expr, 0.8)]);
        let cfg = FusionConfig::equal(&[Eb, Hp, Ear, Expr]).unwrap();
        assert!((fuse(&s, &cfg).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn one_hot_weights_select_a_module() {
        let s = sample(&[(Eb, 0.37), (Hp, 0.4), (Ear, 0.6), (Expr, 0.8)]);
        let cfg = FusionConfig::new([(Eb, 1.0), (Hp, 0.0), (Ear, 0.0), (Expr, 0.0)]).unwrap();
        assert_eq!(fuse(&s, &cfg).unwrap(), 0.37);
    }

    #[test]
    fn missing_module_is_reported() {
        let cfg = FusionConfig::equal(&[Eb, Hp]).unwrap();
        assert!(matches!(fuse(&sample(&[(Eb, 0.3)]), &cfg), Err(Error::MissingScore(_))));
    }

    #[test]
    fn invalid_weights_are_rejected() {
        assert!(FusionConfig::new([(Eb, -1.0)]).is_err());
        assert!(FusionConfig::new([(Eb, 0.0)]).is_err());
        assert!(FusionConfig::equal(&[]).is_err());
    }

    #[test]
    fn combination_order() {
        assert_eq!(enumerate_combinations(&[Eb]), vec![vec![Eb]]);
        assert_eq!(enumerate_combinations(&[Hp, Eb]), vec![vec![Eb], vec![Hp], vec![Eb, Hp]]);
        let all = enumerate_combinations(&[Eb, Hp, Ear, Expr]);
        assert_eq!(all.len(), 15);
        assert_eq!(all.iter().filter(|s| s.len() == 2).count(), 6);
        assert_eq!(all.iter().filter(|s| s.len() == 3).count(), 4);
        assert_eq!(all[4], vec![Ear, Eb]);
        assert_eq!(all[14], vec![Ear, Eb, Expr, Hp]);
    }

    #[test]
    fn names_are_sorted_ids() {
        assert_eq!(subset_name(&[Hp, Expr, Eb]), "eb+expr+hp");
        assert_eq!(subset_name(&[Eb]), "eb");
    }

    #[test]
    fn fuse_all_matches_per_sample_fusion() {
        let set = ScoreSet {
            user_ids: vec!["a".into(), "b".into()],
            end_seconds: vec![59, 60],
            labels: vec![true, false],
            scores: [(Eb, vec![0.1, 0.9]), (Hp, vec![0.3, 0.2])].into_iter().collect(),
        };
        let cfg = FusionConfig::new([(Eb, 2.0), (Hp, 1.0)]).unwrap();
        let all = set.fuse_all(&cfg).unwrap();
        for (i, &v) in all.iter().enumerate() {
            assert!((v - fuse(&set.sample(i), &cfg).unwrap()).abs() < 1e-15);
        }
        assert!(matches!(set.fuse_all(&FusionConfig::equal(&[Expr]).unwrap()), Err(Error::MissingScore(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn scores() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.001f64..0.999, 4)
        }
        fn weights() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.01f64..10.0, 4)
        }
        const MODS: [ModuleId; 4] = [Eb, Hp, Ear, Expr];

        proptest! {
            #[test]
            fn weight_scaling_is_irrelevant(s in scores(), w in weights(), k in 0.01f64..100.0) {
                let smp: BTreeMap<_, _> = MODS.iter().copied().zip(s).collect();
                let a = FusionConfig::new(MODS.iter().copied().zip(w.iter().copied())).unwrap();
                let b = FusionConfig::new(MODS.iter().copied().zip(w.iter().map(|v| v * k))).unwrap();
                prop_assert!((fuse(&smp, &a).unwrap() - fuse(&smp, &b).unwrap()).abs() < 1e-12);
            }

            #[test]
            fn fusion_is_monotone(s in scores(), w in weights(), idx in 0usize..4, bump in 0.0f64..0.5) {
                let cfg = FusionConfig::new(MODS.iter().copied().zip(w)).unwrap();
                let lo: BTreeMap<_, _> = MODS.iter().copied().zip(s.iter().copied()).collect();
                let mut hi = lo.clone();
                *hi.get_mut(&MODS[idx]).unwrap() += bump;
                prop_assert!(fuse(&hi, &cfg).unwrap() >= fuse(&lo, &cfg).unwrap());
            }

            #[test]
            fn fused_score_stays_in_unit_interval(s in scores(), w in weights()) {
                let cfg = FusionConfig::new(MODS.iter().copied().zip(w)).unwrap();
                let smp: BTreeMap<_, _> = MODS.iter().copied().zip(s).collect();
                let f = fuse(&smp, &cfg).unwrap();
                prop_assert!(f > 0.0 && f < 1.0);
            }

            #[test]
            fn constant_scores_are_preserved(c in 0.001f64..0.999, w in weights()) {
                let cfg = FusionConfig::new(MODS.iter().copied().zip(w)).unwrap();
                let smp: BTreeMap<_, _> = MODS.iter().map(|&m| (m, c)).collect();
                prop_assert!((fuse(&smp, &cfg).unwrap() - c).abs() < 1e-12);
            }

            #[test]
            fn singleton_is_bit_exact(s in scores(), idx in 0usize..4) {
                let smp: BTreeMap<_, _> = MODS.iter().copied().zip(s.iter().copied()).collect();
                let cfg = FusionConfig::equal(&[MODS[idx]]).unwrap();
                prop_assert_eq!(fuse(&smp, &cfg).unwrap().to_bits(), s[idx].to_bits());
            }
        }
    }
}
