//! Zipf file popularity, random cache placement and per-slot requests.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    #[serde(rename = "files")]
    pub n_files: usize,
    pub zipf_omega: f64,
    pub cache_capacity: usize,
    pub u_back_bps: f64,
    /// Draw requests once and reuse them in every slot.
    pub static_requests: bool,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            n_files: 50,
            zipf_omega: 0.5,
            cache_capacity: 40,
            u_back_bps: 3e6,
            static_requests: false,
        }
    }
}

impl CacheConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_files < 1 {
            return Err(Error::invalid("files", "must be at least 1"));
        }
        if self.cache_capacity > self.n_files {
            return Err(Error::invalid("cache_capacity", "exceeds number of files"));
        }
        if !(self.zipf_omega >= 0.0) {
            return Err(Error::invalid("zipf_omega", "must be non-negative"));
        }
        if !(self.u_back_bps >= 0.0) {
            return Err(Error::invalid("u_back_bps", "must be non-negative"));
        }
        Ok(())
    }
}

/// `q_f = f^-ω / Σ_f f^-ω` for `f = 1..=F`.
pub fn zipf_popularity(n_files: usize, omega: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=n_files).map(|f| (f as f64).powf(-omega)).collect();
    let norm: f64 = w.iter().sum();
    w.into_iter().map(|x| x / norm).collect()
}

/// Files held by each TBS (sorted, 0-based file ids).
#[derive(Debug, Clone, PartialEq)]
pub struct CachePlacement {
    pub files: Vec<Vec<usize>>,
}

impl CachePlacement {
    /// Random scheme: every TBS caches a uniform random subset of `cache_capacity` files.
    pub fn random<R: Rng>(cfg: &CacheConfig, n_tbs: usize, rng: &mut R) -> Self {
        let files = (0..n_tbs)
            .map(|_| {
                let mut v =
                    rand::seq::index::sample(rng, cfg.n_files, cfg.cache_capacity).into_vec();
                v.sort_unstable();
                v
            })
            .collect();
        CachePlacement { files }
    }

    pub fn for_scenario(scenario: &Scenario) -> Self {
        let mut rng = stream_rng(scenario.rng_seed, Stream::CachePlacement, 0);
        Self::random(&scenario.caching, scenario.n_tbs, &mut rng)
    }

    pub fn holds(&self, tbs: usize, file: usize) -> bool {
        self.files[tbs].binary_search(&file).is_ok()
    }
}

/// Cache status for one slot: `g[[m, j]]` is true iff TBS `m` holds GU `j`'s requested file.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheState {
    pub g: Array2<bool>,
    pub requests: Vec<usize>,
    pub placement: CachePlacement,
}

impl CacheState {
    pub fn new(placement: CachePlacement, requests: Vec<usize>) -> Self {
        let m = placement.files.len();
        let j = requests.len();
        let g = Array2::from_shape_fn((m, j), |(m, j)| placement.holds(m, requests[j]));
        CacheState {
            g,
            requests,
            placement,
        }
    }

    /// Every GU draws one file from the Zipf popularity.
    pub fn place_and_request<R: Rng>(
        cfg: &CacheConfig,
        placement: CachePlacement,
        n_gu: usize,
        rng: &mut R,
    ) -> Self {
        let q = zipf_popularity(cfg.n_files, cfg.zipf_omega);
        let dist = WeightedIndex::new(&q).expect("popularity is a valid distribution");
        let requests = (0..n_gu).map(|_| dist.sample(rng)).collect();
        Self::new(placement, requests)
    }

    /// Cache state of timeslot `t` for a scenario, with requests redrawn per slot
    /// unless `static_requests` is set.
    pub fn for_slot(scenario: &Scenario, placement: &CachePlacement, t: usize) -> Self {
        let slot = if scenario.caching.static_requests { 0 } else { t as u64 };
        let mut rng = stream_rng(scenario.rng_seed, Stream::Requests, slot);
        Self::place_and_request(&scenario.caching, placement.clone(), scenario.n_gu, &mut rng)
    }

    pub fn is_local(&self, tbs: usize, gu: usize) -> bool {
        self.g[[tbs, gu]]
    }

    pub fn n_tbs(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_gu(&self) -> usize {
        self.g.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuPartition {
    pub local: Vec<usize>,
    pub backhaul: Vec<usize>,
}

/// Splits GUs into local (request cached at the associated TBS) and backhaul GUs.
pub fn classify_gus(cache: &CacheState, association: &[Option<usize>]) -> Result<GuPartition> {
    let mut part = GuPartition {
        local: Vec::new(),
        backhaul: Vec::new(),
    };
    for (j, a) in association.iter().enumerate() {
        let m = a.ok_or(Error::Unassociated(j))?;
        if cache.is_local(m, j) {
            part.local.push(j);
        } else {
            part.backhaul.push(j);
        }
    }
    Ok(part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    #[test]
    fn uniform_when_omega_zero() {
        assert_eq!(zipf_popularity(2, 0.0), vec![0.5, 0.5]);
    }

    #[test]
    fn three_files_half_exponent() {
        // Ω = 1 + 2^-0.5 + 3^-0.5 summed by hand.
        let omega = 1.0 + 2f64.powf(-0.5) + 3f64.powf(-0.5);
        let want = [1.0 / omega, 2f64.powf(-0.5) / omega, 3f64.powf(-0.5) / omega];
        let q = zipf_popularity(3, 0.5);
        for (a, b) in q.iter().zip([0.4377, 0.3095, 0.2527]) {
            assert!((a - b).abs() < 1e-4);
        }
        for (a, b) in q.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn popularity_normalized_and_monotone(f in 1usize..2000, omega in 0.0f64..3.0) {
            let q = zipf_popularity(f, omega);
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(q.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    fn cfg(cap: usize) -> CacheConfig {
        CacheConfig {
            cache_capacity: cap,
            ..CacheConfig::default()
        }
    }

    #[test]
    fn full_and_empty_caches() {
        let mut rng = stream_rng(1, Stream::CachePlacement, 0);
        for (cap, want) in [(50, true), (0, false)] {
            let c = cfg(cap);
            let placement = CachePlacement::random(&c, 3, &mut rng);
            let st = CacheState::place_and_request(&c, placement, 20, &mut rng);
            assert!(st.g.iter().all(|&x| x == want));
            let part = classify_gus(&st, &vec![Some(1); 20]).unwrap();
            if want {
                assert_eq!(part.local.len(), 20);
            } else {
                assert_eq!(part.backhaul.len(), 20);
            }
        }
    }

    #[test]
    fn placement_has_exact_capacity() {
        let mut rng = stream_rng(3, Stream::CachePlacement, 0);
        let p = CachePlacement::random(&cfg(40), 5, &mut rng);
        for f in &p.files {
            assert_eq!(f.len(), 40);
            assert!(f.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn random_scheme_hit_rate() {
        // Under random placement each file is cached w.p. 40/50 independent of the request.
        let c = cfg(40);
        let mut rng = stream_rng(11, Stream::Instance, 0);
        let trials = 100_000;
        let mut hits = 0usize;
        for _ in 0..trials {
            let placement = CachePlacement::random(&c, 1, &mut rng);
            let st = CacheState::place_and_request(&c, placement, 1, &mut rng);
            hits += st.g[[0, 0]] as usize;
        }
        let p = hits as f64 / trials as f64;
        assert!((p - 0.8).abs() < 0.01, "{p}");
    }

    #[test]
    fn handcrafted_partition() {
        // TBS 0 caches {0, 1}, TBS 1 caches {2}; requests (0, 2, 1); association (1, 1, 0).
        let placement = CachePlacement {
            files: vec![vec![0, 1], vec![2]],
        };
        let st = CacheState::new(placement, vec![0, 2, 1]);
        let part = classify_gus(&st, &[Some(1), Some(1), Some(0)]).unwrap();
        assert_eq!(part.local, vec![1, 2]);
        assert_eq!(part.backhaul, vec![0]);
        assert_eq!(part.local.len() + part.backhaul.len(), 3);
    }

    #[test]
    fn missing_association_errors() {
        let st = CacheState::new(CachePlacement { files: vec![vec![0]] }, vec![0, 0]);
        assert!(matches!(
            classify_gus(&st, &[Some(0), None]),
            Err(Error::Unassociated(1))
        ));
    }
}
