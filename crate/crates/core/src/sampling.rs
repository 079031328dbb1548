//! Uniform joint-space sampling and FK dataset generation.
//!
//! All randomness flows through [`SampleRng`], a seedable ChaCha8 stream
//! with an explicit u64→f64 mapping, so datasets are reproducible
//! bit-for-bit across platforms.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::chain::{forward_kinematics, ChainError, JointConfig, KinematicChain};

/// Portable seeded random number generator.
///
/// Backed by the ChaCha stream cipher with 8 rounds (`ChaCha8Rng`), whose
/// output sequence is specified and stable across platforms. Floats are
/// derived from the top 53 bits of each `u64` draw:
/// `u >> 11` scaled by 2⁻⁵³, giving uniform values in `[0, 1)`.
#[derive(Debug, Clone)]
pub struct SampleRng {
    inner: ChaCha8Rng,
}

impl SampleRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw from `[0, 1)` with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform draw from `[lower, upper)`; a degenerate interval returns
    /// `lower` exactly.
    pub fn uniform(&mut self, lower: f64, upper: f64) -> f64 {
        lower + (upper - lower) * self.next_f64()
    }

    /// Uniform index in `0..n` via the widening-multiply reduction
    /// `(u128(draw) * n) >> 64`; the bias of n/2⁶⁴ is negligible.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

/// Draw one configuration uniformly within the active joints' limits.
///
/// Each entry is drawn independently; the generator state advances by one
/// draw per active joint.
pub fn sample_config(chain: &KinematicChain, rng: &mut SampleRng) -> JointConfig {
    JointConfig::new(
        chain
            .active_joints()
            .map(|j| {
                let l = j.limits().expect("active joints carry limits");
                rng.uniform(l.lower, l.upper)
            })
            .collect(),
    )
}

/// One training pair: end-effector translation and the configuration that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct IkSample {
    /// Tip translation in the base frame, meters.
    pub position: Vector3<f64>,
    pub config: JointConfig,
}

/// A generated FK dataset, tied to the chain it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct IkDataset {
    /// Fingerprint of the generating chain definition.
    pub chain_fingerprint: String,
    pub seed: u64,
    pub dof: usize,
    pub samples: Vec<IkSample>,
}

impl IkDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Generate `n` samples by uniform joint sampling followed by forward
/// kinematics. Deterministic in `(chain, n, seed)`.
pub fn generate_dataset(
    chain: &KinematicChain,
    n: usize,
    seed: u64,
) -> Result<IkDataset, ChainError> {
    let mut rng = SampleRng::from_seed(seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let config = sample_config(chain, &mut rng);
        let position = forward_kinematics(chain, &config)?.translation;
        samples.push(IkSample { position, config });
    }
    Ok(IkDataset {
        chain_fingerprint: chain.fingerprint(),
        seed,
        dof: chain.dof(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{Joint, JointKind, JointLimits};

    fn single_joint_chain(lower: f64, upper: f64) -> KinematicChain {
        KinematicChain::new(
            "one",
            alloc::vec![Joint::new(
                "j0",
                JointKind::Revolute,
                Vector3::zeros(),
                Vector3::zeros(),
                Vector3::z(),
                Some(JointLimits::new(lower, upper).unwrap()),
                false,
            )
            .unwrap()],
        )
    }

    #[test]
    fn degenerate_interval_returns_bound_exactly() {
        let chain = single_joint_chain(0.7, 0.7);
        let mut rng = SampleRng::from_seed(5);
        for _ in 0..10 {
            assert_eq!(sample_config(&chain, &mut rng).values[0], 0.7);
        }
    }

    #[test]
    fn unit_interval_mean_approaches_half() {
        let mut rng = SampleRng::from_seed(99);
        let n = 10_000;
        let mean = (0..n).map(|_| rng.uniform(0.0, 1.0)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean} outside 0.5 +/- 0.02");
    }

    #[test]
    fn identical_seeds_give_identical_sequences() {
        let chain = single_joint_chain(-1.0, 2.0);
        let mut a = SampleRng::from_seed(1234);
        let mut b = SampleRng::from_seed(1234);
        for _ in 0..100 {
            assert_eq!(
                sample_config(&chain, &mut a),
                sample_config(&chain, &mut b)
            );
        }
    }

    #[test]
    fn sampling_respects_limits() {
        let chain = single_joint_chain(-0.25, 0.5);
        let mut rng = SampleRng::from_seed(7);
        for _ in 0..100_000 {
            let q = sample_config(&chain, &mut rng).values[0];
            assert!((-0.25..0.5).contains(&q), "out-of-range draw {q}");
        }
    }

    #[test]
    fn dataset_positions_match_fk_bit_exactly() {
        let chain = crate::testutil::planar_two_link();
        let ds = generate_dataset(&chain, 50, 42).unwrap();
        assert_eq!(ds.len(), 50);
        assert_eq!(ds.dof, 2);
        for sample in &ds.samples {
            let fk = forward_kinematics(&chain, &sample.config).unwrap().translation;
            assert_eq!(fk, sample.position);
        }
    }

    #[test]
    fn dataset_generation_is_deterministic() {
        let chain = crate::testutil::planar_two_link();
        let a = generate_dataset(&chain, 200, 9).unwrap();
        let b = generate_dataset(&chain, 200, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&chain, 200, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_sample_dataset_is_self_consistent() {
        let chain = crate::testutil::planar_two_link();
        let ds = generate_dataset(&chain, 1, 0).unwrap();
        assert_eq!(ds.len(), 1);
        let fk = forward_kinematics(&chain, &ds.samples[0].config).unwrap();
        assert_eq!(fk.translation, ds.samples[0].position);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = SampleRng::from_seed(3);
        let mut v: Vec<usize> = (0..100).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(v, (0..100).collect::<Vec<_>>());
    }
}
