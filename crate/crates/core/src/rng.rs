//! Deterministic counter-based random streams.
//!
//! Every draw is a pure function of `(master seed, purpose, stage, trial,
//! counter)`, so results are reproducible regardless of execution order or
//! parallel partitioning of trials. The generator is a SplitMix64 finalizer
//! over a Weyl counter; it is not cryptographically secure.

/// What a stream is spent on. Separating purposes keeps conditional draws
/// (e.g. the identification coin, drawn only when a honeypot is reachable)
/// from shifting unrelated draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    ServiceLinks,
    HoneyLink,
    Identify,
    Compromise,
    InitialNode,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::ServiceLinks => 1,
            StreamPurpose::HoneyLink => 2,
            StreamPurpose::Identify => 3,
            StreamPurpose::Compromise => 4,
            StreamPurpose::InitialNode => 5,
        }
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A random stream keyed by `(seed, purpose, stage, trial)`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    base: u64,
    counter: u64,
}

impl RandomStream {
    pub fn new(seed: u64, purpose: StreamPurpose, stage: u64, trial: u64) -> Self {
        let mut base = mix(seed ^ GOLDEN);
        base = mix(base ^ purpose.tag().wrapping_mul(0xa076_1d64_78bd_642f));
        base = mix(base ^ stage.wrapping_mul(0xe703_7ed1_a0b4_28db));
        base = mix(base ^ trial.wrapping_mul(0x8ebc_6af0_9c88_c6e3));
        Self { base, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let x = mix(self.base ^ self.counter.wrapping_mul(GOLDEN));
        self.counter += 1;
        x
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Draws an index from explicit nonnegative weights. Weights may sum to
    /// less than one; the missing mass maps to `None`.
    pub fn categorical_or_none<I>(&mut self, weights: I) -> Option<usize>
    where
        I: IntoIterator<Item = f64>,
    {
        let u = self.next_f64();
        let mut cum = 0.0;
        for (idx, w) in weights.into_iter().enumerate() {
            cum += w;
            if u < cum {
                return Some(idx);
            }
        }
        None
    }
}
