//! Deterministic, splittable random numbers for the study harness.
//!
//! A splitmix-style 64-bit generator seeds independent substreams derived
//! from (seed, label, index), so replicates can run in any order or in
//! parallel and still produce identical results.

/// splitmix64 finalising mix.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// splitmix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Substream for (seed, label, index): replicate-level parallelism with
    /// schedule-independent output.
    pub fn substream(seed: u64, label: &str, index: u64) -> Self {
        let s = mix(seed) ^ mix(hash_label(label)) ^ mix(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        SplitMix64 ::new(mix(s))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        mix(self.state)
    }

    /// Uniform in (0, 1]: 53 random bits, never exactly zero.
    pub fn next_unit(&mut self) -> f64 {
        let bits = self.next_u64() >> 11;
        (bits as f64 + 1.0) / 9_007_199_254_740_993.0
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / 9_007_199_254_740_992.0)
    }
}

/// Standard normal draws by Box-Muller, caching the second value of each
/// pair.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(rng: SplitMix64) -> Self {
        GaussianStream { rng, spare: None }
    }

    pub fn substream(seed: u64, label: &str, index: u64) -> Self {
        GaussianStream::new(SplitMix64::substream(seed, label, index))
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.rng.next_unit();
        let u2 = self.rng.next_unit();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn next_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.next_range(lo, hi)
    }

    /// Poisson draw by inversion of the cumulative sum (Knuth), adequate
    /// for the small rates used by the synthetic count generator.
    pub fn next_poisson(&mut self, rate: f64) -> u64 {
        if rate <= 0.0 {
            return 0;
        }
        let threshold = (-rate).exp();
        let mut k = 0u64;
        let mut p = 1.0;
        loop {
            p *= self.rng.next_unit();
            if p <= threshold {
                return k;
            }
            k += 1;
            if k > 10_000 {
                return k; // rate far outside the intended regime
            }
        }
    }
}
