//! Counter-based pseudo-random generator.
//!
//! Every sampling routine in this crate draws from a `CounterRng`, a keyed
//! splitmix64 stream: output k is `mix64(key + k·γ)` with γ the 64-bit golden
//! ratio. Unlike a stateful generator, a stream is a pure function of
//! `(key, counter)`, so results never depend on sharing, thread scheduling,
//! or call order across streams.
//!
//! Independent streams are derived with [`split_stream`]; the convention used
//! throughout is `split_stream(master_seed, index)` for trajectory `index`.
//! Two trajectories of the same ensemble therefore always see the same
//! numbers no matter how many worker threads run them.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Substream tag for state-path draws of a trajectory seed.
pub const PATH_STREAM: u64 = 1;
/// Substream tag for additive Gaussian draws of the same trajectory seed.
pub const NOISE_STREAM: u64 = 2;

/// splitmix64 finalizer: a cheap, well-mixed 64-bit permutation.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the key of an independent substream of `master`.
///
/// Distinct `index` values give statistically independent streams; the map is
/// deterministic, so `split_stream(s, i)` identifies trajectory `i` of seed
/// `s` forever.
#[inline]
pub fn split_stream(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(GOLDEN_GAMMA)))
}

/// A counter-based 64-bit generator (keyed splitmix64).
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    ctr: u64,
    cached_normal: Option<f64>,
}

impl CounterRng {
    pub fn from_key(key: u64) -> Self {
        CounterRng { key, ctr: 0, cached_normal: None }
    }

    /// Stream for trajectory `index` of `master` (see [`split_stream`]).
    pub fn from_split(master: u64, index: u64) -> Self {
        Self::from_key(split_stream(master, index))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.ctr = self.ctr.wrapping_add(1);
        mix64(self.key.wrapping_add(self.ctr.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; the companion value is cached so a
    /// pair of uniforms yields two normals.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.next_f64(); // in (0, 1]: keeps ln finite
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.cached_normal = Some(r * s);
        r * c
    }

    /// Inverse-CDF draw from a cumulative table (nondecreasing, last entry 1).
    #[inline]
    pub fn next_index(&mut self, cdf: &[f64]) -> usize {
        let u = self.next_f64();
        cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
    }
}

/// Cumulative table of a probability vector, for [`CounterRng::next_index`].
pub fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(weights.len());
    for &w in weights {
        acc += w;
        out.push(acc);
    }
    out
}
