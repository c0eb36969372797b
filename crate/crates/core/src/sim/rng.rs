//! Counter-based generator: the `i`-th draw of stream `s` under seed `k` is
//! `mix(key(k, s) + (i + 1)·γ)` with the SplitMix64 finaliser `mix` and
//! increment `γ = 0x9E3779B97F4A7C15`. Any draw can be recomputed from
//! `(seed, stream, counter)` alone, so parallel repetitions stay
//! reproducible.

use crate::inference::normal_quantile;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng {
            key: mix(seed ^ mix(stream.wrapping_add(GOLDEN))),
            counter: 0,
        }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval `(0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inversion.
    pub fn gaussian(&mut self) -> f64 {
        normal_quantile(self.uniform()).expect("uniform draws lie in (0, 1)")
    }
}
