//! Counter-based random numbers (Philox4x32-10).
//!
//! Every draw is a pure function of `(seed, path, step, site)`, so paths can be
//! simulated in any order on any number of workers, and two simulations that
//! share a site see the same noise on it.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

#[inline(always)]
fn round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let (hi0, lo0) = mulhilo(M0, ctr[0]);
    let (hi1, lo1) = mulhilo(M1, ctr[2]);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

/// The Philox4x32 bijection with 10 rounds.
#[inline]
pub fn philox4x32(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for r in 0..10 {
        if r > 0 {
            key[0] = key[0].wrapping_add(W0);
            key[1] = key[1].wrapping_add(W1);
        }
        ctr = round(ctr, key);
    }
    ctr
}

/// Maps 64 random bits to the open interval (0, 1).
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Keyed stream of uniform pairs addressed by `(path, step, site)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    key: [u32; 2],
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        NoiseStream {
            key: [seed as u32, (seed >> 32) as u32],
        }
    }

    /// Two independent uniforms in (0, 1) for one site at one step of one path.
    #[inline]
    pub fn uniforms(&self, path: u64, step: u64, site: u32) -> (f64, f64) {
        debug_assert!(path <= u32::MAX as u64, "path index exceeds the counter width");
        let out = philox4x32([step as u32, (step >> 32) as u32, path as u32, site], self.key);
        let a = (out[0] as u64) << 32 | out[1] as u64;
        let b = (out[2] as u64) << 32 | out[3] as u64;
        (open_unit(a), open_unit(b))
    }
}
