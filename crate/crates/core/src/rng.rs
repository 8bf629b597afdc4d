//! Portable 64-bit linear congruential generator.
//!
//! The stream is fixed so that noise images and default network weights are
//! reproducible across platforms and implementations:
//! `state <- state * 6364136223846793005 + 1442695040888963407`, output is the
//! high 32 bits of the new state.

const MULTIPLIER: u64 = 6364136223846793005;
const INCREMENT: u64 = 1442695040888963407;

#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u32(&mut self) -> u32 {
        self.state = self.state.wrapping_mul(MULTIPLIER).wrapping_add(INCREMENT);
        (self.state >> 32) as u32
    }

    /// Uniform on the closed interval [0, 1].
    pub fn next_unit(&mut self) -> f64 {
        self.next_u32() as f64 / u32::MAX as f64
    }

    /// Uniform on [0, 255]; this is the white-noise pixel distribution.
    pub fn next_pixel(&mut self) -> f64 {
        self.next_unit() * 255.0
    }

    /// Standard normal sample (Box-Muller, one draw per call).
    pub fn next_gaussian(&mut self) -> f64 {
        // u1 in (0, 1] so that ln(u1) is finite.
        let u1 = (self.next_u32() as f64 + 1.0) / (u32::MAX as f64 + 1.0);
        let u2 = self.next_unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
