//! Gray-code Sobol sequence with Joe–Kuo direction numbers (new-joe-kuo-6.21201).
//!
//! Index 0 (the origin) is never emitted. Seeded streams apply a random digital
//! shift, which keeps the net structure of the unshifted sequence.

use rand::Rng;

use crate::error::{Error, Result};

/// Maximum supported dimension.
pub const MAX_DIM: usize = 16;

const BITS: usize = 32;
const SCALE: f64 = 1.0 / 4_294_967_296.0;

// (s, a, m_1..m_s) for dimensions 2..=16; dimension 1 is van der Corput.
const JOE_KUO: [(u32, u32, &[u32]); MAX_DIM - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
];

fn directions(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (31 - k);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim - 1];
    let s = s as usize;
    for k in 0..s {
        v[k] = m[k] << (31 - k);
    }
    for k in s..BITS {
        v[k] = v[k - s] ^ (v[k - s] >> s);
        for t in 1..s {
            if (a >> (s - 1 - t)) & 1 == 1 {
                v[k] ^= v[k - t];
            }
        }
    }
    v
}

/// Multi-dimensional Sobol generator.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    shift: Vec<u32>,
    index: u64,
}

impl Sobol {
    /// Unshifted sequence; the first emitted point is `(0.5, …, 0.5)`.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Validation(format!(
                "sobol dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        Ok(Self {
            directions: (0..dim).map(directions).collect(),
            state: vec![0; dim],
            shift: vec![0; dim],
            index: 0,
        })
    }

    /// Sequence with a random digital shift drawn from `rng`.
    pub fn shifted<R: Rng>(dim: usize, rng: &mut R) -> Result<Self> {
        let mut s = Self::new(dim)?;
        for sh in &mut s.shift {
            *sh = rng.random();
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// Advance to the next index and return its point.
    pub fn next_point(&mut self) -> Vec<f64> {
        let c = self.index.trailing_ones() as usize;
        self.index += 1;
        for (x, dir) in self.state.iter_mut().zip(&self.directions) {
            *x ^= dir[c.min(BITS - 1)];
        }
        self.state
            .iter()
            .zip(&self.shift)
            .map(|(&x, &s)| f64::from(x ^ s) * SCALE)
            .collect()
    }

    /// The next `n` points.
    pub fn take_points(&mut self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.next_point()).collect()
    }
}
