//! Sobol low-discrepancy sequence with optional digital-shift scrambling.
//!
//! Gray-code construction over the classic Bratley–Fox direction numbers
//! (primitive polynomials and initial values for the first 40 dimensions).
//! Points are dyadic rationals with 30 fractional bits; a digital shift XORs
//! a seeded random mask into every coordinate, which preserves the dyadic
//! equidistribution that makes power-of-two sample sizes exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub(crate) const MAX_DIM: usize = 40;
const BITS: u32 = 30;

const POLY: [u32; MAX_DIM] = [
    1, 3, 7, 11, 13, 19, 25, 37, 59, 47, 61, 55, 41, 67, 97, 91, 109, 103, 115, 131, 193, 137,
    145, 143, 241, 157, 185, 167, 229, 171, 213, 191, 253, 203, 211, 239, 247, 285, 369, 299,
];

#[rustfmt::skip]
const INITIAL_V: [[u32; MAX_DIM]; 8] = [
    [1; MAX_DIM],
    [
        0, 0, 1, 3, 1, 3, 1, 3, 3, 1, 3, 1, 3, 1, 3, 1, 1, 3, 1, 3, 1, 3, 1, 3,
        3, 1, 3, 1, 3, 1, 3, 1, 1, 3, 1, 3, 1, 3, 1, 3,
    ],
    [
        0, 0, 0, 7, 5, 1, 3, 3, 7, 5, 5, 7, 7, 1, 3, 3, 7, 5, 1, 1, 5, 3, 3, 1,
        7, 5, 1, 3, 3, 7, 5, 1, 1, 5, 7, 7, 5, 1, 3, 3,
    ],
    [
        0, 0, 0, 0, 0, 1, 7, 9, 13, 11, 1, 3, 7, 9, 5, 13, 13, 11, 3, 15, 5, 3,
        15, 7, 9, 13, 9, 1, 11, 7, 5, 15, 1, 15, 11, 5, 3, 1, 7, 9,
    ],
    [
        0, 0, 0, 0, 0, 0, 0, 9, 3, 27, 15, 29, 21, 23, 19, 11, 25, 7, 13, 17,
        1, 25, 29, 3, 31, 11, 5, 23, 27, 19, 21, 5, 1, 17, 13, 7, 15, 9, 31, 9,
    ],
    [
        0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 37, 33, 7, 5, 11, 39, 63, 27,
        17, 15, 23, 29, 3, 21, 13, 31, 25, 9, 49, 33, 19, 29, 11, 19, 27, 15,
        25,
    ],
    [
        0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 13, 33, 115,
        41, 79, 17, 29, 119, 75, 73, 105, 7, 59, 65, 21, 3, 113, 61, 89, 45,
        107,
    ],
    [
        0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
        0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 7, 23, 39,
    ],
];

/// Deterministic Sobol point generator for up to 40 dimensions and 2³⁰ points.
pub(crate) struct SobolSequence {
    dim: usize,
    index: u64,
    state: Vec<u32>,
    shift: Vec<u32>,
    directions: Vec<[u32; BITS as usize]>,
}

impl SobolSequence {
    /// `scramble_seed = 0` leaves the sequence unscrambled; any other seed
    /// applies a reproducible digital shift derived from it.
    pub fn new(dim: usize, scramble_seed: u64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidScheme(format!(
                "sobol sequence supports 1 to {MAX_DIM} dimensions, got {dim}"
            )));
        }
        let mut directions = Vec::with_capacity(dim);
        for d in 0..dim {
            directions.push(direction_numbers(d));
        }
        let shift = if scramble_seed == 0 {
            vec![0; dim]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(scramble_seed);
            (0..dim).map(|_| rng.gen::<u32>() & ((1 << BITS) - 1)).collect()
        };
        Ok(SobolSequence {
            dim,
            index: 0,
            state: vec![0; dim],
            shift,
            directions,
        })
    }

    /// Writes the next point into `out` (length must equal the dimension).
    pub fn next_point(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let scale = (1u64 << BITS) as f64;
        for (slot, (&state, &shift)) in out.iter_mut().zip(self.state.iter().zip(&self.shift)) {
            *slot = (state ^ shift) as f64 / scale;
        }
        let bit = (!self.index).trailing_zeros() as usize;
        debug_assert!(bit < BITS as usize, "sobol sequence exhausted");
        for (state, directions) in self.state.iter_mut().zip(&self.directions) {
            *state ^= directions[bit];
        }
        self.index += 1;
    }
}

/// Direction numbers for one dimension, pre-shifted to 30-bit integers.
fn direction_numbers(d: usize) -> [u32; BITS as usize] {
    let mut v = [1u32; BITS as usize];
    if d > 0 {
        for (row, initial) in INITIAL_V.iter().enumerate() {
            v[row] = if initial[d] != 0 { initial[d] } else { 0 };
        }
        v[0] = 1;
        let poly = POLY[d];
        let degree = (31 - poly.leading_zeros()) as usize;
        for j in degree..BITS as usize {
            let mut value = v[j - degree];
            for k in 1..=degree {
                if (poly >> (degree - k)) & 1 == 1 {
                    value ^= v[j - k] << k;
                }
            }
            v[j] = value;
        }
    }
    for (j, value) in v.iter_mut().enumerate() {
        *value <<= BITS as usize - 1 - j;
    }
    v
}
