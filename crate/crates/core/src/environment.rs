//! The random environment `(ω, θ)` over ℤ².
//!
//! Every cell carries an open/closed flag (`ω`, Bernoulli(p)) and a tie-break
//! mark (`θ ∈ {-1, 0, +1}` with `P(θ = 0) = ε`). Nothing is stored: both are
//! pure functions of `(seed, x, t)` computed with a counter-based hash, so the
//! whole lattice is addressable and any number of workers see the same
//! environment.
//!
//! Each row `t` gets its own SplitMix64 stream: the row key is a hash of
//! `(seed, stream, t)` and cell `x` reads the `x`-th output of that stream.
//! Within a row the mapping is a bijection, so two cells of the same row never
//! share a variate.

use serde::{Deserialize, Serialize};

use crate::error::{DnbError, Result};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const ROW_MUL: u64 = 0xd1b5_4a32_d192_ed03;
const STREAM_OPEN: u64 = 0x6f70_656e_5f73_7472;
const STREAM_THETA: u64 = 0x7468_6574_615f_7374;

/// Largest coordinate magnitude the simulator is designed for.
pub const MAX_COORD: i64 = 1 << 40;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replica `index` of an experiment seeded with `seed`.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ 0x5265_706c_6963_6121).wrapping_add(index.wrapping_mul(GOLDEN)))
}

/// Uniform in [0, 1) with 53 bits of resolution.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn threshold_53(prob: f64) -> u64 {
    (prob * (1u64 << 53) as f64).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i64,
    pub t: i64,
}

impl Cell {
    pub const fn new(x: i64, t: i64) -> Self {
        Self { x, t }
    }

    /// The cell directly above, in row `t + 1`.
    pub const fn above(self) -> Self {
        Self {
            x: self.x,
            t: self.t + 1,
        }
    }

    pub const fn shifted(self, dx: i64) -> Self {
        Self {
            x: self.x + dx,
            t: self.t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    p: f64,
    epsilon: f64,
    seed: u64,
}

impl EnvParams {
    pub fn new(p: f64, epsilon: f64, seed: u64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(DnbError::InvalidParams(format!("p must lie in (0, 1), got {p}")));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(DnbError::InvalidParams(format!(
                "epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        Ok(Self { p, epsilon, seed })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Default search radius, `ceil(60 / p)`.
    pub fn default_r_max(&self) -> i64 {
        (60.0 / self.p).ceil() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theta {
    Left,
    Branch,
    Right,
}

impl Theta {
    pub fn value(self) -> i8 {
        match self {
            Theta::Left => -1,
            Theta::Branch => 0,
            Theta::Right => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellState {
    pub open: bool,
    pub theta: Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// Strictly left of the query column.
    Left,
    /// Strictly right of the query column.
    Right,
    /// Either side, the query column included.
    Either,
}

/// Result of a nearest-open query in one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nearest {
    Unique(i64),
    /// Two open cells at equal distance on opposite sides.
    Tie {
        left: i64,
        right: i64,
    },
}

/// Nearest open site to `x` in a row described by `is_open`.
///
/// This is the single implementation of the nearest-open rule; the simulator
/// feeds it the hashed environment and the exact enumerators feed it
/// synthetic rows. Returns `None` when nothing is open within `r_max`.
#[inline]
pub fn scan_nearest(x: i64, side: Side, r_max: i64, mut is_open: impl FnMut(i64) -> bool) -> Option<Nearest> {
    match side {
        Side::Left => (1..=r_max).map(|d| x - d).find(|&y| is_open(y)).map(Nearest::Unique),
        Side::Right => (1..=r_max).map(|d| x + d).find(|&y| is_open(y)).map(Nearest::Unique),
        Side::Either => {
            if is_open(x) {
                return Some(Nearest::Unique(x));
            }
            for d in 1..=r_max {
                let left = is_open(x - d);
                let right = is_open(x + d);
                match (left, right) {
                    (true, true) => {
                        return Some(Nearest::Tie {
                            left: x - d,
                            right: x + d,
                        })
                    }
                    (true, false) => return Some(Nearest::Unique(x - d)),
                    (false, true) => return Some(Nearest::Unique(x + d)),
                    (false, false) => {}
                }
            }
            None
        }
    }
}

/// A seeded, lazily evaluated environment.
#[derive(Debug, Clone, Copy)]
pub struct Environment {
    params: EnvParams,
    open_key: u64,
    theta_key: u64,
    open_threshold: u64,
    branch_threshold: u64,
    r_max: i64,
}

impl Environment {
    pub fn new(params: EnvParams) -> Self {
        let base = mix64(params.seed ^ 0x4472_6169_6e65_7421);
        Self {
            params,
            open_key: mix64(base ^ STREAM_OPEN),
            theta_key: mix64(base ^ STREAM_THETA),
            open_threshold: threshold_53(params.p),
            branch_threshold: threshold_53(params.epsilon),
            r_max: params.default_r_max(),
        }
    }

    pub fn with_r_max(mut self, r_max: i64) -> Self {
        self.r_max = r_max.max(1);
        self
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn r_max(&self) -> i64 {
        self.r_max
    }

    #[inline]
    fn row_key(key: u64, t: i64) -> u64 {
        mix64(key ^ (t as u64).wrapping_mul(ROW_MUL))
    }

    #[inline]
    fn bits_in_row(row: u64, x: i64) -> u64 {
        mix64(row.wrapping_add((x as u64).wrapping_mul(GOLDEN)))
    }

    #[inline]
    fn cell_bits(key: u64, x: i64, t: i64) -> u64 {
        Self::bits_in_row(Self::row_key(key, t), x)
    }

    #[inline]
    fn open_in_row(&self, row: u64, x: i64) -> bool {
        (Self::bits_in_row(row, x) >> 11) < self.open_threshold
    }

    #[inline]
    pub fn is_open(&self, z: Cell) -> bool {
        (Self::cell_bits(self.open_key, z.x, z.t) >> 11) < self.open_threshold
    }

    #[inline]
    pub fn theta(&self, z: Cell) -> Theta {
        let bits = Self::cell_bits(self.theta_key, z.x, z.t);
        if (bits >> 11) < self.branch_threshold {
            Theta::Branch
        } else if bits & 1 == 0 {
            Theta::Left
        } else {
            Theta::Right
        }
    }

    pub fn cell_state(&self, z: Cell) -> CellState {
        CellState {
            open: self.is_open(z),
            theta: self.theta(z),
        }
    }

    /// Nearest open cell in the row of `z`.
    ///
    /// `Left`/`Right` give `l(z)`/`r(z)` (the column of `z` excluded), `Either`
    /// includes `z` itself and reports ties. For the forward rule `h(z, ·)`
    /// query with `z.above()`.
    #[inline]
    pub fn nearest_open(&self, z: Cell, side: Side) -> Result<Nearest> {
        let row = Self::row_key(self.open_key, z.t);
        scan_nearest(z.x, side, self.r_max, |x| self.open_in_row(row, x)).ok_or(DnbError::RadiusExceeded {
            x: z.x,
            row: z.t,
            radius: self.r_max,
        })
    }

    /// `K^r(z)` for an arbitrary cell.
    pub fn k_right(&self, z: Cell) -> Result<i64> {
        match self.nearest_open(z, Side::Right)? {
            Nearest::Unique(y) => Ok(y - z.x),
            Nearest::Tie { .. } => unreachable!("one-sided scans never tie"),
        }
    }

    /// `K^l(z)` for an arbitrary cell.
    pub fn k_left(&self, z: Cell) -> Result<i64> {
        match self.nearest_open(z, Side::Left)? {
            Nearest::Unique(y) => Ok(z.x - y),
            Nearest::Tie { .. } => unreachable!("one-sided scans never tie"),
        }
    }
}
