//! Forward DNB paths: the maps `Γ^l`, `Γ^r`, selector-driven walks, and
//! coalescence / crossing times.

use serde::{Deserialize, Serialize};

use crate::environment::{Cell, Environment, Nearest, Side, Theta};
use crate::error::{DnbError, Result};

/// Which branch a path follows at a branching vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Left,
    Right,
}

impl Kind {
    pub fn sign(self) -> f64 {
        match self {
            Kind::Left => -1.0,
            Kind::Right => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Left => "l",
            Kind::Right => "r",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selector {
    AlwaysLeft,
    AlwaysRight,
    /// One symbol per step; running out is an error.
    Sequence(Vec<Kind>),
}

impl Selector {
    pub fn kind_at(&self, step: usize) -> Result<Kind> {
        match self {
            Selector::AlwaysLeft => Ok(Kind::Left),
            Selector::AlwaysRight => Ok(Kind::Right),
            Selector::Sequence(seq) => seq.get(step).copied().ok_or(DnbError::SelectorExhausted(seq.len())),
        }
    }
}

/// Integer positions of a path at times `start.t, start.t + 1, ...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePath {
    pub start: Cell,
    pub positions: Vec<i64>,
}

impl LatticePath {
    pub fn steps(&self) -> usize {
        self.positions.len().saturating_sub(1)
    }

    pub fn cell(&self, k: usize) -> Cell {
        Cell::new(self.positions[k], self.start.t + k as i64)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.positions.len()).map(|k| self.cell(k))
    }

    pub fn increments(&self) -> impl Iterator<Item = i64> + '_ {
        self.positions.windows(2).map(|w| w[1] - w[0])
    }
}

/// First time a stopping condition held, or `Censored` if it did not by `t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Passage {
    Hit(u64),
    Censored,
}

impl Passage {
    pub fn time(self) -> Option<u64> {
        match self {
            Passage::Hit(t) => Some(t),
            Passage::Censored => None,
        }
    }

    /// Whether the event has not happened by time `t` (censored samples
    /// count as surviving every `t` up to the horizon they were run to).
    pub fn survives(self, t: u64) -> bool {
        match self {
            Passage::Hit(s) => s > t,
            Passage::Censored => true,
        }
    }
}

/// Both one-step targets `(Γ^l(z), Γ^r(z))` of an open cell, as x-coordinates
/// in row `z.t + 1`. They differ only at a branching.
#[inline]
pub fn targets(env: &Environment, z: Cell) -> Result<(i64, i64)> {
    match env.nearest_open(z.above(), Side::Either)? {
        Nearest::Unique(y) => Ok((y, y)),
        Nearest::Tie { left, right } => Ok(match env.theta(z) {
            Theta::Left => (left, left),
            Theta::Branch => (left, right),
            Theta::Right => (right, right),
        }),
    }
}

/// One step of a `kind` path from `z`, assumed open.
#[inline]
pub fn step(env: &Environment, z: Cell, kind: Kind) -> Result<i64> {
    match env.nearest_open(z.above(), Side::Either)? {
        Nearest::Unique(y) => Ok(y),
        Nearest::Tie { left, right } => {
            let theta = env.theta(z);
            let go_left = match kind {
                Kind::Left => theta != Theta::Right,
                Kind::Right => theta == Theta::Left,
            };
            Ok(if go_left { left } else { right })
        }
    }
}

fn require_open(env: &Environment, z: Cell) -> Result<()> {
    if env.is_open(z) {
        Ok(())
    } else {
        Err(DnbError::NotOpen(z))
    }
}

fn require_same_row(u: Cell, v: Cell) -> Result<()> {
    if u.t == v.t {
        Ok(())
    } else {
        Err(DnbError::InvalidParams(format!(
            "start cells must share a row, got t={} and t={}",
            u.t, v.t
        )))
    }
}

/// `Γ^l(z)` or `Γ^r(z)`.
pub fn gamma(env: &Environment, z: Cell, which: Kind) -> Result<Cell> {
    require_open(env, z)?;
    Ok(Cell::new(step(env, z, which)?, z.t + 1))
}

pub fn walk(env: &Environment, z: Cell, selector: &Selector, steps: usize) -> Result<LatticePath> {
    if steps == 0 {
        return Err(DnbError::InvalidParams("a walk needs at least one step".into()));
    }
    require_open(env, z)?;
    let mut positions = Vec::with_capacity(steps + 1);
    positions.push(z.x);
    let mut cur = z;
    for k in 0..steps {
        let kind = selector.kind_at(k)?;
        cur = Cell::new(step(env, cur, kind)?, cur.t + 1);
        positions.push(cur.x);
    }
    Ok(LatticePath { start: z, positions })
}

/// First time two same-kind paths from `u` and `v` occupy the same site.
pub fn coalescence_time(env: &Environment, u: Cell, v: Cell, kind: Kind, t_max: u64) -> Result<Passage> {
    require_same_row(u, v)?;
    require_open(env, u)?;
    require_open(env, v)?;
    let (mut a, mut b) = (u.x, v.x);
    for (k, t) in (0..=t_max).zip(u.t..) {
        if a == b {
            // same map from the same cell: they stay together
            debug_assert_eq!(step(env, Cell::new(a, t), kind)?, step(env, Cell::new(b, t), kind)?);
            return Ok(Passage::Hit(k));
        }
        if k == t_max {
            break;
        }
        a = step(env, Cell::new(a, t), kind)?;
        b = step(env, Cell::new(b, t), kind)?;
    }
    Ok(Passage::Censored)
}

/// First time the r-path from `v` reaches or passes the l-path from `u`.
pub fn crossing_time(env: &Environment, u: Cell, v: Cell, t_max: u64) -> Result<Passage> {
    require_same_row(u, v)?;
    require_open(env, u)?;
    require_open(env, v)?;
    let (mut l, mut r) = (u.x, v.x);
    for (k, t) in (0..=t_max).zip(u.t..) {
        if r >= l {
            return Ok(Passage::Hit(k));
        }
        if k == t_max {
            break;
        }
        l = step(env, Cell::new(l, t), Kind::Left)?;
        r = step(env, Cell::new(r, t), Kind::Right)?;
    }
    Ok(Passage::Censored)
}

/// Number of cells a path stepped out of where `Γ^l ≠ Γ^r`. The final cell
/// is not counted: its branching is decided by the row the path never saw.
pub fn count_branch_events(env: &Environment, path: &LatticePath) -> Result<u64> {
    let mut count = 0;
    for k in 0..path.steps() {
        let (l, r) = targets(env, path.cell(k))?;
        if l != r {
            count += 1;
        }
    }
    Ok(count)
}
