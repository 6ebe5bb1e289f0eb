//! The dual system: vertices at midpoints of consecutive open cells, paths
//! running backward in time, and the exact one-step dual kernel.
//!
//! Positions are stored doubled (`x2 = 2x`) so half-integers stay exact.
//! Backward paths reverse the sense of left and right: at a dual branching
//! `Γ̂^l` takes the dual neighbour to the right of the branching cell and
//! `Γ̂^r` the one to its left.

use serde::{Deserialize, Serialize};

use crate::environment::{Cell, Environment};
use crate::error::{DnbError, Result};
use crate::lattice_paths::{step, targets, Kind, Passage, Selector};
use crate::pmf::Pmf;
use crate::reference::TAIL_MASS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DualVertex {
    pub x2: i64,
    pub t: i64,
}

impl DualVertex {
    pub const fn new(x2: i64, t: i64) -> Self {
        Self { x2, t }
    }

    pub fn x(&self) -> f64 {
        self.x2 as f64 / 2.0
    }

    pub fn is_integer(&self) -> bool {
        self.x2 % 2 == 0
    }
}

/// Doubled positions at times `start.t, start.t - 1, ...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualPath {
    pub start: DualVertex,
    pub positions: Vec<i64>,
}

impl DualPath {
    pub fn steps(&self) -> usize {
        self.positions.len().saturating_sub(1)
    }

    pub fn vertex(&self, k: usize) -> DualVertex {
        DualVertex::new(self.positions[k], self.start.t - k as i64)
    }
}

/// Rectangle of the lattice: columns `x_lo..=x_hi`, rows `t_lo..=t_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub x_lo: i64,
    pub x_hi: i64,
    pub t_lo: i64,
    pub t_hi: i64,
}

impl Window {
    pub fn new(x_lo: i64, x_hi: i64, t_lo: i64, t_hi: i64) -> Result<Self> {
        if x_lo >= x_hi || t_lo >= t_hi {
            return Err(DnbError::InvalidParams(format!(
                "empty window [{x_lo}, {x_hi}] x [{t_lo}, {t_hi}]"
            )));
        }
        Ok(Self { x_lo, x_hi, t_lo, t_hi })
    }

    /// `size x size` window with its lower-left corner at the origin.
    pub fn square(size: i64) -> Result<Self> {
        Self::new(0, size - 1, 0, size - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DualityReport {
    /// l-edges crossed by l̂-edges plus r-edges crossed by r̂-edges.
    pub crossings: u64,
    pub dnb_branches: u64,
    pub dual_branches: u64,
}

fn open_at_or_left(env: &Environment, x: i64, t: i64) -> Result<i64> {
    let z = Cell::new(x, t);
    if env.is_open(z) {
        Ok(x)
    } else {
        Ok(x - env.k_left(z)?)
    }
}

fn next_open_right(env: &Environment, x: i64, t: i64) -> Result<i64> {
    Ok(x + env.k_right(Cell::new(x, t))?)
}

/// The consecutive open cells `(a, b)` in row `z.t` with `a + b = z.x2`.
pub fn flanking_opens(env: &Environment, z: DualVertex) -> Result<(i64, i64)> {
    let floor = z.x2.div_euclid(2);
    let a = open_at_or_left(env, floor, z.t)?;
    let b = next_open_right(env, floor, z.t)?;
    if a + b == z.x2 {
        Ok((a, b))
    } else {
        Err(DnbError::NotDualVertex { x2: z.x2, t: z.t })
    }
}

pub fn is_dual_vertex(env: &Environment, z: DualVertex) -> Result<bool> {
    match flanking_opens(env, z) {
        Ok(_) => Ok(true),
        Err(DnbError::NotDualVertex { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Dual vertex `r̂(z)` to the right of an open cell.
pub fn r_hat(env: &Environment, z: Cell) -> Result<DualVertex> {
    Ok(DualVertex::new(2 * z.x + env.k_right(z)?, z.t))
}

/// Dual vertex `l̂(z)` to the left of an open cell.
pub fn l_hat(env: &Environment, z: Cell) -> Result<DualVertex> {
    Ok(DualVertex::new(2 * z.x - env.k_left(z)?, z.t))
}

/// Dual vertices of row `t` whose position lies in `[x_lo, x_hi]`, sorted.
pub fn dual_vertices_in_row(env: &Environment, t: i64, x_lo: i64, x_hi: i64) -> Result<Vec<DualVertex>> {
    if x_lo >= x_hi {
        return Err(DnbError::InvalidParams(format!(
            "need x_lo < x_hi, got {x_lo} and {x_hi}"
        )));
    }
    let mut out = Vec::new();
    let mut a = open_at_or_left(env, x_lo, t)?;
    loop {
        let b = next_open_right(env, a, t)?;
        let mid2 = a + b;
        if mid2 > 2 * x_hi {
            break;
        }
        if mid2 >= 2 * x_lo {
            out.push(DualVertex::new(mid2, t));
        }
        a = b;
    }
    Ok(out)
}

/// `a^l(ẑ)`: rightmost open cell in the row below whose l-step lands
/// strictly left of `ẑ`.
pub fn a_left(env: &Environment, z: DualVertex) -> Result<i64> {
    let row = z.t - 1;
    let limit = 2 * env.r_max();
    let mut k = open_at_or_left(env, z.x2.div_euclid(2), row)?;
    let start = k;
    loop {
        if 2 * step(env, Cell::new(k, row), Kind::Left)? < z.x2 {
            return Ok(k);
        }
        k -= env.k_left(Cell::new(k, row))?;
        if start - k > limit {
            return Err(DnbError::RadiusExceeded {
                x: z.x2.div_euclid(2),
                row,
                radius: limit,
            });
        }
    }
}

/// `a^r(ẑ)`: leftmost open cell in the row below whose r-step lands
/// strictly right of `ẑ`.
pub fn a_right(env: &Environment, z: DualVertex) -> Result<i64> {
    let row = z.t - 1;
    let limit = 2 * env.r_max();
    let ceil = z.x2.div_euclid(2) + z.x2.rem_euclid(2);
    let mut k = if env.is_open(Cell::new(ceil, row)) {
        ceil
    } else {
        next_open_right(env, ceil, row)?
    };
    let start = k;
    loop {
        if 2 * step(env, Cell::new(k, row), Kind::Right)? > z.x2 {
            return Ok(k);
        }
        k = next_open_right(env, k, row)?;
        if k - start > limit {
            return Err(DnbError::RadiusExceeded {
                x: ceil,
                row,
                radius: limit,
            });
        }
    }
}

/// Doubled positions of `(Γ̂^l(ẑ), Γ̂^r(ẑ))` in row `ẑ.t - 1`, without
/// checking that `ẑ` is a dual vertex.
#[inline]
pub fn dual_targets(env: &Environment, z: DualVertex) -> Result<(i64, i64)> {
    let al = a_left(env, z)?;
    let ar = a_right(env, z)?;
    if al != ar {
        return Ok((al + ar, al + ar));
    }
    let below = Cell::new(al, z.t - 1);
    Ok((2 * al + env.k_right(below)?, 2 * al - env.k_left(below)?))
}

/// `Γ̂^l(ẑ)` or `Γ̂^r(ẑ)`.
pub fn dual_step(env: &Environment, z: DualVertex, which: Kind) -> Result<DualVertex> {
    flanking_opens(env, z)?;
    let (l, r) = dual_targets(env, z)?;
    let x2 = match which {
        Kind::Left => l,
        Kind::Right => r,
    };
    Ok(DualVertex::new(x2, z.t - 1))
}

#[inline]
fn dual_step_unchecked(env: &Environment, z: DualVertex, which: Kind) -> Result<i64> {
    let (l, r) = dual_targets(env, z)?;
    Ok(match which {
        Kind::Left => l,
        Kind::Right => r,
    })
}

pub fn dual_walk(env: &Environment, z: DualVertex, selector: &Selector, steps: usize) -> Result<DualPath> {
    if steps == 0 {
        return Err(DnbError::InvalidParams("a walk needs at least one step".into()));
    }
    flanking_opens(env, z)?;
    let mut positions = Vec::with_capacity(steps + 1);
    positions.push(z.x2);
    let mut cur = z;
    for k in 0..steps {
        let kind = selector.kind_at(k)?;
        cur = DualVertex::new(dual_step_unchecked(env, cur, kind)?, cur.t - 1);
        positions.push(cur.x2);
    }
    Ok(DualPath { start: z, positions })
}

fn require_same_row(u: DualVertex, v: DualVertex) -> Result<()> {
    if u.t == v.t {
        Ok(())
    } else {
        Err(DnbError::InvalidParams(format!(
            "dual start vertices must share a row, got t={} and t={}",
            u.t, v.t
        )))
    }
}

/// First backward step at which two same-kind dual paths coincide.
pub fn dual_coalescence_time(
    env: &Environment,
    u: DualVertex,
    v: DualVertex,
    kind: Kind,
    t_max: u64,
) -> Result<Passage> {
    require_same_row(u, v)?;
    flanking_opens(env, u)?;
    flanking_opens(env, v)?;
    let (mut a, mut b) = (u.x2, v.x2);
    let mut t = u.t;
    for k in 0..=t_max {
        if a == b {
            return Ok(Passage::Hit(k));
        }
        if k == t_max {
            break;
        }
        a = dual_step_unchecked(env, DualVertex::new(a, t), kind)?;
        b = dual_step_unchecked(env, DualVertex::new(b, t), kind)?;
        t -= 1;
    }
    Ok(Passage::Censored)
}

/// First backward step at which two same-kind dual paths both sit at integer
/// positions.
pub fn integer_return_time(env: &Environment, u: DualVertex, v: DualVertex, kind: Kind, t_max: u64) -> Result<Passage> {
    require_same_row(u, v)?;
    flanking_opens(env, u)?;
    flanking_opens(env, v)?;
    let (mut a, mut b) = (u.x2, v.x2);
    let mut t = u.t;
    for k in 0..=t_max {
        if a % 2 == 0 && b % 2 == 0 {
            return Ok(Passage::Hit(k));
        }
        if k == t_max {
            break;
        }
        a = dual_step_unchecked(env, DualVertex::new(a, t), kind)?;
        b = dual_step_unchecked(env, DualVertex::new(b, t), kind)?;
        t -= 1;
    }
    Ok(Passage::Censored)
}

/// `P(G₁ − G₂ = m)` for iid Geometric(p) on `{1, 2, ...}`.
fn geometric_difference(p: f64, m: i64) -> f64 {
    p * (1.0 - p).powi(m.unsigned_abs() as i32) / (2.0 - p)
}

/// `P(G = m)` for Geometric(p) on `{1, 2, ...}`.
fn geometric(p: f64, m: i64) -> f64 {
    if m < 1 {
        0.0
    } else {
        p * (1.0 - p).powi(m as i32 - 1)
    }
}

/// Law of one dual step, as a pmf over doubled increments `2v`.
///
/// Away from integer positions the increment is half the difference of two
/// independent geometric gaps. At an integer position the cell below is open
/// with probability `p`; it then branches with probability `ε` (the l-kind
/// dual jumps right by a geometric gap, the r-kind left) or sends both edges
/// to one side.
pub fn dual_kernel(p: f64, epsilon: f64, at_integer: bool, kind: Kind) -> Pmf {
    assert!(p > 0.0 && p < 1.0, "p must lie in (0, 1), got {p}");
    let q = 1.0 - p;
    // both geometric tails beyond K are bounded by q^K / p up to constants
    let mut k = 1i64;
    while 2.0 * q.powi(k as i32) / p >= TAIL_MASS {
        k += 1;
    }
    let tail = 2.0 * q.powi(k as i32) / p;
    let branch_sign = match kind {
        Kind::Left => 1,
        Kind::Right => -1,
    };
    Pmf::from_fn(-k, k, tail.min(1.0), |m| {
        if !at_integer {
            return geometric_difference(p, m);
        }
        q * geometric_difference(p, m)
            + p * epsilon * geometric(p, branch_sign * m)
            + 0.5 * p * (1.0 - epsilon) * geometric(p, m.abs())
    })
}

/// Signs of `2·forward − dual` at both ends of a slab decide a crossing;
/// dual positions are never at open cells so neither sign is zero.
#[inline]
fn crosses(from_x: i64, to_x: i64, dual_top2: i64, dual_bottom2: i64) -> bool {
    (2 * from_x - dual_bottom2).signum() != (2 * to_x - dual_top2).signum()
}

/// Checks the forward/dual pair on every time slab of `window`.
///
/// All forward edges out of open cells with `x` in the window and all dual
/// edges out of dual vertices positioned in the window are compared slab by
/// slab. Branch counts cover the interior `margin` columns in from each side
/// and match forward branchings at `(u, s)` with dual branchings at
/// `(u, s + 1)`.
pub fn verify_duality(env: &Environment, window: Window, margin: i64) -> Result<DualityReport> {
    let mut report = DualityReport::default();
    let (in_lo, in_hi) = (window.x_lo + margin, window.x_hi - margin);
    for t in window.t_lo..window.t_hi {
        let mut fwd = Vec::new();
        for x in window.x_lo..=window.x_hi {
            let z = Cell::new(x, t);
            if env.is_open(z) {
                let (l, r) = targets(env, z)?;
                if l != r && (in_lo..=in_hi).contains(&x) {
                    report.dnb_branches += 1;
                }
                fwd.push((x, l, r));
            }
        }
        let mut dual = Vec::new();
        for zh in dual_vertices_in_row(env, t + 1, window.x_lo, window.x_hi)? {
            let al = a_left(env, zh)?;
            let ar = a_right(env, zh)?;
            let (l, r) = dual_targets(env, zh)?;
            if al == ar && zh.x2 >= 2 * in_lo && zh.x2 <= 2 * in_hi {
                report.dual_branches += 1;
            }
            dual.push((zh.x2, l, r));
        }
        for &(x, l, r) in &fwd {
            for &(top2, dl, dr) in &dual {
                if crosses(x, l, top2, dl) {
                    report.crossings += 1;
                }
                if crosses(x, r, top2, dr) {
                    report.crossings += 1;
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvParams;

    fn env(p: f64, eps: f64, seed: u64) -> Environment {
        Environment::new(EnvParams::new(p, eps, seed).unwrap())
    }

    fn find_env(p: f64, eps: f64, pred: impl Fn(&Environment) -> bool) -> Environment {
        (0..1_000_000)
            .map(|s| env(p, eps, s))
            .find(|e| pred(e))
            .expect("configuration not found")
    }

    fn row_is(e: &Environment, t: i64, lo: i64, pattern: &str) -> bool {
        pattern
            .chars()
            .enumerate()
            .all(|(i, c)| e.is_open(Cell::new(lo + i as i64, t)) == (c == '1'))
    }

    #[test]
    fn midpoint_of_a_gap_of_three() {
        let e = find_env(0.5, 0.0, |e| row_is(e, 0, -1, "11001"));
        let v = dual_vertices_in_row(&e, 0, 0, 3).unwrap();
        assert_eq!(v, vec![DualVertex::new(3, 0)]);
        assert_eq!(flanking_opens(&e, DualVertex::new(3, 0)).unwrap(), (0, 3));
        assert!(!is_dual_vertex(&e, DualVertex::new(2, 0)).unwrap());
    }

    #[test]
    fn dense_row_has_every_half_integer() {
        let e = find_env(0.5, 0.0, |e| row_is(e, 4, 0, "1111111"));
        let v = dual_vertices_in_row(&e, 4, 1, 5).unwrap();
        let x2: Vec<i64> = v.iter().map(|d| d.x2).collect();
        assert_eq!(x2, vec![3, 5, 7, 9]);
    }

    #[test]
    fn worked_branch_example() {
        // row 2: opens at 0, 2, 3 with 1 closed; row 3: opens at 1 and 3
        // with 2 closed; the cell (2, 2) branches into (1, 3) and (3, 3).
        let e = find_env(0.5, 0.5, |e| {
            row_is(e, 3, 0, "0101")
                && row_is(e, 2, 0, "1011")
                && e.theta(Cell::new(2, 2)) == crate::environment::Theta::Branch
        });
        let z = DualVertex::new(4, 3);
        assert_eq!(flanking_opens(&e, z).unwrap(), (1, 3));
        assert_eq!(a_left(&e, z).unwrap(), 2);
        assert_eq!(a_right(&e, z).unwrap(), 2);
        assert_eq!(dual_step(&e, z, Kind::Left).unwrap(), DualVertex::new(5, 2));
        assert_eq!(dual_step(&e, z, Kind::Right).unwrap(), DualVertex::new(2, 2));
    }

    #[test]
    fn no_branch_means_single_edge() {
        let e = env(0.5, 0.0, 42);
        for zh in dual_vertices_in_row(&e, 10, -50, 50).unwrap() {
            assert_eq!(
                dual_step(&e, zh, Kind::Left).unwrap(),
                dual_step(&e, zh, Kind::Right).unwrap()
            );
        }
    }

    #[test]
    fn dual_step_lands_on_dual_vertices() {
        let e = env(0.4, 0.5, 7);
        for zh in dual_vertices_in_row(&e, 3, -40, 40).unwrap() {
            for kind in [Kind::Left, Kind::Right] {
                let next = dual_step(&e, zh, kind).unwrap();
                assert!(is_dual_vertex(&e, next).unwrap());
            }
        }
    }

    #[test]
    fn non_vertex_rejected() {
        let e = find_env(0.5, 0.0, |e| e.is_open(Cell::new(0, 0)));
        assert_eq!(
            dual_step(&e, DualVertex::new(0, 0), Kind::Left),
            Err(DnbError::NotDualVertex { x2: 0, t: 0 })
        );
    }

    #[test]
    fn dual_kernel_normalised_and_means() {
        for (p, eps) in [(0.5, 0.1), (0.2, 1.0), (0.8, 0.0)] {
            for at_integer in [false, true] {
                for kind in [Kind::Left, Kind::Right] {
                    let k = dual_kernel(p, eps, at_integer, kind);
                    assert!((k.total() - 1.0).abs() < 1e-12);
                    let target = if at_integer { kind.sign() * -eps } else { 0.0 };
                    // pmf is over doubled increments: mean ε/2 in x is ε in x2
                    assert!(
                        (k.mean() - target).abs() < 1e-9,
                        "p={p} eps={eps} {at_integer} {kind:?}"
                    );
                }
            }
        }
        assert!((dual_kernel(0.5, 0.3, false, Kind::Left).get(0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn coalescence_of_identical_starts() {
        let e = env(0.5, 0.1, 3);
        let zh = dual_vertices_in_row(&e, 0, 0, 10).unwrap()[0];
        assert_eq!(
            dual_coalescence_time(&e, zh, zh, Kind::Left, 5).unwrap(),
            Passage::Hit(0)
        );
    }

    #[test]
    fn small_window_duality() {
        for seed in 0..3 {
            let e = env(0.5, 0.2, seed);
            let rep = verify_duality(&e, Window::square(60).unwrap(), 5).unwrap();
            assert_eq!(rep.crossings, 0);
            assert_eq!(rep.dnb_branches, rep.dual_branches);
        }
        let e = env(0.5, 0.0, 9);
        let rep = verify_duality(&e, Window::square(40).unwrap(), 2).unwrap();
        assert_eq!(rep.dual_branches, 0);
    }
}
