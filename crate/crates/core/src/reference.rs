//! Closed-form targets and the continuum left-right reference simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::environment::{scan_nearest, Nearest, Side};
use crate::error::{DnbError, Result};
use crate::lattice_paths::Kind;
use crate::pmf::Pmf;

/// Tail mass left out of every truncated series.
pub const TAIL_MASS: f64 = 1e-12;

fn check_p(p: f64) {
    assert!(p > 0.0 && p < 1.0, "p must lie in (0, 1), got {p}");
}

/// Smallest `K` such that, for terms `c(k)` decaying like `r^k` with
/// `r = (1-p)^2`, both `2 Σ_{k>K} c(k)` and `2 Σ_{k>K} k² c(k)` stay below
/// [`TAIL_MASS`]. Returns `K` and the certified dropped mass.
fn truncation(p: f64, leading: impl Fn(i64) -> f64) -> (i64, f64) {
    let r = (1.0 - p) * (1.0 - p);
    let mut k = 1;
    loop {
        let next = (k + 1) as f64;
        let rho = r * ((next + 1.0) / next).powi(2);
        let mass = 2.0 * leading(k + 1) / (1.0 - r);
        if rho < 1.0 && 2.0 * next * next * leading(k + 1) / (1.0 - rho) < TAIL_MASS {
            return (k, mass);
        }
        k += 1;
    }
}

/// One-step displacement law of a path without branching (`ε = 0`).
pub fn kernel_pv(p: f64) -> Pmf {
    check_p(p);
    let q = 1.0 - p;
    let f = move |y: i64| {
        if y == 0 {
            p
        } else {
            let k = y.unsigned_abs() as i32;
            p * q.powi(2 * k) + 0.5 * p * p * q.powi(2 * k - 1)
        }
    };
    let (k, tail) = truncation(p, f);
    Pmf::from_fn(-k, k, tail, f)
}

/// One-step displacement law of an l-path (`Kind::Left`) or r-path.
///
/// A tie at distance `k` happens with probability `(1-p) p² (1-p)^{2k-2}`;
/// the l-path then goes left with probability `(1+ε)/2`.
pub fn path_kernel(p: f64, epsilon: f64, kind: Kind) -> Pmf {
    check_p(p);
    let q = 1.0 - p;
    let (toward, away) = ((1.0 + epsilon) / 2.0, (1.0 - epsilon) / 2.0);
    let f = move |y: i64| {
        if y == 0 {
            return p;
        }
        let k = y.unsigned_abs() as i32;
        let unique = p * q.powi(2 * k);
        let tie = q * p * p * q.powi(2 * k - 2);
        let favoured = match kind {
            Kind::Left => y < 0,
            Kind::Right => y > 0,
        };
        unique + tie * if favoured { toward } else { away }
    };
    let (k, tail) = truncation(p, |y| f(y).max(f(-y)));
    Pmf::from_fn(-k, k, tail, f)
}

/// Law of the extra left jump an l-path makes at a branching tie: twice the
/// tie distance with probability `ε/2` per tie, zero otherwise.
pub fn branch_correction_law(p: f64, epsilon: f64) -> Pmf {
    check_p(p);
    let q = 1.0 - p;
    let f = move |k: i64| 0.5 * epsilon * q * p * p * q.powi(2 * (k as i32 - 1));
    let (kmax, tail) = truncation(p, |k| f(k) / 2.0);
    let mut probs = vec![0.0; (2 * kmax + 1) as usize];
    let mut moved = 0.0;
    for k in 1..=kmax {
        let mass = f(k);
        probs[(2 * kmax - 2 * k) as usize] = mass;
        moved += mass;
    }
    probs[(2 * kmax) as usize] = 1.0 - moved - tail;
    Pmf::new(-2 * kmax, probs, tail)
}

/// `λ_p² = Σ y² P_v(0, y)`.
pub fn lambda_p2(p: f64) -> f64 {
    let pmf = kernel_pv(p);
    pmf.second_moment()
}

/// Exact one-step displacement law obtained by enumerating every row
/// configuration within `radius` that the nearest-open rule can observe.
///
/// The rule itself is [`scan_nearest`]; each time it reads a cell whose state
/// is not yet fixed, the enumeration splits on open/closed. Configurations
/// with no open cell within `radius` are returned as residual mass.
pub fn enumerate_step_law(p: f64, epsilon: f64, kind: Kind, radius: i64) -> Pmf {
    check_p(p);
    let width = (2 * radius + 1) as usize;
    let (toward, away) = ((1.0 + epsilon) / 2.0, (1.0 - epsilon) / 2.0);
    let (w_left, w_right) = match kind {
        Kind::Left => (toward, away),
        Kind::Right => (away, toward),
    };
    let mut e = Enumerator {
        p,
        radius,
        w_left,
        w_right,
        cfg: vec![None; width],
        mass: vec![0.0; width],
        residual: 0.0,
    };
    e.explore(1.0);
    Pmf::new(-radius, e.mass, e.residual)
}

struct Enumerator {
    p: f64,
    radius: i64,
    w_left: f64,
    w_right: f64,
    cfg: Vec<Option<bool>>,
    mass: Vec<f64>,
    residual: f64,
}

impl Enumerator {
    fn idx(&self, x: i64) -> usize {
        (x + self.radius) as usize
    }

    fn explore(&mut self, weight: f64) {
        let mut unknown = None;
        let outcome = scan_nearest(0, Side::Either, self.radius, |x| {
            match self.cfg[(x + self.radius) as usize] {
                Some(open) => open,
                None => {
                    unknown.get_or_insert(x);
                    false
                }
            }
        });
        if let Some(x) = unknown {
            let i = self.idx(x);
            self.cfg[i] = Some(true);
            self.explore(weight * self.p);
            self.cfg[i] = Some(false);
            self.explore(weight * (1.0 - self.p));
            self.cfg[i] = None;
            return;
        }
        match outcome {
            None => self.residual += weight,
            Some(Nearest::Unique(y)) => {
                let i = self.idx(y);
                self.mass[i] += weight;
            }
            Some(Nearest::Tie { left, right }) => {
                let (il, ir) = (self.idx(left), self.idx(right));
                self.mass[il] += weight * self.w_left;
                self.mass[ir] += weight * self.w_right;
            }
        }
    }
}

/// Derived constants for `ε = b / n^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub p: f64,
    pub b: f64,
    pub n: u64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Limit drift `b(1-p)/(2-p)²` of r-paths (l-paths: the negative).
    pub b_p: f64,
    pub lambda_p2: f64,
    /// Probability that an open cell sees a tie above it.
    pub tie_prob: f64,
    pub branch_prob: f64,
}

impl TheoryConstants {
    pub fn new(p: f64, b: f64, n: u64, alpha: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(DnbError::InvalidParams(format!("p must lie in (0, 1), got {p}")));
        }
        if !(b >= 0.0) || n == 0 || !(alpha > 0.0) {
            return Err(DnbError::InvalidParams(format!(
                "need b >= 0, n >= 1, alpha > 0; got b={b}, n={n}, alpha={alpha}"
            )));
        }
        let epsilon = b / (n as f64).powf(alpha);
        if epsilon > 1.0 {
            return Err(DnbError::InvalidParams(format!(
                "epsilon = b/n^alpha = {epsilon} exceeds 1"
            )));
        }
        Ok(Self::with_epsilon(p, b, n, alpha, epsilon))
    }

    /// Constants for an explicitly given `ε`.
    pub fn with_epsilon(p: f64, b: f64, n: u64, alpha: f64, epsilon: f64) -> Self {
        let tie_prob = p * (1.0 - p) / (2.0 - p);
        Self {
            p,
            b,
            n,
            alpha,
            epsilon,
            b_p: b * (1.0 - p) / ((2.0 - p) * (2.0 - p)),
            lambda_p2: lambda_p2(p),
            tie_prob,
            branch_prob: tie_prob * epsilon,
        }
    }

    /// Mean one-step displacement of an r-path on the lattice.
    pub fn step_drift(&self) -> f64 {
        self.epsilon * (1.0 - self.p) / ((2.0 - self.p) * (2.0 - self.p))
    }
}

/// `2Φ(δ/√(2tλ²)) − 1`: probability that two coalescing Brownian motions with
/// diffusion `λ²` started `δ` apart have not met by time `t`.
pub fn survival_probability(delta: f64, t: f64, lambda2: f64) -> f64 {
    // 2Φ(x) − 1 = erf(x/√2)
    erf(delta / (2.0 * (t * lambda2).sqrt()))
}

/// State of the left-right pair after some number of Euler steps.
///
/// The clocks are step counts: `t_steps` counts steps taken apart, `s_steps`
/// steps taken together, and their sum is the number of steps so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LRPairState {
    pub l: f64,
    pub r: f64,
    pub t_steps: u64,
    pub s_steps: u64,
    pub met: bool,
}

impl LRPairState {
    pub fn t_clock(&self, dt: f64) -> f64 {
        self.t_steps as f64 * dt
    }

    pub fn s_clock(&self, dt: f64) -> f64 {
        self.s_steps as f64 * dt
    }

    pub fn elapsed(&self, dt: f64) -> f64 {
        (self.t_steps + self.s_steps) as f64 * dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LRParams {
    pub lambda: f64,
    pub b_p: f64,
    pub dt: f64,
    pub meet_threshold: f64,
}

impl LRParams {
    /// Uses the default meeting threshold `√dt · λ / 10`.
    pub fn new(lambda: f64, b_p: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(DnbError::InvalidStep(dt));
        }
        if !(lambda >= 0.0) {
            return Err(DnbError::InvalidParams(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            b_p,
            dt,
            meet_threshold: dt.sqrt() * lambda / 10.0,
        })
    }

    pub fn with_threshold(self, meet_threshold: f64) -> Self {
        Self { meet_threshold, ..self }
    }
}

/// Euler scheme for the sticky left-right pair.
///
/// Apart, the coordinates move independently with drifts `-b_p` and `+b_p`.
/// A step that would put `L` right of `R` is clamped to the midpoint, and the
/// clamped amount `Δ` is paid back as `Δ / (2 b_p)` of sticky time, during
/// which both share one Gaussian increment. This makes the gap a sticky
/// reflected Brownian motion whose mean grows exactly like `2 b_p t`. With
/// `b_p = 0` a pair that has met stays together.
#[derive(Debug, Clone)]
pub struct LRPair {
    params: LRParams,
    state: LRPairState,
    sticky: f64,
    rng: ChaCha8Rng,
}

impl LRPair {
    pub fn new(start_l: f64, start_r: f64, params: LRParams, seed: u64) -> Self {
        let mut state = LRPairState {
            l: start_l,
            r: start_r,
            t_steps: 0,
            s_steps: 0,
            met: false,
        };
        let mut sticky = 0.0;
        if start_r - start_l <= params.meet_threshold {
            state.met = true;
            if start_l >= start_r {
                let mid = 0.5 * (start_l + start_r);
                sticky = Self::sticky_time(start_l - start_r, params.b_p);
                state.l = mid;
                state.r = mid;
            }
        }
        Self {
            params,
            state,
            sticky,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn sticky_time(push: f64, b_p: f64) -> f64 {
        if b_p > 0.0 {
            push / (2.0 * b_p)
        } else {
            f64::INFINITY
        }
    }

    pub fn state(&self) -> LRPairState {
        self.state
    }

    pub fn step(&mut self) -> LRPairState {
        let LRParams {
            lambda,
            b_p,
            dt,
            meet_threshold,
        } = self.params;
        let sd = lambda * dt.sqrt();
        let drift = b_p * dt;
        let s = &mut self.state;
        if self.sticky > 0.0 {
            let z: f64 = self.rng.sample(StandardNormal);
            s.l += sd * z;
            s.r += sd * z;
            s.s_steps += 1;
            self.sticky = (self.sticky - dt).max(0.0);
            return *s;
        }
        let z1: f64 = self.rng.sample(StandardNormal);
        let z2: f64 = self.rng.sample(StandardNormal);
        s.l += sd * z1 - drift;
        s.r += sd * z2 + drift;
        s.t_steps += 1;
        let gap = s.r - s.l;
        if gap <= meet_threshold {
            s.met = true;
        }
        if gap < 0.0 {
            let mid = 0.5 * (s.l + s.r);
            s.l = mid;
            s.r = mid;
            self.sticky = Self::sticky_time(-gap, b_p);
        }
        *s
    }

    /// Runs until `horizon` and returns the final state.
    pub fn run_to(&mut self, horizon: f64) -> LRPairState {
        let steps = (horizon / self.params.dt).round() as u64;
        while self.state.t_steps + self.state.s_steps < steps {
            self.step();
        }
        self.state
    }
}

/// Trajectory of the pair on `[0, horizon]`, initial state included.
pub fn simulate_lr_pair(
    start_l: f64,
    start_r: f64,
    params: LRParams,
    horizon: f64,
    seed: u64,
) -> Result<Vec<LRPairState>> {
    if !(params.dt > 0.0) {
        return Err(DnbError::InvalidStep(params.dt));
    }
    if !(horizon > params.dt) {
        return Err(DnbError::InvalidParams(format!(
            "horizon {horizon} must exceed dt {}",
            params.dt
        )));
    }
    let steps = (horizon / params.dt).round() as usize;
    let mut pair = LRPair::new(start_l, start_r, params, seed);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(pair.state());
    for _ in 0..steps {
        out.push(pair.step());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_pv_values() {
        let k = kernel_pv(0.5);
        assert_eq!(k.get(0), 0.5);
        assert!((k.get(1) - 0.1875).abs() < 1e-15);
        assert!((k.get(-1) - 0.1875).abs() < 1e-15);
        assert!((k.total() - 1.0).abs() < 1e-12);
        assert!(k.residual() < TAIL_MASS);
    }

    #[test]
    fn kernel_pv_at_p_half_is_three_quarters_of_quarter_powers() {
        let k = kernel_pv(0.5);
        for y in 1..10 {
            assert!((k.get(y) - 0.75 * 0.25f64.powi(y as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn lambda_matches_closed_series() {
        for p in [0.1f64, 0.2, 0.5, 0.8, 0.95] {
            let q = 1.0 - p;
            let r = q * q;
            let closed = (2.0 * p + p * p / q) * r * (1.0 + r) / (1.0 - r).powi(3);
            assert!((lambda_p2(p) - closed).abs() < 1e-12, "p={p}");
        }
        assert!((lambda_p2(0.5) - 10.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn path_kernel_without_branching_is_pv() {
        for p in [0.2, 0.5, 0.8] {
            let pv = kernel_pv(p);
            for kind in [Kind::Left, Kind::Right] {
                assert!(path_kernel(p, 0.0, kind).tv_distance(&pv) < 1e-15);
            }
        }
    }

    #[test]
    fn path_kernel_means() {
        for (p, eps) in [(0.5f64, 1.0), (0.3, 0.5), (0.8, 0.1)] {
            let target = eps * (1.0 - p) / (2.0 - p).powi(2);
            assert!((path_kernel(p, eps, Kind::Right).mean() - target).abs() < 1e-11);
            assert!((path_kernel(p, eps, Kind::Left).mean() + target).abs() < 1e-11);
        }
    }

    #[test]
    fn branch_correction_law_checks() {
        let zero = branch_correction_law(0.5, 0.0);
        assert!((zero.get(0) - 1.0).abs() < 1e-12);
        for (p, eps) in [(0.5f64, 1.0f64), (0.3, 0.4)] {
            let law = branch_correction_law(p, eps);
            assert!((law.mean() / -eps - (1.0 - p) / (2.0 - p).powi(2)).abs() < 1e-11);
            let moved = 1.0 - law.get(0) - law.residual();
            assert!((moved - 0.5 * eps * p * (1.0 - p) / (2.0 - p)).abs() < 1e-12);
            assert!(law.iter().all(|(k, w)| k % 2 == 0 || w == 0.0));
        }
        assert!((branch_correction_law(0.5, 1.0).mean() + 2.0 / 9.0).abs() < 1e-11);
    }

    #[test]
    fn enumeration_agrees_with_path_kernel() {
        for (p, eps) in [(0.5, 0.0), (0.5, 1.0), (0.3, 0.25)] {
            for kind in [Kind::Left, Kind::Right] {
                let e = enumerate_step_law(p, eps, kind, 60);
                assert!(e.tv_distance(&path_kernel(p, eps, kind)) < 1e-9);
            }
        }
    }

    #[test]
    fn theory_constants_at_half() {
        let c = TheoryConstants::new(0.5, 1.0, 50, 1.0).unwrap();
        assert!((c.b_p - 2.0 / 9.0).abs() < 1e-15);
        assert!((c.tie_prob - 1.0 / 6.0).abs() < 1e-15);
        assert!((c.epsilon - 0.02).abs() < 1e-15);
        assert!((c.step_drift() * 50.0 - c.b_p).abs() < 1e-15);
        assert!(TheoryConstants::new(1.2, 1.0, 50, 1.0).is_err());
        assert!(TheoryConstants::new(0.5, 100.0, 50, 1.0).is_err());
    }

    #[test]
    fn survival_limits_and_monotonicity() {
        assert!(survival_probability(1e-12, 1.0, 1.0) < 1e-11);
        assert!((survival_probability(1e6, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!(survival_probability(1.0, 2.0, 1.0) < survival_probability(1.0, 1.0, 1.0));
        let l2 = 10.0 / 9.0;
        assert!((survival_probability(0.5, 1.0, l2) - 0.262_684).abs() < 1e-6);
    }

    #[test]
    fn lr_pair_rejects_bad_dt() {
        assert_eq!(LRParams::new(1.0, 0.0, 0.0).unwrap_err(), DnbError::InvalidStep(0.0));
        assert!(LRParams::new(1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn lr_pair_started_together_without_drift_stays_together() {
        let params = LRParams::new(1.0, 0.0, 1e-3).unwrap();
        let traj = simulate_lr_pair(0.3, 0.3, params, 1.0, 9).unwrap();
        assert!(traj.iter().all(|s| s.l == s.r));
        assert_eq!(traj.last().unwrap().s_steps, 1000);
    }

    #[test]
    fn lr_pair_clocks_add_up_and_order_holds_after_meeting() {
        let params = LRParams::new(1.0, 0.5, 1e-3).unwrap();
        let traj = simulate_lr_pair(0.2, -0.2, params, 2.0, 3).unwrap();
        let mut met = false;
        for (k, s) in traj.iter().enumerate() {
            assert_eq!(s.t_steps + s.s_steps, k as u64);
            met |= s.met;
            if met {
                assert!(s.l <= s.r);
            }
        }
    }

    #[test]
    fn lr_pair_mean_gap_grows_linearly() {
        // sticky time repays the clamped mass, so E(R - L) = 2 b_p t
        let params = LRParams::new(1.0, 0.5, 1e-3).unwrap();
        let gaps: Vec<f64> = (0..2000)
            .map(|i| {
                let s = LRPair::new(0.0, 0.0, params, i).run_to(1.0);
                s.r - s.l
            })
            .collect();
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        let sd = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sd / n.sqrt() + 0.02, "{mean}");
    }
}
