//! Diffusive rescaling and the compactified metrics on points, paths and
//! finite sets of paths.

use serde::{Deserialize, Serialize};

use crate::dual::DualPath;
use crate::error::{DnbError, Result};
use crate::lattice_paths::LatticePath;

/// Default absolute accuracy of [`path_metric`].
pub const METRIC_TOL: f64 = 1e-9;

/// A point `(x, t)` of the plane; infinite coordinates are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub t: f64,
}

impl Point {
    pub const fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }
}

/// Compactified distance between two points of the plane.
pub fn point_metric(a: Point, b: Point) -> f64 {
    let time = (a.t.tanh() - b.t.tanh()).abs();
    let space = (squash(a.x, a.t) - squash(b.x, b.t)).abs();
    time.max(space)
}

#[inline]
fn squash(x: f64, t: f64) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        x.tanh() / (1.0 + t.abs())
    }
}

/// Continuous piecewise-linear path started at time `sigma`.
///
/// Before `sigma` it is read as its starting value and after its last knot as
/// its final value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl RescaledPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(DnbError::EmptyPath);
        }
        if times.len() != values.len() {
            return Err(DnbError::InvalidParams("knot times and values differ in length".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) || times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(DnbError::InvalidParams(
                "knot times must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { times, values })
    }

    pub fn sigma(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.sigma() {
            return self.values[0];
        }
        if t >= self.end() {
            return *self.values.last().unwrap();
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

/// Lattice objects that can be put under diffusive scaling.
pub trait Rescale {
    /// Knots `(t, x)` in lattice units, in increasing time order.
    fn knots(&self) -> Vec<(f64, f64)>;
}

impl Rescale for LatticePath {
    fn knots(&self) -> Vec<(f64, f64)> {
        self.cells().map(|c| (c.t as f64, c.x as f64)).collect()
    }
}

/// Dual paths run backward, so their time axis is reversed (`t → -t`) to
/// give a path in the usual sense.
impl Rescale for DualPath {
    fn knots(&self) -> Vec<(f64, f64)> {
        (0..self.positions.len())
            .map(|k| {
                let v = self.vertex(k);
                (-(v.t as f64), v.x())
            })
            .collect()
    }
}

/// `(x, t) → (x / n, t / n²)` with linear interpolation between knots.
pub fn rescale<P: Rescale + ?Sized>(path: &P, n: u64) -> Result<RescaledPath> {
    if n == 0 {
        return Err(DnbError::InvalidParams("scaling parameter n must be at least 1".into()));
    }
    let nf = n as f64;
    let (times, values) = path.knots().into_iter().map(|(t, x)| (t / (nf * nf), x / nf)).unzip();
    RescaledPath::new(times, values)
}

/// Path distance at the default accuracy [`METRIC_TOL`].
pub fn path_metric(a: &RescaledPath, b: &RescaledPath) -> f64 {
    path_metric_tol(a, b, METRIC_TOL)
}

/// Distance between two paths: the larger of the start-time gap and the
/// supremum over `t ≥ min(σ₁, σ₂)` of
/// `|tanh π₁(t) − tanh π₂(t)| / (1 + |t|)`.
///
/// Between consecutive knots of either path both are linear, so the
/// integrand is Lipschitz there and the supremum is found by bisection with
/// certified bounds. The returned value is attained by the integrand and the
/// true supremum exceeds it by at most `tol`.
pub fn path_metric_tol(a: &RescaledPath, b: &RescaledPath, tol: f64) -> f64 {
    let start = (a.sigma().tanh() - b.sigma().tanh()).abs();
    let lo = a.sigma().min(b.sigma());
    let hi = a.end().max(b.end());

    let g = |t: f64| (a.eval(t).tanh() - b.eval(t).tanh()).abs() / (1.0 + t.abs());

    let mut knots: Vec<f64> = a
        .times()
        .iter()
        .chain(b.times())
        .copied()
        .filter(|&t| t >= lo)
        .collect();
    if lo < 0.0 && hi > 0.0 {
        knots.push(0.0);
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    // beyond `hi` both paths are constant and the integrand only decays
    // away from t = 0
    let c = (a.eval(hi).tanh() - b.eval(hi).tanh()).abs();
    let mut best = start.max(c / (1.0 + hi.max(0.0)));

    let mut stack: Vec<(f64, f64, f64, f64)> = Vec::new();
    for w in knots.windows(2) {
        let (s, e) = (w[0], w[1]);
        let (gs, ge) = (g(s), g(e));
        best = best.max(gs).max(ge);
        stack.push((s, e, gs, ge));
    }
    if knots.len() == 1 {
        best = best.max(g(knots[0]));
    }

    while let Some((s, e, gs, ge)) = stack.pop() {
        if segment_bound(a, b, s, e, gs, ge) <= best + tol {
            continue;
        }
        let m = 0.5 * (s + e);
        if !(m > s && m < e) {
            continue;
        }
        let gm = g(m);
        best = best.max(gm);
        stack.push((s, m, gs, gm));
        stack.push((m, e, gm, ge));
    }
    best
}

/// Upper bound of the integrand on `[s, e]`, a sub-interval of one linear
/// piece of both paths not containing 0 in its interior.
fn segment_bound(a: &RescaledPath, b: &RescaledPath, s: f64, e: f64, gs: f64, ge: f64) -> f64 {
    let (a0, a1, b0, b1) = (a.eval(s), a.eval(e), b.eval(s), b.eval(e));
    let h = e - s;
    let m = s.abs().min(e.abs());
    let w = 1.0 / (1.0 + m);
    // tanh is 1-Lipschitz and a linear gap is largest at an end
    let by_gap = (a0 - b0).abs().max((a1 - b1).abs()) * w;
    let slope = ((a1 - a0).abs() + (b1 - b0).abs()) / h;
    let lipschitz = slope * w + 2.0 * w * w;
    let by_lipschitz = 0.5 * (gs + ge) + 0.5 * lipschitz * h;
    by_gap.min(by_lipschitz)
}

/// Hausdorff distance between two finite path sets under [`path_metric`].
pub fn hausdorff(k1: &[RescaledPath], k2: &[RescaledPath]) -> Result<f64> {
    if k1.is_empty() || k2.is_empty() {
        return Err(DnbError::EmptySet);
    }
    let one_sided = |from: &[RescaledPath], to: &[RescaledPath]| {
        from.iter()
            .map(|p| to.iter().map(|q| path_metric(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(one_sided(k1, k2).max(one_sided(k2, k1)))
}
