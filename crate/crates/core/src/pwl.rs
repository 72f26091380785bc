//! Piecewise-linear functions on a closed interval.
//!
//! Every battery and charging quantity in the solvers (charging curves, the
//! forward maximum-battery functions, the backward minimum-battery functions
//! and the dominance envelopes) is a [`Pwl`]. Most of them are nondecreasing;
//! intermediate results such as `r⁻¹(f(x) − b) − x` are not, so the type
//! itself admits any finite breakpoint sequence and [`Pwl::is_nondecreasing`]
//! reports monotonicity.
//!
//! Evaluation outside the breakpoint range is an error. Constant extension is
//! only performed on request through [`Pwl::extend_domain`].

use std::cmp::Ordering;
use std::fmt;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Floating-point coordinate type for [`Pwl`].
pub trait Scalar:
    Float + FromPrimitive + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
    /// Breakpoints closer than this in `t` are merged.
    fn merge_eps() -> Self;
    /// Slack accepted when a query lies just outside the domain.
    fn domain_eps() -> Self;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal fits the scalar type")
    }
}

impl Scalar for f64 {
    fn merge_eps() -> Self {
        1e-9
    }
    fn domain_eps() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn merge_eps() -> Self {
        1e-5
    }
    fn domain_eps() -> Self {
        1e-4
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PwlError {
    #[error("a piecewise-linear function needs at least one breakpoint")]
    Empty,
    #[error("breakpoint {index} is not finite")]
    NonFinite { index: usize },
    #[error("breakpoint times must be strictly increasing (index {index})")]
    NotIncreasing { index: usize },
    #[error("function is not nondecreasing (index {index})")]
    NotMonotone { index: usize },
    #[error("argument {t} outside domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("level {y} is not attained (range [{lo}, {hi}])")]
    Unreachable { y: f64, lo: f64, hi: f64 },
    #[error("functions have no common domain")]
    NoCommonDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Breakpoint<S> {
    pub t: S,
    pub v: S,
}

impl<S: Scalar> Breakpoint<S> {
    pub fn new(t: S, v: S) -> Self {
        Self { t, v }
    }
}

/// A continuous piecewise-linear function given by its breakpoints.
///
/// A single breakpoint denotes a function on a degenerate interval `[t, t]`.
#[derive(Clone, PartialEq)]
pub struct Pwl<S> {
    pts: Vec<Breakpoint<S>>,
}

fn f64_of<S: Scalar>(x: S) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn lerp<S: Scalar>(a: Breakpoint<S>, b: Breakpoint<S>, t: S) -> S {
    let dt = b.t - a.t;
    if dt <= S::zero() {
        return a.v.max(b.v);
    }
    let w = (t - a.t) / dt;
    a.v + (b.v - a.v) * w
}

impl<S: Scalar> Pwl<S> {
    /// Builds a function from breakpoints, validating finiteness and strictly
    /// increasing times.
    pub fn new(points: Vec<Breakpoint<S>>) -> Result<Self, PwlError> {
        if points.is_empty() {
            return Err(PwlError::Empty);
        }
        for (index, p) in points.iter().enumerate() {
            if !p.t.is_finite() || !p.v.is_finite() {
                return Err(PwlError::NonFinite { index });
            }
            if index > 0 && p.t <= points[index - 1].t {
                return Err(PwlError::NotIncreasing { index });
            }
        }
        Ok(Self { pts: points })
    }

    /// Like [`Pwl::new`] but additionally requires nondecreasing values.
    pub fn nondecreasing(points: Vec<Breakpoint<S>>) -> Result<Self, PwlError> {
        let f = Self::new(points)?;
        if let Some(index) = f.pts.windows(2).position(|w| w[1].v < w[0].v) {
            return Err(PwlError::NotMonotone { index: index + 1 });
        }
        Ok(f)
    }

    pub fn from_pairs(pairs: &[(S, S)]) -> Result<Self, PwlError> {
        Self::new(pairs.iter().map(|&(t, v)| Breakpoint::new(t, v)).collect())
    }

    /// Normalizes a raw point list produced by an operation: points closer
    /// than the merge tolerance collapse into one keeping the larger value, and
    /// interior points lying on the segment through their neighbours are
    /// dropped.
    fn from_raw(mut raw: Vec<Breakpoint<S>>) -> Self {
        debug_assert!(!raw.is_empty());
        raw.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap_or(Ordering::Equal));
        let eps = S::merge_eps();
        let mut out: Vec<Breakpoint<S>> = Vec::with_capacity(raw.len());
        for p in raw {
            match out.last_mut() {
                Some(last) if p.t - last.t <= eps => {
                    // keep the first time, larger value; the last point keeps its own time
                    if p.v > last.v {
                        last.v = p.v;
                    }
                }
                _ => out.push(p),
            }
        }
        if out.len() > 2 {
            let vscale = out
                .iter()
                .fold(S::one(), |m, p| m.max(p.v.abs()));
            let tol = vscale * S::lit(1e-13);
            let mut kept: Vec<Breakpoint<S>> = Vec::with_capacity(out.len());
            kept.push(out[0]);
            for i in 1..out.len() - 1 {
                let prev = *kept.last().unwrap();
                let next = out[i + 1];
                let mid = out[i];
                if (lerp(prev, next, mid.t) - mid.v).abs() > tol {
                    kept.push(mid);
                }
            }
            kept.push(*out.last().unwrap());
            out = kept;
        }
        Self { pts: out }
    }

    pub fn constant(lo: S, hi: S, v: S) -> Self {
        if hi - lo <= S::merge_eps() {
            Self { pts: vec![Breakpoint::new(lo, v)] }
        } else {
            Self { pts: vec![Breakpoint::new(lo, v), Breakpoint::new(hi, v)] }
        }
    }

    pub fn identity(lo: S, hi: S) -> Self {
        if hi - lo <= S::merge_eps() {
            Self { pts: vec![Breakpoint::new(lo, lo)] }
        } else {
            Self { pts: vec![Breakpoint::new(lo, lo), Breakpoint::new(hi, hi)] }
        }
    }

    pub fn points(&self) -> &[Breakpoint<S>] {
        &self.pts
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn lo(&self) -> S {
        self.pts[0].t
    }

    pub fn hi(&self) -> S {
        self.pts[self.pts.len() - 1].t
    }

    pub fn domain(&self) -> (S, S) {
        (self.lo(), self.hi())
    }

    pub fn max_value(&self) -> S {
        self.pts.iter().fold(S::neg_infinity(), |m, p| m.max(p.v))
    }

    pub fn min_value(&self) -> S {
        self.pts.iter().fold(S::infinity(), |m, p| m.min(p.v))
    }

    pub fn first_value(&self) -> S {
        self.pts[0].v
    }

    pub fn last_value(&self) -> S {
        self.pts[self.pts.len() - 1].v
    }

    pub fn is_nondecreasing(&self, tol: S) -> bool {
        self.pts.windows(2).all(|w| w[1].v >= w[0].v - tol)
    }

    pub fn contains(&self, t: S) -> bool {
        t >= self.lo() - S::domain_eps() && t <= self.hi() + S::domain_eps()
    }

    fn out_of_domain(&self, t: S) -> PwlError {
        PwlError::OutOfDomain { t: f64_of(t), lo: f64_of(self.lo()), hi: f64_of(self.hi()) }
    }

    /// Index `i` of the segment `[pts[i], pts[i+1]]` holding `t` (clamped).
    fn segment(&self, t: S) -> usize {
        let n = self.pts.len();
        if n < 2 {
            return 0;
        }
        let idx = self.pts.partition_point(|p| p.t <= t);
        idx.clamp(1, n - 1) - 1
    }

    /// Value at `t` by linear interpolation; exact at breakpoints.
    pub fn eval(&self, t: S) -> Result<S, PwlError> {
        if !self.contains(t) {
            return Err(self.out_of_domain(t));
        }
        Ok(self.eval_clamped(t))
    }

    /// Value at `t`, extended by constants outside the domain.
    pub fn eval_clamped(&self, t: S) -> S {
        let n = self.pts.len();
        if t <= self.pts[0].t {
            return self.pts[0].v;
        }
        if t >= self.pts[n - 1].t {
            return self.pts[n - 1].v;
        }
        let i = self.segment(t);
        lerp(self.pts[i], self.pts[i + 1], t)
    }

    /// `min { t : f(t) >= y }` for a nondecreasing function. Flat segments at
    /// level `y` resolve to their left endpoint.
    pub fn inverse_eval(&self, y: S) -> Result<S, PwlError> {
        self.inverse_eval_tol(y, S::zero())
    }

    /// [`Pwl::inverse_eval`] accepting levels up to `tol` above the maximum.
    pub fn inverse_eval_tol(&self, y: S, tol: S) -> Result<S, PwlError> {
        let first = self.pts[0];
        if y <= first.v {
            return Ok(first.t);
        }
        for w in self.pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.v >= y {
                if b.v <= a.v {
                    return Ok(b.t);
                }
                let s = (y - a.v) / (b.v - a.v);
                let t = a.t + (b.t - a.t) * s;
                return Ok(t.max(a.t).min(b.t));
            }
        }
        let top = self.max_value();
        if y <= top + tol {
            // level is within tolerance of the maximum: first time the maximum is attained
            let idx = self.pts.iter().position(|p| p.v >= top).unwrap_or(self.pts.len() - 1);
            return Ok(self.pts[idx].t);
        }
        Err(PwlError::Unreachable { y: f64_of(y), lo: f64_of(self.min_value()), hi: f64_of(top) })
    }

    /// `max { t : f(t) <= y }` for a nondecreasing function. Flat segments at
    /// level `y` resolve to their right endpoint.
    pub fn inverse_eval_max(&self, y: S) -> Result<S, PwlError> {
        self.inverse_eval_max_tol(y, S::zero())
    }

    /// [`Pwl::inverse_eval_max`] accepting levels down to `tol` below the minimum.
    pub fn inverse_eval_max_tol(&self, y: S, tol: S) -> Result<S, PwlError> {
        let n = self.pts.len();
        let last = self.pts[n - 1];
        if y >= last.v {
            return Ok(last.t);
        }
        for i in (1..n).rev() {
            let (a, b) = (self.pts[i - 1], self.pts[i]);
            if a.v <= y {
                if b.v <= a.v {
                    return Ok(a.t);
                }
                let s = (y - a.v) / (b.v - a.v);
                let t = a.t + (b.t - a.t) * s;
                return Ok(t.max(a.t).min(b.t));
            }
        }
        let bottom = self.min_value();
        if y >= bottom - tol {
            let idx = self.pts.iter().rposition(|p| p.v <= bottom).unwrap_or(0);
            return Ok(self.pts[idx].t);
        }
        Err(PwlError::Unreachable { y: f64_of(y), lo: f64_of(bottom), hi: f64_of(self.max_value()) })
    }

    /// `g(t) = f(t − dt) + dv`.
    pub fn shift(&self, dt: S, dv: S) -> Self {
        Self { pts: self.pts.iter().map(|p| Breakpoint::new(p.t + dt, p.v + dv)).collect() }
    }

    /// `g(t) = f(t) + slope·t + offset`.
    pub fn add_affine(&self, slope: S, offset: S) -> Self {
        Self::from_raw(
            self.pts
                .iter()
                .map(|p| Breakpoint::new(p.t, p.v + slope * p.t + offset))
                .collect(),
        )
    }

    pub fn negate(&self) -> Self {
        Self { pts: self.pts.iter().map(|p| Breakpoint::new(p.t, -p.v)).collect() }
    }

    /// `g(s) = f(−s)`, the mirror image about `t = 0`.
    pub fn reflect(&self) -> Self {
        Self { pts: self.pts.iter().rev().map(|p| Breakpoint::new(-p.t, p.v)).collect() }
    }

    fn clamp_with(&self, cap: S, upper: bool) -> Self {
        let beyond = |v: S| if upper { v > cap } else { v < cap };
        let mut raw = Vec::with_capacity(self.pts.len() + 2);
        for (i, p) in self.pts.iter().enumerate() {
            if i > 0 {
                let a = self.pts[i - 1];
                if beyond(a.v) != beyond(p.v) && a.v != p.v {
                    let s = (cap - a.v) / (p.v - a.v);
                    let tc = a.t + (p.t - a.t) * s;
                    raw.push(Breakpoint::new(tc, cap));
                }
            }
            raw.push(Breakpoint::new(p.t, if beyond(p.v) { cap } else { p.v }));
        }
        Self::from_raw(raw)
    }

    /// Pointwise `min(f(t), cap)`.
    pub fn clamp_max(&self, cap: S) -> Self {
        self.clamp_with(cap, true)
    }

    /// Pointwise `max(f(t), floor)`.
    pub fn clamp_min(&self, floor: S) -> Self {
        self.clamp_with(floor, false)
    }

    /// Extends the function by constants so its domain covers `[lo, hi]`.
    pub fn extend_domain(&self, lo: S, hi: S) -> Self {
        let mut pts = self.pts.clone();
        if lo < pts[0].t - S::merge_eps() {
            let v = pts[0].v;
            pts.insert(0, Breakpoint::new(lo, v));
        }
        let last = pts[pts.len() - 1];
        if hi > last.t + S::merge_eps() {
            pts.push(Breakpoint::new(hi, last.v));
        }
        Self::from_raw(pts)
    }

    /// Restriction to `[lo, hi]`; both ends must lie inside the domain.
    pub fn restrict(&self, lo: S, hi: S) -> Result<Self, PwlError> {
        if !self.contains(lo) {
            return Err(self.out_of_domain(lo));
        }
        if !self.contains(hi) {
            return Err(self.out_of_domain(hi));
        }
        Ok(self.restrict_clamped(lo, hi))
    }

    /// Restriction to `[lo, hi]` with constant extension where needed.
    pub fn restrict_clamped(&self, lo: S, hi: S) -> Self {
        let hi = hi.max(lo);
        let mut raw = vec![Breakpoint::new(lo, self.eval_clamped(lo))];
        raw.extend(self.pts.iter().copied().filter(|p| p.t > lo && p.t < hi));
        if hi > lo {
            raw.push(Breakpoint::new(hi, self.eval_clamped(hi)));
        }
        Self::from_raw(raw)
    }

    /// `(outer ∘ inner)(t)` over the domain of `inner`. The range of `inner`
    /// must lie in the domain of `outer` up to the domain tolerance.
    pub fn compose(outer: &Self, inner: &Self) -> Result<Self, PwlError> {
        let (olo, ohi) = outer.domain();
        for p in &inner.pts {
            if p.v < olo - S::domain_eps() || p.v > ohi + S::domain_eps() {
                return Err(outer.out_of_domain(p.v));
            }
        }
        let mut ts: Vec<S> = Vec::with_capacity(inner.pts.len() * 2);
        ts.push(inner.pts[0].t);
        for w in inner.pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.v != b.v {
                let (vmin, vmax) = if a.v < b.v { (a.v, b.v) } else { (b.v, a.v) };
                let mut cross: Vec<S> = outer
                    .pts
                    .iter()
                    .filter(|q| q.t > vmin && q.t < vmax)
                    .map(|q| a.t + (b.t - a.t) * ((q.t - a.v) / (b.v - a.v)))
                    .collect();
                cross.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
                ts.extend(cross);
            }
            ts.push(b.t);
        }
        let raw = ts
            .into_iter()
            .map(|t| Breakpoint::new(t, outer.eval_clamped(inner.eval_clamped(t))))
            .collect();
        Ok(Self::from_raw(raw))
    }

    /// Running maximum `g(t) = max_{x <= t} f(x)`.
    pub fn prefix_max(&self) -> Self {
        let mut raw = Vec::with_capacity(self.pts.len() * 2);
        let mut best = self.pts[0].v;
        raw.push(self.pts[0]);
        for w in self.pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.v <= best {
                raw.push(Breakpoint::new(b.t, best));
            } else {
                if a.v < best {
                    let s = (best - a.v) / (b.v - a.v);
                    raw.push(Breakpoint::new(a.t + (b.t - a.t) * s, best));
                }
                raw.push(b);
                best = b.v;
            }
        }
        Self::from_raw(raw)
    }

    /// Running minimum from the right, `g(t) = min_{x >= t} f(x)`.
    pub fn suffix_min(&self) -> Self {
        self.negate().reflect().prefix_max().reflect().negate()
    }

    /// Running maximum from the right, `g(t) = max_{x >= t} f(x)`.
    pub fn suffix_max(&self) -> Self {
        self.reflect().prefix_max().reflect()
    }

    /// Running minimum `g(t) = min_{x <= t} f(x)`.
    pub fn prefix_min(&self) -> Self {
        self.negate().prefix_max().negate()
    }

    fn pairwise(f: &Self, g: &Self, upper: bool) -> Result<Self, PwlError> {
        let lo = f.lo().max(g.lo());
        let hi = f.hi().min(g.hi());
        if lo > hi + S::domain_eps() {
            return Err(PwlError::NoCommonDomain);
        }
        let hi = hi.max(lo);
        let mut ts: Vec<S> = Vec::with_capacity(f.len() + g.len() + 2);
        ts.push(lo);
        ts.extend(f.pts.iter().chain(g.pts.iter()).map(|p| p.t).filter(|&t| t > lo && t < hi));
        ts.push(hi);
        ts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
        ts.dedup();
        let pick = |x: S, y: S| if upper { x.max(y) } else { x.min(y) };
        let mut raw = Vec::with_capacity(ts.len() * 2);
        let mut prev: Option<(S, S)> = None;
        for &t in &ts {
            let d = f.eval_clamped(t) - g.eval_clamped(t);
            if let Some((pt, pd)) = prev {
                if (pd < S::zero() && d > S::zero()) || (pd > S::zero() && d < S::zero()) {
                    let s = pd / (pd - d);
                    let tc = pt + (t - pt) * s;
                    raw.push(Breakpoint::new(tc, pick(f.eval_clamped(tc), g.eval_clamped(tc))));
                }
            }
            raw.push(Breakpoint::new(t, pick(f.eval_clamped(t), g.eval_clamped(t))));
            prev = Some((t, d));
        }
        Ok(Self::from_raw(raw))
    }

    /// Pointwise maximum of two functions over their common domain.
    pub fn max_with(&self, other: &Self) -> Result<Self, PwlError> {
        Self::pairwise(self, other, true)
    }

    /// Pointwise minimum of two functions over their common domain.
    pub fn min_with(&self, other: &Self) -> Result<Self, PwlError> {
        Self::pairwise(self, other, false)
    }

    /// `true` iff `self(t) >= other(t) − eps` for every `t` in `[lo, hi]`.
    ///
    /// Checking breakpoints of both functions plus the interval ends suffices
    /// since both are linear in between. An empty interval (`lo > hi`) is
    /// trivially dominated; a `self` not defined on the interval is not.
    pub fn dominates_on(&self, other: &Self, lo: S, hi: S, eps: S) -> bool {
        if lo > hi {
            return true;
        }
        if !self.contains(lo) || !self.contains(hi) || !other.contains(lo) || !other.contains(hi) {
            return false;
        }
        let ok = |t: S| self.eval_clamped(t) >= other.eval_clamped(t) - eps;
        if !ok(lo) || !ok(hi) {
            return false;
        }
        self.pts
            .iter()
            .chain(other.pts.iter())
            .filter(|p| p.t > lo && p.t < hi)
            .all(|p| ok(p.t))
    }
}

/// Pointwise maximum over the common domain of all functions.
pub fn upper_envelope<S: Scalar>(fs: &[Pwl<S>]) -> Result<Pwl<S>, PwlError> {
    let (first, rest) = fs.split_first().ok_or(PwlError::Empty)?;
    rest.iter().try_fold(first.clone(), |acc, f| acc.max_with(f))
}

/// Pointwise minimum over the common domain of all functions.
pub fn lower_envelope<S: Scalar>(fs: &[Pwl<S>]) -> Result<Pwl<S>, PwlError> {
    let (first, rest) = fs.split_first().ok_or(PwlError::Empty)?;
    rest.iter().try_fold(first.clone(), |acc, f| acc.min_with(f))
}

impl<S: Scalar> fmt::Debug for Pwl<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Pwl[")?;
        for (i, p) in self.pts.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({}, {})", p.t, p.v)?;
        }
        f.write_str("]")
    }
}

impl<S: Scalar + Serialize> Serialize for Pwl<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> Result<Z::Ok, Z::Error> {
        let pairs: Vec<[S; 2]> = self.pts.iter().map(|p| [p.t, p.v]).collect();
        pairs.serialize(serializer)
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for Pwl<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let pairs: Vec<[S; 2]> = Vec::deserialize(deserializer)?;
        Pwl::new(pairs.into_iter().map(|[t, v]| Breakpoint::new(t, v)).collect())
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c1() -> Pwl<f64> {
        Pwl::from_pairs(&[(0.0, 0.0), (1.0, 12000.0), (1.8, 15200.0), (3.0, 16000.0)]).unwrap()
    }

    fn pts(f: &Pwl<f64>) -> Vec<(f64, f64)> {
        f.points().iter().map(|p| (p.t, p.v)).collect()
    }

    fn assert_pts(f: &Pwl<f64>, expected: &[(f64, f64)]) {
        let got = pts(f);
        assert_eq!(got.len(), expected.len(), "{got:?} vs {expected:?}");
        for ((t, v), (et, ev)) in got.iter().zip(expected) {
            assert!((t - et).abs() < 1e-9 && (v - ev).abs() < 1e-6, "{got:?} vs {expected:?}");
        }
    }

    #[test]
    fn eval_at_breakpoints_and_between() {
        let f = c1();
        assert_eq!(f.eval(0.0).unwrap(), 0.0);
        assert!((f.eval(0.5).unwrap() - 6000.0).abs() < 1e-9);
        assert!((f.eval(2.4).unwrap() - 15600.0).abs() < 1e-9);
        assert!(matches!(f.eval(3.5), Err(PwlError::OutOfDomain { .. })));
        assert!(f.eval(-0.1).is_err());
    }

    #[test]
    fn inverse_eval_min_semantics() {
        let f = c1();
        assert_eq!(f.inverse_eval(0.0).unwrap(), 0.0);
        assert!((f.inverse_eval(12000.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((f.inverse_eval(15600.0).unwrap() - 2.4).abs() < 1e-12);
        assert!(matches!(f.inverse_eval(16000.5), Err(PwlError::Unreachable { .. })));
        let flat = Pwl::from_pairs(&[(0.0, 0.0), (1.0, 5.0), (2.0, 5.0), (3.0, 8.0)]).unwrap();
        assert_eq!(flat.inverse_eval(5.0).unwrap(), 1.0);
        assert_eq!(flat.inverse_eval_max(5.0).unwrap(), 2.0);
    }

    #[test]
    fn shift_translates() {
        let f = c1();
        let g = f.shift(0.0, -2000.0);
        assert_eq!(g.points()[1], Breakpoint::new(1.0, 10000.0));
        let h = f.shift(2.0, 0.0);
        assert_eq!(h.points()[0], Breakpoint::new(2.0, 0.0));
        let both = f.shift(2.0, -2000.0);
        assert!((both.eval(3.0).unwrap() - 10000.0).abs() < 1e-9);
    }

    #[test]
    fn clamp_max_cases() {
        let f = c1();
        assert_eq!(f.clamp_max(16000.0), f);
        assert_pts(&f.clamp_max(12000.0), &[(0.0, 0.0), (1.0, 12000.0), (3.0, 12000.0)]);
        assert_pts(&f.clamp_max(0.0), &[(0.0, 0.0), (3.0, 0.0)]);
    }

    #[test]
    fn compose_cases() {
        let f = c1();
        let id = Pwl::identity(0.0, 16000.0);
        assert_pts(&Pwl::compose(&id, &f).unwrap(), &pts(&f));

        let inv = Pwl::from_pairs(&[(0.0, 0.0), (12000.0, 1.0), (15200.0, 1.8), (16000.0, 3.0)]).unwrap();
        let round = Pwl::compose(&f, &inv).unwrap();
        assert_pts(&round, &[(0.0, 0.0), (16000.0, 16000.0)]);

        let one = Pwl::constant(0.0, 5.0, 1.0);
        let c = Pwl::compose(&f.clamp_max(16000.0), &one).unwrap();
        assert_pts(&c, &[(0.0, 12000.0), (5.0, 12000.0)]);

        let bad = Pwl::constant(0.0, 1.0, 4.0);
        assert!(Pwl::compose(&f, &bad).is_err());
    }

    #[test]
    fn prefix_max_cases() {
        let f = c1();
        assert_eq!(f.prefix_max(), f);
        let g = Pwl::from_pairs(&[(0.0, 5.0), (1.0, 3.0), (2.0, 7.0)]).unwrap();
        assert_pts(&g.prefix_max(), &[(0.0, 5.0), (1.5, 5.0), (2.0, 7.0)]);
        let k = Pwl::constant(0.0, 4.0, 2.0);
        assert_eq!(k.prefix_max(), k);
    }

    #[test]
    fn suffix_min_of_dip() {
        let g = Pwl::from_pairs(&[(0.0, 5.0), (1.0, 3.0), (2.0, 7.0)]).unwrap();
        assert_pts(&g.suffix_min(), &[(0.0, 3.0), (1.0, 3.0), (2.0, 7.0)]);
    }

    #[test]
    fn envelope_cases() {
        let f = c1();
        assert_eq!(upper_envelope(&[f.clone()]).unwrap(), f);
        assert_eq!(upper_envelope(&[f.clone(), f.clone()]).unwrap(), f);
        let a = Pwl::from_pairs(&[(0.0, 0.0), (2.0, 4.0)]).unwrap();
        let b = Pwl::from_pairs(&[(0.0, 3.0), (2.0, 3.0)]).unwrap();
        assert_pts(&upper_envelope(&[a.clone(), b.clone()]).unwrap(), &[(0.0, 3.0), (1.5, 3.0), (2.0, 4.0)]);
        assert_pts(&lower_envelope(&[a, b]).unwrap(), &[(0.0, 0.0), (1.5, 3.0), (2.0, 3.0)]);
        assert!(matches!(upper_envelope::<f64>(&[]), Err(PwlError::Empty)));
        let far = Pwl::constant(10.0, 11.0, 0.0);
        assert!(matches!(f.max_with(&far), Err(PwlError::NoCommonDomain)));
    }

    #[test]
    fn dominates_on_cases() {
        let f = c1();
        assert!(f.dominates_on(&f, 0.0, 3.0, 0.0));
        let lower = f.shift(0.0, -2000.0);
        assert!(f.dominates_on(&lower, 0.5, 2.5, 0.0));
        assert!(!lower.dominates_on(&f, 0.5, 2.5, 0.0));
        let a = Pwl::from_pairs(&[(0.0, 0.0), (2.0, 4.0)]).unwrap();
        let b = Pwl::from_pairs(&[(0.0, 3.0), (2.0, 3.0)]).unwrap();
        assert!(!a.dominates_on(&b, 0.0, 2.0, 1e-9));
        assert!(!b.dominates_on(&a, 0.0, 2.0, 1e-9));
        assert!(a.dominates_on(&b, 2.0, 1.0, 0.0));
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert_eq!(Pwl::<f64>::new(vec![]), Err(PwlError::Empty));
        assert!(matches!(Pwl::from_pairs(&[(0.0, 0.0), (0.0, 1.0)]), Err(PwlError::NotIncreasing { .. })));
        assert!(matches!(Pwl::from_pairs(&[(0.0, f64::NAN)]), Err(PwlError::NonFinite { .. })));
        assert!(matches!(
            Pwl::nondecreasing(vec![Breakpoint::new(0.0, 1.0), Breakpoint::new(1.0, 0.0)]),
            Err(PwlError::NotMonotone { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let f = c1();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, "[[0.0,0.0],[1.0,12000.0],[1.8,15200.0],[3.0,16000.0]]");
        let back: Pwl<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<Pwl<f64>>("[[1.0,0.0],[0.5,1.0]]").is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let f = Pwl::<f32>::from_pairs(&[(0.0, 0.0), (1.0, 12.0), (3.0, 16.0)]).unwrap();
        assert!((f.eval(2.0).unwrap() - 14.0).abs() < 1e-5);
        assert!((f.inverse_eval(14.0).unwrap() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn close_breakpoints_merge_keeping_larger_value() {
        let f = Pwl::from_raw(vec![
            Breakpoint::new(0.0, 0.0),
            Breakpoint::new(1.0, 1.0),
            Breakpoint::new(1.0 + 1e-12, 3.0),
            Breakpoint::new(2.0, 3.0),
        ]);
        assert_eq!(f.len(), 3);
        assert_eq!(f.points()[1].v, 3.0);
    }
}
