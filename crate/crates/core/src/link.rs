//! Monotone Lipschitz link functions u: ℝ → [0,1].

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

const PROBE_POINTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
}

/// A monotone Lipschitz link with outputs clamped to [0,1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum LinkFunction {
    /// 0 below `low`, 1 above `high`, linear in between. Lipschitz 1/(high−low).
    Ramp { low: f64, high: f64 },
    /// 1/(1 + exp(−(scale·a − shift))). Lipschitz scale/4.
    Sigmoid { scale: f64, shift: f64 },
    /// Piecewise-linear interpolation of (z, value) knots with constant
    /// extension beyond the extreme knots.
    Table { knots: Vec<(f64, f64)> },
    /// a ↦ inner(−a): the non-increasing mirror of a non-decreasing link.
    Mirrored { inner: Box<LinkFunction> },
}

impl LinkFunction {
    /// clamp(a, 0, 1).
    pub fn identity_ramp() -> Self {
        LinkFunction::Ramp {
            low: 0.0,
            high: 1.0,
        }
    }

    pub fn ramp(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && high > low) {
            return input(format!("ramp needs finite low < high, got [{low}, {high}]"));
        }
        LinkFunction::Ramp { low, high }.verified()
    }

    /// Ramp sending the fraction (k−1)/t to 0 and k/t to 1; at the
    /// attainable fractions j/t of t Boolean votes it equals 1[j ≥ k].
    /// Lipschitz constant t.
    pub fn threshold_fraction(t: usize, k: usize) -> Result<Self> {
        if t == 0 || k == 0 || k > t {
            return input(format!("threshold link needs 1 <= k <= t, got k={k}, t={t}"));
        }
        let t = t as f64;
        Self::ramp((k as f64 - 1.0) / t, k as f64 / t)
    }

    pub fn sigmoid(scale: f64, shift: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0 && shift.is_finite()) {
            return input("sigmoid link needs a positive finite scale");
        }
        LinkFunction::Sigmoid { scale, shift }.verified()
    }

    /// Non-decreasing piecewise-linear table with values in [0,1].
    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return input("link table needs at least one knot");
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return input("link table knots must have strictly increasing z");
            }
            if w[1].1 < w[0].1 {
                return input("link table values must be non-decreasing");
            }
        }
        if knots
            .iter()
            .any(|&(z, v)| !z.is_finite() || !(0.0..=1.0).contains(&v))
        {
            return input("link table values must lie in [0,1] at finite z");
        }
        LinkFunction::Table { knots }.verified()
    }

    pub fn mirrored(inner: LinkFunction) -> Result<Self> {
        if inner.direction() != Monotonicity::NonDecreasing {
            return input("only non-decreasing links can be mirrored");
        }
        LinkFunction::Mirrored {
            inner: Box::new(inner),
        }
        .verified()
    }

    pub fn name(&self) -> &'static str {
        match self {
            LinkFunction::Ramp { low, high } if *low == 0.0 && *high == 1.0 => "identity_ramp",
            LinkFunction::Ramp { .. } => "ramp",
            LinkFunction::Sigmoid { .. } => "sigmoid",
            LinkFunction::Table { .. } => "table",
            LinkFunction::Mirrored { .. } => "mirrored",
        }
    }

    pub fn direction(&self) -> Monotonicity {
        match self {
            LinkFunction::Mirrored { .. } => Monotonicity::NonIncreasing,
            _ => Monotonicity::NonDecreasing,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            LinkFunction::Ramp { low, high } => 1.0 / (high - low),
            LinkFunction::Sigmoid { scale, .. } => scale / 4.0,
            LinkFunction::Table { knots } => knots
                .windows(2)
                .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                .fold(0.0, f64::max),
            LinkFunction::Mirrored { inner } => inner.lipschitz(),
        }
    }

    pub fn eval(&self, a: f64) -> f64 {
        let v = match self {
            LinkFunction::Ramp { low, high } => (a - low) / (high - low),
            LinkFunction::Sigmoid { scale, shift } => 1.0 / (1.0 + (-(scale * a - shift)).exp()),
            LinkFunction::Table { knots } => interpolate_knots(knots, a),
            LinkFunction::Mirrored { inner } => inner.eval(-a),
        };
        v.clamp(0.0, 1.0)
    }

    /// Range over which the probe checks the Lipschitz and monotone claims.
    fn probe_range(&self) -> (f64, f64) {
        match self {
            LinkFunction::Ramp { low, high } => {
                let w = high - low;
                (low - w, high + w)
            }
            LinkFunction::Sigmoid { scale, shift } => {
                let c = shift / scale;
                let w = 12.0 / scale;
                (c - w, c + w)
            }
            LinkFunction::Table { knots } => {
                let lo = knots[0].0;
                let hi = knots[knots.len() - 1].0;
                let w = (hi - lo).max(1.0);
                (lo - 0.1 * w, hi + 0.1 * w)
            }
            LinkFunction::Mirrored { inner } => {
                let (lo, hi) = inner.probe_range();
                (-hi, -lo)
            }
        }
    }

    /// Probe 10^4 points: outputs in [0,1], monotone in the declared
    /// direction, and secant slopes at most L(1 + 1e-6).
    pub fn verify(&self) -> Result<()> {
        let lipschitz = self.lipschitz();
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::Input(format!("link has invalid Lipschitz constant {lipschitz}")));
        }
        let (lo, hi) = self.probe_range();
        let step = (hi - lo) / (PROBE_POINTS - 1) as f64;
        let sign = match self.direction() {
            Monotonicity::NonDecreasing => 1.0,
            Monotonicity::NonIncreasing => -1.0,
        };
        let mut prev = self.eval(lo);
        for i in 1..PROBE_POINTS {
            let a = lo + step * i as f64;
            let v = self.eval(a);
            if !(0.0..=1.0).contains(&v) {
                return input(format!("link output {v} outside [0,1] at {a}"));
            }
            let rise = sign * (v - prev);
            if rise < -1e-12 {
                return input(format!("link is not monotone near {a}"));
            }
            if rise > lipschitz * (1.0 + 1e-6) * step + 1e-12 {
                return input(format!("link slope exceeds declared L={lipschitz} near {a}"));
            }
            prev = v;
        }
        Ok(())
    }

    fn verified(self) -> Result<Self> {
        self.verify()?;
        Ok(self)
    }
}

/// Linear interpolation between sorted knots, constant outside.
pub(crate) fn interpolate_knots(knots: &[(f64, f64)], z: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if z <= first.0 {
        return first.1;
    }
    if z >= last.0 {
        return last.1;
    }
    let j = knots.partition_point(|k| k.0 <= z);
    let (z0, v0) = knots[j - 1];
    let (z1, v1) = knots[j];
    v0 + (v1 - v0) * (z - z0) / (z1 - z0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_ramp_clamps() {
        let u = LinkFunction::identity_ramp();
        assert_eq!(u.eval(-0.3), 0.0);
        assert_eq!(u.eval(0.25), 0.25);
        assert_eq!(u.eval(7.0), 1.0);
        assert_eq!(u.lipschitz(), 1.0);
        assert_eq!(u.name(), "identity_ramp");
        u.verify().unwrap();
    }

    #[test]
    fn threshold_fraction_matches_votes() {
        // AND of t=3: only the all-true fraction maps to 1.
        let and = LinkFunction::threshold_fraction(3, 3).unwrap();
        assert_eq!(and.eval(1.0), 1.0);
        assert_eq!(and.eval(2.0 / 3.0), 0.0);
        assert!((and.lipschitz() - 3.0).abs() < 1e-12);
        // t=1 is the identity ramp on (0,1).
        let one = LinkFunction::threshold_fraction(1, 1).unwrap();
        assert_eq!(one.eval(0.4), 0.4);
        // majority of 3
        let maj = LinkFunction::threshold_fraction(3, 2).unwrap();
        assert_eq!(maj.eval(1.0 / 3.0), 0.0);
        assert_eq!(maj.eval(2.0 / 3.0), 1.0);
    }

    #[test]
    fn table_interpolates_with_constant_ends() {
        let u = LinkFunction::table(vec![(0.0, 0.2), (1.0, 0.6)]).unwrap();
        assert_eq!(u.eval(-5.0), 0.2);
        assert!((u.eval(0.5) - 0.4).abs() < 1e-15);
        assert_eq!(u.eval(3.0), 0.6);
        assert!((u.lipschitz() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(LinkFunction::table(vec![(0.0, 0.5), (1.0, 0.2)]).is_err());
        assert!(LinkFunction::table(vec![(0.0, 0.5), (0.0, 0.6)]).is_err());
        assert!(LinkFunction::table(vec![(0.0, 1.5)]).is_err());
    }

    #[test]
    fn mirrored_is_non_increasing() {
        let u = LinkFunction::mirrored(LinkFunction::identity_ramp()).unwrap();
        assert_eq!(u.direction(), Monotonicity::NonIncreasing);
        assert_eq!(u.eval(-0.3), 0.3);
        assert_eq!(u.eval(0.3), 0.0);
    }

    #[test]
    fn sigmoid_lipschitz_is_quarter_scale() {
        let u = LinkFunction::sigmoid(2.0, 0.0).unwrap();
        assert_eq!(u.lipschitz(), 0.5);
        assert!((u.eval(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip() {
        let u = LinkFunction::mirrored(LinkFunction::ramp(-1.0, 2.0).unwrap()).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        let back: LinkFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(u, back);
    }
}
