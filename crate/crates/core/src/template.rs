//! Scalar time profiles used as controls.
//!
//! The smooth building block is the polynomial bump `(1 - z^2)^P` with
//! `z = (t - c) / w`, which is `C^(P-1)` on the line. Derivatives are exact
//! polynomial derivatives, so controls can be differentiated without stencils.

use serde::{Deserialize, Serialize};

/// Exponent of the polynomial bump.
pub const BUMP_POWER: usize = 8;

/// A scalar control profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Template {
    /// `order`-th time derivative of the bump centered at `center` with half width `half_width`.
    Bump { center: f64, half_width: f64, order: usize },
    /// Continuous ramp from 0 at `start` to 1 at `start + rise`; not smooth.
    Ramp { start: f64, rise: f64 },
    /// Unit step at `at`; not smooth.
    Step { at: f64 },
}

impl Template {
    pub fn bump(center: f64, half_width: f64) -> Self {
        Template::Bump { center, half_width, order: 0 }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, Template::Bump { order, .. } if order + 2 < BUMP_POWER)
    }

    /// Closed support `[lo, hi]`; `hi` is infinite for ramps and steps.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Template::Bump { center, half_width, .. } => (center - half_width, center + half_width),
            Template::Ramp { start, .. } => (start, f64::INFINITY),
            Template::Step { at } => (at, f64::INFINITY),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    /// `m`-th derivative at `t` (one-sided at kinks of the non-smooth kinds).
    pub fn derivative(&self, m: usize, t: f64) -> f64 {
        match *self {
            Template::Bump { center, half_width, order } => bump_derivative(order + m, (t - center) / half_width) / half_width.powi((order + m) as i32),
            Template::Ramp { start, rise } => {
                let z = (t - start) / rise;
                match m {
                    0 => z.clamp(0.0, 1.0),
                    1 if (0.0..1.0).contains(&z) => 1.0 / rise,
                    _ => 0.0,
                }
            }
            Template::Step { at } => {
                if m == 0 && t >= at {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Equality up to rounding in the time parameters.
    pub fn same_as(&self, other: &Template) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        match (*self, *other) {
            (Template::Bump { center: c1, half_width: w1, order: o1 }, Template::Bump { center: c2, half_width: w2, order: o2 }) => {
                o1 == o2 && close(c1, c2) && close(w1, w2)
            }
            (Template::Ramp { start: a, rise: r }, Template::Ramp { start: b, rise: q }) => close(a, b) && close(r, q),
            (Template::Step { at: a }, Template::Step { at: b }) => close(a, b),
            _ => false,
        }
    }

    /// Reflection `t -> 2T - t` of a bump (with the sign of odd derivatives).
    pub fn mirrored(&self, about: f64) -> Option<Template> {
        match *self {
            Template::Bump { center, half_width, order } => {
                Some(Template::Bump { center: 2.0 * about - center, half_width, order })
            }
            _ => None,
        }
    }

    /// Sign picked up by the mirrored profile: `f(2T - t)` has derivatives `(-1)^order`.
    pub fn mirror_sign(&self) -> f64 {
        match *self {
            Template::Bump { order, .. } if order % 2 == 1 => -1.0,
            _ => 1.0,
        }
    }
}

/// `d^m/dz^m (1 - z^2)^P`, zero outside `|z| < 1`.
pub fn bump_derivative(m: usize, z: f64) -> f64 {
    if z.abs() >= 1.0 || m > 2 * BUMP_POWER {
        return 0.0;
    }
    // (1 - z^2)^P = sum_j C(P, j) (-1)^j z^(2j)
    let mut acc = 0.0;
    let mut binom = 1.0;
    for j in 0..=BUMP_POWER {
        let p = 2 * j;
        if p >= m {
            let mut falling = 1.0;
            for k in 0..m {
                falling *= (p - k) as f64;
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * falling * z.powi((p - m) as i32);
        }
        binom = binom * (BUMP_POWER - j) as f64 / (j + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let t = Template::Bump { center: 0.5, half_width: 0.2, order: 1 };
        let h = 1e-6;
        for &s in &[0.35, 0.5, 0.61] {
            let fd = (t.value(s + h) - t.value(s - h)) / (2.0 * h);
            assert!((fd - t.derivative(1, s)).abs() < 1e-5 * t.derivative(1, s).abs().max(1.0));
        }
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let t = Template::bump(1.0, 0.25);
        assert_eq!(t.value(0.7), 0.0);
        assert_eq!(t.value(1.3), 0.0);
        assert_eq!(t.value(1.0), 1.0);
        assert!(t.is_smooth());
        assert!(!Template::Step { at: 0.1 }.is_smooth());
    }

    #[test]
    fn mirror_sign_of_odd_order() {
        let t = Template::Bump { center: 0.3, half_width: 0.1, order: 1 };
        let m = t.mirrored(1.0).unwrap();
        for &s in &[0.25, 0.3, 0.33] {
            let lhs = t.value(s);
            let rhs = t.mirror_sign() * m.value(2.0 - s);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
