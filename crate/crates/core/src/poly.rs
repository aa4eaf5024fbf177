//! Real polynomials in ascending-degree coefficient form.

use serde::{Deserialize, Serialize};

/// `c[0] + c[1] x + c[2] x^2 + ...`
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(Vec<f64>);

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        let mut p = Polynomial(coefficients);
        p.trim();
        p
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn zero() -> Self {
        Polynomial(Vec::new())
    }

    /// `slope * x + intercept`
    pub fn affine(slope: f64, intercept: f64) -> Self {
        Polynomial::new(vec![intercept, slope])
    }

    fn trim(&mut self) {
        while self.0.last() == Some(&0.0) {
            self.0.pop();
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let len = self.0.len().max(other.0.len());
        Polynomial::new(
            (0..len)
                .map(|k| self.0.get(k).copied().unwrap_or(0.0) + other.0.get(k).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> Polynomial {
        Polynomial::new(self.0.iter().map(|c| c * factor).collect())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    /// `x -> self(a x + b)`
    pub fn compose_affine(&self, a: f64, b: f64) -> Polynomial {
        let inner = Polynomial::affine(a, b);
        self.0
            .iter()
            .rev()
            .fold(Polynomial::zero(), |acc, &c| acc.mul(&inner).add(&Polynomial::constant(c)))
    }

    /// Bound on the modulus of every real root (Cauchy).
    pub fn root_bound(&self) -> f64 {
        match self.0.last() {
            None => 0.0,
            Some(&lead) => {
                1.0 + self.0[..self.0.len() - 1]
                    .iter()
                    .map(|c| (c / lead).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Real roots in the closed interval `[lo, hi]`, ascending.
    ///
    /// Isolation recurses on the derivative: between consecutive critical
    /// points the polynomial is monotone, so each sign change brackets
    /// exactly one root, refined by bisection. The zero polynomial has no
    /// reported roots.
    pub fn roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        if lo > hi || self.is_zero() {
            return Vec::new();
        }
        match self.degree() {
            0 => Vec::new(),
            1 => {
                let r = -self.0[0] / self.0[1];
                if (lo..=hi).contains(&r) {
                    vec![r]
                } else {
                    Vec::new()
                }
            }
            _ => {
                let mut knots = vec![lo];
                knots.extend(self.derivative().roots_in(lo, hi));
                knots.push(hi);
                let mut roots: Vec<f64> = Vec::new();
                let push = |r: f64, roots: &mut Vec<f64>| {
                    if roots.last().is_none_or(|&last| r - last > 1e-14 * (1.0 + r.abs())) {
                        roots.push(r);
                    }
                };
                for w in knots.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let (fa, fb) = (self.eval(a), self.eval(b));
                    if fa == 0.0 {
                        push(a, &mut roots);
                    }
                    if fa != 0.0 && fb != 0.0 && (fa < 0.0) != (fb < 0.0) {
                        push(self.bisect(a, b, fa), &mut roots);
                    }
                }
                if self.eval(hi) == 0.0 {
                    push(hi, &mut roots);
                }
                roots
            }
        }
    }

    fn bisect(&self, mut a: f64, mut b: f64, fa: f64) -> f64 {
        let neg_left = fa < 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = self.eval(mid);
            if fm == 0.0 {
                return mid;
            }
            if (fm < 0.0) == neg_left {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Candidate extremum locations on `[lo, hi]`: endpoints plus critical points.
    fn extremum_candidates(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut xs = vec![lo, hi];
        xs.extend(self.derivative().roots_in(lo, hi));
        xs
    }

    /// `sup |p|` over `[lo, hi]`; infinite bounds are allowed.
    pub fn sup_abs(&self, lo: f64, hi: f64) -> f64 {
        if self.degree() == 0 {
            return self.eval(0.0).abs();
        }
        if !lo.is_finite() || !hi.is_finite() {
            return f64::INFINITY;
        }
        self.extremum_candidates(lo, hi)
            .into_iter()
            .map(|x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }

    /// `inf |p|` over `[lo, hi]`; infinite bounds are allowed.
    pub fn inf_abs(&self, lo: f64, hi: f64) -> f64 {
        if self.degree() == 0 {
            return self.eval(0.0).abs();
        }
        // All roots of p and p' lie inside the larger Cauchy bound.
        let reach = self.root_bound().max(self.derivative().root_bound()) + 1.0;
        let a = if lo.is_finite() { lo } else { -reach.max(hi.abs() + 1.0) };
        let b = if hi.is_finite() { hi } else { reach.max(a.abs() + 1.0) };
        if !self.roots_in(a, b).is_empty() {
            return 0.0;
        }
        self.extremum_candidates(a, b)
            .into_iter()
            .map(|x| self.eval(x).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Quintic smoothstep `6u^5 - 15u^4 + 10u^3`, rising from 0 to 1 on `[0, 1]`
/// with vanishing first and second derivatives at both ends.
pub fn smoothstep() -> Polynomial {
    Polynomial::new(vec![0.0, 0.0, 0.0, 10.0, -15.0, 6.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_derivative() {
        let p = Polynomial::new(vec![1.0, -3.0, 0.0, 2.0]);
        assert_eq!(p.eval(2.0), 1.0 - 6.0 + 16.0);
        assert_eq!(p.derivative(), Polynomial::new(vec![-3.0, 0.0, 6.0]));
        assert_eq!(Polynomial::constant(0.0).degree(), 0);
        assert!(Polynomial::constant(0.0).is_zero());
    }

    #[test]
    fn compose_affine_matches_direct_evaluation() {
        let p = smoothstep();
        let q = p.compose_affine(2.5, -0.75);
        for &x in &[0.3, 0.31, 0.5, 0.7] {
            assert!((q.eval(x) - p.eval(2.5 * x - 0.75)).abs() < 1e-12);
        }
    }

    #[test]
    fn roots_of_cubic() {
        // (x - 1)(x + 2)(x - 0.5)
        let p = Polynomial::affine(1.0, -1.0)
            .mul(&Polynomial::affine(1.0, 2.0))
            .mul(&Polynomial::affine(1.0, -0.5));
        let roots = p.roots_in(-10.0, 10.0);
        assert_eq!(roots.len(), 3);
        for (r, want) in roots.iter().zip([-2.0, 0.5, 1.0]) {
            assert!((r - want).abs() < 1e-12, "{r} vs {want}");
        }
        assert_eq!(p.roots_in(0.6, 0.9), Vec::<f64>::new());
    }

    #[test]
    fn extrema() {
        let p = Polynomial::new(vec![0.0, 0.0, 1.0]); // x^2
        assert_eq!(p.sup_abs(-1.0, 2.0), 4.0);
        assert_eq!(p.inf_abs(-1.0, 2.0), 0.0);
        assert_eq!(p.inf_abs(0.5, 2.0), 0.25);
        assert_eq!(p.sup_abs(0.0, f64::INFINITY), f64::INFINITY);
        assert_eq!(Polynomial::affine(1.0, 2.0).inf_abs(f64::NEG_INFINITY, 0.0), 0.0);
        assert_eq!(Polynomial::affine(1.0, 2.0).inf_abs(-1.0, f64::INFINITY), 1.0);
    }

    #[test]
    fn smoothstep_endpoints() {
        let s = smoothstep();
        assert_eq!(s.eval(0.0), 0.0);
        assert_eq!(s.eval(1.0), 1.0);
        assert_eq!(s.eval(0.5), 0.5);
        assert_eq!(s.derivative().eval(0.0), 0.0);
        assert!(s.derivative().eval(1.0).abs() < 1e-12);
        assert!(s.derivative().derivative().eval(1.0).abs() < 1e-12);
    }
}
