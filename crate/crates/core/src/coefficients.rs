//! Piecewise-polynomial SDE coefficients and the structural checks run on them.
//!
//! A [`Coefficient`] is a list of polynomial pieces separated by sorted
//! breakpoints. One-sided limits, derivatives, Lipschitz constants and
//! infima of `|f|` are all computed exactly from the pieces, which is what
//! the assumption checks in [`validate_assumptions`] rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{smoothstep, Polynomial};

/// Threshold above which a jump of `mu/sigma - sigma'/2` counts as real.
pub const JUMP_TOLERANCE: f64 = 1e-12;

/// Two one-sided limits closer than this (relative) are treated as continuous.
/// Coarser than [`JUMP_TOLERANCE`]: composed smoothstep pieces only meet to
/// within a few ulps of their coefficient magnitudes.
pub const CONTINUITY_TOLERANCE: f64 = 1e-9;

/// Which value to take at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    /// The value at the point itself.
    At,
}

/// A scalar function built from polynomial pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoefficientFile", into = "CoefficientFile")]
pub struct Coefficient {
    breakpoints: Vec<f64>,
    pieces: Vec<Polynomial>,
    slopes: Vec<Polynomial>,
    breakpoint_values: Vec<Option<f64>>,
    /// `(left, right)` limits at each breakpoint.
    limits: Vec<(f64, f64)>,
}

/// On-disk form of a [`Coefficient`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFile {
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakpoint_values: Vec<Option<f64>>,
}

impl TryFrom<CoefficientFile> for Coefficient {
    type Error = Error;

    fn try_from(file: CoefficientFile) -> Result<Self> {
        let values = if file.breakpoint_values.is_empty() {
            vec![None; file.breakpoints.len()]
        } else {
            file.breakpoint_values
        };
        Coefficient::new(
            file.breakpoints,
            file.pieces.into_iter().map(Polynomial::new).collect(),
            values,
        )
    }
}

impl From<Coefficient> for CoefficientFile {
    fn from(c: Coefficient) -> Self {
        let values = if c.breakpoint_values.iter().all(Option::is_none) {
            Vec::new()
        } else {
            c.breakpoint_values
        };
        CoefficientFile {
            breakpoints: c.breakpoints,
            pieces: c.pieces.into_iter().map(|p| p.coefficients().to_vec()).collect(),
            breakpoint_values: values,
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

impl Coefficient {
    pub fn new(
        breakpoints: Vec<f64>,
        pieces: Vec<Polynomial>,
        breakpoint_values: Vec<Option<f64>>,
    ) -> Result<Self> {
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::Validation("breakpoints must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("breakpoints must be strictly increasing".into()));
        }
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::Validation(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        if pieces.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("piece coefficients must be finite".into()));
        }
        if breakpoint_values.len() != breakpoints.len() {
            return Err(Error::Validation(
                "breakpoint_values must be empty or match breakpoints in length".into(),
            ));
        }
        if breakpoint_values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("breakpoint values must be finite".into()));
        }
        let limits = breakpoints
            .iter()
            .enumerate()
            .map(|(i, &b)| (pieces[i].eval(b), pieces[i + 1].eval(b)))
            .collect();
        let slopes = pieces.iter().map(Polynomial::derivative).collect();
        Ok(Self {
            breakpoints,
            pieces,
            slopes,
            breakpoint_values,
            limits,
        })
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(Polynomial::constant(c))
    }

    pub fn polynomial(p: Polynomial) -> Self {
        Self::new(Vec::new(), vec![p], Vec::new()).expect("single finite piece")
    }

    /// `left` below `at`, `right` from `at` on; the value at `at` is `right`.
    pub fn step(at: f64, left: f64, right: f64) -> Self {
        Self::new(
            vec![at],
            vec![Polynomial::constant(left), Polynomial::constant(right)],
            vec![Some(right)],
        )
        .expect("valid step")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Polynomial] {
        &self.pieces
    }

    pub fn breakpoint_values(&self) -> &[Option<f64>] {
        &self.breakpoint_values
    }

    /// `(left, right)` limits at breakpoint `i`.
    pub fn limits(&self, i: usize) -> (f64, f64) {
        self.limits[i]
    }

    /// Open domain `(lo, hi)` of piece `i`.
    pub fn piece_domain(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { f64::NEG_INFINITY } else { self.breakpoints[i - 1] };
        let hi = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    /// Index of `x` in the breakpoint list, if it is one.
    pub fn breakpoint_index(&self, x: f64) -> Option<usize> {
        let i = self.breakpoints.partition_point(|&b| b < x);
        (i < self.breakpoints.len() && self.breakpoints[i] == x).then_some(i)
    }

    /// One-sided evaluation. `At` on a breakpoint returns the stored value,
    /// or the common limit when both sides agree, and fails otherwise.
    pub fn eval_one_sided(&self, x: f64, side: Side) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Precondition(format!("cannot evaluate at {x}")));
        }
        let i = self.breakpoints.partition_point(|&b| b < x);
        if i < self.breakpoints.len() && self.breakpoints[i] == x {
            let (left, right) = self.limits[i];
            return match side {
                Side::Left => Ok(left),
                Side::Right => Ok(right),
                Side::At => match self.breakpoint_values[i] {
                    Some(v) => Ok(v),
                    None if close(left, right, JUMP_TOLERANCE) => Ok(right),
                    None => Err(Error::Ambiguous { at: x, left, right }),
                },
            };
        }
        Ok(self.pieces[i].eval(x))
    }

    /// Value under the scheme convention: a stored breakpoint value if
    /// present, otherwise the right limit.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= x);
        if i > 0 && self.breakpoints[i - 1] == x {
            if let Some(v) = self.breakpoint_values[i - 1] {
                return v;
            }
        }
        self.pieces[i].eval(x)
    }

    /// Value with the side resolved leniently (`At` follows [`Self::value`]).
    #[inline]
    pub fn value_sided(&self, x: f64, side: Side) -> f64 {
        match side {
            Side::At => self.value(x),
            Side::Right => self.pieces[self.breakpoints.partition_point(|&b| b <= x)].eval(x),
            Side::Left => self.pieces[self.breakpoints.partition_point(|&b| b < x)].eval(x),
        }
    }

    /// Piecewise derivative; `At` on a breakpoint takes the right derivative.
    #[inline]
    pub fn slope(&self, x: f64, side: Side) -> f64 {
        let i = match side {
            Side::Left => self.breakpoints.partition_point(|&b| b < x),
            Side::Right | Side::At => self.breakpoints.partition_point(|&b| b <= x),
        };
        self.slopes[i].eval(x)
    }

    /// Value and right-convention slope in one lookup.
    #[inline]
    pub(crate) fn value_and_slope(&self, x: f64) -> (f64, f64) {
        let i = self.breakpoints.partition_point(|&b| b <= x);
        let mut v = self.pieces[i].eval(x);
        if i > 0 && self.breakpoints[i - 1] == x {
            if let Some(explicit) = self.breakpoint_values[i - 1] {
                v = explicit;
            }
        }
        (v, self.slopes[i].eval(x))
    }

    /// The piecewise derivative as a coefficient (no breakpoint values).
    pub fn derivative(&self) -> Coefficient {
        Coefficient::new(
            self.breakpoints.clone(),
            self.slopes.clone(),
            vec![None; self.breakpoints.len()],
        )
        .expect("derivative of a valid coefficient")
    }

    /// Whether the function is continuous at breakpoint `i`, stored value included.
    pub fn is_continuous_at(&self, i: usize) -> bool {
        let (left, right) = self.limits[i];
        close(left, right, CONTINUITY_TOLERANCE)
            && self.breakpoint_values[i].is_none_or(|v| close(v, right, CONTINUITY_TOLERANCE))
    }

    /// Lipschitz constant on an interval with optionally closed ends.
    ///
    /// Infinite when the function jumps inside the interval (or at a closed
    /// end) or a piece is superlinear on an unbounded part of it.
    pub fn lipschitz_on(&self, lo: f64, hi: f64, closed: (bool, bool)) -> f64 {
        for (i, &b) in self.breakpoints.iter().enumerate() {
            let interior = b > lo && b < hi;
            if interior && !self.is_continuous_at(i) {
                return f64::INFINITY;
            }
            let (left, right) = self.limits[i];
            let at = self.breakpoint_values[i].unwrap_or(right);
            if closed.0 && b == lo && !close(at, right, CONTINUITY_TOLERANCE) {
                return f64::INFINITY;
            }
            if closed.1 && b == hi && !close(at, left, CONTINUITY_TOLERANCE) {
                return f64::INFINITY;
            }
        }
        (0..self.pieces.len())
            .filter_map(|i| {
                let (a, b) = self.piece_domain(i);
                let (a, b) = (a.max(lo), b.min(hi));
                (a < b).then(|| self.slopes[i].sup_abs(a, b))
            })
            .fold(0.0, f64::max)
    }

    /// Per-piece Lipschitz constants over each piece's closed domain.
    pub fn piece_lipschitz(&self) -> Vec<f64> {
        (0..self.pieces.len())
            .map(|i| {
                let (a, b) = self.piece_domain(i);
                self.slopes[i].sup_abs(a, b)
            })
            .collect()
    }

    /// `inf |f|` over the closed interval `[lo, hi]`, including one-sided
    /// limits and stored values at breakpoints inside it.
    pub fn inf_abs_on(&self, lo: f64, hi: f64) -> f64 {
        let pieces = (0..self.pieces.len()).filter_map(|i| {
            let (a, b) = self.piece_domain(i);
            let (a, b) = (a.max(lo), b.min(hi));
            (a <= b).then(|| self.pieces[i].inf_abs(a, b))
        });
        let stored = self
            .breakpoints
            .iter()
            .zip(&self.breakpoint_values)
            .filter(|(&b, _)| b >= lo && b <= hi)
            .filter_map(|(_, v)| v.map(f64::abs));
        pieces.chain(stored).fold(f64::INFINITY, f64::min)
    }

    /// Pointwise combination on the merged breakpoint set.
    fn combine(&self, other: &Coefficient, op: impl Fn(&Polynomial, &Polynomial) -> Polynomial, scalar: impl Fn(f64, f64) -> f64) -> Coefficient {
        let mut merged: Vec<f64> = self.breakpoints.iter().chain(&other.breakpoints).copied().collect();
        merged.sort_by(f64::total_cmp);
        merged.dedup();
        let probe = |i: usize| -> f64 {
            match (i.checked_sub(1).map(|k| merged[k]), merged.get(i).copied()) {
                (None, None) => 0.0,
                (None, Some(b)) => b - 1.0,
                (Some(a), None) => a + 1.0,
                (Some(a), Some(b)) => 0.5 * (a + b),
            }
        };
        let piece_of = |c: &Coefficient, x: f64| c.breakpoints.partition_point(|&b| b < x);
        let pieces = (0..=merged.len())
            .map(|i| {
                let x = probe(i);
                op(&self.pieces[piece_of(self, x)], &other.pieces[piece_of(other, x)])
            })
            .collect();
        let values = merged
            .iter()
            .map(|&b| {
                let explicit = |c: &Coefficient| c.breakpoint_index(b).and_then(|i| c.breakpoint_values[i]).is_some();
                (explicit(self) || explicit(other)).then(|| scalar(self.value(b), other.value(b)))
            })
            .collect();
        Coefficient::new(merged, pieces, values).expect("merged breakpoints are valid")
    }

    pub fn mul(&self, other: &Coefficient) -> Coefficient {
        self.combine(other, Polynomial::mul, |a, b| a * b)
    }

    pub fn add(&self, other: &Coefficient) -> Coefficient {
        self.combine(other, Polynomial::add, |a, b| a + b)
    }

    pub fn scale(&self, factor: f64) -> Coefficient {
        self.mul(&Coefficient::constant(factor))
    }
}

/// Drift, diffusion and diffusion slope at one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalCoefficients {
    pub drift: f64,
    pub diffusion: f64,
    pub diffusion_slope: f64,
}

/// Anything a pathwise scheme can step: an SDE model or a transformed one.
pub trait Dynamics: Sync {
    /// Coefficients at `x`; `Side::At` is the scheme convention.
    fn local(&self, x: f64, side: Side) -> LocalCoefficients;

    #[inline]
    fn at(&self, x: f64) -> LocalCoefficients {
        self.local(x, Side::At)
    }
}

/// `dX = mu(X) dt + sigma(X) dW`, `X_0 = x0` on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct SdeModel {
    pub drift: Coefficient,
    pub diffusion: Coefficient,
    pub x0: f64,
    pub horizon: f64,
}

/// On-disk model description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub drift: Coefficient,
    pub diffusion: Coefficient,
    pub x0: f64,
    pub horizon: f64,
}

impl TryFrom<ModelFile> for SdeModel {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        SdeModel::new(f.drift, f.diffusion, f.x0, f.horizon)
    }
}

impl From<SdeModel> for ModelFile {
    fn from(m: SdeModel) -> Self {
        ModelFile {
            drift: m.drift,
            diffusion: m.diffusion,
            x0: m.x0,
            horizon: m.horizon,
        }
    }
}

impl SdeModel {
    pub fn new(drift: Coefficient, diffusion: Coefficient, x0: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Validation(format!("horizon must be positive and finite, got {horizon}")));
        }
        if !x0.is_finite() {
            return Err(Error::Validation(format!("initial value must be finite, got {x0}")));
        }
        Ok(Self {
            drift,
            diffusion,
            x0,
            horizon,
        })
    }

    pub fn with_x0(&self, x0: f64) -> Self {
        Self { x0, ..self.clone() }
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.drift.clone(), self.diffusion.clone(), self.x0, horizon)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("model file: {e}")))
    }
}

impl Dynamics for SdeModel {
    #[inline]
    fn local(&self, x: f64, side: Side) -> LocalCoefficients {
        match side {
            Side::At => {
                let (diffusion, diffusion_slope) = self.diffusion.value_and_slope(x);
                LocalCoefficients {
                    drift: self.drift.value(x),
                    diffusion,
                    diffusion_slope,
                }
            }
            side => LocalCoefficients {
                drift: self.drift.value_sided(x, side),
                diffusion: self.diffusion.value_sided(x, side),
                diffusion_slope: self.diffusion.slope(x, side),
            },
        }
    }
}

/// `(mu/sigma - sigma'/2)(xi+) - (mu/sigma - sigma'/2)(xi-)`.
pub fn jump_height(model: &SdeModel, xi: f64) -> Result<f64> {
    if model.drift.breakpoint_index(xi).is_none() && model.diffusion.breakpoint_index(xi).is_none() {
        return Err(Error::Precondition(format!("{xi} is not a breakpoint of the model")));
    }
    let side_value = |side: Side| -> Result<f64> {
        let sigma = model.diffusion.eval_one_sided(xi, side)?;
        if sigma == 0.0 {
            return Err(Error::Degenerate(format!("sigma({xi}{}) = 0", if side == Side::Left { "-" } else { "+" })));
        }
        let mu = model.drift.eval_one_sided(xi, side)?;
        Ok(mu / sigma - 0.5 * model.diffusion.slope(xi, side))
    };
    Ok(side_value(Side::Right)? - side_value(Side::Left)?)
}

/// Jump of `mu/sigma - sigma'/2` at one breakpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpHeight {
    pub at: f64,
    pub height: f64,
}

/// Result of [`validate_assumptions`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Drift Lipschitz on every piece.
    pub a1: bool,
    /// Diffusion globally Lipschitz and nonzero at every drift breakpoint.
    pub a2: bool,
    /// Diffusion slope Lipschitz between consecutive drift breakpoints.
    pub a3: bool,
    /// Drift Lipschitz on `[xi - delta, xi)` and `(xi, xi + delta]`.
    pub jump1: bool,
    /// Diffusion bounded away from 0 and Lipschitz on the window, its slope
    /// Lipschitz on each side of `xi`.
    pub jump2: bool,
    /// Some breakpoint in the window carries a real jump.
    pub jump3: bool,
    /// Jump heights at breakpoints inside the closed window.
    pub jump_heights: Vec<JumpHeight>,
    pub drift_lipschitz: Vec<f64>,
    pub diffusion_lipschitz: Vec<f64>,
    /// `inf |sigma|` over the closed window.
    pub inf_abs_diffusion: f64,
    pub window: (f64, f64),
}

/// Decides (A1)-(A3) globally and (jump1)-(jump3) on the window `(xi, delta)`.
pub fn validate_assumptions(model: &SdeModel, window: (f64, f64)) -> Result<AssumptionReport> {
    let (xi, delta) = window;
    if !(delta > 0.0) || !xi.is_finite() {
        return Err(Error::Precondition(format!("window radius must be positive, got {delta}")));
    }
    let (mu, sigma) = (&model.drift, &model.diffusion);
    let sigma_slope = sigma.derivative();
    let drift_lipschitz = mu.piece_lipschitz();
    let diffusion_lipschitz = sigma.piece_lipschitz();

    let a1 = drift_lipschitz.iter().all(|l| l.is_finite());
    let a2 = sigma.lipschitz_on(f64::NEG_INFINITY, f64::INFINITY, (false, false)).is_finite()
        && mu.breakpoints().iter().all(|&b| sigma.value(b) != 0.0);
    let a3 = (0..mu.pieces().len()).all(|i| {
        let (lo, hi) = mu.piece_domain(i);
        sigma_slope.lipschitz_on(lo, hi, (false, false)).is_finite()
    });

    let (lo, hi) = (xi - delta, xi + delta);
    let jump1 = mu.lipschitz_on(lo, xi, (true, false)).is_finite() && mu.lipschitz_on(xi, hi, (false, true)).is_finite();
    let inf_abs_diffusion = sigma.inf_abs_on(lo, hi);
    let jump2 = inf_abs_diffusion > 0.0
        && sigma.lipschitz_on(lo, hi, (true, true)).is_finite()
        && sigma_slope.lipschitz_on(lo, xi, (false, false)).is_finite()
        && sigma_slope.lipschitz_on(xi, hi, (false, false)).is_finite();

    let mut candidates: Vec<f64> = mu
        .breakpoints()
        .iter()
        .chain(sigma.breakpoints())
        .copied()
        .filter(|&b| b >= lo && b <= hi)
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let jump_heights: Vec<JumpHeight> = candidates
        .into_iter()
        .filter_map(|at| jump_height(model, at).ok().map(|height| JumpHeight { at, height }))
        .collect();
    let jump3 = jump_heights.iter().any(|j| j.height.abs() > JUMP_TOLERANCE);

    Ok(AssumptionReport {
        a1,
        a2,
        a3,
        jump1,
        jump2,
        jump3,
        jump_heights,
        drift_lipschitz,
        diffusion_lipschitz,
        inf_abs_diffusion,
        window,
    })
}

/// Nested radii `inner < r0 < r1 < r2 < outer` of a localization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRadii {
    pub inner: f64,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub outer: f64,
}

impl LocalizationRadii {
    pub fn new(inner: f64, r0: f64, r1: f64, r2: f64, outer: f64) -> Result<Self> {
        let radii = Self { inner, r0, r1, r2, outer };
        let seq = [0.0, inner, r0, r1, r2, outer];
        if seq.iter().any(|r| !r.is_finite()) || seq.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "localization radii must satisfy 0 < inner < r0 < r1 < r2 < outer, got {seq:?}"
            )));
        }
        Ok(radii)
    }

    /// Evenly spaced radii `outer * (1, 2, 3, 4, 5) / 5`.
    pub fn uniform(outer: f64) -> Result<Self> {
        Self::new(0.2 * outer, 0.4 * outer, 0.6 * outer, 0.8 * outer, outer)
    }
}

/// The two smooth cut-offs of a localization around `xi`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollifiers {
    /// 1 on `B_r1(xi)`, 0 outside `B_r2(xi)`.
    pub plateau: Coefficient,
    /// 0 on `B_r0(xi)`, 1 outside `B_r1(xi)`.
    pub ramp: Coefficient,
}

impl Mollifiers {
    pub fn new(xi: f64, radii: &LocalizationRadii) -> Self {
        let s = smoothstep();
        // Rising from 0 at `a` to 1 at `b`.
        let rise = |a: f64, b: f64| s.compose_affine(1.0 / (b - a), -a / (b - a));
        let fall = |a: f64, b: f64| Polynomial::constant(1.0).add(&rise(a, b).scale(-1.0));
        let one = Polynomial::constant(1.0);
        let zero = Polynomial::zero();
        let plateau = Coefficient::new(
            vec![xi - radii.r2, xi - radii.r1, xi + radii.r1, xi + radii.r2],
            vec![zero.clone(), rise(xi - radii.r2, xi - radii.r1), one.clone(), fall(xi + radii.r1, xi + radii.r2), zero.clone()],
            vec![None; 4],
        )
        .expect("ordered radii");
        let ramp = Coefficient::new(
            vec![xi - radii.r1, xi - radii.r0, xi + radii.r0, xi + radii.r1],
            vec![one.clone(), fall(xi - radii.r1, xi - radii.r0), zero, rise(xi + radii.r0, xi + radii.r1), one],
            vec![None; 4],
        )
        .expect("ordered radii");
        Self { plateau, ramp }
    }
}

/// Localized model `mu* = eta1 mu`, `sigma* = eta1 sigma + eta2 sgn(sigma)`.
///
/// The sign is taken from `sigma(xi)`, constant on the window by the
/// non-degeneracy requirement, so `sigma*` stays Lipschitz even where
/// `sigma` changes sign far away.
pub fn localize_model(model: &SdeModel, xi: f64, radii: &LocalizationRadii) -> Result<SdeModel> {
    LocalizationRadii::new(radii.inner, radii.r0, radii.r1, radii.r2, radii.outer)?;
    let floor = model.diffusion.inf_abs_on(xi - radii.outer, xi + radii.outer);
    if !(floor > 0.0) {
        return Err(Error::Degenerate(format!(
            "sigma vanishes on [{}, {}]",
            xi - radii.outer,
            xi + radii.outer
        )));
    }
    let sign = model.diffusion.value(xi).signum();
    let eta = Mollifiers::new(xi, radii);
    let drift = eta.plateau.mul(&model.drift);
    let diffusion = eta.plateau.mul(&model.diffusion).add(&eta.ramp.scale(sign));
    SdeModel::new(drift, diffusion, model.x0, model.horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indicator() -> Coefficient {
        Coefficient::step(0.0, 0.0, 1.0)
    }

    fn model(drift: Coefficient, diffusion: Coefficient) -> SdeModel {
        SdeModel::new(drift, diffusion, 0.0, 1.0).unwrap()
    }

    #[test]
    fn one_sided_indicator() {
        let f = indicator();
        assert_eq!(f.eval_one_sided(0.0, Side::Left).unwrap(), 0.0);
        assert_eq!(f.eval_one_sided(0.0, Side::Right).unwrap(), 1.0);
        assert_eq!(f.eval_one_sided(0.0, Side::At).unwrap(), 1.0);
        let square = Coefficient::polynomial(Polynomial::new(vec![0.0, 0.0, 1.0]));
        assert_eq!(square.eval_one_sided(2.0, Side::At).unwrap(), 4.0);
    }

    #[test]
    fn ambiguous_breakpoint_without_value() {
        let f = Coefficient::new(vec![0.0], vec![Polynomial::constant(0.0), Polynomial::constant(1.0)], vec![None]).unwrap();
        assert!(matches!(f.eval_one_sided(0.0, Side::At), Err(Error::Ambiguous { .. })));
        // The scheme convention falls back to the right limit.
        assert_eq!(f.value(0.0), 1.0);
    }

    #[test]
    fn construction_errors() {
        let p = || Polynomial::constant(1.0);
        assert!(Coefficient::new(vec![1.0, 0.0], vec![p(), p(), p()], vec![None, None]).is_err());
        assert!(Coefficient::new(vec![0.0], vec![p()], vec![None]).is_err());
        assert!(Coefficient::new(vec![0.0], vec![p(), p()], vec![]).is_err());
        assert!(SdeModel::new(Coefficient::constant(0.0), Coefficient::constant(1.0), 0.0, 0.0).is_err());
    }

    #[test]
    fn jump_height_examples() {
        let m = model(indicator(), Coefficient::constant(1.0));
        assert_eq!(jump_height(&m, 0.0).unwrap(), 1.0);

        let plain = model(Coefficient::constant(0.0), Coefficient::constant(1.0));
        assert!(matches!(jump_height(&plain, 0.3), Err(Error::Precondition(_))));

        // sigma = 2 + x with a (trivial) breakpoint at 0: slopes cancel.
        let line = Polynomial::affine(1.0, 2.0);
        let sigma = Coefficient::new(vec![0.0], vec![line.clone(), line], vec![None]).unwrap();
        let m = model(indicator(), sigma);
        assert!((jump_height(&m, 0.0).unwrap() - 0.5).abs() < 1e-15);

        let degenerate = model(indicator(), Coefficient::polynomial(Polynomial::affine(1.0, 0.0)));
        assert!(matches!(jump_height(&degenerate, 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn assumption_examples() {
        let r = validate_assumptions(&model(indicator(), Coefficient::constant(1.0)), (0.0, 0.5)).unwrap();
        assert!(r.a1 && r.a2 && r.a3 && r.jump1 && r.jump2 && r.jump3);
        assert_eq!(r.jump_heights, vec![JumpHeight { at: 0.0, height: 1.0 }]);

        let ou = model(Coefficient::polynomial(Polynomial::affine(-1.0, 0.0)), Coefficient::constant(1.0));
        let r = validate_assumptions(&ou, (0.0, 0.5)).unwrap();
        assert!(!r.jump3);
        assert!(r.jump_heights.is_empty());
        assert_eq!(r.drift_lipschitz, vec![1.0]);

        let vanishing = model(indicator(), Coefficient::polynomial(Polynomial::affine(1.0, 0.0)));
        let r = validate_assumptions(&vanishing, (0.0, 0.5)).unwrap();
        assert!(!r.jump2);
        assert_eq!(r.inf_abs_diffusion, 0.0);
        assert!(!r.a2, "sigma(0) = 0 at the drift breakpoint");
    }

    #[test]
    fn assumption_failures() {
        // Superlinear drift on an unbounded piece is not Lipschitz.
        let cubic = model(Coefficient::polynomial(Polynomial::new(vec![0.0, 0.0, 0.0, 1.0])), Coefficient::constant(1.0));
        assert!(!validate_assumptions(&cubic, (0.0, 1.0)).unwrap().a1);
        // A second drift jump inside the window breaks (jump1).
        let two_jumps = Coefficient::new(
            vec![0.0, 0.3],
            vec![Polynomial::constant(0.0), Polynomial::constant(1.0), Polynomial::constant(2.0)],
            vec![None, None],
        )
        .unwrap();
        let r = validate_assumptions(&model(two_jumps, Coefficient::constant(1.0)), (0.0, 0.5)).unwrap();
        assert!(!r.jump1);
        assert!(r.a1);
        // A kink in sigma away from xi breaks (A3) and (jump2).
        let kink = Coefficient::new(vec![0.2], vec![Polynomial::constant(1.0), Polynomial::affine(1.0, 0.8)], vec![None]).unwrap();
        let r = validate_assumptions(&model(indicator(), kink), (0.0, 0.5)).unwrap();
        assert!(r.a2 && !r.a3 && !r.jump2);
    }

    #[test]
    fn report_is_pure() {
        let m = model(indicator(), Coefficient::polynomial(Polynomial::new(vec![1.5, 0.2, 0.1])));
        let a = serde_json::to_string(&validate_assumptions(&m, (0.0, 0.4)).unwrap()).unwrap();
        let b = serde_json::to_string(&validate_assumptions(&m, (0.0, 0.4)).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn localization_examples() {
        let radii = LocalizationRadii::new(0.1, 0.2, 0.3, 0.4, 0.5).unwrap();
        let m = model(Coefficient::constant(3.0), Coefficient::constant(2.0));
        let local = localize_model(&m, 0.0, &radii).unwrap();
        let eta = Mollifiers::new(0.0, &radii);

        // Far away: eta1 = 0, eta2 = 1.
        assert_eq!(local.drift.value(0.45), 0.0);
        assert_eq!(local.diffusion.value(-0.7), 1.0);
        // Core: untouched.
        assert_eq!(local.drift.value(0.15), 3.0);
        assert_eq!(local.diffusion.value(-0.15), 2.0);
        // Seam at 0.35: eta1 = 1 - S(0.5) = 0.5 and eta2 = 1.
        let e1 = eta.plateau.value(0.35);
        assert!(e1 > 0.0 && e1 < 1.0);
        assert!((e1 - 0.5).abs() < 1e-10, "{e1}");
        assert!((local.drift.value(0.35) - 3.0 * e1).abs() < 1e-10);
        assert!((local.diffusion.value(0.35) - (2.0 * e1 + eta.ramp.value(0.35))).abs() < 1e-10);
        let grid: Vec<f64> = (0..=100).map(|k| 0.3 + 0.001 * k as f64).collect();
        for w in grid.windows(2) {
            assert!(eta.plateau.value(w[1]) <= eta.plateau.value(w[0]) + 1e-15);
            assert!(eta.ramp.value(w[1]) >= eta.ramp.value(w[0]) - 1e-15);
        }
    }

    #[test]
    fn localization_rejects_bad_radii() {
        assert!(LocalizationRadii::new(0.1, 0.3, 0.2, 0.4, 0.5).is_err());
        let m = model(indicator(), Coefficient::polynomial(Polynomial::affine(1.0, 0.0)));
        let radii = LocalizationRadii::uniform(0.5).unwrap();
        assert!(matches!(localize_model(&m, 0.0, &radii), Err(Error::Degenerate(_))));
    }

    #[test]
    fn json_round_trip() {
        let m = model(indicator(), Coefficient::polynomial(Polynomial::new(vec![1.0, 0.5])));
        let back = SdeModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(SdeModel::from_json(r#"{"drift": {"pieces": [[0], [1]]}, "diffusion": {"pieces": [[1]]}, "x0": 0, "horizon": 1}"#).is_err());
    }
}
