//! State transforms: the jump-removing map `G`, the Lamperti-type map `H`,
//! their inverses, and the coefficients of the transformed equations.

use serde::{Deserialize, Serialize};

use crate::coefficients::{Coefficient, Dynamics, LocalCoefficients, SdeModel, Side};
use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Relative tolerance of [`invert_transform`].
pub const INVERSE_TOLERANCE: f64 = 1e-12;

/// Grid size of the monotonicity certificate of [`TransformG`].
pub const CERTIFICATE_GRID: usize = 10_000;

/// What a transform knows about the preimage of a value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preimage {
    Exact(f64),
    Bracket(f64, f64),
    Unknown,
}

/// A strictly monotone map with an absolutely continuous derivative.
pub trait Transform: Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    /// Weak second derivative; `side` selects the one-sided value at kinks
    /// of the first derivative (`At` means right).
    fn d2(&self, x: f64, side: Side) -> f64;

    fn increasing(&self) -> bool {
        true
    }

    fn preimage(&self, _y: f64) -> Preimage {
        Preimage::Unknown
    }
}

impl<T: Transform + ?Sized> Transform for &T {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }
    fn d1(&self, x: f64) -> f64 {
        (**self).d1(x)
    }
    fn d2(&self, x: f64, side: Side) -> f64 {
        (**self).d2(x, side)
    }
    fn increasing(&self) -> bool {
        (**self).increasing()
    }
    fn preimage(&self, y: f64) -> Preimage {
        (**self).preimage(y)
    }
}

/// `x -> x`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Identity;

impl Transform for Identity {
    fn value(&self, x: f64) -> f64 {
        x
    }
    fn d1(&self, _x: f64) -> f64 {
        1.0
    }
    fn d2(&self, _x: f64, _side: Side) -> f64 {
        0.0
    }
    fn preimage(&self, y: f64) -> Preimage {
        Preimage::Exact(y)
    }
}

/// Solves `t(x) = y` to `|t(x) - y| <= 1e-12 max(1, |y|)`.
///
/// Newton steps are kept inside a bracket that shrinks like bisection
/// whenever Newton leaves it or stalls.
pub fn invert_transform<T: Transform + ?Sized>(t: &T, y: f64) -> Result<f64> {
    invert_near(t, y, None)
}

/// [`invert_transform`] starting Newton from `guess` when it lies in the bracket.
pub fn invert_near<T: Transform + ?Sized>(t: &T, y: f64, guess: Option<f64>) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::Range(y));
    }
    let (mut lo, mut hi) = match t.preimage(y) {
        Preimage::Exact(x) => return Ok(x),
        Preimage::Bracket(lo, hi) => (lo, hi),
        Preimage::Unknown => expand_bracket(t, y)?,
    };
    let sign = if t.increasing() { 1.0 } else { -1.0 };
    let residual = |x: f64| sign * (t.value(x) - y);
    let tol = INVERSE_TOLERANCE * y.abs().max(1.0);
    let (r_lo, r_hi) = (residual(lo), residual(hi));
    if r_lo > tol || r_hi < -tol {
        return Err(Error::Range(y));
    }
    if r_lo.abs() <= tol {
        return Ok(lo);
    }
    if r_hi.abs() <= tol {
        return Ok(hi);
    }
    let mut x = match guess {
        Some(g) if g > lo && g < hi => g,
        _ => 0.5 * (lo + hi),
    };
    for _ in 0..200 {
        let r = residual(x);
        if r.abs() <= tol {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - r / (sign * t.d1(x));
        let width = hi - lo;
        x = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            lo + 0.5 * width
        };
        if width <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            // Bracket at ulp scale: the residual is as small as rounding allows.
            return Ok(x);
        }
    }
    Err(Error::Range(y))
}

fn expand_bracket<T: Transform + ?Sized>(t: &T, y: f64) -> Result<(f64, f64)> {
    let sign = if t.increasing() { 1.0 } else { -1.0 };
    let mut step = 1.0 + y.abs();
    let (mut lo, mut hi) = (y - step, y + step);
    for _ in 0..64 {
        let below = sign * (t.value(lo) - y) <= 0.0;
        let above = sign * (t.value(hi) - y) >= 0.0;
        if below && above {
            return Ok((lo, hi));
        }
        step *= 2.0;
        if !below {
            lo = y - step;
        }
        if !above {
            hi = y + step;
        }
        if !lo.is_finite() || !hi.is_finite() {
            break;
        }
    }
    Err(Error::Range(y))
}

/// Largest difference quotient of `f` over a uniform grid on `[a, b]`.
pub fn lipschitz_certificate(f: impl Fn(f64) -> f64, interval: (f64, f64), grid_size: usize) -> Result<f64> {
    let (a, b) = interval;
    if grid_size < 2 {
        return Err(Error::Precondition("certificate grid needs at least 2 points".into()));
    }
    if !(a < b) {
        return Err(Error::Precondition(format!("empty interval [{a}, {b}]")));
    }
    let h = (b - a) / (grid_size - 1) as f64;
    let mut prev = f(a);
    let mut best = 0.0f64;
    for j in 1..grid_size {
        let x = if j == grid_size - 1 { b } else { a + h * j as f64 };
        let v = f(x);
        if !v.is_finite() || !prev.is_finite() {
            return Err(Error::Certification(format!("non-finite value near x = {x}")));
        }
        best = best.max((v - prev).abs() / h);
        prev = v;
    }
    Ok(best)
}

/// Bump profile `phi(u) = (1 - u^2)^k` on `[-1, 1]`, zero outside.
///
/// `k >= 3` keeps the second derivative of `G` continuous at the bump edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub exponent: u32,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self { exponent: 4 }
    }
}

impl BumpProfile {
    /// `(phi, phi', phi'')` at `u` with `|u| <= 1`.
    #[inline]
    fn eval(&self, u: f64) -> (f64, f64, f64) {
        let k = self.exponent as i32;
        let w = 1.0 - u * u;
        let wk2 = w.powi(k - 2);
        let wk1 = wk2 * w;
        let kf = k as f64;
        (wk1 * w, -2.0 * kf * u * wk1, -2.0 * kf * wk1 + 4.0 * kf * (kf - 1.0) * u * u * wk2)
    }
}

/// `G(x) = x + sum_i alpha_i z|z| phi(z / nu_i)` with `z = x - xi_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformGFile", into = "TransformGFile")]
pub struct TransformG {
    breakpoints: Vec<f64>,
    strengths: Vec<f64>,
    radii: Vec<f64>,
    profile: BumpProfile,
    g_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformGFile {
    pub breakpoints: Vec<f64>,
    pub alpha: Vec<f64>,
    pub nu: Vec<f64>,
    #[serde(default)]
    pub profile: BumpProfile,
}

impl TryFrom<TransformGFile> for TransformG {
    type Error = Error;
    fn try_from(f: TransformGFile) -> Result<Self> {
        TransformG::new(f.breakpoints, f.alpha, f.nu, f.profile)
    }
}

impl From<TransformG> for TransformGFile {
    fn from(g: TransformG) -> Self {
        TransformGFile {
            breakpoints: g.breakpoints,
            alpha: g.strengths,
            nu: g.radii,
            profile: g.profile,
        }
    }
}

/// Options for [`TransformG::build_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BuildOptions {
    /// Bumps stay inside this distance of their breakpoint.
    pub window_radius: Option<f64>,
    /// Overrides the default bump radius.
    pub radius: Option<f64>,
    pub profile: BumpProfile,
}

impl TransformG {
    pub fn identity() -> Self {
        Self::new(Vec::new(), Vec::new(), Vec::new(), BumpProfile::default()).expect("empty transform")
    }

    /// Validates the bumps and certifies `G' >= g_min > 0`.
    pub fn new(breakpoints: Vec<f64>, strengths: Vec<f64>, radii: Vec<f64>, profile: BumpProfile) -> Result<Self> {
        if breakpoints.len() != strengths.len() || breakpoints.len() != radii.len() {
            return Err(Error::Validation("breakpoints, alpha and nu must have equal length".into()));
        }
        if profile.exponent < 3 {
            return Err(Error::Validation("bump exponent must be at least 3".into()));
        }
        if breakpoints.iter().chain(&strengths).any(|v| !v.is_finite()) || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Validation("transform parameters must be finite with positive radii".into()));
        }
        for i in 1..breakpoints.len() {
            if breakpoints[i - 1] + radii[i - 1] > breakpoints[i] - radii[i] {
                return Err(Error::Validation(format!(
                    "bumps around {} and {} overlap",
                    breakpoints[i - 1], breakpoints[i]
                )));
            }
        }
        let mut g = Self {
            breakpoints,
            strengths,
            radii,
            profile,
            g_min: 1.0,
        };
        let mut g_min = 1.0f64;
        for (&xi, &nu) in g.breakpoints.iter().zip(&g.radii) {
            let h = 2.0 * nu / (CERTIFICATE_GRID - 1) as f64;
            for j in 0..CERTIFICATE_GRID {
                g_min = g_min.min(g.d1(xi - nu + h * j as f64));
            }
        }
        if !g_min.is_finite() {
            return Err(Error::Certification("non-finite derivative of G".into()));
        }
        if g_min <= 0.0 {
            return Err(Error::Construction(format!(
                "G is not monotone (min G' = {g_min:.3e}); use a smaller bump radius"
            )));
        }
        g.g_min = g_min;
        Ok(g)
    }

    /// Builds `G` for the drift jumps of `model` with the default radii.
    pub fn build(model: &SdeModel) -> Result<Self> {
        Self::build_with(model, BuildOptions::default())
    }

    pub fn build_with(model: &SdeModel, options: BuildOptions) -> Result<Self> {
        let mut all: Vec<f64> = model
            .drift
            .breakpoints()
            .iter()
            .chain(model.diffusion.breakpoints())
            .copied()
            .collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        let (mut xs, mut alphas, mut nus) = (Vec::new(), Vec::new(), Vec::new());
        for (i, &xi) in model.drift.breakpoints().iter().enumerate() {
            let (left, right) = model.drift.limits(i);
            if left == right {
                continue;
            }
            let sigma = model.diffusion.value(xi);
            if sigma == 0.0 {
                return Err(Error::Degenerate(format!("sigma({xi}) = 0 at a drift jump")));
            }
            let alpha = (left - right) / (2.0 * sigma * sigma);
            let nearest = all
                .iter()
                .filter(|&&b| b != xi)
                .map(|&b| (b - xi).abs())
                .fold(f64::INFINITY, f64::min);
            let nu = options.radius.unwrap_or_else(|| {
                (0.5 * nearest)
                    .min(options.window_radius.unwrap_or(f64::INFINITY))
                    .min(1.0 / (4.0 * alpha.abs() + 1.0))
            });
            xs.push(xi);
            alphas.push(alpha);
            nus.push(nu);
        }
        Self::new(xs, alphas, nus, options.profile)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn profile(&self) -> BumpProfile {
        self.profile
    }

    /// Certified lower bound of `G'` on the bumps (1 without bumps).
    pub fn g_min(&self) -> f64 {
        self.g_min
    }

    pub fn is_identity(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// Bump containing `x` as `(index, u)` with `u = (x - xi) / nu` in `[-1, 1]`.
    #[inline]
    fn bump(&self, x: f64) -> Option<(usize, f64)> {
        let i = self.breakpoints.partition_point(|&b| b < x);
        [i.wrapping_sub(1), i].into_iter().find_map(|k| {
            let xi = *self.breakpoints.get(k)?;
            let u = (x - xi) / self.radii[k];
            (u.abs() < 1.0).then_some((k, u))
        })
    }

    /// Support `[lo, hi]` of bump `i`.
    pub fn support(&self, i: usize) -> (f64, f64) {
        (self.breakpoints[i] - self.radii[i], self.breakpoints[i] + self.radii[i])
    }
}

impl Transform for TransformG {
    #[inline]
    fn value(&self, x: f64) -> f64 {
        match self.bump(x) {
            None => x,
            Some((k, u)) => {
                let nu = self.radii[k];
                x + self.strengths[k] * nu * nu * u * u.abs() * self.profile.eval(u).0
            }
        }
    }

    #[inline]
    fn d1(&self, x: f64) -> f64 {
        match self.bump(x) {
            None => 1.0,
            Some((k, u)) => {
                let (phi, dphi, _) = self.profile.eval(u);
                1.0 + self.strengths[k] * self.radii[k] * (2.0 * u.abs() * phi + u * u.abs() * dphi)
            }
        }
    }

    #[inline]
    fn d2(&self, x: f64, side: Side) -> f64 {
        match self.bump(x) {
            None => 0.0,
            Some((k, u)) => {
                let (phi, dphi, ddphi) = self.profile.eval(u);
                let sgn = if u > 0.0 || (u == 0.0 && side != Side::Left) { 1.0 } else { -1.0 };
                self.strengths[k] * (2.0 * sgn * phi + 4.0 * u.abs() * dphi + u * u.abs() * ddphi)
            }
        }
    }

    fn preimage(&self, y: f64) -> Preimage {
        // G is the identity off the bumps and maps each bump support onto itself.
        let i = self.breakpoints.partition_point(|&b| b < y);
        for k in [i.wrapping_sub(1), i] {
            if k < self.breakpoints.len() {
                let (lo, hi) = self.support(k);
                if y > lo && y < hi {
                    return Preimage::Bracket(lo, hi);
                }
            }
        }
        Preimage::Exact(y)
    }
}

/// `H(x) = ∫_0^x 1/sigma*(z) dz` with `sigma*` the constant continuation of
/// `sigma` outside `[xi - delta, xi + delta]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformH {
    xi: f64,
    delta: f64,
    diffusion: Coefficient,
    /// Quadrature knots across the window and `∫_{xi-delta}^{knot} 1/sigma`.
    knots: Vec<f64>,
    cumulative: Vec<f64>,
    /// `A(0)`, where `A` is the antiderivative anchored at `xi - delta`.
    offset: f64,
    increasing: bool,
}

const H_KNOTS: usize = 64;
const H_TOLERANCE: f64 = 1e-12;

impl TransformH {
    pub fn new(diffusion: &Coefficient, xi: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite() && xi.is_finite()) {
            return Err(Error::Precondition(format!("invalid window ({xi}, {delta})")));
        }
        let (lo, hi) = (xi - delta, xi + delta);
        let floor = diffusion.inf_abs_on(lo, hi);
        if !(floor > 0.0) {
            return Err(Error::Degenerate(format!("sigma vanishes on [{lo}, {hi}]")));
        }
        if !diffusion.lipschitz_on(lo, hi, (true, true)).is_finite() {
            return Err(Error::Precondition(format!("sigma is not Lipschitz on [{lo}, {hi}]")));
        }
        let mut knots: Vec<f64> = (0..=H_KNOTS).map(|j| lo + 2.0 * delta * j as f64 / H_KNOTS as f64).collect();
        knots.extend(diffusion.breakpoints().iter().copied().filter(|&b| b > lo && b < hi));
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut cumulative = vec![0.0];
        for w in knots.windows(2) {
            let piece = integrate(|z| 1.0 / diffusion.value(z), w[0], w[1], H_TOLERANCE / H_KNOTS as f64)
                .ok_or_else(|| Error::Certification(format!("quadrature of 1/sigma failed on [{}, {}]", w[0], w[1])))?;
            cumulative.push(cumulative.last().unwrap() + piece);
        }
        let mut h = Self {
            xi,
            delta,
            diffusion: diffusion.clone(),
            knots,
            cumulative,
            offset: 0.0,
            increasing: diffusion.value(xi) > 0.0,
        };
        h.offset = h.anchored(0.0);
        Ok(h)
    }

    pub fn window(&self) -> (f64, f64) {
        (self.xi, self.delta)
    }

    fn edge_values(&self) -> (f64, f64) {
        (
            self.diffusion.value(self.xi - self.delta),
            self.diffusion.value(self.xi + self.delta),
        )
    }

    /// The continued diffusion `sigma*`.
    pub fn sigma_star(&self, x: f64) -> f64 {
        let (lo, hi) = (self.xi - self.delta, self.xi + self.delta);
        self.diffusion.value(x.clamp(lo, hi))
    }

    /// Antiderivative of `1/sigma*` anchored at `xi - delta`.
    fn anchored(&self, x: f64) -> f64 {
        let (lo, hi) = (self.xi - self.delta, self.xi + self.delta);
        let (s_lo, s_hi) = self.edge_values();
        if x <= lo {
            return (x - lo) / s_lo;
        }
        if x >= hi {
            return self.cumulative.last().unwrap() + (x - hi) / s_hi;
        }
        let k = self.knots.partition_point(|&b| b <= x) - 1;
        let rest = integrate(|z| 1.0 / self.diffusion.value(z), self.knots[k], x, H_TOLERANCE / H_KNOTS as f64)
            .expect("1/sigma is bounded on the window");
        self.cumulative[k] + rest
    }
}

impl Transform for TransformH {
    fn value(&self, x: f64) -> f64 {
        self.anchored(x) - self.offset
    }

    fn d1(&self, x: f64) -> f64 {
        1.0 / self.sigma_star(x)
    }

    fn d2(&self, x: f64, side: Side) -> f64 {
        let (lo, hi) = (self.xi - self.delta, self.xi + self.delta);
        let inside = match side {
            Side::Left => x > lo && x <= hi,
            Side::Right | Side::At => x >= lo && x < hi,
        };
        if !inside {
            return 0.0;
        }
        let s = self.diffusion.value_sided(x, side);
        -self.diffusion.slope(x, side) / (s * s)
    }

    fn increasing(&self) -> bool {
        self.increasing
    }

    fn preimage(&self, y: f64) -> Preimage {
        let (lo, hi) = (self.xi - self.delta, self.xi + self.delta);
        let (s_lo, s_hi) = self.edge_values();
        let (h_lo, h_hi) = (self.value(lo), self.value(hi));
        let past_lo = if self.increasing { y <= h_lo } else { y >= h_lo };
        let past_hi = if self.increasing { y >= h_hi } else { y <= h_hi };
        if past_lo {
            Preimage::Exact(lo + (y - h_lo) * s_lo)
        } else if past_hi {
            Preimage::Exact(hi + (y - h_hi) * s_hi)
        } else {
            Preimage::Bracket(lo, hi)
        }
    }
}

/// `G^Z = G ∘ H^{-1}`, with derivatives from the chain rule.
#[derive(Debug)]
pub struct ComposedWithInverse<'a, G: Transform, H: Transform> {
    pub outer: &'a G,
    pub inner: &'a H,
}

impl<G: Transform, H: Transform> Clone for ComposedWithInverse<'_, G, H> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<G: Transform, H: Transform> Copy for ComposedWithInverse<'_, G, H> {}

impl<G: Transform, H: Transform> ComposedWithInverse<'_, G, H> {
    fn base(&self, z: f64) -> f64 {
        invert_transform(self.inner, z).unwrap_or(f64::NAN)
    }

    fn base_side(&self, side: Side) -> Side {
        match (side, self.inner.increasing()) {
            (Side::Left, false) => Side::Right,
            (Side::Right, false) | (Side::At, false) => Side::Left,
            (side, true) => side,
        }
    }
}

impl<G: Transform, H: Transform> Transform for ComposedWithInverse<'_, G, H> {
    fn value(&self, z: f64) -> f64 {
        self.outer.value(self.base(z))
    }

    fn d1(&self, z: f64) -> f64 {
        let x = self.base(z);
        self.outer.d1(x) / self.inner.d1(x)
    }

    fn d2(&self, z: f64, side: Side) -> f64 {
        let x = self.base(z);
        let s = self.base_side(side);
        let h1 = self.inner.d1(x);
        (self.outer.d2(x, s) * h1 - self.outer.d1(x) * self.inner.d2(x, s)) / (h1 * h1 * h1)
    }

    fn increasing(&self) -> bool {
        self.outer.increasing() == self.inner.increasing()
    }
}

/// The equation for `Y = T(X)` when `X` follows `base`.
///
/// `mu~ = (T' mu + T'' sigma^2 / 2) ∘ T^{-1}`, `sigma~ = (T' sigma) ∘ T^{-1}`.
#[derive(Clone, Debug)]
pub struct TransformedModel<T, D> {
    transform: T,
    base: D,
    pub x0: f64,
    pub horizon: f64,
}

impl<T: Transform, D: Dynamics> TransformedModel<T, D> {
    /// `base_x0` is the initial value of the untransformed equation.
    pub fn new(transform: T, base: D, base_x0: f64, horizon: f64) -> Self {
        let x0 = transform.value(base_x0);
        Self {
            transform,
            base,
            x0,
            horizon,
        }
    }

    pub fn transform(&self) -> &T {
        &self.transform
    }

    pub fn base(&self) -> &D {
        &self.base
    }

    /// Untransformed state of `y`.
    pub fn state_of(&self, y: f64) -> Result<f64> {
        invert_transform(&self.transform, y)
    }
}

impl<T: Transform, D: Dynamics> Dynamics for TransformedModel<T, D> {
    #[inline]
    fn local(&self, y: f64, side: Side) -> LocalCoefficients {
        let x = invert_transform(&self.transform, y).unwrap_or(f64::NAN);
        let side = if self.transform.increasing() {
            side
        } else {
            match side {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
                Side::At => Side::At,
            }
        };
        let c = self.base.local(x, side);
        let g1 = self.transform.d1(x);
        let g2 = self.transform.d2(x, side);
        LocalCoefficients {
            drift: g1 * c.drift + 0.5 * g2 * c.diffusion * c.diffusion,
            diffusion: g1 * c.diffusion,
            diffusion_slope: (g2 * c.diffusion + g1 * c.diffusion_slope) / g1,
        }
    }
}

/// The model of `G(X)`.
pub fn transformed_coefficients(g: &TransformG, model: &SdeModel) -> TransformedModel<TransformG, SdeModel> {
    TransformedModel::new(g.clone(), model.clone(), model.x0, model.horizon)
}

/// `H` for `model` on the window `(xi, delta)`.
pub fn lamperti_transform(model: &SdeModel, xi: f64, delta: f64) -> Result<TransformH> {
    TransformH::new(&model.diffusion, xi, delta)
}
