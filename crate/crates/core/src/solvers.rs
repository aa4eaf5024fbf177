//! Pathwise schemes driven by a Brownian lattice.

use serde::{Deserialize, Serialize};

use crate::coefficients::{Dynamics, SdeModel};
use crate::error::{Error, Result};
use crate::noise::PathLattice;
use crate::rng::mix64;
use crate::transforms::{invert_near, Transform, TransformG};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyama,
    Milstein,
    /// Milstein on the `G`-transformed equation, mapped back by `G^{-1}`.
    TransformedMilstein,
}

/// States of one scheme run on a driver's times.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionPath {
    times: Vec<f64>,
    values: Vec<f64>,
    scheme: Scheme,
    driver: u64,
}

impl SolutionPath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Fingerprint of the driver lattice this path was computed from.
    pub fn driver(&self) -> u64 {
        self.driver
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn into_lattice(self) -> PathLattice {
        PathLattice::from_parts_unchecked(self.times, self.values)
    }
}

/// Hash of a lattice's bits.
pub fn fingerprint(lattice: &PathLattice) -> u64 {
    lattice
        .times()
        .iter()
        .chain(lattice.values())
        .fold(0x5eed_u64, |h, v| mix64(h ^ v.to_bits()))
}

/// One step of `scheme` (Euler or Milstein) for `d`.
#[inline]
pub fn step<D: Dynamics + ?Sized>(d: &D, milstein: bool, x: f64, dt: f64, dw: f64) -> f64 {
    let c = d.at(x);
    let mut next = x + c.drift * dt + c.diffusion * dw;
    if milstein {
        next += 0.5 * c.diffusion * c.diffusion_slope * (dw * dw - dt);
    }
    next
}

/// Runs Euler (`milstein = false`) or Milstein from `x0`, writing into `out`.
pub(crate) fn integrate_into<D: Dynamics + ?Sized>(
    d: &D,
    milstein: bool,
    x0: f64,
    times: &[f64],
    w: &[f64],
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    out.reserve(times.len());
    out.push(x0);
    let mut x = x0;
    for j in 1..times.len() {
        x = step(d, milstein, x, times[j] - times[j - 1], w[j] - w[j - 1]);
        if !x.is_finite() {
            return Err(Error::Divergence { step: j, time: times[j] });
        }
        out.push(x);
    }
    Ok(())
}

fn solve<D: Dynamics + ?Sized>(d: &D, scheme: Scheme, milstein: bool, x0: f64, driver: &PathLattice) -> Result<SolutionPath> {
    let mut values = Vec::new();
    integrate_into(d, milstein, x0, driver.times(), driver.values(), &mut values)?;
    Ok(SolutionPath {
        times: driver.times().to_vec(),
        values,
        scheme,
        driver: fingerprint(driver),
    })
}

/// `x_{j+1} = x_j + mu(x_j) dt + sigma(x_j) dW`.
pub fn euler_maruyama<D: Dynamics + ?Sized>(model: &D, x0: f64, driver: &PathLattice) -> Result<SolutionPath> {
    solve(model, Scheme::EulerMaruyama, false, x0, driver)
}

/// Euler plus `sigma sigma' (dW^2 - dt) / 2`.
pub fn milstein<D: Dynamics + ?Sized>(model: &D, x0: f64, driver: &PathLattice) -> Result<SolutionPath> {
    solve(model, Scheme::Milstein, true, x0, driver)
}

/// Milstein in `Y = G(X)` coordinates, tracking `X = G^{-1}(Y)` alongside.
///
/// Each inverse starts Newton from the previous state, which is within one
/// step of the answer.
#[derive(Clone, Copy, Debug)]
pub struct TransformedStepper<'a> {
    pub model: &'a SdeModel,
    pub g: &'a TransformG,
}

impl TransformedStepper<'_> {
    /// Transformed coefficients at the untransformed state `x`.
    #[inline]
    fn coefficients(&self, x: f64) -> (f64, f64, f64) {
        let c = self.model.at(x);
        if self.g.is_identity() {
            return (c.drift, c.diffusion, c.diffusion_slope);
        }
        let g1 = self.g.d1(x);
        let g2 = self.g.d2(x, crate::coefficients::Side::At);
        (
            g1 * c.drift + 0.5 * g2 * c.diffusion * c.diffusion,
            g1 * c.diffusion,
            (g2 * c.diffusion + g1 * c.diffusion_slope) / g1,
        )
    }

    /// One step from `(y, x)`; returns the new pair.
    #[inline]
    pub fn step(&self, y: f64, x: f64, dt: f64, dw: f64) -> Result<(f64, f64)> {
        let (mu, sigma, slope) = self.coefficients(x);
        let y = y + mu * dt + sigma * dw + 0.5 * sigma * slope * (dw * dw - dt);
        if !y.is_finite() {
            return Err(Error::Range(y));
        }
        let x = if self.g.is_identity() { y } else { invert_near(self.g, y, Some(x))? };
        Ok((y, x))
    }

    /// Runs from the untransformed `x0`; calls `visit(j, y, x)` at every time.
    pub fn run(&self, x0: f64, times: &[f64], w: &[f64], mut visit: impl FnMut(usize, f64, f64)) -> Result<(f64, f64)> {
        let (mut y, mut x) = (self.g.value(x0), x0);
        visit(0, y, x);
        for j in 1..times.len() {
            (y, x) = self
                .step(y, x, times[j] - times[j - 1], w[j] - w[j - 1])
                .map_err(|_| Error::Divergence { step: j, time: times[j] })?;
            visit(j, y, x);
        }
        Ok((y, x))
    }

    /// Restart in `Y` coordinates from `(y0, x0)` with `x0 = G^{-1}(y0)`.
    pub fn run_from(&self, y0: f64, x0: f64, times: &[f64], w: &[f64]) -> Result<(f64, f64)> {
        let (mut y, mut x) = (y0, x0);
        for j in 1..times.len() {
            (y, x) = self
                .step(y, x, times[j] - times[j - 1], w[j] - w[j - 1])
                .map_err(|_| Error::Divergence { step: j, time: times[j] })?;
        }
        Ok((y, x))
    }
}

/// Milstein on the transformed equation, returned in original coordinates.
pub fn transformed_milstein(model: &SdeModel, g: &TransformG, x0: f64, driver: &PathLattice) -> Result<SolutionPath> {
    let mut values = Vec::with_capacity(driver.len());
    TransformedStepper { model, g }.run(x0, driver.times(), driver.values(), |_, _, x| values.push(x))?;
    Ok(SolutionPath {
        times: driver.times().to_vec(),
        values,
        scheme: Scheme::TransformedMilstein,
        driver: fingerprint(driver),
    })
}

/// Runs `scheme`; `g` is required for the transformed scheme.
pub fn solve_with(model: &SdeModel, g: Option<&TransformG>, scheme: Scheme, x0: f64, driver: &PathLattice) -> Result<SolutionPath> {
    match scheme {
        Scheme::EulerMaruyama => euler_maruyama(model, x0, driver),
        Scheme::Milstein => milstein(model, x0, driver),
        Scheme::TransformedMilstein => {
            let g = g.ok_or_else(|| Error::Precondition("transformed Milstein needs a transform".into()))?;
            transformed_milstein(model, g, x0, driver)
        }
    }
}

/// `x_prev + sigma(x_prev) (W_t - W_{t_prev})` along a driver segment starting at `t_prev`.
pub fn frozen_coefficient_step<D: Dynamics + ?Sized>(model: &D, x_prev: f64, segment: &[f64]) -> Vec<f64> {
    let sigma = model.at(x_prev).diffusion;
    let w0 = segment.first().copied().unwrap_or(0.0);
    segment.iter().map(|w| x_prev + sigma * (w - w0)).collect()
}

/// Runs `scheme` and freezes the state at the first lattice time it leaves `(a, b)`.
///
/// Returns the path and that time, or the last driver time if it never exits.
pub fn solve_until_exit(
    model: &SdeModel,
    g: Option<&TransformG>,
    x0: f64,
    driver: &PathLattice,
    interval: (f64, f64),
    scheme: Scheme,
) -> Result<(SolutionPath, f64)> {
    let (a, b) = interval;
    if !(x0 > a && x0 < b) {
        return Err(Error::Precondition(format!("x0 = {x0} is not inside ({a}, {b})")));
    }
    let times = driver.times();
    let w = driver.values();
    let mut values = Vec::with_capacity(times.len());
    values.push(x0);
    let mut exit = None;
    let stepper = g.map(|g| TransformedStepper { model, g });
    let (mut y, mut x) = (stepper.map_or(x0, |s| s.g.value(x0)), x0);
    for j in 1..times.len() {
        let (dt, dw) = (times[j] - times[j - 1], w[j] - w[j - 1]);
        x = match (scheme, stepper) {
            (Scheme::EulerMaruyama, _) => step(model, false, x, dt, dw),
            (Scheme::Milstein, _) => step(model, true, x, dt, dw),
            (Scheme::TransformedMilstein, Some(s)) => {
                (y, x) = s.step(y, x, dt, dw).map_err(|_| Error::Divergence { step: j, time: times[j] })?;
                x
            }
            (Scheme::TransformedMilstein, None) => {
                return Err(Error::Precondition("transformed Milstein needs a transform".into()));
            }
        };
        if !x.is_finite() {
            return Err(Error::Divergence { step: j, time: times[j] });
        }
        values.push(x);
        if !(x > a && x < b) {
            exit = Some(j);
            break;
        }
    }
    let exit_time = match exit {
        Some(j) => {
            values.resize(times.len(), x);
            times[j]
        }
        None => driver.last_time(),
    };
    Ok((
        SolutionPath {
            times: times.to_vec(),
            values,
            scheme,
            driver: fingerprint(driver),
        },
        exit_time,
    ))
}
