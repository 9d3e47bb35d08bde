//! Model coefficients, reaction kinetics and the smooth taxis cutoff.

use std::sync::OnceLock;

use thiserror::Error;

use crate::grid::{Field, GridError, GridSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter {name} = {value} violates {rule}")]
    Parameter { name: &'static str, value: f64, rule: &'static str },
    #[error("density arguments must be nonnegative, got ({u}, {v}, {w})")]
    NegativeDensity { u: f64, v: f64, w: f64 },
    #[error("cutoff argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("regularization parameter must lie in (0, 1], got {0}")]
    InvalidEps(f64),
    #[error("{species} is negative ({value}) at cell ({i}, {j})")]
    NegativeState { species: &'static str, i: usize, j: usize, value: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// All model coefficients. Every coefficient is strictly positive except the
/// prey-taxis sensitivity `xi`, which may vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub xi: f64,
    pub chi: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl Params {
    /// Every coefficient set to one.
    pub fn unit() -> Self {
        Self {
            d1: 1.0,
            d2: 1.0,
            d3: 1.0,
            xi: 1.0,
            chi: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            mu1: 1.0,
            mu2: 1.0,
            mu3: 1.0,
            a1: 1.0,
            a2: 1.0,
            a3: 1.0,
            b1: 1.0,
            b2: 1.0,
            b3: 1.0,
        }
    }

    pub fn named(&self) -> [(&'static str, f64); 17] {
        [
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
            ("xi", self.xi),
            ("chi", self.chi),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("mu3", self.mu3),
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("b1", self.b1),
            ("b2", self.b2),
            ("b3", self.b3),
        ]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.check(false)
    }

    /// As [`Params::validate`], but also admits `chi = 0`. Only meaningful for
    /// manufactured-solution runs, whose sources carry the full operator.
    pub fn validate_allowing_zero_chi(&self) -> Result<(), ModelError> {
        self.check(true)
    }

    fn check(&self, zero_chi: bool) -> Result<(), ModelError> {
        for (name, value) in self.named() {
            if name == "xi" || (zero_chi && name == "chi") {
                if !(value.is_finite() && value >= 0.0) {
                    let rule = if name == "xi" { "xi >= 0" } else { "chi >= 0" };
                    return Err(ModelError::Parameter { name, value, rule });
                }
            } else if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::Parameter { name, value, rule: "strict positivity" });
            }
        }
        let (e1, e2) = self.eta();
        if self.b1 * e1 > self.a1 || self.b2 * e2 > self.a2 || self.b3 * e2 > self.a3 * e1 {
            return Err(ModelError::Parameter {
                name: "eta",
                value: e2,
                rule: "b1 eta1 <= a1, b2 eta2 <= a2, b3 eta2 <= a3 eta1",
            });
        }
        Ok(())
    }

    /// Weights of the linear combination `u + eta1 v + eta2 w` whose integral
    /// obeys a logistic-type differential inequality. They satisfy
    /// `b1 eta1 <= a1`, `b2 eta2 <= a2` and `b3 eta2 <= a3 eta1`.
    pub fn eta(&self) -> (f64, f64) {
        let e1 = 0.5 * 1f64.min(self.a1 / self.b1);
        let e2 = 0.5 * 1f64.min(self.a2 / self.b2).min(self.a3 * e1 / self.b3);
        (e1, e2)
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda1.max(self.lambda2).max(self.lambda3)
    }

    pub fn mu_min(&self) -> f64 {
        self.mu1.min(self.mu2).min(self.mu3)
    }

    pub fn d_max(&self) -> f64 {
        self.d1.max(self.d2).max(self.d3)
    }

    #[inline]
    pub fn f(&self, u: f64, v: f64, w: f64) -> f64 {
        u * (self.lambda1 - self.mu1 * u - self.a1 * v - self.a2 * w)
    }

    #[inline]
    pub fn g(&self, u: f64, v: f64, w: f64) -> f64 {
        v * (self.lambda2 - self.mu2 * v + self.b1 * u - self.a3 * w)
    }

    #[inline]
    pub fn h(&self, u: f64, v: f64, w: f64) -> f64 {
        w * (self.lambda3 - self.mu3 * w + self.b2 * u + self.b3 * v)
    }

    /// Jacobian of `(f, g, h)` with respect to `(u, v, w)`.
    pub fn jacobian(&self, u: f64, v: f64, w: f64) -> [[f64; 3]; 3] {
        [
            [
                self.lambda1 - 2.0 * self.mu1 * u - self.a1 * v - self.a2 * w,
                -self.a1 * u,
                -self.a2 * u,
            ],
            [
                self.b1 * v,
                self.lambda2 - 2.0 * self.mu2 * v + self.b1 * u - self.a3 * w,
                -self.a3 * v,
            ],
            [
                self.b2 * w,
                self.b3 * w,
                self.lambda3 - 2.0 * self.mu3 * w + self.b2 * u + self.b3 * v,
            ],
        ]
    }

    /// Lipschitz bound (max row sum of absolute Jacobian entries) of the
    /// kinetics on the box `[0, su] x [0, sv] x [0, sw]`.
    pub fn kinetic_lipschitz(&self, su: f64, sv: f64, sw: f64) -> f64 {
        let rf = self.lambda1 + 2.0 * self.mu1 * su + self.a1 * sv + self.a2 * sw
            + self.a1 * su
            + self.a2 * su;
        let rg = self.b1 * sv
            + (self.lambda2 + 2.0 * self.mu2 * sv + self.b1 * su + self.a3 * sw)
            + self.a3 * sv;
        let rh = self.b2 * sw
            + self.b3 * sw
            + (self.lambda3 + 2.0 * self.mu3 * sw + self.b2 * su + self.b3 * sv);
        rf.max(rg).max(rh)
    }
}

fn check_nonneg(u: f64, v: f64, w: f64) -> Result<(), ModelError> {
    if u >= 0.0 && v >= 0.0 && w >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::NegativeDensity { u, v, w })
    }
}

/// Prey kinetics `u (lambda1 - mu1 u - a1 v - a2 w)`.
pub fn reaction_f(u: f64, v: f64, w: f64, p: &Params) -> Result<f64, ModelError> {
    check_nonneg(u, v, w)?;
    Ok(p.f(u, v, w))
}

/// Predator kinetics `v (lambda2 - mu2 v + b1 u - a3 w)`.
pub fn reaction_g(u: f64, v: f64, w: f64, p: &Params) -> Result<f64, ModelError> {
    check_nonneg(u, v, w)?;
    Ok(p.g(u, v, w))
}

/// Superpredator kinetics `w (lambda3 - mu3 w + b2 u + b3 v)`.
pub fn reaction_h(u: f64, v: f64, w: f64, p: &Params) -> Result<f64, ModelError> {
    check_nonneg(u, v, w)?;
    Ok(p.h(u, v, w))
}

// ---------------------------------------------------------------------------
// smooth step

#[inline]
fn q(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

#[inline]
fn q_prime(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp() / (x * x)
    } else {
        0.0
    }
}

/// Smooth step: one on `(-inf, 0]`, zero on `[1, inf)`, `C^inf` in between.
/// `step(x) = q(1-x) / (q(x) + q(1-x))` with `q(x) = exp(-1/x)` for `x > 0`.
#[inline]
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        let (a, b) = (q(x), q(1.0 - x));
        b / (a + b)
    }
}

#[inline]
pub fn smooth_step_prime(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let (a, b) = (q(x), q(1.0 - x));
        let (da, db) = (q_prime(x), q_prime(1.0 - x));
        // d/dx b = -db
        -(db * a + b * da) / ((a + b) * (a + b))
    }
}

/// `1 + 2 max |step'|` on `[0, 1]`, sampled once with 10^5 points.
pub fn sigma_prime_bound() -> f64 {
    static BOUND: OnceLock<f64> = OnceLock::new();
    *BOUND.get_or_init(|| {
        const N: usize = 100_000;
        let m = (0..=N)
            .map(|k| smooth_step_prime(k as f64 / N as f64).abs())
            .fold(0.0, f64::max);
        1.0 + 2.0 * m
    })
}

/// The cutoff `s -> s * step(eps s - 1)` that switches taxis off above `2/eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    eps: f64,
    sigma_prime_bound: f64,
}

impl CutoffSpec {
    pub fn new(eps: f64) -> Result<Self, ModelError> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(ModelError::InvalidEps(eps));
        }
        Ok(Self { eps, sigma_prime_bound: sigma_prime_bound() })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn sigma_prime_bound(&self) -> f64 {
        self.sigma_prime_bound
    }

    #[inline]
    pub(crate) fn eval(&self, s: f64) -> f64 {
        s * smooth_step(self.eps * s - 1.0)
    }

    #[inline]
    pub(crate) fn eval_prime(&self, s: f64) -> f64 {
        let x = self.eps * s - 1.0;
        smooth_step(x) + self.eps * s * smooth_step_prime(x)
    }
}

pub fn sigma_eps(s: f64, c: &CutoffSpec) -> Result<f64, ModelError> {
    if !(s >= 0.0) {
        return Err(ModelError::NegativeArgument(s));
    }
    Ok(c.eval(s))
}

pub fn sigma_eps_prime(s: f64, c: &CutoffSpec) -> Result<f64, ModelError> {
    if !(s >= 0.0) {
        return Err(ModelError::NegativeArgument(s));
    }
    Ok(c.eval_prime(s))
}

/// The map applied to a density before it is transported by a taxis flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Carrier {
    Identity,
    Cutoff(CutoffSpec),
}

impl Carrier {
    #[inline]
    pub fn apply(&self, s: f64) -> f64 {
        match self {
            Carrier::Identity => s,
            Carrier::Cutoff(c) => c.eval(s),
        }
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Carrier::Identity => 1.0,
            Carrier::Cutoff(c) => c.eval_prime(s),
        }
    }

    /// Bound on the carrier slope used by the drift step-size restriction.
    pub fn slope_bound(&self) -> f64 {
        match self {
            Carrier::Identity => 1.0,
            Carrier::Cutoff(c) => c.sigma_prime_bound(),
        }
    }

    pub fn apply_field(&self, f: &Field) -> Field {
        match self {
            Carrier::Identity => f.clone(),
            Carrier::Cutoff(c) => f.map(|s| c.eval(s)),
        }
    }
}

/// Population densities `(u, v, w)` at time `t` on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTriple {
    pub u: Field,
    pub v: Field,
    pub w: Field,
    pub t: f64,
}

impl StateTriple {
    pub fn new(u: Field, v: Field, w: Field, t: f64) -> Result<Self, ModelError> {
        u.same_grid(&v)?;
        u.same_grid(&w)?;
        let s = Self { u, v, w, t };
        s.check_nonnegative()?;
        Ok(s)
    }

    pub fn constant(grid: GridSpec, u: f64, v: f64, w: f64) -> Result<Self, ModelError> {
        Self::new(
            Field::constant(grid, u),
            Field::constant(grid, v),
            Field::constant(grid, w),
            0.0,
        )
    }

    pub fn grid(&self) -> &GridSpec {
        self.u.grid()
    }

    pub fn fields(&self) -> [(&'static str, &Field); 3] {
        [("u", &self.u), ("v", &self.v), ("w", &self.w)]
    }

    pub fn check_nonnegative(&self) -> Result<(), ModelError> {
        for (species, f) in self.fields() {
            f.check_finite()?;
            if let Some(k) = f.values().iter().position(|&x| x < 0.0) {
                let (i, j) = f.grid().coords(k);
                return Err(ModelError::NegativeState { species, i, j, value: f.values()[k] });
            }
        }
        Ok(())
    }
}
