//! Time integration of the classical, full and regularized systems.
//!
//! One step of size `dt` is the symmetric composition
//!
//! ```text
//! K(dt/2) . D(dt/2) . A(dt) . D(dt/2) . K(dt/2)
//! ```
//!
//! * `K` integrates the cell-local kinetics (plus a manufactured source, if
//!   any) with the second-order modified Patankar Runge-Kutta scheme. Gains are
//!   explicit, losses are weighted by `y_new / y_stage`, so `K` maps
//!   nonnegative states to nonnegative states for every `dt`.
//! * `D` is Heun's method (SSP-RK2) on the Neumann diffusion. Each Euler stage
//!   is a convex combination of neighbor values when
//!   `dt/2 * d * (2/hx^2 + 2/hy^2) <= 1`, which `dt <= h^2 / (4 d)` implies.
//! * `A` is SSP-RK2 on the upwind taxis fluxes of `v` (potential `u`) and `w`
//!   (potential `uv`, formed cell-wise). The carrier never exceeds the
//!   density, so a stage stays nonnegative whenever `dt` times the summed
//!   outflow rate of every cell is below one. `A` sub-cycles internally when a
//!   cell with several outflow faces would violate that.
//!
//! Every piece is conservative except the kinetics, and no value is ever
//! clipped: a negative cell after a step is reported as a scheme violation.

pub mod mms;

use thiserror::Error;

use crate::diagnostics::{MonitorRecord, Monitors};
use crate::grid::{self, Field, GridError, GridSpec};
use crate::model::{Carrier, CutoffSpec, ModelError, Params, StateTriple};

pub use mms::{ConvergenceReport, MmsDescriptor, Mode};

const TINY: f64 = 1e-30;
const UNDERFLOW_FRACTION: f64 = 1e-12;
const MAX_SUBCYCLES: usize = 100_000;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("{species} became non-finite at cell ({i}, {j}) near t = {t}")]
    NonFinite { species: &'static str, i: usize, j: usize, t: f64 },
    #[error("scheme violation: {species} = {value:e} < 0 at cell ({i}, {j}) near t = {t}")]
    Negative { species: &'static str, i: usize, j: usize, t: f64, value: f64 },
    #[error(
        "time step underflow at t = {t}: dt = {dt:e} below {limit:e}; possible blow-up \
         ({} monitor records retained)", tail.len()
    )]
    DtUnderflow { t: f64, dt: f64, limit: f64, tail: Vec<MonitorRecord> },
    #[error("taxis transport needed more than {MAX_SUBCYCLES} sub-steps near t = {t}")]
    Subcycling { t: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Which system is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// No prey-taxis (`xi = 0`).
    Classical,
    /// Prey-taxis with unregularized fluxes.
    Full,
    /// Both taxis fluxes transport the cut-off densities.
    Regularized(CutoffSpec),
}

impl Regime {
    pub fn regularized(eps: f64) -> Result<Self, ModelError> {
        Ok(Regime::Regularized(CutoffSpec::new(eps)?))
    }

    pub fn carrier(&self) -> Carrier {
        match self {
            Regime::Regularized(c) => Carrier::Cutoff(*c),
            _ => Carrier::Identity,
        }
    }

    pub fn eps(&self) -> Option<f64> {
        match self {
            Regime::Regularized(c) => Some(c.eps()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Classical => "classical",
            Regime::Full => "full",
            Regime::Regularized(_) => "regularized",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub t_end: f64,
    pub cfl_safety: f64,
    pub regime: Regime,
    pub snapshot_interval: f64,
    pub mms: Option<MmsDescriptor>,
    /// Optional cap on the step size.
    pub dt_max: Option<f64>,
}

impl SolverConfig {
    pub fn new(t_end: f64, regime: Regime) -> Self {
        Self {
            t_end,
            cfl_safety: 0.9,
            regime,
            snapshot_interval: if t_end > 0.0 { t_end / 10.0 } else { 1.0 },
            mms: None,
            dt_max: None,
        }
    }

    pub fn validate(&self, p: &Params) -> Result<(), SolverError> {
        if self.mms.is_some() {
            p.validate_allowing_zero_chi()?;
        } else {
            p.validate()?;
        }
        let bad = |m: String| Err(SolverError::Config(m));
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be finite and nonnegative, got {}", self.t_end));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if !(self.snapshot_interval > 0.0 && self.snapshot_interval.is_finite()) {
            return bad(format!("snapshot_interval must be positive, got {}", self.snapshot_interval));
        }
        if let Some(m) = self.dt_max {
            if !(m > 0.0) {
                return bad(format!("dt_max must be positive, got {m}"));
            }
        }
        if self.regime == Regime::Classical && p.xi != 0.0 {
            return bad(format!("classical regime requires xi = 0, got xi = {}", p.xi));
        }
        Ok(())
    }

    fn kinetics_enabled(&self) -> bool {
        self.mms.as_ref().map_or(true, |m| m.kinetics)
    }
}

/// Saved states, per-step monitor records and accepted step sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<StateTriple>,
    pub monitors: Vec<MonitorRecord>,
    pub dt_history: Vec<f64>,
}

impl Trajectory {
    pub fn grid(&self) -> &GridSpec {
        self.snapshots[0].grid()
    }

    pub fn initial(&self) -> &StateTriple {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &StateTriple {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Exact bitwise comparison of all stored numbers.
    pub fn bitwise_eq(&self, other: &Trajectory) -> bool {
        let bits = |xs: &[f64]| xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.snapshots.len() == other.snapshots.len()
            && self.monitors.len() == other.monitors.len()
            && bits(&self.dt_history) == bits(&other.dt_history)
            && self.snapshots.iter().zip(&other.snapshots).all(|(a, b)| {
                a.t.to_bits() == b.t.to_bits()
                    && bits(a.u.values()) == bits(b.u.values())
                    && bits(a.v.values()) == bits(b.v.values())
                    && bits(a.w.values()) == bits(b.w.values())
            })
            && self
                .monitors
                .iter()
                .zip(&other.monitors)
                .all(|(a, b)| row_bits(a) == row_bits(b))
    }
}

fn row_bits(m: &MonitorRecord) -> Vec<Option<u64>> {
    m.as_row().into_iter().map(|x| x.map(f64::to_bits)).collect()
}

/// Semi-discrete right-hand side.
pub fn rhs(
    state: &StateTriple,
    p: &Params,
    cfg: &SolverConfig,
) -> Result<(Field, Field, Field), SolverError> {
    state.check_nonnegative()?;
    let carrier = cfg.regime.carrier();
    let (u, v, w) = (&state.u, &state.v, &state.w);
    let uv = u.product(v);
    let mut du = grid::laplacian(u)?.scaled(p.d1);
    let mut dv = grid::laplacian(v)?
        .scaled(p.d2)
        .axpy(-p.xi, &grid::taxis_divergence(&carrier.apply_field(v), u)?);
    let mut dw = grid::laplacian(w)?
        .scaled(p.d3)
        .axpy(-p.chi, &grid::taxis_divergence(&carrier.apply_field(w), &uv)?);
    let kinetics = cfg.kinetics_enabled();
    let sources = cfg.mms.as_ref().map(|m| m.sources(state.grid(), p, &carrier, state.t));
    for k in 0..state.grid().len() {
        let (a, b, c) = (u.values()[k], v.values()[k], w.values()[k]);
        if kinetics {
            du.values_mut()[k] += p.f(a, b, c);
            dv.values_mut()[k] += p.g(a, b, c);
            dw.values_mut()[k] += p.h(a, b, c);
        }
        if let Some(s) = &sources {
            du.values_mut()[k] += s[0][k];
            dv.values_mut()[k] += s[1][k];
            dw.values_mut()[k] += s[2][k];
        }
    }
    for (species, f) in [("u", &du), ("v", &dv), ("w", &dw)] {
        if let Err(GridError::NonFinite { i, j, .. }) = f.check_finite() {
            return Err(SolverError::NonFinite { species, i, j, t: state.t });
        }
    }
    Ok((du, dv, dw))
}

/// The three step-size restrictions before the safety factor is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtCandidates {
    pub diffusion: f64,
    pub drift: f64,
    pub kinetic: f64,
}

impl DtCandidates {
    pub fn min(&self) -> f64 {
        self.diffusion.min(self.drift).min(self.kinetic)
    }
}

pub fn dt_candidates(state: &StateTriple, p: &Params, cfg: &SolverConfig) -> DtCandidates {
    let g = state.grid();
    let h = g.h_min();
    let slope = cfg.regime.carrier().slope_bound();
    let uv = state.u.product(&state.v);
    let steepest = |f: &Field| {
        let vals = f.values();
        let mut m = 0.0f64;
        g.visit_faces(|l, r, spacing, _, _| m = m.max(((vals[r] - vals[l]) / spacing).abs()));
        m
    };
    let speed_v = if p.xi > 0.0 { p.xi * steepest(&state.u) } else { 0.0 };
    let speed_w = p.chi * steepest(&uv);
    let speed = slope * speed_v.max(speed_w);
    let lipschitz = if cfg.kinetics_enabled() {
        p.kinetic_lipschitz(state.u.max(), state.v.max(), state.w.max())
    } else {
        0.0
    };
    DtCandidates {
        diffusion: h * h / (4.0 * p.d_max()),
        drift: h / (speed + TINY),
        kinetic: 1.0 / (lipschitz + TINY),
    }
}

/// `cfl_safety * min(h^2 / (4 max d), h / drift speed, 1 / L)`.
pub fn stable_dt(state: &StateTriple, p: &Params, cfg: &SolverConfig) -> Result<f64, SolverError> {
    let dt = cfg.cfl_safety * dt_candidates(state, p, cfg).min();
    let limit = UNDERFLOW_FRACTION * cfg.t_end;
    if !(dt >= limit) || dt == 0.0 {
        return Err(SolverError::DtUnderflow { t: state.t, dt, limit, tail: Vec::new() });
    }
    Ok(dt)
}

/// Advances `state` by `dt`. Positivity is guaranteed for `dt <= stable_dt`.
pub fn step(
    state: &StateTriple,
    p: &Params,
    cfg: &SolverConfig,
    dt: f64,
) -> Result<StateTriple, SolverError> {
    let grid = *state.grid();
    let t0 = state.t;
    let half = 0.5 * dt;
    let carrier = cfg.regime.carrier();
    let sources = |t: f64| cfg.mms.as_ref().map(|m| m.sources(&grid, p, &carrier, t));
    let kinetics = cfg.kinetics_enabled();

    let mut y = [state.u.clone(), state.v.clone(), state.w.clone()];
    kinetic_substep(&mut y, p, kinetics, half, sources(t0), sources(t0 + half));
    diffusion_substep(&mut y, p, half);
    transport_substep(&mut y, p, &carrier, dt, t0)?;
    diffusion_substep(&mut y, p, half);
    kinetic_substep(&mut y, p, kinetics, half, sources(t0 + half), sources(t0 + dt));

    let t = t0 + dt;
    let [u, v, w] = y;
    for (species, f) in [("u", &u), ("v", &v), ("w", &w)] {
        for (k, &x) in f.values().iter().enumerate() {
            let (i, j) = grid.coords(k);
            if !x.is_finite() {
                return Err(SolverError::NonFinite { species, i, j, t });
            }
            if x < 0.0 {
                return Err(SolverError::Negative { species, i, j, t, value: x });
            }
        }
    }
    Ok(StateTriple { u, v, w, t })
}

type Sources = Option<[Vec<f64>; 3]>;

/// Production and destruction rates of the three species in one cell.
#[inline]
fn rates(p: &Params, kinetics: bool, y: [f64; 3], s: Option<[f64; 3]>) -> ([f64; 3], [f64; 3]) {
    let [u, v, w] = y;
    let (mut prod, mut dest) = if kinetics {
        (
            [p.lambda1 * u, (p.lambda2 + p.b1 * u) * v, (p.lambda3 + p.b2 * u + p.b3 * v) * w],
            [
                (p.mu1 * u + p.a1 * v + p.a2 * w) * u,
                (p.mu2 * v + p.a3 * w) * v,
                p.mu3 * w * w,
            ],
        )
    } else {
        ([0.0; 3], [0.0; 3])
    };
    if let Some(s) = s {
        for c in 0..3 {
            if s[c] >= 0.0 {
                prod[c] += s[c];
            } else {
                dest[c] -= s[c];
            }
        }
    }
    (prod, dest)
}

/// `(base + dt * prod) * weight / (weight + dt * dest)`, the Patankar-weighted
/// update; without destruction it reduces to the explicit gain.
#[inline]
fn patankar(base: f64, prod: f64, dest: f64, weight: f64, dt: f64) -> f64 {
    let num = base + dt * prod;
    let den = weight + dt * dest;
    if dest == 0.0 {
        num
    } else if den > 0.0 {
        num * (weight / den)
    } else {
        0.0
    }
}

fn kinetic_substep(
    y: &mut [Field; 3],
    p: &Params,
    kinetics: bool,
    dt: f64,
    s_start: Sources,
    s_end: Sources,
) {
    if !kinetics && s_start.is_none() {
        return;
    }
    let n = y[0].values().len();
    let at = |s: &Sources, k: usize| s.as_ref().map(|s| [s[0][k], s[1][k], s[2][k]]);
    for k in 0..n {
        let y0 = [y[0].values()[k], y[1].values()[k], y[2].values()[k]];
        let (p0, d0) = rates(p, kinetics, y0, at(&s_start, k));
        let mut y1 = [0.0; 3];
        for c in 0..3 {
            y1[c] = patankar(y0[c], p0[c], d0[c], y0[c], dt);
        }
        let (p1, d1) = rates(p, kinetics, y1, at(&s_end, k));
        for c in 0..3 {
            y[c].values_mut()[k] =
                patankar(y0[c], 0.5 * (p0[c] + p1[c]), 0.5 * (d0[c] + d1[c]), y1[c], dt);
        }
    }
}

fn diffusion_substep(y: &mut [Field; 3], p: &Params, dt: f64) {
    for (f, d) in y.iter_mut().zip([p.d1, p.d2, p.d3]) {
        let s1 = f.axpy(dt * d, &grid::laplacian_unchecked(f));
        let s2 = s1.axpy(dt * d, &grid::laplacian_unchecked(&s1));
        *f = f.zip_map(&s2, |a, b| 0.5 * (a + b));
    }
}

/// Largest per-cell outflow rate of the upwind scheme transporting a density
/// along `coef * grad(potential)`, per unit density.
fn max_outflow_rate(potential: &Field, coef: f64) -> f64 {
    if coef == 0.0 {
        return 0.0;
    }
    let g = potential.grid();
    let inv_area = 1.0 / g.cell_area();
    let vals = potential.values();
    let mut rate = vec![0.0; g.len()];
    g.visit_faces(|l, r, spacing, width, _| {
        let jump = vals[r] - vals[l];
        let q = coef * jump.abs() / spacing * width * inv_area;
        if jump > 0.0 {
            rate[l] += q;
        } else if jump < 0.0 {
            rate[r] += q;
        }
    });
    rate.into_iter().fold(0.0, f64::max)
}

fn taxis_euler(
    v: &Field,
    w: &Field,
    u: &Field,
    p: &Params,
    carrier: &Carrier,
    dt: f64,
) -> (Field, Field) {
    let uv = u.product(v);
    let v1 = if p.xi > 0.0 {
        v.axpy(-dt * p.xi, &grid::taxis_divergence_unchecked(&carrier.apply_field(v), u))
    } else {
        v.clone()
    };
    let w1 = w.axpy(-dt * p.chi, &grid::taxis_divergence_unchecked(&carrier.apply_field(w), &uv));
    (v1, w1)
}

fn transport_substep(
    y: &mut [Field; 3],
    p: &Params,
    carrier: &Carrier,
    dt: f64,
    t: f64,
) -> Result<(), SolverError> {
    // keep a sliver of headroom so rounding in the flux balance cannot push a
    // fully drained cell below zero
    const FILL: f64 = 1.0 - 1e-9;
    let u = y[0].clone();
    let rate_v = max_outflow_rate(&u, p.xi);
    let mut remaining = dt;
    let mut cycles = 0;
    while remaining > 0.0 {
        cycles += 1;
        if cycles > MAX_SUBCYCLES {
            return Err(SolverError::Subcycling { t });
        }
        let (v, w) = (&y[1], &y[2]);
        let rate0 = rate_v.max(max_outflow_rate(&u.product(v), p.chi));
        let mut sub = if rate0 * remaining <= FILL { remaining } else { FILL / rate0 };
        let (v2, w2) = loop {
            let (v1, w1) = taxis_euler(v, w, &u, p, carrier, sub);
            let rate1 = rate_v.max(max_outflow_rate(&u.product(&v1), p.chi));
            if rate1 * sub <= FILL {
                break taxis_euler(&v1, &w1, &u, p, carrier, sub);
            }
            sub = (FILL / rate1).min(0.5 * sub);
        };
        let v_new = v.zip_map(&v2, |a, b| 0.5 * (a + b));
        let w_new = w.zip_map(&w2, |a, b| 0.5 * (a + b));
        y[1] = v_new;
        y[2] = w_new;
        if sub >= remaining {
            break;
        }
        remaining -= sub;
    }
    Ok(())
}

/// Integrates from `initial` to `cfg.t_end`.
pub fn run(initial: &StateTriple, p: &Params, cfg: &SolverConfig) -> Result<Trajectory, SolverError> {
    cfg.validate(p)?;
    initial.check_nonnegative()?;
    let mut state = StateTriple { t: 0.0, ..initial.clone() };
    let mut monitors = Monitors::new(&state, p, &cfg.regime, cfg.mms.is_none())?;
    let mut traj = Trajectory {
        snapshots: vec![state.clone()],
        monitors: vec![monitors.record(&state, 0.0)],
        dt_history: Vec::new(),
    };
    let t_end = cfg.t_end;
    if t_end == 0.0 {
        return Ok(traj);
    }
    let interval = cfg.snapshot_interval;
    // tolerance below which a remaining gap to a target time is absorbed
    let snap_eps = 1e-9 * interval.min(t_end);
    let mut next_index: u64 = 1;
    let next_target = |k: u64| {
        let t = k as f64 * interval;
        if t >= t_end - snap_eps {
            t_end
        } else {
            t
        }
    };
    let mut target = next_target(next_index);
    while state.t < t_end {
        let dt_stable = match stable_dt(&state, p, cfg) {
            Ok(dt) => dt,
            Err(SolverError::DtUnderflow { t, dt, limit, .. }) => {
                let keep = traj.monitors.len().saturating_sub(64);
                let tail = traj.monitors.split_off(keep);
                return Err(SolverError::DtUnderflow { t, dt, limit, tail });
            }
            Err(e) => return Err(e),
        };
        let mut dt = cfg.dt_max.map_or(dt_stable, |m| dt_stable.min(m));
        let hits = state.t + dt >= target - snap_eps;
        if hits {
            dt = target - state.t;
        }
        let mut next = step(&state, p, cfg, dt)?;
        if hits {
            next.t = target;
        }
        state = next;
        traj.dt_history.push(dt);
        traj.monitors.push(monitors.record(&state, dt));
        if hits {
            traj.snapshots.push(state.clone());
            if target >= t_end {
                break;
            }
            next_index += 1;
            target = next_target(next_index);
        }
    }
    Ok(traj)
}
