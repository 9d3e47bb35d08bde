//! Manufactured solutions: closed-form cosine profiles with zero normal
//! derivative on the boundary, and the source terms that make them exact.

use std::f64::consts::PI;

use serde::Serialize;

use super::{run, SolverConfig, SolverError};
use crate::grid::{self, Field, GridSpec};
use crate::model::{Carrier, Params, StateTriple};

/// `mean + amp * exp(-decay t) * cos(kx pi x / lx) * cos(ky pi y / ly)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Profile {
    pub mean: f64,
    pub amp: f64,
    pub decay: f64,
    pub kx: u32,
    pub ky: u32,
}

/// Value, time derivative, gradient and Laplacian at one point.
#[derive(Debug, Clone, Copy)]
struct Jet {
    val: f64,
    dt: f64,
    gx: f64,
    gy: f64,
    lap: f64,
}

impl Profile {
    pub fn constant(mean: f64) -> Self {
        Self { mean, amp: 0.0, decay: 0.0, kx: 0, ky: 0 }
    }

    pub fn value(&self, grid: &GridSpec, x: f64, y: f64, t: f64) -> f64 {
        self.jet(grid, x, y, t).val
    }

    fn jet(&self, grid: &GridSpec, x: f64, y: f64, t: f64) -> Jet {
        let ax = self.kx as f64 * PI / grid.lx();
        let ay = if grid.is_1d() { 0.0 } else { self.ky as f64 * PI / grid.ly() };
        let (sx, cx) = (ax * x).sin_cos();
        let (sy, cy) = (ay * y).sin_cos();
        let amp = self.amp * (-self.decay * t).exp();
        Jet {
            val: self.mean + amp * cx * cy,
            dt: -self.decay * amp * cx * cy,
            gx: -amp * ax * sx * cy,
            gy: -amp * ay * cx * sy,
            lap: -amp * (ax * ax + ay * ay) * cx * cy,
        }
    }

    pub fn field(&self, grid: &GridSpec, t: f64) -> Field {
        Field::from_fn(*grid, |x, y| self.value(grid, x, y, t))
    }
}

/// Manufactured solution for all three species. With `kinetics = false` the
/// reaction terms are switched off in the solver and represented only through
/// the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MmsDescriptor {
    pub u: Profile,
    pub v: Profile,
    pub w: Profile,
    pub kinetics: bool,
}

/// Expected minimal observed order of a descriptor family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    DiffusionOnly,
    Full,
}

impl Mode {
    pub fn expected_order(self) -> f64 {
        match self {
            Mode::DiffusionOnly => 1.9,
            Mode::Full => 0.9,
        }
    }
}

impl MmsDescriptor {
    /// Smooth decaying profiles, intended for `xi = chi = 0` and no kinetics.
    pub fn diffusion_only() -> Self {
        Self {
            u: Profile { mean: 1.0, amp: 0.5, decay: 0.5, kx: 1, ky: 1 },
            v: Profile { mean: 1.0, amp: 0.4, decay: 0.3, kx: 2, ky: 1 },
            w: Profile { mean: 1.0, amp: 0.3, decay: 0.2, kx: 1, ky: 2 },
            kinetics: false,
        }
    }

    /// Profiles exercising diffusion, both taxis fluxes and the kinetics.
    pub fn full() -> Self {
        Self {
            u: Profile { mean: 1.0, amp: 0.5, decay: 0.5, kx: 1, ky: 1 },
            v: Profile { mean: 1.0, amp: 0.4, decay: 0.3, kx: 1, ky: 1 },
            w: Profile { mean: 1.0, amp: 0.3, decay: 0.2, kx: 2, ky: 1 },
            kinetics: true,
        }
    }

    pub fn constant(u: f64, v: f64, w: f64, kinetics: bool) -> Self {
        Self { u: Profile::constant(u), v: Profile::constant(v), w: Profile::constant(w), kinetics }
    }

    pub fn exact(&self, grid: &GridSpec, t: f64) -> StateTriple {
        StateTriple {
            u: self.u.field(grid, t),
            v: self.v.field(grid, t),
            w: self.w.field(grid, t),
            t,
        }
    }

    /// Source terms `s = d/dt exact - (operator applied to exact)` at the
    /// cell centers, one vector per species.
    pub fn sources(&self, grid: &GridSpec, p: &Params, carrier: &Carrier, t: f64) -> [Vec<f64>; 3] {
        let n = grid.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            let (i, j) = grid.coords(k);
            let (x, y) = grid.center(i, j);
            let u = self.u.jet(grid, x, y, t);
            let v = self.v.jet(grid, x, y, t);
            let w = self.w.jet(grid, x, y, t);

            let sv = carrier.apply(v.val);
            let dsv = carrier.derivative(v.val);
            let prey_taxis = dsv * (v.gx * u.gx + v.gy * u.gy) + sv * u.lap;

            let uv_gx = u.val * v.gx + v.val * u.gx;
            let uv_gy = u.val * v.gy + v.val * u.gy;
            let uv_lap = u.val * v.lap + v.val * u.lap + 2.0 * (u.gx * v.gx + u.gy * v.gy);
            let sw = carrier.apply(w.val);
            let dsw = carrier.derivative(w.val);
            let alarm_taxis = dsw * (w.gx * uv_gx + w.gy * uv_gy) + sw * uv_lap;

            let (f, g, h) = if self.kinetics {
                (p.f(u.val, v.val, w.val), p.g(u.val, v.val, w.val), p.h(u.val, v.val, w.val))
            } else {
                (0.0, 0.0, 0.0)
            };
            out[0][k] = u.dt - p.d1 * u.lap - f;
            out[1][k] = v.dt - p.d2 * v.lap + p.xi * prey_taxis - g;
            out[2][k] = w.dt - p.d3 * w.lap + p.chi * alarm_taxis - h;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmsLevel {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub steps: usize,
    pub l2_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub levels: Vec<MmsLevel>,
    /// Observed order between consecutive levels.
    pub orders: Vec<f64>,
    pub observed_order: f64,
    pub expected_order: f64,
    /// False when some refinement failed to reduce the error.
    pub monotone: bool,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.observed_order >= self.expected_order
    }

    pub fn render(&self) -> String {
        let mut s = String::from("level  nx    ny    h            steps    l2_error      order\n");
        for (k, lvl) in self.levels.iter().enumerate() {
            let order = if k == 0 { "-".to_string() } else { format!("{:.3}", self.orders[k - 1]) };
            s.push_str(&format!(
                "{:<6} {:<5} {:<5} {:<12.5e} {:<8} {:<13.6e} {}\n",
                k, lvl.nx, lvl.ny, lvl.h, lvl.steps, lvl.l2_error, order
            ));
        }
        s.push_str(&format!(
            "observed order {:.3} (required >= {:.2}){}: {}\n",
            self.observed_order,
            self.expected_order,
            if self.monotone { "" } else { ", error ladder NOT monotone" },
            if self.passed() { "PASS" } else { "FAIL" }
        ));
        s
    }
}

/// Runs the descriptor on every grid of the ladder (coarse to fine) and
/// measures the L2 error against the exact solution at `cfg.t_end`.
pub fn mms_run(
    descriptor: &MmsDescriptor,
    p: &Params,
    cfg: &SolverConfig,
    grids: &[GridSpec],
    mode: Mode,
) -> Result<ConvergenceReport, SolverError> {
    if grids.len() < 3 {
        return Err(SolverError::Config(format!(
            "a convergence ladder needs at least 3 grids, got {}",
            grids.len()
        )));
    }
    let cfg = SolverConfig { mms: Some(*descriptor), snapshot_interval: cfg.t_end.max(f64::MIN_POSITIVE), ..cfg.clone() };
    let mut levels = Vec::with_capacity(grids.len());
    for g in grids {
        let initial = descriptor.exact(g, 0.0);
        let traj = run(&initial, p, &cfg)?;
        let exact = descriptor.exact(g, cfg.t_end);
        let last = traj.last();
        let err2: f64 = [(&last.u, &exact.u), (&last.v, &exact.v), (&last.w, &exact.w)]
            .iter()
            .map(|(a, b)| grid::norms(&a.axpy(-1.0, b)).l2.powi(2))
            .sum();
        levels.push(MmsLevel {
            nx: g.nx(),
            ny: g.ny(),
            h: g.h_min(),
            steps: traj.dt_history.len(),
            l2_error: err2.sqrt(),
        });
    }
    let orders: Vec<f64> = levels
        .windows(2)
        .map(|w| (w[0].l2_error / w[1].l2_error).ln() / (w[0].h / w[1].h).ln())
        .collect();
    let monotone = levels.windows(2).all(|w| w[1].l2_error < w[0].l2_error);
    let observed_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConvergenceReport {
        levels,
        orders,
        observed_order,
        expected_order: mode.expected_order(),
        monotone,
    })
}
