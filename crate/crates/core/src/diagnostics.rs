//! Per-step monitors and the audits of the a priori estimates.
//!
//! All cumulative space-time integrals use the trapezoid rule on the accepted
//! step sequence. Every audit reads only the trajectory (its first snapshot
//! and its monitor records) and the parameters, so re-auditing a reloaded run
//! reproduces the original report.

use std::fmt;

use serde::Serialize;

use crate::grid::{self, Field};
use crate::model::{Carrier, ModelError, Params, StateTriple};
use crate::solver::{Regime, Trajectory};

/// Relative slack granted to the bound audits.
pub const BOUND_TOL: f64 = 1e-3;
/// Slack of the mass inequality, relative to `1 + |mass of w0|`.
pub const MASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BoundKind {
    L1,
    SupU,
    SupV,
    SupW,
    Mass,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] =
        [BoundKind::L1, BoundKind::SupU, BoundKind::SupV, BoundKind::SupW, BoundKind::Mass];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::L1 => "l1",
            BoundKind::SupU => "sup_u",
            BoundKind::SupV => "sup_v",
            BoundKind::SupW => "sup_w",
            BoundKind::Mass => "mass",
        }
    }

    /// Smallest margin that still passes.
    pub fn threshold(self) -> f64 {
        match self {
            BoundKind::Mass => -MASS_TOL,
            _ => -BOUND_TOL,
        }
    }
}

/// Audited quantities after one accepted step. Margins are relative slacks:
/// `1 - value / bound` for upper bounds, `r / (1 + |mass of w0|)` for the mass
/// inequality. A margin is negative exactly when the inequality is violated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub dt: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub mass_w: f64,
    pub comb_mass: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub sup_w: f64,
    pub l2_u: f64,
    pub l2_v: f64,
    pub l2_w: f64,
    pub grad_u_sq: f64,
    pub grad_v_sq: f64,
    pub grad_uv_sq: f64,
    pub logw_grad_sq: f64,
    pub cum_lap_u_sq: f64,
    pub gn_ratio_u: Option<f64>,
    pub bound_margins: Vec<(BoundKind, f64)>,
    pub cum_grad_v_sq: f64,
    pub cum_grad_uv_sq: f64,
    pub cum_logw_grad_sq: f64,
    /// Trapezoid increment over this step of the 6/5-power integral of the
    /// v-equation force (taxis plus kinetics).
    pub rhs_v_l65: f64,
    pub cum_rhs_v_l65: f64,
    pub int_h: f64,
    pub cum_h: f64,
}

impl MonitorRecord {
    pub const COLUMNS: [&'static str; 30] = [
        "t",
        "dt",
        "mass_u",
        "mass_v",
        "mass_w",
        "comb_mass",
        "sup_u",
        "sup_v",
        "sup_w",
        "l2_u",
        "l2_v",
        "l2_w",
        "grad_u_sq",
        "grad_v_sq",
        "grad_uv_sq",
        "logw_grad_sq",
        "cum_lap_u_sq",
        "gn_ratio_u",
        "margin_l1",
        "margin_sup_u",
        "margin_sup_v",
        "margin_sup_w",
        "margin_mass",
        "cum_grad_v_sq",
        "cum_grad_uv_sq",
        "cum_logw_grad_sq",
        "rhs_v_l65",
        "cum_rhs_v_l65",
        "int_h",
        "cum_h",
    ];

    pub fn margin(&self, kind: BoundKind) -> Option<f64> {
        self.bound_margins.iter().find(|(k, _)| *k == kind).map(|(_, m)| *m)
    }

    /// The record as one row in `COLUMNS` order; absent entries are `None`.
    pub fn as_row(&self) -> Vec<Option<f64>> {
        let mut row = vec![
            Some(self.t),
            Some(self.dt),
            Some(self.mass_u),
            Some(self.mass_v),
            Some(self.mass_w),
            Some(self.comb_mass),
            Some(self.sup_u),
            Some(self.sup_v),
            Some(self.sup_w),
            Some(self.l2_u),
            Some(self.l2_v),
            Some(self.l2_w),
            Some(self.grad_u_sq),
            Some(self.grad_v_sq),
            Some(self.grad_uv_sq),
            Some(self.logw_grad_sq),
            Some(self.cum_lap_u_sq),
            self.gn_ratio_u,
        ];
        row.extend(BoundKind::ALL.iter().map(|k| self.margin(*k)));
        row.extend([
            Some(self.cum_grad_v_sq),
            Some(self.cum_grad_uv_sq),
            Some(self.cum_logw_grad_sq),
            Some(self.rhs_v_l65),
            Some(self.cum_rhs_v_l65),
            Some(self.int_h),
            Some(self.cum_h),
        ]);
        row
    }

    /// Inverse of [`MonitorRecord::as_row`]; `None` if the row is malformed.
    pub fn from_row(row: &[Option<f64>]) -> Option<Self> {
        if row.len() != Self::COLUMNS.len() {
            return None;
        }
        let req = |k: usize| row[k];
        let bound_margins = BoundKind::ALL
            .iter()
            .enumerate()
            .filter_map(|(n, k)| row[18 + n].map(|m| (*k, m)))
            .collect();
        Some(Self {
            t: req(0)?,
            dt: req(1)?,
            mass_u: req(2)?,
            mass_v: req(3)?,
            mass_w: req(4)?,
            comb_mass: req(5)?,
            sup_u: req(6)?,
            sup_v: req(7)?,
            sup_w: req(8)?,
            l2_u: req(9)?,
            l2_v: req(10)?,
            l2_w: req(11)?,
            grad_u_sq: req(12)?,
            grad_v_sq: req(13)?,
            grad_uv_sq: req(14)?,
            logw_grad_sq: req(15)?,
            cum_lap_u_sq: req(16)?,
            gn_ratio_u: row[17],
            bound_margins,
            cum_grad_v_sq: req(23)?,
            cum_grad_uv_sq: req(24)?,
            cum_logw_grad_sq: req(25)?,
            rhs_v_l65: req(26)?,
            cum_rhs_v_l65: req(27)?,
            int_h: req(28)?,
            cum_h: req(29)?,
        })
    }
}

/// Closed-form bounds derived from the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSet {
    pub l1: f64,
    pub sup_u: f64,
    pub sup_v: Option<f64>,
    pub sup_w: Option<f64>,
    pub mass_w0: f64,
}

impl BoundSet {
    pub fn new(initial: &StateTriple, p: &Params, regime: &Regime) -> Self {
        let grid = initial.grid();
        let (e1, e2) = p.eta();
        let comb0 = comb_mass(initial, e1, e2);
        let l1 = l1_bound(comb0, p, grid.measure());
        let sup_u = initial.u.max().max(p.lambda1 / p.mu1);
        let v0 = initial.v.max();
        let w0 = initial.w.max();
        let (sup_v, sup_w) = match regime {
            Regime::Regularized(c) => {
                let cut = 2.0 / c.eps();
                let v_bar = v0.max(cut).max((p.lambda2 + p.b1 * sup_u) / p.mu2);
                let w_bar = w0.max(cut).max((p.lambda3 + p.b2 * sup_u + p.b3 * v_bar) / p.mu3);
                (Some(v_bar), Some(w_bar))
            }
            _ if p.xi == 0.0 => (Some(v0.max((p.lambda2 + p.b1 * sup_u) / p.mu2)), None),
            _ => (None, None),
        };
        Self { l1, sup_u, sup_v, sup_w, mass_w0: grid::integrate(&initial.w) }
    }

    pub fn get(&self, kind: BoundKind) -> Option<f64> {
        match kind {
            BoundKind::L1 => Some(self.l1),
            BoundKind::SupU => Some(self.sup_u),
            BoundKind::SupV => self.sup_v,
            BoundKind::SupW => self.sup_w,
            BoundKind::Mass => None,
        }
    }
}

/// `max{comb0, 3 lambda |Omega| / mu}` with the extremal rates.
pub fn l1_bound(comb0: f64, p: &Params, measure: f64) -> f64 {
    comb0.max(3.0 * p.lambda_max() * measure / p.mu_min())
}

pub fn comb_mass(state: &StateTriple, eta1: f64, eta2: f64) -> f64 {
    grid::integrate(&state.u) + eta1 * grid::integrate(&state.v) + eta2 * grid::integrate(&state.w)
}

fn upper_margin(value: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        1.0 - value / bound
    } else if value <= 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    }
}

/// `int |grad f|^4 / (int |lap f|^2 * int |grad f|^2)` with face gradients
/// averaged to the cells; `None` for (numerically) constant fields.
pub fn gn_ratio(f: &Field) -> Option<f64> {
    let g = f.grid();
    let (gx, gy) = grid::cell_gradients(f);
    let area = g.cell_area();
    let (mut g2, mut g4) = (0.0, 0.0);
    for (a, b) in gx.iter().zip(&gy) {
        let s = a * a + b * b;
        g2 += s;
        g4 += s * s;
    }
    let lap = grid::laplacian_unchecked(f);
    let l2: f64 = lap.values().iter().map(|x| x * x).sum();
    let den = l2 * g2 * area;
    if den > 0.0 && den.is_finite() && g4.is_finite() {
        Some(g4 / den)
    } else {
        None
    }
}

/// Instantaneous integrands of the cumulative series.
#[derive(Debug, Clone, Copy, Default)]
struct Rates {
    lap_u_sq: f64,
    grad_v_sq: f64,
    grad_uv_sq: f64,
    logw_grad_sq: f64,
    force_l65: f64,
    int_h: f64,
}

/// Incremental builder of [`MonitorRecord`]s along a run.
#[derive(Debug, Clone)]
pub struct Monitors {
    params: Params,
    carrier: Carrier,
    eta: (f64, f64),
    bounds: Option<BoundSet>,
    prev: Option<Rates>,
    cum: Rates,
}

impl Monitors {
    /// `with_bounds = false` disables the margins (manufactured-solution runs,
    /// whose sources invalidate the estimates).
    pub fn new(
        initial: &StateTriple,
        p: &Params,
        regime: &Regime,
        with_bounds: bool,
    ) -> Result<Self, ModelError> {
        initial.check_nonnegative()?;
        Ok(Self {
            params: *p,
            carrier: regime.carrier(),
            eta: p.eta(),
            bounds: with_bounds.then(|| BoundSet::new(initial, p, regime)),
            prev: None,
            cum: Rates::default(),
        })
    }

    pub fn bounds(&self) -> Option<&BoundSet> {
        self.bounds.as_ref()
    }

    fn rates(&self, s: &StateTriple) -> Rates {
        let p = &self.params;
        let (u, v, w) = (&s.u, &s.v, &s.w);
        let uv = u.product(v);
        let lap_u = grid::laplacian_unchecked(u);
        let inv_w2 = w.map(|x| 1.0 / ((x + 1.0) * (x + 1.0)));
        let taxis = if p.xi > 0.0 {
            grid::taxis_divergence_unchecked(&self.carrier.apply_field(v), u)
        } else {
            Field::zeros(*s.grid())
        };
        let mut force = 0.0;
        let mut int_h = 0.0;
        for k in 0..s.grid().len() {
            let (a, b, c) = (u.values()[k], v.values()[k], w.values()[k]);
            force += (-p.xi * taxis.values()[k] + p.g(a, b, c)).abs().powf(1.2);
            int_h += p.h(a, b, c);
        }
        let area = s.grid().cell_area();
        Rates {
            lap_u_sq: lap_u.values().iter().map(|x| x * x).sum::<f64>() * area,
            grad_v_sq: grid::grad_sq_unchecked(v, None),
            grad_uv_sq: grid::grad_sq_unchecked(&uv, None),
            logw_grad_sq: grid::grad_sq_unchecked(w, Some(&inv_w2)),
            force_l65: force * area,
            int_h: int_h * area,
        }
    }

    /// Record for `state`, reached by a step of size `dt` (0 for the first).
    pub fn record(&mut self, state: &StateTriple, dt: f64) -> MonitorRecord {
        let r = self.rates(state);
        let mut inc = Rates::default();
        if let Some(prev) = self.prev {
            let trap = |a: f64, b: f64| 0.5 * dt * (a + b);
            inc = Rates {
                lap_u_sq: trap(prev.lap_u_sq, r.lap_u_sq),
                grad_v_sq: trap(prev.grad_v_sq, r.grad_v_sq),
                grad_uv_sq: trap(prev.grad_uv_sq, r.grad_uv_sq),
                logw_grad_sq: trap(prev.logw_grad_sq, r.logw_grad_sq),
                force_l65: trap(prev.force_l65, r.force_l65),
                int_h: trap(prev.int_h, r.int_h),
            };
            self.cum.lap_u_sq += inc.lap_u_sq;
            self.cum.grad_v_sq += inc.grad_v_sq;
            self.cum.grad_uv_sq += inc.grad_uv_sq;
            self.cum.logw_grad_sq += inc.logw_grad_sq;
            self.cum.force_l65 += inc.force_l65;
            self.cum.int_h += inc.int_h;
        }
        self.prev = Some(r);

        let nu = grid::norms(&state.u);
        let nv = grid::norms(&state.v);
        let nw = grid::norms(&state.w);
        let (e1, e2) = self.eta;
        let comb = nu.l1 + e1 * nv.l1 + e2 * nw.l1;
        let mut margins = Vec::new();
        if let Some(b) = &self.bounds {
            margins.push((BoundKind::L1, upper_margin(comb, b.l1)));
            margins.push((BoundKind::SupU, upper_margin(nu.linf, b.sup_u)));
            if let Some(bv) = b.sup_v {
                margins.push((BoundKind::SupV, upper_margin(nv.linf, bv)));
            }
            if let Some(bw) = b.sup_w {
                margins.push((BoundKind::SupW, upper_margin(nw.linf, bw)));
            }
            let residual = b.mass_w0 + self.cum.int_h - nw.l1;
            margins.push((BoundKind::Mass, residual / (1.0 + b.mass_w0.abs())));
        }
        MonitorRecord {
            t: state.t,
            dt,
            mass_u: nu.l1,
            mass_v: nv.l1,
            mass_w: nw.l1,
            comb_mass: comb,
            sup_u: nu.linf,
            sup_v: nv.linf,
            sup_w: nw.linf,
            l2_u: nu.l2,
            l2_v: nv.l2,
            l2_w: nw.l2,
            grad_u_sq: grid::grad_sq_unchecked(&state.u, None),
            grad_v_sq: r.grad_v_sq,
            grad_uv_sq: r.grad_uv_sq,
            logw_grad_sq: r.logw_grad_sq,
            cum_lap_u_sq: self.cum.lap_u_sq,
            gn_ratio_u: gn_ratio(&state.u),
            bound_margins: margins,
            cum_grad_v_sq: self.cum.grad_v_sq,
            cum_grad_uv_sq: self.cum.grad_uv_sq,
            cum_logw_grad_sq: self.cum.logw_grad_sq,
            rhs_v_l65: inc.force_l65,
            cum_rhs_v_l65: self.cum.force_l65,
            int_h: r.int_h,
            cum_h: self.cum.int_h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub name: String,
    pub worst_margin: f64,
    pub time_of_worst: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn extend(&mut self, other: AuditReport) {
        self.entries.extend(other.entries);
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    fn scan(name: &str, threshold: f64, series: impl Iterator<Item = (f64, f64)>) -> AuditEntry {
        let mut worst = (f64::INFINITY, 0.0);
        for (t, m) in series {
            // NaN margins count as violations and stay the worst
            if !worst.0.is_nan() && !(m >= worst.0) {
                worst = (m, t);
            }
        }
        AuditEntry {
            name: name.to_string(),
            worst_margin: worst.0,
            time_of_worst: worst.1,
            threshold,
            passed: worst.0 >= threshold,
        }
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:>14} {:>14} {:>12}  result", "audit", "worst_margin", "time_of_worst", "threshold")?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<28} {:>14.6e} {:>14.6e} {:>12.1e}  {}",
                e.name,
                e.worst_margin,
                e.time_of_worst,
                e.threshold,
                if e.passed { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// `comb_mass(t) <= max{comb_mass(0), 3 lambda |Omega| / mu} (1 + 1e-3)`.
pub fn audit_l1_bound(traj: &Trajectory, p: &Params) -> AuditReport {
    let first = &traj.monitors[0];
    let bound = l1_bound(first.comb_mass, p, traj.grid().measure());
    let entry = AuditReport::scan(
        "l1_combined_mass",
        -BOUND_TOL,
        traj.monitors.iter().map(|m| (m.t, upper_margin(m.comb_mass, bound))),
    );
    AuditReport { entries: vec![entry] }
}

/// Comparison bounds for the regime: `u` always, `v` when `xi = 0` or
/// regularized, `w` when regularized.
pub fn audit_sup_bounds(traj: &Trajectory, p: &Params, regime: &Regime) -> AuditReport {
    let bounds = BoundSet::new(traj.initial(), p, regime);
    let mut entries = Vec::new();
    let series: [(&str, Option<f64>, fn(&MonitorRecord) -> f64); 3] = [
        ("sup_u_comparison", Some(bounds.sup_u), |m| m.sup_u),
        ("sup_v_comparison", bounds.sup_v, |m| m.sup_v),
        ("sup_w_comparison", bounds.sup_w, |m| m.sup_w),
    ];
    for (name, bound, get) in series {
        if let Some(b) = bound {
            entries.push(AuditReport::scan(
                name,
                -BOUND_TOL,
                traj.monitors.iter().map(|m| (m.t, upper_margin(get(m), b))),
            ));
        }
    }
    AuditReport { entries }
}

/// Residuals `r(t) = int w0 + int_0^t int h - int w(t)` at every record.
pub fn mass_residuals(traj: &Trajectory) -> Vec<(f64, f64)> {
    let w0 = traj.monitors[0].mass_w;
    traj.monitors.iter().map(|m| (m.t, w0 + m.cum_h - m.mass_w)).collect()
}

/// `r(t) >= -1e-6 (1 + |int w0|)` at every record.
pub fn audit_mass_inequality(traj: &Trajectory, _p: &Params) -> AuditReport {
    let scale = 1.0 + traj.monitors[0].mass_w.abs();
    let entry = AuditReport::scan(
        "mass_inequality",
        -MASS_TOL,
        mass_residuals(traj).into_iter().map(|(t, r)| (t, r / scale)),
    );
    AuditReport { entries: vec![entry] }
}

/// All audits applicable to a run in `regime`.
pub fn audit_all(traj: &Trajectory, p: &Params, regime: &Regime) -> AuditReport {
    let mut report = audit_l1_bound(traj, p);
    report.extend(audit_sup_bounds(traj, p, regime));
    report.extend(audit_mass_inequality(traj, p));
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRow {
    pub t: f64,
    pub grad_u_sq: f64,
    pub cum_grad_v_sq: f64,
    pub cum_grad_uv_sq: f64,
    pub cum_logw_grad_sq: f64,
    pub cum_lap_u_sq: f64,
    pub cum_rhs_v_l65: f64,
}

impl EnergyRow {
    pub const CUMULATIVE: [&'static str; 5] =
        ["cum_grad_v_sq", "cum_grad_uv_sq", "cum_logw_grad_sq", "cum_lap_u_sq", "cum_rhs_v_l65"];

    pub fn cumulative(&self) -> [f64; 5] {
        [
            self.cum_grad_v_sq,
            self.cum_grad_uv_sq,
            self.cum_logw_grad_sq,
            self.cum_lap_u_sq,
            self.cum_rhs_v_l65,
        ]
    }
}

pub fn energy_series(traj: &Trajectory) -> Vec<EnergyRow> {
    traj.monitors
        .iter()
        .map(|m| EnergyRow {
            t: m.t,
            grad_u_sq: m.grad_u_sq,
            cum_grad_v_sq: m.cum_grad_v_sq,
            cum_grad_uv_sq: m.cum_grad_uv_sq,
            cum_logw_grad_sq: m.cum_logw_grad_sq,
            cum_lap_u_sq: m.cum_lap_u_sq,
            cum_rhs_v_l65: m.cum_rhs_v_l65,
        })
        .collect()
}

/// Final cumulative energies of each ladder member and their spread.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityTable {
    pub eps: Vec<f64>,
    /// `finals[k][s]`: series `s` of ladder member `k`.
    pub finals: Vec<[f64; 5]>,
    /// `max / min` across the ladder, per series.
    pub spread: [f64; 5],
}

pub const UNIFORMITY_FACTOR: f64 = 2.0;

impl UniformityTable {
    pub fn new(runs: &[(f64, &Trajectory)]) -> Self {
        let finals: Vec<[f64; 5]> = runs
            .iter()
            .map(|(_, t)| energy_series(t).last().map_or([0.0; 5], |r| r.cumulative()))
            .collect();
        let mut spread = [1.0; 5];
        for s in 0..5 {
            let hi = finals.iter().map(|f| f[s]).fold(f64::NEG_INFINITY, f64::max);
            let lo = finals.iter().map(|f| f[s]).fold(f64::INFINITY, f64::min);
            spread[s] = if hi <= f64::MIN_POSITIVE { 1.0 } else { hi / lo };
        }
        Self { eps: runs.iter().map(|(e, _)| *e).collect(), finals, spread }
    }

    pub fn audit(&self) -> AuditReport {
        let entries = EnergyRow::CUMULATIVE
            .iter()
            .zip(self.spread)
            .map(|(name, s)| AuditEntry {
                name: format!("eps_uniform_{name}"),
                // margin 1 - spread / factor, so the entry passes at >= 0
                worst_margin: 1.0 - s / UNIFORMITY_FACTOR,
                time_of_worst: f64::NAN,
                threshold: 0.0,
                passed: s <= UNIFORMITY_FACTOR,
            })
            .collect();
        AuditReport { entries }
    }

    pub fn render(&self) -> String {
        let mut s = format!("{:<10}", "eps");
        for name in EnergyRow::CUMULATIVE {
            s.push_str(&format!(" {name:>17}"));
        }
        s.push('\n');
        for (e, f) in self.eps.iter().zip(&self.finals) {
            s.push_str(&format!("{e:<10}"));
            for x in f {
                s.push_str(&format!(" {x:>17.6e}"));
            }
            s.push('\n');
        }
        s.push_str(&format!("{:<10}", "max/min"));
        for x in self.spread {
            s.push_str(&format!(" {x:>17.4}"));
        }
        s.push('\n');
        s
    }
}

/// Bound set evaluated on the grid of a trajectory, for reports.
pub fn bounds_for(traj: &Trajectory, p: &Params, regime: &Regime) -> BoundSet {
    BoundSet::new(traj.initial(), p, regime)
}
