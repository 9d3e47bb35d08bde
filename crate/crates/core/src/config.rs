//! Run configuration: a strict flat `key = value` format with dotted section
//! prefixes, and the bundled presets.
//!
//! ```text
//! # comment
//! grid.nx = 32
//! grid.lx = 1.0
//! params.d1 = 1.0        # all seventeen params.* keys are mandatory
//! solver.t_end = 2.0
//! init.u = cosine(1.0, 0.5, 1, 1)
//! study.type = single
//! ```
//!
//! Unknown keys, duplicate keys and malformed values are errors carrying the
//! line number; all missing mandatory keys are reported together.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{self, Field, GridError, GridSpec};
use crate::model::{ModelError, Params, StateTriple};
use crate::solver::{Mode, Regime, SolverConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: duplicate key {key} (first set on line {first})")]
    Duplicate { key: String, line: usize, first: usize },
    #[error("line {line}: unknown key {key}")]
    UnknownKey { key: String, line: usize },
    #[error("missing mandatory keys: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("{key}: {msg}")]
    Value { key: String, msg: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("initial data: {0}")]
    Init(String),
}

impl ConfigError {
    fn value(key: &str, msg: impl Into<String>) -> Self {
        ConfigError::Value { key: key.to_string(), msg: msg.into() }
    }
}

/// Initial profile of one species.
#[derive(Debug, Clone, PartialEq)]
pub enum InitData {
    Constant(f64),
    /// `mean + amp cos(kx pi x / lx) cos(ky pi y / ly)`
    Cosine { mean: f64, amp: f64, kx: u32, ky: u32 },
    /// `base + height exp(-|x - c|^2 / radius^2)`
    Bump { base: f64, height: f64, cx: f64, cy: f64, radius: f64 },
    File(PathBuf),
    /// `mean + amp * U(-1, 1)` per cell from a seeded stream.
    Noise { mean: f64, amp: f64, seed: u64 },
}

impl InitData {
    fn parse(key: &str, text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let bad = |msg: &str| ConfigError::value(key, format!("{msg} in {text:?}"));
        let (kind, args) = text
            .strip_suffix(')')
            .and_then(|s| s.split_once('('))
            .ok_or_else(|| bad("expected kind(args)"))?;
        let kind = kind.trim();
        if kind == "file" {
            let raw = args.trim().trim_matches('"');
            if raw.is_empty() {
                return Err(bad("empty path"));
            }
            let path = base_dir.join(raw);
            if !path.is_file() {
                return Err(ConfigError::value(key, format!("file {} does not exist", path.display())));
            }
            return Ok(InitData::File(path));
        }
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("non-numeric argument"))?;
        let arity = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(bad(&format!("{kind} takes {n} arguments")))
            }
        };
        let count = |x: f64| {
            if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
                Ok(x as u32)
            } else {
                Err(bad("wave numbers must be nonnegative integers"))
            }
        };
        let data = match kind {
            "constant" => {
                arity(1)?;
                InitData::Constant(nums[0])
            }
            "cosine" => {
                arity(4)?;
                InitData::Cosine { mean: nums[0], amp: nums[1], kx: count(nums[2])?, ky: count(nums[3])? }
            }
            "bump" => {
                arity(5)?;
                if !(nums[4] > 0.0) {
                    return Err(bad("bump radius must be positive"));
                }
                InitData::Bump { base: nums[0], height: nums[1], cx: nums[2], cy: nums[3], radius: nums[4] }
            }
            "noise" => {
                arity(3)?;
                if !(nums[2] >= 0.0 && nums[2].fract() == 0.0) {
                    return Err(bad("seed must be a nonnegative integer"));
                }
                InitData::Noise { mean: nums[0], amp: nums[1], seed: nums[2] as u64 }
            }
            _ => return Err(bad("unknown initial-data kind")),
        };
        data.check_nonnegative(key)?;
        Ok(data)
    }

    /// Rejects descriptors that are negative somewhere on any grid.
    fn check_nonnegative(&self, key: &str) -> Result<(), ConfigError> {
        let low = match *self {
            InitData::Constant(c) => c,
            InitData::Cosine { mean, amp, .. } => mean - amp.abs(),
            InitData::Bump { base, height, .. } => base + height.min(0.0),
            InitData::Noise { mean, amp, .. } => mean - amp.abs(),
            InitData::File(_) => 0.0,
        };
        if low < 0.0 || !low.is_finite() {
            return Err(ConfigError::value(key, "initial data must be nonnegative"));
        }
        Ok(())
    }

    pub fn field(&self, grid: &GridSpec) -> Result<Field, ConfigError> {
        use std::f64::consts::PI;
        Ok(match self {
            InitData::Constant(c) => Field::constant(*grid, *c),
            InitData::Cosine { mean, amp, kx, ky } => {
                let ax = *kx as f64 * PI / grid.lx();
                let ay = if grid.is_1d() { 0.0 } else { *ky as f64 * PI / grid.ly() };
                Field::from_fn(*grid, |x, y| mean + amp * (ax * x).cos() * (ay * y).cos())
            }
            InitData::Bump { base, height, cx, cy, radius } => Field::from_fn(*grid, |x, y| {
                let dy = if grid.is_1d() { 0.0 } else { y - cy };
                base + height * (-((x - cx).powi(2) + dy * dy) / (radius * radius)).exp()
            }),
            InitData::File(path) => {
                let (f, _) = Field::read_snapshot_file(path).map_err(|e| ConfigError::Init(e.to_string()))?;
                if f.grid() != grid {
                    return Err(ConfigError::Init(format!(
                        "{} holds a {}x{} field on [0,{}]x[0,{}], run grid is {}x{} on [0,{}]x[0,{}]",
                        path.display(),
                        f.grid().nx(),
                        f.grid().ny(),
                        f.grid().lx(),
                        f.grid().ly(),
                        grid.nx(),
                        grid.ny(),
                        grid.lx(),
                        grid.ly()
                    )));
                }
                f
            }
            InitData::Noise { mean, amp, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let values = (0..grid.len()).map(|_| mean + amp * rng.gen_range(-1.0..=1.0)).collect();
                Field::new(*grid, values).map_err(|e| ConfigError::Init(e.to_string()))?
            }
        })
    }
}

impl fmt::Display for InitData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitData::Constant(c) => write!(f, "constant({c})"),
            InitData::Cosine { mean, amp, kx, ky } => write!(f, "cosine({mean}, {amp}, {kx}, {ky})"),
            InitData::Bump { base, height, cx, cy, radius } => {
                write!(f, "bump({base}, {height}, {cx}, {cy}, {radius})")
            }
            InitData::File(p) => write!(f, "file({})", p.display()),
            InitData::Noise { mean, amp, seed } => write!(f, "noise({mean}, {amp}, {seed})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub u: InitData,
    pub v: InitData,
    pub w: InitData,
    /// Explicit pure-diffusion steps applied to the data before the run.
    pub smoothing_steps: usize,
}

impl InitSpec {
    pub fn zero() -> Self {
        Self {
            u: InitData::Constant(0.0),
            v: InitData::Constant(0.0),
            w: InitData::Constant(0.0),
            smoothing_steps: 0,
        }
    }

    pub fn build(&self, grid: &GridSpec) -> Result<StateTriple, ConfigError> {
        let mut fields = [self.u.field(grid)?, self.v.field(grid)?, self.w.field(grid)?];
        for f in &mut fields {
            *f = smooth(f, self.smoothing_steps);
        }
        let [u, v, w] = fields;
        StateTriple::new(u, v, w, 0.0).map_err(|e| ConfigError::Init(e.to_string()))
    }

    /// All three profiles spatially constant, as `(u, v, w)`.
    pub fn constants(&self) -> Option<[f64; 3]> {
        match (&self.u, &self.v, &self.w) {
            (InitData::Constant(a), InitData::Constant(b), InitData::Constant(c)) => Some([*a, *b, *c]),
            _ => None,
        }
    }
}

/// `k` steps of `f += tau Lap f` with `tau = h^2 / 8`: conservative and
/// monotone, so mass and nonnegativity survive.
pub fn smooth(f: &Field, k: usize) -> Field {
    let tau = f.grid().h_min().powi(2) / 8.0;
    let mut out = f.clone();
    for _ in 0..k {
        let lap = grid::laplacian_unchecked(&out);
        out = out.axpy(tau, &lap);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Study {
    Single,
    EpsLadder(Vec<f64>),
    /// Cell counts along x; `ny` follows the aspect ratio of the base grid
    /// and the snapshot interval shrinks with `h`.
    GridLadder(Vec<usize>),
    Mms { mode: Mode, grids: Vec<usize> },
    OdeCompare,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Single => "single",
            Study::EpsLadder(_) => "eps_ladder",
            Study::GridLadder(_) => "grid_ladder",
            Study::Mms { .. } => "mms",
            Study::OdeCompare => "ode_compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditToggles {
    pub bounds: bool,
    pub mass: bool,
    pub residuals: bool,
    pub uniformity: bool,
}

impl Default for AuditToggles {
    fn default() -> Self {
        Self { bounds: true, mass: true, residuals: false, uniformity: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub params: Params,
    pub solver: SolverConfig,
    pub init: InitSpec,
    pub study: Study,
    pub output: PathBuf,
    pub audits: AuditToggles,
    /// Size of the weak-form test family.
    pub test_functions: usize,
    /// Bound on the ODE-comparison deviation.
    pub ode_tolerance: f64,
}

const PARAM_KEYS: [&str; 17] = [
    "d1", "d2", "d3", "xi", "chi", "lambda1", "lambda2", "lambda3", "mu1", "mu2", "mu3", "a1", "a2",
    "a3", "b1", "b2", "b3",
];

const OPTIONAL_KEYS: [&str; 23] = [
    "grid.ny",
    "grid.ly",
    "solver.cfl",
    "solver.regime",
    "solver.eps",
    "solver.snapshot_interval",
    "solver.dt_max",
    "init.u",
    "init.v",
    "init.w",
    "init.smoothing_steps",
    "study.type",
    "study.eps",
    "study.grids",
    "study.mms",
    "study.test_functions",
    "study.ode_tolerance",
    "output.dir",
    "audit.bounds",
    "audit.mass",
    "audit.residuals",
    "audit.uniformity",
    "name",
];

fn mandatory_keys() -> Vec<String> {
    let mut keys = vec!["grid.nx".to_string(), "grid.lx".to_string(), "solver.t_end".to_string()];
    keys.extend(PARAM_KEYS.iter().map(|k| format!("params.{k}")));
    keys
}

/// Raw `key -> (value, line)` table of a config text.
fn tokenize(text: &str) -> Result<BTreeMap<String, (String, usize)>, ConfigError> {
    let known: Vec<String> = mandatory_keys()
        .into_iter()
        .chain(OPTIONAL_KEYS.iter().map(|k| k.to_string()))
        .collect();
    let mut table: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("expected `key = value`, got {content:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax { line, msg: format!("malformed key {key:?}") });
        }
        if value.is_empty() {
            return Err(ConfigError::Syntax { line, msg: format!("empty value for {key}") });
        }
        if !known.iter().any(|k| k == key) {
            return Err(ConfigError::UnknownKey { key: key.to_string(), line });
        }
        if let Some((_, first)) = table.get(key) {
            return Err(ConfigError::Duplicate { key: key.to_string(), line, first: *first });
        }
        table.insert(key.to_string(), (value.to_string(), line));
    }
    Ok(table)
}

struct Table<'a> {
    map: &'a BTreeMap<String, (String, usize)>,
}

impl Table<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(v, _)| v.as_str())
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ConfigError::value(key, format!("expected a finite number, got {v:?}")))
            })
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| ConfigError::value(key, format!("expected a nonnegative integer, got {v:?}")))
            })
            .transpose()
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(ConfigError::value(key, format!("expected true or false, got {v:?}"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().parse::<T>())
                    .collect::<Result<Vec<T>, _>>()
                    .map_err(|_| ConfigError::value(key, format!("malformed list {v:?}")))
            })
            .transpose()
    }
}

fn model_err(e: ModelError) -> ConfigError {
    match e {
        ModelError::Parameter { name, .. } if name != "eta" => {
            ConfigError::value(&format!("params.{name}"), e.to_string())
        }
        ModelError::InvalidEps(_) => ConfigError::value("solver.eps", e.to_string()),
        other => ConfigError::value("params", other.to_string()),
    }
}

fn grid_err(e: GridError) -> ConfigError {
    ConfigError::value("grid", e.to_string())
}

impl RunConfig {
    pub fn parse_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse_str(&text, dir)
    }

    /// Parses config text; `file(...)` paths resolve against `base_dir`.
    pub fn parse_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let map = tokenize(text)?;
        let missing: Vec<String> = mandatory_keys().into_iter().filter(|k| !map.contains_key(k)).collect();
        if !missing.is_empty() {
            return Err(ConfigError::Missing(missing));
        }
        let t = Table { map: &map };
        let req = |key: &str| -> Result<f64, ConfigError> { Ok(t.f64(key)?.expect("presence checked")) };

        let nx = t.usize("grid.nx")?.expect("presence checked");
        let ny = t.usize("grid.ny")?.unwrap_or(nx);
        let lx = req("grid.lx")?;
        let ly = t.f64("grid.ly")?.unwrap_or(lx);
        let grid = GridSpec::new(nx, ny, lx, ly).map_err(grid_err)?;

        let mut vals = [0.0; 17];
        for (slot, name) in vals.iter_mut().zip(PARAM_KEYS) {
            *slot = req(&format!("params.{name}"))?;
        }
        let [d1, d2, d3, xi, chi, lambda1, lambda2, lambda3, mu1, mu2, mu3, a1, a2, a3, b1, b2, b3] = vals;
        let params = Params {
            d1,
            d2,
            d3,
            xi,
            chi,
            lambda1,
            lambda2,
            lambda3,
            mu1,
            mu2,
            mu3,
            a1,
            a2,
            a3,
            b1,
            b2,
            b3,
        };

        let study = match t.raw("study.type").unwrap_or("single") {
            "single" => Study::Single,
            "ode_compare" => Study::OdeCompare,
            "eps_ladder" => {
                let eps: Vec<f64> = t
                    .list("study.eps")?
                    .ok_or_else(|| ConfigError::Missing(vec!["study.eps".into()]))?;
                if eps.is_empty() {
                    return Err(ConfigError::value("study.eps", "empty ladder"));
                }
                Study::EpsLadder(eps)
            }
            "grid_ladder" => Study::GridLadder(
                t.list("study.grids")?
                    .ok_or_else(|| ConfigError::Missing(vec!["study.grids".into()]))?,
            ),
            "mms" => {
                let mode = match t.raw("study.mms") {
                    Some("diffusion") => Mode::DiffusionOnly,
                    Some("full") => Mode::Full,
                    Some(v) => return Err(ConfigError::value("study.mms", format!("expected diffusion or full, got {v:?}"))),
                    None => return Err(ConfigError::Missing(vec!["study.mms".into()])),
                };
                let grids = t
                    .list("study.grids")?
                    .ok_or_else(|| ConfigError::Missing(vec!["study.grids".into()]))?;
                Study::Mms { mode, grids }
            }
            v => return Err(ConfigError::value("study.type", format!("unknown study {v:?}"))),
        };
        if let Study::GridLadder(g) | Study::Mms { grids: g, .. } = &study {
            if g.len() < 3 || g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ConfigError::value("study.grids", "need at least 3 strictly increasing cell counts"));
            }
        }

        let eps = t.f64("solver.eps")?;
        let regime = match t.raw("solver.regime") {
            Some("classical") => Regime::Classical,
            Some("full") => Regime::Full,
            Some("regularized") => {
                let e = eps.ok_or_else(|| ConfigError::value("solver.eps", "required when solver.regime = regularized"))?;
                Regime::regularized(e).map_err(model_err)?
            }
            Some(v) => return Err(ConfigError::value("solver.regime", format!("unknown regime {v:?}"))),
            None => match eps {
                Some(e) => Regime::regularized(e).map_err(model_err)?,
                None if xi == 0.0 => Regime::Classical,
                None => Regime::Full,
            },
        };
        if eps.is_some() && !matches!(regime, Regime::Regularized(_)) {
            return Err(ConfigError::value("solver.eps", format!("given, but solver.regime = {}", regime.name())));
        }

        if matches!(study, Study::Mms { .. }) {
            params.validate_allowing_zero_chi().map_err(model_err)?;
        } else {
            params.validate().map_err(model_err)?;
        }

        let t_end = req("solver.t_end")?;
        if t_end < 0.0 {
            return Err(ConfigError::value("solver.t_end", "must be nonnegative"));
        }
        let mut solver = SolverConfig::new(t_end, regime);
        if let Some(c) = t.f64("solver.cfl")? {
            if !(c > 0.0 && c <= 1.0) {
                return Err(ConfigError::value("solver.cfl", "must lie in (0, 1]"));
            }
            solver.cfl_safety = c;
        }
        if let Some(s) = t.f64("solver.snapshot_interval")? {
            if !(s > 0.0) {
                return Err(ConfigError::value("solver.snapshot_interval", "must be positive"));
            }
            solver.snapshot_interval = s;
        }
        if let Some(d) = t.f64("solver.dt_max")? {
            if !(d > 0.0) {
                return Err(ConfigError::value("solver.dt_max", "must be positive"));
            }
            solver.dt_max = Some(d);
        }
        if let Regime::Classical = regime {
            if xi != 0.0 {
                return Err(ConfigError::value("params.xi", "the classical regime requires xi = 0"));
            }
        }

        let init_of = |key: &str| -> Result<InitData, ConfigError> {
            match t.raw(key) {
                Some(v) => InitData::parse(key, v, base_dir),
                None => Ok(InitData::Constant(0.0)),
            }
        };
        let init = InitSpec {
            u: init_of("init.u")?,
            v: init_of("init.v")?,
            w: init_of("init.w")?,
            smoothing_steps: t.usize("init.smoothing_steps")?.unwrap_or(0),
        };
        if matches!(study, Study::OdeCompare) && init.constants().is_none() {
            return Err(ConfigError::value("init", "ode_compare needs constant(...) data for u, v and w"));
        }

        let audits = AuditToggles {
            bounds: t.bool("audit.bounds", true)?,
            mass: t.bool("audit.mass", true)?,
            residuals: t.bool("audit.residuals", false)?,
            uniformity: t.bool("audit.uniformity", true)?,
        };
        let test_functions = t.usize("study.test_functions")?.unwrap_or(27);
        if test_functions == 0 {
            return Err(ConfigError::value("study.test_functions", "must be positive"));
        }
        let ode_tolerance = t.f64("study.ode_tolerance")?.unwrap_or(1e-4);

        Ok(Self {
            grid,
            params,
            solver,
            init,
            study,
            output: PathBuf::from(t.raw("output.dir").unwrap_or("out")),
            audits,
            test_functions,
            ode_tolerance,
        })
    }

    /// Canonical text form; parsing it back yields an equal config.
    pub fn render(&self) -> String {
        let g = &self.grid;
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        line("grid.nx", g.nx().to_string());
        line("grid.ny", g.ny().to_string());
        line("grid.lx", fmt_f64(g.lx()));
        line("grid.ly", fmt_f64(g.ly()));
        for (name, v) in self.params.named() {
            line(&format!("params.{name}"), fmt_f64(v));
        }
        let c = &self.solver;
        line("solver.t_end", fmt_f64(c.t_end));
        line("solver.cfl", fmt_f64(c.cfl_safety));
        line("solver.regime", c.regime.name().to_string());
        if let Some(e) = c.regime.eps() {
            line("solver.eps", fmt_f64(e));
        }
        line("solver.snapshot_interval", fmt_f64(c.snapshot_interval));
        if let Some(d) = c.dt_max {
            line("solver.dt_max", fmt_f64(d));
        }
        line("init.u", self.init.u.to_string());
        line("init.v", self.init.v.to_string());
        line("init.w", self.init.w.to_string());
        line("init.smoothing_steps", self.init.smoothing_steps.to_string());
        line("study.type", self.study.name().to_string());
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        match &self.study {
            Study::EpsLadder(e) => {
                line("study.eps", e.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", "))
            }
            Study::GridLadder(g) => line("study.grids", join(g)),
            Study::Mms { mode, grids } => {
                line("study.mms", if *mode == Mode::Full { "full" } else { "diffusion" }.to_string());
                line("study.grids", join(grids));
            }
            Study::Single | Study::OdeCompare => {}
        }
        line("study.test_functions", self.test_functions.to_string());
        line("study.ode_tolerance", fmt_f64(self.ode_tolerance));
        line("output.dir", self.output.display().to_string());
        line("audit.bounds", self.audits.bounds.to_string());
        line("audit.mass", self.audits.mass.to_string());
        line("audit.residuals", self.audits.residuals.to_string());
        line("audit.uniformity", self.audits.uniformity.to_string());
        s
    }
}

/// Shortest representation that parses back to the same value.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub const PRESETS: [(&str, &str); 7] = [
    ("classical2d", include_str!("../presets/classical2d.cfg")),
    ("fullreg", include_str!("../presets/fullreg.cfg")),
    ("epsstudy", include_str!("../presets/epsstudy.cfg")),
    ("gridstudy", include_str!("../presets/gridstudy.cfg")),
    ("mms_diffusion", include_str!("../presets/mms_diffusion.cfg")),
    ("mms_full", include_str!("../presets/mms_full.cfg")),
    ("ode_compare", include_str!("../presets/ode_compare.cfg")),
];

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
    RunConfig::parse_str(text, Path::new("."))
}

/// A path to an existing file is parsed; anything else is looked up as a
/// preset name.
pub fn load(spec: &str) -> Result<RunConfig, ConfigError> {
    let path = Path::new(spec);
    if path.is_file() {
        RunConfig::parse_file(path)
    } else if PRESETS.iter().any(|(n, _)| *n == spec) {
        preset(spec)
    } else {
        Err(ConfigError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such config file or preset"),
        })
    }
}
