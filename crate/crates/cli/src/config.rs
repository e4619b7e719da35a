//! Line-oriented configuration: `[section]` headers, `key = value` lines,
//! `#` comments. Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use fdl_core::exhaust::InitialDatum;
use fdl_core::norms::NormSpec;
use fdl_core::stepper::StepConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{key}: {reason}")]
    Validation { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation { key: key.into(), reason: reason.into() }
}

const KEYS: &[(&str, &[&str])] = &[
    ("problem", &["q", "N", "norm", "datum"]),
    ("grid", &["R", "h", "L", "pad", "delta", "radii", "window_radius"]),
    ("time", &["dt0", "t_start", "t_end", "save_every", "dt_growth", "dt_max"]),
    (
        "solver",
        &["newton_tol", "max_newton", "jacobian_eps", "max_halvings", "dt_min", "sup_cap", "linear_tol", "blowup_growth"],
    ),
    (
        "checks",
        &[
            "reports", "samples", "identity_tol", "monotonicity_tol", "p", "r", "radius", "times", "c", "c1", "c2", "c3", "c5",
            "delta_exponent", "t1", "t2", "a2_times", "tol_window", "amplitudes", "bound",
        ],
    ),
    ("output", &["dir", "seed"]),
];

/// Initial data as written in the config.
#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    /// ZKB profile with constant `c` at time `t0`; the run starts at `t0`.
    Zkb { c: f64, t0: f64 },
    /// A library datum; a `DiracBump` width of 0 means two grid cells.
    Datum(InitialDatum),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub q: f64,
    pub dim: usize,
    pub norm: NormSpec,
    pub datum: DatumSpec,
    pub radius: f64,
    pub h: f64,
    pub half_width: Option<f64>,
    pub pad: usize,
    pub delta: f64,
    pub radii: Vec<f64>,
    pub step: StepConfig,
    pub reports: Vec<String>,
    pub samples: usize,
    pub identity_tol: f64,
    pub monotonicity_tol: f64,
    pub p: f64,
    pub r: f64,
    pub check_radius: f64,
    pub times: Vec<f64>,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c5: f64,
    pub delta_exponent: f64,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub a2_times: Vec<f64>,
    pub tol_window: f64,
    pub amplitudes: Vec<f64>,
    pub bound: Option<f64>,
    pub output_dir: String,
    pub seed: u64,
    /// Every key with its resolved value, by section.
    pub resolved: BTreeMap<String, BTreeMap<String, String>>,
}

type Raw = BTreeMap<String, BTreeMap<String, (usize, String)>>;

fn tokenize(text: &str) -> Result<Raw, ConfigError> {
    let mut raw: Raw = BTreeMap::new();
    let mut section: Option<String> = None;
    for (k, line) in text.lines().enumerate() {
        let n = k + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or(ConfigError::Parse { line: n, message: "unterminated section header".into() })?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::Parse { line: n, message: format!("unknown section [{name}]") });
            }
            section = Some(name.to_string());
            raw.entry(name.to_string()).or_default();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::Parse { line: n, message: "expected `key = value`".into() })?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .as_deref()
            .ok_or(ConfigError::Parse { line: n, message: "key outside of a section".into() })?;
        let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(ConfigError::Parse { line: n, message: format!("unknown key `{key}` in [{sec}]") });
        }
        if value.is_empty() {
            return Err(ConfigError::Parse { line: n, message: format!("empty value for `{key}`") });
        }
        let entry = raw.entry(sec.to_string()).or_default();
        if entry.insert(key.to_string(), (n, value.to_string())).is_some() {
            return Err(ConfigError::Parse { line: n, message: format!("duplicate key `{key}`") });
        }
    }
    Ok(raw)
}

struct Reader<'a> {
    raw: &'a Raw,
}

impl Reader<'_> {
    fn get(&self, sec: &str, key: &str) -> Option<&str> {
        self.raw.get(sec).and_then(|m| m.get(key)).map(|(_, v)| v.as_str())
    }

    fn num(&self, sec: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(sec, key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| invalid(key, format!("not a number: {v:?}"))),
        }
    }

    fn num_or(&self, sec: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.num(sec, key)?.unwrap_or(default))
    }

    fn required(&self, sec: &str, key: &str) -> Result<f64, ConfigError> {
        self.num(sec, key)?.ok_or_else(|| invalid(key, format!("required in [{sec}]")))
    }

    fn int_or(&self, sec: &str, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.get(sec, key) {
            None => Ok(default),
            Some(v) => v.parse::<u64>().map_err(|_| invalid(key, format!("not a nonnegative integer: {v:?}"))),
        }
    }

    fn list(&self, sec: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self.get(sec, key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| invalid(key, format!("not a number list: {v:?}"))))
                .collect(),
        }
    }
}

/// `kind[:key=value,...]` with kinds `dirac`, `density`, `critical`, `zkb`.
pub fn parse_datum(text: &str) -> Result<DatumSpec, ConfigError> {
    let (kind, args) = match text.split_once(':') {
        Some((k, a)) => (k.trim(), a.trim()),
        None => (text.trim(), ""),
    };
    let mut kv = BTreeMap::new();
    for part in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| invalid("datum", format!("expected key=value, got {part:?}")))?;
        let v: f64 = v.trim().parse().map_err(|_| invalid("datum", format!("not a number: {v:?}")))?;
        kv.insert(k.trim().to_string(), v);
    }
    let allowed: &[&str] = match kind {
        "dirac" => &["mass", "width", "x", "y"],
        "density" => &["gamma", "amplitude"],
        "critical" => &["amplitude"],
        "zkb" => &["c", "t0"],
        _ => return Err(invalid("datum", format!("unknown datum kind {kind:?}"))),
    };
    if let Some(k) = kv.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(invalid("datum", format!("unknown parameter {k:?} for {kind}")));
    }
    let get = |k: &str, d: f64| *kv.get(k).unwrap_or(&d);
    Ok(match kind {
        "dirac" => DatumSpec::Datum(InitialDatum::DiracBump {
            mass: get("mass", 1.0),
            center: [get("x", 0.0), get("y", 0.0)],
            width: get("width", 0.0),
        }),
        "density" => DatumSpec::Datum(InitialDatum::Density { gamma: get("gamma", 0.0), amplitude: get("amplitude", 1.0) }),
        "critical" => DatumSpec::Datum(InitialDatum::CriticalGrowth { amplitude: get("amplitude", 1.0) }),
        _ => DatumSpec::Zkb { c: get("c", 1.0), t0: get("t0", 1.0) },
    })
}

fn datum_text(d: &DatumSpec) -> String {
    match d {
        DatumSpec::Zkb { c, t0 } => format!("zkb:c={c},t0={t0}"),
        DatumSpec::Datum(InitialDatum::DiracBump { mass, center, width }) => {
            format!("dirac:mass={mass},width={width},x={},y={}", center[0], center[1])
        }
        DatumSpec::Datum(InitialDatum::Density { gamma, amplitude }) => format!("density:gamma={gamma},amplitude={amplitude}"),
        DatumSpec::Datum(InitialDatum::CriticalGrowth { amplitude }) => format!("critical:amplitude={amplitude}"),
        DatumSpec::Datum(InitialDatum::Custom(_)) => "custom".into(),
    }
}

fn list_text(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub const REPORTS: &[&str] = &["max_principle", "fde", "pme", "support", "majorant", "a1", "a2", "weak_residual"];

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let raw = tokenize(text)?;
    let r = Reader { raw: &raw };
    let q = r.required("problem", "q")?;
    if !(q > 1.0) || !q.is_finite() {
        return Err(invalid("q", "q must exceed 1"));
    }
    let dim = r.int_or("problem", "N", 1)? as usize;
    if !(dim == 1 || dim == 2) {
        return Err(invalid("N", "only N = 1 and N = 2 are supported"));
    }
    let norm_text = r.get("problem", "norm").ok_or_else(|| invalid("norm", "required in [problem]"))?;
    let norm = NormSpec::parse(norm_text, dim).map_err(|e| invalid("norm", e.to_string()))?;
    let datum = parse_datum(r.get("problem", "datum").unwrap_or("dirac"))?;
    if let DatumSpec::Zkb { c, t0 } = datum {
        if !(q < 2.0) {
            return Err(invalid("datum", "ZKB data need 1 < q < 2"));
        }
        if !(c > 0.0 && t0 > 0.0) {
            return Err(invalid("datum", "ZKB needs c > 0 and t0 > 0"));
        }
    }
    if let DatumSpec::Datum(InitialDatum::CriticalGrowth { .. }) = datum {
        if !(q < 2.0) {
            return Err(invalid("datum", "critical growth needs 1 < q < 2"));
        }
    }

    let radii = r.list("grid", "radii")?;
    let radius = match r.num("grid", "R")? {
        Some(v) => v,
        None => *radii.last().ok_or_else(|| invalid("R", "required in [grid] unless radii is given"))?,
    };
    if !(radius > 0.0) {
        return Err(invalid("R", "must be positive"));
    }
    let h = r.required("grid", "h")?;
    if !(h > 0.0) {
        return Err(invalid("h", "must be positive"));
    }
    let half_width = r.num("grid", "L")?;
    let pad = r.int_or("grid", "pad", 2)? as usize;
    let delta = r.num_or("grid", "delta", 0.0)?;
    if !(delta >= 0.0) {
        return Err(invalid("delta", "must be nonnegative"));
    }
    let window_radius = r.num("grid", "window_radius")?;

    let default_start = match datum {
        DatumSpec::Zkb { t0, .. } => t0,
        _ => 0.0,
    };
    let defaults = StepConfig::default();
    let t_start = r.num_or("time", "t_start", default_start)?;
    let t_end = r.required("time", "t_end")?;
    let step = StepConfig {
        dt0: r.num_or("time", "dt0", defaults.dt0)?,
        t_start,
        t_end,
        save_every: r.int_or("time", "save_every", defaults.save_every as u64)? as usize,
        dt_growth: r.num_or("time", "dt_growth", defaults.dt_growth)?,
        dt_max: r.num_or("time", "dt_max", defaults.dt_max)?,
        newton_tol: r.num_or("solver", "newton_tol", defaults.newton_tol)?,
        max_newton: r.int_or("solver", "max_newton", defaults.max_newton as u64)? as usize,
        jacobian_eps: r.num("solver", "jacobian_eps")?,
        max_halvings: r.int_or("solver", "max_halvings", defaults.max_halvings as u64)? as usize,
        dt_min: r.num_or("solver", "dt_min", 1e-10 * t_end)?,
        sup_cap: r.num_or("solver", "sup_cap", defaults.sup_cap)?,
        linear_tol: r.num_or("solver", "linear_tol", defaults.linear_tol)?,
        blowup_growth: r.num("solver", "blowup_growth")?,
        window_radius,
        record_window: false,
    };
    step.validate().map_err(|e| invalid("time/solver", e.to_string()))?;

    let reports: Vec<String> = r
        .get("checks", "reports")
        .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default();
    if let Some(bad) = reports.iter().find(|x| !REPORTS.contains(&x.as_str())) {
        return Err(invalid("reports", format!("unknown report {bad:?}; known: {}", REPORTS.join(","))));
    }
    let times = r.list("checks", "times")?;
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("times", "must be increasing"));
    }
    let a2_times = r.list("checks", "a2_times")?;
    let amplitudes = r.list("checks", "amplitudes")?;
    let c = r.num_or("checks", "c", 1.0)?;
    if !(c > 0.0) {
        return Err(invalid("c", "must be positive"));
    }
    let delta_exponent = r.num_or("checks", "delta_exponent", 3.0)?;
    if !(delta_exponent > 2.0) {
        return Err(invalid("delta_exponent", "must exceed p = 2"));
    }

    let p = r.num_or("checks", "p", 1.0)?;
    if !(p >= 1.0) {
        return Err(invalid("p", "must be at least 1"));
    }

    let mut cfg = Config {
        q,
        dim,
        norm,
        datum,
        radius,
        h,
        half_width,
        pad,
        delta,
        radii,
        step,
        reports,
        samples: r.int_or("checks", "samples", 10_000)? as usize,
        identity_tol: r.num_or("checks", "identity_tol", 1e-10)?,
        monotonicity_tol: r.num_or("checks", "monotonicity_tol", 1e-12)?,
        p,
        r: r.num_or("checks", "r", 1.0)?,
        check_radius: r.num_or("checks", "radius", window_radius.unwrap_or(1.0))?,
        times,
        c,
        c1: r.num_or("checks", "c1", 1.0)?,
        c2: r.num_or("checks", "c2", 1.0)?,
        c3: r.num_or("checks", "c3", 1.0)?,
        c5: r.num_or("checks", "c5", 1.0)?,
        delta_exponent,
        t1: r.num("checks", "t1")?,
        t2: r.num("checks", "t2")?,
        a2_times,
        tol_window: r.num_or("checks", "tol_window", f64::INFINITY)?,
        amplitudes,
        bound: r.num("checks", "bound")?,
        output_dir: r.get("output", "dir").unwrap_or("out").to_string(),
        seed: r.int_or("output", "seed", 0)?,
        resolved: BTreeMap::new(),
    };
    cfg.resolved = resolve(&cfg);
    Ok(cfg)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "none".into())
}

fn resolve(c: &Config) -> BTreeMap<String, BTreeMap<String, String>> {
    let mut m: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut put = |s: &str, k: &str, v: String| {
        m.entry(s.to_string()).or_default().insert(k.to_string(), v);
    };
    put("problem", "q", c.q.to_string());
    put("problem", "N", c.dim.to_string());
    put("problem", "norm", c.norm.to_string());
    put("problem", "datum", datum_text(&c.datum));
    put("grid", "R", c.radius.to_string());
    put("grid", "h", c.h.to_string());
    put("grid", "L", opt(c.half_width));
    put("grid", "pad", c.pad.to_string());
    put("grid", "delta", c.delta.to_string());
    put("grid", "radii", list_text(&c.radii));
    put("grid", "window_radius", opt(c.step.window_radius));
    let s = &c.step;
    put("time", "dt0", s.dt0.to_string());
    put("time", "t_start", s.t_start.to_string());
    put("time", "t_end", s.t_end.to_string());
    put("time", "save_every", s.save_every.to_string());
    put("time", "dt_growth", s.dt_growth.to_string());
    put("time", "dt_max", s.dt_max.to_string());
    put("solver", "newton_tol", s.newton_tol.to_string());
    put("solver", "max_newton", s.max_newton.to_string());
    put("solver", "jacobian_eps", opt(s.jacobian_eps));
    put("solver", "max_halvings", s.max_halvings.to_string());
    put("solver", "dt_min", s.dt_min.to_string());
    put("solver", "sup_cap", s.sup_cap.to_string());
    put("solver", "linear_tol", s.linear_tol.to_string());
    put("solver", "blowup_growth", opt(s.blowup_growth));
    put("checks", "reports", c.reports.join(","));
    put("checks", "samples", c.samples.to_string());
    put("checks", "identity_tol", c.identity_tol.to_string());
    put("checks", "monotonicity_tol", c.monotonicity_tol.to_string());
    put("checks", "p", c.p.to_string());
    put("checks", "r", c.r.to_string());
    put("checks", "radius", c.check_radius.to_string());
    put("checks", "times", list_text(&c.times));
    put("checks", "c", c.c.to_string());
    put("checks", "c1", c.c1.to_string());
    put("checks", "c2", c.c2.to_string());
    put("checks", "c3", c.c3.to_string());
    put("checks", "c5", c.c5.to_string());
    put("checks", "delta_exponent", c.delta_exponent.to_string());
    put("checks", "t1", opt(c.t1));
    put("checks", "t2", opt(c.t2));
    put("checks", "a2_times", list_text(&c.a2_times));
    put("checks", "tol_window", c.tol_window.to_string());
    put("checks", "amplitudes", list_text(&c.amplitudes));
    put("checks", "bound", opt(c.bound));
    put("output", "dir", c.output_dir.clone());
    put("output", "seed", c.seed.to_string());
    m
}

impl Config {
    /// The resolved configuration in the input grammar. Keys whose value is
    /// `none` or empty are written as comments.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (sec, kv) in &self.resolved {
            let _ = writeln!(s, "[{sec}]");
            for (k, v) in kv {
                if v == "none" || v.is_empty() {
                    let _ = writeln!(s, "# {k} unset");
                } else {
                    let _ = writeln!(s, "{k} = {v}");
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn wants(&self, report: &str) -> bool {
        self.reports.iter().any(|r| r == report)
    }
}
