//! Run configuration: TOML in, validated typed sections out.
//!
//! Every frequency at this boundary is ordinary frequency in Hz. The parser
//! walks the spanned document itself instead of going through serde so that
//! it can report every violation at once, each with its line and key path.

use std::collections::BTreeSet;
use std::path::Path;

use sha2::{Digest, Sha256};
use toml::de::{DeTable, DeValue};

use crate::error::{CliError, CliResult};

/// Relaxation rates above this are almost certainly a unit mistake.
pub const MAX_THERMAL_RATE_HZ: f64 = 100e9;
/// Same for optical and mechanical rates.
pub const MAX_RATE_HZ: f64 = 10e12;

#[derive(Debug, Clone, PartialEq)]
pub struct CavityCfg {
    pub kappa_ex_hz: f64,
    pub kappa_s_hz: f64,
    pub kappa_a_hz: f64,
    /// Bare laser detuning.
    pub detuning_hz: f64,
    pub resonance_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchChoice {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPointCfg {
    pub n_c: Option<f64>,
    pub delta_bar_hz: Option<f64>,
    pub lock_red_sideband: bool,
    pub input_flux: Option<f64>,
    pub branch: BranchChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThermalCfg {
    None,
    /// `(gain_hz, gamma_hz)` per pole.
    Poles(Vec<(f64, f64)>),
    /// Single pole reproducing a measured `kappa_a sigma_0` at `at_hz`.
    Anchor {
        ka_sigma0_hz: f64,
        at_hz: Option<f64>,
        gamma_hz: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BathCfg {
    Occupancy(f64),
    Temperature(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanicalCfg {
    pub omega_m_hz: f64,
    pub gamma_m_hz: f64,
    pub g0_hz: f64,
    pub x_zpf_m: f64,
    pub bath: BathCfg,
    pub heating_per_photon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KerrCfg {
    Rate(f64),
    Material {
        n0: f64,
        n2: f64,
        v_mode_m3: f64,
        /// Stated rate that overrides the material estimate.
        g_kerr_hz: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCfg {
    pub eta_ex: f64,
    pub delta_lo_hz: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCfg {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
    pub log: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaterialCfg {
    Preset(String),
    Custom {
        density: f64,
        heat_capacity: f64,
        conductivity: f64,
        refractive_index: f64,
        thermo_optic: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatCfg {
    pub material: MaterialCfg,
    pub mode_radius_m: f64,
    pub outer_radius_m: f64,
    pub cells: usize,
    pub insulating: bool,
    pub absorbed_power_w: f64,
    pub max_poles: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitCfg {
    pub with_mechanics: bool,
    pub kappa_eff_hz: Option<f64>,
    pub delta_eff_hz: Option<f64>,
    pub kappa_ex_hz: Option<f64>,
    pub omega_m_hz: Option<f64>,
    pub gamma_m_hz: Option<f64>,
    /// Multiphoton coupling `sqrt(n_c) g0` seed.
    pub coupling_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermometryCfg {
    pub anchor_n_c: f64,
    pub anchor_n_f: f64,
    pub kappa_ex_hz: Option<f64>,
    pub g0_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCfg {
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// SHA-256 of the raw config bytes.
    pub sha256: String,
    pub cavity: CavityCfg,
    pub operating_point: OperatingPointCfg,
    pub thermal: ThermalCfg,
    pub mechanical: Option<MechanicalCfg>,
    pub kerr: Option<KerrCfg>,
    pub detection: DetectionCfg,
    pub sweep: Option<SweepCfg>,
    pub heat: Option<HeatCfg>,
    pub fit: FitCfg,
    pub thermometry: Option<ThermometryCfg>,
    pub oracle: OracleCfg,
}

// ---- generic spanned tree ------------------------------------------------

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Int(i64),
    Bool(bool),
    Str(String),
    Arr(Vec<(usize, Node)>),
    Table(Table),
    Other(&'static str),
}

impl Node {
    fn kind(&self) -> &'static str {
        match self {
            Node::Num(_) => "float",
            Node::Int(_) => "integer",
            Node::Bool(_) => "boolean",
            Node::Str(_) => "string",
            Node::Arr(_) => "array",
            Node::Table(_) => "table",
            Node::Other(k) => k,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Table {
    line: usize,
    entries: Vec<(String, usize, Node)>,
}

struct LineIndex(Vec<usize>);

impl LineIndex {
    fn new(src: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(src.match_indices('\n').map(|(i, _)| i + 1));
        LineIndex(starts)
    }

    fn line(&self, offset: usize) -> usize {
        match self.0.binary_search(&offset) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }
}

fn convert_value(v: &DeValue<'_>, line: usize, idx: &LineIndex) -> Node {
    match v {
        DeValue::String(s) => Node::Str(s.to_string()),
        DeValue::Integer(i) => match i64::from_str_radix(i.as_str(), i.radix()) {
            Ok(v) => Node::Int(v),
            Err(_) => Node::Other("out-of-range integer"),
        },
        DeValue::Float(f) => match f.as_str().parse::<f64>() {
            Ok(v) => Node::Num(v),
            Err(_) => Node::Other("unparseable float"),
        },
        DeValue::Boolean(b) => Node::Bool(*b),
        DeValue::Datetime(_) => Node::Other("datetime"),
        DeValue::Array(a) => Node::Arr(
            a.iter()
                .map(|item| {
                    let l = idx.line(item.span().start);
                    (l, convert_value(item.get_ref(), l, idx))
                })
                .collect(),
        ),
        DeValue::Table(t) => Node::Table(convert_table(t, line, idx)),
    }
}

fn convert_table(t: &DeTable<'_>, line: usize, idx: &LineIndex) -> Table {
    let mut entries: Vec<(String, usize, Node)> = t
        .iter()
        .map(|(k, v)| {
            let l = idx.line(k.span().start);
            (k.get_ref().to_string(), l, convert_value(v.get_ref(), l, idx))
        })
        .collect();
    entries.sort_by_key(|e| e.1);
    Table { line, entries }
}

// ---- section reader ------------------------------------------------------

/// Typed access to one table; remembers which keys were read so the rest can
/// be reported as unknown.
struct Section<'a> {
    path: String,
    table: &'a Table,
    used: BTreeSet<&'a str>,
}

struct Violations(Vec<String>);

impl Violations {
    fn push(&mut self, line: usize, path: &str, msg: impl AsRef<str>) {
        self.0.push(format!("line {line}: {path}: {}", msg.as_ref()));
    }
}

impl<'a> Section<'a> {
    fn new(path: impl Into<String>, table: &'a Table) -> Self {
        Section {
            path: path.into(),
            table,
            used: BTreeSet::new(),
        }
    }

    fn key_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn raw(&mut self, key: &'a str) -> Option<(usize, &'a Node)> {
        self.used.insert(key);
        self.table.entries.iter().find(|e| e.0 == key).map(|e| (e.1, &e.2))
    }

    fn f64_opt(&mut self, key: &'a str, v: &mut Violations) -> Option<(usize, f64)> {
        match self.raw(key)? {
            (l, Node::Num(x)) => Some((l, *x)),
            (l, Node::Int(i)) => Some((l, *i as f64)),
            (l, other) => {
                v.push(l, &self.key_path(key), format!("expected a number, found {}", other.kind()));
                None
            }
        }
    }

    fn f64_req(&mut self, key: &'a str, v: &mut Violations) -> Option<(usize, f64)> {
        if self.table.entries.iter().all(|e| e.0 != key) {
            v.push(self.table.line, &self.key_path(key), "required key is missing");
            self.used.insert(key);
            return None;
        }
        self.f64_opt(key, v)
    }

    fn usize_opt(&mut self, key: &'a str, v: &mut Violations) -> Option<(usize, usize)> {
        match self.raw(key)? {
            (l, Node::Int(i)) if *i >= 0 => Some((l, *i as usize)),
            (l, other) => {
                v.push(l, &self.key_path(key), format!("expected a non-negative integer, found {}", other.kind()));
                None
            }
        }
    }

    fn usize_req(&mut self, key: &'a str, v: &mut Violations) -> Option<(usize, usize)> {
        if self.table.entries.iter().all(|e| e.0 != key) {
            v.push(self.table.line, &self.key_path(key), "required key is missing");
            self.used.insert(key);
            return None;
        }
        self.usize_opt(key, v)
    }

    fn bool_opt(&mut self, key: &'a str, v: &mut Violations) -> Option<bool> {
        match self.raw(key)? {
            (_, Node::Bool(b)) => Some(*b),
            (l, other) => {
                v.push(l, &self.key_path(key), format!("expected a boolean, found {}", other.kind()));
                None
            }
        }
    }

    fn str_opt(&mut self, key: &'a str, v: &mut Violations) -> Option<(usize, &'a str)> {
        match self.raw(key)? {
            (l, Node::Str(s)) => Some((l, s.as_str())),
            (l, other) => {
                v.push(l, &self.key_path(key), format!("expected a string, found {}", other.kind()));
                None
            }
        }
    }

    fn table_opt(&mut self, key: &'a str, v: &mut Violations) -> Option<Section<'a>> {
        let path = self.key_path(key);
        match self.raw(key)? {
            (_, Node::Table(t)) => Some(Section::new(path, t)),
            (l, other) => {
                v.push(l, &path, format!("expected a table, found {}", other.kind()));
                None
            }
        }
    }

    fn tables(&mut self, key: &'a str, v: &mut Violations) -> Option<Vec<Section<'a>>> {
        let path = self.key_path(key);
        match self.raw(key)? {
            (_, Node::Arr(items)) => {
                let mut out = Vec::new();
                for (i, (l, item)) in items.iter().enumerate() {
                    match item {
                        Node::Table(t) => out.push(Section::new(format!("{path}[{i}]"), t)),
                        other => v.push(*l, &format!("{path}[{i}]"), format!("expected a table, found {}", other.kind())),
                    }
                }
                Some(out)
            }
            (l, other) => {
                v.push(l, &path, format!("expected an array of tables, found {}", other.kind()));
                None
            }
        }
    }

    /// Reports keys nobody asked for.
    fn finish(self, v: &mut Violations) {
        for (k, l, _) in &self.table.entries {
            if !self.used.contains(k.as_str()) {
                v.push(*l, &self.key_path(k), "unknown key");
            }
        }
    }
}

fn non_negative(v: &mut Violations, path: &str, x: Option<(usize, f64)>) -> Option<f64> {
    let (l, x) = x?;
    if !(x >= 0.0) || !x.is_finite() {
        v.push(l, path, format!("must be finite and >= 0, got {x}"));
        return None;
    }
    Some(x)
}

fn positive(v: &mut Violations, path: &str, x: Option<(usize, f64)>) -> Option<f64> {
    let (l, x) = x?;
    if !(x > 0.0) || !x.is_finite() {
        v.push(l, path, format!("must be finite and > 0, got {x}"));
        return None;
    }
    Some(x)
}

fn finite(v: &mut Violations, path: &str, x: Option<(usize, f64)>) -> Option<f64> {
    let (l, x) = x?;
    if !x.is_finite() {
        v.push(l, path, "must be finite");
        return None;
    }
    Some(x)
}

fn rate(v: &mut Violations, path: &str, x: Option<(usize, f64)>, limit: f64) -> Option<f64> {
    let line = x.map(|p| p.0);
    let r = non_negative(v, path, x)?;
    if r > limit {
        v.push(
            line.unwrap_or(0),
            path,
            format!("{r:e} Hz exceeds the sanity limit {limit:e} Hz (rates are ordinary frequencies in Hz)"),
        );
        return None;
    }
    Some(r)
}

// ---- sections ------------------------------------------------------------

fn parse_cavity(s: &mut Section<'_>, v: &mut Violations) -> Option<CavityCfg> {
    let kex = s.f64_req("kappa_ex_hz", v);
    let kex = rate(v, &s.key_path("kappa_ex_hz"), kex, MAX_RATE_HZ);
    let ks = s.f64_opt("kappa_s_hz", v);
    let ks = if ks.is_some() { rate(v, &s.key_path("kappa_s_hz"), ks, MAX_RATE_HZ) } else { Some(0.0) };
    let ka = s.f64_opt("kappa_a_hz", v);
    let ka = if ka.is_some() { rate(v, &s.key_path("kappa_a_hz"), ka, MAX_RATE_HZ) } else { Some(0.0) };
    let det = s.f64_opt("detuning_hz", v);
    let det = if det.is_some() { finite(v, &s.key_path("detuning_hz"), det) } else { Some(0.0) };
    let res = s.f64_opt("resonance_hz", v);
    let res = match res {
        Some(_) => Some(positive(v, &s.key_path("resonance_hz"), res)),
        None => Some(None),
    };
    let c = CavityCfg {
        kappa_ex_hz: kex?,
        kappa_s_hz: ks?,
        kappa_a_hz: ka?,
        detuning_hz: det?,
        resonance_hz: res?,
    };
    if c.kappa_ex_hz + c.kappa_s_hz + c.kappa_a_hz <= 0.0 {
        v.push(s.table.line, &s.path, "total loss rate must be > 0");
        return None;
    }
    Some(c)
}

fn parse_operating_point(s: &mut Section<'_>, v: &mut Violations) -> Option<OperatingPointCfg> {
    let n = s.f64_opt("n_c", v);
    let n_c = match n {
        Some(_) => Some(non_negative(v, &s.key_path("n_c"), n)),
        None => Some(None),
    };
    let db = s.f64_opt("delta_bar_hz", v);
    let delta_bar_hz = match db {
        Some(_) => Some(finite(v, &s.key_path("delta_bar_hz"), db)),
        None => Some(None),
    };
    let lock = s.bool_opt("lock_red_sideband", v).unwrap_or(false);
    let f = s.f64_opt("input_flux", v);
    let input_flux = match f {
        Some(_) => Some(non_negative(v, &s.key_path("input_flux"), f)),
        None => Some(None),
    };
    let branch = match s.str_opt("branch", v) {
        None => BranchChoice::Lower,
        Some((_, "lower")) => BranchChoice::Lower,
        Some((_, "upper")) => BranchChoice::Upper,
        Some((l, other)) => {
            v.push(l, &s.key_path("branch"), format!("expected \"lower\" or \"upper\", got {other:?}"));
            BranchChoice::Lower
        }
    };
    let op = OperatingPointCfg {
        n_c: n_c?,
        delta_bar_hz: delta_bar_hz?,
        lock_red_sideband: lock,
        input_flux: input_flux?,
        branch,
    };
    if op.input_flux.is_some() && (op.n_c.is_some() || op.delta_bar_hz.is_some() || op.lock_red_sideband) {
        v.push(s.table.line, &s.path, "input_flux solves for the mean field; do not also set n_c, delta_bar_hz or lock_red_sideband");
        return None;
    }
    if op.lock_red_sideband && op.delta_bar_hz.is_some() {
        v.push(s.table.line, &s.path, "lock_red_sideband and delta_bar_hz are mutually exclusive");
        return None;
    }
    Some(op)
}

fn parse_thermal(s: &mut Section<'_>, v: &mut Violations) -> Option<ThermalCfg> {
    let poles = s.tables("poles", v);
    let anchor = s.table_opt("anchor", v);
    match (poles, anchor) {
        (Some(_), Some(_)) => {
            v.push(s.table.line, &s.path, "give either poles or anchor, not both");
            None
        }
        (Some(ps), None) => {
            if ps.is_empty() {
                v.push(s.table.line, &s.key_path("poles"), "at least one pole is required");
                return None;
            }
            let mut out = Vec::new();
            let mut ok = true;
            for mut p in ps {
                let g = p.f64_req("gain_hz", v);
                let gain = finite(v, &p.key_path("gain_hz"), g);
                let r = p.f64_req("gamma_hz", v);
                let gamma = positive(v, &p.key_path("gamma_hz"), r).and_then(|x| {
                    if x > MAX_THERMAL_RATE_HZ {
                        v.push(r.unwrap().0, &p.key_path("gamma_hz"), format!("{x:e} Hz exceeds the thermal-rate sanity limit {MAX_THERMAL_RATE_HZ:e} Hz"));
                        None
                    } else {
                        Some(x)
                    }
                });
                match (gain, gamma) {
                    (Some(a), Some(b)) => out.push((a, b)),
                    _ => ok = false,
                }
                p.finish(v);
            }
            ok.then_some(ThermalCfg::Poles(out))
        }
        (None, Some(mut a)) => {
            let k = a.f64_req("ka_sigma0_hz", v);
            let k = finite(v, &a.key_path("ka_sigma0_hz"), k);
            let at = a.f64_opt("at_hz", v);
            let at = match at {
                Some(_) => Some(positive(v, &a.key_path("at_hz"), at)),
                None => Some(None),
            };
            let r = a.f64_req("gamma_hz", v);
            let g = positive(v, &a.key_path("gamma_hz"), r).and_then(|x| {
                if x > MAX_THERMAL_RATE_HZ {
                    v.push(r.unwrap().0, &a.key_path("gamma_hz"), format!("{x:e} Hz exceeds the thermal-rate sanity limit {MAX_THERMAL_RATE_HZ:e} Hz"));
                    None
                } else {
                    Some(x)
                }
            });
            a.finish(v);
            Some(ThermalCfg::Anchor {
                ka_sigma0_hz: k?,
                at_hz: at?,
                gamma_hz: g?,
            })
        }
        (None, None) => Some(ThermalCfg::None),
    }
}

fn parse_mechanical(s: &mut Section<'_>, v: &mut Violations) -> Option<MechanicalCfg> {
    let om = s.f64_req("omega_m_hz", v);
    let om = rate(v, &s.key_path("omega_m_hz"), om, MAX_RATE_HZ).and_then(|x| (x > 0.0).then_some(x));
    let gm = s.f64_req("gamma_m_hz", v);
    let gm = positive(v, &s.key_path("gamma_m_hz"), gm);
    let g0 = s.f64_req("g0_hz", v);
    let g0 = non_negative(v, &s.key_path("g0_hz"), g0);
    let xz = s.f64_opt("x_zpf_m", v);
    let xz = if xz.is_some() { non_negative(v, &s.key_path("x_zpf_m"), xz) } else { Some(0.0) };
    let n = s.f64_opt("n_th0", v);
    let t = s.f64_opt("temperature_k", v);
    let bath = match (n, t) {
        (Some(_), Some(_)) => {
            v.push(s.table.line, &s.path, "give either n_th0 or temperature_k, not both");
            None
        }
        (Some(_), None) => non_negative(v, &s.key_path("n_th0"), n).map(BathCfg::Occupancy),
        (None, Some(_)) => non_negative(v, &s.key_path("temperature_k"), t).map(BathCfg::Temperature),
        (None, None) => Some(BathCfg::Occupancy(0.0)),
    };
    let h = s.f64_opt("heating_per_photon", v);
    let h = if h.is_some() { non_negative(v, &s.key_path("heating_per_photon"), h) } else { Some(0.0) };
    Some(MechanicalCfg {
        omega_m_hz: om?,
        gamma_m_hz: gm?,
        g0_hz: g0?,
        x_zpf_m: xz?,
        bath: bath?,
        heating_per_photon: h?,
    })
}

fn parse_kerr(s: &mut Section<'_>, v: &mut Violations) -> Option<KerrCfg> {
    let g = s.f64_opt("g_kerr_hz", v);
    let g = match g {
        Some(_) => Some(finite(v, &s.key_path("g_kerr_hz"), g)),
        None => Some(None),
    }?;
    let m = s.table_opt("material", v);
    match m {
        None => match g {
            Some(x) => Some(KerrCfg::Rate(x)),
            None => {
                v.push(s.table.line, &s.path, "needs g_kerr_hz or a material table");
                None
            }
        },
        Some(mut m) => {
            let n0 = m.f64_req("n0", v);
            let n0 = positive(v, &m.key_path("n0"), n0);
            let n2 = m.f64_req("n2", v);
            let n2 = non_negative(v, &m.key_path("n2"), n2);
            let vm = m.f64_req("v_mode_m3", v);
            let vm = positive(v, &m.key_path("v_mode_m3"), vm);
            let ov = m.bool_opt("override", v).unwrap_or(false);
            m.finish(v);
            if g.is_some() && !ov {
                v.push(s.table.line, &s.key_path("g_kerr_hz"), "a stated rate next to a material needs material.override = true");
                return None;
            }
            Some(KerrCfg::Material {
                n0: n0?,
                n2: n2?,
                v_mode_m3: vm?,
                g_kerr_hz: g,
            })
        }
    }
}

fn parse_detection(s: &mut Section<'_>, v: &mut Violations) -> Option<DetectionCfg> {
    let e = s.f64_opt("eta_ex", v);
    let eta = match e {
        Some((l, x)) if !(0.0..=1.0).contains(&x) => {
            v.push(l, &s.key_path("eta_ex"), format!("detection efficiency must lie in [0, 1], got {x}"));
            None
        }
        Some((_, x)) => Some(x),
        None => Some(1.0),
    };
    let d = s.f64_opt("delta_lo_hz", v);
    let d = if d.is_some() { finite(v, &s.key_path("delta_lo_hz"), d) } else { Some(0.0) };
    let t = s.f64_opt("theta", v);
    let t = if t.is_some() { finite(v, &s.key_path("theta"), t) } else { Some(0.0) };
    Some(DetectionCfg {
        eta_ex: eta?,
        delta_lo_hz: d?,
        theta: t?,
    })
}

fn check_sweep(start: f64, stop: f64, points: usize, log: bool) -> Result<SweepCfg, String> {
    if !start.is_finite() || !stop.is_finite() {
        return Err("start and stop must be finite".into());
    }
    if !(stop > start) {
        return Err(format!("stop ({stop}) must exceed start ({start})"));
    }
    if points < 2 {
        return Err(format!("need at least 2 points, got {points}"));
    }
    if log && !(start > 0.0) {
        return Err("a log grid needs start > 0".into());
    }
    Ok(SweepCfg {
        start_hz: start,
        stop_hz: stop,
        points,
        log,
    })
}

fn parse_sweep(s: &mut Section<'_>, v: &mut Violations) -> Option<SweepCfg> {
    let a = s.f64_req("start_hz", v);
    let b = s.f64_req("stop_hz", v);
    let n = s.usize_req("points", v);
    let log = s.bool_opt("log", v).unwrap_or(false);
    let (a, b, n) = (a?, b?, n?);
    match check_sweep(a.1, b.1, n.1, log) {
        Ok(c) => Some(c),
        Err(e) => {
            v.push(a.0, &s.path, e);
            None
        }
    }
}

fn parse_heat(s: &mut Section<'_>, v: &mut Violations) -> Option<HeatCfg> {
    let material = match s.raw("material") {
        Some((_, Node::Str(name))) => {
            if cavfb_core::thermal::MaterialProps::preset(name).is_none() {
                let l = s.table.entries.iter().find(|e| e.0 == "material").map(|e| e.1).unwrap_or(0);
                v.push(l, &s.key_path("material"), format!("unknown preset {name:?} (silicon, silica, silicon-nitride)"));
                None
            } else {
                Some(MaterialCfg::Preset(name.clone()))
            }
        }
        Some((_, Node::Table(_))) => {
            let mut m = s.table_opt("material", v).expect("checked above");
            let mut get = |k: &'static str| {
                let x = m.f64_req(k, v);
                positive(v, &m.key_path(k), x)
            };
            let (d, c, k, n) = (get("density"), get("heat_capacity"), get("conductivity"), get("refractive_index"));
            let t = m.f64_req("thermo_optic", v);
            let t = finite(v, &m.key_path("thermo_optic"), t);
            m.finish(v);
            Some(MaterialCfg::Custom {
                density: d?,
                heat_capacity: c?,
                conductivity: k?,
                refractive_index: n?,
                thermo_optic: t?,
            })
        }
        Some((l, other)) => {
            v.push(l, &s.key_path("material"), format!("expected a preset name or a table, found {}", other.kind()));
            None
        }
        None => {
            v.push(s.table.line, &s.key_path("material"), "required key is missing");
            None
        }
    };
    let a = s.f64_req("mode_radius_m", v);
    let a = positive(v, &s.key_path("mode_radius_m"), a);
    let r = s.f64_req("outer_radius_m", v);
    let r = positive(v, &s.key_path("outer_radius_m"), r);
    let cells = s.usize_opt("cells", v).map(|c| c.1).unwrap_or(400);
    let boundary = match s.str_opt("boundary", v) {
        None | Some((_, "fixed")) => Some(false),
        Some((_, "insulating")) => Some(true),
        Some((l, other)) => {
            v.push(l, &s.key_path("boundary"), format!("expected \"fixed\" or \"insulating\", got {other:?}"));
            None
        }
    };
    let p = s.f64_opt("absorbed_power_w", v);
    let p = if p.is_some() { positive(v, &s.key_path("absorbed_power_w"), p) } else { Some(1e-3) };
    let mp = s.usize_opt("max_poles", v).map(|c| c.1).unwrap_or(4);
    let tol = s.f64_opt("tolerance", v);
    let tol = if tol.is_some() { positive(v, &s.key_path("tolerance"), tol) } else { Some(0.05) };
    if cells < 4 {
        v.push(s.table.line, &s.key_path("cells"), "need at least 4 cells");
    }
    if mp < 1 {
        v.push(s.table.line, &s.key_path("max_poles"), "need at least 1 pole");
    }
    Some(HeatCfg {
        material: material?,
        mode_radius_m: a?,
        outer_radius_m: r?,
        cells,
        insulating: boundary?,
        absorbed_power_w: p?,
        max_poles: mp,
        tolerance: tol?,
    })
}

fn parse_fit(s: &mut Section<'_>, v: &mut Violations) -> Option<FitCfg> {
    let with_mechanics = match s.str_opt("model", v) {
        None | Some((_, "bare")) => Some(false),
        Some((_, "with-mechanics")) => Some(true),
        Some((l, other)) => {
            v.push(l, &s.key_path("model"), format!("expected \"bare\" or \"with-mechanics\", got {other:?}"));
            None
        }
    };
    let mut opt_pos = |k: &'static str, v: &mut Violations| {
        let x = s.f64_opt(k, v);
        match x {
            Some(_) => positive(v, &format!("fit.{k}"), x).map(Some),
            None => Some(None),
        }
    };
    let ke = opt_pos("kappa_eff_hz", v);
    let kx = opt_pos("kappa_ex_hz", v);
    let om = opt_pos("omega_m_hz", v);
    let gm = opt_pos("gamma_m_hz", v);
    let g = opt_pos("coupling_hz", v);
    let de = s.f64_opt("delta_eff_hz", v);
    let de = match de {
        Some(_) => finite(v, &s.key_path("delta_eff_hz"), de).map(Some),
        None => Some(None),
    };
    let cfg = FitCfg {
        with_mechanics: with_mechanics?,
        kappa_eff_hz: ke?,
        delta_eff_hz: de?,
        kappa_ex_hz: kx?,
        omega_m_hz: om?,
        gamma_m_hz: gm?,
        coupling_hz: g?,
    };
    Some(cfg)
}

fn parse_thermometry(s: &mut Section<'_>, v: &mut Violations) -> Option<ThermometryCfg> {
    let n = s.f64_req("anchor_n_c", v);
    let n = positive(v, &s.key_path("anchor_n_c"), n);
    let f = s.f64_req("anchor_n_f", v);
    let f = non_negative(v, &s.key_path("anchor_n_f"), f);
    let k = s.f64_opt("kappa_ex_hz", v);
    let k = match k {
        Some(_) => positive(v, &s.key_path("kappa_ex_hz"), k).map(Some),
        None => Some(None),
    };
    let g = s.f64_opt("g0_hz", v);
    let g = match g {
        Some(_) => positive(v, &s.key_path("g0_hz"), g).map(Some),
        None => Some(None),
    };
    Some(ThermometryCfg {
        anchor_n_c: n?,
        anchor_n_f: f?,
        kappa_ex_hz: k?,
        g0_hz: g?,
    })
}

fn parse_oracle(s: &mut Section<'_>, v: &mut Violations) -> Option<OracleCfg> {
    let t = s.f64_opt("tolerance", v);
    let t = if t.is_some() { positive(v, &s.key_path("tolerance"), t) } else { Some(1e-6) };
    Some(OracleCfg { tolerance: t? })
}

/// Parses and validates a config document. `Err` lists every violation.
pub fn parse_str(src: &str) -> Result<RunConfig, Vec<String>> {
    let idx = LineIndex::new(src);
    let doc = match DeTable::parse(src) {
        Ok(d) => d,
        Err(e) => {
            let line = e.span().map(|s| idx.line(s.start)).unwrap_or(0);
            return Err(vec![format!("line {line}: syntax error: {}", e.message().trim())]);
        }
    };
    let root = convert_table(doc.get_ref(), 1, &idx);
    let mut v = Violations(Vec::new());
    let mut top = Section::new("", &root);

    macro_rules! section {
        ($key:literal, $parse:ident) => {{
            match top.table_opt($key, &mut v) {
                Some(mut s) => {
                    let out = $parse(&mut s, &mut v);
                    s.finish(&mut v);
                    Some(out)
                }
                None => None,
            }
        }};
    }

    let cavity = section!("cavity", parse_cavity);
    if cavity.is_none() && root.entries.iter().all(|e| e.0 != "cavity") {
        v.push(1, "cavity", "required section is missing");
    }
    let op = section!("operating_point", parse_operating_point);
    let thermal = section!("thermal", parse_thermal);
    let mech = section!("mechanical", parse_mechanical);
    let kerr = section!("kerr", parse_kerr);
    let det = section!("detection", parse_detection);
    let sweep = section!("sweep", parse_sweep);
    let heat = section!("heat", parse_heat);
    let fit = section!("fit", parse_fit);
    let thermo = section!("thermometry", parse_thermometry);
    let oracle = section!("oracle", parse_oracle);
    top.finish(&mut v);

    if op.as_ref().and_then(|o| o.as_ref()).is_some_and(|o| o.lock_red_sideband) && mech.is_none() {
        v.push(1, "operating_point.lock_red_sideband", "needs a [mechanical] section");
    }
    if let Some(Some(ThermalCfg::Anchor { at_hz: None, .. })) = &thermal {
        if mech.is_none() {
            v.push(1, "thermal.anchor.at_hz", "defaults to the mechanical frequency, but there is no [mechanical] section");
        }
    }

    if !v.0.is_empty() {
        return Err(v.0);
    }
    fn unwrap_or<T>(o: Option<Option<T>>, d: T) -> T {
        o.map(|x| x.expect("violations were empty")).unwrap_or(d)
    }
    Ok(RunConfig {
        sha256: hex::encode(Sha256::digest(src.as_bytes())),
        cavity: cavity.flatten().expect("violations were empty"),
        operating_point: unwrap_or(
            op,
            OperatingPointCfg {
                n_c: None,
                delta_bar_hz: None,
                lock_red_sideband: false,
                input_flux: None,
                branch: BranchChoice::Lower,
            },
        ),
        thermal: unwrap_or(thermal, ThermalCfg::None),
        mechanical: mech.flatten(),
        kerr: kerr.flatten(),
        detection: unwrap_or(
            det,
            DetectionCfg {
                eta_ex: 1.0,
                delta_lo_hz: 0.0,
                theta: 0.0,
            },
        ),
        sweep: sweep.flatten(),
        heat: heat.flatten(),
        fit: unwrap_or(
            fit,
            FitCfg {
                with_mechanics: false,
                kappa_eff_hz: None,
                delta_eff_hz: None,
                kappa_ex_hz: None,
                omega_m_hz: None,
                gamma_m_hz: None,
                coupling_hz: None,
            },
        ),
        thermometry: thermo.flatten(),
        oracle: unwrap_or(oracle, OracleCfg { tolerance: 1e-6 }),
    })
}

pub fn parse_config(path: &Path) -> CliResult<RunConfig> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
    parse_str(&src).map_err(|errs| {
        CliError::config(format!("{} violation(s) in {}", errs.len(), path.display())).with_details(errs)
    })
}

/// `start,stop,points[,log]` in Hz, as given on the command line.
pub fn parse_grid_flag(s: &str) -> CliResult<SweepCfg> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(CliError::usage(format!("--grid expects start,stop,points[,log], got {s:?}")));
    }
    let num = |p: &str| p.parse::<f64>().map_err(|_| CliError::usage(format!("--grid: {p:?} is not a number")));
    let start = num(parts[0])?;
    let stop = num(parts[1])?;
    let points = parts[2]
        .parse::<usize>()
        .map_err(|_| CliError::usage(format!("--grid: {:?} is not a point count", parts[2])))?;
    let log = match parts.get(3) {
        None => false,
        Some(&"log") => true,
        Some(&"lin") | Some(&"linear") => false,
        Some(other) => return Err(CliError::usage(format!("--grid: expected log or lin, got {other:?}"))),
    };
    check_sweep(start, stop, points, log).map_err(|e| CliError::usage(format!("--grid: {e}")))
}
