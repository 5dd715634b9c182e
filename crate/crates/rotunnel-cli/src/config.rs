//! Run configuration: a TOML file of dotted keys, table defaults, `--set` overrides.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rotunnel::channels::{
    roughness_to_b1, AcousticParams, BudgetInputs, EddyPlateParams, ElasticParams, GasParams, I0Mode, SeismicParams,
    SquidParams,
};
use rotunnel::constants::AMU;
use rotunnel::open::{IntegrationOptions, Method, RateUnit, SpectralType, DEFAULT_OMEGA_TOL, DEFAULT_STEP_FACTOR};
use rotunnel::rotor::{cutoff_drift, DimensionlessConfig, OperatorKind};
use rotunnel::units::{derive_scales, DerivedScales, PhysicalParams};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// Equal superposition of the lowest two levels, localized left.
    Doublet,
    /// Left-well Gaussian packet.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKind {
    None,
    Coupling(OperatorKind),
    Gas,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub n_max: usize,
    /// Overrides for the dimensionless parameters derived from `physical.*`.
    pub v0: Option<f64>,
    pub hx: Option<f64>,
    pub hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveConfig {
    pub initial: InitialState,
    pub sigma: f64,
    /// Run length in tunneling periods.
    pub periods: f64,
    pub samples_per_period: usize,
    pub window_periods: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub gamma: f64,
    pub unit: RateUnit,
    pub temperature: f64,
    pub spectral: SpectralType,
    /// Gas localization rate Λ_R (s⁻¹).
    pub lambda: f64,
    pub omega_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub scale: AxisScale,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.scale {
                    AxisScale::Linear => self.min + f * (self.max - self.min),
                    AxisScale::Log => (self.min.ln() + f * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub physical: PhysicalParams,
    pub model: ModelConfig,
    pub evolve: EvolveConfig,
    pub channel: ChannelConfig,
    pub integrator: IntegrationOptions,
    pub x: Option<Axis>,
    pub y: Option<Axis>,
    pub levels: usize,
    pub budget: BudgetInputs,
    /// Non-fatal findings, e.g. an unconverged basis.
    pub warnings: Vec<String>,
    /// Every resolved key in file order of the schema.
    pub resolved: Vec<(String, String)>,
}

impl Config {
    pub fn scales(&self) -> Result<DerivedScales, CliError> {
        Ok(derive_scales(&self.physical)?)
    }

    /// Dimensionless problem with `model.*` overrides applied.
    pub fn dimensionless(&self) -> Result<(DerivedScales, DimensionlessConfig), CliError> {
        let s = self.scales()?;
        let cfg = DimensionlessConfig::new(
            self.model.v0.unwrap_or(s.v0),
            self.model.hx.unwrap_or(s.hx),
            self.model.hz.unwrap_or(s.hz),
            self.model.n_max,
        );
        cfg.validate()?;
        Ok((s, cfg))
    }
}

/// Parse `text`, apply `key=value` overrides and resolve against the defaults.
pub fn load(text: &str, overrides: &[String]) -> Result<Config, CliError> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(vec![format!("parse error: {e}")]))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    Reader::new(table).resolve()
}

fn apply_override(table: &mut Table, arg: &str) -> Result<(), CliError> {
    let Some((key, value)) = arg.split_once('=') else {
        return Err(CliError::Config(vec![format!("--set {arg}: expected key=value")]));
    };
    let key = key.trim();
    let value = value.trim();
    let parsed: Table = match format!("{key} = {value}").parse() {
        Ok(t) => t,
        // Bare words are taken as strings.
        Err(_) => format!("{key} = {}", Value::String(value.to_string()))
            .parse()
            .map_err(|e| CliError::Config(vec![format!("--set {arg}: {e}")]))?,
    };
    merge(table, parsed);
    Ok(())
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

struct Reader {
    table: Table,
    used: BTreeSet<String>,
    errors: Vec<String>,
    resolved: Vec<(String, String)>,
}

impl Reader {
    fn new(table: Table) -> Self {
        Reader { table, used: BTreeSet::new(), errors: Vec::new(), resolved: Vec::new() }
    }

    fn lookup(&self, path: &str) -> Option<&Value> {
        let mut parts = path.split('.');
        let mut cur = self.table.get(parts.next()?)?;
        for p in parts {
            cur = cur.as_table()?.get(p)?;
        }
        Some(cur)
    }

    fn present(&self, prefix: &str) -> bool {
        self.lookup(prefix).is_some()
    }

    fn take(&mut self, path: &str) -> Option<Value> {
        self.used.insert(path.to_string());
        self.lookup(path).cloned()
    }

    fn record(&mut self, path: &str, v: impl ToString) {
        self.resolved.push((path.to_string(), v.to_string()));
    }

    fn opt_f64(&mut self, path: &str) -> Option<f64> {
        let v = match self.take(path)? {
            Value::Float(x) => x,
            Value::Integer(i) => i as f64,
            other => {
                self.errors.push(format!("{path}: expected a number, got {}", other.type_str()));
                return None;
            }
        };
        self.record(path, v);
        Some(v)
    }

    fn f64(&mut self, path: &str, default: f64) -> f64 {
        match self.opt_f64(path) {
            Some(v) => v,
            None => {
                if !self.resolved.iter().any(|(k, _)| k == path) {
                    self.record(path, default);
                }
                default
            }
        }
    }

    fn usize(&mut self, path: &str, default: usize) -> usize {
        let v = match self.take(path) {
            None => default,
            Some(Value::Integer(i)) if i >= 0 => i as usize,
            Some(other) => {
                self.errors.push(format!("{path}: expected a non-negative integer, got {other}"));
                default
            }
        };
        self.record(path, v);
        v
    }

    fn string(&mut self, path: &str, default: &str) -> String {
        let v = match self.take(path) {
            None => default.to_string(),
            Some(Value::String(s)) => s,
            Some(other) => {
                self.errors.push(format!("{path}: expected a string, got {}", other.type_str()));
                default.to_string()
            }
        };
        self.record(path, &v);
        v
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0) || !v.is_finite() {
            self.errors.push(format!("{path}: must be positive, got {v}"));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v >= 0.0) || !v.is_finite() {
            self.errors.push(format!("{path}: must be non-negative, got {v}"));
        }
    }

    fn axis(&mut self, name: &str) -> Option<Axis> {
        let base = format!("sweep.{name}");
        if !self.present(&base) {
            return None;
        }
        let param = self.string(&format!("{base}.param"), "");
        let min = self.f64(&format!("{base}.min"), 0.0);
        let max = self.f64(&format!("{base}.max"), 1.0);
        let count = self.usize(&format!("{base}.count"), 2);
        let scale = match self.string(&format!("{base}.scale"), "linear").as_str() {
            "linear" => AxisScale::Linear,
            "log" => AxisScale::Log,
            other => {
                self.errors.push(format!("{base}.scale: expected 'linear' or 'log', got '{other}'"));
                AxisScale::Linear
            }
        };
        if param.is_empty() {
            self.errors.push(format!("{base}.param: missing"));
        }
        if count < 2 {
            self.errors.push(format!("{base}.count: a sweep axis needs at least 2 points, got {count}"));
        }
        if !(max > min) {
            self.errors.push(format!("{base}.max: must exceed {base}.min ({min} >= {max})"));
        }
        if scale == AxisScale::Log && !(min > 0.0) {
            self.errors.push(format!("{base}.min: log axis needs a positive minimum, got {min}"));
        }
        Some(Axis { param, min, max, count, scale })
    }

    fn resolve(mut self) -> Result<Config, CliError> {
        let t = PhysicalParams::table();
        let physical = PhysicalParams {
            radius: self.f64("physical.radius_m", t.radius),
            separation: self.f64("physical.separation_m", t.separation),
            density: self.f64("physical.density_kg_m3", t.density),
            magnetization: self.f64("physical.magnetization_a_m", t.magnetization),
            b_x: self.f64("physical.bx_t", t.b_x),
            b_z: self.f64("physical.bz_t", t.b_z),
        };
        if let Err(e) = physical.validate() {
            self.errors.push(format!("physical: {e}"));
        }

        let model = ModelConfig {
            n_max: self.usize("model.n_max", 20),
            v0: self.opt_f64("model.v0"),
            hx: self.opt_f64("model.hx"),
            hz: self.opt_f64("model.hz"),
        };
        if model.n_max < 2 {
            self.errors.push(format!("model.n_max: must be at least 2, got {}", model.n_max));
        }
        if let Some(v) = model.v0 {
            self.non_negative("model.v0", v);
        }

        let initial = match self.string("evolve.initial", "doublet").as_str() {
            "doublet" => InitialState::Doublet,
            "gaussian" => InitialState::Gaussian,
            other => {
                self.errors.push(format!("evolve.initial: expected 'doublet' or 'gaussian', got '{other}'"));
                InitialState::Doublet
            }
        };
        let evolve = EvolveConfig {
            initial,
            sigma: self.f64("evolve.sigma", 0.25),
            periods: self.f64("evolve.periods", 7.0),
            samples_per_period: self.usize("evolve.samples_per_period", 100),
            window_periods: self.f64("evolve.window_periods", 5.0),
        };
        self.positive("evolve.periods", evolve.periods);
        self.positive("evolve.window_periods", evolve.window_periods);
        if evolve.samples_per_period < 4 {
            self.errors.push(format!(
                "evolve.samples_per_period: at least 4 samples per period are needed, got {}",
                evolve.samples_per_period
            ));
        }

        let kind = match self.string("channel.kind", "none").as_str() {
            "none" => ChannelKind::None,
            "gas" => ChannelKind::Gas,
            other => match other.parse::<OperatorKind>() {
                Ok(k) if k.is_hermitian() => ChannelKind::Coupling(k),
                _ => {
                    self.errors.push(format!(
                        "channel.kind: expected none, gas, cos, sin, cos2, sin2 or l_theta, got '{other}'"
                    ));
                    ChannelKind::None
                }
            },
        };
        let unit = match self.string("channel.gamma_unit", "per_second").as_str() {
            "per_second" => RateUnit::PerSecond,
            "dimensionless" => RateUnit::Dimensionless,
            other => {
                self.errors.push(format!("channel.gamma_unit: expected 'per_second' or 'dimensionless', got '{other}'"));
                RateUnit::PerSecond
            }
        };
        let spectral = match self.string("channel.spectral", "flat").as_str() {
            "flat" => SpectralType::FlatEffective,
            "ohmic" => SpectralType::Ohmic,
            "super_ohmic" => SpectralType::SuperOhmic,
            other => {
                self.errors.push(format!("channel.spectral: expected flat, ohmic or super_ohmic, got '{other}'"));
                SpectralType::FlatEffective
            }
        };
        let channel = ChannelConfig {
            kind,
            gamma: self.f64("channel.gamma", 1.3e4),
            unit,
            temperature: self.f64("channel.temperature_k", 3.2e-3),
            spectral,
            lambda: self.f64("channel.lambda_s", 9.7e-6),
            omega_tol: self.f64("channel.omega_tol", DEFAULT_OMEGA_TOL),
        };
        self.non_negative("channel.gamma", channel.gamma);
        self.non_negative("channel.temperature_k", channel.temperature);
        self.non_negative("channel.lambda_s", channel.lambda);
        self.positive("channel.omega_tol", channel.omega_tol);

        let method = match self.string("integrator.method", "auto").as_str() {
            "auto" => Method::Auto,
            "rk4" => Method::LabFrameRk4,
            other => {
                self.errors.push(format!("integrator.method: expected 'auto' or 'rk4', got '{other}'"));
                Method::Auto
            }
        };
        let integrator = IntegrationOptions {
            method,
            step_factor: self.f64("integrator.step_factor", DEFAULT_STEP_FACTOR),
            check_positivity: true,
        };
        self.positive("integrator.step_factor", integrator.step_factor);

        let x = self.axis("x");
        let y = self.axis("y");
        let levels = self.usize("output.levels", 10);

        let budget = self.budget(&physical);

        let mut unknown = Vec::new();
        collect_unknown(&self.table, "", &self.used, &mut unknown);
        for k in unknown {
            self.errors.push(format!("{k}: unknown key"));
        }
        if !self.errors.is_empty() {
            return Err(CliError::Config(self.errors));
        }

        let mut cfg = Config {
            physical,
            model,
            evolve,
            channel,
            integrator,
            x,
            y,
            levels,
            budget,
            warnings: Vec::new(),
            resolved: self.resolved,
        };
        if let Ok((_, d)) = cfg.dimensionless() {
            // Same check as the cutoff self-test: the lowest levels must not move when N doubles.
            match cutoff_drift(&d, 5.min(d.dim() - 1)) {
                Ok(drift) if drift > 1e-8 => cfg.warnings.push(format!(
                    "model.n_max = {} is not converged at v0 = {}: lowest levels move by {drift:.3e} when N doubles; \
                     the convergence check will likely fail",
                    d.n_max, d.v0
                )),
                Ok(_) => {}
                Err(e) => cfg.warnings.push(format!("convergence check could not run: {e}")),
            }
        }
        Ok(cfg)
    }

    fn enabled(&mut self, base: &str) -> bool {
        if !self.present(base) {
            return false;
        }
        let path = format!("{base}.enabled");
        match self.take(&path) {
            None => true,
            Some(Value::Boolean(b)) => {
                self.record(&path, b);
                b
            }
            Some(other) => {
                self.errors.push(format!("{path}: expected true or false, got {}", other.type_str()));
                false
            }
        }
    }

    fn budget(&mut self, physical: &PhysicalParams) -> BudgetInputs {
        let mut b = BudgetInputs::default();
        if self.enabled("budget.seismic") {
            let s = SeismicParams {
                sqrt_sz: self.f64("budget.seismic.sqrt_sz_m_rthz", 1e-11),
                bandwidth: self.f64("budget.seismic.bandwidth_hz", 1e3),
            };
            self.non_negative("budget.seismic.sqrt_sz_m_rthz", s.sqrt_sz);
            self.non_negative("budget.seismic.bandwidth_hz", s.bandwidth);
            b.seismic = Some(s);
        }
        if self.enabled("budget.gas") {
            let mass = self.f64("budget.gas.mass_amu", 4.0026) * AMU;
            let roughness = self.f64("budget.gas.roughness", 0.05);
            let b1 = match roughness_to_b1(roughness, physical.radius) {
                Ok(v) => v,
                Err(e) => {
                    self.errors.push(format!("budget.gas.roughness: {e}"));
                    0.0
                }
            };
            let g = GasParams {
                mass,
                density: self.f64("budget.gas.density_m3", 1e11),
                temperature: self.f64("budget.gas.temperature_k", 3.2e-3),
                born_strength: self.f64("budget.gas.born_strength_j", 1e-23),
                b1,
            };
            self.positive("budget.gas.mass_amu", mass);
            self.non_negative("budget.gas.density_m3", g.density);
            self.non_negative("budget.gas.temperature_k", g.temperature);
            self.non_negative("budget.gas.born_strength_j", g.born_strength);
            b.gas = Some(g);
        }
        if self.enabled("budget.eddy_plate") {
            let mode = match self.string("budget.eddy_plate.i0_mode", "fixed").as_str() {
                "fixed" => I0Mode::Fixed,
                "quadrature" => I0Mode::Quadrature,
                other => {
                    self.errors.push(format!("budget.eddy_plate.i0_mode: expected 'fixed' or 'quadrature', got '{other}'"));
                    I0Mode::Fixed
                }
            };
            b.eddy_plate = Some(EddyPlateParams {
                normal_conductivity: self.f64("budget.eddy_plate.normal_conductivity_s_m", 1e9),
                london_depth: self.f64("budget.eddy_plate.london_depth_m", 150e-9),
                critical_temperature: self.f64("budget.eddy_plate.critical_temperature_k", 4.47),
                temperature: self.f64("budget.eddy_plate.temperature_k", 3.2e-3),
                i0_mode: mode,
            });
        }
        if self.enabled("budget.eddy_particle") {
            let sigma = self.f64("budget.eddy_particle.conductivity_s_m", 0.667e6);
            self.non_negative("budget.eddy_particle.conductivity_s_m", sigma);
            b.eddy_particle = Some(sigma);
        }
        if self.enabled("budget.acoustic") {
            let t = ElasticParams::tantalum();
            b.acoustic = Some(AcousticParams {
                elastic: ElasticParams {
                    density: self.f64("budget.acoustic.density_kg_m3", t.density),
                    c_l: self.f64("budget.acoustic.c_l_m_s", t.c_l),
                    c_t: self.f64("budget.acoustic.c_t_m_s", t.c_t),
                },
                temperature: self.f64("budget.acoustic.temperature_k", 3.2e-3),
            });
        }
        if self.enabled("budget.squid") {
            b.squid = Some(SquidParams {
                splitting: 2.0 * PI * self.f64("budget.squid.splitting_hz", 1e10),
                persistent_current: self.f64("budget.squid.persistent_current_a", 0.5e-6),
                t1: self.f64("budget.squid.t1_s", 1e-3),
                t2: self.f64("budget.squid.t2_s", 1e-3),
                temperature: self.f64("budget.squid.temperature_k", 0.0),
                flux_amplitude: self.f64("budget.squid.flux_amplitude_wb", 1e-22),
            });
        }
        b
    }
}

fn collect_unknown(t: &Table, prefix: &str, used: &BTreeSet<String>, out: &mut Vec<String>) {
    for (k, v) in t {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(sub) if !used.contains(&path) => collect_unknown(sub, &path, used, out),
            _ if used.contains(&path) => {}
            _ => out.push(path),
        }
    }
}
