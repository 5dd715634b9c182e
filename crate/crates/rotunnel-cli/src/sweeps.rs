//! Spectrum scans, single traces and visibility maps.

use std::f64::consts::PI;

use rayon::prelude::*;
use rotunnel::open::{
    build_jump_operators, integrate_master_equation, steady_state_diagnostics, DensityMatrix, Dissipator, LindbladChannel,
};
use rotunnel::rotor::{solve, tunneling_regime, DimensionlessConfig, Spectrum};
use rotunnel::unitary::{doublet_state, evolve, gaussian_packet, time_grid, visibility_window, StateVector, VisibilityWindow};
use rotunnel::units::DerivedScales;

use crate::config::{Axis, ChannelConfig, ChannelKind, Config, InitialState};
use crate::output::{flag, num, Table};
use crate::CliError;

pub const MODEL_PARAMS: [&str; 3] = ["v0", "hx", "hz"];
pub const CHANNEL_PARAMS: [&str; 3] = ["gamma", "temperature", "lambda"];

fn check_axis(axis: &Axis, allowed: &[&str], command: &str) -> Result<(), CliError> {
    if allowed.contains(&axis.param.as_str()) {
        Ok(())
    } else {
        Err(CliError::Config(vec![format!(
            "sweep: {command} sweeps over {}, got '{}'",
            allowed.join(", "),
            axis.param
        )]))
    }
}

fn with_model_param(d: &DimensionlessConfig, param: &str, v: f64) -> DimensionlessConfig {
    let mut d = *d;
    match param {
        "v0" => d.v0 = v,
        "hx" => d.hx = v,
        "hz" => d.hz = v,
        _ => unreachable!("axis names are checked before the sweep"),
    }
    d
}

fn with_channel_param(c: &ChannelConfig, param: &str, v: f64) -> ChannelConfig {
    let mut c = *c;
    match param {
        "gamma" => c.gamma = v,
        "temperature" => c.temperature = v,
        "lambda" => c.lambda = v,
        _ => unreachable!("axis names are checked before the sweep"),
    }
    c
}

/// Cartesian grid, x fastest.
fn grid(x: &Axis, y: Option<&Axis>) -> Vec<(f64, Option<f64>)> {
    let xs = x.values();
    match y {
        None => xs.into_iter().map(|a| (a, None)).collect(),
        Some(y) => y.values().into_iter().flat_map(|b| xs.iter().map(move |&a| (a, Some(b)))).collect(),
    }
}

/// Level energies in units of E_k, with the barrier and regime flag, over the `v0` axis.
pub fn run_spectrum(cfg: &Config) -> Result<Table, CliError> {
    let (_, base) = cfg.dimensionless()?;
    let levels = cfg.levels.min(base.dim());
    let mut header: Vec<String> = vec!["v0".into(), "hx".into(), "hz".into()];
    header.extend((0..levels).map(|m| format!("e{m}")));
    header.extend(["barrier", "splitting", "in_regime", "error"].map(String::from));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new("spectrum", cfg, &header_refs);

    let points = match &cfg.x {
        Some(x) => {
            if x.param != "v0" {
                return Err(CliError::Config(vec![format!("sweep.x.param: spectrum sweeps over v0, got '{}'", x.param)]));
            }
            x.values()
        }
        None => vec![base.v0],
    };
    table.rows = points
        .par_iter()
        .map(|&v0| {
            let d = with_model_param(&base, "v0", v0);
            let mut row = vec![num(d.v0), num(d.hx), num(d.hz)];
            let r = solve(&d).map_err(CliError::from).and_then(|s| {
                let regime = if d.hx == 0.0 { Some(tunneling_regime(&d)?.in_regime) } else { None };
                Ok((s, regime))
            });
            match r {
                Ok((s, regime)) => {
                    row.extend(s.energies[..levels].iter().map(|&e| num(e)));
                    row.push(num(d.v0 - d.hz.abs()));
                    row.push(num(s.splitting()));
                    row.push(flag(regime));
                    row.push(String::new());
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(String::new(), levels + 3));
                    row.push(e.to_string());
                }
            }
            row
        })
        .collect();
    Ok(table)
}

pub fn initial_state(cfg: &Config, s: &Spectrum) -> Result<StateVector, CliError> {
    Ok(match cfg.evolve.initial {
        InitialState::Doublet => doublet_state(s)?,
        InitialState::Gaussian => gaussian_packet(cfg.evolve.sigma, s.n_max)?,
    })
}

/// Dissipator for the configured channel on a solved spectrum.
pub fn dissipator(ch: &ChannelConfig, s: &Spectrum, scales: &DerivedScales) -> Result<Dissipator, CliError> {
    Ok(match ch.kind {
        ChannelKind::None => Dissipator::none(),
        ChannelKind::Gas => Dissipator::Localization { lambda: ch.lambda / scales.rate_scale },
        ChannelKind::Coupling(coupling) => {
            let lc = LindbladChannel {
                coupling,
                gamma: ch.gamma,
                unit: ch.unit,
                temperature: ch.temperature,
                spectral: ch.spectral,
            };
            Dissipator::Secular(build_jump_operators(s, &lc, scales, ch.omega_tol)?)
        }
    })
}

/// One p₊(t) run with its diagnostics.
#[derive(Debug, Clone)]
pub struct Trace {
    pub times: Vec<f64>,
    pub p_plus: Vec<f64>,
    pub purity: Vec<f64>,
    pub trace_error: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
    /// Dimensionless tunneling period 2π/(e₁ − e₀).
    pub period: f64,
    pub splitting: f64,
    pub step: Option<f64>,
    pub method: &'static str,
}

impl Trace {
    pub fn visibility(&self, window_periods: f64) -> Result<VisibilityWindow, CliError> {
        let ts = rotunnel::unitary::TimeSeries {
            times: self.times.clone(),
            unit: rotunnel::unitary::TimeUnit::Dimensionless,
            p_plus: self.p_plus.clone(),
        };
        Ok(visibility_window(&ts, self.period, window_periods)?)
    }
}

fn period_grid(cfg: &Config, s: &Spectrum) -> Result<(f64, Vec<f64>), CliError> {
    let de = s.splitting();
    if !(de > 0.0) {
        return Err(rotunnel::Error::Numeric("lowest two levels are degenerate; no tunneling period".into()).into());
    }
    let period = 2.0 * PI / de;
    let samples = (cfg.evolve.periods * cfg.evolve.samples_per_period as f64).ceil() as usize + 1;
    Ok((period, time_grid(cfg.evolve.periods * period, samples)))
}

/// Master-equation run (the closed system uses the same integrator with no jumps).
pub fn open_trace(cfg: &Config, d: &DimensionlessConfig, ch: &ChannelConfig) -> Result<Trace, CliError> {
    let scales = cfg.scales()?;
    let s = solve(d)?;
    let (period, times) = period_grid(cfg, &s)?;
    let rho0 = DensityMatrix::pure(&initial_state(cfg, &s)?);
    let diss = dissipator(ch, &s, &scales)?;
    let tr = integrate_master_equation(&rho0, &s, &diss, &times, &cfg.integrator)?;
    Ok(Trace {
        times,
        p_plus: tr.series.p_plus,
        purity: tr.purity,
        trace_error: tr.trace_error,
        min_eigenvalue: tr.min_eigenvalue,
        period,
        splitting: s.splitting(),
        step: Some(tr.step),
        method: tr.method,
    })
}

/// Closed-system p₊(t) by spectral propagation.
pub fn unitary_trace(cfg: &Config, d: &DimensionlessConfig) -> Result<Trace, CliError> {
    let s = solve(d)?;
    let (period, times) = period_grid(cfg, &s)?;
    let psi = initial_state(cfg, &s)?;
    let ts = evolve(&psi, &s, &times)?;
    let n = times.len();
    Ok(Trace {
        times,
        p_plus: ts.p_plus,
        purity: vec![1.0; n],
        trace_error: vec![(psi.norm_sqr() - 1.0).abs(); n],
        min_eigenvalue: vec![0.0; n],
        period,
        splitting: s.splitting(),
        step: None,
        method: "spectral",
    })
}

/// Time series of p₊, purity and trace error for the configured channel.
pub fn run_evolve(cfg: &Config) -> Result<Table, CliError> {
    let (scales, d) = cfg.dimensionless()?;
    let tr = open_trace(cfg, &d, &cfg.channel)?;
    let mut table = Table::new(
        "evolve",
        cfg,
        &["t", "t_s", "p_plus", "purity", "trace_error", "min_eigenvalue"],
    );
    table.note("basis_cutoff", d.n_max);
    table.note("integrator", tr.method);
    table.note("integrator_step", tr.step.map(num).unwrap_or_default());
    table.note("tunneling_period", num(tr.period));
    table.note("tunneling_frequency_hz", num(scales.frequency(tr.splitting)));
    match tr.visibility(cfg.evolve.window_periods) {
        Ok(w) => {
            table.note("visibility", num(w.value));
            let t = |x: Option<f64>| x.map(num).unwrap_or_else(|| "none".into());
            table.note("visibility_window", format!("{} to {}", t(w.start), t(w.end)));
        }
        Err(e) => table.note("visibility", e),
    }
    if let Ok(ss) = steady_state_diagnostics(&rotunnel::unitary::TimeSeries {
        times: tr.times.clone(),
        unit: rotunnel::unitary::TimeUnit::Dimensionless,
        p_plus: tr.p_plus.clone(),
    }) {
        table.note("p_inf", num(ss.p_inf));
    }
    for i in 0..tr.times.len() {
        table.rows.push(vec![
            num(tr.times[i]),
            num(scales.seconds(tr.times[i])),
            num(tr.p_plus[i]),
            num(tr.purity[i]),
            num(tr.trace_error[i]),
            num(tr.min_eigenvalue[i]),
        ]);
    }
    Ok(table)
}

fn axes<'a>(cfg: &'a Config, command: &str, allowed: &[&str], need_y: bool) -> Result<(&'a Axis, Option<&'a Axis>), CliError> {
    let Some(x) = cfg.x.as_ref() else {
        return Err(CliError::Config(vec![format!("sweep.x: {command} needs a sweep axis")]));
    };
    check_axis(x, allowed, command)?;
    if let Some(y) = &cfg.y {
        check_axis(y, allowed, command)?;
        if y.param == x.param {
            return Err(CliError::Config(vec![format!("sweep.y.param: duplicates sweep.x.param '{}'", x.param)]));
        }
    } else if need_y {
        return Err(CliError::Config(vec![format!("sweep.y: {command} needs two sweep axes")]));
    }
    Ok((x, cfg.y.as_ref()))
}

fn window_note(table: &mut Table, cfg: &Config) {
    table.note("visibility_window_periods", cfg.evolve.window_periods);
    table.note("samples_per_period", cfg.evolve.samples_per_period);
}

/// Closed-system visibility over two of v0, hx, hz.
pub fn run_visibility_map(cfg: &Config) -> Result<Table, CliError> {
    let (scales, base) = cfg.dimensionless()?;
    let (x, y) = axes(cfg, "vis-map", &MODEL_PARAMS, true)?;
    let y = y.expect("checked");
    let mut table = Table::new(
        "vis-map",
        cfg,
        &[&x.param, &y.param, "visibility", "splitting", "f_t_hz", "in_regime", "error"],
    );
    table.note("basis_cutoff", base.n_max);
    table.note("integrator", "spectral");
    window_note(&mut table, cfg);
    table.rows = grid(x, Some(y))
        .par_iter()
        .map(|&(a, b)| {
            let d = with_model_param(&with_model_param(&base, &x.param, a), &y.param, b.expect("two axes"));
            let mut row = vec![num(a), num(b.expect("two axes"))];
            let point = || -> Result<(f64, f64, Option<bool>), CliError> {
                let tr = unitary_trace(cfg, &d)?;
                let v = tr.visibility(cfg.evolve.window_periods)?.value;
                // The regime criterion only exists without a transverse field.
                let regime = if d.hx == 0.0 { Some(tunneling_regime(&d)?.in_regime) } else { None };
                Ok((v, tr.splitting, regime))
            };
            match point() {
                Ok((v, de, regime)) => {
                    row.extend([num(v), num(de), num(scales.frequency(de)), flag(regime), String::new()]);
                }
                Err(e) => {
                    row.extend([String::new(), String::new(), String::new(), String::new(), e.to_string()]);
                }
            }
            row
        })
        .collect();
    Ok(table)
}

/// Visibility of the doublet under the configured channel over one or two of gamma, temperature, lambda.
pub fn run_decoherence_map(cfg: &Config) -> Result<Table, CliError> {
    let (scales, d) = cfg.dimensionless()?;
    let (x, y) = axes(cfg, "dec-map", &CHANNEL_PARAMS, false)?;
    for a in [Some(x), y].into_iter().flatten() {
        let ok = match cfg.channel.kind {
            ChannelKind::None => false,
            ChannelKind::Gas => a.param == "lambda",
            ChannelKind::Coupling(_) => a.param != "lambda",
        };
        if !ok {
            return Err(CliError::Config(vec![format!(
                "sweep: '{}' is not a parameter of channel.kind = {:?}",
                a.param, cfg.channel.kind
            )]));
        }
    }
    if cfg.evolve.initial != InitialState::Doublet {
        return Err(CliError::Config(vec!["evolve.initial: dec-map starts from the doublet state".into()]));
    }
    let mut header = vec![x.param.as_str()];
    if let Some(y) = y {
        header.push(&y.param);
    }
    header.extend(["visibility", "p_inf", "final_purity", "max_trace_error", "min_eigenvalue", "error"]);
    let mut table = Table::new("dec-map", cfg, &header);
    table.note("basis_cutoff", d.n_max);
    table.note("tunneling_frequency_hz", num(scales.frequency(solve(&d)?.splitting())));
    window_note(&mut table, cfg);
    let rows: Vec<(Vec<String>, Option<f64>)> = grid(x, y)
        .par_iter()
        .map(|&(a, b)| {
            let mut ch = with_channel_param(&cfg.channel, &x.param, a);
            let mut row = vec![num(a)];
            if let (Some(y), Some(b)) = (y, b) {
                ch = with_channel_param(&ch, &y.param, b);
                row.push(num(b));
            }
            let point = || -> Result<(Trace, f64), CliError> {
                let tr = open_trace(cfg, &d, &ch)?;
                let v = tr.visibility(cfg.evolve.window_periods)?.value;
                Ok((tr, v))
            };
            match point() {
                Ok((tr, v)) => {
                    let tail = &tr.p_plus[tr.p_plus.len() * 3 / 4..];
                    let p_inf = tail.iter().sum::<f64>() / tail.len() as f64;
                    row.extend([
                        num(v),
                        num(p_inf),
                        num(*tr.purity.last().unwrap_or(&f64::NAN)),
                        num(tr.trace_error.iter().cloned().fold(0.0, f64::max)),
                        num(tr.min_eigenvalue.iter().cloned().fold(f64::INFINITY, f64::min)),
                        String::new(),
                    ]);
                    (row, tr.step)
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(String::new(), 5));
                    row.push(e.to_string());
                    (row, None)
                }
            }
        })
        .collect();
    let smallest = rows.iter().filter_map(|r| r.1).fold(f64::INFINITY, f64::min);
    if smallest.is_finite() {
        table.note("integrator_step_min", num(smallest));
    }
    table.rows = rows.into_iter().map(|r| r.0).collect();
    Ok(table)
}
