//! Decoherence budget as a CSV table and a ranked text summary.

use std::fmt::Write;

use rotunnel::channels::{decoherence_budget, RateReport};
use rotunnel::rotor::solve;

use crate::config::Config;
use crate::output::{num, Table};
use crate::CliError;

/// Rates of every configured channel at the configured tunneling frequency.
pub fn budget_report(cfg: &Config) -> Result<RateReport, CliError> {
    let (scales, d) = cfg.dimensionless()?;
    let s = solve(&d)?;
    let f_t = scales.frequency(s.splitting());
    Ok(decoherence_budget(&cfg.budget, &cfg.physical, &scales, f_t)?)
}

pub fn budget_table(cfg: &Config, report: &RateReport) -> Table {
    let mut t = Table::new(
        "budget",
        cfg,
        &["channel", "rate_s", "ratio_to_tunneling", "ratio_to_gas", "rank", "formula", "inputs"],
    );
    t.note("tunneling_frequency_hz", num(report.tunneling_frequency));
    t.note("not_configured", report.not_configured.join(" "));
    for (i, e) in report.entries.iter().enumerate() {
        let rank = report.ranking.iter().position(|&k| k == i).map(|r| (r + 1).to_string()).unwrap_or_default();
        let inputs: Vec<String> = e.inputs.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect();
        t.rows.push(vec![
            e.channel.to_string(),
            num(e.rate),
            num(e.ratio_to_tunneling),
            e.ratio_to_gas.map(num).unwrap_or_default(),
            rank,
            e.formula.to_string(),
            inputs.join(";"),
        ]);
    }
    t
}

/// Human-readable ranking, fastest channel first.
pub fn budget_text(report: &RateReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tunneling frequency f_T = {:.4e} Hz", report.tunneling_frequency);
    for (r, &i) in report.ranking.iter().enumerate() {
        let e = &report.entries[i];
        let _ = write!(s, "{:>2}. {:<14} {:>12.4e} 1/s   rate/(2 pi f_T) = {:.3e}", r + 1, e.channel, e.rate, e.ratio_to_tunneling);
        if let Some(g) = e.ratio_to_gas {
            let _ = write!(s, "   rate/Lambda_R = {g:.3e}");
        }
        s.push('\n');
    }
    for e in report.entries.iter().filter(|e| !(e.rate > 0.0)) {
        let _ = writeln!(s, "    {:<14} {:>12.4e} 1/s   (frozen out)", e.channel, e.rate);
    }
    if !report.not_configured.is_empty() {
        let _ = writeln!(s, "not configured: {}", report.not_configured.join(", "));
    }
    s
}
