//! Comparison rows, their CSV form, and the human-readable report.

use crate::plan::{ExperimentPlan, Regime};
use crate::runner::{FitStore, PlanOutcome};
use anyhow::{bail, Context};
use forage_core::scenario::DistributionKind;
use std::io::{BufRead, Write};

pub const ROWS_HEADER: &str = "kind,N,rho,pred_nh,pred_nav,pred_p,sim_nh_mean,sim_nh_lo,sim_nh_hi,sim_nav_mean,sim_nav_lo,sim_nav_hi,sim_p_mean,in_ci_nh,in_ci_nav";

/// One comparison cell: model prediction against simulated interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub kind: DistributionKind,
    pub n: u32,
    pub rho: f64,
    pub pred_nh: f64,
    pub pred_nav: f64,
    pub pred_p: f64,
    pub sim_nh_mean: f64,
    pub sim_nh_lo: f64,
    pub sim_nh_hi: f64,
    pub sim_nav_mean: f64,
    pub sim_nav_lo: f64,
    pub sim_nav_hi: f64,
    pub sim_p_mean: f64,
    pub in_ci_nh: bool,
    pub in_ci_nav: bool,
}

impl ComparisonRow {
    pub fn rel_err_nh(&self) -> f64 {
        rel_err(self.pred_nh, self.sim_nh_mean)
    }

    pub fn rel_err_nav(&self) -> f64 {
        rel_err(self.pred_nav, self.sim_nav_mean)
    }

    pub fn rel_err_p(&self) -> f64 {
        rel_err(self.pred_p, self.sim_p_mean)
    }
}

fn rel_err(pred: f64, sim: f64) -> f64 {
    if sim.abs() < 1e-12 {
        if pred.abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (pred - sim).abs() / sim.abs()
    }
}

pub fn write_rows_csv<W: Write>(rows: &[ComparisonRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{ROWS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.kind,
            r.n,
            r.rho,
            r.pred_nh,
            r.pred_nav,
            r.pred_p,
            r.sim_nh_mean,
            r.sim_nh_lo,
            r.sim_nh_hi,
            r.sim_nav_mean,
            r.sim_nav_lo,
            r.sim_nav_hi,
            r.sim_p_mean,
            u8::from(r.in_ci_nh),
            u8::from(r.in_ci_nav),
        )?;
    }
    Ok(())
}

pub fn read_rows_csv<R: BufRead>(reader: R) -> anyhow::Result<Vec<ComparisonRow>> {
    let mut lines = reader.lines();
    let header = lines.next().context("empty rows file")??;
    if header.trim() != ROWS_HEADER {
        bail!("unexpected rows header: {header}");
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            bail!("expected 15 fields, got {}: {line}", fields.len());
        }
        let f = |i: usize| -> anyhow::Result<f64> {
            fields[i]
                .parse()
                .with_context(|| format!("field {i} in {line}"))
        };
        rows.push(ComparisonRow {
            kind: fields[0].parse().map_err(|e| anyhow::anyhow!("{e}"))?,
            n: fields[1].parse()?,
            rho: f(2)?,
            pred_nh: f(3)?,
            pred_nav: f(4)?,
            pred_p: f(5)?,
            sim_nh_mean: f(6)?,
            sim_nh_lo: f(7)?,
            sim_nh_hi: f(8)?,
            sim_nav_mean: f(9)?,
            sim_nav_lo: f(10)?,
            sim_nav_hi: f(11)?,
            sim_p_mean: f(12)?,
            in_ci_nh: fields[13] == "1",
            in_ci_nav: fields[14] == "1",
        });
    }
    Ok(rows)
}

/// Fractions of cells whose prediction lies inside the simulated interval:
/// (homing, avoidance, both-per-point).
pub fn within_ci_fractions(rows: &[ComparisonRow]) -> (f64, f64, f64) {
    if rows.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let k = rows.len() as f64;
    let nh = rows.iter().filter(|r| r.in_ci_nh).count() as f64 / k;
    let nav = rows.iter().filter(|r| r.in_ci_nav).count() as f64 / k;
    let both = rows.iter().filter(|r| r.in_ci_nh && r.in_ci_nav).count() as f64 / k;
    (nh, nav, both)
}

/// First density from which the avoidance prediction stays outside the
/// interval for the rest of the sweep (rows assumed density-ordered
/// within one kind).
pub fn divergence_density(rows: &[ComparisonRow]) -> Option<f64> {
    let mut candidate = None;
    for r in rows {
        if !r.in_ci_nav {
            if candidate.is_none() {
                candidate = Some(r.rho);
            }
        } else {
            candidate = None;
        }
    }
    candidate
}

/// Human-readable summary alongside the machine-readable CSV.
pub fn render_report(plan: &ExperimentPlan, outcome: &PlanOutcome) -> String {
    let mut out = String::new();
    let push = |out: &mut String, s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    push(&mut out, format!("regime: {}", plan.regime));
    push(
        &mut out,
        format!(
            "kinds: {}",
            plan.kinds
                .iter()
                .map(|k| k.as_str())
                .collect::<Vec<_>>()
                .join(",")
        ),
    );
    push(
        &mut out,
        format!(
            "horizon: {} s, replicates: {}, seed: {}, blocks: {}",
            plan.horizon, plan.replicates, plan.seed, plan.total_blocks
        ),
    );
    push(
        &mut out,
        format!(
            "confidence intervals: t-interval across replicates (95%)"
        ),
    );
    out.push('\n');

    push(&mut out, "== fitted characterizations ==".to_string());
    let chi_rn = outcome
        .fits
        .get(DistributionKind::RN)
        .map(|f| f.chi_m);
    for (kind, fit) in &outcome.fits.fits {
        let rel = match chi_rn {
            Some(reference) if reference > 0.0 => {
                format!(", chi/chi_RN = {:.4}", fit.chi_m / reference)
            }
            _ => String::new(),
        };
        push(
            &mut out,
            format!(
                "{kind}: sigma_m = {:.6}, chi_m = {:.6}, residual = {:.3e}{rel}",
                fit.sigma_m, fit.chi_m, fit.residual
            ),
        );
    }
    out.push('\n');

    push(&mut out, "== comparison ==".to_string());
    push(
        &mut out,
        format!(
            "{:<4} {:>5} {:>8} {:>9} {:>9} {:>5} {:>9} {:>9} {:>5} {:>9} {:>9}",
            "kind", "N", "rho", "pred_nh", "sim_nh", "in", "pred_nav", "sim_nav", "in", "pred_p", "sim_p"
        ),
    );
    for r in &outcome.rows {
        push(
            &mut out,
            format!(
                "{:<4} {:>5} {:>8.4} {:>9.3} {:>9.3} {:>5} {:>9.3} {:>9.3} {:>5} {:>9.5} {:>9.5}",
                r.kind.as_str(),
                r.n,
                r.rho,
                r.pred_nh,
                r.sim_nh_mean,
                if r.in_ci_nh { "yes" } else { "NO" },
                r.pred_nav,
                r.sim_nav_mean,
                if r.in_ci_nav { "yes" } else { "NO" },
                r.pred_p,
                r.sim_p_mean,
            ),
        );
    }
    out.push('\n');

    let (nh, nav, both) = within_ci_fractions(&outcome.rows);
    push(&mut out, "== summary ==".to_string());
    push(
        &mut out,
        format!(
            "within-CI fraction: n_h {:.2}, n_av {:.2}, both {:.2}",
            nh, nav, both
        ),
    );
    let worst = |f: fn(&ComparisonRow) -> f64, name: &str, out: &mut String| {
        if let Some(r) = outcome
            .rows
            .iter()
            .max_by(|a, b| f(a).total_cmp(&f(b)))
        {
            push(
                out,
                format!(
                    "worst {name} relative error: {:.1}% ({} N={})",
                    100.0 * f(r),
                    r.kind,
                    r.n
                ),
            );
        }
    };
    worst(ComparisonRow::rel_err_nh, "n_h", &mut out);
    worst(ComparisonRow::rel_err_nav, "n_av", &mut out);
    worst(ComparisonRow::rel_err_p, "P", &mut out);

    if !plan.regime.is_const_rho() {
        for &kind in &plan.kinds {
            let kind_rows: Vec<ComparisonRow> = outcome
                .rows
                .iter()
                .filter(|r| r.kind == kind)
                .cloned()
                .collect();
            match divergence_density(&kind_rows) {
                Some(rho) => push(
                    &mut out,
                    format!("{kind}: n_av diverges from rho = {rho:.4} onward"),
                ),
                None => push(&mut out, format!("{kind}: no sustained n_av divergence")),
            }
        }
    }

    if !outcome.failures.is_empty() {
        out.push('\n');
        push(&mut out, "== failed cells ==".to_string());
        for (label, err) in &outcome.failures {
            push(&mut out, format!("{label}: {err}"));
        }
    }

    out.push('\n');
    push(
        &mut out,
        format!("runtime: {:.1} s", outcome.runtime_secs),
    );
    out
}

/// Rebuilds report-style summary numbers from a bare CSV (no fits or
/// runtime available).
pub fn render_rows_summary(rows: &[ComparisonRow], regime: Option<Regime>) -> String {
    let outcome = PlanOutcome {
        rows: rows.to_vec(),
        fits: FitStore::default(),
        failures: Vec::new(),
        runtime_secs: 0.0,
    };
    let kinds: Vec<DistributionKind> = {
        let mut ks: Vec<DistributionKind> = rows.iter().map(|r| r.kind).collect();
        ks.sort();
        ks.dedup();
        ks
    };
    let plan = ExperimentPlan {
        regime: regime.unwrap_or(Regime::ConstRhoSmall),
        kinds,
        swarm_sizes: vec![1, 2],
        densities: vec![0.01],
        horizon: 0.0,
        replicates: 2,
        seed: 0,
        total_blocks: 1,
        calibration_sizes: vec![1, 2],
        burn_in_fraction: 0.2,
        arena: None,
    };
    render_report(&plan, &outcome)
}
