//! Static SVG plots of comparison rows: simulated means with 95% interval
//! bars and model predictions overlaid, categorical x-axis with one slot
//! per experiment. Output is plain generated text, so identical rows
//! always produce identical bytes.

use crate::report::ComparisonRow;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    HomingCount,
    AvoidanceCount,
    CollectionRate,
}

impl Quantity {
    pub fn file_stem(&self) -> &'static str {
        match self {
            Quantity::HomingCount => "n_h",
            Quantity::AvoidanceCount => "n_av",
            Quantity::CollectionRate => "p",
        }
    }

    fn axis_label(&self) -> &'static str {
        match self {
            Quantity::HomingCount => "homing robots",
            Quantity::AvoidanceCount => "avoiding robots",
            Quantity::CollectionRate => "blocks / s",
        }
    }

    fn values(&self, r: &ComparisonRow) -> (f64, Option<(f64, f64)>, f64) {
        match self {
            Quantity::HomingCount => (r.sim_nh_mean, Some((r.sim_nh_lo, r.sim_nh_hi)), r.pred_nh),
            Quantity::AvoidanceCount => {
                (r.sim_nav_mean, Some((r.sim_nav_lo, r.sim_nav_hi)), r.pred_nav)
            }
            Quantity::CollectionRate => (r.sim_p_mean, None, r.pred_p),
        }
    }
}

const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 78.0;
const SLOT_WIDTH: f64 = 58.0;
const PLOT_HEIGHT: f64 = 300.0;

/// Renders one quantity across all rows. The x-axis is categorical with
/// one slot per row, grouped in row order.
pub fn render_plot(rows: &[ComparisonRow], quantity: Quantity, title: &str) -> String {
    let n = rows.len().max(1);
    let width = MARGIN_LEFT + SLOT_WIDTH * n as f64 + MARGIN_RIGHT;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;

    let mut y_max = 0.0f64;
    for r in rows {
        let (mean, interval, pred) = quantity.values(r);
        y_max = y_max.max(mean).max(pred);
        if let Some((_, hi)) = interval {
            y_max = y_max.max(hi);
        }
    }
    if y_max <= 0.0 {
        y_max = 1.0;
    }
    y_max *= 1.15;

    let x_of = |i: usize| MARGIN_LEFT + SLOT_WIDTH * (i as f64 + 0.5);
    let y_of = |v: f64| MARGIN_TOP + PLOT_HEIGHT * (1.0 - v / y_max);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"##
    );
    let _ = writeln!(
        svg,
        r##"<rect width="{width:.0}" height="{height:.0}" fill="white"/>"##
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.1}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"##,
        width / 2.0,
        xml_escape(title)
    );

    // Axes.
    let x0 = MARGIN_LEFT;
    let x1 = width - MARGIN_RIGHT;
    let y0 = MARGIN_TOP + PLOT_HEIGHT;
    let _ = writeln!(
        svg,
        r##"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y0:.1}" stroke="black" stroke-width="1"/>"##
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{x0:.1}" y1="{MARGIN_TOP:.1}" x2="{x0:.1}" y2="{y0:.1}" stroke="black" stroke-width="1"/>"##
    );

    // Y ticks and gridlines.
    for k in 0..=5 {
        let v = y_max * k as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#dddddd" stroke-width="0.5"/>"##,
            x0
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"##,
            x0 - 6.0,
            y + 4.0,
            format_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="16" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"##,
        MARGIN_TOP + PLOT_HEIGHT / 2.0,
        MARGIN_TOP + PLOT_HEIGHT / 2.0,
        quantity.axis_label()
    );

    // Data: interval bar, simulated mean, prediction marker.
    for (i, r) in rows.iter().enumerate() {
        let x = x_of(i);
        let (mean, interval, pred) = quantity.values(r);
        if let Some((lo, hi)) = interval {
            let (ylo, yhi) = (y_of(lo), y_of(hi));
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.1}" y1="{ylo:.1}" x2="{x:.1}" y2="{yhi:.1}" stroke="#1f77b4" stroke-width="1.5"/>"##
            );
            for y in [ylo, yhi] {
                let _ = writeln!(
                    svg,
                    r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#1f77b4" stroke-width="1.5"/>"##,
                    x - 5.0,
                    x + 5.0
                );
            }
        }
        let ym = y_of(mean);
        let _ = writeln!(
            svg,
            r##"<circle cx="{x:.1}" cy="{ym:.1}" r="3.5" fill="#1f77b4"/>"##
        );
        let yp = y_of(pred);
        let _ = writeln!(
            svg,
            r##"<path d="M {:.1} {:.1} L {:.1} {:.1} M {:.1} {:.1} L {:.1} {:.1}" stroke="#d62728" stroke-width="1.8" fill="none"/>"##,
            x - 4.5,
            yp - 4.5,
            x + 4.5,
            yp + 4.5,
            x - 4.5,
            yp + 4.5,
            x + 4.5,
            yp - 4.5
        );
        // Categorical label.
        let label = format!("{} N={}", r.kind, r.n);
        let _ = writeln!(
            svg,
            r##"<text x="{x:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end" transform="rotate(-45 {x:.1} {:.1})">{}</text>"##,
            y0 + 14.0,
            y0 + 14.0,
            xml_escape(&label)
        );
    }

    // Legend.
    let lx = x0 + 10.0;
    let ly = MARGIN_TOP + 8.0;
    let _ = writeln!(
        svg,
        r##"<circle cx="{lx:.1}" cy="{ly:.1}" r="3.5" fill="#1f77b4"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">simulated mean, 95% CI</text>"##,
        lx + 9.0,
        ly + 4.0
    );
    let ly2 = ly + 18.0;
    let _ = writeln!(
        svg,
        r##"<path d="M {:.1} {:.1} L {:.1} {:.1} M {:.1} {:.1} L {:.1} {:.1}" stroke="#d62728" stroke-width="1.8" fill="none"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">model prediction</text>"##,
        lx - 4.0,
        ly2 - 4.0,
        lx + 4.0,
        ly2 + 4.0,
        lx - 4.0,
        ly2 + 4.0,
        lx + 4.0,
        ly2 - 4.0,
        lx + 9.0,
        ly2 + 4.0
    );

    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v >= 100.0 {
        format!("{v:.0}")
    } else if v >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes one plot file per quantity into `dir`, named
/// `plot_<regime>_<quantity>.svg`.
pub fn emit_plots(
    rows: &[ComparisonRow],
    regime_name: &str,
    dir: &std::path::Path,
) -> std::io::Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    for quantity in [
        Quantity::HomingCount,
        Quantity::AvoidanceCount,
        Quantity::CollectionRate,
    ] {
        let title = format!("{regime_name}: {}", quantity.axis_label());
        let svg = render_plot(rows, quantity, &title);
        let path = dir.join(format!("plot_{regime_name}_{}.svg", quantity.file_stem()));
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}
