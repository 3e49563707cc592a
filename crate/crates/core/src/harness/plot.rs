use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::read_log;
use crate::error::{Error, Result};
use crate::hmppo::LogRow;

/// Plottable log columns with their axis labels.
pub const PLOT_METRICS: [(&str, &str); 10] = [
    ("eval_reward_mean", "Episodic reward"),
    ("eval_reward_std", "Episodic reward std"),
    ("total_delay_min", "Total delay (min)"),
    ("mean_perplexity", "Task perplexity"),
    ("emulator_switches", "Emulator switches per episode"),
    ("actor1_loss", "Placement actor loss"),
    ("actor2_loss", "Retention actor loss"),
    ("critic_loss", "Critic loss"),
    ("entropy1", "Placement entropy (nats)"),
    ("entropy2", "Retention entropy (nats)"),
];

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

fn metric_value(row: &LogRow, metric: &str) -> f64 {
    match metric {
        "eval_reward_mean" => row.eval_reward_mean,
        "eval_reward_std" => row.eval_reward_std,
        "total_delay_min" => row.total_delay_min,
        "mean_perplexity" => row.mean_perplexity,
        "emulator_switches" => row.emulator_switches,
        "actor1_loss" => row.actor1_loss,
        "actor2_loss" => row.actor2_loss,
        "critic_loss" => row.critic_loss,
        "entropy1" => row.entropy1,
        "entropy2" => row.entropy2,
        _ => unreachable!("metric validated by caller"),
    }
}

fn axis_label(metric: &str) -> Result<&'static str> {
    PLOT_METRICS.iter().find(|(m, _)| *m == metric).map(|(_, l)| *l).ok_or_else(|| {
        let valid: Vec<&str> = PLOT_METRICS.iter().map(|(m, _)| *m).collect();
        Error::InvalidArgument(format!("unknown metric '{metric}'; valid metrics: {}", valid.join(", ")))
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    (0..).map(|i| first + i as f64 * step).take_while(|v| *v <= hi + step * 1e-9).collect()
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders one polyline per `(label, log)` series as a standalone SVG.
pub fn render_svg(series: &[(String, Vec<LogRow>)], metric: &str) -> Result<String> {
    let y_label = axis_label(metric)?;
    if series.is_empty() {
        return Err(Error::InvalidArgument("no logs to plot".into()));
    }
    if let Some((label, _)) = series.iter().find(|(_, rows)| rows.is_empty()) {
        return Err(Error::InvalidArgument(format!("log '{label}' has no rows")));
    }
    let points: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|(_, rows)| rows.iter().map(|r| (r.env_steps as f64, metric_value(r, metric))).collect())
        .collect();
    let all = points.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        if !y.is_finite() {
            return Err(Error::NonFinite(format!("non-finite {metric} value at {x} steps")));
        }
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let pad = if y1 > y0 { 0.05 * (y1 - y0) } else { y0.abs().max(1.0) * 0.05 };
    y0 -= pad;
    y1 += pad;

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT + pw,
            LEFT - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Environment steps</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, ((label, _), pts)) in series.iter().zip(&points).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Plots `metric` from each log file; the legend uses the parent directory
/// name. Nothing is written on error.
pub fn plot_logs(logs: &[PathBuf], metric: &str, out: &Path) -> Result<()> {
    axis_label(metric)?;
    let series = logs
        .iter()
        .map(|p| {
            let label = p
                .parent()
                .and_then(|d| d.file_name())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            Ok((label, read_log(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let svg = render_svg(&series, metric)?;
    fs::write(out, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(k: usize, offset: f64) -> Vec<LogRow> {
        (1..=k)
            .map(|i| LogRow {
                env_steps: i * 500,
                eval_reward_mean: -600.0 + offset + 10.0 * i as f64,
                eval_reward_std: 5.0,
                total_delay_min: 100.0,
                mean_perplexity: 50.0,
                emulator_switches: 20.0,
                actor1_loss: 0.1,
                actor2_loss: 0.1,
                critic_loss: 1.0,
                entropy1: 5.0,
                entropy2: -3.0,
            })
            .collect()
    }

    #[test]
    fn one_polyline_per_series() {
        let series: Vec<(String, Vec<LogRow>)> = (0..3).map(|i| (format!("run<{i}>"), rows(5, i as f64))).collect();
        let svg = render_svg(&series, "eval_reward_mean").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("run&lt;0&gt;"));
        assert!(svg.contains("Episodic reward"));
        let svg = render_svg(&series, "total_delay_min").unwrap();
        assert!(svg.contains("(min)"));
    }

    #[test]
    fn bad_inputs() {
        let err = render_svg(&[("a".into(), rows(2, 0.0))], "reward").unwrap_err().to_string();
        assert!(err.contains("eval_reward_mean"), "{err}");
        assert!(render_svg(&[("a".into(), vec![])], "eval_reward_mean").is_err());
        assert!(render_svg(&[], "eval_reward_mean").is_err());
    }

    #[test]
    fn tick_spacing() {
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        let t = ticks(-612.0, -288.0);
        assert!(t.len() >= 3 && t.len() <= 8 && t[0] >= -612.0);
        assert_eq!(tick_label(50000.0), "50000");
        assert_eq!(tick_label(2.5), "2.5");
    }
}
