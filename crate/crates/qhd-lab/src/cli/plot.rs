//! `plot` subcommand: render one or more series.csv files into a static SVG
//! with two panels (E[f] on a log scale, success probability linear).

use super::run::CSV_HEADER;
use crate::{Error, Result};
use std::path::Path;

struct Series {
    label: String,
    k: Vec<f64>,
    exp_f: Vec<f64>,
    success: Vec<f64>,
}

fn load_series(path: &Path) -> Result<Series> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::Cli(format!("{}: {e}", path.display())))?;
    let header = rdr
        .headers()
        .map_err(|e| Error::Cli(format!("{}: {e}", path.display())))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::Cli(format!(
            "{}: column schema mismatch: got `{header}`, expected `{CSV_HEADER}`",
            path.display()
        )));
    }
    let mut s = Series {
        label: label_for(path),
        k: Vec::new(),
        exp_f: Vec::new(),
        success: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Cli(format!("{}: {e}", path.display())))?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Cli(format!("{}: short row", path.display())))?
                .parse::<f64>()
                .map_err(|e| Error::Cli(format!("{}: {e}", path.display())))
        };
        s.k.push(get(0)?);
        s.exp_f.push(get(2)?);
        s.success.push(get(4)?);
    }
    if s.k.is_empty() {
        return Err(Error::Cli(format!("{}: empty series", path.display())));
    }
    Ok(s)
}

/// Legend label: the manifest's method/objective if a manifest.json sits next
/// to the CSV, else the parent directory or file stem.
fn label_for(path: &Path) -> String {
    if let Some(dir) = path.parent() {
        let manifest = dir.join("manifest.json");
        if let Ok(text) = std::fs::read_to_string(&manifest) {
            if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
                let method = v
                    .pointer("/config/experiment/method")
                    .and_then(|m| m.as_str());
                let obj = v
                    .pointer("/config/experiment/objective")
                    .and_then(|m| m.as_str());
                if let (Some(m), Some(o)) = (method, obj) {
                    return format!("{m} on {o}");
                }
            }
        }
        if let Some(name) = dir.file_name().and_then(|n| n.to_str()) {
            if !name.is_empty() && name != "." {
                return name.to_string();
            }
        }
    }
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("series")
        .to_string()
}

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const W: f64 = 560.0;
const H: f64 = 360.0;
const ML: f64 = 64.0;
const MR: f64 = 16.0;
const MT: f64 = 28.0;
const MB: f64 = 40.0;

struct Panel {
    title: &'static str,
    log_y: bool,
    y_label: &'static str,
}

fn panel_svg(
    series: &[Series],
    values: impl Fn(&Series) -> &[f64],
    panel: &Panel,
    x_offset: f64,
) -> String {
    let mut xs_min = f64::INFINITY;
    let mut xs_max = f64::NEG_INFINITY;
    let mut ys_min = f64::INFINITY;
    let mut ys_max = f64::NEG_INFINITY;
    let transform = |v: f64| if panel.log_y { v.max(1e-300).log10() } else { v };
    for s in series {
        for (&k, &v) in s.k.iter().zip(values(s)) {
            if panel.log_y && v <= 0.0 {
                continue;
            }
            xs_min = xs_min.min(k);
            xs_max = xs_max.max(k);
            let tv = transform(v);
            ys_min = ys_min.min(tv);
            ys_max = ys_max.max(tv);
        }
    }
    if !xs_min.is_finite() {
        xs_min = 0.0;
        xs_max = 1.0;
        ys_min = 0.0;
        ys_max = 1.0;
    }
    if (xs_max - xs_min).abs() < 1e-12 {
        xs_max = xs_min + 1.0;
    }
    if (ys_max - ys_min).abs() < 1e-12 {
        ys_max = ys_min + 1.0;
        ys_min -= 1.0;
    }
    let px = |k: f64| x_offset + ML + (k - xs_min) / (xs_max - xs_min) * (W - ML - MR);
    let py = |v: f64| MT + (ys_max - transform(v)) / (ys_max - ys_min) * (H - MT - MB);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<rect x='{:.1}' y='{MT}' width='{:.1}' height='{:.1}' fill='none' stroke='#333'/>\n",
        x_offset + ML,
        W - ML - MR,
        H - MT - MB
    ));
    svg.push_str(&format!(
        "<text x='{:.1}' y='{:.1}' font-size='13' text-anchor='middle' font-family='sans-serif'>{}</text>\n",
        x_offset + ML + (W - ML - MR) / 2.0,
        MT - 10.0,
        panel.title
    ));
    svg.push_str(&format!(
        "<text x='{:.1}' y='{:.1}' font-size='11' text-anchor='middle' font-family='sans-serif'>iteration k</text>\n",
        x_offset + ML + (W - ML - MR) / 2.0,
        H - 8.0
    ));
    svg.push_str(&format!(
        "<text x='{:.1}' y='{:.1}' font-size='11' text-anchor='middle' font-family='sans-serif' transform='rotate(-90 {:.1} {:.1})'>{}</text>\n",
        x_offset + 16.0,
        MT + (H - MT - MB) / 2.0,
        x_offset + 16.0,
        MT + (H - MT - MB) / 2.0,
        panel.y_label
    ));
    // y ticks: 5 evenly spaced in transformed space
    for i in 0..=4 {
        let ty = ys_min + (ys_max - ys_min) * i as f64 / 4.0;
        let y = MT + (ys_max - ty) / (ys_max - ys_min) * (H - MT - MB);
        let label = if panel.log_y {
            format!("1e{ty:.1}")
        } else {
            format!("{ty:.2}")
        };
        svg.push_str(&format!(
            "<line x1='{:.1}' y1='{y:.1}' x2='{:.1}' y2='{y:.1}' stroke='#ccc'/>\n",
            x_offset + ML,
            x_offset + W - MR
        ));
        svg.push_str(&format!(
            "<text x='{:.1}' y='{:.1}' font-size='10' text-anchor='end' font-family='sans-serif'>{label}</text>\n",
            x_offset + ML - 4.0,
            y + 3.0
        ));
    }
    // x ticks
    for i in 0..=4 {
        let tk = xs_min + (xs_max - xs_min) * i as f64 / 4.0;
        let x = px(tk);
        svg.push_str(&format!(
            "<text x='{x:.1}' y='{:.1}' font-size='10' text-anchor='middle' font-family='sans-serif'>{tk:.0}</text>\n",
            H - MB + 14.0
        ));
    }
    for (si, s) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let pts: Vec<String> = s
            .k
            .iter()
            .zip(values(s))
            .filter(|(_, &v)| !panel.log_y || v > 0.0)
            .map(|(&k, &v)| format!("{:.2},{:.2}", px(k), py(v)))
            .collect();
        if !pts.is_empty() {
            svg.push_str(&format!(
                "<polyline points='{}' fill='none' stroke='{color}' stroke-width='1.5'/>\n",
                pts.join(" ")
            ));
        }
    }
    svg
}

/// Render the input series into a two-panel SVG at `out`.
pub fn cmd_plot(series_paths: &[&Path], out: &Path) -> Result<()> {
    if series_paths.is_empty() {
        return Err(Error::Cli("no input series given".into()));
    }
    let series: Vec<Series> = series_paths
        .iter()
        .map(|p| load_series(p))
        .collect::<Result<_>>()?;
    let legend_h = 18.0 * series.len() as f64 + 10.0;
    let total_w = 2.0 * W;
    let total_h = H + legend_h;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns='http://www.w3.org/2000/svg' width='{total_w:.0}' height='{total_h:.0}' viewBox='0 0 {total_w:.0} {total_h:.0}'>\n<rect width='100%' height='100%' fill='white'/>\n"
    ));
    svg.push_str(&panel_svg(
        &series,
        |s| &s.exp_f,
        &Panel {
            title: "expected objective value",
            log_y: true,
            y_label: "E[f] (log scale)",
        },
        0.0,
    ));
    svg.push_str(&panel_svg(
        &series,
        |s| &s.success,
        &Panel {
            title: "success probability",
            log_y: false,
            y_label: "P[f - f* <= delta]",
        },
        W,
    ));
    for (si, s) in series.iter().enumerate() {
        let y = H + 16.0 + 18.0 * si as f64;
        let color = COLORS[si % COLORS.len()];
        svg.push_str(&format!(
            "<line x1='{ML}' y1='{y:.1}' x2='{:.1}' y2='{y:.1}' stroke='{color}' stroke-width='2'/>\n",
            ML + 28.0
        ));
        svg.push_str(&format!(
            "<text x='{:.1}' y='{:.1}' font-size='12' font-family='sans-serif'>{}</text>\n",
            ML + 34.0,
            y + 4.0,
            xml_escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(out, svg)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
