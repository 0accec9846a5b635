//! CSV number formatting and SVG heatmaps.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::CliError;

/// `.` decimal point; scientific notation below `1e-3` and from `1e6` up.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if x != 0.0 && !(1e-3..1e6).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// A CSV file whose first line is a `# config_digest=` comment.
pub struct CsvOut {
    writer: csv::Writer<Vec<u8>>,
    digest: String,
}

impl CsvOut {
    pub fn new(digest: &str, header: &[String]) -> Result<Self, CliError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(runtime)?;
        Ok(CsvOut {
            writer,
            digest: digest.to_string(),
        })
    }

    pub fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        self.writer.write_record(cells).map_err(runtime)
    }

    pub fn numbers(&mut self, values: &[f64]) -> Result<(), CliError> {
        let cells: Vec<String> = values.iter().map(|&v| fmt_num(v)).collect();
        self.row(&cells)
    }

    pub fn save(self, path: &Path) -> Result<(), CliError> {
        let body = self.writer.into_inner().map_err(|e| runtime(e.into_error()))?;
        let mut f = fs::File::create(path).map_err(|e| io_error(path, e))?;
        writeln!(f, "# config_digest={}", self.digest).map_err(|e| io_error(path, e))?;
        f.write_all(&body).map_err(|e| io_error(path, e))
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Perceptually ordered ramp (dark blue to yellow).
const RAMP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn colour(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Heatmap of `values[i][j]` over `x[i]`, `y[j]`, with a numeric colour bar.
///
/// On a log scale non-positive entries are drawn grey; infinite entries are
/// drawn at the top colour. Each cell carries its value as a tooltip.
pub fn heatmap_svg(title: &str, x_name: &str, y_name: &str, x: &[f64], y: &[f64], values: &[Vec<f64>], log: bool) -> String {
    let cell = 28.0;
    let (left, top) = (70.0, 40.0);
    let (w, h) = (cell * x.len() as f64, cell * y.len() as f64);
    let scaled: Vec<Vec<Option<f64>>> = values
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| match (log, v) {
                    (_, v) if v.is_nan() => None,
                    (true, v) if v <= 0.0 => None,
                    (true, v) => Some(v.log10()),
                    (false, v) => Some(v),
                })
                .collect()
        })
        .collect();
    let finite = scaled.iter().flatten().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo, if hi > lo { hi } else { lo + 1.0 }) } else { (0.0, 1.0) };

    let mut s = String::new();
    let total_w = left + w + 130.0;
    let total_h = top + h + 60.0;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="14">{}</text>"#, escape(title));
    for (i, row) in scaled.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let fill = match v {
                None => "#bbbbbb".to_string(),
                Some(v) if v.is_infinite() => colour(1.0),
                Some(v) => colour((v - lo) / (hi - lo)),
            };
            // axis2 runs upwards
            let (cx, cy) = (left + cell * i as f64, top + h - cell * (j + 1) as f64);
            let _ = writeln!(
                s,
                r#"<rect x="{cx}" y="{cy}" width="{cell}" height="{cell}" fill="{fill}"><title>{x_name}={} {y_name}={} value={}</title></rect>"#,
                fmt_num(x[i]),
                fmt_num(y[j]),
                fmt_num(values[i][j])
            );
        }
    }
    for (i, xv) in x.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left + cell * (i as f64 + 0.5),
            top + h + 14.0,
            fmt_num(*xv)
        );
    }
    for (j, yv) in y.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 4.0,
            top + h - cell * (j as f64 + 0.5) + 4.0,
            fmt_num(*yv)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + w / 2.0, top + h + 32.0, escape(x_name));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
        top + h / 2.0,
        top + h / 2.0,
        escape(y_name)
    );
    // colour bar with numeric ticks
    let bx = left + w + 20.0;
    let steps = 50;
    for k in 0..steps {
        let t = k as f64 / (steps - 1) as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{}" width="16" height="{}" fill="{}"/>"#,
            top + h * (1.0 - t) - h / steps as f64,
            h / steps as f64 + 0.5,
            colour(t)
        );
    }
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let v = lo + t * (hi - lo);
        let label = if log { fmt_num(10f64.powf(v)) } else { fmt_num(v) };
        let _ = writeln!(s, r#"<text x="{}" y="{}">{label}</text>"#, bx + 20.0, top + h * (1.0 - t) + 4.0);
    }
    if log {
        let _ = writeln!(s, r#"<text x="{bx}" y="{}">log scale</text>"#, top - 6.0);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
