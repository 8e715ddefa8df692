//! Result tables, data-file writers, the run manifest, and a minimal SVG
//! line-chart renderer.
//!
//! Data files are written through a `.partial` staging path and renamed on
//! completion; a failed run removes everything it created. Floats in CSV
//! are printed with 17 significant digits so values round-trip exactly.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{OutputFormat, ScenarioConfig};
use crate::Failure;

/// The stable column schema of every dataset the CLI writes.
pub const RESULT_TABLE_HEADER: &str =
    "time,j,realization,gamma_abs,fidelity_mac,bound_decoherence,bound_distinguishability,bound_total";

/// Which series a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    /// One coupling realization, by absolute stream index.
    Realization(u64),
    /// The ensemble average over all realizations of the run.
    Average,
    /// A deterministic single evaluation (no disorder average).
    Single,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Realization(r) => write!(f, "{r}"),
            Tag::Average => write!(f, "avg"),
            Tag::Single => write!(f, "single"),
        }
    }
}

/// One dataset row; every quantity evaluated at one time for one
/// environment spin magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub time: f64,
    pub j: f64,
    pub realization: Tag,
    /// `|Γ(t)|` over the unobserved fraction for the configured level pair.
    pub gamma_abs: f64,
    /// Fidelity of the first macrofraction for the configured level pair.
    pub fidelity_mac: f64,
    /// Decoherence term of the objectivity bound.
    pub bound_decoherence: f64,
    /// Distinguishability term of the objectivity bound.
    pub bound_distinguishability: f64,
    /// Sum of the two bound terms.
    pub bound_total: f64,
}

impl Row {
    fn values(&self) -> [f64; 5] {
        [
            self.gamma_abs,
            self.fidelity_mac,
            self.bound_decoherence,
            self.bound_distinguishability,
            self.bound_total,
        ]
    }
}

/// Writes one run's data files into a directory, tracking everything it
/// creates so a failed run can be wiped.
pub struct RunWriter {
    dir: PathBuf,
    format: OutputFormat,
    created: Vec<PathBuf>,
}

impl RunWriter {
    pub fn new(dir: &Path, format: OutputFormat) -> Result<Self, Failure> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            created: Vec::new(),
        })
    }

    /// Writes one table under `stem` (extension chosen by the format) and
    /// returns the file name. Rows must be finite; a non-finite value is a
    /// numerical error, not an I/O error.
    pub fn write_table(&mut self, stem: &str, rows: &[Row]) -> Result<String, Failure> {
        for row in rows {
            if row.values().iter().any(|v| !v.is_finite()) {
                return Err(Failure::Runtime(format!(
                    "non-finite value in {stem} at t = {}, j = {}, realization = {}",
                    row.time, row.j, row.realization
                )));
            }
        }
        let name = match self.format {
            OutputFormat::Csv => format!("{stem}.csv"),
            OutputFormat::JsonLines => format!("{stem}.jsonl"),
        };
        let body = match self.format {
            OutputFormat::Csv => render_csv(rows),
            OutputFormat::JsonLines => render_json_lines(rows),
        };
        self.commit(&name, body.as_bytes())?;
        Ok(name)
    }

    /// Writes an SVG chart under `stem.svg` and returns the file name.
    pub fn write_svg(&mut self, stem: &str, svg: &str) -> Result<String, Failure> {
        let name = format!("{stem}.svg");
        self.commit(&name, svg.as_bytes())?;
        Ok(name)
    }

    /// Writes the effective config as a rerunnable `config.toml` and
    /// returns the file name.
    pub fn write_config(&mut self, config: &ScenarioConfig) -> Result<String, Failure> {
        let text = toml::to_string(&config.to_raw())
            .map_err(|e| Failure::Runtime(format!("config serialization: {e}")))?;
        self.commit("config.toml", text.as_bytes())?;
        Ok("config.toml".into())
    }

    /// Writes the run manifest; call last, after all data files succeeded.
    pub fn write_manifest(
        &mut self,
        subcommand: &str,
        config: &ScenarioConfig,
        outputs: &[String],
        wall_time_seconds: f64,
    ) -> Result<(), Failure> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            version: &'a str,
            subcommand: &'a str,
            config: &'a ScenarioConfig,
            outputs: &'a [String],
            wall_time_seconds: f64,
        }
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config,
            outputs,
            wall_time_seconds,
        };
        let mut body = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Failure::Runtime(format!("manifest serialization: {e}")))?;
        body.push('\n');
        self.commit("manifest.json", body.as_bytes())?;
        Ok(())
    }

    /// Stages `bytes` under `<name>.partial`, then renames into place.
    fn commit(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let final_path = self.dir.join(name);
        let partial = self.dir.join(format!("{name}.partial"));
        let write = || -> std::io::Result<()> {
            let mut w = BufWriter::new(File::create(&partial)?);
            w.write_all(bytes)?;
            w.flush()?;
            Ok(())
        };
        if let Err(e) = write() {
            let _ = fs::remove_file(&partial);
            return Err(Failure::Io(format!(
                "cannot write {}: {e}",
                partial.display()
            )));
        }
        if let Err(e) = fs::rename(&partial, &final_path) {
            let _ = fs::remove_file(&partial);
            return Err(Failure::Io(format!(
                "cannot finish {}: {e}",
                final_path.display()
            )));
        }
        self.created.push(final_path);
        Ok(())
    }

    /// Removes every file this run created; used when a later step failed.
    pub fn discard(&mut self) {
        for path in self.created.drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

fn render_csv(rows: &[Row]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 160);
    out.push_str(RESULT_TABLE_HEADER);
    out.push('\n');
    for r in rows {
        let v = r.values();
        out.push_str(&format!(
            "{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.time, r.j, r.realization, v[0], v[1], v[2], v[3], v[4]
        ));
    }
    out
}

fn render_json_lines(rows: &[Row]) -> String {
    let mut out = String::with_capacity(rows.len() * 200);
    for r in rows {
        let v = r.values();
        let line = serde_json::json!({
            "time": r.time,
            "j": r.j,
            "realization": r.realization.to_string(),
            "gamma_abs": v[0],
            "fidelity_mac": v[1],
            "bound_decoherence": v[2],
            "bound_distinguishability": v[3],
            "bound_total": v[4],
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Single-point printing.
// ---------------------------------------------------------------------------

/// A printable single-point result: ordered key/value pairs.
pub struct Report(pub Vec<(&'static str, serde_json::Value)>);

impl Report {
    pub fn num(mut self, key: &'static str, v: f64) -> Self {
        self.0.push((key, serde_json::json!(v)));
        self
    }

    pub fn text(mut self, key: &'static str, v: &str) -> Self {
        self.0.push((key, serde_json::json!(v)));
        self
    }

    pub fn flag(mut self, key: &'static str, v: bool) -> Self {
        self.0.push((key, serde_json::json!(v)));
        self
    }

    /// Prints as aligned `key = value` text, or as one JSON object line.
    /// Floats are printed with 17 significant digits in both forms.
    pub fn print(&self, format: OutputFormat) {
        match format {
            OutputFormat::Csv => {
                let width = self.0.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (key, value) in &self.0 {
                    if let Some(x) = value.as_f64() {
                        println!("{key:<width$} = {x:.16e}");
                    } else if let Some(s) = value.as_str() {
                        println!("{key:<width$} = {s}");
                    } else {
                        println!("{key:<width$} = {value}");
                    }
                }
            }
            OutputFormat::JsonLines => {
                let map: serde_json::Map<String, serde_json::Value> = self
                    .0
                    .iter()
                    .map(|(k, v)| (k.to_string(), v.clone()))
                    .collect();
                println!("{}", serde_json::Value::Object(map));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// SVG line charts: pure data rendering, no interactivity.
// ---------------------------------------------------------------------------

/// One labeled curve.
pub struct Series<'a> {
    pub label: String,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
}

const PALETTE: [&str; 6] = [
    "#3b6fb6", "#c44e52", "#55a868", "#8172b2", "#ccb974", "#64b5cd",
];

/// Renders labeled curves as a fixed-size SVG line chart.
pub fn svg_line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (860.0, 520.0);
    let (left, right, top, bottom) = (70.0, 160.0, 50.0, 60.0);
    let (pw, ph) = (w - left - right, h - top - bottom);

    let mut x_max = f64::MIN;
    let mut x_min = f64::MAX;
    let mut y_max = f64::MIN;
    let mut y_min: f64 = 0.0;
    for s in series {
        for &x in s.xs {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
        }
        for &y in s.ys {
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    // Catches both empty/constant ranges and NaN bounds.
    if x_min.partial_cmp(&x_max) != Some(std::cmp::Ordering::Less) {
        x_max = x_min + 1.0;
    }
    if y_min.partial_cmp(&y_max) != Some(std::cmp::Ordering::Less) {
        y_max = y_min + 1.0;
    }
    let sx = move |x: f64| left + (x - x_min) / (x_max - x_min) * pw;
    let sy = move |y: f64| top + ph - (y - y_min) / (y_max - y_min) * ph;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        left + pw / 2.0,
        title
    ));

    // Axes with five ticks each.
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = x_min + f * (x_max - x_min);
        let yv = y_min + f * (y_max - y_min);
        let xp = sx(xv);
        let yp = sy(yv);
        svg.push_str(&format!(
            "<line x1=\"{xp:.1}\" y1=\"{:.1}\" x2=\"{xp:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>\n",
            top,
            top + ph
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{yp:.1}\" x2=\"{:.1}\" y2=\"{yp:.1}\" stroke=\"#ddd\"/>\n",
            left,
            left + pw
        ));
        svg.push_str(&format!(
            "<text x=\"{xp:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{xv:.3}</text>\n",
            top + ph + 20.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{yv:.3}</text>\n",
            left - 8.0,
            yp + 4.0
        ));
    }
    svg.push_str(&format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#333\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        left + pw / 2.0,
        h - 18.0,
        x_label
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">{}</text>\n",
        top + ph / 2.0,
        top + ph / 2.0,
        y_label
    ));

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> =
            s.xs.iter()
                .zip(s.ys)
                .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
            points.join(" ")
        ));
        let ly = top + 16.0 + 18.0 * k as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            left + pw + 12.0,
            left + pw + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            left + pw + 40.0,
            ly + 4.0,
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
