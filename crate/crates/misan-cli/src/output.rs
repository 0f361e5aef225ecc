//! Output plumbing: reproducible file headers, CSV and SVG writers, and
//! color handling.
//!
//! Every artifact written by the binary starts with the same header block,
//! so a result file alone is enough to rerun the experiment: tool version,
//! the exact command line, the seed, every resolved parameter, and the model
//! configuration file verbatim. Headers carry no timestamps or hostnames;
//! two runs of the same command produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use misan::rates::{ModelConfig, RateTable};

/// Everything that determines a run. Serialized verbatim into the header of
/// each output file.
pub struct ExperimentConfig {
    /// The command line as invoked, arguments space-joined.
    pub command: String,
    pub seed: u64,
    /// Resolved parameters in declaration order, already rendered.
    pub params: Vec<(String, String)>,
    /// Verbatim text of the model configuration file, if one was loaded.
    pub config_text: Option<String>,
}

impl ExperimentConfig {
    pub fn new(seed: u64) -> Self {
        let command = std::env::args().collect::<Vec<_>>().join(" ");
        ExperimentConfig { command, seed, params: Vec::new(), config_text: None }
    }

    pub fn param(&mut self, key: &str, value: impl std::fmt::Display) {
        self.params.push((key.to_string(), value.to_string()));
    }

    /// The `#`-commented header block shared by all text outputs.
    pub fn header(&self, columns: &str) -> String {
        let mut h = String::new();
        let _ = writeln!(h, "# misan {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(h, "# command: {}", self.command);
        let _ = writeln!(h, "# seed: {}", self.seed);
        for (k, v) in &self.params {
            let _ = writeln!(h, "# param {k} = {v}");
        }
        match &self.config_text {
            Some(text) => {
                for line in text.lines() {
                    let _ = writeln!(h, "# config: {line}");
                }
            }
            None => {
                let _ = writeln!(h, "# config: (none)");
            }
        }
        let _ = writeln!(h, "# columns: {columns}");
        h
    }

    /// The same information as an XML comment, placed before the `<svg>`
    /// root so plots are as self-describing as the data files.
    pub fn svg_preamble(&self) -> String {
        let header = self.header("(svg)");
        let mut out = String::from("<!--\n");
        for line in header.lines() {
            // XML comments must not contain "--".
            out.push_str(&line.replace("--", "- -"));
            out.push('\n');
        }
        out.push_str("-->\n");
        out
    }
}

/// Loads and validates a model configuration, keeping the raw text for
/// headers.
pub fn parse_config(path: &Path) -> anyhow::Result<(RateTable, String)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let parsed = ModelConfig::from_toml_str(&text)
        .with_context(|| format!("cannot parse {}", path.display()))?;
    let table =
        parsed.build().with_context(|| format!("invalid model in {}", path.display()))?;
    Ok((table, text))
}

/// Writes `content` to `path`, or to stdout when no path is given.
pub fn write_text(path: Option<&PathBuf>, content: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            fs::write(p, content).with_context(|| format!("cannot write {}", p.display()))?;
            eprintln!("wrote {}", p.display());
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn color_enabled() -> bool {
    std::env::var_os("NO_COLOR").is_none()
}

pub fn good(text: &str) -> String {
    if color_enabled() {
        format!("\x1b[32m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

pub fn bad(text: &str) -> String {
    if color_enabled() {
        format!("\x1b[31m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

/// Two overlaid series as an SVG line chart. Self-contained: no scripts,
/// fonts, or external references, so the file renders anywhere.
pub fn line_chart_svg(
    cfg: &ExperimentConfig,
    title: &str,
    series: &[(&str, &str, &[(f64, f64)])],
) -> String {
    const W: f64 = 840.0;
    const H: f64 = 520.0;
    const ML: f64 = 72.0;
    const MR: f64 = 24.0;
    const MT: f64 = 36.0;
    const MB: f64 = 52.0;

    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, _, pts) in series {
        for &(x, y) in *pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !xmin.is_finite() || xmin == xmax {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if !ymin.is_finite() || ymin == ymax {
        ymin -= 0.5;
        ymax += 0.5;
    }
    let ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    let px = |x: f64| ML + (x - xmin) / (xmax - xmin) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB);

    let mut s = cfg.svg_preamble();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"22\" font-family=\"monospace\" font-size=\"14\" \
         text-anchor=\"middle\">{}</text>",
        (ML + W - MR) / 2.0,
        title
    );

    // Axes with five ticks per side.
    let _ = writeln!(
        s,
        "<line x1=\"{ML}\" y1=\"{0:.1}\" x2=\"{1:.1}\" y2=\"{0:.1}\" stroke=\"black\"/>",
        H - MB,
        W - MR
    );
    let _ = writeln!(s, "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{:.1}\" stroke=\"black\"/>", H - MB);
    for i in 0..=4 {
        let fx = xmin + (xmax - xmin) * i as f64 / 4.0;
        let fy = ymin + (ymax - ymin) * i as f64 / 4.0;
        let tx = px(fx);
        let ty = py(fy);
        let _ = writeln!(
            s,
            "<line x1=\"{tx:.1}\" y1=\"{0:.1}\" x2=\"{tx:.1}\" y2=\"{1:.1}\" stroke=\"black\"/>",
            H - MB,
            H - MB + 5.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{tx:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"12\" \
             text-anchor=\"middle\">{fx:.3}</text>",
            H - MB + 20.0
        );
        let _ = writeln!(
            s,
            "<line x1=\"{:.1}\" y1=\"{ty:.1}\" x2=\"{ML}\" y2=\"{ty:.1}\" stroke=\"black\"/>",
            ML - 5.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"12\" \
             text-anchor=\"end\">{fy:.3}</text>",
            ML - 9.0,
            ty + 4.0
        );
    }

    for (_, color, pts) in series {
        if pts.is_empty() {
            continue;
        }
        let mut poly = String::new();
        for &(x, y) in *pts {
            let _ = write!(poly, "{:.2},{:.2} ", px(x), py(y));
        }
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            poly.trim_end()
        );
    }

    // Legend, top right.
    for (i, (label, color, _)) in series.iter().enumerate() {
        let ly = MT + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>",
            W - MR - 170.0,
            W - MR - 140.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"12\">{label}</text>",
            W - MR - 132.0,
            ly + 4.0
        );
    }

    s.push_str("</svg>\n");
    s
}
