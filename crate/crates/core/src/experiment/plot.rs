//! Static SVG figures from run-directory CSVs. Output depends only on the
//! input bytes: coordinates are printed at fixed precision and nothing
//! time-dependent is embedded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{ExperimentConfig, RunManifest};
use crate::error::{Error, Result};

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Minimal SVG document builder.
#[derive(Debug, Clone)]
pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Svg {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str, opacity: f64) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{fill}" fill-opacity="{opacity:.2}"/>"#
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    pub fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, s: &str) {
        let escaped = s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="{size:.0}">{escaped}</text>"#
        );
    }

    pub fn finish(&self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            body = self.body
        )
    }
}

/// Data-to-pixel mapping with a labelled frame.
struct Axes {
    x: (f64, f64),
    y: (f64, f64),
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

const MARGIN: f64 = 50.0;

impl Axes {
    fn new(svg: &mut Svg, title: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            let (lo, hi) = if lo.is_finite() && hi.is_finite() && hi > lo {
                (lo, hi)
            } else {
                (-1.0, 1.0)
            };
            let p = 0.05 * (hi - lo);
            (lo - p, hi + p)
        };
        let a = Axes {
            x: pad(x),
            y: pad(y),
            left: MARGIN,
            top: MARGIN / 2.0 + 10.0,
            w: svg.width - 1.5 * MARGIN,
            h: svg.height - 1.5 * MARGIN - 10.0,
        };
        svg.text(svg.width / 2.0, 20.0, "middle", 14.0, title);
        let (l, t, r, b) = (a.left, a.top, a.left + a.w, a.top + a.h);
        for (x1, y1, x2, y2) in [(l, t, r, t), (r, t, r, b), (r, b, l, b), (l, b, l, t)] {
            svg.line(x1, y1, x2, y2, "black");
        }
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = a.x.0 + f * (a.x.1 - a.x.0);
            let px = a.px(xv);
            svg.line(px, b, px, b + 4.0, "black");
            svg.text(px, b + 16.0, "middle", 10.0, &format!("{xv:.2}"));
            let yv = a.y.0 + f * (a.y.1 - a.y.0);
            let py = a.py(yv);
            svg.line(l - 4.0, py, l, py, "black");
            svg.text(l - 6.0, py + 3.0, "end", 10.0, &format!("{yv:.2}"));
        }
        a
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.h - (y - self.y.0) / (self.y.1 - self.y.0) * self.h
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Named numeric columns of a CSV file.
fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let idx = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| Error::MissingColumn {
                    column: n.to_string(),
                    path: path.into(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for rec in r.records() {
        let rec = rec?;
        for (c, &i) in cols.iter_mut().zip(&idx) {
            c.push(crate::datasets::parse_field(&rec, i, path)?);
        }
    }
    Ok(cols)
}

/// Generated points coloured by proxy label over the real test points.
pub fn scatter_svg(real: Option<&[Vec<f64>]>, gen: &[Vec<f64>]) -> String {
    let mut svg = Svg::new(480.0, 480.0);
    let all_x = gen[0].iter().chain(real.map(|r| r[0].as_slice()).unwrap_or(&[]));
    let all_y = gen[1].iter().chain(real.map(|r| r[1].as_slice()).unwrap_or(&[]));
    let ax = Axes::new(
        &mut svg,
        "generated (colour = proxy label) vs real (grey)",
        range(all_x.copied()),
        range(all_y.copied()),
    );
    if let Some(r) = real {
        for (x, y) in r[0].iter().zip(&r[1]) {
            svg.circle(ax.px(*x), ax.py(*y), 1.2, "#999999", 0.35);
        }
    }
    for ((x, y), l) in gen[0].iter().zip(&gen[1]).zip(&gen[2]) {
        svg.circle(ax.px(*x), ax.py(*y), 1.5, PALETTE[*l as usize % PALETTE.len()], 0.6);
    }
    svg.finish()
}

fn heat(f: f64) -> String {
    let f = f.clamp(0.0, 1.0);
    let r = (255.0 * f).round() as u8;
    let b = (255.0 * (1.0 - f)).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Target points coloured by log majority score (blue low, red high).
pub fn score_svg(cols: &[Vec<f64>]) -> String {
    let mut svg = Svg::new(480.0, 480.0);
    let ax = Axes::new(
        &mut svg,
        "majority score (log scale, blue low to red high)",
        range(cols[0].iter().copied()),
        range(cols[1].iter().copied()),
    );
    let logs: Vec<f64> = cols[2].iter().map(|s| s.max(1e-12).ln()).collect();
    let (lo, hi) = range(logs.iter().copied());
    let span = if hi > lo { hi - lo } else { 1.0 };
    for ((x, y), l) in cols[0].iter().zip(&cols[1]).zip(&logs) {
        svg.circle(ax.px(*x), ax.py(*y), 2.5, &heat((l - lo) / span), 0.8);
    }
    if lo.is_finite() {
        svg.text(
            svg.width - MARGIN / 2.0,
            svg.height - 8.0,
            "end",
            10.0,
            &format!("score range [{:.3}, {:.3}]", lo.exp(), hi.exp()),
        );
    }
    svg.finish()
}

/// Bars per class for one or more series, plus a zero line.
fn bar_svg(title: &str, series: &[(&str, &[f64])]) -> String {
    let mut svg = Svg::new(480.0, 360.0);
    let m = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let (lo, hi) = range(series.iter().flat_map(|(_, v)| v.iter().copied()).chain([0.0]));
    let ax = Axes::new(&mut svg, title, (-0.5, m as f64 - 0.5), (lo, hi));
    let group = ax.w / m.max(1) as f64;
    let bar = 0.8 * group / series.len().max(1) as f64;
    for (s, (name, vals)) in series.iter().enumerate() {
        for (k, &v) in vals.iter().enumerate() {
            let x = ax.px(k as f64) - 0.4 * group + s as f64 * bar;
            let (y0, y1) = (ax.py(0.0), ax.py(v));
            svg.rect(x, y0.min(y1), bar, (y1 - y0).abs(), PALETTE[s % PALETTE.len()]);
        }
        svg.rect(
            ax.left + 8.0,
            ax.top + 8.0 + 14.0 * s as f64,
            10.0,
            10.0,
            PALETTE[s % PALETTE.len()],
        );
        svg.text(ax.left + 22.0, ax.top + 17.0 + 14.0 * s as f64, "start", 10.0, name);
    }
    svg.line(ax.left, ax.py(0.0), ax.left + ax.w, ax.py(0.0), "black");
    for k in 0..m {
        svg.text(
            ax.px(k as f64),
            ax.top + ax.h + 30.0,
            "middle",
            10.0,
            &format!("class {k}"),
        );
    }
    svg.finish()
}

pub fn class_ratio_svg(data: &[f64], gen: &[f64]) -> String {
    bar_svg("class proportions", &[("data", data), ("generated", gen)])
}

pub fn ncre_svg(signed: &[f64]) -> String {
    bar_svg("signed normalized class-ratio error", &[("signed NCRE", signed)])
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Render every figure whose input CSVs exist in the run directory.
pub fn run_plot(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let started = Instant::now();
    let dir = &cfg.output_dir;
    let plots = dir.join("plots");
    std::fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<()> {
        write(&plots.join(name), &text)?;
        files.push(Path::new("plots").join(name));
        Ok(())
    };
    let samples = dir.join("samples.csv");
    if samples.exists() {
        let gen = read_columns(&samples, &["x1", "x2", "proxy_label"])?;
        let test = dir.join("data/test.csv");
        let real = if test.exists() {
            Some(read_columns(&test, &["x1", "x2"])?)
        } else {
            None
        };
        emit("scatter.svg", scatter_svg(real.as_deref(), &gen))?;
    }
    let scores = dir.join("scores.csv");
    if scores.exists() {
        emit("scores.svg", score_svg(&read_columns(&scores, &["x1", "x2", "score"])?))?;
    }
    let ncre = dir.join("ncre.csv");
    if ncre.exists() {
        let c = read_columns(&ncre, &["data_weight", "gen_proportion", "signed_ncre"])?;
        emit("class_ratio.svg", class_ratio_svg(&c[0], &c[1]))?;
        emit("ncre.svg", ncre_svg(&c[2]))?;
    }
    if files.is_empty() {
        return Err(Error::Io {
            path: dir.clone(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "no samples.csv, scores.csv or ncre.csv to plot",
            ),
        });
    }
    let m = RunManifest::build(
        "plot",
        cfg.hash(),
        cfg.seed,
        dir,
        &files,
        started.elapsed().as_secs_f64(),
    )?;
    m.write(dir)?;
    Ok(m)
}
