//! Attention comparison charts: ground truth against two models over the
//! tokens of one post, as standalone SVG or CSV.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionChart {
    pub post_id: String,
    pub tokens: Vec<String>,
    pub gt: Vec<f64>,
    pub model_a: Vec<f64>,
    pub model_b: Vec<f64>,
    pub label_a: String,
    pub label_b: String,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 90.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && c != '\t' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

impl AttentionChart {
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(Error::EmptySequence("attention chart"));
        }
        if self.gt.len() != n || self.model_a.len() != n || self.model_b.len() != n {
            return Err(Error::shape(
                "attention chart",
                "series lengths differ from token count",
            ));
        }
        Ok(())
    }

    /// Rows `token_index,token,gt,model_a,model_b`.
    pub fn to_csv(&self) -> Result<String> {
        self.validate()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["token_index", "token", "gt", "model_a", "model_b"])?;
        for i in 0..self.tokens.len() {
            w.write_record([
                i.to_string(),
                self.tokens[i].clone(),
                self.gt[i].to_string(),
                self.model_a[i].to_string(),
                self.model_b[i].to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Contract(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Contract(e.to_string()))
    }

    /// Line chart with one polyline per series, a legend and rotated token
    /// labels on the x axis. Output depends only on the chart contents.
    pub fn to_svg(&self) -> Result<String> {
        self.validate()?;
        let n = self.tokens.len();
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let y_max = self
            .gt
            .iter()
            .chain(&self.model_a)
            .chain(&self.model_b)
            .fold(0.0f64, |m, &v| m.max(v))
            .max(1e-9);
        let x = |i: usize| {
            if n == 1 {
                LEFT + plot_w / 2.0
            } else {
                LEFT + plot_w * i as f64 / (n - 1) as f64
            }
        };
        let y = |v: f64| TOP + plot_h * (1.0 - v / y_max);

        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<title>Attention for post {}</title>"#, escape(&self.post_id));
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{LEFT}" y="22" font-size="14">Post {}</text>"#,
            escape(&self.post_id)
        );
        // axes and y ticks
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}" stroke="black"/>"#,
            TOP + plot_h
        );
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
            TOP + plot_h,
            LEFT + plot_w,
            TOP + plot_h
        );
        for k in 0..=4 {
            let v = y_max * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
                LEFT - 6.0,
                y(v) + 4.0
            );
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#dddddd"/>"##,
                y(v),
                LEFT + plot_w
            );
        }
        for (i, tok) in self.tokens.iter().enumerate() {
            let (tx, ty) = (x(i), TOP + plot_h + 12.0);
            let _ = writeln!(
                s,
                r#"<text x="{tx:.2}" y="{ty:.2}" text-anchor="end" transform="rotate(-45 {tx:.2} {ty:.2})">{}</text>"#,
                escape(tok)
            );
        }
        let series = [
            ("ground truth", "#2ca02c", &self.gt),
            (self.label_a.as_str(), "#e6b800", &self.model_a),
            (self.label_b.as_str(), "#1f77b4", &self.model_b),
        ];
        for (k, (name, color, values)) in series.iter().enumerate() {
            let pts: Vec<String> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                pts.join(" ")
            );
            let ly = TOP + 16.0 * k as f64;
            let lx = WIDTH - RIGHT + 14.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
                lx + 18.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 24.0,
                ly + 4.0,
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        Ok(s)
    }

    pub fn write_svg(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_svg()?).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }
}
