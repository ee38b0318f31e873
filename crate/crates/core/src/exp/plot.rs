//! CSV series and static SVG line plots with a min-max band over seeds.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A parsed metrics CSV: `# key value` comment lines, a header row and
/// numeric rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                let c = c.trim();
                let (k, v) = c.split_once(' ').unwrap_or((c, ""));
                meta.push((k.to_string(), v.trim().to_string()));
                continue;
            }
            match &columns {
                None => columns = Some(line.split(',').map(|s| s.trim().to_string()).collect()),
                Some(cols) => {
                    let row = line
                        .split(',')
                        .map(|t| t.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::Parse {
                            line: lineno,
                            msg: format!("bad number: {e}"),
                        })?;
                    if row.len() != cols.len() {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("expected {} fields, got {}", cols.len(), row.len()),
                        });
                    }
                    rows.push(row);
                }
            }
        }
        let columns = columns.ok_or(Error::Parse {
            line: 0,
            msg: "missing header row".into(),
        })?;
        Ok(Self {
            meta,
            columns,
            rows,
        })
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("no column `{name}`"),
            })
    }

    /// `(x, y)` pairs of two columns, skipping rows where either is NaN.
    pub fn series(&self, x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
        let (xi, yi) = (self.column(x)?, self.column(y)?);
        Ok(self
            .rows
            .iter()
            .map(|r| (r[xi], r[yi]))
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .collect())
    }
}

/// Per-x statistics across runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandPoint {
    pub x: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => values[n / 2],
        _ => 0.5 * (values[n / 2 - 1] + values[n / 2]),
    }
}

/// Median and min-max over the runs at every x that occurs in any run.
pub fn band(runs: &[Vec<(f64, f64)>]) -> Vec<BandPoint> {
    let mut xs: Vec<f64> = runs.iter().flatten().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.into_iter()
        .map(|x| {
            let mut ys: Vec<f64> = runs
                .iter()
                .flat_map(|r| r.iter().filter(|p| p.0 == x).map(|p| p.1))
                .collect();
            let min = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            BandPoint {
                x,
                median: median(&mut ys),
                min,
                max,
            }
        })
        .collect()
}

/// Runs of one condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub label: String,
    pub runs: Vec<Vec<(f64, f64)>>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(raw);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(t);
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Standalone SVG: one median polyline per group, with a translucent
/// min-max band when the group has more than one run.
pub fn render_svg(groups: &[Group], title: &str, x_label: &str, y_label: &str) -> Result<String> {
    let bands: Vec<Vec<BandPoint>> = groups.iter().map(|g| band(&g.runs)).collect();
    let points: Vec<&BandPoint> = bands.iter().flatten().collect();
    if points.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no data points to plot".into(),
        });
    }
    let (w, h) = (720.0, 440.0);
    let (ml, mr, mt, mb) = (70.0, 150.0, 40.0, 55.0);
    let fold = |f: fn(f64, f64) -> f64, init: f64, g: &dyn Fn(&BandPoint) -> f64| {
        points.iter().map(|p| g(p)).fold(init, f)
    };
    let (mut x0, mut x1) = (fold(f64::min, f64::INFINITY, &|p| p.x), fold(f64::max, f64::NEG_INFINITY, &|p| p.x));
    let (mut y0, mut y1) = (fold(f64::min, f64::INFINITY, &|p| p.min), fold(f64::max, f64::NEG_INFINITY, &|p| p.max));
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, (ml + w - mr) / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - ml - mr,
        h - mt - mb
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, h - mb, h - mb + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, h - mb + 18.0, fmt_tick(t));
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, ml, w - mr);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, ml - 6.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (ml + w - mr) / 2.0, h - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (mt + h - mb) / 2.0,
        escape(y_label)
    );
    for (i, (g, b)) in groups.iter().zip(&bands).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if g.runs.len() > 1 {
            let mut pts: Vec<String> = b.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.max))).collect();
            pts.extend(b.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.min))));
            let _ = writeln!(
                s,
                r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let pts: Vec<String> = b.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.median))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="median" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = mt + 16.0 + 20.0 * i as f64;
        let lx = w - mr + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{} (n={})</text>"#, lx + 26.0, ly + 4.0, escape(&g.label), g.runs.len());
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_parsing() {
        let t = Table::parse("# seed 3\n# condition grrt k8\na,b\n1,2\n3,NaN\n").unwrap();
        assert_eq!(t.meta("seed"), Some("3"));
        assert_eq!(t.meta("condition"), Some("grrt k8"));
        assert_eq!(t.series("a", "b").unwrap(), vec![(1.0, 2.0)]);
        assert!(t.series("a", "c").is_err());
    }

    #[test]
    fn malformed_row_reports_line() {
        match Table::parse("a,b\n1,2\n1,x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Table::parse("a,b\n1\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn single_run_draws_one_polyline_without_band() {
        let g = Group {
            label: "x".into(),
            runs: vec![vec![(0.0, 1.0), (1.0, 2.0)]],
        };
        let svg = render_svg(&[g], "t", "x", "y").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<polygon").count(), 0);
    }

    #[test]
    fn empty_data_is_an_error() {
        let g = Group {
            label: "x".into(),
            runs: vec![vec![]],
        };
        assert!(render_svg(&[g], "t", "x", "y").is_err());
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&mut [5.0]), 5.0);
    }
}
