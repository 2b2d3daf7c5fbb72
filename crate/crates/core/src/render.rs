//! CSV and SVG output for region maps and profit curves.
//!
//! Numbers are written with 12 significant digits and a `.` decimal
//! separator. SVG documents are standalone SVG 1.1.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pricing::{OptimalRegime, Regime};
use crate::sweep::{CurveSample, ProfitCurve, RegionCell, RegionMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

impl Format {
    /// Format implied by a file extension.
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        path.extension()
            .and_then(|e| e.to_str())
            .ok_or_else(|| Error::UnsupportedFormat(path.display().to_string()))?
            .parse()
    }
}

pub trait Render {
    fn to_csv(&self) -> String;
    fn to_svg(&self) -> String;
}

pub fn render<R: Render + ?Sized>(doc: &R, format: &str) -> Result<String> {
    Ok(render_as(doc, format.parse()?))
}

pub fn render_as<R: Render + ?Sized>(doc: &R, format: Format) -> String {
    match format {
        Format::Csv => doc.to_csv(),
        Format::Svg => doc.to_svg(),
    }
}

/// `x` rounded to 12 significant digits, shortest plain form where sensible.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

impl Render for RegionMap {
    fn to_csv(&self) -> String {
        let mut out = format!(
            "{},{},regime,optimal_p1,optimal_profit\n",
            self.axis_x.name, self.axis_y.name
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_num(c.x),
                fmt_num(c.y),
                c.regime,
                fmt_num(c.optimal_p1),
                fmt_num(c.optimal_profit)
            );
        }
        out
    }

    fn to_svg(&self) -> String {
        map_svg(self)
    }
}

impl Render for ProfitCurve {
    fn to_csv(&self) -> String {
        let mut out = String::from("p1,profit,regime\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{}", fmt_num(s.p1), fmt_num(s.profit), s.regime);
        }
        out
    }

    fn to_svg(&self) -> String {
        curve_svg(self)
    }
}

fn fields(line: &str, n: usize, lineno: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != n {
        return Err(Error::Parse(format!(
            "line {lineno}: expected {n} fields, found {}",
            f.len()
        )));
    }
    Ok(f)
}

fn num(s: &str, lineno: usize) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Parse(format!("line {lineno}: bad number `{s}`")))
}

/// Reads back the cells of a region-map CSV.
pub fn parse_map_csv(text: &str) -> Result<Vec<RegionCell>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty document".into()))?;
    if !header.ends_with(",regime,optimal_p1,optimal_profit") {
        return Err(Error::Parse(format!("unexpected header `{header}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f = fields(line, 5, i + 2)?;
            Ok(RegionCell {
                x: num(f[0], i + 2)?,
                y: num(f[1], i + 2)?,
                regime: OptimalRegime::parse(f[2])
                    .ok_or_else(|| Error::Parse(format!("line {}: bad regime `{}`", i + 2, f[2])))?,
                optimal_p1: num(f[3], i + 2)?,
                optimal_profit: num(f[4], i + 2)?,
            })
        })
        .collect()
}

/// Reads back the samples of a profit-curve CSV.
pub fn parse_curve_csv(text: &str) -> Result<Vec<CurveSample>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("p1,profit,regime") => {}
        other => return Err(Error::Parse(format!("unexpected header {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f = fields(line, 3, i + 2)?;
            let regime = match f[2] {
                "Pi1" => Regime::Pi1,
                "Pi2bar" => Regime::Pi2Bar,
                "Pi3" => Regime::Pi3,
                "Pi4" => Regime::Pi4,
                other => return Err(Error::Parse(format!("line {}: bad regime `{other}`", i + 2))),
            };
            Ok(CurveSample {
                p1: num(f[0], i + 2)?,
                profit: num(f[1], i + 2)?,
                regime,
            })
        })
        .collect()
}

fn regime_color(r: OptimalRegime) -> &'static str {
    match r {
        OptimalRegime::Pi1 => "#4e79a7",
        OptimalRegime::Pi2Bar => "#bab0ac",
        OptimalRegime::Pi3 => "#f28e2b",
        OptimalRegime::Pi4Corner => "#59a14f",
        OptimalRegime::Pi4Interior => "#b07aa1",
    }
}

fn segment_color(r: Regime) -> &'static str {
    match r {
        Regime::Pi1 => regime_color(OptimalRegime::Pi1),
        Regime::Pi2Bar => regime_color(OptimalRegime::Pi2Bar),
        Regime::Pi3 => regime_color(OptimalRegime::Pi3),
        Regime::Pi4 => regime_color(OptimalRegime::Pi4Corner),
    }
}

fn segment_symbol(r: Regime) -> &'static str {
    match r {
        Regime::Pi1 => "Π₁",
        Regime::Pi2Bar => "Π̄₂",
        Regime::Pi3 => "Π₃",
        Regime::Pi4 => "Π₄",
    }
}

fn axis_label(name: &str) -> &str {
    match name {
        "alpha" => "α",
        "v1_over_v2" => "v₁/v₂",
        other => other,
    }
}

const SVG_HEAD: &str = r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const PLOT: f64 = 480.0;

fn open_svg(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(out, "{SVG_HEAD}");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = fmt_num(width),
        h = fmt_num(height)
    );
    let _ = writeln!(out, "<title>{title}</title>");
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##,
        fmt_num(width),
        fmt_num(height)
    );
}

fn map_svg(map: &RegionMap) -> String {
    let (nx, ny) = (map.axis_x.steps, map.axis_y.steps);
    let (cw, ch) = (PLOT / nx as f64, PLOT / ny as f64);
    let width = LEFT + PLOT + 170.0;
    let height = TOP + PLOT + 60.0;
    let f = &map.fixed;
    let mut title = format!("Regions of maximum profit (v2 = {}, p2_bar = {}", fmt_num(f.v2), fmt_num(f.p2_bar));
    if let Some(v1) = f.v1 {
        let _ = write!(title, ", v1 = {}", fmt_num(v1));
    }
    if let Some(r) = f.r {
        let _ = write!(title, ", r = {}", fmt_num(r));
    }
    title.push(')');

    let mut out = String::new();
    open_svg(&mut out, width, height, &title);
    let _ = writeln!(out, r#"<text x="{}" y="22" font-size="14">{}</text>"#, fmt_num(LEFT), title);
    let _ = writeln!(out, r#"<g id="cells" shape-rendering="crispEdges">"#);
    for iy in 0..ny {
        for ix in 0..nx {
            let c = map.cell(ix, iy);
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"><title>{} ({}, {})</title></rect>"#,
                fmt_num(LEFT + ix as f64 * cw),
                fmt_num(TOP + (ny - 1 - iy) as f64 * ch),
                fmt_num(cw),
                fmt_num(ch),
                regime_color(c.regime),
                c.regime,
                fmt_num(c.x),
                fmt_num(c.y)
            );
        }
    }
    let _ = writeln!(out, "</g>");

    let bottom = TOP + PLOT;
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{p}" height="{p}" fill="none" stroke="#000000"/>"##,
        fmt_num(LEFT),
        fmt_num(TOP),
        p = fmt_num(PLOT)
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, fmt_num(LEFT), fmt_num(bottom + 18.0), fmt_num(map.axis_x.lo));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        fmt_num(LEFT + PLOT),
        fmt_num(bottom + 18.0),
        fmt_num(map.axis_x.hi)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        fmt_num(LEFT + PLOT / 2.0),
        fmt_num(bottom + 40.0),
        axis_label(&map.axis_x.name)
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, fmt_num(LEFT - 6.0), fmt_num(bottom), fmt_num(map.axis_y.lo));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        fmt_num(LEFT - 6.0),
        fmt_num(TOP + 10.0),
        fmt_num(map.axis_y.hi)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        fmt_num(LEFT - 40.0),
        fmt_num(TOP + PLOT / 2.0),
        axis_label(&map.axis_y.name)
    );

    let _ = writeln!(out, r#"<g id="legend">"#);
    let lx = LEFT + PLOT + 20.0;
    for (i, r) in OptimalRegime::ALL.into_iter().enumerate() {
        let y = TOP + 10.0 + i as f64 * 22.0;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="14" height="14" fill="{}"/><text x="{}" y="{}">{} ({})</text>"#,
            fmt_num(lx),
            fmt_num(y),
            regime_color(r),
            fmt_num(lx + 20.0),
            fmt_num(y + 12.0),
            r,
            map.count(r)
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

fn curve_svg(curve: &ProfitCurve) -> String {
    let width = LEFT + PLOT + 40.0;
    let height = TOP + PLOT + 60.0;
    let p = &curve.params;
    let title = format!(
        "Retailer profit (v1 = {}, v2 = {}, p2_bar = {}, alpha = {}, r = {})",
        fmt_num(p.v1()),
        fmt_num(p.v2()),
        fmt_num(p.p2_bar()),
        fmt_num(p.alpha()),
        fmt_num(p.r())
    );
    let mut out = String::new();
    open_svg(&mut out, width, height, &title);
    let _ = writeln!(out, r#"<text x="{}" y="22" font-size="14">{}</text>"#, fmt_num(LEFT), title);

    let s = &curve.samples;
    let (x0, x1) = (s.first().map_or(0.0, |c| c.p1), s.last().map_or(1.0, |c| c.p1));
    let (mut y0, mut y1) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
        (lo.min(c.profit), hi.max(c.profit))
    });
    if y1 <= y0 || y1.is_nan() {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * PLOT;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * PLOT;

    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{p}" height="{p}" fill="none" stroke="#000000"/>"##,
        fmt_num(LEFT),
        fmt_num(TOP),
        p = fmt_num(PLOT)
    );

    let _ = writeln!(out, r#"<g id="landmarks">"#);
    for (i, l) in curve.landmarks.iter().enumerate() {
        let x = sx(l.p1);
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#777777" stroke-dasharray="4 3"/><text x="{x}" y="{}" text-anchor="middle" font-size="10">{} = {}</text>"##,
            fmt_num(TOP),
            fmt_num(TOP + PLOT),
            fmt_num(TOP + PLOT + 14.0 + 12.0 * (i % 2) as f64),
            l.name,
            fmt_num(l.p1),
            x = fmt_num(x),
        );
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r#"<g id="segments" fill="none" stroke-width="2">"#);
    let mut start = 0;
    while start < s.len() {
        let regime = s[start].regime;
        let mut end = start;
        while end + 1 < s.len() && s[end + 1].regime == regime {
            end += 1;
        }
        let points: Vec<String> = s[start..=end]
            .iter()
            .map(|c| format!("{},{}", fmt_num(sx(c.p1)), fmt_num(sy(c.profit))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="{}" stroke="{}" points="{}"/>"#,
            regime,
            segment_color(regime),
            points.join(" ")
        );
        let mid = &s[(start + end) / 2];
        let _ = writeln!(
            out,
            r#"<text class="segment-label" x="{}" y="{}" fill="{}" stroke="none" font-size="13">{}</text>"#,
            fmt_num(sx(mid.p1)),
            fmt_num(sy(mid.profit) - 8.0),
            segment_color(regime),
            segment_symbol(regime)
        );
        start = end + 1;
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">p₁</text>"#,
        fmt_num(LEFT + PLOT / 2.0),
        fmt_num(TOP + PLOT + 50.0)
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, fmt_num(LEFT - 6.0), fmt_num(TOP + PLOT), fmt_num(y0));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, fmt_num(LEFT - 6.0), fmt_num(TOP + 10.0), fmt_num(y1));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MarketParams;
    use crate::sweep::{profit_curve, sweep_alpha_r, GridSpec};
    use proptest::prelude::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-0.75), "-0.75");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_num(123456.789), "123456.789");
        assert_eq!(fmt_num(1e-7), "1e-7");
        assert_eq!(fmt_num(9.99999999999e15), "9.99999999999e15");
        assert_eq!(fmt_num(99.99999999999999), "100");
    }

    proptest! {
        #[test]
        fn twelve_significant_digits_round_trip(x in -1e6f64..1e6) {
            let back: f64 = fmt_num(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 5e-12 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn formats() {
        assert_eq!("CSV".parse::<Format>().unwrap(), Format::Csv);
        assert!(matches!("png".parse::<Format>(), Err(Error::UnsupportedFormat(_))));
        assert_eq!(Format::from_path("a/fig.svg".as_ref()).unwrap(), Format::Svg);
        assert!(Format::from_path("noext".as_ref()).is_err());
    }

    #[test]
    fn map_csv_schema_and_round_trip() {
        let map = sweep_alpha_r(2.0, 1.0, 0.0, GridSpec::unit(7), GridSpec::unit(5)).unwrap();
        let csv = render(&map, "csv").unwrap();
        assert!(csv.starts_with("alpha,r,regime,optimal_p1,optimal_profit\n"));
        let cells = parse_map_csv(&csv).unwrap();
        assert_eq!(cells.len(), 35);
        for (a, b) in cells.iter().zip(&map.cells) {
            assert_eq!(a.regime, b.regime);
            for (u, v) in [(a.x, b.x), (a.y, b.y), (a.optimal_p1, b.optimal_p1), (a.optimal_profit, b.optimal_profit)] {
                assert!((u - v).abs() <= 5e-12 * v.abs().max(1e-300), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn curve_csv_schema() {
        let p = MarketParams::new(2.0, 1.0, 0.0, 0.25, 0.125).unwrap();
        let curve = profit_curve(&p, 0.0, 1.5, 16).unwrap();
        let csv = render(&curve, "csv").unwrap();
        assert!(csv.starts_with("p1,profit,regime\n"));
        let back = parse_curve_csv(&csv).unwrap();
        assert_eq!(back.len(), curve.samples.len());
        assert!(back.iter().zip(&curve.samples).all(|(a, b)| a.regime == b.regime));
    }

    #[test]
    fn map_svg_has_one_rect_per_cell() {
        let map = sweep_alpha_r(3.0, 1.0, 0.0, GridSpec::unit(6), GridSpec::unit(4)).unwrap();
        let svg = render(&map, "svg").unwrap();
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains(r#"version="1.1""#));
        assert!(svg.trim_end().ends_with("</svg>"));
        let cells = svg.split(r#"<g id="cells""#).nth(1).unwrap().split("</g>").next().unwrap();
        assert_eq!(cells.matches("<rect ").count(), 24);
        assert!(svg.contains("Pi4C"));
    }

    #[test]
    fn curve_svg_annotates_segments_and_landmarks() {
        let p = MarketParams::new(2.0, 1.0, 0.0, 0.25, 0.45).unwrap();
        let curve = profit_curve(&p, -0.2, 1.5, 200).unwrap();
        let svg = render(&curve, "svg").unwrap();
        assert!(svg.contains("Π₄"));
        assert!(svg.contains(r#"class="Pi4""#));
        assert!(svg.contains("p1_B ="));
        assert!(render(&curve, "pdf").is_err());
    }
}
