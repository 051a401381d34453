//! Static SVG of a lamination.
//!
//! Live fragments are filled in two alternating colours by depth parity; the
//! thrown polygons show through in a third. Coordinates are printed with a
//! fixed number of decimals so the output is byte-stable.

use std::f64::consts::TAU;
use std::fmt::Write;

use lamqsd::{CirclePoint, Fragment, Lamination};

pub const FILL_EVEN: &str = "#f3ede2";
pub const FILL_ODD: &str = "#cfdcea";
pub const POLYGON_FILL: &str = "#3d4b66";
pub const STROKE: &str = "#1b2230";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChordStyle {
    Straight,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy)]
pub struct RenderOptions {
    pub size: u32,
    pub style: ChordStyle,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            size: 800,
            style: ChordStyle::Straight,
        }
    }
}

struct Canvas {
    c: f64,
    r: f64,
    style: ChordStyle,
}

fn f(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn ccw(from: f64, to: f64) -> f64 {
    let d = to - from;
    if d < 0.0 {
        d + 1.0
    } else {
        d
    }
}

impl Canvas {
    fn xy(&self, t: f64) -> (f64, f64) {
        let a = TAU * t;
        (self.c + self.r * a.cos(), self.c - self.r * a.sin())
    }

    fn move_to(&self, t: f64, d: &mut String) {
        let (x, y) = self.xy(t);
        write!(d, "M{} {}", f(x), f(y)).unwrap();
    }

    /// Counterclockwise boundary arc to `to`.
    fn boundary_to(&self, from: f64, to: f64, d: &mut String) {
        let len = ccw(from, to);
        let (x, y) = self.xy(to);
        let large = u8::from(len > 0.5);
        write!(d, " A{} {} 0 {large} 0 {} {}", f(self.r), f(self.r), f(x), f(y)).unwrap();
    }

    /// Chord from `from` to `to`, straight or along the orthogonal circle.
    fn chord_to(&self, from: f64, to: f64, d: &mut String) {
        let (x, y) = self.xy(to);
        let gap = ccw(from, to);
        let half = std::f64::consts::PI * gap.min(1.0 - gap);
        if self.style == ChordStyle::Straight || (gap - 0.5).abs() < 1e-9 || half < 1e-9 {
            write!(d, " L{} {}", f(x), f(y)).unwrap();
            return;
        }
        // geodesic: circle orthogonal to the boundary through both endpoints
        let radius = self.r * half.tan();
        let sweep = u8::from(gap < 0.5);
        write!(d, " A{} {} 0 0 {sweep} {} {}", f(radius), f(radius), f(x), f(y)).unwrap();
    }

    fn fragment_path(&self, frag: &Fragment) -> String {
        let mut arcs: Vec<(f64, f64)> = frag
            .arcs
            .iter()
            .map(|a| (a.start.position(), a.end.position()))
            .collect();
        let mut d = String::new();
        if arcs.len() == 1 && arcs[0].0 == arcs[0].1 {
            let t = arcs[0].0;
            let opposite = (t + 0.5) % 1.0;
            self.move_to(t, &mut d);
            self.boundary_to(t, opposite, &mut d);
            self.boundary_to(opposite, t, &mut d);
            d.push_str(" Z");
            return d;
        }
        arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, &(s, e)) in arcs.iter().enumerate() {
            if i == 0 {
                self.move_to(s, &mut d);
            }
            self.boundary_to(s, e, &mut d);
            let next = arcs[(i + 1) % arcs.len()].0;
            self.chord_to(e, next, &mut d);
        }
        d.push_str(" Z");
        d
    }

    fn polygon_path(&self, poly: &[CirclePoint]) -> String {
        let ts: Vec<f64> = poly.iter().map(|p| p.position()).collect();
        let mut d = String::new();
        self.move_to(ts[0], &mut d);
        if ts.len() == 2 {
            self.chord_to(ts[0], ts[1], &mut d);
            return d;
        }
        for i in 0..ts.len() {
            self.chord_to(ts[i], ts[(i + 1) % ts.len()], &mut d);
        }
        d.push_str(" Z");
        d
    }
}

/// Renders the current state of `lam` as a standalone SVG document.
pub fn render(lam: &Lamination, opts: &RenderOptions) -> String {
    let size = f64::from(opts.size);
    let canvas = Canvas {
        c: size / 2.0,
        r: size / 2.0 * 0.95,
        style: opts.style,
    };
    let stroke_w = (size / 800.0).max(0.25);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        opts.size
    )
    .unwrap();
    writeln!(
        s,
        r#"<circle cx="{c}" cy="{c}" r="{r}" fill="{POLYGON_FILL}"/>"#,
        c = f(canvas.c),
        r = f(canvas.r)
    )
    .unwrap();
    writeln!(s, r#"<g stroke="none">"#).unwrap();
    for frag in lam.live_fragments() {
        let fill = if frag.depth() % 2 == 0 {
            FILL_EVEN
        } else {
            FILL_ODD
        };
        writeln!(s, r#"<path fill="{fill}" d="{}"/>"#, canvas.fragment_path(frag)).unwrap();
    }
    writeln!(s, "</g>").unwrap();
    writeln!(
        s,
        r#"<g fill="none" stroke="{STROKE}" stroke-width="{}">"#,
        f(stroke_w)
    )
    .unwrap();
    for poly in lam.polygons() {
        writeln!(s, r#"<path d="{}"/>"#, canvas.polygon_path(poly)).unwrap();
    }
    writeln!(
        s,
        r#"<circle cx="{c}" cy="{c}" r="{r}"/>"#,
        c = f(canvas.c),
        r = f(canvas.r)
    )
    .unwrap();
    writeln!(s, "</g>").unwrap();
    s.push_str("</svg>\n");
    s
}
