//! Barcode pictures: the source strip above the target strip, each
//! iteration's slice and its shadow drawn in the same gray.

use std::fmt::Write;

use mmt_core::{BarcodeTrace, Measure};

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;
const STRIP: f64 = 80.0;
const GAP: f64 = 30.0;
const ATOM_WIDTH: f64 = 2.0;

struct Frame {
    lo: f64,
    span: f64,
    /// largest density and largest atom mass, shared by both strips
    density: f64,
    atom: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.lo) / self.span * (WIDTH - 2.0 * MARGIN)
    }
}

/// Gray level of slice `k` out of `n`: dark to light.
fn shade(k: usize, n: usize) -> String {
    let level = if n <= 1 { 64 } else { 48 + (160 * k) / (n - 1) };
    format!("#{level:02x}{level:02x}{level:02x}")
}

fn strip(out: &mut String, m: &Measure, top: f64, fill: &str, f: &Frame) {
    let bottom = top + STRIP;
    for p in m.pieces() {
        let h = STRIP * p.density / f.density;
        let (x0, x1) = (f.x(p.left), f.x(p.right));
        writeln!(
            out,
            r#"<rect x="{x0:.3}" y="{:.3}" width="{:.3}" height="{h:.3}" fill="{fill}"/>"#,
            bottom - h,
            x1 - x0
        )
        .unwrap();
    }
    for a in m.atoms() {
        let h = STRIP * a.mass / f.atom;
        writeln!(
            out,
            r#"<rect x="{:.3}" y="{:.3}" width="{ATOM_WIDTH:.3}" height="{h:.3}" fill="{fill}"/>"#,
            f.x(a.x) - ATOM_WIDTH / 2.0,
            bottom - h
        )
        .unwrap();
    }
}

pub fn render_barcode_svg(trace: &BarcodeTrace, mu: &Measure, nu: &Measure) -> String {
    let (lo, hi) = match (mu.support(), nu.support()) {
        (Some(a), Some(b)) => (a.0.min(b.0), a.1.max(b.1)),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => (0.0, 1.0),
    };
    let max_of = |f: &dyn Fn(&Measure) -> f64| f(mu).max(f(nu)).max(f64::MIN_POSITIVE);
    let frame = Frame {
        lo,
        span: if hi > lo { hi - lo } else { 1.0 },
        density: max_of(&|m| m.pieces().iter().map(|p| p.density).fold(0.0, f64::max)),
        atom: max_of(&|m| m.atoms().iter().map(|a| a.mass).fold(0.0, f64::max)),
    };
    let height = 2.0 * MARGIN + 2.0 * STRIP + GAP;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    )
    .unwrap();
    writeln!(out, r##"<rect x="0" y="0" width="{WIDTH}" height="{height}" fill="#ffffff"/>"##).unwrap();
    let (mu_top, nu_top) = (MARGIN, MARGIN + STRIP + GAP);
    let n = trace.iterations.len();
    if n == 0 {
        strip(&mut out, mu, mu_top, &shade(0, 1), &frame);
        strip(&mut out, nu, nu_top, &shade(0, 1), &frame);
    }
    for (k, it) in trace.iterations.iter().enumerate() {
        let fill = shade(k, n);
        strip(&mut out, &it.mu_slice, mu_top, &fill, &frame);
        strip(&mut out, &it.shadow_slice, nu_top, &fill, &frame);
    }
    out.push_str("</svg>\n");
    out
}
