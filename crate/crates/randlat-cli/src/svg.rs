//! Minimal SVG line plots — enough to eyeball a sweep without pulling in
//! a plotting dependency.
//!
//! The output is a single self-contained `<svg>` element: axes, tick
//! labels, one polyline through the data points, and optionally a dashed
//! horizontal reference line (the theoretical level the data is compared
//! against).

/// Render `points` as a polyline. `reference`, when given, draws a dashed
/// horizontal line at that y level and includes it in the y-axis range.
pub fn line_plot(
    points: &[(f64, f64)],
    reference: Option<f64>,
    x_label: &str,
    y_label: &str,
    title: &str,
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const ML: f64 = 70.0; // left margin (y tick labels)
    const MR: f64 = 20.0;
    const MT: f64 = 40.0; // top margin (title)
    const MB: f64 = 55.0; // bottom margin (x label)

    let finite: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();

    let (mut x_lo, mut x_hi) = bounds(finite.iter().map(|p| p.0));
    let (mut y_lo, mut y_hi) = bounds(
        finite
            .iter()
            .map(|p| p.1)
            .chain(reference.iter().copied().filter(|r| r.is_finite())),
    );
    if x_lo == x_hi {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_lo == y_hi {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    // A little headroom so points never sit on the frame.
    let pad_y = 0.05 * (y_hi - y_lo);
    y_lo -= pad_y;
    y_hi += pad_y;
    y_lo = y_lo.min(0.0_f64.min(y_hi)); // keep zero visible for rate plots

    let sx = |x: f64| ML + (x - x_lo) / (x_hi - x_lo) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y_lo) / (y_hi - y_lo) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        escape(title)
    ));

    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{ml}\" y1=\"{hb}\" x2=\"{wr}\" y2=\"{hb}\" stroke=\"black\"/>\n",
        ml = ML,
        hb = H - MB,
        wr = W - MR
    ));
    svg.push_str(&format!(
        "  <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{hb}\" stroke=\"black\"/>\n",
        ml = ML,
        mt = MT,
        hb = H - MB
    ));

    // Ticks: five per axis.
    for i in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let px = sx(fx);
        svg.push_str(&format!(
            "  <line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
            H - MB,
            H - MB + 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            H - MB + 20.0,
            tick(fx)
        ));
        let fy = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let py = sy(fy);
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{py}\" x2=\"{ml}\" y2=\"{py}\" stroke=\"black\"/>\n",
            ML - 5.0,
            ml = ML
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            ML - 9.0,
            py + 4.0,
            tick(fy)
        ));
    }

    // Axis labels.
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        escape(y_label)
    ));

    // Reference level.
    if let Some(r) = reference.filter(|r| r.is_finite()) {
        let py = sy(r);
        svg.push_str(&format!(
            "  <line x1=\"{ml}\" y1=\"{py}\" x2=\"{wr}\" y2=\"{py}\" stroke=\"crimson\" \
             stroke-dasharray=\"6 4\"/>\n",
            ml = ML,
            wr = W - MR
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" fill=\"crimson\">{}</text>\n",
            W - MR - 4.0,
            py - 6.0,
            tick(r)
        ));
    }

    // The data polyline and its markers.
    if !finite.is_empty() {
        let pts: Vec<String> = finite
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        for &(x, y) in &finite {
            svg.push_str(&format!(
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>\n",
                sx(x),
                sy(y)
            ));
        }
    }

    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 100.0 {
        format!("{:.0}", v)
    } else if v.abs() >= 1.0 {
        format!("{:.2}", v)
    } else {
        format!("{:.3}", v)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_contains_polyline_reference_and_labels() {
        let pts = [(1.0, 0.5), (5.0, 0.8), (20.0, 0.95)];
        let svg = line_plot(&pts, Some(1.0), "volume", "normalized", "demo sweep");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("volume"));
        assert!(svg.contains("normalized"));
        assert!(svg.contains("demo sweep"));
        // No NaN coordinates anywhere.
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn degenerate_inputs_do_not_produce_nan() {
        let svg = line_plot(&[(2.0, 3.0)], None, "x", "y", "single point");
        assert!(svg.contains("<circle"));
        assert!(!svg.contains("NaN"));
        let svg = line_plot(&[], Some(0.5), "x", "y", "empty");
        assert!(svg.contains("</svg>"));
        assert!(!svg.contains("polyline"));
        assert!(!svg.contains("NaN"));
        let svg = line_plot(&[(1.0, f64::NAN), (2.0, 1.0)], None, "x", "y", "nan filtered");
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("NaN"));
    }
}
