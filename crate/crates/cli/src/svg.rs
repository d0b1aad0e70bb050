use std::fmt::Write;

const W: f64 = 900.0;
const H: f64 = 420.0;
const MARGIN: f64 = 50.0;

/// Static control chart: the monitored statistic per sample index, the
/// UCL line, the LCL (zero) line, and out-of-control points marked.
pub fn control_chart(series: &[(usize, f64, bool)], ucl: f64, phase1_n: usize) -> String {
    let n = series.len().max(1);
    let ymax = series
        .iter()
        .map(|&(_, v, _)| v)
        .fold(ucl, f64::max)
        .max(1e-9)
        * 1.1;
    let sx = |i: usize| MARGIN + (i as f64 - 1.0) / (n.max(2) as f64 - 1.0) * (W - 2.0 * MARGIN);
    let sy = |v: f64| H - MARGIN - (v / ymax) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
    );
    // axes
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#,
        m = MARGIN,
        y0 = H - MARGIN,
        x1 = W - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{y0}" stroke="black"/>"#,
        m = MARGIN,
        y0 = H - MARGIN
    );
    // LCL at zero and UCL
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{y}" x2="{x1}" y2="{y}" stroke="green" stroke-dasharray="6,3"/>"#,
        m = MARGIN,
        x1 = W - MARGIN,
        y = sy(0.0)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{y}" x2="{x1}" y2="{y}" stroke="red" stroke-dasharray="6,3"/>"#,
        m = MARGIN,
        x1 = W - MARGIN,
        y = sy(ucl)
    );
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" fill="red">UCL={ucl:.5}</text>"#,
        x = W - MARGIN + 2.0,
        y = sy(ucl) + 4.0
    );
    // phase boundary
    if phase1_n > 0 && phase1_n < n {
        let x = 0.5 * (sx(phase1_n) + sx(phase1_n + 1));
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{m}" x2="{x}" y2="{y0}" stroke="gray" stroke-dasharray="2,4"/>"#,
            m = MARGIN,
            y0 = H - MARGIN
        );
    }
    // polyline through the statistic
    let pts: Vec<String> = series
        .iter()
        .map(|&(i, v, _)| format!("{:.2},{:.2}", sx(i), sy(v)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="steelblue"/>"#,
        pts.join(" ")
    );
    for &(i, v, out) in series {
        let (color, radius) = if out {
            ("red", 3.5)
        } else {
            ("steelblue", 2.5)
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="{color}"/>"#,
            sx(i),
            sy(v)
        );
    }
    s.push_str("</svg>\n");
    s
}
