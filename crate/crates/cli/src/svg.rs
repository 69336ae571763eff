//! Deterministic SVG charts: plain shapes, fixed-precision coordinates, no
//! external renderer.

/// One polyline on a line chart.
pub struct Series<'a> {
    pub name: &'a str,
    /// Any CSS color.
    pub color: &'a str,
    pub points: &'a [(f64, f64)],
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const TICKS: usize = 5;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn of(series: &[Series<'_>]) -> Self {
        let mut f = Self {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for s in series {
            for &(x, y) in s.points {
                f.x_min = f.x_min.min(x);
                f.x_max = f.x_max.max(x);
                f.y_min = f.y_min.min(y);
                f.y_max = f.y_max.max(y);
            }
        }
        // Empty chart: draw unit axes.
        if !f.x_min.is_finite() {
            return Self {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            };
        }
        if f.x_max == f.x_min {
            f.x_max = f.x_min + 1.0;
        }
        if f.y_max == f.y_min {
            f.y_max = f.y_min + 1.0;
        }
        // Headroom so lines do not sit on the frame.
        let pad = (f.y_max - f.y_min) * 0.05;
        f.y_min -= pad;
        f.y_max += pad;
        f
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN_L + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn header(out: &mut String, title: &str) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" \
         viewBox=\"0 0 {} {}\" font-family=\"sans-serif\" font-size=\"12\">\n",
        WIDTH, HEIGHT, WIDTH, HEIGHT
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        fmt(WIDTH / 2.0),
        escape(title)
    ));
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(WIDTH - MARGIN_L - MARGIN_R),
        fmt(HEIGHT - MARGIN_T - MARGIN_B)
    ));
    for i in 0..=TICKS {
        let t = i as f64 / TICKS as f64;
        let xv = frame.x_min + t * (frame.x_max - frame.x_min);
        let yv = frame.y_min + t * (frame.y_max - frame.y_min);
        let xp = frame.x(xv);
        let yp = frame.y(yv);
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#444\"/>\n",
            fmt(xp),
            fmt(HEIGHT - MARGIN_B),
            fmt(HEIGHT - MARGIN_B + 5.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt(xp),
            fmt(HEIGHT - MARGIN_B + 18.0),
            tick_label(xv)
        ));
        out.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"#444\"/>\n",
            fmt(yp),
            fmt(MARGIN_L - 5.0),
            fmt(MARGIN_L)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_L - 8.0),
            fmt(yp + 4.0),
            tick_label(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        fmt(MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0),
        fmt(HEIGHT - 12.0),
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt(MARGIN_T + (HEIGHT - MARGIN_T - MARGIN_B) / 2.0),
        fmt(MARGIN_T + (HEIGHT - MARGIN_T - MARGIN_B) / 2.0),
        escape(y_label)
    ));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Multi-series line chart; an empty series list yields bare axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let frame = Frame::of(series);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &frame, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(frame.x(x)), fmt(frame.y(y))))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            s.color,
            pts.join(" ")
        ));
        let ly = MARGIN_T + 16.0 + 16.0 * i as f64;
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"3\"/>\n",
            fmt(MARGIN_L + 10.0),
            fmt(ly - 4.0),
            fmt(MARGIN_L + 34.0),
            s.color
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            fmt(MARGIN_L + 40.0),
            fmt(ly),
            escape(s.name)
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Labeled bar chart with a value printed above each bar.
pub fn bar_chart(
    title: &str,
    y_label: &str,
    labels: &[String],
    values: &[f64],
    value_labels: &[String],
) -> String {
    assert_eq!(labels.len(), values.len());
    assert_eq!(labels.len(), value_labels.len());
    let y_max = values.iter().cloned().fold(1.0f64, f64::max) * 1.15;
    let frame = Frame {
        x_min: 0.0,
        x_max: labels.len().max(1) as f64,
        y_min: 0.0,
        y_max,
    };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &frame, "", y_label);
    let slot = (WIDTH - MARGIN_L - MARGIN_R) / labels.len().max(1) as f64;
    let bar_w = slot * 0.6;
    for (i, ((label, &value), value_label)) in
        labels.iter().zip(values).zip(value_labels).enumerate()
    {
        let x0 = MARGIN_L + slot * i as f64 + (slot - bar_w) / 2.0;
        let y0 = frame.y(value);
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#4878a8\"/>\n",
            fmt(x0),
            fmt(y0),
            fmt(bar_w),
            fmt(HEIGHT - MARGIN_B - y0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt(x0 + bar_w / 2.0),
            fmt(y0 - 6.0),
            escape(value_label)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt(x0 + bar_w / 2.0),
            fmt(HEIGHT - MARGIN_B + 18.0),
            escape(label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_chart_renders_axes_only() {
        let svg = line_chart("t", "x", "y", &[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(!svg.contains("polyline"));
    }

    #[test]
    fn chart_is_deterministic() {
        let pts = [(0.0, 1.0), (1.0, 2.0), (2.0, 0.5)];
        let series = [Series {
            name: "a",
            color: "#c04040",
            points: &pts,
        }];
        assert_eq!(
            line_chart("t", "x", "y", &series),
            line_chart("t", "x", "y", &series)
        );
    }

    #[test]
    fn bars_carry_value_labels() {
        let svg = bar_chart(
            "t",
            "norm",
            &["a".into(), "b".into()],
            &[1.0, 0.87],
            &["1.00".into(), "0.87".into()],
        );
        assert_eq!(svg.matches("<rect").count(), 3); // frame + two bars
        assert!(svg.contains(">0.87<"));
    }
}
