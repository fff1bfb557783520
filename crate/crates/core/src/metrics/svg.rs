//! Self-contained SVG renderings of a metrics report: per-class
//! precision/recall/F1 bars, a confusion-matrix heatmap, and one-vs-rest
//! ROC polylines. No external assets; every figure is a single string.

use crate::metrics::report::MetricsReport;

const BAR_COLORS: [&str; 3] = ["#4c72b0", "#dd8452", "#55a868"];

fn svg_header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    )
}

/// Grouped bar chart of per-class precision, recall, and F1.
pub fn per_class_bars_svg(report: &MetricsReport) -> String {
    let k = report.per_class.len();
    let group_w = 70.0;
    let bar_w = 18.0;
    let plot_h = 220.0;
    let left = 50.0;
    let bottom = 260.0;
    let width = left + k as f64 * group_w + 20.0;
    let height = bottom + 60.0;

    let mut out = svg_header(width, height);
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // y axis with gridlines at 0, 0.25, .., 1.0
    for i in 0..=4 {
        let v = i as f64 * 0.25;
        let y = bottom - v * plot_h;
        out.push_str(&format!(
            "<line x1=\"{left}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>\n",
            width - 20.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v:.2}</text>\n",
            left - 5.0,
            y + 4.0
        ));
    }
    for (ci, m) in report.per_class.iter().enumerate() {
        let x0 = left + ci as f64 * group_w + 6.0;
        let values = [m.precision.value, m.recall.value, m.f1.value];
        for (bi, v) in values.iter().enumerate() {
            let h = v * plot_h;
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{bar_w}\" height=\"{h}\" fill=\"{}\"/>\n",
                x0 + bi as f64 * (bar_w + 1.0),
                bottom - h,
                BAR_COLORS[bi]
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(35 {} {})\">{}</text>\n",
            x0 + 28.0,
            bottom + 16.0,
            x0 + 28.0,
            bottom + 16.0,
            m.class
        ));
    }
    for (bi, label) in ["precision", "recall", "f1"].iter().enumerate() {
        let x = left + bi as f64 * 90.0;
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"12\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
            BAR_COLORS[bi]
        ));
        out.push_str(&format!("<text x=\"{}\" y=\"22\">{label}</text>\n", x + 16.0));
    }
    out.push_str("</svg>\n");
    out
}

/// Confusion-matrix heatmap with per-cell counts.
pub fn confusion_heatmap_svg(report: &MetricsReport) -> String {
    let k = report.confusion.len();
    let cell = 46.0;
    let left = 110.0;
    let top = 50.0;
    let width = left + k as f64 * cell + 20.0;
    let height = top + k as f64 * cell + 40.0;
    let max = report
        .confusion
        .iter()
        .flatten()
        .copied()
        .max()
        .unwrap_or(1)
        .max(1) as f64;

    let mut out = svg_header(width, height);
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, row) in report.confusion.iter().enumerate() {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            left - 6.0,
            top + i as f64 * cell + cell / 2.0 + 4.0,
            report.class_names[i]
        ));
        for (j, &n) in row.iter().enumerate() {
            let intensity = (n as f64 / max).sqrt();
            let shade = (255.0 - intensity * 175.0) as u8;
            let x = left + j as f64 * cell;
            let y = top + i as f64 * cell;
            out.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"rgb({shade},{shade},255)\" stroke=\"#999\"/>\n"
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{n}</text>\n",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            ));
        }
    }
    for (j, name) in report.class_names.iter().enumerate() {
        let x = left + j as f64 * cell + cell / 2.0;
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-40 {x} {})\">{name}</text>\n",
            top - 10.0,
            top - 10.0
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// One-vs-rest ROC polylines for every class with a defined curve.
pub fn roc_svg(report: &MetricsReport) -> String {
    let size = 320.0;
    let margin = 45.0;
    let width = size + margin * 2.0 + 140.0;
    let height = size + margin * 2.0;
    let palette = [
        "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
    ];

    let mut out = svg_header(width, height);
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let sx = |fpr: f64| margin + fpr * size;
    let sy = |tpr: f64| margin + size - tpr * size;
    out.push_str(&format!(
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{size}\" height=\"{size}\" fill=\"none\" stroke=\"#333\"/>\n"
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n",
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(1.0)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">false positive rate</text>\n",
        margin + size / 2.0,
        height - 8.0
    ));
    out.push_str(&format!(
        "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\">true positive rate</text>\n",
        margin + size / 2.0,
        margin + size / 2.0
    ));

    let mut legend_y = margin + 6.0;
    for (c, curve) in report.roc_curves.iter().enumerate() {
        let Some(points) = curve else { continue };
        let color = palette[c % palette.len()];
        let path: Vec<String> = points.iter().map(|(f, t)| format!("{},{}", sx(*f), sy(*t))).collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        let auc = report.per_class_auc[c].unwrap_or(f64::NAN);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{legend_y}\" fill=\"{color}\">{} (auc {:.4})</text>\n",
            margin + size + 12.0,
            report.class_names[c],
            auc
        ));
        legend_y += 16.0;
    }
    out.push_str("</svg>\n");
    out
}
