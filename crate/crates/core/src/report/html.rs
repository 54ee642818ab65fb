//! Self-contained HTML with inline SVG charts. Chart data is embedded as
//! the exact `summary.json` document.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{display, summary_json, ReportBundle, ReportError, REPORT_HTML};
use crate::metrics::ModelFairnessSummary;

pub const CHART_CONTAINER_CLASS: &str = "chart-container";

const BAR_WIDTH: f64 = 48.0;
const BAR_GAP: f64 = 24.0;
const PLOT_HEIGHT: f64 = 160.0;
const PIE_RADIUS: f64 = 40.0;

const STYLE: &str = "body{font-family:sans-serif;margin:2em;color:#222}\
table{border-collapse:collapse;margin:1em 0}\
th,td{border:1px solid #bbb;padding:4px 10px;text-align:right}\
th:first-child,td:first-child{text-align:left}\
section[data-metric]{margin:2em 0}\
.pies{display:flex;flex-wrap:wrap;gap:1em}\
figure{margin:0;text-align:center}\
footer{color:#666;font-size:0.85em}";

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(ch),
        }
    }
    out
}

/// JSON is safe inside a script element once `</` cannot close it.
fn script_safe(json: &str) -> String {
    json.replace("</", "<\\/")
}

fn bar_chart(title: &str, bars: &[(String, f64, String)], scale_max: f64) -> String {
    let width = BAR_GAP + bars.len() as f64 * (BAR_WIDTH + BAR_GAP);
    let height = PLOT_HEIGHT + 50.0;
    let top = 20.0;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         role=\"img\" aria-label=\"{}\">",
        escape(title)
    );
    let axis_y = top + PLOT_HEIGHT;
    let _ = write!(
        svg,
        "<line x1=\"0\" y1=\"{axis_y:.1}\" x2=\"{width:.1}\" y2=\"{axis_y:.1}\" stroke=\"#444\"/>"
    );
    for (i, (label, value, shown)) in bars.iter().enumerate() {
        let x = BAR_GAP + i as f64 * (BAR_WIDTH + BAR_GAP);
        let h = if scale_max > 0.0 {
            (value / scale_max).clamp(0.0, 1.0) * PLOT_HEIGHT
        } else {
            0.0
        };
        let y = axis_y - h;
        let cx = x + BAR_WIDTH / 2.0;
        let _ = write!(
            svg,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{BAR_WIDTH:.1}\" height=\"{h:.1}\" fill=\"#4a78b5\"/>\
             <text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\
             <text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{}</text>",
            y - 4.0,
            escape(shown),
            axis_y + 16.0,
            escape(label),
        );
    }
    svg.push_str("</svg>");
    svg
}

fn pie(significant: u64, total: u64) -> String {
    let r = PIE_RADIUS;
    let size = 2.0 * r + 4.0;
    let c = r + 2.0;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size:.0}\" height=\"{size:.0}\">"
    );
    let fraction = if total == 0 {
        0.0
    } else {
        significant as f64 / total as f64
    };
    let circle = |fill: &str| format!("<circle cx=\"{c:.1}\" cy=\"{c:.1}\" r=\"{r:.1}\" fill=\"{fill}\"/>");
    if total == 0 {
        svg.push_str(&circle("#ddd"));
    } else if significant == 0 {
        svg.push_str(&circle("#9bc29b"));
    } else if significant == total {
        svg.push_str(&circle("#c65a4a"));
    } else {
        svg.push_str(&circle("#9bc29b"));
        let angle = 2.0 * PI * fraction;
        let x = c + r * angle.sin();
        let y = c - r * angle.cos();
        let large = u8::from(fraction > 0.5);
        let _ = write!(
            svg,
            "<path d=\"M{c:.3},{c:.3} L{c:.3},{:.3} A{r:.3},{r:.3} 0 {large} 1 {x:.3},{y:.3} Z\" fill=\"#c65a4a\"/>",
            c - r
        );
    }
    svg.push_str("</svg>");
    svg
}

fn chart_section(metric: &str, title: &str, body: String) -> String {
    format!(
        "<section class=\"{CHART_CONTAINER_CLASS}\" data-metric=\"{metric}\">\n<h2>{}</h2>\n{body}\n</section>\n",
        escape(title)
    )
}

fn count_section(
    metric: &str,
    title: &str,
    summaries: &[&ModelFairnessSummary],
    pick: impl Fn(&ModelFairnessSummary) -> (u64, u64),
) -> String {
    let bars: Vec<(String, f64, String)> = summaries
        .iter()
        .map(|s| {
            let (k, _) = pick(s);
            (s.model_name.clone(), k as f64, k.to_string())
        })
        .collect();
    let max = summaries
        .iter()
        .map(|s| pick(s).1)
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let mut body = bar_chart(title, &bars, max);
    body.push_str("\n<div class=\"pies\">");
    for s in summaries {
        let (k, n) = pick(s);
        let _ = write!(
            body,
            "<figure>{}<figcaption>{}: {k} of {n} significant</figcaption></figure>",
            pie(k, n),
            escape(&s.model_name)
        );
    }
    body.push_str("</div>");
    chart_section(metric, title, body)
}

/// The full report document.
pub fn render_html(bundle: &ReportBundle) -> String {
    let mut summaries: Vec<&ModelFairnessSummary> = bundle.summaries.iter().collect();
    summaries.sort_by(|a, b| a.model_name.cmp(&b.model_name));

    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    html.push_str("<title>Judicial fairness audit</title>\n");
    let _ = writeln!(html, "<style>{STYLE}</style>\n</head>\n<body>");
    html.push_str("<h1>Judicial fairness audit</h1>\n");

    html.push_str("<table>\n<thead><tr><th>Model</th><th>Inconsistency</th><th>Bias</th>\
                   <th>Bias Bernoulli p</th><th>Imbalance</th><th>Imbalance Bernoulli p</th>\
                   <th>Labels tested</th></tr></thead>\n<tbody>\n");
    for s in &summaries {
        let _ = writeln!(
            html,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            escape(&s.model_name),
            display(s.inconsistency),
            s.bias_count,
            display(Some(s.bias_bernoulli.p_value)),
            s.imbalance_count,
            display(Some(s.imbalance_bernoulli.p_value)),
            s.n_labels_tested
        );
    }
    let p = &bundle.pooled;
    let _ = writeln!(
        html,
        "<tr><td>pooled</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
        display(p.mean_inconsistency),
        p.bias.n_significant,
        display(Some(p.bias.p_value)),
        p.imbalance.n_significant,
        display(Some(p.imbalance.p_value)),
        p.bias.n_trials
    );
    html.push_str("</tbody>\n</table>\n");

    let bars: Vec<(String, f64, String)> = summaries
        .iter()
        .map(|s| {
            (
                s.model_name.clone(),
                s.inconsistency.unwrap_or(0.0),
                display(s.inconsistency),
            )
        })
        .collect();
    let top = bars.iter().map(|b| b.1).fold(0.0, f64::max);
    html.push_str(&chart_section(
        "inconsistency",
        "Inconsistency",
        bar_chart("Inconsistency", &bars, if top > 0.0 { top } else { 1.0 }),
    ));
    html.push_str(&count_section("bias", "Biased labels", &summaries, |s| {
        (s.bias_count, s.bias_bernoulli.n_trials)
    }));
    html.push_str(&count_section(
        "imbalance",
        "Imbalanced-inaccuracy labels",
        &summaries,
        |s| (s.imbalance_count, s.imbalance_bernoulli.n_trials),
    ));

    let data = String::from_utf8(summary_json(bundle)).expect("json is utf-8");
    let _ = writeln!(
        html,
        "<script type=\"application/json\" id=\"chart-data\">\n{}</script>",
        script_safe(&data)
    );

    let meta = &bundle.run_metadata;
    let _ = write!(
        html,
        "<footer>tool {} · config {} · corpus {}",
        escape(&meta.tool_version),
        escape(&meta.config_hash),
        escape(&meta.corpus_hash)
    );
    if let Some(at) = &meta.generated_at {
        let _ = write!(html, " · generated {}", escape(at));
    }
    html.push_str("</footer>\n</body>\n</html>\n");
    html
}

pub fn emit_html(bundle: &ReportBundle, out_dir: &Path) -> Result<PathBuf, ReportError> {
    bundle.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let path = out_dir.join(REPORT_HTML);
    fs::write(&path, render_html(bundle)).map_err(|source| ReportError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
