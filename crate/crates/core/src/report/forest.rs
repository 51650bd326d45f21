use super::svg::{pct_label, Svg};
use super::single_group;
use crate::error::Result;
use crate::experiments::SweepRecord;
use crate::types::Metric;

const ROW_H: f64 = 14.0;
const PANEL_W: f64 = 360.0;
const LABEL_W: f64 = 90.0;
const TOP: f64 = 56.0;
const GAP: f64 = 60.0;

/// Floor of the shared x-axis, rounded down to a 5% tick.
fn axis_floor(records: &[SweepRecord], metric: Metric) -> f64 {
    let mut lo = metric.of(&records[0].model).value();
    for r in records {
        if let Some(b) = r.bounds(metric) {
            lo = lo.min(b.worst().value());
        }
        if let Some(s) = r.mc.as_ref().and_then(|m| m.get(metric)) {
            lo = lo.min(s.min);
        }
    }
    ((lo * 20.0).floor() / 20.0).clamp(0.0, 0.95)
}

/// Forest plot of worst-to-best intervals per reference configuration, one
/// panel per metric, with Monte Carlo [min, max] bars when present and a
/// dashed rule at the model's true value. Rows attaining the panel's largest
/// error range are drawn bold and tagged `max-range`.
pub fn emit_forest(records: &[SweepRecord]) -> Result<String> {
    let first = single_group(records)?;
    let n = records.len() as f64;
    let width = LABEL_W + 2.0 * PANEL_W + GAP + 30.0;
    let height = TOP + n * ROW_H + 60.0;
    let title = format!(
        "Estimated performance of a {} model at {}% prevalence (n = {})",
        first.model,
        pct_label(first.prevalence.value()),
        first.n_total
    );
    let mut svg = Svg::new(width, height, &title);
    svg.text(width / 2.0, 22.0, 14.0, "middle", "", &title);

    for (i, r) in records.iter().enumerate() {
        let y = TOP + i as f64 * ROW_H + ROW_H / 2.0;
        let label = format!(
            "Se {} / Sp {}",
            pct_label(r.reference.sensitivity.value()),
            pct_label(r.reference.specificity.value())
        );
        svg.text(LABEL_W - 6.0, y + 3.5, 9.0, "end", "", &label);
    }

    for (pi, metric) in Metric::BOTH.into_iter().enumerate() {
        let x0 = LABEL_W + pi as f64 * (PANEL_W + GAP);
        let lo = axis_floor(records, metric);
        let sx = |v: f64| x0 + (v - lo) / (1.0 - lo) * PANEL_W;
        let max_range = records
            .iter()
            .filter_map(|r| r.bounds(metric).map(|b| b.range().value()))
            .fold(f64::NEG_INFINITY, f64::max);

        svg.text(x0 + PANEL_W / 2.0, TOP - 16.0, 12.0, "middle", "", &format!("Estimated {}", metric.name()));
        let bottom = TOP + n * ROW_H;
        svg.line(x0, bottom, x0 + PANEL_W, bottom, r##" stroke="#000000""##);
        let mut tick = lo;
        while tick <= 1.0 + 1e-9 {
            let x = sx(tick);
            svg.line(x, bottom, x, bottom + 4.0, r##" stroke="#000000""##);
            svg.text(x, bottom + 16.0, 9.0, "middle", "", &pct_label(tick));
            tick += 0.05;
        }
        svg.text(x0 + PANEL_W / 2.0, bottom + 34.0, 11.0, "middle", "", "Observed value (%)");

        for (i, r) in records.iter().enumerate() {
            let y = TOP + i as f64 * ROW_H + ROW_H / 2.0;
            let data = format!(
                r#" data-metric="{}" data-ref-se="{:.2}" data-ref-sp="{:.2}""#,
                metric.name(),
                r.reference.sensitivity.value(),
                r.reference.specificity.value()
            );
            if let Some(s) = r.mc.as_ref().and_then(|m| m.get(metric)) {
                let color = if pi == 0 { "#d62728" } else { "#2ca02c" };
                svg.rect(
                    sx(s.min),
                    y - 3.0,
                    (sx(s.max) - sx(s.min)).max(0.0),
                    6.0,
                    &format!(r#" class="mc" fill="{color}" fill-opacity="0.55"{data}"#),
                );
            }
            if let Some(b) = r.bounds(metric) {
                let emphasized = (b.range().value() - max_range).abs() <= 1e-12;
                let (class, stroke_w) = if emphasized {
                    ("range max-range", 3.0)
                } else {
                    ("range", 1.2)
                };
                svg.line(
                    sx(b.worst().value()),
                    y,
                    sx(b.best().value()),
                    y,
                    &format!(
                        r##" class="{class}" stroke="#555555" stroke-width="{stroke_w}" stroke-linecap="round"{data}"##
                    ),
                );
            }
        }

        let truth = metric.of(&first.model).value();
        let tx = sx(truth);
        svg.line(
            tx,
            TOP - 4.0,
            tx,
            bottom,
            &format!(
                r##" class="truth" stroke="#1f77b4" stroke-width="1.2" stroke-dasharray="5,3" data-metric="{}" data-value="{truth:.6}""##,
                metric.name()
            ),
        );
    }
    Ok(svg.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_sweep, SweepSpec};

    fn attr(tag: &str, name: &str) -> f64 {
        let key = format!(r#"{name}=""#);
        let at = tag.find(&key).unwrap() + key.len();
        tag[at..at + tag[at..].find('"').unwrap()].parse().unwrap()
    }

    fn tags<'a>(svg: &'a str, needle: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        svg.lines().filter(move |l| l.contains(needle))
    }

    #[test]
    fn emphasized_row_at_low_prevalence() {
        let recs: Vec<SweepRecord> = run_sweep(&SweepSpec::fixed_model_study())
            .unwrap()
            .into_iter()
            .filter(|r| r.prevalence.value() == 0.1)
            .collect();
        let svg = emit_forest(&recs).unwrap();
        let bold: Vec<&str> = tags(&svg, r#"class="range max-range""#)
            .filter(|l| l.contains(r#"data-metric="sensitivity""#))
            .collect();
        assert_eq!(bold.len(), 1);
        assert!(bold[0].contains(r#"data-ref-se="0.90" data-ref-sp="0.95""#));

        let perfect = tags(&svg, r#"data-metric="sensitivity" data-ref-se="1.00" data-ref-sp="1.00""#)
            .find(|l| l.contains("class=\"range"))
            .unwrap();
        assert_eq!(attr(perfect, "x1"), attr(perfect, "x2"));
        let truth = tags(&svg, r#"class="truth""#).next().unwrap();
        assert_eq!(attr(truth, "x1"), attr(perfect, "x1"));
    }

    #[test]
    fn perfect_model_segments_end_at_one() {
        let recs: Vec<SweepRecord> = run_sweep(&SweepSpec::prevalence_study())
            .unwrap()
            .into_iter()
            .filter(|r| r.prevalence.value() == 0.3)
            .collect();
        let svg = emit_forest(&recs).unwrap();
        for truth in tags(&svg, r#"class="truth""#) {
            assert_eq!(attr(truth, "data-value"), 1.0);
        }
        for metric in ["sensitivity", "specificity"] {
            let sel = format!(r#"data-metric="{metric}""#);
            let rule = tags(&svg, r#"class="truth""#)
                .find(|t| t.contains(&sel))
                .map(|t| attr(t, "x1"))
                .unwrap();
            for seg in tags(&svg, r#"class="range"#).filter(|l| l.contains(&sel)) {
                assert!(attr(seg, "x2") <= rule + 1e-9);
            }
        }
    }

    #[test]
    fn monte_carlo_bars_drawn() {
        let mut spec = SweepSpec::model_quality_study();
        spec.model_points.truncate(1);
        spec.include_mc = true;
        spec.n_trials = 50;
        let recs = run_sweep(&spec).unwrap();
        let svg = emit_forest(&recs).unwrap();
        assert_eq!(tags(&svg, r#"class="mc""#).count(), 2 * 121);
    }
}
