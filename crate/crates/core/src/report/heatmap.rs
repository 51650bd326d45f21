use std::collections::BTreeMap;

use super::svg::{pct, pct_label, Svg};
use super::single_group;
use crate::error::{Error, Result};
use crate::experiments::SweepRecord;
use crate::types::{Fraction, Metric};

/// Bottom of the color scale; lower values are clamped and flagged.
pub const SCALE_LO: f64 = 0.5;
pub const SCALE_HI: f64 = 1.0;

const LOW_RGB: (f64, f64, f64) = (215.0, 48.0, 39.0);
const MID_RGB: (f64, f64, f64) = (254.0, 224.0, 139.0);
const HIGH_RGB: (f64, f64, f64) = (26.0, 152.0, 80.0);

/// Linear red-yellow-green ramp over `[SCALE_LO, SCALE_HI]`.
pub fn color(value: f64) -> String {
    let t = ((value - SCALE_LO) / (SCALE_HI - SCALE_LO)).clamp(0.0, 1.0);
    let (a, b, u) = if t < 0.5 {
        (LOW_RGB, MID_RGB, t * 2.0)
    } else {
        (MID_RGB, HIGH_RGB, (t - 0.5) * 2.0)
    };
    let mix = |x: f64, y: f64| (x + (y - x) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn sorted_unique(mut v: Vec<Fraction>) -> Vec<Fraction> {
    v.sort_by(|a, b| a.value().total_cmp(&b.value()));
    v.dedup();
    v
}

/// Heatmap of the point estimate of `metric` over the reference grid.
///
/// Rows are reference sensitivity (highest at the top), columns reference
/// specificity. `records` must share one prevalence and model and cover
/// every (sensitivity, specificity) pair of the axes they span.
pub fn emit_heatmap(records: &[SweepRecord], metric: Metric) -> Result<String> {
    let first = single_group(records)?;
    let se_axis = sorted_unique(records.iter().map(|r| r.reference.sensitivity).collect());
    let sp_axis = sorted_unique(records.iter().map(|r| r.reference.specificity).collect());
    let cells: BTreeMap<(u64, u64), &SweepRecord> = records
        .iter()
        .map(|r| {
            (
                (
                    r.reference.sensitivity.value().to_bits(),
                    r.reference.specificity.value().to_bits(),
                ),
                r,
            )
        })
        .collect();
    let missing: Vec<String> = se_axis
        .iter()
        .flat_map(|se| sp_axis.iter().map(move |sp| (*se, *sp)))
        .filter(|(se, sp)| !cells.contains_key(&(se.value().to_bits(), sp.value().to_bits())))
        .map(|(se, sp)| format!("({}, {})", pct_label(se.value()), pct_label(sp.value())))
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteGrid(missing.join(", ")));
    }

    let cell = 44.0;
    let left = 80.0;
    let top = 60.0;
    let legend_w = 70.0;
    let cols = sp_axis.len() as f64;
    let rows = se_axis.len() as f64;
    let width = left + cols * cell + legend_w + 20.0;
    let height = top + rows * cell + 80.0;
    let title = format!(
        "Observed {} of a {} model at {}% prevalence (n = {})",
        metric.name(),
        first.model,
        pct_label(first.prevalence.value()),
        first.n_total
    );
    let mut svg = Svg::new(width, height, &title);
    svg.text(width / 2.0, 24.0, 14.0, "middle", "", &title);

    let mut clamped = false;
    for (ri, se) in se_axis.iter().rev().enumerate() {
        let y = top + ri as f64 * cell;
        svg.text(left - 8.0, y + cell / 2.0 + 4.0, 11.0, "end", "", &pct_label(se.value()));
        for (ci, sp) in sp_axis.iter().enumerate() {
            let x = left + ci as f64 * cell;
            let r = cells[&(se.value().to_bits(), sp.value().to_bits())];
            let attrs = format!(
                r#" data-ref-se="{:.2}" data-ref-sp="{:.2}""#,
                se.value(),
                sp.value()
            );
            match r.point.get(metric) {
                Some(v) => {
                    let v = v.value();
                    let fill = color(v);
                    svg.rect(x, y, cell, cell, &format!(r##" fill="{fill}" stroke="#ffffff"{attrs}"##));
                    let mut label = pct(v);
                    if v < SCALE_LO {
                        clamped = true;
                        label.push('*');
                    }
                    svg.text(x + cell / 2.0, y + cell / 2.0 + 4.0, 10.0, "middle", "", &label);
                }
                None => {
                    svg.rect(x, y, cell, cell, &format!(r##" fill="#bdbdbd" stroke="#ffffff"{attrs}"##));
                    svg.text(x + cell / 2.0, y + cell / 2.0 + 4.0, 10.0, "middle", "", "NA");
                }
            }
        }
    }
    for (ci, sp) in sp_axis.iter().enumerate() {
        let x = left + ci as f64 * cell + cell / 2.0;
        svg.text(x, top + rows * cell + 16.0, 11.0, "middle", "", &pct_label(sp.value()));
    }
    svg.text(
        left + cols * cell / 2.0,
        top + rows * cell + 36.0,
        12.0,
        "middle",
        "",
        "Reference specificity (%)",
    );
    let cy = top + rows * cell / 2.0;
    svg.raw(&format!(
        r#"<text x="20" y="{cy:.2}" font-size="12.0" text-anchor="middle" transform="rotate(-90 20 {cy:.2})">Reference sensitivity (%)</text>"#
    ));

    // legend
    let lx = left + cols * cell + 24.0;
    let steps = 20;
    let lh = rows * cell / steps as f64;
    for i in 0..steps {
        let v = SCALE_HI - (i as f64 + 0.5) / steps as f64 * (SCALE_HI - SCALE_LO);
        svg.rect(lx, top + i as f64 * lh, 16.0, lh + 0.5, &format!(r#" fill="{}""#, color(v)));
    }
    svg.text(lx + 20.0, top + 8.0, 10.0, "start", "", &format!("{:.0}%", SCALE_HI * 100.0));
    svg.text(lx + 20.0, top + rows * cell, 10.0, "start", "", &format!("{:.0}%", SCALE_LO * 100.0));
    if clamped {
        svg.text(
            left,
            top + rows * cell + 60.0,
            10.0,
            "start",
            "",
            "* below 50%, shown at the bottom color",
        );
    }
    Ok(svg.finish())
}
