//! JSON and CSV renderings of estimator results, using the panel's own group
//! and period labels. JSON is complete; CSV keeps only the weight or
//! component tables.

use std::io::Write;

use serde_json::{json, Value};

use crate::bootstrap::BootstrapResult;
use crate::decomposition::{CellWeight, DecompositionSummary, SignSummary, WeightDecomposition};
use crate::didm::{DidmResult, DropReason};
use crate::error::Result;
use crate::panel::PanelDataset;
use crate::staggered::{DynamicComponent, DynamicEffectResult, HorizonEstimate, LinearTrendEstimate};

fn cell_weights(panel: &PanelDataset, cells: &[CellWeight]) -> Value {
    cells
        .iter()
        .map(|c| json!({"g": panel.group_label(c.g), "t": panel.period_label(c.t), "weight": c.weight}))
        .collect()
}

fn sign_summary(s: &SignSummary) -> Value {
    json!({
        "cells": s.cells,
        "positive_count": s.positive_count,
        "positive_sum": s.positive_sum,
        "negative_count": s.negative_count,
        "negative_sum": s.negative_sum,
        "zero_count": s.zero_count,
    })
}

pub fn decomposition_json(panel: &PanelDataset, decomp: &WeightDecomposition, summary: &DecompositionSummary) -> Value {
    let names = panel.treatment_names();
    json!({
        "target": names[decomp.target],
        "beta_fe": decomp.beta_fe,
        "own": cell_weights(panel, &decomp.own),
        "contamination": cell_weights(panel, &decomp.contamination),
        "per_other_treatment_sums": decomp.per_other_treatment_sums.iter()
            .map(|s| json!({"treatment": names[s.treatment], "sum": s.sum}))
            .collect::<Value>(),
        "summary": {
            "own": sign_summary(&summary.own),
            "contamination": sign_summary(&summary.contamination),
            "per_other_treatment": summary.per_other_treatment.iter()
                .map(|o| json!({"treatment": o.name, "weights": sign_summary(&o.weights), "sum": o.sum}))
                .collect::<Value>(),
            "others_mutually_exclusive": summary.others_mutually_exclusive,
            "attribution": if summary.others_mutually_exclusive {
                "each contamination cell has one other treatment"
            } else {
                "attributed weights assume additive effects of the other treatments and double count overlapping cells"
            },
        },
    })
}

/// Columns `g,t,role,weight`; a cell in both supports appears twice.
pub fn decomposition_csv<W: Write>(panel: &PanelDataset, decomp: &WeightDecomposition, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["g", "t", "role", "weight"])?;
    for (role, cells) in [("own", &decomp.own), ("contamination", &decomp.contamination)] {
        for c in cells {
            out.write_record([
                panel.group_label(c.g).to_string(),
                panel.period_label(c.t).to_string(),
                role.to_string(),
                c.weight.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn drop_reason(reason: DropReason) -> &'static str {
    match reason {
        DropReason::OtherTreatmentChanged => "other_treatment_changed",
        DropReason::NoMatchingStayer => "no_matching_stayer",
    }
}

pub fn didm_json(panel: &PanelDataset, res: &DidmResult) -> Value {
    json!({
        "target": panel.treatment_names()[res.target],
        "estimate": res.estimate,
        "n_switchers": res.n_s,
        "components": res.components.iter().map(|c| json!({
            "t": panel.period_label(c.t),
            "baseline": c.baseline,
            "direction": c.direction,
            "from": c.from,
            "to": c.to,
            "n_switcher_cells": c.n_switcher_cells,
            "n_switchers": c.n_switchers,
            "n_stayers": c.n_stayers,
            "did": c.did,
            "weight": c.weight,
        })).collect::<Value>(),
        "dropped": res.dropped.iter().map(|d| json!({
            "g": panel.group_label(d.g),
            "t": panel.period_label(d.t),
            "reason": drop_reason(d.reason),
        })).collect::<Value>(),
        "n_dropped": res.n_dropped(),
        "standard_error": res.standard_error,
    })
}

pub fn didm_csv<W: Write>(panel: &PanelDataset, res: &DidmResult, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["t", "baseline", "direction", "from", "to", "n_switchers", "n_stayers", "did", "weight"])?;
    for c in &res.components {
        let baseline: Vec<String> = c.baseline.iter().map(f64::to_string).collect();
        out.write_record([
            panel.period_label(c.t).to_string(),
            baseline.join(";"),
            match c.direction {
                crate::didm::Direction::Up => "up".to_string(),
                crate::didm::Direction::Down => "down".to_string(),
            },
            c.from.to_string(),
            c.to.to_string(),
            c.n_switchers.to_string(),
            c.n_stayers.to_string(),
            c.did.to_string(),
            c.weight.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn component_json(panel: &PanelDataset, c: &DynamicComponent) -> Value {
    json!({
        "f": panel.period_label(c.f),
        "t": panel.period_label(c.t),
        "did": c.did,
        "n_treated": c.n_treated,
        "n_control": c.n_control,
    })
}

fn horizon_json(panel: &PanelDataset, h: &HorizonEstimate, se: Option<f64>) -> Value {
    let mut v = json!({
        "ell": h.ell,
        "estimate": h.estimate,
        "n_ell": h.n_ell,
        "components": h.components.iter().map(|c| component_json(panel, c)).collect::<Value>(),
    });
    if let Some(se) = se {
        v["standard_error"] = json!(se);
    }
    v
}

pub fn dynamic_json(panel: &PanelDataset, res: &DynamicEffectResult) -> Value {
    let se = |i: usize| res.standard_errors.as_ref().and_then(|s| s.get(i).copied());
    json!({
        "horizons": res.estimates.iter().enumerate().map(|(i, h)| horizon_json(panel, h, se(i))).collect::<Value>(),
        "placebos": res.placebos.iter().map(|h| horizon_json(panel, h, None)).collect::<Value>(),
    })
}

/// Columns `kind,ell,f,t,did,n_treated,n_control,weight`, where `kind` is
/// `effect` or `placebo`.
pub fn dynamic_csv<W: Write>(panel: &PanelDataset, res: &DynamicEffectResult, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["kind", "ell", "f", "t", "did", "n_treated", "n_control", "weight"])?;
    for (kind, horizons) in [("effect", &res.estimates), ("placebo", &res.placebos)] {
        for h in horizons {
            for c in &h.components {
                out.write_record([
                    kind.to_string(),
                    h.ell.to_string(),
                    panel.period_label(c.f).to_string(),
                    panel.period_label(c.t).to_string(),
                    c.did.to_string(),
                    c.n_treated.to_string(),
                    c.n_control.to_string(),
                    (c.n_treated / h.n_ell).to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn linear_trends_json(panel: &PanelDataset, estimates: &[LinearTrendEstimate]) -> Value {
    json!({
        "horizons": estimates.iter().map(|e| json!({
            "ell": e.ell,
            "estimate": e.estimate,
            "contributions": e.contributions.iter().map(|c| json!({
                "g": panel.group_label(c.g),
                "t": panel.period_label(c.t),
                "observed": c.observed,
                "counterfactual": c.counterfactual,
                "n": c.n,
            })).collect::<Value>(),
            "dropped": e.dropped.iter().map(|(g, reason)| json!({
                "g": panel.group_label(*g),
                "reason": reason,
            })).collect::<Value>(),
        })).collect::<Value>(),
    })
}

pub fn bootstrap_json(res: &BootstrapResult, dump: bool) -> Value {
    let mut v = json!({
        "estimate": res.estimate,
        "standard_error": res.se,
        "replications": res.replications,
        "valid_replications": res.n_valid,
        "degenerate_replications": res.n_degenerate,
        "method": "group-level bootstrap; a pragmatic stand-in, no asymptotic theory is implied",
    });
    if dump {
        v["estimates"] = json!(res.estimates);
    }
    v
}
