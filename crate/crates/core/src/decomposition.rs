//! Two-way fixed-effects coefficient on one of several treatments, and its
//! exact decomposition into weights on own-treatment effects and
//! contamination weights on the effects of the other treatments.
//!
//! The first stage regresses the target treatment on group effects, period
//! effects and the other treatments, weighting cells by their size. Group
//! effects are partialled out exactly by weighted within-group demeaning;
//! the remaining design (period dummies and other treatments) goes through a
//! column-pivoted Householder QR. The TWFE coefficient then follows from the
//! Frisch-Waugh identity `β = Σ n ε Y / Σ n ε D`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::PivotedQr;
use crate::panel::{is_binary_value, same_value, PanelDataset};

/// Relative rank threshold for the pivoted QR.
pub const RANK_TOL: f64 = 1e-10;

/// Relative threshold under which `Σ n ε D` counts as zero.
pub const DENOMINATOR_TOL: f64 = 1e-12;

/// Weights with absolute value at or below this are counted as zero in
/// summaries.
pub const ZERO_WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FirstStageResult {
    pub target: usize,
    /// Residuals `ε_{g,t}` in storage order (group-major).
    pub residuals: Vec<f64>,
    /// Coefficients on the other treatments, in treatment order with the
    /// target skipped.
    pub coef_other: Vec<f64>,
    /// Numerical rank of the partialled design (period dummies and other
    /// treatments).
    pub rank: usize,
    pub columns: usize,
}

impl FirstStageResult {
    pub fn rank_ok(&self) -> bool {
        self.rank == self.columns
    }

    pub fn residual(&self, panel: &PanelDataset, g: usize, t: usize) -> f64 {
        self.residuals[panel.cell_index(g, t)]
    }
}

/// Weighted within-group demeaning of a storage-order column, scaled by √n.
fn demean_scaled(panel: &PanelDataset, column: &[f64], sqrt_n: &[f64], out: &mut [f64]) {
    let t_len = panel.n_periods();
    let sizes = panel.sizes();
    for g in 0..panel.n_groups() {
        let range = g * t_len..(g + 1) * t_len;
        let (mut num, mut den) = (0.0, 0.0);
        for i in range.clone() {
            num += sizes[i] * column[i];
            den += sizes[i];
        }
        let mean = num / den;
        for i in range {
            out[i] = sqrt_n[i] * (column[i] - mean);
        }
    }
}

/// Residualize treatment `target` on two-way fixed effects and the other
/// treatments.
pub fn first_stage(panel: &PanelDataset, target: usize) -> Result<FirstStageResult> {
    panel.check_treatment(target)?;
    let rows = panel.n_cells();
    let t_len = panel.n_periods();
    let k = panel.n_treatments();
    let others: Vec<usize> = (0..k).filter(|&j| j != target).collect();
    let columns = (t_len - 1) + others.len();

    let sqrt_n: Vec<f64> = panel.sizes().iter().map(|n| n.sqrt()).collect();
    let mut design = vec![0.0; rows * columns];
    let mut raw = vec![0.0; rows];
    for p in 1..t_len {
        for (i, v) in raw.iter_mut().enumerate() {
            *v = if i % t_len == p { 1.0 } else { 0.0 };
        }
        let c = p - 1;
        demean_scaled(panel, &raw, &sqrt_n, &mut design[c * rows..(c + 1) * rows]);
    }
    for (c, &j) in others.iter().enumerate() {
        let column = panel.treatment_column(j);
        let c = t_len - 1 + c;
        demean_scaled(panel, &column, &sqrt_n, &mut design[c * rows..(c + 1) * rows]);
    }
    let target_col = panel.treatment_column(target);
    let mut response = vec![0.0; rows];
    demean_scaled(panel, &target_col, &sqrt_n, &mut response);

    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let max_norm = design
        .chunks(rows)
        .map(norm)
        .fold(norm(&response), f64::max);

    let qr = PivotedQr::factor(rows, columns, design, RANK_TOL);
    if qr.rank() < columns {
        return Err(Error::CollinearTreatments {
            rank: qr.rank(),
            columns,
        });
    }
    let resid_scaled = qr.residual(&response);
    if norm(&resid_scaled) <= RANK_TOL * max_norm {
        return Err(Error::CollinearTreatments {
            rank: qr.rank(),
            columns: columns + 1,
        });
    }
    let coef = qr.solve(&response);
    let residuals = resid_scaled
        .iter()
        .zip(&sqrt_n)
        .map(|(r, s)| r / s)
        .collect();
    Ok(FirstStageResult {
        target,
        residuals,
        coef_other: coef[t_len - 1..].to_vec(),
        rank: qr.rank(),
        columns,
    })
}

/// `β̂ = Σ n ε Y / Σ n ε D^target` for an already computed first stage.
pub fn coefficient_from_first_stage(panel: &PanelDataset, fs: &FirstStageResult) -> Result<f64> {
    let target = panel.treatment_column(fs.target);
    let sizes = panel.sizes();
    let (mut num, mut den, mut scale) = (0.0, 0.0, 0.0);
    for i in 0..panel.n_cells() {
        let w = sizes[i] * fs.residuals[i];
        num += w * panel.outcomes()[i];
        den += w * target[i];
        scale += sizes[i] * target[i] * target[i];
    }
    if den.abs() < DENOMINATOR_TOL * scale || den == 0.0 {
        return Err(Error::DegenerateDenominator { value: den });
    }
    Ok(num / den)
}

/// TWFE coefficient on treatment `target` (binary or not).
pub fn twfe_coefficient(panel: &PanelDataset, target: usize) -> Result<f64> {
    let fs = first_stage(panel, target)?;
    coefficient_from_first_stage(panel, &fs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellWeight {
    pub g: usize,
    pub t: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OtherTreatmentSum {
    pub treatment: usize,
    pub sum: f64,
}

#[derive(Debug, Clone)]
pub struct WeightDecomposition {
    pub target: usize,
    pub beta_fe: f64,
    /// `W_{g,t} = (N_{g,t}/N_k) w_{g,t}` over cells with `D^k = 1`.
    pub own: Vec<CellWeight>,
    /// `W_{g,t}` over cells where some other treatment is nonzero.
    pub contamination: Vec<CellWeight>,
    /// `w_{g,t}` for every cell, storage order.
    pub raw_w: Vec<f64>,
    /// `Σ_{D^j = 1} W_{g,t}` for every other treatment `j`.
    pub per_other_treatment_sums: Vec<OtherTreatmentSum>,
    pub first_stage: FirstStageResult,
}

impl WeightDecomposition {
    pub fn own_sum(&self) -> f64 {
        self.own.iter().map(|c| c.weight).sum()
    }

    pub fn contamination_sum(&self) -> f64 {
        self.contamination.iter().map(|c| c.weight).sum()
    }

    /// Normalized weight `W` of any cell.
    pub fn weight(&self, panel: &PanelDataset, g: usize, t: usize) -> f64 {
        let i = panel.cell_index(g, t);
        let n_k: f64 = self.own.iter().map(|c| panel.n(c.g, c.t)).sum();
        panel.sizes()[i] * self.raw_w[i] / n_k
    }
}

fn require_binary(panel: &PanelDataset) -> Result<()> {
    for g in 0..panel.n_groups() {
        for t in 0..panel.n_periods() {
            if let Some(j) = panel.treatments(g, t).iter().position(|v| !is_binary_value(*v)) {
                return Err(Error::NonBinaryTreatment {
                    treatment: panel.treatment_names()[j].clone(),
                    group: panel.group_label(g).to_string(),
                    period: panel.period_label(t),
                    value: panel.d(g, t, j),
                });
            }
        }
    }
    Ok(())
}

/// Decompose the TWFE coefficient on binary treatment `target`.
pub fn decompose(panel: &PanelDataset, target: usize) -> Result<WeightDecomposition> {
    panel.check_treatment(target)?;
    require_binary(panel)?;
    let fs = first_stage(panel, target)?;
    let beta_fe = coefficient_from_first_stage(panel, &fs)?;

    let sizes = panel.sizes();
    let k = panel.n_treatments();
    let (mut treated_n, mut treated_sum) = (0.0, 0.0);
    for g in 0..panel.n_groups() {
        for t in 0..panel.n_periods() {
            if same_value(panel.d(g, t, target), 1.0) {
                let i = panel.cell_index(g, t);
                treated_n += sizes[i];
                treated_sum += sizes[i] * fs.residuals[i];
            }
        }
    }
    let mean_eps = treated_sum / treated_n;
    let raw_w: Vec<f64> = fs.residuals.iter().map(|e| e / mean_eps).collect();

    let mut own = Vec::new();
    let mut contamination = Vec::new();
    let mut other_sums: Vec<OtherTreatmentSum> = (0..k)
        .filter(|&j| j != target)
        .map(|j| OtherTreatmentSum {
            treatment: j,
            sum: 0.0,
        })
        .collect();
    for g in 0..panel.n_groups() {
        for t in 0..panel.n_periods() {
            let i = panel.cell_index(g, t);
            let weight = sizes[i] * raw_w[i] / treated_n;
            let d = panel.treatments(g, t);
            if same_value(d[target], 1.0) {
                own.push(CellWeight { g, t, weight });
            }
            let mut any_other = false;
            for entry in other_sums.iter_mut() {
                if same_value(d[entry.treatment], 1.0) {
                    entry.sum += weight;
                    any_other = true;
                }
            }
            if any_other {
                contamination.push(CellWeight { g, t, weight });
            }
        }
    }
    Ok(WeightDecomposition {
        target,
        beta_fe,
        own,
        contamination,
        raw_w,
        per_other_treatment_sums: other_sums,
        first_stage: fs,
    })
}

/// Counts and sums of positive and negative weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SignSummary {
    pub cells: usize,
    pub positive_count: usize,
    pub positive_sum: f64,
    pub negative_count: usize,
    pub negative_sum: f64,
    /// Cells with `|W| <= ZERO_WEIGHT_TOL`; their weights are left out of
    /// both sums.
    pub zero_count: usize,
}

impl SignSummary {
    fn add(&mut self, w: f64) {
        self.cells += 1;
        if w.abs() <= ZERO_WEIGHT_TOL {
            self.zero_count += 1;
        } else if w > 0.0 {
            self.positive_count += 1;
            self.positive_sum += w;
        } else {
            self.negative_count += 1;
            self.negative_sum += w;
        }
    }

    pub fn total(&self) -> f64 {
        self.positive_sum + self.negative_sum
    }

    fn of(weights: impl IntoIterator<Item = f64>) -> Self {
        let mut s = Self::default();
        for w in weights {
            s.add(w);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OtherTreatmentSummary {
    pub treatment: usize,
    pub name: String,
    /// Cells with `D^j = 1`. Under additive effects of the other treatments
    /// these weights multiply the effects of treatment `j`.
    pub weights: SignSummary,
    /// Exact `Σ_{D^j=1} W`, zero by construction.
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionSummary {
    pub target: usize,
    pub own: SignSummary,
    pub contamination: SignSummary,
    pub per_other_treatment: Vec<OtherTreatmentSummary>,
    /// No cell has two of the other treatments switched on at once. When
    /// false, a contamination cell is attributed to several treatments and
    /// the attributed sums double count.
    pub others_mutually_exclusive: bool,
}

pub fn summarize(decomp: &WeightDecomposition, panel: &PanelDataset) -> DecompositionSummary {
    let own = SignSummary::of(decomp.own.iter().map(|c| c.weight));
    let contamination = SignSummary::of(decomp.contamination.iter().map(|c| c.weight));
    let per_other_treatment = decomp
        .per_other_treatment_sums
        .iter()
        .map(|entry| OtherTreatmentSummary {
            treatment: entry.treatment,
            name: panel.treatment_names()[entry.treatment].clone(),
            weights: SignSummary::of(
                decomp
                    .contamination
                    .iter()
                    .filter(|c| same_value(panel.d(c.g, c.t, entry.treatment), 1.0))
                    .map(|c| c.weight),
            ),
            sum: entry.sum,
        })
        .collect();
    let others_mutually_exclusive = decomp.contamination.iter().all(|c| {
        decomp
            .per_other_treatment_sums
            .iter()
            .filter(|e| !same_value(panel.d(c.g, c.t, e.treatment), 0.0))
            .count()
            <= 1
    });
    DecompositionSummary {
        target: decomp.target,
        own,
        contamination,
        per_other_treatment,
        others_mutually_exclusive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{load_panel, LoadOptions, PanelRow};

    /// Four groups, two periods; groups 2 and 4 get the first treatment and
    /// groups 3 and 4 the second at period 2.
    fn four_group_example(dy: [f64; 4]) -> PanelDataset {
        let d1 = [0.0, 1.0, 0.0, 1.0];
        let d2 = [0.0, 0.0, 1.0, 1.0];
        let mut rows = Vec::new();
        for g in 0..4 {
            rows.push(PanelRow::new((g + 1).to_string(), 1, 0.0, vec![0.0, 0.0]));
            rows.push(PanelRow::new((g + 1).to_string(), 2, dy[g], vec![d1[g], d2[g]]));
        }
        load_panel(&rows, LoadOptions::default()).unwrap()
    }

    #[test]
    fn four_group_residuals() {
        let panel = four_group_example([0.0, 1.0, 0.0, 2.0]);
        let fs = first_stage(&panel, 0).unwrap();
        let expected_t2 = [-0.25, 0.25, -0.25, 0.25];
        for (g, e) in expected_t2.iter().enumerate() {
            assert!((fs.residual(&panel, g, 1) - e).abs() < 1e-12);
            assert!((fs.residual(&panel, g, 0) + e).abs() < 1e-12);
        }
    }

    #[test]
    fn four_group_coefficient_and_weights() {
        let panel = four_group_example([0.0, 1.0, 0.0, 2.0]);
        assert!((twfe_coefficient(&panel, 0).unwrap() - 1.5).abs() < 1e-12);
        let dec = decompose(&panel, 0).unwrap();
        let own: Vec<_> = dec.own.iter().map(|c| (c.g, c.t, c.weight)).collect();
        assert_eq!(own.len(), 2);
        assert_eq!((own[0].0, own[0].1), (1, 1));
        assert_eq!((own[1].0, own[1].1), (3, 1));
        assert!((own[0].2 - 0.5).abs() < 1e-12 && (own[1].2 - 0.5).abs() < 1e-12);
        let cont: Vec<_> = dec.contamination.iter().map(|c| (c.g, c.t, c.weight)).collect();
        assert_eq!(cont.len(), 2);
        assert_eq!((cont[0].0, cont[0].1), (2, 1));
        assert!((cont[0].2 + 0.5).abs() < 1e-12);
        assert_eq!((cont[1].0, cont[1].1), (3, 1));
        assert!((cont[1].2 - 0.5).abs() < 1e-12);

        let summary = summarize(&dec, &panel);
        assert_eq!(summary.own.positive_count, 2);
        assert_eq!(summary.own.negative_count, 0);
        assert!((summary.own.positive_sum - 1.0).abs() < 1e-12);
        let other = &summary.per_other_treatment[0];
        assert_eq!(other.weights.positive_count, 1);
        assert_eq!(other.weights.negative_count, 1);
        assert!((other.weights.positive_sum - 0.5).abs() < 1e-12);
        assert!((other.weights.negative_sum + 0.5).abs() < 1e-12);
        assert!(summary.others_mutually_exclusive);
    }

    #[test]
    fn zero_outcome_gives_zero_coefficient() {
        let panel = four_group_example([0.0; 4]);
        assert_eq!(twfe_coefficient(&panel, 0).unwrap(), 0.0);
    }

    #[test]
    fn constant_treatment_is_collinear() {
        let mut rows = Vec::new();
        for g in 0..3 {
            for t in 1..=3 {
                rows.push(PanelRow::new(g.to_string(), t, t as f64, vec![1.0, (g == 0 && t > 1) as u8 as f64]));
            }
        }
        let panel = load_panel(&rows, LoadOptions::default()).unwrap();
        assert!(matches!(
            first_stage(&panel, 0),
            Err(Error::CollinearTreatments { .. })
        ));
        assert!(matches!(
            twfe_coefficient(&panel, 0),
            Err(Error::CollinearTreatments { .. })
        ));
    }

    #[test]
    fn duplicated_other_treatment_is_collinear() {
        let mut rows = Vec::new();
        for g in 0..4 {
            for t in 1..=3 {
                let a = (g >= 2 && t >= 2) as u8 as f64;
                let b = (g >= 1 && t >= 3) as u8 as f64;
                rows.push(PanelRow::new(g.to_string(), t, 0.0, vec![a, b, b]));
            }
        }
        let panel = load_panel(&rows, LoadOptions::default()).unwrap();
        assert!(matches!(
            first_stage(&panel, 0),
            Err(Error::CollinearTreatments { .. })
        ));
    }

    #[test]
    fn single_treated_cell() {
        let rows = vec![
            PanelRow::new("1", 1, 0.0, vec![0.0]),
            PanelRow::new("1", 2, 0.0, vec![0.0]),
            PanelRow::new("2", 1, 0.0, vec![0.0]),
            PanelRow::new("2", 2, 3.0, vec![1.0]),
        ];
        let panel = load_panel(&rows, LoadOptions::default()).unwrap();
        let dec = decompose(&panel, 0).unwrap();
        assert_eq!(dec.own.len(), 1);
        assert_eq!((dec.own[0].g, dec.own[0].t), (1, 1));
        assert!((dec.own[0].weight - 1.0).abs() < 1e-12);
        assert!(dec.contamination.is_empty());
        assert!((dec.beta_fe - 3.0).abs() < 1e-12);
        let summary = summarize(&dec, &panel);
        assert!(summary.per_other_treatment.is_empty());
        assert_eq!(summary.contamination.cells, 0);
    }

    #[test]
    fn decompose_rejects_non_binary() {
        let mut rows = Vec::new();
        for g in 0..3 {
            for t in 1..=2 {
                let d = if g == 2 && t == 2 { 2.0 } else { (g >= 1 && t == 2) as u8 as f64 };
                rows.push(PanelRow::new(g.to_string(), t, g as f64 + t as f64, vec![d]));
            }
        }
        let panel = load_panel(&rows, LoadOptions::default()).unwrap();
        assert!(matches!(
            decompose(&panel, 0),
            Err(Error::NonBinaryTreatment { .. })
        ));
        assert!(twfe_coefficient(&panel, 0).is_ok());
    }

    #[test]
    fn target_out_of_range() {
        let panel = four_group_example([0.0; 4]);
        assert!(matches!(
            first_stage(&panel, 2),
            Err(Error::TreatmentOutOfRange { index: 2, k: 2 })
        ));
    }
}
