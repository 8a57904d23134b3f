//! Dynamic effects with two binary treatments adopted in a staggered way,
//! the second always after the first.
//!
//! The second treatment's effect `ℓ` periods after adoption is estimated by
//! comparing, *within* a first-treatment cohort (groups that adopted the
//! first treatment on the same date), the long difference
//! `Y_{g,t} - Y_{g,t-ℓ-1}` of groups that adopted the second treatment at
//! `t-ℓ` with that of cohort members that have not adopted it by `t`.
//! Restricting comparisons to one cohort keeps exposure to the first
//! treatment equal across arms.
//!
//! Periods are zero-based here; a group that never adopts a treatment gets
//! the adoption date `T` (one past the last period).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{is_binary_value, PanelDataset};

/// First period at which binary treatment `k` is on, per group (`T` if never).
/// Fails unless the treatment is binary and never switches off.
pub fn adoption_dates(panel: &PanelDataset, k: usize) -> Result<Vec<usize>> {
    panel.check_treatment(k)?;
    let t_len = panel.n_periods();
    let mut dates = Vec::with_capacity(panel.n_groups());
    for g in 0..panel.n_groups() {
        let mut date = t_len;
        for t in 0..t_len {
            let v = panel.d(g, t, k);
            if !is_binary_value(v) {
                return Err(Error::NonBinaryTreatment {
                    treatment: panel.treatment_names()[k].clone(),
                    group: panel.group_label(g).to_string(),
                    period: panel.period_label(t),
                    value: v,
                });
            }
            let on = v > 0.5;
            if on && date == t_len {
                date = t;
            } else if !on && date < t_len {
                return Err(Error::NotStaggered {
                    treatment: k,
                    group: panel.group_label(g).to_string(),
                    period: panel.period_label(t),
                });
            }
        }
        dates.push(date);
    }
    Ok(dates)
}

/// Validated adoption dates of a consecutive staggered design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdoptionDates {
    pub first: usize,
    pub second: usize,
    pub f1: Vec<usize>,
    pub f2: Vec<usize>,
    pub periods: usize,
}

impl AdoptionDates {
    pub fn new(panel: &PanelDataset, first: usize, second: usize) -> Result<Self> {
        let f1 = adoption_dates(panel, first)?;
        let f2 = adoption_dates(panel, second)?;
        if let Some(g) = (0..f1.len()).find(|&g| f2[g] < f1[g]) {
            return Err(Error::WrongOrder {
                group: panel.group_label(g).to_string(),
            });
        }
        Ok(Self {
            first,
            second,
            f1,
            f2,
            periods: panel.n_periods(),
        })
    }

    pub fn never(&self) -> usize {
        self.periods
    }

    /// Adopted both treatments in the same period (second-treatment effect
    /// not separately identified).
    pub fn simultaneous(&self, g: usize) -> bool {
        self.f1[g] == self.f2[g] && self.f1[g] < self.periods
    }
}

/// Cohort bookkeeping for the second-treatment estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortStructure {
    pub dates: AdoptionDates,
    /// Groups per first-treatment adoption date, including the never cohort.
    pub cohorts: BTreeMap<usize, Vec<usize>>,
    /// Cohorts with two members adopting the second treatment at different
    /// dates (simultaneous adopters excluded), ascending.
    pub eligible: Vec<usize>,
    /// Last period at which some cohort member has not adopted the second
    /// treatment.
    pub nt: BTreeMap<usize, usize>,
    pub l_nt_f: BTreeMap<usize, usize>,
    pub l_nt: usize,
    /// `N_ℓ` for `ℓ = 0..=l_nt`.
    pub n_ell: Vec<f64>,
}

impl CohortStructure {
    /// `(t, adopters)` pairs entering horizon `ℓ` for cohort `f`.
    fn cells(&self, f: usize, ell: usize) -> impl Iterator<Item = (usize, Vec<usize>)> + '_ {
        let nt = self.nt[&f];
        let members = &self.cohorts[&f];
        (ell + f + 1..=nt).filter_map(move |t| {
            let adopters: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&g| self.dates.f2[g] == t - ell)
                .collect();
            (!adopters.is_empty()).then_some((t, adopters))
        })
    }

    fn not_yet(&self, f: usize, t: usize) -> Vec<usize> {
        self.cohorts[&f]
            .iter()
            .copied()
            .filter(|&g| self.dates.f2[g] > t)
            .collect()
    }

    fn check_horizon(&self, ell: usize) -> Result<()> {
        if ell > self.l_nt {
            return Err(Error::HorizonOutOfRange {
                ell,
                max: self.l_nt,
            });
        }
        Ok(())
    }
}

pub fn build_cohorts(panel: &PanelDataset, first: usize, second: usize) -> Result<CohortStructure> {
    let dates = AdoptionDates::new(panel, first, second)?;
    let never = dates.never();
    let mut cohorts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (g, &f) in dates.f1.iter().enumerate() {
        cohorts.entry(f).or_default().push(g);
    }

    let mut eligible = Vec::new();
    let mut nt = BTreeMap::new();
    let mut l_nt_f = BTreeMap::new();
    for (&f, members) in &cohorts {
        if f == never {
            continue;
        }
        let later: Vec<usize> = members
            .iter()
            .map(|&g| dates.f2[g])
            .filter(|&f2| f2 > f)
            .collect();
        let (Some(&lo), Some(&hi)) = (later.iter().min(), later.iter().max()) else {
            continue;
        };
        if lo == hi {
            continue;
        }
        let last_untreated = members.iter().map(|&g| dates.f2[g]).max().unwrap() - 1;
        eligible.push(f);
        nt.insert(f, last_untreated);
        l_nt_f.insert(f, last_untreated - lo);
    }
    if eligible.is_empty() {
        return Err(Error::PathologicalDesign);
    }
    let l_nt = *l_nt_f.values().max().unwrap();

    let mut structure = CohortStructure {
        dates,
        cohorts,
        eligible,
        nt,
        l_nt_f,
        l_nt,
        n_ell: Vec::new(),
    };
    structure.n_ell = (0..=l_nt)
        .map(|ell| {
            structure
                .eligible
                .iter()
                .flat_map(|&f| structure.cells(f, ell).collect::<Vec<_>>())
                .map(|(t, adopters)| adopters.iter().map(|&g| panel.n(g, t)).sum::<f64>())
                .sum()
        })
        .collect();
    Ok(structure)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicComponent {
    /// Cohort: first-treatment adoption date (second-treatment adoption
    /// date for single-treatment event studies).
    pub f: usize,
    pub t: usize,
    pub did: f64,
    pub n_treated: f64,
    pub n_control: f64,
    #[serde(skip)]
    pub treated: Vec<usize>,
    #[serde(skip)]
    pub controls: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonEstimate {
    pub ell: usize,
    pub estimate: f64,
    pub n_ell: f64,
    pub components: Vec<DynamicComponent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicEffectResult {
    pub estimates: Vec<HorizonEstimate>,
    pub placebos: Vec<HorizonEstimate>,
    pub standard_errors: Option<Vec<f64>>,
}

impl DynamicEffectResult {
    pub fn estimate(&self, ell: usize) -> Option<f64> {
        self.estimates.iter().find(|h| h.ell == ell).map(|h| h.estimate)
    }
}

fn weighted_mean_change(panel: &PanelDataset, groups: &[usize], weight_t: usize, from: usize, to: usize) -> (f64, f64) {
    let (mut n, mut sum) = (0.0, 0.0);
    for &g in groups {
        let w = panel.n(g, weight_t);
        n += w;
        sum += w * (panel.y(g, to) - panel.y(g, from));
    }
    (n, sum / n)
}

fn comparison(
    panel: &PanelDataset,
    f: usize,
    t: usize,
    treated: Vec<usize>,
    controls: Vec<usize>,
    from: usize,
    to: usize,
) -> DynamicComponent {
    let (n_treated, treated_change) = weighted_mean_change(panel, &treated, t, from, to);
    let (n_control, control_change) = weighted_mean_change(panel, &controls, t, from, to);
    DynamicComponent {
        f,
        t,
        did: treated_change - control_change,
        n_treated,
        n_control,
        treated,
        controls,
    }
}

fn aggregate(ell: usize, components: Vec<DynamicComponent>) -> HorizonEstimate {
    let n_ell: f64 = components.iter().map(|c| c.n_treated).sum();
    let estimate = components.iter().map(|c| c.n_treated / n_ell * c.did).sum();
    HorizonEstimate {
        ell,
        estimate,
        n_ell,
        components,
    }
}

/// `DID_ℓ` for the second treatment, with its per-(cohort, period)
/// components in ascending (f, t) order.
pub fn did_ell(panel: &PanelDataset, structure: &CohortStructure, ell: usize) -> Result<HorizonEstimate> {
    structure.check_horizon(ell)?;
    let mut components = Vec::new();
    for &f in &structure.eligible {
        for (t, adopters) in structure.cells(f, ell) {
            let controls = structure.not_yet(f, t);
            components.push(comparison(panel, f, t, adopters, controls, t - ell - 1, t));
        }
    }
    Ok(aggregate(ell, components))
}

fn placebo_components(panel: &PanelDataset, structure: &CohortStructure, ell: usize) -> Vec<DynamicComponent> {
    let mut components = Vec::new();
    for &f in &structure.eligible {
        for (t, adopters) in structure.cells(f, ell) {
            if t < ell + 2 + f {
                continue;
            }
            let controls = structure.not_yet(f, t);
            components.push(comparison(panel, f, t, adopters, controls, t - ell - 2, t - ell - 1));
        }
    }
    components
}

/// Placebo for horizon `ℓ`: the arms of `DID_ℓ`, compared over the last
/// pre-adoption period `t-ℓ-2 → t-ℓ-1`. Only comparisons where both periods
/// fall under the first treatment (`t-ℓ-2 >= f`) are used.
pub fn placebo_ell(panel: &PanelDataset, structure: &CohortStructure, ell: usize) -> Result<HorizonEstimate> {
    structure.check_horizon(ell)?;
    let components = placebo_components(panel, structure, ell);
    if components.is_empty() {
        let feasible = (0..=structure.l_nt)
            .filter(|&l| !placebo_components(panel, structure, l).is_empty())
            .collect();
        return Err(Error::InsufficientPrePeriods { ell, feasible });
    }
    Ok(aggregate(ell, components))
}

/// Every `DID_ℓ`, `ℓ = 0..=L_nt`, and every feasible placebo.
pub fn second_treatment_effects(panel: &PanelDataset, structure: &CohortStructure) -> Result<DynamicEffectResult> {
    let estimates = (0..=structure.l_nt)
        .map(|ell| did_ell(panel, structure, ell))
        .collect::<Result<Vec<_>>>()?;
    let placebos = (0..=structure.l_nt)
        .filter_map(|ell| {
            let components = placebo_components(panel, structure, ell);
            (!components.is_empty()).then(|| aggregate(ell, components))
        })
        .collect();
    Ok(DynamicEffectResult {
        estimates,
        placebos,
        standard_errors: None,
    })
}

/// Single-treatment event study against not-yet-adopters. `available(g, t)`
/// says whether cell `(g, t)` belongs to the estimation sample; samples must
/// be closed under moving to earlier periods.
fn event_study(
    panel: &PanelDataset,
    adoption: &[usize],
    available: impl Fn(usize, usize) -> bool,
) -> Result<DynamicEffectResult> {
    let t_len = panel.n_periods();
    let groups = 0..panel.n_groups();
    if !groups.clone().any(|g| adoption[g] >= 1 && adoption[g] < t_len && available(g, adoption[g])) {
        return Err(Error::NoAdopters);
    }

    let horizon = |ell: usize, placebo: bool| -> Vec<DynamicComponent> {
        let mut components = Vec::new();
        for t in ell + 1..t_len {
            let date = t - ell;
            if placebo && date < 2 {
                continue;
            }
            let treated: Vec<usize> = groups
                .clone()
                .filter(|&g| adoption[g] == date && available(g, t))
                .collect();
            let controls: Vec<usize> = groups
                .clone()
                .filter(|&g| adoption[g] > t && available(g, t))
                .collect();
            if treated.is_empty() || controls.is_empty() {
                continue;
            }
            let (from, to) = if placebo { (date - 2, date - 1) } else { (date - 1, t) };
            components.push(comparison(panel, date, t, treated, controls, from, to));
        }
        components
    };

    let mut estimates = Vec::new();
    let mut placebos = Vec::new();
    for ell in 0..t_len {
        let components = horizon(ell, false);
        if components.is_empty() {
            break;
        }
        estimates.push(aggregate(ell, components));
        let pl = horizon(ell, true);
        if !pl.is_empty() {
            placebos.push(aggregate(ell, pl));
        }
    }
    if estimates.is_empty() {
        return Err(Error::NoControls);
    }
    Ok(DynamicEffectResult {
        estimates,
        placebos,
        standard_errors: None,
    })
}

/// Effects of the first treatment alone: cells where the second treatment is
/// on are dropped, so horizons are truncated at each group's second
/// adoption. Controls are groups that have not adopted the first treatment.
pub fn first_treatment_effects(panel: &PanelDataset, first: usize, second: usize) -> Result<DynamicEffectResult> {
    let dates = AdoptionDates::new(panel, first, second)?;
    event_study(panel, &dates.f1, |g, t| t < dates.f2[g])
}

/// Effects of the summed treatment `D¹ + D²`, dated from the first change
/// of either treatment. Mixes the effects of both treatments.
pub fn combined_effects(panel: &PanelDataset, first: usize, second: usize) -> Result<DynamicEffectResult> {
    let dates = AdoptionDates::new(panel, first, second)?;
    let start: Vec<usize> = dates.f1.iter().zip(&dates.f2).map(|(a, b)| *a.min(b)).collect();
    event_study(panel, &start, |_, _| true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearTrendDrop {
    /// Fewer than two periods between the two adoptions.
    InsufficientPrePeriods,
    /// Adopted both treatments in the same period.
    SimultaneousAdoption,
    /// `F² + ℓ` falls after the last period.
    BeyondPanel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearTrendContribution {
    pub g: usize,
    pub t: usize,
    pub observed: f64,
    pub counterfactual: f64,
    pub n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearTrendEstimate {
    pub ell: usize,
    pub estimate: f64,
    pub contributions: Vec<LinearTrendContribution>,
    pub dropped: Vec<(usize, LinearTrendDrop)>,
}

fn linear_contribution(panel: &PanelDataset, dates: &AdoptionDates, g: usize, ell: usize) -> std::result::Result<LinearTrendContribution, LinearTrendDrop> {
    let (f1, f2) = (dates.f1[g], dates.f2[g]);
    if f1 == f2 {
        return Err(LinearTrendDrop::SimultaneousAdoption);
    }
    if f2 - f1 < 2 {
        return Err(LinearTrendDrop::InsufficientPrePeriods);
    }
    let t = f2 + ell;
    if t >= dates.periods {
        return Err(LinearTrendDrop::BeyondPanel);
    }
    // ordinary least squares of Y on period over [f1, f2)
    let m = (f2 - f1) as f64;
    let mean_s = (f1..f2).map(|s| s as f64).sum::<f64>() / m;
    let mean_y = (f1..f2).map(|s| panel.y(g, s)).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for s in f1..f2 {
        let dx = s as f64 - mean_s;
        sxy += dx * (panel.y(g, s) - mean_y);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    Ok(LinearTrendContribution {
        g,
        t,
        observed: panel.y(g, t),
        counterfactual: mean_y + slope * (t as f64 - mean_s),
        n: panel.n(g, t),
    })
}

/// Second-treatment effect `ℓ` periods after adoption, using each adopter's
/// own linear outcome trend between its two adoptions as counterfactual.
/// Assumes the outcome of a group exposed to the first treatment only moves
/// linearly in time, which also requires the common period effects to be
/// linear.
pub fn did_ell_linear_trends(panel: &PanelDataset, dates: &AdoptionDates, ell: usize) -> Result<LinearTrendEstimate> {
    let adopters: Vec<usize> = (0..panel.n_groups()).filter(|&g| dates.f2[g] < dates.periods).collect();
    let mut contributions = Vec::new();
    let mut dropped = Vec::new();
    for &g in &adopters {
        match linear_contribution(panel, dates, g, ell) {
            Ok(c) => contributions.push(c),
            Err(reason) => dropped.push((g, reason)),
        }
    }
    if contributions.is_empty() {
        let feasible = (0..dates.periods)
            .filter(|&l| adopters.iter().any(|&g| linear_contribution(panel, dates, g, l).is_ok()))
            .collect();
        return Err(Error::InsufficientPrePeriods { ell, feasible });
    }
    let n: f64 = contributions.iter().map(|c| c.n).sum();
    let estimate = contributions
        .iter()
        .map(|c| c.n / n * (c.observed - c.counterfactual))
        .sum();
    Ok(LinearTrendEstimate {
        ell,
        estimate,
        contributions,
        dropped,
    })
}

/// Groups classified by the order in which they adopt the two treatments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderSplit {
    /// First treatment strictly before the second (or only the first).
    pub first_then_second: Vec<usize>,
    /// Second treatment strictly before the first (or only the second).
    pub second_then_first: Vec<usize>,
    pub simultaneous: Vec<usize>,
    pub never: Vec<usize>,
}

impl OrderSplit {
    fn with_never(&self, groups: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = groups.iter().chain(&self.never).copied().collect();
        out.sort_unstable();
        out
    }

    /// Analysis subsample for the first-then-second ordering.
    pub fn first_sample(&self) -> Vec<usize> {
        self.with_never(&self.first_then_second)
    }

    /// Analysis subsample for the second-then-first ordering.
    pub fn second_sample(&self) -> Vec<usize> {
        self.with_never(&self.second_then_first)
    }

    /// Analysis subsample for the bundled (simultaneous) treatment.
    pub fn simultaneous_sample(&self) -> Vec<usize> {
        self.with_never(&self.simultaneous)
    }
}

pub fn split_by_order(panel: &PanelDataset, first: usize, second: usize) -> Result<OrderSplit> {
    let f1 = adoption_dates(panel, first)?;
    let f2 = adoption_dates(panel, second)?;
    let never = panel.n_periods();
    let mut split = OrderSplit {
        first_then_second: Vec::new(),
        second_then_first: Vec::new(),
        simultaneous: Vec::new(),
        never: Vec::new(),
    };
    for g in 0..panel.n_groups() {
        let bucket = if f1[g] == never && f2[g] == never {
            &mut split.never
        } else if f1[g] == f2[g] {
            &mut split.simultaneous
        } else if f1[g] < f2[g] {
            &mut split.first_then_second
        } else {
            &mut split.second_then_first
        };
        bucket.push(g);
    }
    Ok(split)
}
