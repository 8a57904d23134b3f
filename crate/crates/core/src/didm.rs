//! `DID_M` for one treatment among several, without dynamic effects.
//!
//! A switcher is a cell whose target treatment changes between `t-1` and `t`
//! while all other treatments stay put. Each switcher is compared with
//! stayers: groups whose treatments are all unchanged and equal to the
//! switcher's period `t-1` treatments. Comparisons are grouped by period,
//! baseline of the other treatments and the (old, new) target values, and
//! averaged with weights proportional to switcher cell sizes.
//!
//! With a binary target this is the usual average of `DID_{+,d,t}` and
//! `DID_{-,d,t}`. Discrete ordered targets are handled by dividing every
//! comparison by the size of the treatment change, which reduces to the
//! binary formula when the change is ±1.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::Result;
use crate::panel::{same_value, same_vector, PanelDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Switcher {
    pub g: usize,
    pub t: usize,
    pub direction: Direction,
    /// Other treatments at `t-1` (equal to their values at `t`).
    pub baseline: Vec<f64>,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    OtherTreatmentChanged,
    NoMatchingStayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedSwitch {
    pub g: usize,
    pub t: usize,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitcherSet {
    pub target: usize,
    pub cells: Vec<Switcher>,
    /// `N_S`: total size of the switcher cells.
    pub n_s: f64,
    /// Switching cells left out of the set.
    pub dropped: Vec<DroppedSwitch>,
}

fn others(d: &[f64], target: usize) -> Vec<f64> {
    d.iter()
        .enumerate()
        .filter(|(j, _)| *j != target)
        .map(|(_, v)| *v)
        .collect()
}

fn is_stayer(panel: &PanelDataset, g: usize, t: usize, target: usize, value: f64, baseline: &[f64]) -> bool {
    let prev = panel.treatments(g, t - 1);
    let cur = panel.treatments(g, t);
    same_vector(prev, cur)
        && same_value(prev[target], value)
        && prev
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != target)
            .zip(baseline)
            .all(|((_, a), b)| same_value(*a, *b))
}

/// Enumerate the switcher set for treatment `target`.
pub fn find_switchers(panel: &PanelDataset, target: usize) -> Result<SwitcherSet> {
    panel.check_treatment(target)?;
    let mut cells = Vec::new();
    let mut dropped = Vec::new();
    let mut n_s = 0.0;
    for t in 1..panel.n_periods() {
        for g in 0..panel.n_groups() {
            let prev = panel.treatments(g, t - 1);
            let cur = panel.treatments(g, t);
            if same_value(prev[target], cur[target]) {
                continue;
            }
            let baseline = others(prev, target);
            if !same_vector(&baseline, &others(cur, target)) {
                dropped.push(DroppedSwitch {
                    g,
                    t,
                    reason: DropReason::OtherTreatmentChanged,
                });
                continue;
            }
            let from = prev[target];
            let matched = (0..panel.n_groups())
                .any(|h| is_stayer(panel, h, t, target, from, &baseline));
            if !matched {
                dropped.push(DroppedSwitch {
                    g,
                    t,
                    reason: DropReason::NoMatchingStayer,
                });
                continue;
            }
            n_s += panel.n(g, t);
            cells.push(Switcher {
                g,
                t,
                direction: if cur[target] > from {
                    Direction::Up
                } else {
                    Direction::Down
                },
                baseline,
                from,
                to: cur[target],
            });
        }
    }
    Ok(SwitcherSet {
        target,
        cells,
        n_s,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DidmComponent {
    pub t: usize,
    pub baseline: Vec<f64>,
    pub direction: Direction,
    pub from: f64,
    pub to: f64,
    pub n_switcher_cells: usize,
    pub n_switchers: f64,
    pub n_stayers: f64,
    pub did: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DidmResult {
    pub target: usize,
    pub estimate: f64,
    pub components: Vec<DidmComponent>,
    pub n_s: f64,
    pub dropped: Vec<DroppedSwitch>,
    pub standard_error: Option<f64>,
}

impl DidmResult {
    pub fn n_dropped(&self) -> usize {
        self.dropped.len()
    }
}

fn compare_key(a: &Switcher, b: &Switcher) -> Ordering {
    a.t.cmp(&b.t)
        .then_with(|| {
            a.baseline
                .iter()
                .zip(&b.baseline)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.from.total_cmp(&b.from))
        .then_with(|| a.to.total_cmp(&b.to))
}

fn same_key(a: &Switcher, b: &Switcher) -> bool {
    a.t == b.t && same_vector(&a.baseline, &b.baseline) && same_value(a.from, b.from) && same_value(a.to, b.to)
}

fn delta_y(panel: &PanelDataset, g: usize, t: usize) -> f64 {
    panel.y(g, t) - panel.y(g, t - 1)
}

/// `DID_M` for treatment `target`. Zero, with `n_s = 0`, when no switcher
/// has a matching stayer.
pub fn didm(panel: &PanelDataset, target: usize) -> Result<DidmResult> {
    let set = find_switchers(panel, target)?;
    let mut switchers = set.cells.clone();
    switchers.sort_by(compare_key);

    let mut components = Vec::new();
    let mut start = 0;
    while start < switchers.len() {
        let mut end = start + 1;
        while end < switchers.len() && same_key(&switchers[start], &switchers[end]) {
            end += 1;
        }
        let key = &switchers[start];
        let t = key.t;
        let (mut sw_n, mut sw_sum) = (0.0, 0.0);
        for s in &switchers[start..end] {
            let n = panel.n(s.g, t);
            sw_n += n;
            sw_sum += n * delta_y(panel, s.g, t);
        }
        let (mut st_n, mut st_sum) = (0.0, 0.0);
        for h in 0..panel.n_groups() {
            if is_stayer(panel, h, t, target, key.from, &key.baseline) {
                let n = panel.n(h, t);
                st_n += n;
                st_sum += n * delta_y(panel, h, t);
            }
        }
        let did = (sw_sum / sw_n - st_sum / st_n) / (key.to - key.from);
        components.push(DidmComponent {
            t,
            baseline: key.baseline.clone(),
            direction: key.direction,
            from: key.from,
            to: key.to,
            n_switcher_cells: end - start,
            n_switchers: sw_n,
            n_stayers: st_n,
            did,
            weight: sw_n / set.n_s,
        });
        start = end;
    }
    let estimate = if set.n_s > 0.0 {
        components.iter().map(|c| c.weight * c.did).sum()
    } else {
        0.0
    };
    Ok(DidmResult {
        target,
        estimate,
        components,
        n_s: set.n_s,
        dropped: set.dropped,
        standard_error: None,
    })
}
