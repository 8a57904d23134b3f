#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twowayfe::panel::{load_panel, LoadOptions, PanelDataset, PanelRow};
use twowayfe::sim::{Baseline, CellSizes, DgpSpec, Design, Effects};

/// Random binary panel with integer cell sizes and normal outcomes.
pub fn random_panel(seed: u64, groups: usize, periods: usize, k: usize, p: f64) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for g in 0..groups {
        for t in 0..periods {
            let d = (0..k).map(|_| rng.random_bool(p) as u8 as f64).collect();
            let y = rng.random_range(-5.0..5.0);
            let n = rng.random_range(1..=5) as f64;
            rows.push(PanelRow::new(format!("g{g}"), t as i64, y, d).with_n(n));
        }
    }
    load_panel(&rows, LoadOptions::default()).unwrap()
}

/// Random panel dimensions `(G, T, K)` with `G <= 20`, `T <= 10`, `K <= 3`.
pub fn random_dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (rng.random_range(3..=20), rng.random_range(2..=10), rng.random_range(1..=3))
}

/// Dense design `[1, group dummies 2..G, period dummies 2..T, D]` with rows
/// scaled by √n, and the scaled response.
fn dummy_design(panel: &PanelDataset, columns: &[usize], response: impl Fn(usize, usize) -> f64) -> (DMatrix<f64>, DVector<f64>) {
    let (g_len, t_len) = (panel.n_groups(), panel.n_periods());
    let width = 1 + (g_len - 1) + (t_len - 1) + columns.len();
    let mut x = DMatrix::zeros(g_len * t_len, width);
    let mut y = DVector::zeros(g_len * t_len);
    for g in 0..g_len {
        for t in 0..t_len {
            let r = g * t_len + t;
            let w = panel.n(g, t).sqrt();
            x[(r, 0)] = w;
            if g > 0 {
                x[(r, g)] = w;
            }
            if t > 0 {
                x[(r, g_len - 1 + t)] = w;
            }
            for (j, &k) in columns.iter().enumerate() {
                x[(r, g_len + t_len - 1 + j)] = w * panel.d(g, t, k);
            }
            y[r] = w * response(g, t);
        }
    }
    (x, y)
}

fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    x.clone().svd(true, true).solve(y, 1e-12).unwrap()
}

/// Numerical rank of the full dummy design with all treatments.
pub fn dummy_rank(panel: &PanelDataset) -> usize {
    let cols: Vec<usize> = (0..panel.n_treatments()).collect();
    let (x, _) = dummy_design(panel, &cols, |_, _| 0.0);
    x.rank(1e-9 * x.norm())
}

pub fn full_rank_width(panel: &PanelDataset) -> usize {
    panel.n_groups() + panel.n_periods() - 1 + panel.n_treatments()
}

/// TWFE coefficient on `target` from one dense least-squares solve on the
/// explicit dummy design.
pub fn dummy_ols_coefficient(panel: &PanelDataset, target: usize) -> f64 {
    let cols: Vec<usize> = (0..panel.n_treatments()).collect();
    let (x, y) = dummy_design(panel, &cols, |g, t| panel.y(g, t));
    let beta = lstsq(&x, &y);
    beta[panel.n_groups() + panel.n_periods() - 1 + target]
}

/// Residuals of `D^target` on the dummies and the other treatments.
pub fn dummy_ols_residuals(panel: &PanelDataset, target: usize) -> Vec<f64> {
    let cols: Vec<usize> = (0..panel.n_treatments()).filter(|&j| j != target).collect();
    let (x, y) = dummy_design(panel, &cols, |g, t| panel.d(g, t, target));
    let beta = lstsq(&x, &y);
    let fitted = &x * beta;
    (0..y.len())
        .map(|r| {
            let w = panel.sizes()[r].sqrt();
            (y[r] - fitted[r]) / w
        })
        .collect()
}

fn mean_change(panel: &PanelDataset, groups: &[usize], t: usize) -> (f64, f64) {
    let n: f64 = groups.iter().map(|&g| panel.n(g, t)).sum();
    let s: f64 = groups.iter().map(|&g| panel.n(g, t) * (panel.y(g, t) - panel.y(g, t - 1))).sum();
    (n, s / n)
}

/// `DID_M` for a binary target, written from the definition: for every
/// period and every value of the other treatments held fixed between
/// `t-1` and `t`, join 0→1 switchers with 0→0 stayers and 1→0 switchers with
/// 1→1 stayers.
pub fn brute_force_didm(panel: &PanelDataset, target: usize) -> f64 {
    let mut n_s = 0.0;
    let mut acc = 0.0;
    for t in 1..panel.n_periods() {
        // key: other treatments (as a string), value: [up, down, stay0, stay1]
        let mut arms: BTreeMap<String, [Vec<usize>; 4]> = BTreeMap::new();
        for g in 0..panel.n_groups() {
            let others_prev: Vec<f64> = (0..panel.n_treatments()).filter(|&j| j != target).map(|j| panel.d(g, t - 1, j)).collect();
            let others_now: Vec<f64> = (0..panel.n_treatments()).filter(|&j| j != target).map(|j| panel.d(g, t, j)).collect();
            if others_prev != others_now {
                continue;
            }
            let key = format!("{others_prev:?}");
            let slot = match (panel.d(g, t - 1, target) as u8, panel.d(g, t, target) as u8) {
                (0, 1) => 0,
                (1, 0) => 1,
                (0, 0) => 2,
                _ => 3,
            };
            arms.entry(key).or_default()[slot].push(g);
        }
        for [up, down, stay0, stay1] in arms.values() {
            if !up.is_empty() && !stay0.is_empty() {
                let (n_up, m_up) = mean_change(panel, up, t);
                let (_, m_stay) = mean_change(panel, stay0, t);
                n_s += n_up;
                acc += n_up * (m_up - m_stay);
            }
            if !down.is_empty() && !stay1.is_empty() {
                let (n_down, m_down) = mean_change(panel, down, t);
                let (_, m_stay) = mean_change(panel, stay1, t);
                n_s += n_down;
                acc += n_down * (m_stay - m_down);
            }
        }
    }
    if n_s == 0.0 {
        0.0
    } else {
        acc / n_s
    }
}

/// Single-treatment `DID_M`: switchers against stayers at the same
/// treatment level, no other treatments.
pub fn single_treatment_didm(panel: &PanelDataset) -> f64 {
    let mut n_s = 0.0;
    let mut acc = 0.0;
    for t in 1..panel.n_periods() {
        let by = |a: f64, b: f64| -> Vec<usize> {
            (0..panel.n_groups())
                .filter(|&g| panel.d(g, t - 1, 0) == a && panel.d(g, t, 0) == b)
                .collect()
        };
        let (j01, j10, j00, j11) = (by(0.0, 1.0), by(1.0, 0.0), by(0.0, 0.0), by(1.0, 1.0));
        if !j01.is_empty() && !j00.is_empty() {
            let (n, m) = mean_change(panel, &j01, t);
            n_s += n;
            acc += n * (m - mean_change(panel, &j00, t).1);
        }
        if !j10.is_empty() && !j11.is_empty() {
            let (n, m) = mean_change(panel, &j10, t);
            n_s += n;
            acc += n * (mean_change(panel, &j11, t).1 - m);
        }
    }
    if n_s == 0.0 {
        0.0
    } else {
        acc / n_s
    }
}

/// Four groups, two periods: groups 2 and 4 take the first treatment and
/// groups 3 and 4 the second at period 2; outcome changes `dy`.
pub fn four_group_panel(dy: [f64; 4]) -> PanelDataset {
    let d1 = [0.0, 1.0, 0.0, 1.0];
    let d2 = [0.0, 0.0, 1.0, 1.0];
    let mut rows = Vec::new();
    for g in 0..4 {
        rows.push(PanelRow::new((g + 1).to_string(), 1, 0.0, vec![0.0, 0.0]));
        rows.push(PanelRow::new((g + 1).to_string(), 2, dy[g], vec![d1[g], d2[g]]));
    }
    load_panel(&rows, LoadOptions::default()).unwrap()
}

/// Noiseless static DGP with heterogeneous effects of every treatment
/// combination.
pub fn static_spec(seed: u64, groups: usize, periods: usize, k: usize, effects: Effects) -> DgpSpec {
    DgpSpec {
        groups,
        periods,
        treatments: k,
        design: Design::RandomBinary { p: 0.4 },
        effects,
        baseline: Baseline::Random { scale: 2.0 },
        noise: 0.0,
        sizes: CellSizes::RandomInt { max: 6 },
        seed,
        replication: 0,
    }
}

/// Three groups adopting the first treatment at period 2 and the second at
/// 3, never, and 4; outcome `t` when untreated. `violation` adds a
/// per-period drift to each group's first-treatment effect.
pub fn abc_spec(extra_never_group: bool, violation: Option<Vec<f64>>) -> DgpSpec {
    let (mut first, mut second) = (vec![2, 2, 2], vec![3, 5, 4]);
    let mut lambda = vec![1.0, 2.0, 0.0];
    let mut paths = vec![vec![10.0, 12.0], vec![], vec![7.0]];
    if extra_never_group {
        first.push(5);
        second.push(5);
        lambda.push(0.0);
        paths.push(vec![]);
    }
    let groups = first.len();
    DgpSpec {
        groups,
        periods: 4,
        treatments: 2,
        design: Design::Staggered {
            first: Some(first),
            second: Some(second),
        },
        effects: Effects::Staggered {
            scale: 1.0,
            lambda: Some(lambda),
            slope: Some(0.5),
            second: Some(paths),
            violation: violation.map(|mut v| {
                v.resize(groups, 0.0);
                v
            }),
        },
        baseline: Baseline::Explicit {
            group: vec![0.0; groups],
            period: vec![1.0, 2.0, 3.0, 4.0],
        },
        noise: 0.0,
        sizes: CellSizes::Unit,
        seed: 0,
        replication: 0,
    }
}

/// Noiseless consecutive-staggered DGP with random dates and effects that
/// evolve identically within first-treatment cohorts.
pub fn random_staggered_spec(seed: u64) -> DgpSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5747);
    DgpSpec {
        groups: rng.random_range(8..=20),
        periods: rng.random_range(4..=8),
        treatments: 2,
        design: Design::Staggered {
            first: None,
            second: None,
        },
        effects: Effects::Staggered {
            scale: 1.5,
            lambda: None,
            slope: None,
            second: None,
            violation: None,
        },
        baseline: Baseline::Random { scale: 3.0 },
        noise: 0.0,
        sizes: CellSizes::RandomInt { max: 5 },
        seed,
        replication: 0,
    }
}

pub fn standard_did_spec(groups: usize, periods: usize, g1: usize, t1: usize, g2: usize, t2: usize, sizes: CellSizes) -> DgpSpec {
    DgpSpec {
        groups,
        periods,
        treatments: 2,
        design: Design::StandardDid { g1, t1, g2, t2 },
        effects: Effects::Heterogeneous { scale: 1.0 },
        baseline: Baseline::Random { scale: 1.0 },
        noise: 0.0,
        sizes,
        seed: (groups * 31 + periods * 7 + g1 + t1 * 3 + g2 * 5 + t2 * 11) as u64,
        replication: 0,
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
