//! Synthetic panels with stored potential outcomes, and oracles that
//! evaluate the target parameters directly from them.
//!
//! Outcomes are `Y_{g,t}(d) = θ_g + η_t + e_{g,t} + f(d, g, t)`. The noise
//! `e_{g,t}` enters the untreated baseline and is shared by every potential
//! outcome of the cell, so parallel trends hold for all potential outcomes
//! in expectation, and exactly when the noise scale is zero.
//!
//! Every random quantity is drawn from its own ChaCha8 stream, keyed by
//! purpose and index, so the draws do not depend on generation order.
//! Changing `replication` changes the noise streams only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decomposition::WeightDecomposition;
use crate::didm::find_switchers;
use crate::error::{Error, Result};
use crate::panel::{is_binary_value, load_panel, LoadOptions, PanelDataset, PanelRow};
use crate::staggered::CohortStructure;

/// Full description of a data-generating process. Group and period
/// positions in the spec are 1-based; adoption date `periods + 1` means
/// never.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub groups: usize,
    pub periods: usize,
    #[serde(default = "default_treatments")]
    pub treatments: usize,
    pub design: Design,
    #[serde(default)]
    pub effects: Effects,
    #[serde(default)]
    pub baseline: Baseline,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub sizes: CellSizes,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub replication: u64,
}

fn default_treatments() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Design {
    /// Every treatment of every cell is an independent Bernoulli draw.
    RandomBinary { p: f64 },
    /// Two treatments, `D^k = 1{g >= g_k} 1{t >= t_k}`.
    StandardDid {
        g1: usize,
        t1: usize,
        g2: usize,
        t2: usize,
    },
    /// Treatments given as `[group][period][treatment]`.
    Explicit { treatments: Vec<Vec<Vec<f64>>> },
    /// Two staggered treatments with `F² >= F¹`. Missing dates are drawn
    /// uniformly (`F¹` in `1..=T+1`, then `F²` in `F¹..=T+1`).
    Staggered {
        #[serde(default)]
        first: Option<Vec<usize>>,
        #[serde(default)]
        second: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEffect {
    pub g: usize,
    pub t: usize,
    pub d: Vec<f64>,
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Effects {
    #[default]
    Zero,
    /// `f(d) = Σ_k values[k] d_k`.
    Constant { values: Vec<f64> },
    /// `f(d, g, t) = Σ_k τ_{k,g,t} d_k` with normal `τ`.
    Additive { scale: f64 },
    /// Independent normal effect for every nonzero `d` in every cell.
    /// Parallel trends then hold for `Y(0)` only.
    Heterogeneous { scale: f64 },
    /// `f(d, g, t) = a_{d,g} + b_{d,t}` with normal terms for every nonzero
    /// `d`: effects vary freely across groups and periods while every
    /// potential outcome keeps parallel trends.
    GroupTime { scale: f64 },
    /// Listed effects, zero elsewhere.
    Explicit { cells: Vec<CellEffect> },
    /// Dynamic effects for the staggered design. First treatment:
    /// `(λ_g + μ_{F¹,t} + v_g (t - F¹)) 1{t >= F¹}`; second treatment adds
    /// `s_g(t - F²) 1{t >= F²}`. With `v = 0` the first-treatment effect
    /// evolves identically across groups of a cohort.
    Staggered {
        #[serde(default = "unit_scale")]
        scale: f64,
        /// `λ_g`; normal draws when absent.
        #[serde(default)]
        lambda: Option<Vec<f64>>,
        /// `μ_{f,t} = slope (t - f)`; independent normal draws when absent.
        #[serde(default)]
        slope: Option<f64>,
        /// `s_g(ℓ)` per group, zero past the listed horizons; normal draws
        /// when absent.
        #[serde(default)]
        second: Option<Vec<Vec<f64>>>,
        /// `v_g`; zero when absent.
        #[serde(default)]
        violation: Option<Vec<f64>>,
    },
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Baseline {
    Random {
        scale: f64,
    },
    Explicit {
        group: Vec<f64>,
        period: Vec<f64>,
    },
}

impl Default for Baseline {
    fn default() -> Self {
        Baseline::Random { scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CellSizes {
    #[default]
    Unit,
    /// Uniform integers in `1..=max`.
    RandomInt { max: u32 },
    /// `n_{g,t} = a_g b_t`; integer factors drawn in `1..=max` when absent.
    Product {
        #[serde(default)]
        group: Option<Vec<f64>>,
        #[serde(default)]
        period: Option<Vec<f64>>,
        #[serde(default = "default_factor_max")]
        max: u32,
    },
}

fn default_factor_max() -> u32 {
    4
}

impl DgpSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidSpec(msg));
        let (g_len, t_len) = (self.groups, self.periods);
        if g_len < 2 || t_len < 2 {
            return invalid(format!("need at least 2 groups and 2 periods, got {g_len} x {t_len}"));
        }
        if self.treatments == 0 || self.treatments > 16 {
            return invalid(format!("treatments must be in 1..=16, got {}", self.treatments));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return invalid(format!("noise must be a finite non-negative number, got {}", self.noise));
        }
        let k = self.treatments;
        match &self.design {
            Design::RandomBinary { p } => {
                if !(0.0..=1.0).contains(p) {
                    return invalid(format!("p must lie in [0, 1], got {p}"));
                }
            }
            Design::StandardDid { g1, t1, g2, t2 } => {
                if k != 2 {
                    return invalid("standard_did has two treatments".into());
                }
                if !(1 < *g1 && g1 < g2 && *g2 <= g_len) {
                    return invalid(format!("need 1 < g1 < g2 <= groups, got g1={g1}, g2={g2}"));
                }
                if !(1 < *t1 && t1 < t2 && *t2 <= t_len) {
                    return invalid(format!("need 1 < t1 < t2 <= periods, got t1={t1}, t2={t2}"));
                }
            }
            Design::Explicit { treatments } => {
                if treatments.len() != g_len || treatments.iter().any(|g| g.len() != t_len) {
                    return invalid("explicit treatments must be groups x periods".into());
                }
                for cell in treatments.iter().flatten() {
                    if cell.len() != k {
                        return invalid(format!("each explicit cell needs {k} treatment values"));
                    }
                    if cell.iter().any(|v| !is_binary_value(*v)) {
                        return invalid("explicit treatments must be 0 or 1".into());
                    }
                }
            }
            Design::Staggered { first, second } => {
                if k != 2 {
                    return invalid("staggered design has two treatments".into());
                }
                for dates in [first, second].into_iter().flatten() {
                    if dates.len() != g_len || dates.iter().any(|&f| f == 0 || f > t_len + 1) {
                        return invalid(format!("adoption dates need one entry per group in 1..={}", t_len + 1));
                    }
                }
                if let (Some(a), Some(b)) = (first, second) {
                    if a.iter().zip(b).any(|(f1, f2)| f2 < f1) {
                        return invalid("second adoption precedes first".into());
                    }
                }
                if first.is_none() && second.is_some() {
                    return invalid("second adoption dates given without first".into());
                }
            }
        }
        match &self.effects {
            Effects::Constant { values } if values.len() != k => {
                return invalid(format!("constant effects need {k} values"));
            }
            Effects::Additive { scale } | Effects::Heterogeneous { scale } | Effects::GroupTime { scale } if *scale < 0.0 => {
                return invalid("effect scale must be non-negative".into());
            }
            Effects::Explicit { cells } => {
                for c in cells {
                    if c.g == 0 || c.g > g_len || c.t == 0 || c.t > t_len || c.d.len() != k {
                        return invalid(format!("explicit effect at ({}, {}) is out of range", c.g, c.t));
                    }
                    if c.d.iter().any(|v| !is_binary_value(*v)) {
                        return invalid("explicit effect treatment vectors must be binary".into());
                    }
                }
            }
            Effects::Staggered {
                lambda,
                second,
                violation,
                ..
            } => {
                if !matches!(self.design, Design::Staggered { .. }) {
                    return invalid("staggered effects require the staggered design".into());
                }
                if lambda.as_ref().is_some_and(|v| v.len() != g_len)
                    || second.as_ref().is_some_and(|v| v.len() != g_len)
                    || violation.as_ref().is_some_and(|v| v.len() != g_len)
                {
                    return invalid("staggered effect vectors need one entry per group".into());
                }
            }
            _ => {}
        }
        if let Baseline::Explicit { group, period } = &self.baseline {
            if group.len() != g_len || period.len() != t_len {
                return invalid("explicit baseline needs one value per group and per period".into());
            }
        }
        match &self.sizes {
            CellSizes::RandomInt { max } if *max == 0 => return invalid("max cell size must be positive".into()),
            CellSizes::Product { group, period, max } => {
                if *max == 0 {
                    return invalid("max cell size factor must be positive".into());
                }
                let bad = |v: &Option<Vec<f64>>, len: usize| {
                    v.as_ref().is_some_and(|v| v.len() != len || v.iter().any(|x| x.is_nan() || *x <= 0.0))
                };
                if bad(group, g_len) || bad(period, t_len) {
                    return invalid("product size factors must be positive, one per group/period".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Potential outcomes `Y_{g,t}(d)` for every binary treatment vector `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticTruth {
    treatments: usize,
    // cell-major, 2^K entries per cell indexed by the bitmask of d
    outcomes: Vec<f64>,
}

impl StaticTruth {
    fn mask(d: &[f64]) -> usize {
        d.iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.5)
            .fold(0, |m, (k, _)| m | (1 << k))
    }

    /// `Y_{g,t}(d)` for a binary `d`.
    pub fn outcome(&self, panel: &PanelDataset, g: usize, t: usize, d: &[f64]) -> f64 {
        self.outcomes[(panel.cell_index(g, t) << self.treatments) + Self::mask(d)]
    }
}

/// Outcomes along the adoption paths of the staggered design.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredTruth {
    /// Zero-based adoption dates, `T` for never.
    pub f1: Vec<usize>,
    pub f2: Vec<usize>,
    /// `Y(0; 0)` per cell.
    pub y_never: Vec<f64>,
    /// `Y(D¹_g; 0)` per cell.
    pub y_first_only: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel {
    pub spec: DgpSpec,
    pub panel: PanelDataset,
    pub static_truth: Option<StaticTruth>,
    pub staggered_truth: Option<StaggeredTruth>,
}

// stream purposes
const THETA: u64 = 1;
const ETA: u64 = 2;
const NOISE: u64 = 3;
const DESIGN: u64 = 4;
const SIZES: u64 = 5;
const EFFECT: u64 = 6;
const DATES: u64 = 7;
const LAMBDA: u64 = 8;
const MU: u64 = 9;
const SECOND: u64 = 10;

/// Independent stream for `(purpose, index)` under `seed`.
pub(crate) fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 56) ^ index);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn normal_at(seed: u64, purpose: u64, index: u64) -> f64 {
    normal(&mut stream(seed, purpose, index))
}

fn random_dates(spec: &DgpSpec) -> (Vec<usize>, Vec<usize>) {
    let t_len = spec.periods;
    (0..spec.groups)
        .map(|g| {
            let mut rng = stream(spec.seed, DATES, g as u64);
            let f1 = rng.random_range(1..=t_len + 1);
            let f2 = rng.random_range(f1..=t_len + 1);
            (f1, f2)
        })
        .unzip()
}

/// Treatment values of every cell, `[cell][k]`.
fn realized_treatments(spec: &DgpSpec, dates: Option<&(Vec<usize>, Vec<usize>)>) -> Vec<Vec<f64>> {
    let (g_len, t_len, k) = (spec.groups, spec.periods, spec.treatments);
    let mut out = Vec::with_capacity(g_len * t_len);
    for g in 0..g_len {
        for t in 0..t_len {
            let on = |b: bool| b as u8 as f64;
            let d = match &spec.design {
                Design::RandomBinary { p } => {
                    let mut rng = stream(spec.seed, DESIGN, (g * t_len + t) as u64);
                    (0..k).map(|_| on(rng.random_bool(*p))).collect()
                }
                Design::StandardDid { g1, t1, g2, t2 } => vec![
                    on(g + 1 >= *g1 && t + 1 >= *t1),
                    on(g + 1 >= *g2 && t + 1 >= *t2),
                ],
                Design::Explicit { treatments } => treatments[g][t].clone(),
                Design::Staggered { .. } => {
                    let (f1, f2) = dates.expect("staggered dates");
                    vec![on(t + 1 >= f1[g]), on(t + 1 >= f2[g])]
                }
            };
            out.push(d);
        }
    }
    out
}

fn cell_sizes(spec: &DgpSpec) -> Vec<f64> {
    let (g_len, t_len) = (spec.groups, spec.periods);
    match &spec.sizes {
        CellSizes::Unit => vec![1.0; g_len * t_len],
        CellSizes::RandomInt { max } => (0..g_len * t_len)
            .map(|i| stream(spec.seed, SIZES, i as u64).random_range(1..=*max) as f64)
            .collect(),
        CellSizes::Product { group, period, max } => {
            let draw = |offset: u64, len: usize| -> Vec<f64> {
                (0..len)
                    .map(|i| stream(spec.seed, SIZES, offset + i as u64).random_range(1..=*max) as f64)
                    .collect()
            };
            let a = group.clone().unwrap_or_else(|| draw(1 << 40, g_len));
            let b = period.clone().unwrap_or_else(|| draw(1 << 41, t_len));
            (0..g_len * t_len).map(|i| a[i / t_len] * b[i % t_len]).collect()
        }
    }
}

/// `θ_g + η_t + e_{g,t}` per cell.
fn baseline(spec: &DgpSpec) -> Vec<f64> {
    let (g_len, t_len) = (spec.groups, spec.periods);
    let (theta, eta): (Vec<f64>, Vec<f64>) = match &spec.baseline {
        Baseline::Random { scale } => (
            (0..g_len).map(|g| scale * normal_at(spec.seed, THETA, g as u64)).collect(),
            (0..t_len).map(|t| scale * normal_at(spec.seed, ETA, t as u64)).collect(),
        ),
        Baseline::Explicit { group, period } => (group.clone(), period.clone()),
    };
    (0..g_len * t_len)
        .map(|i| {
            let noise = if spec.noise > 0.0 {
                spec.noise * normal_at(spec.seed, NOISE, (spec.replication << 32) | i as u64)
            } else {
                0.0
            };
            theta[i / t_len] + eta[i % t_len] + noise
        })
        .collect()
}

/// `f(d, g, t)` for every mask of every cell, cell-major.
fn static_effects(spec: &DgpSpec) -> Vec<f64> {
    let (g_len, t_len, k) = (spec.groups, spec.periods, spec.treatments);
    let masks = 1usize << k;
    let mut out = vec![0.0; g_len * t_len * masks];
    match &spec.effects {
        Effects::Zero | Effects::Staggered { .. } => {}
        Effects::Constant { values } => {
            for (i, v) in out.iter_mut().enumerate() {
                let mask = i % masks;
                *v = (0..k).filter(|j| mask >> j & 1 == 1).map(|j| values[j]).sum();
            }
        }
        Effects::Additive { scale } => {
            for cell in 0..g_len * t_len {
                let mut rng = stream(spec.seed, EFFECT, cell as u64);
                let tau: Vec<f64> = (0..k).map(|_| scale * normal(&mut rng)).collect();
                for mask in 0..masks {
                    out[cell * masks + mask] = (0..k).filter(|j| mask >> j & 1 == 1).map(|j| tau[j]).sum();
                }
            }
        }
        Effects::Heterogeneous { scale } => {
            for cell in 0..g_len * t_len {
                let mut rng = stream(spec.seed, EFFECT, cell as u64);
                for mask in 1..masks {
                    out[cell * masks + mask] = scale * normal(&mut rng);
                }
            }
        }
        Effects::GroupTime { scale } => {
            let a: Vec<Vec<f64>> = (0..g_len)
                .map(|g| {
                    let mut rng = stream(spec.seed, EFFECT, (1 << 40) | g as u64);
                    (0..masks).map(|m| if m == 0 { 0.0 } else { scale * normal(&mut rng) }).collect()
                })
                .collect();
            let b: Vec<Vec<f64>> = (0..t_len)
                .map(|t| {
                    let mut rng = stream(spec.seed, EFFECT, (1 << 41) | t as u64);
                    (0..masks).map(|m| if m == 0 { 0.0 } else { scale * normal(&mut rng) }).collect()
                })
                .collect();
            for cell in 0..g_len * t_len {
                for mask in 0..masks {
                    out[cell * masks + mask] = a[cell / t_len][mask] + b[cell % t_len][mask];
                }
            }
        }
        Effects::Explicit { cells } => {
            for c in cells {
                let cell = (c.g - 1) * t_len + c.t - 1;
                out[cell * masks + StaticTruth::mask(&c.d)] = c.effect;
            }
        }
    }
    out
}

/// First-treatment-only and second-treatment effect per cell for the
/// staggered effect model (1-based dates).
fn staggered_effects(spec: &DgpSpec, f1: &[usize], f2: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let Effects::Staggered {
        scale,
        lambda,
        slope,
        second,
        violation,
    } = &spec.effects
    else {
        unreachable!("called for staggered effects only")
    };
    let (g_len, t_len) = (spec.groups, spec.periods);
    let lambda: Vec<f64> = lambda
        .clone()
        .unwrap_or_else(|| (0..g_len).map(|g| scale * normal_at(spec.seed, LAMBDA, g as u64)).collect());
    let mu = |f: usize, t: usize| match slope {
        Some(s) => s * (t as f64 - f as f64),
        None => scale * normal_at(spec.seed, MU, (f * (t_len + 2) + t) as u64),
    };
    let path = |g: usize, ell: usize| match second {
        Some(paths) => paths[g].get(ell).copied().unwrap_or(0.0),
        None => scale * normal_at(spec.seed, SECOND, (g * (t_len + 1) + ell) as u64),
    };
    let mut first_effect = vec![0.0; g_len * t_len];
    let mut second_effect = vec![0.0; g_len * t_len];
    for g in 0..g_len {
        let v = violation.as_ref().map_or(0.0, |v| v[g]);
        for t in 1..=t_len {
            let i = g * t_len + t - 1;
            if t >= f1[g] {
                first_effect[i] = lambda[g] + mu(f1[g], t) + v * (t - f1[g]) as f64;
            }
            if t >= f2[g] {
                second_effect[i] = path(g, t - f2[g]);
            }
        }
    }
    (first_effect, second_effect)
}

/// Build a synthetic panel. Groups are labelled `1..=G` and periods `1..=T`.
pub fn generate(spec: &DgpSpec) -> Result<SyntheticPanel> {
    spec.validate()?;
    let (g_len, t_len, k) = (spec.groups, spec.periods, spec.treatments);
    let dates = match &spec.design {
        Design::Staggered { first, second } => Some(match (first, second) {
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            (Some(a), None) => {
                let b = a
                    .iter()
                    .enumerate()
                    .map(|(g, &f1)| stream(spec.seed, DATES, g as u64).random_range(f1..=t_len + 1))
                    .collect();
                (a.clone(), b)
            }
            _ => random_dates(spec),
        }),
        _ => None,
    };
    let d = realized_treatments(spec, dates.as_ref());
    let n = cell_sizes(spec);
    let base = baseline(spec);

    let (y, static_truth, staggered_truth);
    if let (Effects::Staggered { .. }, Some((f1, f2))) = (&spec.effects, &dates) {
        let (first, second) = staggered_effects(spec, f1, f2);
        let y_first_only: Vec<f64> = base.iter().zip(&first).map(|(b, e)| b + e).collect();
        y = y_first_only.iter().zip(&second).map(|(a, s)| a + s).collect::<Vec<_>>();
        static_truth = None;
        staggered_truth = Some(StaggeredTruth {
            f1: f1.iter().map(|f| f - 1).collect(),
            f2: f2.iter().map(|f| f - 1).collect(),
            y_never: base.clone(),
            y_first_only,
        });
    } else {
        let effects = static_effects(spec);
        let masks = 1usize << k;
        let outcomes: Vec<f64> = (0..g_len * t_len * masks).map(|i| base[i / masks] + effects[i]).collect();
        let truth = StaticTruth { treatments: k, outcomes };
        y = (0..g_len * t_len)
            .map(|i| truth.outcomes[i * masks + StaticTruth::mask(&d[i])])
            .collect();
        staggered_truth = dates.as_ref().map(|(f1, f2)| StaggeredTruth {
            f1: f1.iter().map(|f| f - 1).collect(),
            f2: f2.iter().map(|f| f - 1).collect(),
            y_never: base.clone(),
            y_first_only: (0..g_len * t_len)
                .map(|i| truth.outcomes[i * masks + StaticTruth::mask(&[d[i][0], 0.0])])
                .collect(),
        });
        static_truth = Some(truth);
    }

    let rows: Vec<PanelRow> = (0..g_len * t_len)
        .map(|i| {
            PanelRow::new((i / t_len + 1).to_string(), (i % t_len + 1) as i64, y[i], d[i].clone()).with_n(n[i])
        })
        .collect();
    let panel = load_panel(&rows, LoadOptions::default())?;
    Ok(SyntheticPanel {
        spec: spec.clone(),
        panel,
        static_truth,
        staggered_truth,
    })
}

impl SyntheticPanel {
    fn static_truth(&self) -> Result<&StaticTruth> {
        self.static_truth
            .as_ref()
            .ok_or(Error::MissingPotentialOutcomes("static potential outcomes"))
    }

    fn staggered_truth(&self) -> Result<&StaggeredTruth> {
        self.staggered_truth
            .as_ref()
            .ok_or(Error::MissingPotentialOutcomes("staggered adoption paths"))
    }

    /// `Δ^k_{g,t}(D^{-k}) = Y(1, D^{-k}) - Y(0, D^{-k})`.
    pub fn own_effect(&self, g: usize, t: usize, k: usize) -> Result<f64> {
        let truth = self.static_truth()?;
        let mut d = self.panel.treatments(g, t).to_vec();
        d[k] = 1.0;
        let on = truth.outcome(&self.panel, g, t, &d);
        d[k] = 0.0;
        Ok(on - truth.outcome(&self.panel, g, t, &d))
    }

    /// `Δ^{-k}_{g,t} = Y(0, D^{-k}) - Y(0, 0)`.
    pub fn other_effect(&self, g: usize, t: usize, k: usize) -> Result<f64> {
        let truth = self.static_truth()?;
        let mut d = self.panel.treatments(g, t).to_vec();
        d[k] = 0.0;
        let zero = vec![0.0; d.len()];
        Ok(truth.outcome(&self.panel, g, t, &d) - truth.outcome(&self.panel, g, t, &zero))
    }
}

/// Right-hand side of the weight decomposition, evaluated from the stored
/// treatment effects: `Σ_own W Δ^k(D^{-k}) + Σ_contamination W Δ^{-k}`.
pub fn decomposition_rhs(synthetic: &SyntheticPanel, decomp: &WeightDecomposition) -> Result<f64> {
    let k = decomp.target;
    let mut total = 0.0;
    for c in &decomp.own {
        total += c.weight * synthetic.own_effect(c.g, c.t, k)?;
    }
    for c in &decomp.contamination {
        total += c.weight * synthetic.other_effect(c.g, c.t, k)?;
    }
    Ok(total)
}

/// Average effect over the switcher set of moving the target treatment from
/// 0 to 1 (per unit of change for discrete moves), other treatments held at
/// their observed values. Zero when the switcher set is empty.
pub fn delta_s_oracle(synthetic: &SyntheticPanel, target: usize) -> Result<f64> {
    let truth = synthetic.static_truth()?;
    let panel = &synthetic.panel;
    let set = find_switchers(panel, target)?;
    if set.n_s == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in &set.cells {
        let mut d = panel.treatments(s.g, s.t).to_vec();
        d[target] = s.to;
        let y_to = truth.outcome(panel, s.g, s.t, &d);
        d[target] = s.from;
        let y_from = truth.outcome(panel, s.g, s.t, &d);
        total += panel.n(s.g, s.t) * (y_to - y_from) / (s.to - s.from);
    }
    Ok(total / set.n_s)
}

/// Average cumulative effect of `ℓ + 1` periods of the second treatment,
/// first treatment at its observed path, over the units entering `DID_ℓ`.
pub fn delta_ell_oracle(synthetic: &SyntheticPanel, structure: &CohortStructure, ell: usize) -> Result<f64> {
    if ell > structure.l_nt {
        return Err(Error::HorizonOutOfRange {
            ell,
            max: structure.l_nt,
        });
    }
    let truth = synthetic.staggered_truth()?;
    let panel = &synthetic.panel;
    let (mut n_ell, mut total) = (0.0, 0.0);
    for &f in &structure.eligible {
        for t in ell + f + 1..=structure.nt[&f] {
            for g in (0..panel.n_groups()).filter(|&g| truth.f1[g] == f && truth.f2[g] == t - ell) {
                let i = panel.cell_index(g, t);
                n_ell += panel.n(g, t);
                total += panel.n(g, t) * (panel.outcomes()[i] - truth.y_first_only[i]);
            }
        }
    }
    Ok(total / n_ell)
}

/// Closed-form first stage of the two-treatment standard DID design with
/// cell sizes `n_{g,t} ∝ a_g b_t` (1-based `g1 < g2`, `t1 < t2`).
#[derive(Debug, Clone, PartialEq)]
pub struct StandardDidFirstStage {
    pub zeta: f64,
    /// `ε_{g,t}` in storage order.
    pub residuals: Vec<f64>,
}

pub fn standard_did_first_stage(panel: &PanelDataset, g1: usize, t1: usize, g2: usize, t2: usize) -> StandardDidFirstStage {
    let (g_len, t_len) = (panel.n_groups(), panel.n_periods());
    let total = panel.total_n();
    let a: Vec<f64> = (0..g_len)
        .map(|g| (0..t_len).map(|t| panel.n(g, t)).sum::<f64>() / total)
        .collect();
    let b: Vec<f64> = (0..t_len)
        .map(|t| (0..g_len).map(|g| panel.n(g, t)).sum::<f64>() / total)
        .collect();
    let ind = |x: usize, from: usize| ((x + 1) >= from) as u8 as f64;
    let share = |w: &[f64], from: usize| w.iter().enumerate().map(|(i, v)| v * ind(i, from)).sum::<f64>();
    let (p1g, p1t, p2g, p2t) = (share(&a, g1), share(&b, t1), share(&a, g2), share(&b, t2));
    let zeta = (1.0 - p1g) * (1.0 - p1t) / ((1.0 - p2g) * (1.0 - p2t));
    let residuals = (0..g_len * t_len)
        .map(|i| {
            let (g, t) = (i / t_len, i % t_len);
            (ind(g, g1) - p1g) * (ind(t, t1) - p1t) - zeta * (ind(g, g2) - p2g) * (ind(t, t2) - p2t)
        })
        .collect();
    StandardDidFirstStage { zeta, residuals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{decompose, first_stage, twfe_coefficient};
    use crate::didm::didm;
    use crate::staggered::{build_cohorts, did_ell};

    fn spec(design: Design, treatments: usize, effects: Effects) -> DgpSpec {
        DgpSpec {
            groups: 6,
            periods: 4,
            treatments,
            design,
            effects,
            baseline: Baseline::default(),
            noise: 0.0,
            sizes: CellSizes::Unit,
            seed: 7,
            replication: 0,
        }
    }

    #[test]
    fn generation_is_deterministic_and_consistent() {
        let s = DgpSpec {
            noise: 0.3,
            sizes: CellSizes::RandomInt { max: 5 },
            ..spec(Design::RandomBinary { p: 0.4 }, 3, Effects::Heterogeneous { scale: 1.0 })
        };
        let a = generate(&s).unwrap();
        assert_eq!(a, generate(&s).unwrap());
        let truth = a.static_truth.as_ref().unwrap();
        for g in 0..6 {
            for t in 0..4 {
                let d = a.panel.treatments(g, t);
                assert_eq!(a.panel.y(g, t), truth.outcome(&a.panel, g, t, d));
            }
        }
    }

    #[test]
    fn replication_changes_noise_only() {
        let s = DgpSpec {
            noise: 1.0,
            ..spec(Design::RandomBinary { p: 0.5 }, 2, Effects::Zero)
        };
        let a = generate(&s).unwrap();
        let b = generate(&DgpSpec { replication: 1, ..s }).unwrap();
        assert_ne!(a.panel.outcomes(), b.panel.outcomes());
        for g in 0..6 {
            for t in 0..4 {
                assert_eq!(a.panel.treatments(g, t), b.panel.treatments(g, t));
            }
        }
    }

    #[test]
    fn null_dgp_is_additive() {
        let s = DgpSpec {
            baseline: Baseline::Explicit {
                group: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
                period: vec![10.0, 20.0, 30.0, 40.0],
            },
            ..spec(Design::RandomBinary { p: 0.5 }, 2, Effects::Zero)
        };
        let syn = generate(&s).unwrap();
        for g in 0..6 {
            for t in 0..4 {
                assert_eq!(syn.panel.y(g, t), g as f64 + 10.0 * (t + 1) as f64);
            }
        }
        assert_eq!(didm(&syn.panel, 0).unwrap().estimate, 0.0);
    }

    #[test]
    fn standard_did_matches_closed_form() {
        let s = DgpSpec {
            groups: 3,
            periods: 3,
            ..spec(
                Design::StandardDid {
                    g1: 2,
                    t1: 2,
                    g2: 3,
                    t2: 3,
                },
                2,
                Effects::Zero,
            )
        };
        let syn = generate(&s).unwrap();
        let closed = standard_did_first_stage(&syn.panel, 2, 2, 3, 3);
        assert!((closed.zeta - 0.25).abs() < 1e-15);
        assert!((closed.residuals[4] - 1.0 / 12.0).abs() < 1e-15);
        let fs = first_stage(&syn.panel, 0).unwrap();
        assert!((fs.coef_other[0] - 0.25).abs() < 1e-12);
        for (a, b) in fs.residuals.iter().zip(&closed.residuals) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_identity_on_heterogeneous_effects() {
        let s = spec(Design::RandomBinary { p: 0.5 }, 2, Effects::Heterogeneous { scale: 2.0 });
        let syn = generate(&s).unwrap();
        let dec = decompose(&syn.panel, 0).unwrap();
        let rhs = decomposition_rhs(&syn, &dec).unwrap();
        assert!((dec.beta_fe - rhs).abs() < 1e-9, "{} vs {rhs}", dec.beta_fe);
    }

    #[test]
    fn constant_effects_are_recovered() {
        let s = spec(
            Design::RandomBinary { p: 0.5 },
            2,
            Effects::Constant {
                values: vec![2.0, -1.0],
            },
        );
        let syn = generate(&s).unwrap();
        assert!((twfe_coefficient(&syn.panel, 0).unwrap() - 2.0).abs() < 1e-10);
        let ds = delta_s_oracle(&syn, 0).unwrap();
        assert!(ds == 0.0 || (ds - 2.0).abs() < 1e-12);
    }

    fn abc_spec() -> DgpSpec {
        DgpSpec {
            groups: 3,
            periods: 4,
            treatments: 2,
            design: Design::Staggered {
                first: Some(vec![2, 2, 2]),
                second: Some(vec![3, 5, 4]),
            },
            effects: Effects::Staggered {
                scale: 1.0,
                lambda: Some(vec![1.0, 2.0, 0.0]),
                slope: Some(0.5),
                second: Some(vec![vec![10.0, 12.0], vec![], vec![7.0]]),
                violation: None,
            },
            baseline: Baseline::Explicit {
                group: vec![0.0; 3],
                period: vec![1.0, 2.0, 3.0, 4.0],
            },
            noise: 0.0,
            sizes: CellSizes::Unit,
            seed: 0,
            replication: 0,
        }
    }

    #[test]
    fn staggered_fixture_outcomes_and_oracle() {
        let syn = generate(&abc_spec()).unwrap();
        let expected = [[1.0, 3.0, 14.5, 18.0], [1.0, 4.0, 5.5, 7.0], [1.0, 2.0, 3.5, 12.0]];
        for (g, row) in expected.iter().enumerate() {
            for (t, y) in row.iter().enumerate() {
                assert_eq!(syn.panel.y(g, t), *y);
            }
        }
        let s = build_cohorts(&syn.panel, 0, 1).unwrap();
        assert_eq!(delta_ell_oracle(&syn, &s, 0).unwrap(), 8.5);
        assert_eq!(delta_ell_oracle(&syn, &s, 1).unwrap(), 12.0);
        assert_eq!(did_ell(&syn.panel, &s, 0).unwrap().estimate, 8.5);
        assert!(matches!(
            delta_ell_oracle(&syn, &s, 2),
            Err(Error::HorizonOutOfRange { .. })
        ));
    }

    #[test]
    fn missing_truths_are_reported() {
        let syn = generate(&spec(Design::RandomBinary { p: 0.5 }, 2, Effects::Zero)).unwrap();
        let dec = decompose(&syn.panel, 0).unwrap();
        let stripped = SyntheticPanel {
            static_truth: None,
            ..syn
        };
        assert_eq!(
            decomposition_rhs(&stripped, &dec),
            Err(Error::MissingPotentialOutcomes("static potential outcomes"))
        );
        let staggered = generate(&abc_spec()).unwrap();
        assert_eq!(
            delta_s_oracle(&staggered, 0),
            Err(Error::MissingPotentialOutcomes("static potential outcomes"))
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = spec(
            Design::StandardDid {
                g1: 1,
                t1: 2,
                g2: 3,
                t2: 3,
            },
            2,
            Effects::Zero,
        );
        assert!(matches!(generate(&bad), Err(Error::InvalidSpec(_))));
        let bad = spec(Design::RandomBinary { p: 0.5 }, 2, Effects::Constant { values: vec![1.0] });
        assert!(matches!(generate(&bad), Err(Error::InvalidSpec(_))));
        assert!(matches!(DgpSpec::from_json("{\"groups\": 2}"), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn spec_json_round_trip() {
        let s = abc_spec();
        assert_eq!(DgpSpec::from_json(&s.to_json()).unwrap(), s);
        let parsed = DgpSpec::from_json(
            r#"{"groups": 4, "periods": 3, "treatments": 2,
                "design": {"kind": "random_binary", "p": 0.5},
                "effects": {"kind": "constant", "values": [1, 2]}}"#,
        )
        .unwrap();
        assert_eq!(parsed.noise, 0.0);
        assert_eq!(parsed.sizes, CellSizes::Unit);
    }
}
