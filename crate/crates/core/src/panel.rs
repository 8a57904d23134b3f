//! Panel data model: a balanced grid of group × period cells, each carrying a
//! cell size, an outcome mean and `K` treatment values.
//!
//! Cells are stored row-major by group, so cell `(g, t)` lives at index
//! `g * T + t` (both zero-based). Period labels are arbitrary ordered
//! integers and are densely reindexed, so "the previous period" always means
//! the previous *observed* period.
//!
//! Cell sizes are positive reals rather than counts so that externally
//! weighted panels can be used. They only ever enter as weights; the finite
//! sample identities of the estimators hold for any positive weights, but
//! interpreting `N_k` as a number of treated units requires integer sizes.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Absolute tolerance for treatment-value comparisons.
pub const TREATMENT_TOL: f64 = 1e-12;

/// Equality of treatment values up to [`TREATMENT_TOL`].
pub fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= TREATMENT_TOL
}

/// Element-wise [`same_value`] on treatment vectors.
pub fn same_vector(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| same_value(*x, *y))
}

pub fn is_binary_value(v: f64) -> bool {
    same_value(v, 0.0) || same_value(v, 1.0)
}

/// One input row: a cell, or a micro observation before aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub group: String,
    pub period: i64,
    pub y: f64,
    pub n: Option<f64>,
    pub d: Vec<f64>,
}

impl PanelRow {
    pub fn new(group: impl Into<String>, period: i64, y: f64, d: Vec<f64>) -> Self {
        Self {
            group: group.into(),
            period,
            y,
            n: None,
            d,
        }
    }

    pub fn with_n(mut self, n: f64) -> Self {
        self.n = Some(n);
        self
    }
}

/// A validated cell of a [`PanelDataset`], with original labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelCell {
    pub group_id: String,
    pub period: i64,
    pub n: f64,
    pub y: f64,
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub binary_required: bool,
}

/// Balanced, immutable G × T panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    group_labels: Vec<String>,
    period_labels: Vec<i64>,
    group_lookup: HashMap<String, usize>,
    treatment_names: Vec<String>,
    k: usize,
    n: Vec<f64>,
    y: Vec<f64>,
    // cells × K, row-major
    d: Vec<f64>,
    binary: bool,
    total_n: f64,
}

impl PanelDataset {
    pub fn n_groups(&self) -> usize {
        self.group_labels.len()
    }

    pub fn n_periods(&self) -> usize {
        self.period_labels.len()
    }

    pub fn n_treatments(&self) -> usize {
        self.k
    }

    pub fn n_cells(&self) -> usize {
        self.n.len()
    }

    #[inline]
    pub fn cell_index(&self, g: usize, t: usize) -> usize {
        g * self.period_labels.len() + t
    }

    #[inline]
    pub fn n(&self, g: usize, t: usize) -> f64 {
        self.n[self.cell_index(g, t)]
    }

    #[inline]
    pub fn y(&self, g: usize, t: usize) -> f64 {
        self.y[self.cell_index(g, t)]
    }

    /// Value of treatment `k` (zero-based) in cell `(g, t)`.
    #[inline]
    pub fn d(&self, g: usize, t: usize, k: usize) -> f64 {
        self.d[self.cell_index(g, t) * self.k + k]
    }

    /// All `K` treatment values of cell `(g, t)`.
    #[inline]
    pub fn treatments(&self, g: usize, t: usize) -> &[f64] {
        let i = self.cell_index(g, t) * self.k;
        &self.d[i..i + self.k]
    }

    /// Cell sizes in storage order.
    pub fn sizes(&self) -> &[f64] {
        &self.n
    }

    /// Outcomes in storage order.
    pub fn outcomes(&self) -> &[f64] {
        &self.y
    }

    /// Column of treatment `k` in storage order.
    pub fn treatment_column(&self, k: usize) -> Vec<f64> {
        self.d.chunks(self.k).map(|row| row[k]).collect()
    }

    pub fn group_label(&self, g: usize) -> &str {
        &self.group_labels[g]
    }

    pub fn group_labels(&self) -> &[String] {
        &self.group_labels
    }

    pub fn period_label(&self, t: usize) -> i64 {
        self.period_labels[t]
    }

    pub fn period_labels(&self) -> &[i64] {
        &self.period_labels
    }

    pub fn group_index(&self, label: &str) -> Option<usize> {
        self.group_lookup.get(label).copied()
    }

    pub fn period_index(&self, label: i64) -> Option<usize> {
        self.period_labels.binary_search(&label).ok()
    }

    pub fn treatment_names(&self) -> &[String] {
        &self.treatment_names
    }

    pub fn treatment_index(&self, name: &str) -> Option<usize> {
        self.treatment_names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(name))
    }

    /// Whether every treatment value is 0 or 1 (within tolerance).
    pub fn is_binary(&self) -> bool {
        self.binary
    }

    /// Whether treatment `k` only takes values 0 or 1.
    pub fn is_binary_treatment(&self, k: usize) -> bool {
        self.d.chunks(self.k).all(|row| is_binary_value(row[k]))
    }

    /// `N = Σ N_{g,t}`, summed by group then period.
    pub fn total_n(&self) -> f64 {
        self.total_n
    }

    /// `N_k = Σ N_{g,t} D^k_{g,t}`.
    pub fn treated_count(&self, k: usize) -> f64 {
        self.n
            .iter()
            .zip(self.d.chunks(self.k))
            .map(|(n, row)| n * row[k])
            .sum()
    }

    pub fn cell(&self, g: usize, t: usize) -> PanelCell {
        PanelCell {
            group_id: self.group_labels[g].clone(),
            period: self.period_labels[t],
            n: self.n(g, t),
            y: self.y(g, t),
            d: self.treatments(g, t).to_vec(),
        }
    }

    /// Cells in storage order (group-major).
    pub fn cells(&self) -> impl Iterator<Item = PanelCell> + '_ {
        let t_len = self.n_periods();
        (0..self.n_cells()).map(move |i| self.cell(i / t_len, i % t_len))
    }

    pub fn check_treatment(&self, k: usize) -> Result<()> {
        if k >= self.k {
            return Err(Error::TreatmentOutOfRange {
                index: k,
                k: self.k,
            });
        }
        Ok(())
    }

    /// Same panel with the outcome replaced (storage order).
    pub fn with_outcomes(&self, y: Vec<f64>) -> Self {
        assert_eq!(y.len(), self.n_cells(), "outcome length mismatch");
        let mut out = self.clone();
        out.y = y;
        out
    }

    /// Same panel with renamed treatments.
    pub fn with_treatment_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.k, "treatment name count mismatch");
        self.treatment_names = names;
        self
    }

    /// Same panel with an extra treatment column appended.
    pub fn with_extra_treatment(&self, name: &str, column: &[f64]) -> Self {
        assert_eq!(column.len(), self.n_cells(), "column length mismatch");
        let k = self.k + 1;
        let mut d = Vec::with_capacity(self.n_cells() * k);
        for (row, v) in self.d.chunks(self.k).zip(column) {
            d.extend_from_slice(row);
            d.push(*v);
        }
        let mut names = self.treatment_names.clone();
        names.push(name.to_string());
        let binary = self.binary && column.iter().all(|v| is_binary_value(*v));
        Self {
            k,
            d,
            treatment_names: names,
            binary,
            ..self.clone()
        }
    }

    /// Sub-panel keeping the listed groups, in the listed order. Groups may
    /// repeat (bootstrap resampling); repeated groups get a `#r` suffix so
    /// labels stay unique.
    pub fn select_groups(&self, groups: &[usize]) -> Self {
        let t_len = self.n_periods();
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let mut labels = Vec::with_capacity(groups.len());
        let mut n = Vec::with_capacity(groups.len() * t_len);
        let mut y = Vec::with_capacity(groups.len() * t_len);
        let mut d = Vec::with_capacity(groups.len() * t_len * self.k);
        for &g in groups {
            let copy = seen.entry(g).or_insert(0);
            let label = if *copy == 0 {
                self.group_labels[g].clone()
            } else {
                format!("{}#{}", self.group_labels[g], copy)
            };
            *copy += 1;
            labels.push(label);
            let start = self.cell_index(g, 0);
            n.extend_from_slice(&self.n[start..start + t_len]);
            y.extend_from_slice(&self.y[start..start + t_len]);
            d.extend_from_slice(&self.d[start * self.k..(start + t_len) * self.k]);
        }
        let group_lookup = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        let total_n = n.iter().sum();
        let binary = d.iter().all(|v| is_binary_value(*v));
        Self {
            group_labels: labels,
            period_labels: self.period_labels.clone(),
            group_lookup,
            treatment_names: self.treatment_names.clone(),
            k: self.k,
            n,
            y,
            d,
            binary,
            total_n,
        }
    }

    /// Serialize as long-format CSV (`g,t,y,n,<treatments>`). Floats use the
    /// shortest representation that round-trips exactly.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["g".to_string(), "t".into(), "y".into(), "n".into()];
        header.extend(self.treatment_names.iter().cloned());
        w.write_record(&header)?;
        for cell in self.cells() {
            let mut record = vec![
                cell.group_id,
                cell.period.to_string(),
                cell.y.to_string(),
                cell.n.to_string(),
            ];
            record.extend(cell.d.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Validate cell rows into a balanced panel.
///
/// Periods are reindexed to `0..T` in ascending label order; groups keep the
/// order of their first appearance. Missing cell sizes default to 1.
pub fn load_panel(rows: &[PanelRow], options: LoadOptions) -> Result<PanelDataset> {
    let names = rows
        .first()
        .map(|r| (1..=r.d.len()).map(|i| format!("d{i}")).collect())
        .unwrap_or_default();
    load_panel_named(rows, names, options)
}

/// [`load_panel`] with explicit treatment names.
pub fn load_panel_named(
    rows: &[PanelRow],
    treatment_names: Vec<String>,
    options: LoadOptions,
) -> Result<PanelDataset> {
    let first = rows.first().ok_or(Error::EmptyInput)?;
    let k = first.d.len();
    if treatment_names.len() != k {
        return Err(Error::InvalidConfig(format!(
            "{} treatment names for {} treatments",
            treatment_names.len(),
            k
        )));
    }

    let mut group_labels: Vec<String> = Vec::new();
    let mut group_lookup: HashMap<String, usize> = HashMap::new();
    let mut periods: Vec<i64> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.d.len() != k {
            return Err(Error::MalformedRow {
                row: i,
                reason: format!("expected {} treatment values, found {}", k, row.d.len()),
            });
        }
        if !row.y.is_finite() || row.d.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedRow {
                row: i,
                reason: "non-finite value".into(),
            });
        }
        if !group_lookup.contains_key(&row.group) {
            group_lookup.insert(row.group.clone(), group_labels.len());
            group_labels.push(row.group.clone());
        }
        periods.push(row.period);
    }
    periods.sort_unstable();
    periods.dedup();

    let g_len = group_labels.len();
    let t_len = periods.len();
    if g_len < 2 || t_len < 2 {
        return Err(Error::InsufficientVariation {
            groups: g_len,
            periods: t_len,
        });
    }

    let mut filled = vec![false; g_len * t_len];
    let mut n = vec![0.0; g_len * t_len];
    let mut y = vec![0.0; g_len * t_len];
    let mut d = vec![0.0; g_len * t_len * k];
    for row in rows {
        let g = group_lookup[&row.group];
        let t = periods.binary_search(&row.period).expect("period indexed");
        let idx = g * t_len + t;
        if filled[idx] {
            return Err(Error::DuplicateCell {
                group: row.group.clone(),
                period: row.period,
            });
        }
        let size = row.n.unwrap_or(1.0);
        if !size.is_finite() || size <= 0.0 {
            return Err(Error::NonPositiveWeight {
                group: row.group.clone(),
                period: row.period,
                n: size,
            });
        }
        if options.binary_required {
            if let Some(j) = row.d.iter().position(|v| !is_binary_value(*v)) {
                return Err(Error::NonBinaryTreatment {
                    treatment: treatment_names[j].clone(),
                    group: row.group.clone(),
                    period: row.period,
                    value: row.d[j],
                });
            }
        }
        filled[idx] = true;
        n[idx] = size;
        y[idx] = row.y;
        d[idx * k..(idx + 1) * k].copy_from_slice(&row.d);
    }
    if let Some(idx) = filled.iter().position(|f| !f) {
        return Err(Error::UnbalancedPanel {
            group: group_labels[idx / t_len].clone(),
            period: periods[idx % t_len],
        });
    }

    let binary = d.iter().all(|v| is_binary_value(*v));
    let total_n = n.iter().sum();
    Ok(PanelDataset {
        group_labels,
        period_labels: periods,
        group_lookup,
        treatment_names,
        k,
        n,
        y,
        d,
        binary,
        total_n,
    })
}

/// Collapse micro observations into one row per `(group, period)` cell.
///
/// `y` becomes the cell mean and `n` the number of micro rows. Input `n`
/// values are ignored. All rows of a cell must carry identical treatments.
/// Output cells follow the order in which cells first appear.
pub fn aggregate_micro(micro_rows: &[PanelRow]) -> Result<Vec<PanelRow>> {
    let mut order: Vec<(String, i64)> = Vec::new();
    let mut acc: HashMap<(String, i64), (f64, usize, Vec<f64>)> = HashMap::new();
    for row in micro_rows {
        let key = (row.group.clone(), row.period);
        match acc.get_mut(&key) {
            Some((sum, count, d)) => {
                if d.len() != row.d.len() {
                    return Err(Error::MalformedRow {
                        row: *count,
                        reason: "treatment count differs within cell".into(),
                    });
                }
                if let Some(j) = d.iter().zip(&row.d).position(|(a, b)| !same_value(*a, *b)) {
                    return Err(Error::NonSharpDesign {
                        group: row.group.clone(),
                        period: row.period,
                        treatment: j,
                    });
                }
                *sum += row.y;
                *count += 1;
            }
            None => {
                order.push(key.clone());
                acc.insert(key, (row.y, 1, row.d.clone()));
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let (sum, count, d) = acc.remove(&key).expect("cell accumulated");
            PanelRow {
                group: key.0,
                period: key.1,
                y: sum / count as f64,
                n: Some(count as f64),
                d,
            }
        })
        .collect())
}

/// Result of reading a CSV file.
#[derive(Debug, Clone)]
pub struct CsvPanel {
    pub rows: Vec<PanelRow>,
    pub treatment_names: Vec<String>,
    /// Columns present in the header but not used.
    pub ignored_columns: Vec<String>,
}

/// Parse long-format CSV with columns `g,t,y[,n],<treatments>`.
///
/// Column names match case-insensitively. When `treatments` is `None`, the
/// treatment columns are every column named `d<integer>`, ordered by that
/// integer.
pub fn read_csv_rows<R: Read>(reader: R, treatments: Option<&[String]>) -> Result<CsvPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));

    let g_col = find("g").ok_or_else(|| Error::MissingColumn("g".into()))?;
    let t_col = find("t").ok_or_else(|| Error::MissingColumn("t".into()))?;
    let y_col = find("y").ok_or_else(|| Error::MissingColumn("y".into()))?;
    let n_col = find("n");

    let (d_cols, names): (Vec<usize>, Vec<String>) = match treatments {
        Some(list) => {
            let mut cols = Vec::with_capacity(list.len());
            for name in list {
                cols.push(find(name).ok_or_else(|| Error::MissingColumn(name.clone()))?);
            }
            (cols, list.to_vec())
        }
        None => {
            let mut found: Vec<(u32, usize)> = headers
                .iter()
                .enumerate()
                .filter_map(|(i, h)| {
                    let rest = h.strip_prefix('d').or_else(|| h.strip_prefix('D'))?;
                    rest.parse::<u32>().ok().map(|num| (num, i))
                })
                .collect();
            found.sort_unstable();
            if found.is_empty() {
                return Err(Error::MissingColumn("d1".into()));
            }
            let cols: Vec<usize> = found.iter().map(|(_, i)| *i).collect();
            let names = cols.iter().map(|i| headers[*i].clone()).collect();
            (cols, names)
        }
    };

    let mut used = vec![g_col, t_col, y_col];
    used.extend(n_col);
    used.extend(&d_cols);
    let ignored_columns = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !used.contains(i))
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |col: usize| -> Result<&str> {
            record.get(col).ok_or_else(|| Error::MalformedRow {
                row: i + 1,
                reason: format!("missing field `{}`", headers[col]),
            })
        };
        let number = |col: usize| -> Result<f64> {
            let raw = field(col)?;
            raw.parse::<f64>().map_err(|_| Error::MalformedRow {
                row: i + 1,
                reason: format!("column `{}`: cannot parse `{}` as a number", headers[col], raw),
            })
        };
        let period_raw = field(t_col)?;
        let period = period_raw.parse::<i64>().map_err(|_| Error::MalformedRow {
            row: i + 1,
            reason: format!("period `{period_raw}` is not an integer"),
        })?;
        let n = match n_col {
            Some(c) if !field(c)?.is_empty() => Some(number(c)?),
            _ => None,
        };
        let d = d_cols.iter().map(|c| number(*c)).collect::<Result<Vec<_>>>()?;
        rows.push(PanelRow {
            group: field(g_col)?.to_string(),
            period,
            y: number(y_col)?,
            n,
            d,
        });
    }
    Ok(CsvPanel {
        rows,
        treatment_names: names,
        ignored_columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(groups: usize, periods: usize, k: usize) -> Vec<PanelRow> {
        let mut rows = Vec::new();
        for g in 0..groups {
            for t in 0..periods {
                rows.push(PanelRow::new(
                    format!("g{g}"),
                    t as i64 + 1,
                    (g * 10 + t) as f64,
                    vec![0.0; k],
                ));
            }
        }
        rows
    }

    #[test]
    fn four_group_two_period_panel() {
        let panel = load_panel(&grid(4, 2, 2), LoadOptions::default()).unwrap();
        assert_eq!(panel.n_groups(), 4);
        assert_eq!(panel.n_periods(), 2);
        assert_eq!(panel.n_treatments(), 2);
        assert_eq!(panel.total_n(), 8.0);
        assert!(panel.is_binary());
    }

    #[test]
    fn single_cell_is_insufficient() {
        let rows = vec![PanelRow::new("1", 1, 0.0, vec![0.0])];
        assert!(matches!(
            load_panel(&rows, LoadOptions::default()),
            Err(Error::InsufficientVariation { groups: 1, periods: 1 })
        ));
    }

    #[test]
    fn missing_cell_is_unbalanced() {
        let rows: Vec<_> = grid(3, 3, 1)
            .into_iter()
            .filter(|r| !(r.group == "g1" && r.period == 3))
            .collect();
        assert_eq!(
            load_panel(&rows, LoadOptions::default()),
            Err(Error::UnbalancedPanel {
                group: "g1".into(),
                period: 3
            })
        );
    }

    #[test]
    fn duplicate_and_weight_errors() {
        let mut rows = grid(2, 2, 1);
        rows.push(rows[0].clone());
        assert!(matches!(
            load_panel(&rows, LoadOptions::default()),
            Err(Error::DuplicateCell { .. })
        ));
        let mut rows = grid(2, 2, 1);
        rows[1].n = Some(0.0);
        assert!(matches!(
            load_panel(&rows, LoadOptions::default()),
            Err(Error::NonPositiveWeight { .. })
        ));
    }

    #[test]
    fn binary_requirement() {
        let mut rows = grid(2, 2, 2);
        rows[3].d[1] = 0.5;
        let opts = LoadOptions { binary_required: true };
        assert!(matches!(
            load_panel(&rows, opts),
            Err(Error::NonBinaryTreatment { .. })
        ));
        let panel = load_panel(&rows, LoadOptions::default()).unwrap();
        assert!(!panel.is_binary());
        assert!(panel.is_binary_treatment(0));
        // within tolerance still counts as binary
        rows[3].d[1] = 1.0 + 1e-13;
        assert!(load_panel(&rows, opts).is_ok());
    }

    #[test]
    fn non_consecutive_periods_are_reindexed() {
        let mut rows = Vec::new();
        for g in ["a", "b"] {
            for t in [1997, 1987, 1992] {
                rows.push(PanelRow::new(g, t, t as f64, vec![0.0]));
            }
        }
        let panel = load_panel(&rows, LoadOptions::default()).unwrap();
        assert_eq!(panel.period_labels(), &[1987, 1992, 1997]);
        assert_eq!(panel.y(1, 2), 1997.0);
        assert_eq!(panel.period_index(1992), Some(1));
    }

    #[test]
    fn aggregate_means_and_counts() {
        let micro = vec![
            PanelRow::new("1", 1, 1.0, vec![1.0, 0.0]),
            PanelRow::new("1", 1, 3.0, vec![1.0, 0.0]),
            PanelRow::new("2", 1, 5.0, vec![0.0, 0.0]),
        ];
        let cells = aggregate_micro(&micro).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].y, 2.0);
        assert_eq!(cells[0].n, Some(2.0));
        assert_eq!(cells[0].d, vec![1.0, 0.0]);
        assert_eq!(cells[1].y, 5.0);
        assert_eq!(cells[1].n, Some(1.0));
    }

    #[test]
    fn aggregate_rejects_non_sharp_cells() {
        let micro = vec![
            PanelRow::new("1", 1, 1.0, vec![1.0, 0.0]),
            PanelRow::new("1", 1, 3.0, vec![0.0, 0.0]),
        ];
        assert!(matches!(
            aggregate_micro(&micro),
            Err(Error::NonSharpDesign { treatment: 0, .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_column_handling() {
        let mut rows = grid(3, 2, 2);
        rows[2].n = Some(2.5);
        rows[4].y = 0.1 + 0.2;
        rows[5].d[1] = 1.0;
        let panel = load_panel(&rows, LoadOptions::default()).unwrap();
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        let parsed = read_csv_rows(buf.as_slice(), None).unwrap();
        assert_eq!(parsed.treatment_names, vec!["d1", "d2"]);
        assert!(parsed.ignored_columns.is_empty());
        let back = load_panel_named(&parsed.rows, parsed.treatment_names, LoadOptions::default())
            .unwrap();
        assert_eq!(back, panel);

        let text = "G,T,Y,extra,D2,D1\na,1,1.5,x,0,1\n";
        let parsed = read_csv_rows(text.as_bytes(), None).unwrap();
        assert_eq!(parsed.treatment_names, vec!["D1", "D2"]);
        assert_eq!(parsed.rows[0].d, vec![1.0, 0.0]);
        assert_eq!(parsed.ignored_columns, vec!["extra"]);

        let names = vec!["d1".to_string(), "d2".to_string()];
        let text = "g,t,y,d1\na,1,1.5,1\n";
        assert_eq!(
            read_csv_rows(text.as_bytes(), Some(&names)).unwrap_err(),
            Error::MissingColumn("d2".into())
        );
    }

    #[test]
    fn select_groups_relabels_repeats() {
        let panel = load_panel(&grid(3, 2, 1), LoadOptions::default()).unwrap();
        let sub = panel.select_groups(&[2, 0, 2]);
        assert_eq!(sub.group_labels(), &["g2", "g0", "g2#1"]);
        assert_eq!(sub.y(0, 1), panel.y(2, 1));
        assert_eq!(sub.y(2, 1), panel.y(2, 1));
        assert_eq!(sub.total_n(), 6.0);
    }
}
