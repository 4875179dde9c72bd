//! Time × generation structure of a campaign.
//!
//! Wall-clock time is bucketed into fixed periods counted from campaign
//! launch (the earliest infection). The period matrix counts new infections
//! per generation per period; from it come cumulative per-generation curves
//! and stabilization: a generation is stable once its activity has ended
//! and at least `window` quiet periods have been observed after it.

use std::io::{Read, Write};

use thiserror::Error;

use crate::forest::CascadeForest;
use crate::util::fmt_dp;

/// New infections per generation (rows) per period (columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodMatrix {
    /// `counts[g-1][t-1]`: generation g, period t.
    counts: Vec<Vec<u64>>,
    period_len_secs: i64,
    origin_epoch: i64,
    /// Denominator for the column-fraction row. Equals the matrix sum for a
    /// matrix built from a forest; a matrix covering only part of a campaign
    /// carries the full campaign reach here.
    total: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemporalError {
    #[error("unknown generation {g}; matrix covers 1..={max}")]
    UnknownGeneration { g: usize, max: usize },
    #[error("matrix csv: {0}")]
    BadMatrixCsv(String),
}

impl PeriodMatrix {
    /// Builds a matrix from raw counts (`counts[g-1][t-1]`), e.g. a
    /// transcribed reference table. `total` is the fraction denominator,
    /// which may exceed the matrix sum when the matrix covers only the
    /// campaign's opening periods.
    pub fn from_counts(
        counts: Vec<Vec<u64>>,
        period_len_secs: i64,
        origin_epoch: i64,
        total: u64,
    ) -> Self {
        assert!(
            !counts.is_empty(),
            "matrix needs at least one generation row"
        );
        let t = counts[0].len();
        assert!(
            t >= 1 && counts.iter().all(|row| row.len() == t),
            "rows must be equal length"
        );
        assert!(period_len_secs > 0, "period length must be positive");
        let sum: u64 = counts.iter().flatten().sum();
        assert!(total >= sum, "total cannot be below the matrix sum");
        Self {
            counts,
            period_len_secs,
            origin_epoch,
            total,
        }
    }

    /// Number of generations (rows).
    pub fn generations(&self) -> usize {
        self.counts.len()
    }

    /// Number of periods (columns).
    pub fn periods(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    /// Count for generation `g`, period `t` (both 1-based).
    pub fn count(&self, g: usize, t: usize) -> u64 {
        self.counts[g - 1][t - 1]
    }

    pub fn row(&self, g: usize) -> &[u64] {
        &self.counts[g - 1]
    }

    pub fn row_sum(&self, g: usize) -> u64 {
        self.counts[g - 1].iter().sum()
    }

    pub fn column_sum(&self, t: usize) -> u64 {
        self.counts.iter().map(|row| row[t - 1]).sum()
    }

    /// Column sum over the fraction denominator (campaign reach).
    pub fn column_fraction(&self, t: usize) -> f64 {
        self.column_sum(t) as f64 / self.total as f64
    }

    pub fn period_len_secs(&self) -> i64 {
        self.period_len_secs
    }

    pub fn origin_epoch(&self) -> i64 {
        self.origin_epoch
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn matrix_sum(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Buckets a forest into a `G × T` period matrix.
///
/// Period index is `floor((infected_at − origin) / period_len) + 1` with the
/// origin at the earliest infection, so period 1 starts at launch.
pub fn period_generation_matrix(forest: &CascadeForest, period_len_secs: i64) -> PeriodMatrix {
    assert!(period_len_secs > 0, "period length must be positive");
    assert!(!forest.is_empty(), "forest has no nodes");
    let origin = forest.origin().expect("non-empty forest has an origin");
    let g_max = forest.max_generation() as usize;
    let t_max = forest
        .nodes()
        .values()
        .map(|n| ((n.infected_at - origin) / period_len_secs) as usize + 1)
        .max()
        .expect("non-empty forest");

    let mut counts = vec![vec![0u64; t_max]; g_max];
    for node in forest.nodes().values() {
        let t = ((node.infected_at - origin) / period_len_secs) as usize + 1;
        counts[node.generation as usize - 1][t - 1] += 1;
    }
    let total = forest.len() as u64;
    PeriodMatrix {
        counts,
        period_len_secs,
        origin_epoch: origin,
        total,
    }
}

/// Running per-period sums for the requested generations.
pub fn cumulative_by_generation(
    matrix: &PeriodMatrix,
    generations: &[usize],
) -> Result<Vec<(usize, Vec<u64>)>, TemporalError> {
    let max = matrix.generations();
    generations
        .iter()
        .map(|&g| {
            if g == 0 || g > max {
                return Err(TemporalError::UnknownGeneration { g, max });
            }
            let mut running = 0;
            let curve = matrix
                .row(g)
                .iter()
                .map(|&c| {
                    running += c;
                    running
                })
                .collect();
            Ok((g, curve))
        })
        .collect()
}

/// Earliest infection offset from launch, per generation (`[g-1]` in
/// seconds). Non-decreasing in g: a generation cannot appear before its
/// ancestor generations.
pub fn first_occurrence(forest: &CascadeForest) -> Vec<i64> {
    assert!(!forest.is_empty(), "forest has no nodes");
    let origin = forest.origin().expect("non-empty forest has an origin");
    let g_max = forest.max_generation() as usize;
    let mut first = vec![i64::MAX; g_max];
    for node in forest.nodes().values() {
        let idx = node.generation as usize - 1;
        first[idx] = first[idx].min(node.infected_at - origin);
    }
    first
}

/// Per-generation stabilization indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizationReport {
    window: usize,
    /// `stable_at[g-1]`: the last period with generation-g activity (0 for
    /// an always-quiet row), present only when `window` quiet periods follow
    /// it inside the observed range.
    stable_at: Vec<Option<usize>>,
}

impl StabilizationReport {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn generations(&self) -> usize {
        self.stable_at.len()
    }

    pub fn stable_at(&self, g: usize) -> Option<usize> {
        self.stable_at[g - 1]
    }
}

/// Finds, per generation, the earliest period after which no further
/// infections occur, requiring `window` observed quiet periods before
/// declaring stability. Generations active within the final `window`
/// periods cannot be declared stable at the data edge.
pub fn stabilization(matrix: &PeriodMatrix, window: usize) -> StabilizationReport {
    assert!(window >= 1, "window must be at least 1");
    let t_max = matrix.periods();
    let stable_at = (1..=matrix.generations())
        .map(|g| {
            let row = matrix.row(g);
            let last_active = row.iter().rposition(|&c| c > 0).map_or(0, |i| i + 1);
            (last_active + window <= t_max).then_some(last_active)
        })
        .collect();
    StabilizationReport { window, stable_at }
}

const MATRIX_ROW_LABEL_PCT: &str = "pct";

/// Writes the matrix CSV: `generation,p1,...,pT` rows plus a final
/// `pct,...` row of column fractions (4 decimals). Comment lines record the
/// period length, origin and fraction denominator for lossless re-reading.
pub fn write_matrix_csv<W: Write>(mut out: W, matrix: &PeriodMatrix) -> std::io::Result<()> {
    writeln!(out, "# period_len_secs={}", matrix.period_len_secs())?;
    writeln!(out, "# origin_epoch={}", matrix.origin_epoch())?;
    writeln!(out, "# total={}", matrix.total())?;
    let header: Vec<String> = std::iter::once("generation".to_string())
        .chain((1..=matrix.periods()).map(|t| format!("p{t}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for g in 1..=matrix.generations() {
        let row: Vec<String> = std::iter::once(g.to_string())
            .chain(matrix.row(g).iter().map(u64::to_string))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    let pct_row: Vec<String> = std::iter::once(MATRIX_ROW_LABEL_PCT.to_string())
        .chain((1..=matrix.periods()).map(|t| fmt_dp(matrix.column_fraction(t), 4)))
        .collect();
    writeln!(out, "{}", pct_row.join(","))
}

/// Reads the matrix CSV form. The `pct` row is ignored in favor of the
/// `# total=` comment when present; otherwise the matrix sum is the
/// denominator. Missing period/origin comments default to one day from
/// epoch zero.
pub fn read_matrix_csv<R: Read>(source: R) -> Result<PeriodMatrix, TemporalError> {
    let mut text = String::new();
    let mut source = source;
    source
        .read_to_string(&mut text)
        .map_err(|e| TemporalError::BadMatrixCsv(e.to_string()))?;

    let mut period_len_secs: i64 = 86_400;
    let mut origin_epoch: i64 = 0;
    let mut total: Option<u64> = None;
    let mut rows: Vec<Vec<u64>> = Vec::new();
    let mut header_cols: Option<usize> = None;

    let bad = |msg: String| TemporalError::BadMatrixCsv(msg);
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "period_len_secs" => {
                        period_len_secs = value
                            .trim()
                            .parse()
                            .map_err(|_| bad(format!("bad period_len_secs `{value}`")))?;
                    }
                    "origin_epoch" => {
                        origin_epoch = value
                            .trim()
                            .parse()
                            .map_err(|_| bad(format!("bad origin_epoch `{value}`")))?;
                    }
                    "total" => {
                        total = Some(
                            value
                                .trim()
                                .parse()
                                .map_err(|_| bad(format!("bad total `{value}`")))?,
                        );
                    }
                    _ => {}
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match header_cols {
            None => {
                if fields.first() != Some(&"generation") {
                    return Err(bad(format!(
                        "expected `generation,p1,...` header, found `{line}`"
                    )));
                }
                header_cols = Some(fields.len() - 1);
            }
            Some(t_count) => {
                if fields[0] == MATRIX_ROW_LABEL_PCT {
                    continue;
                }
                if fields.len() != t_count + 1 {
                    return Err(bad(format!(
                        "line {}: expected {} columns",
                        line_no + 1,
                        t_count + 1
                    )));
                }
                let g: usize = fields[0]
                    .parse()
                    .map_err(|_| bad(format!("bad generation `{}`", fields[0])))?;
                if g != rows.len() + 1 {
                    return Err(bad(format!(
                        "generation rows must be 1..=G in order; found {g}"
                    )));
                }
                let row = fields[1..]
                    .iter()
                    .map(|f| {
                        f.parse::<u64>()
                            .map_err(|_| bad(format!("bad count `{f}`")))
                    })
                    .collect::<Result<Vec<u64>, _>>()?;
                rows.push(row);
            }
        }
    }
    if rows.is_empty() {
        return Err(bad("matrix has no generation rows".into()));
    }
    let sum: u64 = rows.iter().flatten().sum();
    Ok(PeriodMatrix {
        counts: rows,
        period_len_secs,
        origin_epoch,
        total: total.unwrap_or(sum),
    })
}

/// Writes `generation,stable_at,window`; an empty `stable_at` field means
/// the generation cannot yet be declared stable.
pub fn write_stabilization_csv<W: Write>(
    mut out: W,
    report: &StabilizationReport,
) -> std::io::Result<()> {
    writeln!(out, "generation,stable_at,window")?;
    for g in 1..=report.generations() {
        let stable = report.stable_at(g).map_or(String::new(), |t| t.to_string());
        writeln!(out, "{g},{stable},{}", report.window())?;
    }
    Ok(())
}

/// Writes `generation,first_occurrence_secs` offsets from launch.
pub fn write_first_occurrence_csv<W: Write>(mut out: W, offsets: &[i64]) -> std::io::Result<()> {
    writeln!(out, "generation,first_occurrence_secs")?;
    for (idx, offset) in offsets.iter().enumerate() {
        writeln!(out, "{},{offset}", idx + 1)?;
    }
    Ok(())
}

/// Writes cumulative curves for selected generations in matrix layout.
pub fn write_cumulative_curves_csv<W: Write>(
    mut out: W,
    curves: &[(usize, Vec<u64>)],
) -> std::io::Result<()> {
    let t_max = curves.first().map_or(0, |(_, c)| c.len());
    let header: Vec<String> = std::iter::once("generation".to_string())
        .chain((1..=t_max).map(|t| format!("p{t}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (g, curve) in curves {
        let row: Vec<String> = std::iter::once(g.to_string())
            .chain(curve.iter().map(u64::to_string))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
