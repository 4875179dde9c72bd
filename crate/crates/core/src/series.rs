//! Per-generation counts: infected, cumulative, decisions, infections sent.
//!
//! `decisions(g)` counts generation-g actors with at least one successful
//! outgoing transmission; `sent(g)` counts those transmissions, so
//! `sent(g) = infected(g+1)` and the last generation always has `sent = 0`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::forest::CascadeForest;

/// Validated per-generation counts, generations `1..=G`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationSeries {
    infected: Vec<u64>,
    cumulative: Vec<u64>,
    decisions: Vec<u64>,
    sent: Vec<u64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeriesError {
    #[error("series has no generations")]
    Empty,
    #[error("generation column must be 1..=G contiguous; row {row} has generation {found}")]
    BadGenerationIndex { row: usize, found: u64 },
    #[error("cumulative({g}) = {found} but running sum of infected is {expected}")]
    CumulativeMismatch { g: usize, found: u64, expected: u64 },
    #[error("sent({g}) = {found} but infected({next}) = {expected}", next = g + 1)]
    SentMismatch { g: usize, found: u64, expected: u64 },
    #[error("decisions({g}) = {decisions} exceeds infected({g}) = {infected}")]
    DecisionsExceedInfected {
        g: usize,
        decisions: u64,
        infected: u64,
    },
    #[error("csv error: {0}")]
    Csv(String),
}

impl GenerationSeries {
    /// Builds and validates a series from the three independent columns;
    /// cumulative is derived.
    pub fn from_columns(
        infected: Vec<u64>,
        decisions: Vec<u64>,
        sent: Vec<u64>,
    ) -> Result<Self, SeriesError> {
        let mut cumulative = Vec::with_capacity(infected.len());
        let mut running = 0u64;
        for &i in &infected {
            running += i;
            cumulative.push(running);
        }
        Self::from_full_columns(infected, cumulative, decisions, sent)
    }

    /// Builds a series from all four columns, checking every invariant.
    pub fn from_full_columns(
        infected: Vec<u64>,
        cumulative: Vec<u64>,
        decisions: Vec<u64>,
        sent: Vec<u64>,
    ) -> Result<Self, SeriesError> {
        let g_count = infected.len();
        if g_count == 0 {
            return Err(SeriesError::Empty);
        }
        assert!(
            cumulative.len() == g_count && decisions.len() == g_count && sent.len() == g_count,
            "column lengths differ"
        );
        let mut running = 0u64;
        for g in 1..=g_count {
            running += infected[g - 1];
            if cumulative[g - 1] != running {
                return Err(SeriesError::CumulativeMismatch {
                    g,
                    found: cumulative[g - 1],
                    expected: running,
                });
            }
            if decisions[g - 1] > infected[g - 1] {
                return Err(SeriesError::DecisionsExceedInfected {
                    g,
                    decisions: decisions[g - 1],
                    infected: infected[g - 1],
                });
            }
            let expected_sent = if g < g_count { infected[g] } else { 0 };
            if sent[g - 1] != expected_sent {
                return Err(SeriesError::SentMismatch {
                    g,
                    found: sent[g - 1],
                    expected: expected_sent,
                });
            }
        }
        Ok(Self {
            infected,
            cumulative,
            decisions,
            sent,
        })
    }

    /// Number of generations G.
    pub fn generations(&self) -> usize {
        self.infected.len()
    }

    pub fn infected(&self, g: usize) -> u64 {
        self.infected[g - 1]
    }

    pub fn cumulative(&self, g: usize) -> u64 {
        self.cumulative[g - 1]
    }

    pub fn decisions(&self, g: usize) -> u64 {
        self.decisions[g - 1]
    }

    pub fn sent(&self, g: usize) -> u64 {
        self.sent[g - 1]
    }

    pub fn infected_column(&self) -> &[u64] {
        &self.infected
    }

    /// Total campaign reach: cumulative at the last generation.
    pub fn total_reach(&self) -> u64 {
        *self.cumulative.last().expect("series is never empty")
    }

    /// Seed count: infected in generation 1.
    pub fn seeds(&self) -> u64 {
        self.infected[0]
    }

    /// Cumulative column as reals, for model fitting.
    pub fn cumulative_curve(&self) -> Vec<f64> {
        self.cumulative.iter().map(|&c| c as f64).collect()
    }
}

/// Collapses a forest into its generation series.
///
/// Returns the forest's counts for generations `1..=max_generation`; an
/// empty forest (never produced by `build_forest`) yields an error.
pub fn generation_counts(forest: &CascadeForest) -> Result<GenerationSeries, SeriesError> {
    let g_max = forest.max_generation() as usize;
    if g_max == 0 {
        return Err(SeriesError::Empty);
    }
    let mut infected = vec![0u64; g_max];
    let mut child_count: std::collections::HashMap<&str, u64> = std::collections::HashMap::new();
    for node in forest.nodes().values() {
        infected[node.generation as usize - 1] += 1;
        if let Some(infector) = &node.infector {
            *child_count.entry(infector.as_str()).or_insert(0) += 1;
        }
    }
    let mut decisions = vec![0u64; g_max];
    let mut sent = vec![0u64; g_max];
    for (id, node) in forest.nodes() {
        if let Some(&children) = child_count.get(id.as_str()) {
            let idx = node.generation as usize - 1;
            decisions[idx] += 1;
            sent[idx] += children;
        }
    }
    GenerationSeries::from_columns(infected, decisions, sent)
}

const SERIES_HEADER: [&str; 5] = ["generation", "infected", "cumulative", "decisions", "sent"];

/// Reads the `generation,infected,cumulative,decisions,sent` CSV form.
pub fn read_series_csv<R: Read>(source: R) -> Result<GenerationSeries, SeriesError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| SeriesError::Csv(e.to_string()))?;
    let fields: Vec<&str> = headers.iter().collect();
    if fields != SERIES_HEADER {
        return Err(SeriesError::Csv(format!(
            "expected header `{}`, found `{}`",
            SERIES_HEADER.join(","),
            fields.join(",")
        )));
    }
    let mut cols: [Vec<u64>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (row_idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| SeriesError::Csv(e.to_string()))?;
        let mut values = [0u64; 5];
        for (i, field) in row.iter().enumerate().take(5) {
            values[i] = field.parse::<u64>().map_err(|_| {
                SeriesError::Csv(format!("row {}: bad count `{field}`", row_idx + 1))
            })?;
        }
        if values[0] != (row_idx + 1) as u64 {
            return Err(SeriesError::BadGenerationIndex {
                row: row_idx + 1,
                found: values[0],
            });
        }
        for i in 0..4 {
            cols[i].push(values[i + 1]);
        }
    }
    let [infected, cumulative, decisions, sent] = cols;
    GenerationSeries::from_full_columns(infected, cumulative, decisions, sent)
}

/// Writes the series in its CSV form.
pub fn write_series_csv<W: Write>(mut out: W, series: &GenerationSeries) -> std::io::Result<()> {
    writeln!(out, "{}", SERIES_HEADER.join(","))?;
    for g in 1..=series.generations() {
        writeln!(
            out,
            "{g},{},{},{},{}",
            series.infected(g),
            series.cumulative(g),
            series.decisions(g),
            series.sent(g)
        )?;
    }
    Ok(())
}
