//! Per-generation epidemic parameters.
//!
//! For each generation `g`:
//!
//! - contagion `p(g) = decisions(g) / infected(g)` — the observed probability
//!   that an infected actor forwards,
//! - intensity `λ(g) = sent(g) / decisions(g)` — mean recipients reached per
//!   forwarding actor (`0` when nobody decided),
//! - threshold `ETP(g) = p(g) · λ(g)` — the per-generation reproduction
//!   factor: the cascade grows at `g` iff `ETP(g) > 1`.
//!
//! Values are stored at full precision; the report writer rounds to four
//! decimals.

use std::collections::BTreeSet;
use std::io::Write;

use crate::series::GenerationSeries;
use crate::util::fmt_dp;

/// Becker-style classification against the epidemic threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criticality {
    Sub,
    Critical,
    Super,
}

impl std::fmt::Display for Criticality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criticality::Sub => "sub",
            Criticality::Critical => "critical",
            Criticality::Super => "super",
        })
    }
}

/// Classifies an ETP value: critical iff `|etp − 1| ≤ tol`, super iff
/// `etp > 1 + tol`, sub otherwise. `tol = 0` gives the strict comparisons.
pub fn classify_criticality(etp: f64, tol: f64) -> Criticality {
    debug_assert!(etp >= 0.0 && tol >= 0.0);
    if (etp - 1.0).abs() <= tol {
        Criticality::Critical
    } else if etp > 1.0 + tol {
        Criticality::Super
    } else {
        Criticality::Sub
    }
}

/// One generation's parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsRow {
    pub p: f64,
    pub lambda: f64,
    pub etp: f64,
    pub criticality: Criticality,
}

/// Parameters for generations `1..=G`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationParams {
    rows: Vec<ParamsRow>,
    tol: f64,
}

impl GenerationParams {
    pub fn generations(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, g: usize) -> &ParamsRow {
        &self.rows[g - 1]
    }

    pub fn p(&self, g: usize) -> f64 {
        self.rows[g - 1].p
    }

    pub fn lambda(&self, g: usize) -> f64 {
        self.rows[g - 1].lambda
    }

    pub fn etp(&self, g: usize) -> f64 {
        self.rows[g - 1].etp
    }

    pub fn criticality(&self, g: usize) -> Criticality {
        self.rows[g - 1].criticality
    }

    /// Tolerance used for the stored classifications.
    pub fn tolerance(&self) -> f64 {
        self.tol
    }
}

/// Computes p, λ and ETP per generation with the strict classification
/// (`tol = 0`).
pub fn epidemic_params(series: &GenerationSeries) -> GenerationParams {
    epidemic_params_with_tol(series, 0.0)
}

/// As [`epidemic_params`] with an explicit criticality tolerance for noisy
/// data.
pub fn epidemic_params_with_tol(series: &GenerationSeries, tol: f64) -> GenerationParams {
    let rows = (1..=series.generations())
        .map(|g| {
            let infected = series.infected(g) as f64;
            let decisions = series.decisions(g) as f64;
            let p = decisions / infected;
            // λ := 0 when nobody decided, matching printed reference tables.
            let lambda = if decisions > 0.0 {
                series.sent(g) as f64 / decisions
            } else {
                0.0
            };
            let etp = p * lambda;
            ParamsRow {
                p,
                lambda,
                etp,
                criticality: classify_criticality(etp, tol),
            }
        })
        .collect();
    GenerationParams { rows, tol }
}

/// Aggregate campaign facts.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Total distinct infected actors, `cumulative(G)`.
    pub reach: u64,
    /// Number of generations G.
    pub generations: usize,
    /// Generations classified super-critical.
    pub super_set: BTreeSet<usize>,
    /// `etp(g) / etp(g-1)` for `g = 2..=G`; `None` where the previous ETP
    /// is zero.
    etp_ratios: Vec<Option<f64>>,
}

impl Summary {
    /// Ratio of consecutive ETPs, `etp(g)/etp(g−1)`, defined for `g ≥ 2`.
    pub fn etp_ratio(&self, g: usize) -> Option<f64> {
        assert!(g >= 2, "etp ratio starts at generation 2");
        self.etp_ratios.get(g - 2).copied().flatten()
    }
}

/// Summarizes a campaign from its series and parameters (same G required).
pub fn campaign_summary(series: &GenerationSeries, params: &GenerationParams) -> Summary {
    assert_eq!(
        series.generations(),
        params.generations(),
        "series and params cover different generation ranges"
    );
    let g_count = series.generations();
    let super_set = (1..=g_count)
        .filter(|&g| params.criticality(g) == Criticality::Super)
        .collect();
    let etp_ratios = (2..=g_count)
        .map(|g| {
            let prev = params.etp(g - 1);
            (prev != 0.0).then(|| params.etp(g) / prev)
        })
        .collect();
    Summary {
        reach: series.total_reach(),
        generations: g_count,
        super_set,
        etp_ratios,
    }
}

/// Writes the combined report CSV:
/// `generation,infected,cumulative,decisions,sent,p,lambda,etp,criticality`
/// with p/λ/ETP rounded to four decimals.
pub fn write_report_csv<W: Write>(
    mut out: W,
    series: &GenerationSeries,
    params: &GenerationParams,
) -> std::io::Result<()> {
    assert_eq!(series.generations(), params.generations());
    writeln!(
        out,
        "generation,infected,cumulative,decisions,sent,p,lambda,etp,criticality"
    )?;
    for g in 1..=series.generations() {
        writeln!(
            out,
            "{g},{},{},{},{},{},{},{},{}",
            series.infected(g),
            series.cumulative(g),
            series.decisions(g),
            series.sent(g),
            fmt_dp(params.p(g), 4),
            fmt_dp(params.lambda(g), 4),
            fmt_dp(params.etp(g), 4),
            params.criticality(g)
        )?;
    }
    Ok(())
}
