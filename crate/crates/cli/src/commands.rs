//! Subcommand implementations. Each stages its output files in memory and
//! writes them atomically at the end.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};

use cascade_branch_core::estimator::{
    evaluate, fit, write_fit_report_csv, write_reach_error_curve_csv, FitReport, FitResult,
    SearchConfig,
};
use cascade_branch_core::event::{
    events_to_string, parse_events, EventLog, FormatConfig, ParsedLog, TimestampFormat,
};
use cascade_branch_core::forest::{build_forest, CascadeForest, OrphanPolicy};
use cascade_branch_core::metrics::{
    campaign_summary, epidemic_params_with_tol, write_report_csv, Summary,
};
use cascade_branch_core::model::{project, write_trajectory_csv, DEFAULT_EPS, DEFAULT_HORIZON};
use cascade_branch_core::series::{generation_counts, read_series_csv, GenerationSeries};
use cascade_branch_core::simulator::{simulate, SimParams};
use cascade_branch_core::temporal::{
    cumulative_by_generation, first_occurrence, period_generation_matrix, read_matrix_csv,
    stabilization, write_cumulative_curves_csv, write_first_occurrence_csv, write_matrix_csv,
    write_stabilization_csv, PeriodMatrix,
};

use crate::cli::{
    Command, FitArgs, IngestArgs, OrphanArg, ReportArgs, SearchArgs, SimulateArgs, StatsArgs,
    TemporalArgs, TimestampArg,
};
use crate::output::{write_atomic, Staged};
use crate::svg;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Stats(args) => cmd_stats(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Temporal(args) => cmd_temporal(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Report(args) => cmd_report(args),
    }
}

// ---------------------------------------------------------------------------
// Ingestion plumbing
// ---------------------------------------------------------------------------

/// Diagnostics accompanying an event-log ingestion.
struct IngestInfo {
    skipped_lines: usize,
    orphans: usize,
    promoted_seeds: u64,
    wasted_attempts: u64,
}

fn orphan_policy(arg: OrphanArg) -> OrphanPolicy {
    match arg {
        OrphanArg::Reject => OrphanPolicy::Reject,
        OrphanArg::AsSeeds => OrphanPolicy::AsSeeds,
    }
}

fn format_config(arg: TimestampArg) -> FormatConfig {
    let timestamp = match arg {
        TimestampArg::Auto => TimestampFormat::Auto,
        TimestampArg::Epoch => TimestampFormat::EpochSeconds,
        TimestampArg::Rfc3339 => TimestampFormat::Rfc3339,
    };
    FormatConfig {
        timestamp,
        ..Default::default()
    }
}

fn load_log(path: &Path, args: &IngestArgs) -> Result<ParsedLog> {
    let file =
        File::open(path).with_context(|| format!("opening events file {}", path.display()))?;
    let parsed = parse_events(file, &format_config(args.timestamp_format))
        .with_context(|| format!("parsing events file {}", path.display()))?;
    for issue in &parsed.skipped {
        eprintln!("warning: {}: {issue}", path.display());
    }
    Ok(parsed)
}

fn load_forest(path: &Path, args: &IngestArgs) -> Result<(CascadeForest, IngestInfo)> {
    let parsed = load_log(path, args)?;
    let forest = build_forest(&parsed.log, orphan_policy(args.orphans))
        .context("building cascade forest")?;
    for orphan in forest.orphan_records() {
        eprintln!(
            "warning: orphan record skipped: {} -> {} @ {}",
            orphan.sender.as_deref().unwrap_or(""),
            orphan.recipient,
            orphan.timestamp
        );
    }
    let info = IngestInfo {
        skipped_lines: parsed.skipped.len(),
        orphans: forest.orphan_records().len(),
        promoted_seeds: forest.promoted_seeds(),
        wasted_attempts: forest.total_attempts(),
    };
    Ok((forest, info))
}

/// Events path or `--from-series`, exactly one.
fn load_series_input(
    ingest: &IngestArgs,
    from_series: Option<&Path>,
) -> Result<(GenerationSeries, Option<IngestInfo>)> {
    match (&ingest.events, from_series) {
        (Some(events), None) => {
            let (forest, info) = load_forest(events, ingest)?;
            let series = generation_counts(&forest).context("deriving generation counts")?;
            Ok((series, Some(info)))
        }
        (None, Some(path)) => {
            let file = File::open(path)
                .with_context(|| format!("opening series file {}", path.display()))?;
            let series = read_series_csv(file)
                .with_context(|| format!("reading series file {}", path.display()))?;
            Ok((series, None))
        }
        (None, None) => bail!("provide an events file or --from-series"),
        (Some(_), Some(_)) => unreachable!("clap forbids combining the two inputs"),
    }
}

fn parse_period_secs(text: &str) -> Result<i64> {
    let text = text.trim();
    let (digits, unit) = match text.chars().last() {
        Some('d') => (&text[..text.len() - 1], 86_400),
        Some('h') => (&text[..text.len() - 1], 3_600),
        Some('m') => (&text[..text.len() - 1], 60),
        Some('s') => (&text[..text.len() - 1], 1),
        _ => (text, 1),
    };
    let value: i64 = digits
        .parse()
        .with_context(|| format!("period `{text}` is not a number with optional d/h/m/s suffix"))?;
    ensure!(value > 0, "period must be positive");
    Ok(value * unit)
}

fn parse_generation_selection(text: &str, g_max: usize) -> Result<Vec<usize>> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok((1..=g_max).collect());
    }
    let mut selected = BTreeSet::new();
    for part in text.split(',') {
        let g: usize = part
            .trim()
            .parse()
            .with_context(|| format!("bad generation `{}`", part.trim()))?;
        ensure!(
            (1..=g_max).contains(&g),
            "generation {g} outside 1..={g_max}"
        );
        selected.insert(g);
    }
    ensure!(!selected.is_empty(), "empty generation selection");
    Ok(selected.into_iter().collect())
}

// ---------------------------------------------------------------------------
// Search configuration
// ---------------------------------------------------------------------------

fn apply_search_file(config: &mut SearchConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading search config {}", path.display()))?;
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), line_no + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        let parse_err = || format!("{}:{}: bad value for {key}", path.display(), line_no + 1);
        match key {
            "r0_min" => config.r0_min = value.parse().with_context(parse_err)?,
            "r0_max" => config.r0_max = value.parse().with_context(parse_err)?,
            "r0_steps" => config.r0_steps = value.parse().with_context(parse_err)?,
            "n_min" => config.n_min = Some(value.parse().with_context(parse_err)?),
            "n_max" => config.n_max = value.parse().with_context(parse_err)?,
            "n_steps" => config.n_steps = value.parse().with_context(parse_err)?,
            "log_n" => config.log_n = value.parse().with_context(parse_err)?,
            "refine_rounds" => config.refine_rounds = value.parse().with_context(parse_err)?,
            "refine_shrink" => config.refine_shrink = value.parse().with_context(parse_err)?,
            other => bail!(
                "{}:{}: unknown search key `{other}`",
                path.display(),
                line_no + 1
            ),
        }
    }
    Ok(())
}

fn build_search_config(args: &SearchArgs) -> Result<SearchConfig> {
    let mut config = SearchConfig::default();
    if let Some(path) = &args.config {
        apply_search_file(&mut config, path)?;
    }
    if let Some(v) = args.r0_min {
        config.r0_min = v;
    }
    if let Some(v) = args.r0_max {
        config.r0_max = v;
    }
    if let Some(v) = args.r0_steps {
        config.r0_steps = v;
    }
    if let Some(v) = args.n_min {
        config.n_min = Some(v);
    }
    if let Some(v) = args.n_max {
        config.n_max = v;
    }
    if let Some(v) = args.n_steps {
        config.n_steps = v;
    }
    if args.linear_n {
        config.log_n = false;
    }
    if let Some(v) = args.refine_rounds {
        config.refine_rounds = v;
    }
    if let Some(v) = args.refine_shrink {
        config.refine_shrink = v;
    }
    config.validate()?;
    Ok(config)
}

// ---------------------------------------------------------------------------
// Staging sections (shared between single commands and `report`)
// ---------------------------------------------------------------------------

fn summary_text(summary: &Summary, series: &GenerationSeries, info: Option<&IngestInfo>) -> String {
    let super_set = if summary.super_set.is_empty() {
        "-".to_string()
    } else {
        summary
            .super_set
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut text = format!(
        "reach: {}\ngenerations: {}\nseeds: {}\nsuper_critical: {super_set}\n",
        summary.reach,
        summary.generations,
        series.seeds()
    );
    if let Some(info) = info {
        text.push_str(&format!(
            "skipped_lines: {}\norphans: {}\npromoted_seeds: {}\nwasted_attempts: {}\n",
            info.skipped_lines, info.orphans, info.promoted_seeds, info.wasted_attempts
        ));
    }
    text
}

fn stage_stats(
    staged: &mut Staged,
    series: &GenerationSeries,
    tol: f64,
    info: Option<&IngestInfo>,
) -> Result<Summary> {
    let params = epidemic_params_with_tol(series, tol);
    let summary = campaign_summary(series, &params);
    let mut buf = Vec::new();
    write_report_csv(&mut buf, series, &params)?;
    staged.add("generation_params.csv", buf);
    staged.add_text("summary.txt", summary_text(&summary, series, info));
    Ok(summary)
}

fn stage_fit(
    staged: &mut Staged,
    series: &GenerationSeries,
    config: &SearchConfig,
    single_k: Option<usize>,
    with_svg: bool,
) -> Result<FitResult> {
    let ks: Vec<usize> = match single_k {
        Some(k) => vec![k],
        None => (1..=series.generations()).collect(),
    };
    let mut rows = Vec::with_capacity(ks.len());
    let mut last: Option<FitResult> = None;
    for k in ks {
        let result = fit(series, k, config)?;
        rows.push(evaluate(&result, series));
        last = Some(result);
    }
    let report = FitReport::from_rows(rows, series.total_reach() as f64);

    let mut buf = Vec::new();
    write_fit_report_csv(&mut buf, &report)?;
    staged.add("fit_report.csv", buf);
    let mut buf = Vec::new();
    write_reach_error_curve_csv(&mut buf, &report)?;
    staged.add("reach_error_curve.csv", buf);

    let reference = last.expect("at least one k was fitted");
    let trajectory = project(
        &reference.params,
        series.seeds(),
        DEFAULT_HORIZON,
        DEFAULT_EPS,
    );
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &trajectory)?;
    staged.add("trajectory.csv", buf);

    if with_svg {
        let points: Vec<(f64, f64)> = report
            .rows()
            .iter()
            .map(|r| (r.k as f64, r.reach_error_pct * 100.0))
            .collect();
        let chart = svg::line_chart(
            "Reach error by generations used",
            "generations used for the fit",
            "reach error [%]",
            &[svg::Series {
                name: "reach error".into(),
                points,
            }],
        );
        staged.add_text("reach_error_curve.svg", chart);
    }
    Ok(reference)
}

fn stage_temporal(
    staged: &mut Staged,
    matrix: &PeriodMatrix,
    creation_offsets: Option<&[i64]>,
    window: usize,
    generations_arg: &str,
    with_svg: bool,
) -> Result<()> {
    let selection = parse_generation_selection(generations_arg, matrix.generations())?;

    let mut buf = Vec::new();
    write_matrix_csv(&mut buf, matrix)?;
    staged.add("period_matrix.csv", buf);

    let curves = cumulative_by_generation(matrix, &selection)?;
    let mut buf = Vec::new();
    write_cumulative_curves_csv(&mut buf, &curves)?;
    staged.add("cumulative_curves.csv", buf);

    let stability = stabilization(matrix, window);
    let mut buf = Vec::new();
    write_stabilization_csv(&mut buf, &stability)?;
    staged.add("stabilization.csv", buf);

    if let Some(offsets) = creation_offsets {
        let mut buf = Vec::new();
        write_first_occurrence_csv(&mut buf, offsets)?;
        staged.add("first_occurrence.csv", buf);
    }

    if with_svg {
        let series: Vec<svg::Series> = curves
            .iter()
            .map(|(g, curve)| svg::Series {
                name: format!("generation {g}"),
                points: curve
                    .iter()
                    .enumerate()
                    .map(|(t, &c)| ((t + 1) as f64, c as f64))
                    .collect(),
            })
            .collect();
        staged.add_text(
            "cumulative_curves.svg",
            svg::line_chart(
                "Cumulative infections by generation",
                "period",
                "cumulative infections",
                &series,
            ),
        );
        if let Some(offsets) = creation_offsets {
            let points: Vec<(f64, f64)> = offsets
                .iter()
                .enumerate()
                .map(|(idx, &secs)| (secs as f64 / 60.0, (idx + 1) as f64))
                .collect();
            staged.add_text(
                "generation_creation.svg",
                svg::line_chart(
                    "Generation creation dynamics",
                    "minutes since launch",
                    "generation",
                    &[svg::Series {
                        name: "first occurrence".into(),
                        points,
                    }],
                ),
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let (series, info) = load_series_input(&args.ingest, args.from_series.as_deref())?;
    let mut staged = Staged::default();
    let summary = stage_stats(&mut staged, &series, args.tol, info.as_ref())?;
    print!("{}", summary_text(&summary, &series, info.as_ref()));
    staged.write_all(&args.output)?;
    println!(
        "wrote generation_params.csv, summary.txt to {}",
        args.output.display()
    );
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let (series, _) = load_series_input(&args.ingest, args.from_series.as_deref())?;
    let config = build_search_config(&args.search)?;
    let mut staged = Staged::default();
    let reference = stage_fit(&mut staged, &series, &config, args.k, args.svg)?;
    let row = evaluate(&reference, &series);
    println!(
        "k={}: r0={:.4} (p={:.4}, lambda={:.4}), N={:.1}, predicted reach {:.2}, \
         actual {}, error {:.2}%",
        reference.k_used,
        reference.params.r0(),
        reference.params.p(),
        reference.params.lambda(),
        reference.params.n(),
        row.estimated_reach,
        series.total_reach(),
        row.reach_error_pct * 100.0
    );
    let names: Vec<&str> = staged.names().collect();
    let listing = names.join(", ");
    staged.write_all(&args.output)?;
    println!("wrote {listing} to {}", args.output.display());
    Ok(())
}

fn cmd_temporal(args: TemporalArgs) -> Result<()> {
    let period_len = parse_period_secs(&args.period)?;
    ensure!(args.window >= 1, "window must be at least 1");
    let mut staged = Staged::default();
    match (&args.ingest.events, &args.from_matrix) {
        (Some(_), None) => {
            let events = args.ingest.events.clone().expect("just matched");
            let (forest, _) = load_forest(&events, &args.ingest)?;
            let matrix = period_generation_matrix(&forest, period_len);
            let offsets = first_occurrence(&forest);
            stage_temporal(
                &mut staged,
                &matrix,
                Some(&offsets),
                args.window,
                &args.generations,
                args.svg,
            )?;
            println!(
                "{} generations over {} periods of {period_len}s",
                matrix.generations(),
                matrix.periods()
            );
        }
        (None, Some(path)) => {
            let file = File::open(path)
                .with_context(|| format!("opening matrix file {}", path.display()))?;
            let matrix = read_matrix_csv(file)
                .with_context(|| format!("reading matrix file {}", path.display()))?;
            stage_temporal(
                &mut staged,
                &matrix,
                None,
                args.window,
                &args.generations,
                args.svg,
            )?;
            println!(
                "{} generations over {} periods (from matrix; creation times unavailable)",
                matrix.generations(),
                matrix.periods()
            );
        }
        (None, None) => bail!("provide an events file or --from-matrix"),
        (Some(_), Some(_)) => unreachable!("clap forbids combining the two inputs"),
    }
    let names: Vec<&str> = staged.names().collect();
    let listing = names.join(", ");
    staged.write_all(&args.output)?;
    println!("wrote {listing} to {}", args.output.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let params = SimParams {
        p: args.p,
        lambda: args.lambda,
        population: args.n,
        seeds: args.seeds,
        mean_delay_secs: args.mean_delay,
        max_generations: args.max_generations,
        rng_seed: args.rng_seed,
    };
    let log = simulate(&params)?;
    let text = events_to_string(&log, &params.comment_lines());
    write_atomic(&args.output_file, text.as_bytes())?;
    println!(
        "wrote {} records to {}",
        log.len(),
        args.output_file.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let events = args
        .ingest
        .events
        .clone()
        .ok_or_else(|| anyhow::anyhow!("report needs an events file"))?;
    let period_len = parse_period_secs(&args.period)?;
    ensure!(args.window >= 1, "window must be at least 1");
    let config = build_search_config(&args.search)?;

    let (forest, info) = load_forest(&events, &args.ingest)?;
    let series = generation_counts(&forest).context("deriving generation counts")?;
    let matrix = period_generation_matrix(&forest, period_len);
    let offsets = first_occurrence(&forest);

    let mut staged = Staged::default();
    // Keep a copy of the ingested log next to the derived outputs.
    staged.add_text(
        "events.csv",
        events_to_string(&parse_log_for_echo(&events, &args)?, &[]),
    );
    stage_stats(&mut staged, &series, args.tol, Some(&info))?;
    stage_fit(&mut staged, &series, &config, None, args.svg)?;
    stage_temporal(
        &mut staged,
        &matrix,
        Some(&offsets),
        args.window,
        "all",
        args.svg,
    )?;
    staged.add_manifest();

    let names: Vec<String> = staged.names().map(str::to_string).collect();
    staged.write_all(&args.output)?;
    println!("report written to {}:", args.output.display());
    for name in names {
        println!("  {name}");
    }
    Ok(())
}

fn parse_log_for_echo(path: &Path, args: &ReportArgs) -> Result<EventLog> {
    Ok(load_log(path, &args.ingest)?.log)
}
