use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tabsynth::data::{load_csv, write_csv, Dataset, LevelCheck, LoadOptions, TableSchema};
use tabsynth::llm::{parse_tabular, ApiKey, LlmClient, ParseWarning, RawGeneration};
use tabsynth::metrics::{evaluate, row_overlap, EvaluateOptions};
use tabsynth::profile::{profile, round_profile, DatasetProfile};
use tabsynth::prompt::{
    obfuscate, prepare_prompt, GenerationSpec, OutputFormat, PreparedPrompt, PromptTemplate,
};
use tabsynth::report::{
    ci_overlap_csv, ci_table_csv, heatmap_csv, long_values_csv, markdown_table,
    ordinal_frequencies_csv, LabeledReport,
};
use tabsynth::sampler::local_sample;

use crate::config::{Backend, RunConfig};
use crate::error::CliError;
use crate::manifest::Recorder;
use crate::{
    Cli, Command, EvaluateArgs, ExportArgs, GenerateArgs, ProfileArgs, PromptArgs, PromptOptions,
    RealArgs,
};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    match cli.command {
        Command::Profile(args) => cmd_profile(&cfg, args),
        Command::Prompt(args) => cmd_prompt(&cfg, args),
        Command::Generate(args) => cmd_generate(&cfg, args),
        Command::Evaluate(args) => cmd_evaluate(&cfg, args),
        Command::ExportPlots(args) => cmd_export_plots(args),
    }
}

fn json_text(value: &impl Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn load_schema(rec: &mut Recorder, path: &Path) -> Result<TableSchema> {
    rec.input(path)?;
    Ok(TableSchema::from_json_file(path)?)
}

fn load_real(rec: &mut Recorder, args: &RealArgs) -> Result<Dataset> {
    let schema = load_schema(rec, &args.schema)?;
    rec.input(&args.real)?;
    rec.flag("drop_incomplete", args.drop_incomplete);
    let opts = LoadOptions {
        drop_incomplete: args.drop_incomplete,
        ..Default::default()
    };
    Ok(load_csv(&args.real, &schema, &opts)?)
}

fn load_synthetic(rec: &mut Recorder, path: &Path, schema: &TableSchema) -> Result<Dataset> {
    rec.input(path)?;
    let opts = LoadOptions {
        levels: LevelCheck::Lenient,
        ..Default::default()
    };
    Ok(load_csv(path, schema, &opts)?)
}

fn load_profile(rec: &mut Recorder, path: &Path) -> Result<DatasetProfile> {
    rec.input(path)?;
    Ok(DatasetProfile::load(path)?)
}

fn csv_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf)?;
    Ok(buf)
}

/// Labels for the synthetic files: explicit ones or file stems. They must
/// be unique and must not clash with `reserved`.
fn labels(paths: &[PathBuf], given: &[String], reserved: Option<&str>) -> Result<Vec<String>> {
    let labels: Vec<String> = if given.is_empty() {
        paths
            .iter()
            .map(|p| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string())
            })
            .collect()
    } else if given.len() == paths.len() {
        given.to_vec()
    } else {
        return Err(CliError::Usage(format!(
            "{} labels given for {} synthetic files",
            given.len(),
            paths.len()
        )));
    };
    let mut seen = HashSet::new();
    for label in &labels {
        if Some(label.as_str()) == reserved || !seen.insert(label.as_str()) {
            return Err(CliError::Usage(format!(
                "label `{label}` is used twice; pass distinct --label values"
            )));
        }
    }
    Ok(labels)
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cmd_profile(cfg: &RunConfig, args: ProfileArgs) -> Result<()> {
    let mut rec = Recorder::new(&args.out)?;
    let real = load_real(&mut rec, &args.real)?;
    let decimals = args.decimals.unwrap_or(cfg.generation.decimals);
    rec.flag("decimals", decimals);

    let p = profile(&real)?;
    for w in &p.warnings {
        eprintln!("warning: {w}");
    }
    let (prompt_profile, names) = obfuscate(&round_profile(&p, decimals));
    rec.write("profile.json", p.to_json()? + "\n")?;
    rec.write("prompt_profile.json", prompt_profile.to_json()? + "\n")?;
    rec.write("name_map.json", json_text(&names)?)?;
    rec.finish("profile")?;
    println!(
        "profiled {} rows x {} columns into {}",
        p.n_rows,
        p.stats.len(),
        args.out.display()
    );
    Ok(())
}

fn generation_spec(cfg: &RunConfig, opts: &PromptOptions, rows: usize) -> GenerationSpec {
    GenerationSpec {
        n_rows: rows,
        decimals: opts.decimals.unwrap_or(cfg.generation.decimals),
        corr_threshold: opts.corr_threshold.unwrap_or(cfg.generation.corr_threshold),
        include_all_correlations: opts.include_all_correlations
            || cfg.generation.include_all_correlations,
        output_format: if opts.inline_csv {
            OutputFormat::InlineCsv
        } else {
            cfg.generation.output_format
        },
        restrictions: Vec::new(),
    }
}

fn render_prompt(
    rec: &mut Recorder,
    cfg: &RunConfig,
    opts: &PromptOptions,
    p: &DatasetProfile,
    schema: &TableSchema,
    rows: usize,
) -> Result<PreparedPrompt> {
    let spec = generation_spec(cfg, opts, rows);
    rec.flag("rows", spec.n_rows);
    rec.flag("decimals", spec.decimals);
    rec.flag("corr_threshold", spec.corr_threshold);
    rec.flag("include_all_correlations", spec.include_all_correlations);
    rec.flag("output_format", spec.output_format);
    let template = match opts.template.as_ref().or(cfg.generation.template.as_ref()) {
        Some(path) => {
            rec.input(path)?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            PromptTemplate::parse(&text)?
        }
        None => PromptTemplate::default(),
    };
    let prepared = prepare_prompt(p, schema, &spec, &template)?;
    rec.write(&format!("prompt_n{rows}.txt"), &prepared.text)?;
    rec.write("name_map.json", json_text(&prepared.names)?)?;
    Ok(prepared)
}

fn cmd_prompt(cfg: &RunConfig, args: PromptArgs) -> Result<()> {
    let mut rec = Recorder::new(&args.out)?;
    let p = load_profile(&mut rec, &args.profile)?;
    let schema = load_schema(&mut rec, &args.schema)?;
    let rows = args.rows.unwrap_or(p.n_rows);
    render_prompt(&mut rec, cfg, &args.options, &p, &schema, rows)?;
    rec.finish("prompt")?;
    println!(
        "wrote {}",
        args.out.join(format!("prompt_n{rows}.txt")).display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrialRecord {
    file: String,
    backend: Backend,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    rows_requested: usize,
    rows_actual: usize,
    warnings: Vec<ParseWarning>,
}

#[derive(Serialize)]
struct OverlapRecord {
    a: String,
    b: String,
    /// Share of rows of `a` that match a row of `b`.
    overlap: f64,
}

fn cmd_generate(cfg: &RunConfig, args: GenerateArgs) -> Result<()> {
    let backend = args.backend.or(cfg.backend).unwrap_or(Backend::Local);
    let mut rec = Recorder::new(&args.out)?;
    let p = load_profile(&mut rec, &args.profile)?;
    let schema = load_schema(&mut rec, &args.schema)?;
    let rows = args.rows.unwrap_or(p.n_rows);
    let trials = match (args.trials, args.response.len()) {
        (Some(t), _) => t,
        (None, 0) => cfg.generation.trials,
        (None, n) => n,
    };
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    if rows == 0 {
        return Err(CliError::Usage("--rows must be at least 1".into()));
    }
    rec.flag("backend", backend);
    rec.flag("trials", trials);
    let file_name = |i: usize| {
        if trials == 1 {
            format!("{}.csv", args.name)
        } else {
            format!("{}_trial{}.csv", args.name, i + 1)
        }
    };

    let mut records = Vec::with_capacity(trials);
    let mut datasets = Vec::with_capacity(trials);
    match backend {
        Backend::Local => {
            if !args.response.is_empty() {
                return Err(CliError::Usage("--response requires --backend llm".into()));
            }
            let seed = cfg.seed.ok_or_else(|| {
                CliError::Usage("--seed is required for the local backend".into())
            })?;
            let decimals = args.options.decimals.unwrap_or(cfg.generation.decimals);
            rec.flag("seed", seed);
            rec.flag("rows", rows);
            rec.flag("decimals", decimals);
            let target = round_profile(&p, decimals);
            for i in 0..trials {
                let trial_seed = seed.wrapping_add(i as u64);
                let ds = local_sample(&target, &schema, rows, trial_seed)?;
                rec.write(&file_name(i), csv_bytes(&ds)?)?;
                records.push(TrialRecord {
                    file: file_name(i),
                    backend,
                    seed: Some(trial_seed),
                    rows_requested: rows,
                    rows_actual: ds.n_rows(),
                    warnings: Vec::new(),
                });
                datasets.push(ds);
            }
        }
        Backend::Llm => {
            let prepared = render_prompt(&mut rec, cfg, &args.options, &p, &schema, rows)?;
            if !args.response.is_empty() && args.response.len() != trials {
                return Err(CliError::Usage(format!(
                    "{} --response files given for {trials} trials",
                    args.response.len()
                )));
            }
            let client = if args.response.is_empty() {
                let key = ApiKey::from_env(&cfg.llm.api_key_env)?;
                rec.flag("model", &cfg.llm.model);
                rec.flag("endpoint", &cfg.llm.endpoint);
                Some(LlmClient::new(cfg.llm.clone(), key)?.with_audit_dir(args.out.join("audit")))
            } else {
                None
            };
            for i in 0..trials {
                let raw = match &client {
                    Some(client) => client.generate(&prepared.text)?,
                    None => {
                        let path = &args.response[i];
                        rec.input(path)?;
                        let text =
                            std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                        RawGeneration::from_text(prepared.text.clone(), text)
                    }
                };
                let stem = file_name(i).trim_end_matches(".csv").to_string();
                rec.write(&format!("{stem}.raw.json"), json_text(&raw)?)?;
                let parsed = parse_tabular(&raw, &schema, &prepared.names, Some(rows))?;
                for w in &parsed.warnings {
                    eprintln!("warning: {}: {}", file_name(i), serde_json::to_string(w)?);
                }
                rec.write(&file_name(i), csv_bytes(&parsed.dataset)?)?;
                records.push(TrialRecord {
                    file: file_name(i),
                    backend,
                    seed: None,
                    rows_requested: rows,
                    rows_actual: parsed.dataset.n_rows(),
                    warnings: parsed.warnings,
                });
                datasets.push(parsed.dataset);
            }
            if client.is_some() {
                record_audit_files(&mut rec)?;
            }
        }
    }

    rec.write("generation.json", json_text(&records)?)?;
    if trials > 1 {
        let tol = cfg.metrics.tol_rel;
        let mut overlaps = Vec::new();
        for i in 0..trials {
            for j in 0..trials {
                if i != j {
                    overlaps.push(OverlapRecord {
                        a: records[i].file.clone(),
                        b: records[j].file.clone(),
                        overlap: row_overlap(&datasets[i], &datasets[j], tol)?,
                    });
                }
            }
        }
        rec.flag("tol_rel", tol);
        rec.write("row_overlap.json", json_text(&overlaps)?)?;
    }
    rec.finish("generate")?;
    for r in &records {
        println!(
            "wrote {} ({} of {} rows)",
            args.out.join(&r.file).display(),
            r.rows_actual,
            r.rows_requested
        );
    }
    Ok(())
}

fn record_audit_files(rec: &mut Recorder) -> Result<()> {
    let dir = rec.out_dir().join("audit");
    let Ok(entries) = std::fs::read_dir(&dir) else {
        return Ok(());
    };
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        rec.output(&format!("audit/{name}"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluationFile<'a> {
    real_rows: usize,
    tol_rel: f64,
    runs: &'a [LabeledReport],
}

fn cmd_evaluate(cfg: &RunConfig, args: EvaluateArgs) -> Result<()> {
    let mut rec = Recorder::new(&args.out)?;
    let real = load_real(&mut rec, &args.real)?;
    let names = labels(&args.synth, &args.label, None)?;
    let tol_rel = args.tol_rel.unwrap_or(cfg.metrics.tol_rel);
    rec.flag("tol_rel", tol_rel);
    rec.flag("labels", &names);
    let opts = EvaluateOptions { tol_rel };

    let mut runs = Vec::with_capacity(args.synth.len());
    for (path, label) in args.synth.iter().zip(names) {
        let synth = load_synthetic(&mut rec, path, real.schema())?;
        let report = evaluate(&real, &synth, &opts)?;
        runs.push(LabeledReport { label, report });
    }

    let table = markdown_table(&runs);
    let mut md = format!(
        "# Evaluation\n\nReal data: {} rows.\n\n{table}",
        real.n_rows()
    );
    let warnings: Vec<String> = runs
        .iter()
        .flat_map(|run| {
            run.report
                .fidelity
                .iter()
                .chain(std::iter::once(&run.report.ci_overlap))
                .flat_map(move |s| {
                    s.warnings
                        .iter()
                        .map(move |w| format!("- {}: {w}", run.label))
                })
        })
        .collect();
    if !warnings.is_empty() {
        md.push_str("\nWarnings:\n\n");
        md.push_str(&warnings.join("\n"));
        md.push('\n');
    }
    rec.write(
        "report.json",
        json_text(&EvaluationFile {
            real_rows: real.n_rows(),
            tol_rel,
            runs: &runs,
        })?,
    )?;
    rec.write("report.md", &md)?;
    rec.finish("evaluate")?;
    print!("{table}");
    Ok(())
}

fn cmd_export_plots(args: ExportArgs) -> Result<()> {
    let mut rec = Recorder::new(&args.out)?;
    let real = load_real(&mut rec, &args.real)?;
    let names = labels(&args.synth, &args.label, Some("real"))?;
    let mut synths = Vec::with_capacity(args.synth.len());
    for path in &args.synth {
        synths.push(load_synthetic(&mut rec, path, real.schema())?);
    }
    rec.flag("labels", &names);

    let mut all: Vec<(&str, &Dataset)> = vec![("real", &real)];
    all.extend(names.iter().map(String::as_str).zip(&synths));
    for (label, ds) in &all {
        rec.write(
            &format!("heatmap_{}.csv", file_safe(label)),
            heatmap_csv(ds)?,
        )?;
    }
    rec.write("ci_table.csv", ci_table_csv(&all)?)?;
    if !synths.is_empty() {
        rec.write("ci_overlap.csv", ci_overlap_csv(&real, &all[1..])?)?;
    }
    rec.write("ordinal_frequencies.csv", ordinal_frequencies_csv(&all)?)?;
    rec.write("values_long.csv", long_values_csv(&all)?)?;
    rec.finish("export-plots")?;
    println!(
        "wrote plot data for {} datasets to {}",
        all.len(),
        args.out.display()
    );
    Ok(())
}
