//! `wartem` command-line interface.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use wartem_core::evaluation::{
    config_hash, eval_baseline_nn, eval_dl, eval_wartem_dl, eval_wartem_nn, mark_best, parse_report_csv, report_csv,
    report_text,
};
use wartem_core::rng::{mix, rng_from_seed};
use wartem_core::warping::{sample_warp_count, warp_n_times};
use wartem_core::{
    load_twin, load_ucr_tsv, multi_seed_train, save_twin, write_ucr_tsv, DistanceKind, LabeledDataset, TwinAe,
    WarpDirection, WarpFamily,
};

use config::RunConfig;

const VERSION: &str = concat!("wartem ", env!("CARGO_PKG_VERSION"));

#[derive(Parser)]
#[command(name = "wartem", version, about = "Warping-resilient time-series embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Warp every series of a UCR TSV file.
    Warp {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        direction: WarpDirection,
        #[arg(long)]
        family: WarpFamily,
        /// Exact number of warps per series; drawn from U{0..=m/2} when absent.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one twin auto-encoder per configured seed.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output stem; files are `<stem>.seed<s>.wartem` and `<stem>.seed<s>.history.csv`.
        #[arg(long)]
        output: PathBuf,
    },
    /// Write embeddings as CSV: label, then the code values.
    Embed {
        #[arg(long = "model", required = true, num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a method and append the result to a report CSV.
    Eval {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long = "model", num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Dataset name in the report; defaults to the training file stem.
        #[arg(long)]
        dataset: Option<String>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    WartemNn,
    EuclNn,
    DtwNn,
    WartemDl,
    Dl,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    let result = match cli.command {
        Command::Warp {
            input,
            output,
            direction,
            family,
            count,
            seed,
        } => cmd_warp(&input, &output, direction, family, count, seed),
        Command::Train { train, config, output } => cmd_train(&train, &config, &output),
        Command::Embed {
            models,
            input,
            output,
            config,
        } => cmd_embed(&models, &input, &output, config.as_deref()),
        Command::Eval {
            mode,
            train,
            test,
            models,
            config,
            report,
            dataset,
        } => cmd_eval(mode, &train, &test, &models, config.as_deref(), &report, dataset),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("WARTEM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("WARTEM_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn load_dataset(path: &Path, config: &RunConfig) -> Result<LabeledDataset> {
    let data = load_ucr_tsv(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(if config.normalize()? { data.znormalized() } else { data })
}

fn load_models(paths: &[PathBuf]) -> Result<Vec<TwinAe>> {
    paths
        .iter()
        .map(|p| load_twin(p).with_context(|| format!("loading model {}", p.display())))
        .collect()
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

/// `<dir>/<stem>.<suffix>` for an output path or stem.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    path.with_file_name(format!("{name}.{suffix}"))
}

fn write_provenance(path: &Path, command: &str, details: &str, config: &str) -> Result<()> {
    let text = format!("version = {VERSION}\ncommand = {command}\n{details}\n# resolved config\n{config}");
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_warp(
    input: &Path,
    output: &Path,
    direction: WarpDirection,
    family: WarpFamily,
    count: Option<usize>,
    seed: u64,
) -> Result<()> {
    let data = load_ucr_tsv(input).with_context(|| format!("loading {}", input.display()))?;
    let mut index = 0u64;
    let warped = data.map_series(|t| {
        let mut rng = rng_from_seed(mix(seed, index));
        index += 1;
        let r = count.unwrap_or_else(|| sample_warp_count(t.len(), &mut rng));
        warp_n_times(t, r, direction, family, &mut rng)
    })?;
    write_ucr_tsv(&warped, output).with_context(|| format!("writing {}", output.display()))?;
    let details = format!(
        "input = {}\ndirection = {direction:?}\nfamily = {family}\ncount = {}\nseed = {seed}",
        input.display(),
        count.map_or("random".into(), |c| c.to_string()),
    );
    write_provenance(&sibling(&output.with_extension(""), "provenance.txt"), "warp", &details, "")
}

fn cmd_train(train_path: &Path, config_path: &Path, output: &Path) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let train_cfg = config.train_config()?;
    let seeds = config.seeds()?;
    let data = load_dataset(train_path, &config)?;
    let ae = config.ae_config(data.m())?;

    let runs = multi_seed_train(data.series(), &ae, &train_cfg, &seeds)?;
    for (seed, (model, history)) in seeds.iter().zip(&runs) {
        let model_path = sibling(output, &format!("seed{seed}.wartem"));
        save_twin(model, &model_path).with_context(|| format!("writing {}", model_path.display()))?;
        history.write_csv(sibling(output, &format!("seed{seed}.history.csv")))?;
        println!(
            "seed {seed}: best held-out loss {:.6} at epoch {} (stopped after {})",
            history.best_holdout_loss(),
            history.best_epoch,
            history.stopped_epoch
        );
    }
    let details = format!(
        "train = {}\nseeds = {}",
        train_path.display(),
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
    );
    write_provenance(&sibling(output, "provenance.txt"), "train", &details, &config.resolved_text())
}

fn cmd_embed(models: &[PathBuf], input: &Path, output: &Path, config_path: Option<&Path>) -> Result<()> {
    let config = load_config(config_path)?;
    let data = load_dataset(input, &config)?;
    let twins = load_models(models)?;
    let stem = output.with_extension("");
    for (path, twin) in models.iter().zip(&twins) {
        if twin.config.input_length != data.m() {
            bail!(
                "model {} expects length {}, data has length {}",
                path.display(),
                twin.config.input_length,
                data.m()
            );
        }
        let target = if models.len() == 1 {
            output.to_path_buf()
        } else {
            sibling(&stem, &format!("{}.csv", stem_of(path)))
        };
        let rows = twin.embed_all(data.series())?;
        let mut text = String::new();
        for (label, row) in data.labels().iter().zip(&rows) {
            text.push_str(&data.label_names()[*label]);
            for v in row {
                write!(text, ",{v}").unwrap();
            }
            text.push('\n');
        }
        fs::write(&target, text).with_context(|| format!("writing {}", target.display()))?;
    }
    let details = format!(
        "input = {}\nmodels = {}",
        input.display(),
        models.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
    );
    write_provenance(&sibling(&stem, "provenance.txt"), "embed", &details, &config.resolved_text())
}

fn cmd_eval(
    mode: Mode,
    train_path: &Path,
    test_path: &Path,
    models: &[PathBuf],
    config_path: Option<&Path>,
    report: &Path,
    dataset: Option<String>,
) -> Result<()> {
    if matches!(mode, Mode::WartemNn | Mode::WartemDl) && models.is_empty() {
        bail!("usage: wartem-nn and wartem-dl require at least one --model");
    }
    let config = load_config(config_path)?;
    let train = load_dataset(train_path, &config)?;
    let test = load_dataset(test_path, &config)?;
    let dataset = dataset.unwrap_or_else(|| stem_of(train_path));
    let resolved = config.resolved_text();
    let hash = config_hash(&resolved);

    let new_entries = match mode {
        Mode::EuclNn => vec![eval_baseline_nn(&train, &test, DistanceKind::SquaredEuclidean, &dataset, &hash)?],
        Mode::DtwNn => {
            let kind = DistanceKind::Dtw {
                band: config.dtw_band()?,
            };
            vec![eval_baseline_nn(&train, &test, kind, &dataset, &hash)?]
        }
        Mode::WartemNn => vec![eval_wartem_nn(&load_models(models)?, &train, &test, &dataset, &hash)?],
        Mode::Dl => eval_dl(&train, &test, &config.classifier_config()?, &dataset, &hash)?,
        Mode::WartemDl => eval_wartem_dl(
            &load_models(models)?,
            &train,
            &test,
            &config.classifier_config()?,
            &dataset,
            &hash,
        )?,
    };
    for e in &new_entries {
        match e.std {
            Some(s) => println!("{} {} {} {:.2} ± {:.2}", e.dataset, e.method, e.selection.as_str(), e.mean, s),
            None => println!("{} {} {} {:.2}", e.dataset, e.method, e.selection.as_str(), e.mean),
        }
    }

    let mut entries = if report.exists() {
        let text = fs::read_to_string(report).with_context(|| format!("reading {}", report.display()))?;
        parse_report_csv(&text).with_context(|| format!("parsing {}", report.display()))?
    } else {
        Vec::new()
    };
    entries.extend(new_entries);
    mark_best(&mut entries);
    fs::write(report, report_csv(&entries)?).with_context(|| format!("writing {}", report.display()))?;
    let table = report.with_extension("txt");
    fs::write(&table, report_text(&entries)).with_context(|| format!("writing {}", table.display()))?;

    let details = format!(
        "train = {}\ntest = {}\nmode = {}\nmodels = {}\nconfig_hash = {hash}",
        train_path.display(),
        test_path.display(),
        mode.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default(),
        models.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
    );
    write_provenance(
        &sibling(&report.with_extension(""), "provenance.txt"),
        "eval",
        &details,
        &resolved,
    )
}
