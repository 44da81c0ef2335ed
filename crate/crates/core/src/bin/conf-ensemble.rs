use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use conf_ensemble::classifiers::Classifier;
use conf_ensemble::config::{DataSource, ExperimentConfig};
use conf_ensemble::manifest::{load_manifest, save_manifest};
use conf_ensemble::metrics::{score_histogram, ScoreKind, DEFAULT_ECE_BINS, DEFAULT_HISTOGRAM_BINS};
use conf_ensemble::{build_ensemble, Consensus, Data, Ensemble, Error, Result, RuntimeConfig};

#[derive(Parser)]
#[command(name = "conf-ensemble", version, about = "Confidence-gated sequential ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an ensemble from an experiment config.
    Build {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run cascaded inference over a dataset for one or more run-time thresholds.
    Evaluate {
        #[arg(long)]
        ensemble: PathBuf,
        /// `.csv`, `.json` (data source or experiment config) or `idx:<images>,<labels>`.
        #[arg(long)]
        data: String,
        /// Comma-separated; each entry is one value for every level or a
        /// colon-separated value per level. Defaults to the manifest's.
        #[arg(long)]
        runtime_thresholds: Option<String>,
        #[arg(long)]
        consensus: Option<Consensus>,
        #[arg(long, default_value_t = DEFAULT_ECE_BINS)]
        ece_bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Uncertainty and top-probability histograms of one member.
    Histograms {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long)]
        data: String,
        #[arg(long, default_value_t = 0)]
        member: usize,
        #[arg(long, default_value_t = DEFAULT_HISTOGRAM_BINS)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Standalone accuracy of a single member.
    Baseline {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long)]
        data: String,
        #[arg(long, default_value_t = 0)]
        member: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build { config, out } => build(&config, out),
        Command::Evaluate {
            ensemble,
            data,
            runtime_thresholds,
            consensus,
            ece_bins,
            out,
        } => evaluate(&ensemble, &data, runtime_thresholds.as_deref(), consensus, ece_bins, &out),
        Command::Histograms {
            ensemble,
            data,
            member,
            bins,
            out,
        } => histograms(&ensemble, &data, member, bins, &out),
        Command::Baseline {
            ensemble,
            data,
            member,
            out,
        } => baseline(&ensemble, &data, member, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write(path, bytes)
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_data(arg: &str) -> Result<Data> {
    let (source, base) = DataSource::resolve_arg(arg)?;
    source.load(&base)
}

fn build(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::from_file(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let out = out
        .or_else(|| cfg.output_dir.as_ref().map(|d| base.join(d)))
        .ok_or_else(|| Error::Config("no --out given and the config has no output_dir".into()))?;

    let data: Data = cfg.dataset.load(base)?;
    let build_cfg = cfg.build.to_build_config(&data)?;
    let (mut manifest, report) = build_ensemble(&data, &build_cfg)?;
    if let Some(first) = cfg.runtime_sweep().into_iter().next() {
        manifest.runtime = first;
    }

    save_manifest(&manifest, &out)?;
    write_json(&out.join("build_report.json"), &report)?;
    let subsets = out.join("subsets");
    mkdir(&subsets)?;
    for (level, view) in report.subsets.iter().enumerate().skip(1) {
        write(&subsets.join(format!("level_{level}.idx")), view.to_index_file())?;
    }

    println!("dataset {} ({} samples)", data.id(), data.len());
    for m in &report.members {
        println!(
            "member {}: {} samples, loss {:.4}, train accuracy {:.4}",
            m.level, m.subset_size, m.final_training_loss, m.training_accuracy
        );
    }
    println!("manifest digest {}", manifest.digest()?);
    Ok(())
}

fn parse_runtime_list(spec: &str, members: usize, consensus: Consensus) -> Result<Vec<RuntimeConfig>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|entry| {
            let values = entry
                .split(':')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad run-time threshold '{v}'")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let rcfg = if values.len() == 1 {
                RuntimeConfig::homogeneous(values[0], members, consensus)
            } else {
                RuntimeConfig {
                    runtime_thresholds: values,
                    consensus,
                }
            };
            rcfg.validate(members)?;
            Ok(rcfg)
        })
        .collect()
}

fn sweep_label(rcfg: &RuntimeConfig) -> String {
    let first = rcfg.runtime_thresholds[0];
    if rcfg.runtime_thresholds.iter().all(|&t| t == first) {
        format!("tr_{first}")
    } else {
        let parts: Vec<String> = rcfg.runtime_thresholds.iter().map(|t| t.to_string()).collect();
        format!("tr_{}", parts.join("-"))
    }
}

fn evaluate(
    ensemble_dir: &Path,
    data_arg: &str,
    thresholds: Option<&str>,
    consensus: Option<Consensus>,
    ece_bins: usize,
    out: &Path,
) -> Result<()> {
    let ensemble: Ensemble = load_manifest(ensemble_dir)?;
    let data = load_data(data_arg)?;
    ensemble.check_compatible(&data)?;
    let consensus = consensus.unwrap_or(ensemble.runtime.consensus);
    let sweep = match thresholds {
        Some(list) => parse_runtime_list(list, ensemble.num_members(), consensus)?,
        None => vec![RuntimeConfig {
            consensus,
            ..ensemble.runtime.clone()
        }],
    };
    if sweep.is_empty() {
        return Err(Error::Config("no run-time thresholds given".into()));
    }
    let baseline = ensemble.members[0].accuracy(&data)?;

    mkdir(out)?;
    let mut summary = Vec::with_capacity(sweep.len());
    for rcfg in &sweep {
        let record = ensemble.evaluate(rcfg, &data)?;
        let calibration = record.calibration(ece_bins)?;
        let label = sweep_label(rcfg);
        let dir = out.join(&label);
        mkdir(&dir)?;
        write_json(&dir.join("evaluation.json"), &record)?;
        write(&dir.join("samples.csv"), record.to_csv())?;
        write_json(&dir.join("calibration.json"), &calibration)?;
        write_json(&dir.join("utilization.json"), &record.utilization)?;

        let per_level: Vec<String> = (0..ensemble.num_members())
            .map(|l| format!("{:.3}", record.utilization.level_fraction(l)))
            .collect();
        println!(
            "{label} {consensus}: accuracy {:.4} (member 0: {baseline:.4}), ECE {:.4}, levels [{}], consensus {:.3}",
            record.accuracy,
            calibration.ece,
            per_level.join(", "),
            record.utilization.consensus_fraction()
        );
        summary.push(json!({
            "label": label,
            "runtime": rcfg,
            "accuracy": record.accuracy,
            "baseline_accuracy": baseline,
            "ece": calibration.ece,
            "utilization": record.utilization,
        }));
    }
    write_json(&out.join("summary.json"), &summary)
}

fn member_scores(ensemble: &Ensemble, data: &Data, member: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    let model = ensemble.members.get(member).ok_or_else(|| {
        Error::InvalidInput(format!(
            "member {member} does not exist (ensemble has {})",
            ensemble.num_members()
        ))
    })?;
    ensemble.check_compatible(data)?;
    let mut u = Vec::with_capacity(data.len());
    let mut top = Vec::with_capacity(data.len());
    let mut correct = Vec::with_capacity(data.len());
    for s in data.samples() {
        let p = model.predict(&s.features)?;
        u.push(p.uncertainty.value());
        top.push(p.top_probability);
        correct.push(p.class_index == s.label);
    }
    Ok((u, top, correct))
}

fn histograms(ensemble_dir: &Path, data_arg: &str, member: usize, bins: usize, out: &Path) -> Result<()> {
    let ensemble: Ensemble = load_manifest(ensemble_dir)?;
    let data = load_data(data_arg)?;
    let (u, top, correct) = member_scores(&ensemble, &data, member)?;
    let uh = score_histogram(&u, &correct, ScoreKind::Uncertainty, bins)?;
    let ph = score_histogram(&top, &correct, ScoreKind::TopProbability, bins)?;
    mkdir(out)?;
    write(&out.join(format!("member_{member}_uncertainty.csv")), uh.to_csv())?;
    write(&out.join(format!("member_{member}_probability.csv")), ph.to_csv())?;
    println!("member {member}: {} samples histogrammed into {bins} bins", uh.total());
    Ok(())
}

fn baseline(ensemble_dir: &Path, data_arg: &str, member: usize, out: Option<&Path>) -> Result<()> {
    let ensemble: Ensemble = load_manifest(ensemble_dir)?;
    let data = load_data(data_arg)?;
    let (_, _, correct) = member_scores(&ensemble, &data, member)?;
    let accuracy = correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64;
    println!("member {member} accuracy {accuracy}");
    if let Some(out) = out {
        mkdir(out)?;
        write_json(
            &out.join("baseline.json"),
            &json!({ "member": member, "accuracy": accuracy, "samples": data.len() }),
        )?;
    }
    Ok(())
}
