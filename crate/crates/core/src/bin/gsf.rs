use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gsf_core::imgio::{load_image, DatasetManifest};
use gsf_core::model_file::{load_model, save_model};
use gsf_core::pipeline::{self, FeatureExtractor, PipelineConfig};
use gsf_core::Result;

#[derive(Parser)]
#[command(name = "gsf", version, about = "Gabor surface feature face matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one feature file per manifest image.
    Extract {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train region subspaces (and weights) on the manifest's train split.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Print the matching score of two images.
    Match {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Plain sum of region similarities even if the model has weights.
        #[arg(long)]
        unweighted: bool,
    },
    /// Rank-1 identification of the probe split against the gallery split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        unweighted: bool,
    },
    /// Print the region weight grid.
    Weights {
        #[arg(long)]
        model: PathBuf,
    },
}

fn feature_file_name(index: usize, path: &Path) -> String {
    let stem = path.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned());
    format!("{index:05}_{stem}.feat")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract { config, manifest, out } => {
            let cfg = PipelineConfig::load(&config)?;
            let manifest = DatasetManifest::load(&manifest)?;
            let extractor = FeatureExtractor::new(&cfg.feature)?;
            fs::create_dir_all(&out)?;
            for (i, entry) in manifest.entries.iter().enumerate() {
                let seq = extractor.extract(&load_image(&entry.path)?)?;
                let mut text = format!("# subject={} role={}\n", entry.subject, entry.role.as_str());
                for region in &seq.regions {
                    let line: Vec<String> = region.values.iter().map(f64::to_string).collect();
                    text.push_str(&line.join(" "));
                    text.push('\n');
                }
                fs::write(out.join(feature_file_name(i, &entry.path)), text)?;
            }
            println!("wrote {} feature files to {}", manifest.entries.len(), out.display());
        }
        Command::Train { config, manifest, model } => {
            let cfg = PipelineConfig::load(&config)?;
            let manifest = DatasetManifest::load(&manifest)?;
            let trained = pipeline::train(&manifest, &cfg)?;
            save_model(&trained, &model)?;
            println!(
                "trained {} regions, projected dimension {}",
                trained.regions.len(),
                trained.projected_dim()
            );
        }
        Command::Match { model, a, b, unweighted } => {
            let m = load_model(&model)?;
            let score = pipeline::match_images(&m, &load_image(&a)?, &load_image(&b)?, m.weighted && !unweighted)?;
            println!("{score}");
        }
        Command::Evaluate {
            model,
            manifest,
            report,
            unweighted,
        } => {
            let m = load_model(&model)?;
            let manifest = DatasetManifest::load(&manifest)?;
            let r = pipeline::evaluate(&m, &manifest, m.weighted && !unweighted)?;
            fs::write(&report, r.to_text())?;
            println!("rank1 = {}", r.rank1_rate);
        }
        Command::Weights { model } => {
            let m = load_model(&model)?;
            let n = m.feature.partition.n_cols;
            for row in m.weights.chunks(n) {
                let cells: Vec<String> = row.iter().map(|w| format!("{w:.4}")).collect();
                println!("{}", cells.join(" "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = pipeline::thread_count();
    match pipeline::with_threads(threads, || run(cli)).and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
