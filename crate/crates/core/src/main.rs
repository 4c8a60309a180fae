use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use gapcount::harness::{self, report::format_float, ExperimentConfig, StudyKind};

#[derive(Parser)]
#[command(version, about = "Gap eigenvalue counting studies for D_m - alpha V")]
struct Cli {
    /// weyl, theorem2, crossterm, box, flow-trace or oracle
    study: String,
    /// Flat key=value config file
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for independent coupling points
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: &Cli) -> gapcount::Result<i32> {
    let study: StudyKind = cli.study.parse()?;
    let mut config = ExperimentConfig::from_file(&cli.config)?;
    if config.study != study {
        return Err(gapcount::Error::Config(format!(
            "command asks for study {study} but the config is for {}",
            config.study
        )));
    }
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    if cli.workers == 0 {
        return Err(gapcount::Error::Config("--workers must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| gapcount::Error::Config(format!("cannot start worker pool: {e}")))?;

    if study == StudyKind::Oracle {
        let values = harness::run_oracle(&config)?;
        let text: String = values.iter().map(|(k, v)| format!("{k}={}\n", format_float(*v))).collect();
        print!("{text}");
        std::fs::create_dir_all(&cli.out).map_err(|e| gapcount::Error::Io { path: cli.out.clone(), source: e })?;
        for (name, contents) in [("oracle.txt", text.as_str()), ("config.echo", config.echo().as_str())] {
            let path = cli.out.join(name);
            std::fs::write(&path, contents).map_err(|e| gapcount::Error::Io { path, source: e })?;
        }
        return Ok(0);
    }

    let report = pool.install(|| harness::run_study(&config))?;
    harness::emit_outputs(&report, &cli.out)?;
    eprintln!(
        "{study}: {} grid(s), runtime {:.3} s, output in {}",
        report.grids.len(),
        report.runtime.as_secs_f64(),
        cli.out.display()
    );
    if !report.ratios_monotone() {
        eprintln!("warning: ratio column is not monotone");
    }
    if !report.degenerate.is_empty() {
        eprintln!("degenerate thresholds at {:?}", report.degenerate);
    }
    Ok(harness::report_exit_code(&report))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
