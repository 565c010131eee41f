use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use photomesh::bench::{bench_case, Engine, Scenario, CSV_HEADER};
use photomesh::memory::peak_rss_bytes;
use photomesh::MeshKind;

use crate::{usage, Failure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Batch,
    Mesh,
    All,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "all")]
    scenario: ScenarioArg,
    /// Engines to measure (comma separated: sliced, reversible, dense).
    #[arg(long, value_delimiter = ',', default_value = "sliced,dense")]
    engines: Vec<Engine>,
    #[arg(long, default_value = "clements")]
    mesh: MeshKind,
    /// Mesh size for the batch scenario [default: 128, or 800 with --paper-scale].
    #[arg(long)]
    mesh_size: Option<usize>,
    /// Batch sizes for the batch scenario.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
    batches: Vec<usize>,
    /// Samples per batch-scenario run (one epoch-equivalent).
    #[arg(long, default_value_t = 1024)]
    samples: usize,
    /// Mesh sizes for the mesh scenario [default: 32,64,128,256, or 100..900 with --paper-scale].
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Batch size for the mesh scenario.
    #[arg(long, default_value_t = 128)]
    batch: usize,
    /// Mesh depth; defaults to the mesh size.
    #[arg(long)]
    nl: Option<usize>,
    /// Largest mesh size the dense engine is run at.
    #[arg(long, default_value_t = 256)]
    dense_cap: usize,
    /// Use the full-size grids.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// CSV output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: BenchArgs) -> Result<(), Failure> {
    if args.engines.is_empty() {
        return Err(usage("no engines selected"));
    }
    let mesh_size = args.mesh_size.unwrap_or(if args.paper_scale { 800 } else { 128 });
    let sizes = args.sizes.clone().unwrap_or_else(|| {
        if args.paper_scale {
            vec![100, 300, 500, 700, 900]
        } else {
            vec![32, 64, 128, 256]
        }
    });
    if sizes.iter().chain([&mesh_size]).any(|&n| n < 2) {
        return Err(usage("mesh sizes must be at least 2"));
    }
    if args.batches.contains(&0) || args.batch == 0 || args.samples == 0 {
        return Err(usage("batch sizes and sample counts must be positive"));
    }

    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "{CSV_HEADER}")?;

    let mut cases = Vec::new();
    if matches!(args.scenario, ScenarioArg::Batch | ScenarioArg::All) {
        for &b in &args.batches {
            cases.push((Scenario::Batch, mesh_size, b, args.samples));
        }
    }
    if matches!(args.scenario, ScenarioArg::Mesh | ScenarioArg::All) {
        for &n in &sizes {
            cases.push((Scenario::Mesh, n, args.batch, args.batch));
        }
    }
    for (scenario, ni, batch, samples) in cases {
        let nl = args.nl.unwrap_or(ni);
        for &engine in &args.engines {
            if engine == Engine::Dense && ni > args.dense_cap {
                eprintln!("skipping dense engine at ni={ni} (cap {})", args.dense_cap);
                continue;
            }
            let record = bench_case(scenario, engine, args.mesh, ni, nl, batch, samples, args.repeats)?;
            writeln!(out, "{}", record.csv_row())?;
            out.flush()?;
            eprintln!(
                "{} {} ni={ni} nl={nl} batch={batch}: {:.3}s, engine peak {} B, process peak rss {} B",
                scenario.name(),
                engine,
                record.secs,
                record.peak_bytes,
                peak_rss_bytes()
            );
        }
    }
    Ok(())
}
