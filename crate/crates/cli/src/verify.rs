use clap::Args;
use photomesh::dense::{mesh_matrix, random_phases};
use photomesh::verify::{self, VerifyOptions};
use photomesh::{MeshKind, MeshTopology};

use crate::{usage, Failure};

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Ports of a single configuration to check (requires --nl or defaults nl = ni).
    #[arg(long)]
    ni: Option<usize>,
    #[arg(long)]
    nl: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict to one mesh kind.
    #[arg(long)]
    mesh: Option<MeshKind>,
    /// Print the topology of the selected configuration and exit.
    #[arg(long)]
    dump_topology: bool,
    /// Print the dense transfer matrix of the selected configuration and exit.
    #[arg(long)]
    dump_matrix: bool,
    /// Perturb the phases seen by the sliced engine (self-test of the checker).
    #[arg(long, hide = true)]
    corrupt_phases: bool,
}

pub fn run(args: VerifyArgs) -> Result<(), Failure> {
    if args.nl.is_some() && args.ni.is_none() {
        return Err(usage("--nl needs --ni"));
    }
    if args.dump_topology || args.dump_matrix {
        let ni = args.ni.ok_or_else(|| usage("dumps need --ni"))?;
        let nl = args.nl.unwrap_or(ni);
        let kind = args.mesh.unwrap_or(MeshKind::Clements);
        let topology = MeshTopology::rectangular(kind, ni, nl).map_err(usage)?;
        if args.dump_topology {
            print!("{topology}");
        }
        if args.dump_matrix {
            let phases = random_phases(&topology, args.seed.unwrap_or(0));
            print!("{}", mesh_matrix(&topology, &phases)?);
        }
        return Ok(());
    }

    let mut opts = match args.ni {
        Some(ni) => {
            if ni < 2 {
                return Err(usage("--ni must be at least 2"));
            }
            VerifyOptions::single(ni, args.nl.unwrap_or(ni), args.seed.unwrap_or(0))
        }
        None => {
            let mut o = VerifyOptions::default();
            if let Some(seed) = args.seed {
                o.seeds = vec![seed];
                o.gradient_seeds = vec![seed];
            }
            o
        }
    };
    if let Some(kind) = args.mesh {
        opts.kinds = vec![kind];
    }
    opts.corrupt_phases = args.corrupt_phases;

    let report = verify::run(&opts)?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check(anyhow::anyhow!(
            "verification failed: {}",
            report.first_failure().unwrap_or_else(|| "empty suite".into())
        )))
    }
}
