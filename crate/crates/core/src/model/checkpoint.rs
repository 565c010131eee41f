//! Plain-text model checkpoints.
//!
//! ```text
//! photomesh-checkpoint v1
//! seed <u64 | none>
//! encoding <raw | l2 | power>
//! input <width>
//! stage mesh
//! mesh <kind> ni=<n> nl=<n>
//! <one line per window, as in the topology text format>
//! phases <count>
//! <count hex words>
//! stage photodetector
//! stage bias <n>
//! <n hex words>
//! stage gain <n>
//! <n hex words>
//! stage readout <classes>
//! end
//! ```
//!
//! Every parameter is written as the 16-digit hex of its IEEE-754 bit
//! pattern, so loading reproduces the saved model bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{Encoding, Model, Stage};
use crate::error::{Error, Result};
use crate::topology::{MeshTopology, PhaseStore};

pub const CHECKPOINT_MAGIC: &str = "photomesh-checkpoint v1";

fn hex_line(values: &[f64]) -> String {
    values.iter().map(|v| format!("{:016x}", v.to_bits())).collect::<Vec<_>>().join(" ")
}

pub fn write_checkpoint(model: &Model) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
    match model.seed() {
        Some(s) => {
            let _ = writeln!(out, "seed {s}");
        }
        None => out.push_str("seed none\n"),
    }
    let enc = match model.encoding() {
        Encoding::Raw => "raw",
        Encoding::L2Normalized => "l2",
        Encoding::PortPower => "power",
    };
    let _ = writeln!(out, "encoding {enc}");
    let _ = writeln!(out, "input {}", model.input_width());
    for stage in model.stages() {
        match stage {
            Stage::Mesh { topology, phases } => {
                out.push_str("stage mesh\n");
                out.push_str(&topology.to_string());
                let _ = writeln!(out, "phases {}", phases.len());
                let _ = writeln!(out, "{}", hex_line(phases.as_slice()));
            }
            Stage::Photodetector => out.push_str("stage photodetector\n"),
            Stage::Bias(v) => {
                let _ = writeln!(out, "stage bias {}\n{}", v.len(), hex_line(v));
            }
            Stage::DiagonalGain(v) => {
                let _ = writeln!(out, "stage gain {}\n{}", v.len(), hex_line(v));
            }
            Stage::Readout { classes } => {
                let _ = writeln!(out, "stage readout {classes}");
            }
        }
    }
    out.push_str("end\n");
    out
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path)?;
    parse_checkpoint(&text).map_err(|e| match e {
        Error::Parse { line, msg, .. } => Error::Parse { path: path.to_path_buf(), line, msg },
        other => other,
    })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end())
            }
            None => Err(self.err("unexpected end of checkpoint")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { path: "<checkpoint>".into(), line: self.line, msg: msg.into() }
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let l = self.next()?;
        l.strip_prefix(key)
            .and_then(|v| v.strip_prefix(' '))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| self.err(format!("expected '{key} <value>', got '{l}'")))
    }

    fn hex_values(&mut self, n: usize) -> Result<Vec<f64>> {
        let l = self.next()?;
        let values: Vec<f64> = l
            .split_whitespace()
            .map(|w| u64::from_str_radix(w, 16).map(f64::from_bits))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| self.err(format!("bad parameter word: {e}")))?;
        if values.len() != n {
            return Err(self.err(format!("expected {n} values, found {}", values.len())));
        }
        Ok(values)
    }
}

pub fn parse_checkpoint(text: &str) -> Result<Model> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    if lines.next()? != CHECKPOINT_MAGIC {
        return Err(lines.err("not a photomesh checkpoint (or unsupported version)"));
    }
    let seed: String = lines.keyed("seed")?;
    let seed = match seed.as_str() {
        "none" => None,
        s => Some(s.parse::<u64>().map_err(|_| lines.err("bad seed"))?),
    };
    let encoding: String = lines.keyed("encoding")?;
    let encoding = match encoding.as_str() {
        "raw" => Encoding::Raw,
        "l2" => Encoding::L2Normalized,
        "power" => Encoding::PortPower,
        other => return Err(lines.err(format!("unknown encoding '{other}'"))),
    };
    let input: usize = lines.keyed("input")?;

    let mut stages = Vec::new();
    loop {
        let l = lines.next()?;
        if l == "end" {
            break;
        }
        let fields: Vec<&str> = l.split_whitespace().collect();
        let count = |lines: &Lines| -> Result<usize> {
            fields.get(2).and_then(|v| v.parse().ok()).ok_or_else(|| lines.err(format!("bad stage line '{l}'")))
        };
        let stage = match fields.get(..2) {
            Some(["stage", "mesh"]) => {
                let header = lines.next()?;
                let nl: usize = header
                    .rsplit_once("nl=")
                    .and_then(|(_, n)| n.parse().ok())
                    .ok_or_else(|| lines.err(format!("bad mesh header '{header}'")))?;
                let mut topo_text = format!("{header}\n");
                for _ in 0..nl {
                    topo_text.push_str(lines.next()?);
                    topo_text.push('\n');
                }
                let topology = MeshTopology::parse(&topo_text).map_err(|e| lines.err(e.to_string()))?;
                let n: usize = lines.keyed("phases")?;
                let phases = PhaseStore::from_vec(lines.hex_values(n)?).map_err(|e| lines.err(e.to_string()))?;
                Stage::Mesh { topology, phases }
            }
            Some(["stage", "photodetector"]) => Stage::Photodetector,
            Some(["stage", "bias"]) => {
                let n = count(&lines)?;
                Stage::Bias(lines.hex_values(n)?)
            }
            Some(["stage", "gain"]) => {
                let n = count(&lines)?;
                Stage::DiagonalGain(lines.hex_values(n)?)
            }
            Some(["stage", "readout"]) => Stage::Readout { classes: count(&lines)? },
            _ => return Err(lines.err(format!("unknown line '{l}'"))),
        };
        stages.push(stage);
    }
    let model = Model::new(input, stages, encoding)?;
    Ok(match seed {
        Some(s) => model.with_seed(s),
        None => model,
    })
}
