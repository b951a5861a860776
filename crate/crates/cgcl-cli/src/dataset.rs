//! Dataset selection: exactly one of a citation directory, a generic TSV
//! pair, or synthetic block-model parameters.

use crate::run::{usage, CliError};
use cgcl_core::data::{generate_sbm, load_citation, load_generic, RawDataset};
use clap::{ArgGroup, Args};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("dataset").required(true).args(["cora", "generic", "sbm"])))]
pub struct DatasetArgs {
    /// Citation dataset directory holding <stem>.content and <stem>.cites
    #[arg(long, value_name = "DIR")]
    cora: Option<PathBuf>,
    /// Generic TSV dataset: an edge file and a feature file
    #[arg(long, num_args = 2, value_names = ["EDGES", "FEATURES"])]
    generic: Option<Vec<PathBuf>>,
    /// Synthetic planted-partition graph
    #[arg(long, value_name = "B,SZ,PIN,POUT,D", value_parser = parse_sbm)]
    sbm: Option<SbmParams>,
}

#[derive(Debug, Clone)]
pub struct SbmParams {
    pub blocks: usize,
    pub block_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feat_dim: usize,
}

fn parse_sbm(s: &str) -> Result<SbmParams, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 5 {
        return Err(format!(
            "expected BLOCKS,BLOCK_SIZE,P_IN,P_OUT,FEAT_DIM, got {} field(s)",
            parts.len()
        ));
    }
    let field = |i: usize, name: &str| -> Result<f64, String> {
        parts[i]
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("{name} {:?}: {e}", parts[i]))
    };
    let int = |i: usize, name: &str| -> Result<usize, String> {
        parts[i]
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("{name} {:?}: {e}", parts[i]))
    };
    Ok(SbmParams {
        blocks: int(0, "BLOCKS")?,
        block_size: int(1, "BLOCK_SIZE")?,
        p_in: field(2, "P_IN")?,
        p_out: field(3, "P_OUT")?,
        feat_dim: int(4, "FEAT_DIM")?,
    })
}

#[derive(Debug, Clone)]
pub enum DatasetSpec {
    Citation(PathBuf),
    Generic { edges: PathBuf, features: PathBuf },
    Sbm(SbmParams),
}

impl DatasetSpec {
    pub fn from_args(args: &DatasetArgs) -> Result<Self, CliError> {
        if let Some(dir) = &args.cora {
            Ok(Self::Citation(dir.clone()))
        } else if let Some(paths) = &args.generic {
            Ok(Self::Generic {
                edges: paths[0].clone(),
                features: paths[1].clone(),
            })
        } else if let Some(params) = &args.sbm {
            Ok(Self::Sbm(params.clone()))
        } else {
            Err(usage("one of --cora, --generic, --sbm is required"))
        }
    }

    /// Load or (for the synthetic generator) reproduce the dataset. `seed`
    /// only matters for the generator and must match the one the split was
    /// made with.
    pub fn load(&self, seed: u64) -> Result<RawDataset, CliError> {
        match self {
            Self::Citation(dir) => {
                let (content, cites) = citation_paths(dir)?;
                load_citation(&content, &cites).map_err(usage)
            }
            Self::Generic { edges, features } => load_generic(edges, features).map_err(usage),
            Self::Sbm(p) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                generate_sbm(
                    p.blocks,
                    p.block_size,
                    p.p_in,
                    p.p_out,
                    p.feat_dim,
                    &mut rng,
                )
                .map_err(usage)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Citation(dir) => format!("citation:{}", dir.display()),
            Self::Generic { edges, features } => {
                format!("generic:{},{}", edges.display(), features.display())
            }
            Self::Sbm(p) => format!(
                "sbm:{}x{},p_in={},p_out={},feat={}",
                p.blocks, p.block_size, p.p_in, p.p_out, p.feat_dim
            ),
        }
    }
}

/// A citation directory must contain exactly one `*.content` file; the
/// `*.cites` file shares its stem.
fn citation_paths(dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut contents = Vec::new();
    for entry in entries {
        let path = entry.map_err(usage)?.path();
        if path.extension().is_some_and(|e| e == "content") {
            contents.push(path);
        }
    }
    contents.sort();
    match contents.as_slice() {
        [content] => {
            let cites = content.with_extension("cites");
            if !cites.is_file() {
                return Err(usage(format!("missing companion file {}", cites.display())));
            }
            Ok((content.clone(), cites))
        }
        [] => Err(usage(format!("no .content file in {}", dir.display()))),
        many => Err(usage(format!(
            "{} .content files in {}; expected exactly one",
            many.len(),
            dir.display()
        ))),
    }
}
