//! Ablation grids: a base config, shared overrides, and value lists for
//! the swept keys.
//!
//! ```toml
//! base = "base.toml"                          # relative to the grid file
//! out_dir = "ablation"                        # likewise
//! overrides = ["train.total_frames=200000"]
//! encoder = ["dvrl", "rnn"]
//! particles = [1, 10]
//! lambda_e = [1.0]
//! n_g = [5, 25]
//! seed = [0, 1, 2]
//! ```
//!
//! Every list is optional; an absent list leaves the base value alone.
//! Particle counts are not swept for the rnn encoder, which has none.

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub base: Option<String>,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub overrides: Vec<String>,
    pub encoder: Option<Vec<String>>,
    pub particles: Option<Vec<usize>>,
    pub lambda_e: Option<Vec<f64>>,
    pub n_g: Option<Vec<usize>>,
    pub seed: Option<Vec<u64>>,
}

fn default_out_dir() -> String {
    "ablation".into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// File stem for the cell's outputs.
    pub name: String,
    pub overrides: Vec<String>,
}

impl Grid {
    pub fn parse(text: &str) -> Result<Self> {
        let g: Grid = toml::from_str(text).context("ablation grid")?;
        let lists = [
            ("encoder", g.encoder.as_ref().map(Vec::len)),
            ("particles", g.particles.as_ref().map(Vec::len)),
            ("lambda_e", g.lambda_e.as_ref().map(Vec::len)),
            ("n_g", g.n_g.as_ref().map(Vec::len)),
            ("seed", g.seed.as_ref().map(Vec::len)),
        ];
        for (key, len) in lists {
            if len == Some(0) {
                bail!("ablation grid: `{key}` lists no values");
            }
        }
        Ok(g)
    }

    pub fn cells(&self) -> Vec<Cell> {
        fn axis<T: ToString>(values: &Option<Vec<T>>) -> Vec<Option<String>> {
            match values {
                Some(v) => v.iter().map(|x| Some(x.to_string())).collect(),
                None => vec![None],
            }
        }
        let mut cells = Vec::new();
        for enc in axis(&self.encoder) {
            let particles = if enc.as_deref() == Some("rnn") {
                vec![None]
            } else {
                axis(&self.particles)
            };
            for k in &particles {
                for le in axis(&self.lambda_e) {
                    for ng in axis(&self.n_g) {
                        for seed in axis(&self.seed) {
                            let mut name = Vec::new();
                            let mut overrides = Vec::new();
                            let mut add = |value: &Option<String>, key: &str, tag: &str| {
                                if let Some(v) = value {
                                    overrides.push(format!("{key}={v}"));
                                    name.push(format!("{tag}{v}"));
                                }
                            };
                            add(&enc, "encoder.kind", "");
                            add(k, "encoder.particles", "k");
                            add(&le, "train.lambda_e", "le");
                            add(&ng, "train.n_g", "ng");
                            add(&seed, "train.seed", "s");
                            cells.push(Cell {
                                name: if name.is_empty() { "base".into() } else { name.join("_") },
                                overrides,
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}
