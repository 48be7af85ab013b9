use std::fs;
use std::path::PathBuf;

use clap::Args;
use gaprewire::analytic::{chord_ring_fixture, ChordRingFixture};
use gaprewire::graph::{generate, read_edge_list, EdgeDelta, GeneratorSpec, Graph, GraphFamily};
use gaprewire::smoothing::LabelConfig;
use serde_json::{json, Value};

use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct GraphSource {
    /// Edge-list file (`u v` per line, `#` comments).
    #[arg(long, conflicts_with_all = ["generator", "fixture"])]
    pub input: Option<PathBuf>,

    /// Generator spec: `ring:N`, `er:N:M`, `path:N` or `complete:N`.
    #[arg(long = "gen", value_name = "SPEC", conflicts_with = "fixture")]
    pub generator: Option<String>,

    /// Built-in fixture: `figure1` (the chord ring) or
    /// `figure1:{sparse,base,plus,tilde_plus}`.
    #[arg(long)]
    pub fixture: Option<String>,

    /// Seed for generators and every randomized step.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Add `u,v` to the graph before running; repeatable.
    #[arg(long = "add", value_name = "U,V", value_parser = parse_pair)]
    pub pre_add: Vec<(usize, usize)>,
}

pub fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `u,v`, found `{s}`"))?;
    let node = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{t}` is not a node index"))
    };
    Ok((node(a)?, node(b)?))
}

/// A resolved input graph plus a JSON description for output headers.
pub struct LoadedGraph {
    pub name: String,
    pub graph: Graph,
    pub source: Value,
}

impl GraphSource {
    fn describe(&self) -> Value {
        let base = if let Some(path) = &self.input {
            json!({ "input": path.display().to_string() })
        } else if let Some(spec) = &self.generator {
            json!({ "gen": spec })
        } else {
            json!({ "fixture": self.fixture })
        };
        let mut v = base;
        if !self.pre_add.is_empty() {
            v["add"] = json!(self.pre_add);
        }
        v
    }

    /// Loads every graph this source names: one for files and generators,
    /// one or four for the chord-ring fixture.
    pub fn load_all(&self) -> Result<Vec<LoadedGraph>, CliError> {
        let graphs: Vec<(String, Graph)> = if let Some(path) = &self.input {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::validation(format!("cannot read {}: {e}", path.display()))
            })?;
            let g = read_edge_list(&text)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            vec![("input".into(), g)]
        } else if let Some(spec) = &self.generator {
            let family: GraphFamily = spec.parse().map_err(CliError::from)?;
            let g = generate(&GeneratorSpec::new(family, self.seed))?;
            vec![("generated".into(), g)]
        } else if let Some(name) = &self.fixture {
            fixture_graphs(name)?
        } else {
            return Err(CliError::validation(
                "no input: pass one of --input, --gen or --fixture",
            ));
        };
        let source = self.describe();
        graphs
            .into_iter()
            .map(|(name, mut graph)| {
                for &(a, b) in &self.pre_add {
                    if a == b {
                        return Err(CliError::validation(format!(
                            "--add {a},{b} is a self-loop"
                        )));
                    }
                    graph.apply(EdgeDelta::add(a, b))?;
                }
                Ok(LoadedGraph {
                    name,
                    graph,
                    source: source.clone(),
                })
            })
            .collect()
    }

    /// Loads exactly one graph; `figure1` alone means its base graph.
    pub fn load_one(&self) -> Result<LoadedGraph, CliError> {
        if self.fixture.as_deref() == Some("figure1") {
            let single = GraphSource {
                fixture: Some("figure1:base".into()),
                ..self.clone()
            };
            let mut g = single.load_all()?.remove(0);
            g.source = self.describe();
            return Ok(g);
        }
        let mut all = self.load_all()?;
        Ok(all.remove(0))
    }
}

fn fixture_graphs(name: &str) -> Result<Vec<(String, Graph)>, CliError> {
    let (family, variant) = match name.split_once(':') {
        Some((f, v)) => (f, Some(v)),
        None => (name, None),
    };
    if family != "figure1" {
        return Err(CliError::validation(format!(
            "unknown fixture `{name}`; expected figure1 or figure1:<variant>"
        )));
    }
    let fx = chord_ring_fixture();
    let all: Vec<(String, Graph)> = fx
        .graphs()
        .iter()
        .map(|(n, g)| (n.to_string(), (*g).clone()))
        .collect();
    match variant {
        None => Ok(all),
        Some(v) => all
            .into_iter()
            .find(|(n, _)| n == v)
            .map(|pair| vec![pair])
            .ok_or_else(|| {
                CliError::validation(format!(
                    "unknown figure1 variant `{v}`; expected one of {}",
                    ChordRingFixture::NAMES.join(", ")
                ))
            }),
    }
}

/// `config1`..`config4`, or a file with one `+1`/`-1` label per node in
/// node order (`#` comments allowed).
pub fn load_labels(spec: &str) -> Result<LabelConfig, CliError> {
    if let Some(k) = spec.strip_prefix("config") {
        if let Ok(k) = k.parse::<u8>() {
            return LabelConfig::chord_ring(k).map_err(CliError::from);
        }
    }
    let text = fs::read_to_string(spec).map_err(|e| {
        CliError::validation(format!(
            "labels `{spec}` is neither config1..config4 nor a readable file: {e}"
        ))
    })?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let label = match body {
            "+1" | "1" => 1,
            "-1" => -1,
            other => {
                return Err(CliError::validation(format!(
                    "{spec}:{}: expected +1 or -1, found `{other}`",
                    i + 1
                )))
            }
        };
        labels.push(label);
    }
    LabelConfig::custom(spec, labels).map_err(CliError::from)
}
