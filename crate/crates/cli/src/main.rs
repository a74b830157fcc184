//! `continua`: JSON in, JSON out.
//!
//! Exit status 0 when every verified property holds, 2 when the tool ran but
//! a property failed, 1 on bad input.

use clap::{Parser, Subcommand, ValueEnum};
use continua_core::coloring::{
    color_distance2, coloring_feasible_oracle, verify_with_palette, ColoringError,
};
use continua_core::cover::{classification_report, Cover, CoverKind, SpaceSpec};
use continua_core::graph::{Graph, MetricBall};
use continua_core::hat::{build_hat_map, HatConfig, FINENESS_CAP, W_CAP};
use continua_core::models::{empirical_k_likeness, Model, SweepConfig};
use continua_core::plmap::PLMap;
use continua_core::search::SearchLimits;
use continua_core::surgery::reduce_degree;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "continua", version, about = "Finite models of continua: covers, colorings, PL maps")]
struct Cli {
    /// Print the JSON formats read and written by every command.
    #[arg(long)]
    json_schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Nerve class, witness and order of a cover.
    Classify {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        cover: PathBuf,
    },
    /// Distance-2 four-coloring.
    Color {
        #[arg(long)]
        graph: PathBuf,
        /// Palette for verification and the oracle.
        #[arg(long, default_value_t = 4)]
        colors: u8,
        /// Also decide feasibility exhaustively (small graphs only).
        #[arg(long)]
        oracle: bool,
    },
    /// Split vertices of degree ≥ 4.
    Reduce {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Rectangle construction and its audits.
    HatRun {
        /// X; must equal the domain of f and g if given.
        #[arg(long)]
        x: Option<PathBuf>,
        /// Γ; must equal the codomain of f if given.
        #[arg(long)]
        gamma: Option<PathBuf>,
        /// Y; must equal the codomain of g if given.
        #[arg(long)]
        y: Option<PathBuf>,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        /// Cover of X, indexed by the samples of X at `--x-per-edge`.
        #[arg(long)]
        cover: PathBuf,
        /// Cover of Y by open balls; synthesized when absent.
        #[arg(long)]
        w: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        x_per_edge: u32,
        #[arg(long, default_value_t = 1)]
        y_per_edge: u32,
        #[arg(long, default_value_t = 4)]
        gamma_per_edge: u32,
        #[arg(long, default_value_t = FINENESS_CAP)]
        fineness_cap: u32,
        #[arg(long, default_value_t = W_CAP)]
        w_cap: u32,
    },
    /// Refinement sweep over generated covers of a model.
    Analyze {
        #[arg(long, value_enum)]
        model: ModelName,
        #[arg(long, default_value_t = 3)]
        stage: u32,
        #[arg(long, default_value_t = 2)]
        p: u32,
        /// Edges of an arc or circle; loop lengths of a figure-eight.
        #[arg(long, default_value_t = 6)]
        edges: u32,
        #[arg(long, default_value_t = 3)]
        legs: u32,
        #[arg(long, default_value_t = 2)]
        len: u32,
        #[arg(long, default_value_t = 4)]
        members: usize,
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long)]
        base_stage: Option<usize>,
        #[arg(long, default_value_t = 2)]
        base_per_edge: u32,
        #[arg(long)]
        top_per_edge: Option<u32>,
        #[arg(long, default_value_t = 20_000)]
        max_covers: usize,
        #[arg(long, default_value_t = 200_000)]
        budget: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelName {
    Knaster,
    Solenoid,
    Arc,
    Circle,
    FigureEight,
    Spider,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Chain,
    Circle,
    Tree,
}

impl From<Target> for CoverKind {
    fn from(t: Target) -> Self {
        match t {
            Target::Chain => CoverKind::ChainLike,
            Target::Circle => CoverKind::CircleLike,
            Target::Tree => CoverKind::TreeLike,
        }
    }
}

/// Input problems; reported with exit status 1.
#[derive(Debug, thiserror::Error)]
enum InputError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} is not valid {what} JSON: {source}")]
    Json { path: String, what: &'static str, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    /// SHA-256 of every input file.
    inputs: BTreeMap<String, String>,
    parameters: Value,
    verdicts: Vec<Verdict>,
}

#[derive(Serialize)]
struct Verdict {
    module: &'static str,
    operation: &'static str,
    check: &'static str,
    pass: bool,
}

fn verdict(module: &'static str, operation: &'static str, check: &'static str, pass: bool) -> Verdict {
    Verdict { module, operation, check, pass }
}

struct Run {
    manifest: Manifest,
}

impl Run {
    fn new(command: &'static str, parameters: Value) -> Self {
        Run { manifest: Manifest { command, inputs: BTreeMap::new(), parameters, verdicts: Vec::new() } }
    }

    fn read<T: DeserializeOwned>(&mut self, path: &Path, what: &'static str) -> Result<T, InputError> {
        let shown = path.display().to_string();
        let bytes = std::fs::read(path).map_err(|source| InputError::Io { path: shown.clone(), source })?;
        self.manifest.inputs.insert(shown.clone(), format!("{:x}", Sha256::digest(&bytes)));
        serde_json::from_slice(&bytes).map_err(|source| InputError::Json { path: shown, what, source })
    }

    /// Prints `result` with the manifest attached and picks the exit code.
    fn finish(self, result: impl Serialize) -> ExitCode {
        let pass = self.manifest.verdicts.iter().all(|v| v.pass);
        let mut out = serde_json::to_value(result).expect("reports serialize");
        let manifest = serde_json::to_value(&self.manifest).expect("manifest serializes");
        match &mut out {
            Value::Object(map) => {
                map.insert("manifest".into(), manifest);
            }
            other => {
                out = json!({ "result": other.take(), "manifest": manifest });
            }
        }
        emit(&out);
        if pass {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(2)
        }
    }
}

fn input_error(e: impl std::fmt::Display, hint: &str) -> ExitCode {
    let report = json!({ "error": e.to_string(), "hint": hint });
    emit(&report);
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.json_schema {
        emit(&schemas());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        return input_error("no command given", "run `continua --help`");
    };
    let hint = hint_for(&command);
    match dispatch(command) {
        Ok(code) => code,
        Err(e) => input_error(e, hint),
    }
}

fn hint_for(c: &Command) -> &'static str {
    match c {
        Command::Classify { .. } => "space: {\"graph\":GRAPH,\"per_edge\":n} or {\"points\":n}; cover: {\"members\":[{\"name\":s,\"points\":[i]}]}",
        Command::Color { .. } | Command::Reduce { .. } => "graph: {\"vertices\":[i],\"edges\":[[i,j]]}",
        Command::HatRun { .. } => "f, g: PL maps {\"domain\",\"codomain\",\"vertex_images\",\"edge_tracks\"}; cover indexes samples of X; w: [{\"center\",\"radius\",\"open\"}]",
        Command::Analyze { .. } => "see `continua analyze --help`",
    }
}

fn dispatch(command: Command) -> Result<ExitCode, InputError> {
    match command {
        Command::Classify { space, cover } => {
            let mut run = Run::new("classify", json!({}));
            let spec: SpaceSpec = run.read(&space, "space")?;
            let cover: Cover = run.read(&cover, "cover")?;
            let space = spec.build().map_err(|e| InputError::Invalid(e.to_string()))?;
            let report = classification_report(&space, &cover).map_err(|e| InputError::Invalid(e.to_string()))?;
            let open = cover.is_open_in(&space);
            let mut out = serde_json::to_value(&report).expect("json");
            out["open"] = json!(open);
            Ok(run.finish(out))
        }
        Command::Color { graph, colors, oracle } => {
            let mut run = Run::new("color", json!({ "colors": colors, "oracle": oracle }));
            let g: Graph = run.read(&graph, "graph")?;
            if colors == 0 {
                return Err(InputError::Invalid("--colors must be positive".into()));
            }
            let mut out = json!({});
            match color_distance2(&g) {
                Ok(c) => {
                    let check = verify_with_palette(&g, &c, colors);
                    run.manifest.verdicts.push(verdict("distance2_coloring", "verify_coloring", "valid", check.valid));
                    out["coloring"] = serde_json::to_value(&c).expect("json");
                    out["check"] = serde_json::to_value(&check).expect("json");
                }
                Err(e) => {
                    run.manifest.verdicts.push(verdict("distance2_coloring", "color_distance2", "colored", false));
                    out["error"] = json!(e.to_string());
                    if let ColoringError::PreconditionViolated(p) = &e {
                        out["precondition"] = serde_json::to_value(p).expect("json");
                    }
                }
            }
            if oracle {
                let o = match coloring_feasible_oracle(&g, colors) {
                    Ok(f) => json!({ "colors": colors, "feasible": f }),
                    Err(e) => json!({ "colors": colors, "error": e.to_string() }),
                };
                out["oracle"] = o;
            }
            Ok(run.finish(out))
        }
        Command::Reduce { graph } => {
            let mut run = Run::new("reduce", json!({}));
            let g: Graph = run.read(&graph, "graph")?;
            let r = reduce_degree(&g).map_err(|e| InputError::Invalid(e.to_string()))?;
            run.manifest.verdicts.push(verdict("graph_surgery", "reduce_degree", "max_degree_le_3", r.graph.max_degree() <= 3));
            run.manifest.verdicts.push(verdict("graph_surgery", "reduce_degree", "betti1_preserved", r.graph.betti1() == g.betti1()));
            Ok(run.finish(r))
        }
        Command::HatRun { x, gamma, y, f, g, cover, w, x_per_edge, y_per_edge, gamma_per_edge, fineness_cap, w_cap } => {
            let cfg = HatConfig { x_per_edge, y_per_edge, gamma_per_edge, fineness_cap, w_cap };
            let mut run = Run::new("hat-run", serde_json::to_value(cfg).expect("json"));
            let f: PLMap = run.read(&f, "PL map")?;
            let g: PLMap = run.read(&g, "PL map")?;
            let u: Cover = run.read(&cover, "cover")?;
            let w: Option<Vec<MetricBall>> = w.map(|p| run.read(&p, "ball list")).transpose()?;
            for (path, expected, what) in [(x, f.domain(), "X"), (gamma, f.codomain(), "Γ"), (y, g.codomain(), "Y")] {
                if let Some(path) = path {
                    let given: Graph = run.read(&path, "graph")?;
                    if &given != expected {
                        return Err(InputError::Invalid(format!("{what} does not match the maps")));
                    }
                }
            }
            let out = build_hat_map(&f, &g, &u, w, &cfg).map_err(|e| InputError::Invalid(e.to_string()))?;
            let vs = &mut run.manifest.verdicts;
            vs.push(verdict("hat_construction", "rectangles_at", "claim1", out.claim1.max_size <= 2));
            vs.push(verdict("hat_construction", "lambda", "weights_sum_to_one", out.claim1.weight_sums_exact));
            vs.push(verdict("hat_construction", "project", "overlap_agreement", out.pi.agreement));
            vs.push(verdict("hat_construction", "project", "preimage_in_double_star", out.pi.preimage_in_b2));
            vs.push(verdict("hat_construction", "lambda", "continuity", out.continuity.violations == 0));
            vs.push(verdict("hat_construction", "build_hat_map", "rectangle_preimages_in_cover", out.rect_preimages_in_u));
            vs.push(verdict("pl_maps", "is_u_map", "h_is_u_map", out.u_map.is_u_map));
            vs.push(verdict("pl_maps", "is_locally_injective", "projection_locally_injective", out.projection.locally_injective));
            vs.push(verdict("hat_construction", "build_hat_map", "projection_injective_on_rectangles", out.projection.injective_on_rectangles));
            Ok(run.finish(out))
        }
        Command::Analyze {
            model,
            stage,
            p,
            edges,
            legs,
            len,
            members,
            target,
            base_stage,
            base_per_edge,
            top_per_edge,
            max_covers,
            budget,
        } => {
            let model = match model {
                ModelName::Knaster => Model::Knaster { stage },
                ModelName::Solenoid => Model::Solenoid { stage, p },
                ModelName::Arc => Model::Arc { edges },
                ModelName::Circle => Model::Circle { edges },
                ModelName::FigureEight => Model::FigureEight { a: edges, b: edges },
                ModelName::Spider => Model::Spider { legs, len },
            };
            let mut cfg = SweepConfig::new(members, target.into());
            cfg.base_stage = base_stage;
            cfg.base_per_edge = base_per_edge;
            cfg.top_per_edge = top_per_edge;
            cfg.max_covers = max_covers;
            cfg.limits = SearchLimits { max_nodes: budget };
            if base_per_edge == 0 || top_per_edge == Some(0) || budget == 0 {
                return Err(InputError::Invalid("resolutions and budget must be positive".into()));
            }
            let mut run = Run::new("analyze", json!({ "model": model, "sweep": cfg }));
            let system = model.build().map_err(|e| InputError::Invalid(e.to_string()))?;
            let report = empirical_k_likeness(&system, &cfg).map_err(|e| InputError::Invalid(e.to_string()))?;
            run.manifest.verdicts.push(verdict("continua_models", "empirical_k_likeness", "all_pass", report.all_pass));
            Ok(run.finish(report))
        }
    }
}

fn schemas() -> Value {
    let rational = json!({ "type": "string", "pattern": "^-?[0-9]+(/[0-9]+)?$" });
    let graph = json!({
        "type": "object",
        "required": ["vertices", "edges"],
        "properties": {
            "vertices": { "type": "array", "items": { "type": "integer", "minimum": 0 } },
            "edges": { "type": "array", "items": { "type": "array", "items": { "type": "integer" }, "minItems": 2, "maxItems": 2 } }
        }
    });
    let point = json!({
        "oneOf": [
            { "type": "object", "required": ["vertex"], "properties": { "vertex": { "type": "integer" } } },
            { "type": "object", "required": ["edge", "t"], "properties": {
                "edge": { "type": "array", "items": { "type": "integer" }, "minItems": 2, "maxItems": 2 },
                "t": rational
            } }
        ]
    });
    let cover = json!({
        "type": "object",
        "required": ["members"],
        "properties": { "members": { "type": "array", "items": {
            "type": "object",
            "required": ["name", "points"],
            "properties": { "name": { "type": "string" }, "points": { "type": "array", "items": { "type": "integer" } } }
        } } }
    });
    let space = json!({
        "oneOf": [
            { "type": "object", "required": ["graph", "per_edge"], "properties": { "graph": graph, "per_edge": { "type": "integer", "minimum": 1 } } },
            { "type": "object", "required": ["points"], "properties": { "points": { "type": "integer", "minimum": 1 } } }
        ],
        "description": "samples: vertices in ascending id, then interior points j/per_edge edge by edge"
    });
    let plmap = json!({
        "type": "object",
        "required": ["domain", "codomain", "vertex_images", "edge_tracks"],
        "properties": {
            "domain": graph,
            "codomain": graph,
            "vertex_images": { "type": "array", "items": { "type": "object", "properties": { "vertex": { "type": "integer" }, "image": point } } },
            "edge_tracks": { "type": "array", "items": { "type": "object", "properties": {
                "edge": { "type": "array", "items": { "type": "integer" } },
                "breakpoints": { "type": "array", "items": { "type": "object", "properties": { "t": rational, "image": point } } }
            } } }
        }
    });
    let ball = json!({
        "type": "object",
        "required": ["center", "radius", "open"],
        "properties": { "center": point, "radius": rational, "open": { "type": "boolean" } }
    });
    json!({
        "inputs": {
            "graph": graph,
            "point": point,
            "space": space,
            "cover": cover,
            "pl_map": plmap,
            "ball_list": { "type": "array", "items": ball }
        },
        "outputs": {
            "every_command": "result object plus a \"manifest\" with command, input SHA-256 digests, parameters and verdicts {module, operation, check, pass}",
            "classify": "{class, witness, order, nerve_edges, open}",
            "color": "{coloring?, check?, error?, precondition?, oracle?}",
            "reduce": "{graph, collapse: pl_map, split_log, link_length}",
            "hat-run": "HatOutput: coloring, w, xi, rectangles, h, audits",
            "analyze": "SweepReport: counts and failing covers with search outcomes",
            "errors": "{error, hint} with exit status 1"
        },
        "exit_status": { "0": "all verdicts pass", "1": "input error", "2": "a verified property failed" }
    })
}

/// Pretty JSON on stdout. A closed pipe (`| head`) is not an error.
fn emit(v: &impl Serialize) {
    let mut out = std::io::stdout().lock();
    if serde_json::to_writer_pretty(&mut out, v).is_ok() {
        let _ = writeln!(out);
    }
}
