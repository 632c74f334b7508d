use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use banzhaf_core::axioms::{run_suite, AxiomReport, BenchConfig, FamilyKind, GameFamily};
use banzhaf_core::estimators::{
    mc_interaction, surrogate_predict, surrogate_train, McConfig, McEstimate, SurrogateModel,
    TrainConfig,
};
use banzhaf_core::hierarchy::{
    build_level_stack, default_neighbors, dpc_knn_cluster, HierarchyConfig, LevelCounts,
};
use banzhaf_core::io;
use banzhaf_core::pipeline::{
    run_pipeline, EntityMethod, PipelineConfig, PipelineOutput, RelationshipSource,
};
use banzhaf_core::synthetic;
use banzhaf_core::{
    banzhaf_interaction_exact, interaction_matrix_exact, CrossModalGame, Error, Game,
    InteractionMap, Matrix, Method, Modality, TokenSet,
};

use crate::args::{
    AxiomArgs, ClusterArgs, EntityFlag, EstimateArgs, ExactArgs, Format, GameInput, LevelArgs,
    PipelineArgs, RelationshipFlag, RunConfig, TrainArgs,
};
use crate::svg;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
    /// Report already written; some axiom check failed.
    AxiomFailure,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::AxiomFailure => 5,
            CliError::Core(e) => match e {
                Error::ExactInfeasible { .. } | Error::TooManyPlayers { .. } => 3,
                Error::DimensionMismatch(_) => 4,
                Error::Diverged { .. } => 1,
                _ => 2,
            },
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::AxiomFailure => "one or more axiom checks failed".into(),
            CliError::Core(e @ (Error::ExactInfeasible { .. } | Error::TooManyPlayers { .. })) => {
                format!("{e}; use `banzhaf estimate` for sampled or surrogate estimates")
            }
            CliError::Core(e) => e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Writes `text` to `--output`, or stdout.
fn emit(run: &RunConfig, text: &str) -> CliResult<()> {
    match &run.output {
        Some(path) => io::write_string(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json<T: Serialize>(run: &RunConfig, value: &T) -> CliResult<()> {
    let mut text = io::to_json_string(value)?;
    text.push('\n');
    emit(run, &text)
}

fn no_csv(run: &RunConfig, command: &str) -> CliResult<()> {
    if run.format == Format::Csv {
        return usage(format!("--format csv is not available for `{command}`"));
    }
    Ok(())
}

fn no_svg(run: &RunConfig, command: &str) -> CliResult<()> {
    if run.svg.is_some() {
        return usage(format!("--svg is not available for `{command}`"));
    }
    Ok(())
}

fn parse_pair(s: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => usage(format!("bad pair '{s}', expected I,J")),
        },
        _ => usage(format!("bad pair '{s}', expected I,J")),
    }
}

fn parse_two(s: &str, what: &str) -> CliResult<[usize; 2]> {
    let (a, b) = parse_pair(s)
        .map_err(|_| CliError::Usage(format!("bad {what} '{s}', expected two counts A,E")))?;
    Ok([a, b])
}

fn read_modality(path: &Path, expected: Modality) -> CliResult<TokenSet> {
    let t = io::read_tokens(path)?;
    if t.modality() != expected {
        return Err(Error::Format {
            path: path.display().to_string(),
            message: format!("expected {expected:?} tokens, found {:?}", t.modality())
                .to_lowercase(),
        }
        .into());
    }
    Ok(t)
}

enum Loaded {
    Table(Game),
    CrossModal(CrossModalGame),
}

fn load_game(input: &GameInput) -> CliResult<Loaded> {
    if let Some(p) = &input.payoff {
        return Ok(Loaded::Table(io::read_payoff_csv(p)?));
    }
    if let Some(p) = &input.alignment {
        return Ok(Loaded::CrossModal(CrossModalGame::uniform(
            io::read_alignment_csv(p)?,
        )?));
    }
    if let (Some(v), Some(t)) = (&input.video, &input.text) {
        let video = read_modality(v, Modality::Visual)?;
        let text = read_modality(t, Modality::Textual)?;
        return Ok(Loaded::CrossModal(CrossModalGame::from_tokens(
            &video, &text,
        )?));
    }
    usage("give --payoff, --alignment, or --video with --text")
}

/// Interactions of `rows x cols` players plus the players they index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapOutput {
    pub players: usize,
    pub row_players: Vec<usize>,
    pub col_players: Vec<usize>,
    pub map: InteractionMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<InteractionMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub pair: (usize, usize),
    pub method: Method,
    #[serde(flatten)]
    pub estimate: McEstimate,
}

/// All-player matrix with a zero diagonal, filled from `value(i, j)` for `i < j`.
fn pairwise(
    n: usize,
    method: Method,
    mut value: impl FnMut(usize, usize) -> CliResult<f64>,
) -> CliResult<InteractionMap> {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = value(i, j)?;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(InteractionMap::new(m, method))
}

fn map_csv(map: &InteractionMap) -> String {
    io::matrix_csv_string(&map.values)
}

fn write_map_svg(
    run: &RunConfig,
    title: &str,
    out: &MapOutput,
    cm: Option<&CrossModalGame>,
) -> CliResult<()> {
    let Some(path) = &run.svg else { return Ok(()) };
    let (rp, cp) = match cm {
        Some(_) => ("v", "w"),
        None => ("p", "p"),
    };
    let h = svg::Heatmap {
        title,
        values: &out.map.values,
        row_labels: svg::labels(rp, out.row_players.len(), None),
        col_labels: svg::labels(cp, out.col_players.len(), None),
    };
    io::write_string(path, &svg::render(&h))?;
    Ok(())
}

pub fn cmd_exact(run: &RunConfig, args: &ExactArgs) -> CliResult<()> {
    let loaded = load_game(&args.input)?;
    let (game, cm) = match &loaded {
        Loaded::Table(g) => (g.clone(), None),
        Loaded::CrossModal(c) => (c.to_game()?, Some(c)),
    };
    let game = game.with_exact_cap(args.cap)?;
    if let Some(p) = &args.input.pair {
        no_svg(run, "exact --pair")?;
        let (i, j) = parse_pair(p)?;
        let r = banzhaf_interaction_exact(&game, i, j)?;
        return match run.format {
            Format::Json => emit_json(run, &r),
            Format::Csv => emit(run, &format!("i,j,value\n{i},{j},{:?}\n", r.value)),
        };
    }
    let n = game.n();
    let full_map = |g: &Game| {
        pairwise(n, Method::Exact, |i, j| {
            Ok(banzhaf_interaction_exact(g, i, j)?.value)
        })
    };
    let out = match cm {
        Some(c) => MapOutput {
            players: n,
            row_players: c.frame_players(),
            col_players: c.word_players(),
            map: interaction_matrix_exact(&game, &c.frame_players(), &c.word_players())?,
            full: if args.full {
                Some(full_map(&game)?)
            } else {
                None
            },
        },
        None => MapOutput {
            players: n,
            row_players: (0..n).collect(),
            col_players: (0..n).collect(),
            map: full_map(&game)?,
            full: None,
        },
    };
    write_map_svg(run, "exact interaction", &out, cm)?;
    match run.format {
        Format::Json => emit_json(run, &out),
        Format::Csv => emit(run, &map_csv(&out.map)),
    }
}

pub fn cmd_estimate(run: &RunConfig, args: &EstimateArgs) -> CliResult<()> {
    let loaded = load_game(&args.input)?;
    if let Some(model_path) = &args.model {
        let Loaded::CrossModal(cm) = &loaded else {
            return usage("--model needs a cross-modal input (--alignment or --video/--text)");
        };
        if args.input.pair.is_some() {
            return usage("--model predicts the whole frame-word map; drop --pair");
        }
        let model = io::read_model(model_path)?;
        let out = MapOutput {
            players: cm.n_players(),
            row_players: cm.frame_players(),
            col_players: cm.word_players(),
            map: surrogate_predict(&model, cm.alignment())?,
            full: None,
        };
        write_map_svg(run, "surrogate interaction", &out, Some(cm))?;
        return match run.format {
            Format::Json => emit_json(run, &out),
            Format::Csv => emit(run, &map_csv(&out.map)),
        };
    }
    let (game, cm) = match &loaded {
        Loaded::Table(g) => (g.clone(), None),
        Loaded::CrossModal(c) => (c.to_game()?, Some(c)),
    };
    let base = McConfig::new(args.samples, run.seed)?.antithetic(args.antithetic);
    if let Some(p) = &args.input.pair {
        no_svg(run, "estimate --pair")?;
        let (i, j) = parse_pair(p)?;
        let e = mc_interaction(&game, i, j, &base)?;
        let out = PairEstimate {
            pair: (i, j),
            method: Method::MonteCarlo,
            estimate: e,
        };
        return match run.format {
            Format::Json => emit_json(run, &out),
            Format::Csv => emit(
                run,
                &format!(
                    "i,j,estimate,std_error,draws\n{i},{j},{:?},{:?},{}\n",
                    e.estimate, e.std_error, e.draws
                ),
            ),
        };
    }
    let n = game.n();
    let (rows, cols, map) = match cm {
        Some(c) => {
            let map = banzhaf_core::estimators::mc_interaction_map(
                &game,
                &c.frame_players(),
                &c.word_players(),
                &base,
            )?;
            (c.frame_players(), c.word_players(), map)
        }
        None => {
            let map = pairwise(n, Method::MonteCarlo, |i, j| {
                let cfg = McConfig {
                    seed: base.seed.wrapping_add((i * n + j) as u64),
                    ..base
                };
                Ok(mc_interaction(&game, i, j, &cfg)?.estimate)
            })?;
            ((0..n).collect(), (0..n).collect(), map)
        }
    };
    let out = MapOutput {
        players: n,
        row_players: rows,
        col_players: cols,
        map,
        full: None,
    };
    write_map_svg(run, "monte-carlo interaction", &out, cm)?;
    match run.format {
        Format::Json => emit_json(run, &out),
        Format::Csv => emit(run, &map_csv(&out.map)),
    }
}

fn hierarchy_config(
    levels: &LevelArgs,
    n_visual: usize,
    n_textual: usize,
) -> CliResult<HierarchyConfig> {
    let [va, ve] = parse_two(&levels.visual_counts, "--visual-counts")?;
    let [ta, te] = parse_two(&levels.textual_counts, "--textual-counts")?;
    let counts = LevelCounts {
        visual: [n_visual, va, ve],
        textual: [n_textual, ta, te],
    };
    counts.validate()?;
    Ok(HierarchyConfig {
        counts,
        neighbors: levels.neighbors,
        smoothing: !levels.no_smoothing,
        attention_scale: None,
    })
}

pub fn cmd_cluster(run: &RunConfig, args: &ClusterArgs) -> CliResult<()> {
    no_svg(run, "cluster")?;
    if let Some(path) = &args.tokens {
        let tokens = io::read_tokens(path)?;
        let Some(m) = args.clusters else {
            return usage("--tokens needs --clusters");
        };
        let n = tokens.count();
        let k = args
            .levels
            .neighbors
            .unwrap_or_else(|| default_neighbors(n));
        let result = dpc_knn_cluster(tokens.tokens(), m, k)?;
        return match run.format {
            Format::Json => emit_json(run, &result),
            Format::Csv => {
                let mut s = String::from("token,cluster,center,rho,delta\n");
                for i in 0..n {
                    let c = result.assignment[i];
                    s.push_str(&format!(
                        "{i},{c},{},{:?},{:?}\n",
                        result.centers[c] == i,
                        result.rho[i],
                        result.delta[i]
                    ));
                }
                emit(run, &s)
            }
        };
    }
    let (Some(v), Some(t)) = (&args.video, &args.text) else {
        return usage("give --tokens with --clusters, or --video with --text");
    };
    no_csv(run, "cluster --video/--text")?;
    let video = read_modality(v, Modality::Visual)?;
    let text = read_modality(t, Modality::Textual)?;
    let cfg = hierarchy_config(&args.levels, video.count(), text.count())?;
    let stack = build_level_stack(&video, &text, &cfg)?;
    emit_json(run, &stack)
}

fn pipeline_svgs(dir: &Path, out: &PipelineOutput) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for (b, pair) in out.pairs.iter().enumerate() {
        for (l, level) in pair.levels.iter().enumerate() {
            let next = pair.levels.get(l + 1);
            let vc = next
                .and_then(|n| n.visual_clusters.as_ref())
                .map(|c| c.assignment.as_slice());
            let tc = next
                .and_then(|n| n.textual_clusters.as_ref())
                .map(|c| c.assignment.as_slice());
            let (rows, cols) = level.shape;
            let title = format!("pair {b} {} level ({rows}x{cols})", level.level.as_str());
            let h = svg::Heatmap {
                title: &title,
                values: &level.interaction.values,
                row_labels: svg::labels("v", rows, vc),
                col_labels: svg::labels("w", cols, tc),
            };
            let path: PathBuf = dir.join(format!("pair{b}_{}.svg", level.level.as_str()));
            io::write_string(&path, &svg::render(&h))?;
        }
    }
    Ok(())
}

pub fn cmd_pipeline(run: &RunConfig, args: &PipelineArgs) -> CliResult<()> {
    no_csv(run, "pipeline")?;
    let pairs: Vec<(TokenSet, TokenSet)> = match args.synthetic {
        Some(0) => return usage("--synthetic needs at least one pair"),
        Some(b) => {
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
            (0..b)
                .map(|_| synthetic::paired_tokens(12, 24, args.dim, 0.3, &mut rng))
                .collect::<Result<_, _>>()?
        }
        None => {
            if args.video.is_empty() || args.video.len() != args.text.len() {
                return usage("give matching --video and --text files, or --synthetic B");
            }
            args.video
                .iter()
                .zip(&args.text)
                .map(|(v, t)| {
                    Ok((
                        read_modality(v, Modality::Visual)?,
                        read_modality(t, Modality::Textual)?,
                    ))
                })
                .collect::<CliResult<_>>()?
        }
    };
    let (v0, t0) = &pairs[0];
    if v0.dim() != t0.dim() {
        return Err(Error::DimensionMismatch(format!(
            "visual tokens have dim {}, textual tokens have dim {}",
            v0.dim(),
            t0.dim()
        ))
        .into());
    }
    let hierarchy = hierarchy_config(&args.levels, v0.count(), t0.count())?;
    let model = match (args.entity, &args.model) {
        (EntityFlag::Surrogate, Some(p)) => Some(io::read_model(p)?),
        (EntityFlag::Surrogate, None) => return usage("--entity surrogate needs --model"),
        (EntityFlag::Mc, _) => None,
    };
    let config = PipelineConfig {
        hierarchy,
        tau: args.tau,
        alpha: args.alpha,
        beta: args.beta,
        entity_method: match args.entity {
            EntityFlag::Mc => EntityMethod::MonteCarlo,
            EntityFlag::Surrogate => EntityMethod::Surrogate,
        },
        mc: McConfig::new(args.samples, run.seed)?,
        relationship: match args.relationship {
            RelationshipFlag::Alignment => RelationshipSource::Alignment,
            RelationshipFlag::Interaction => RelationshipSource::Interaction,
        },
    };
    let out = run_pipeline(&pairs, &config, model.as_ref())?;
    if let Some(dir) = &run.svg {
        pipeline_svgs(dir, &out)?;
    }
    emit_json(run, &out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomOutput {
    pub pass: bool,
    pub reports: Vec<AxiomReport>,
}

pub fn cmd_axioms(run: &RunConfig, args: &AxiomArgs) -> CliResult<()> {
    no_svg(run, "axioms")?;
    let mut families = Vec::new();
    for (k, name) in args
        .families
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
    {
        let kind: FamilyKind = name.parse()?;
        let mut family = GameFamily::new(kind, run.seed.wrapping_add(k as u64));
        family.nondeterministic = args.inject_broken_phi;
        families.push(family);
    }
    if families.is_empty() {
        return usage("--families is empty");
    }
    let cfg = BenchConfig {
        trials: args.trials,
        min_players: args.min_players,
        max_players: args.max_players,
        tolerance: args.tolerance,
        parallel: args.parallel,
    };
    let reports = run_suite(&families, &cfg)?;
    for r in &reports {
        eprintln!("{r}");
    }
    let out = AxiomOutput {
        pass: reports.iter().all(|r| r.pass),
        reports,
    };
    match run.format {
        Format::Json => emit_json(run, &out)?,
        Format::Csv => {
            let mut s = String::from("axiom,family,seed,trials,max_abs_violation,tolerance,pass\n");
            for r in &out.reports {
                s.push_str(&format!(
                    "{},{},{},{},{:?},{:?},{}\n",
                    r.axiom, r.family, r.seed, r.trials, r.max_abs_violation, r.tolerance, r.pass
                ));
            }
            emit(run, &s)?;
        }
    }
    if out.pass {
        Ok(())
    } else {
        Err(CliError::AxiomFailure)
    }
}

pub fn cmd_train(run: &RunConfig, args: &TrainArgs) -> CliResult<()> {
    no_svg(run, "train-surrogate")?;
    no_csv(run, "train-surrogate")?;
    let dataset = match (&args.dataset, args.synthetic) {
        (Some(dir), _) => io::read_dataset_dir(dir)?,
        (None, Some(count)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
            synthetic::surrogate_dataset(count, args.frames, args.words, args.dim, &mut rng)?
        }
        (None, None) => return usage("give --dataset DIR or --synthetic N"),
    };
    if let Some(dir) = &args.save_dataset {
        io::write_dataset_dir(dir, &dataset)?;
    }
    let cfg = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        seed: run.seed,
        hidden: args.hidden,
    };
    let outcome = surrogate_train(&dataset, &cfg)?;
    let model: &SurrogateModel = &outcome.model;
    if let Some(meta) = &model.training {
        eprintln!(
            "trained on {} samples for {} epochs, final mse {:.6e}",
            meta.samples,
            meta.epochs,
            meta.final_loss.unwrap_or(f64::NAN)
        );
    }
    emit_json(run, model)
}
