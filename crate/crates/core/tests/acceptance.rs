//! Acceptance criteria. Runs as a plain binary so each criterion always
//! prints one PASS/FAIL line; exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use banzhaf_core::axioms::{run_suite, BenchConfig, FamilyKind, GameFamily};
use banzhaf_core::estimators::{
    mc_interaction, surrogate_predict, McConfig, SurrogateModel, DEFAULT_HIDDEN,
};
use banzhaf_core::hierarchy::{default_neighbors, dpc_knn_cluster, LevelName};
use banzhaf_core::matrix::Matrix;
use banzhaf_core::objectives::{
    banzhaf_interaction_loss, banzhaf_interaction_loss_grad, contrastive_loss,
    contrastive_loss_grad, distillation_loss_grad, BatchSimilarities, RelationshipMap,
    DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_TAU,
};
use banzhaf_core::pipeline::{run_pipeline, PipelineConfig};
use banzhaf_core::synthetic::{gaussian_blobs, paired_tokens, random_alignment, random_table_game};
use banzhaf_core::{
    banzhaf_interaction_exact, interaction_matrix_exact, restricted_similarity, Coalition,
    CrossModalGame, Game, InteractionMap, Method, DEFAULT_EXACT_CAP,
};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn axiom_suite() -> Outcome {
    let families: Vec<GameFamily> = [
        FamilyKind::Additive,
        FamilyKind::Unanimity,
        FamilyKind::QuadraticSize,
        FamilyKind::RandomTable,
    ]
    .into_iter()
    .enumerate()
    .map(|(k, kind)| GameFamily::new(kind, 1000 + k as u64))
    .collect();
    let cfg = BenchConfig {
        trials: 100,
        min_players: 3,
        max_players: 12,
        tolerance: 1e-10,
        parallel: false,
    };
    let start = Instant::now();
    let reports = run_suite(&families, &cfg).expect("suite runs");
    let secs = start.elapsed().as_secs_f64();
    let worst = reports
        .iter()
        .map(|r| r.max_abs_violation)
        .fold(0.0, f64::max);
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{}/{}", r.axiom, r.family))
        .collect();
    (
        failed.is_empty() && reports.len() == 16 && secs < 60.0,
        format!(
            "16 checks x 100 trials, worst violation {worst:.2e}, {secs:.2}s single-threaded, failures {failed:?}"
        ),
    )
}

/// Literal four-term sum over explicitly listed coalitions of the other players.
fn naive_interaction(table: &[f64], n: usize, i: usize, j: usize) -> f64 {
    let others: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
    let count = 1usize << others.len();
    let mut total = 0.0;
    for pick in 0..count {
        let members: Vec<usize> = others
            .iter()
            .enumerate()
            .filter(|(bit, _)| pick >> bit & 1 == 1)
            .map(|(_, &p)| p)
            .collect();
        let phi = |extra: &[usize]| -> f64 {
            let index: usize = members.iter().chain(extra).map(|&p| 1usize << p).sum();
            table[index]
        };
        total += phi(&[i, j]) - phi(&[i]) - phi(&[j]) + phi(&[]);
    }
    total / count as f64
}

fn brute_force_oracle() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for _ in 0..50 {
        let n = r.random_range(3..=10);
        let table: Vec<f64> = (0..1usize << n)
            .map(|_| r.random_range(-1.0..1.0))
            .collect();
        let game = Game::from_table(table.clone()).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                let fast = banzhaf_interaction_exact(&game, i, j).unwrap().value;
                worst = worst.max((fast - naive_interaction(&table, n, i, j)).abs());
                pairs += 1;
            }
        }
    }
    (
        worst <= 1e-12,
        format!("50 games, {pairs} pairs, max |exact - naive| = {worst:.2e}"),
    )
}

fn mc_convergence() -> Outcome {
    let game = random_table_game(10, 1.0, &mut rng(3)).unwrap();
    let (i, j) = (2, 7);
    let exact = banzhaf_interaction_exact(&game, i, j).unwrap().value;
    let mut covered = 0;
    let mut mean_se = [0.0f64; 3];
    let sizes = [256usize, 1024, 4096];
    for seed in 0..200u64 {
        for (k, &s) in sizes.iter().enumerate() {
            let e = mc_interaction(&game, i, j, &McConfig::new(s, seed).unwrap()).unwrap();
            mean_se[k] += e.std_error / 200.0;
            if s == 4096 && (e.estimate - exact).abs() <= 4.0 * e.std_error {
                covered += 1;
            }
        }
    }
    let normalized: Vec<f64> = sizes
        .iter()
        .zip(&mean_se)
        .map(|(&s, se)| se * (s as f64).sqrt())
        .collect();
    let reference = normalized[2];
    let scale_ok = normalized
        .iter()
        .all(|v| (v / reference - 1.0).abs() <= 0.2);
    (
        covered >= 198 && scale_ok,
        format!(
            "coverage {covered}/200 within 4 se; se*sqrt(samples) = {:.4} / {:.4} / {:.4}",
            normalized[0], normalized[1], normalized[2]
        ),
    )
}

fn single_modality_zero() -> Outcome {
    let mut r = rng(4);
    let mut nonzero = 0;
    for _ in 0..1000 {
        let nv = r.random_range(1..=12);
        let nt = r.random_range(1..=24);
        let dim = r.random_range(2..=16);
        let game = CrossModalGame::uniform(random_alignment(nv, nt, dim, &mut r).unwrap()).unwrap();
        let c = match r.random_range(0..3) {
            0 => Coalition::from_players((0..nv).filter(|_| r.random_bool(0.5))),
            1 => Coalition::from_players((0..nt).filter(|_| r.random_bool(0.5)).map(|j| nv + j)),
            _ => Coalition::EMPTY,
        };
        if restricted_similarity(&game, c) != 0.0 {
            nonzero += 1;
        }
    }
    (nonzero == 0, format!("1000 coalitions, {nonzero} nonzero"))
}

fn best_match(labels: &[usize], assignment: &[usize], m: usize) -> usize {
    let perms: Vec<Vec<usize>> = if m == 2 {
        vec![vec![0, 1], vec![1, 0]]
    } else {
        vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ]
    };
    perms
        .iter()
        .map(|p| {
            labels
                .iter()
                .zip(assignment)
                .filter(|(l, a)| p[**a] == **l)
                .count()
        })
        .max()
        .unwrap()
}

fn blob_recovery() -> Outcome {
    let mut correct = 0;
    let mut total = 0;
    let mut worst_draw = 1.0f64;
    for draw in 0..100u64 {
        let m = if draw % 2 == 0 { 2 } else { 3 };
        let dim = if draw % 4 < 2 { 2 } else { 8 };
        let (points, labels) = gaussian_blobs(m, 10, dim, 1.0, 0.1, &mut rng(500 + draw)).unwrap();
        let n = labels.len();
        let clusters = dpc_knn_cluster(&points, m, default_neighbors(n)).unwrap();
        let hit = best_match(&labels, &clusters.assignment, m);
        correct += hit;
        total += n;
        worst_draw = worst_draw.min(hit as f64 / n as f64);
    }
    let rate = correct as f64 / total as f64;
    (
        rate >= 0.95,
        format!(
            "{correct}/{total} tokens recovered ({:.2}%), worst draw {:.2}%",
            100.0 * rate,
            100.0 * worst_draw
        ),
    )
}

fn loss_identities() -> Outcome {
    let mut r = rng(6);
    let single =
        BatchSimilarities::new(Matrix::from_vec(1, 1, vec![0.3]).unwrap(), DEFAULT_TAU).unwrap();
    let lc1 = contrastive_loss(&single);
    let uniform = BatchSimilarities::new(Matrix::filled(4, 4, 0.2), DEFAULT_TAU).unwrap();
    let lc4 = contrastive_loss(&uniform);

    let m = Matrix::from_fn(5, 7, |_, _| r.random_range(-1.0..1.0));
    let li_self = banzhaf_interaction_loss(
        &RelationshipMap::new(m.clone()).unwrap(),
        &InteractionMap::new(m.clone(), Method::Exact),
    )
    .unwrap();

    let rel = Matrix::from_fn(5, 7, |_, _| r.random_range(-1.0..1.0));
    let base = banzhaf_interaction_loss(
        &RelationshipMap::new(rel.clone()).unwrap(),
        &InteractionMap::new(m.clone(), Method::Exact),
    )
    .unwrap();
    let shifted = banzhaf_interaction_loss(
        &RelationshipMap::new(rel.map(|v| v - 3.5)).unwrap(),
        &InteractionMap::new(m.map(|v| v + 7.25), Method::Exact),
    )
    .unwrap();

    let pairs = vec![paired_tokens(12, 24, 8, 0.3, &mut r).unwrap()];
    let cfg = PipelineConfig {
        mc: McConfig::new(64, 0).unwrap(),
        ..PipelineConfig::default()
    };
    let meta = run_pipeline(&pairs, &cfg, None).unwrap().metadata;
    let defaults_ok = (DEFAULT_TAU, DEFAULT_ALPHA, DEFAULT_BETA) == (0.01, 1.0, 2.0)
        && (meta.tau, meta.alpha, meta.beta) == (0.01, 1.0, 2.0);

    let ok = lc1 == 0.0
        && (lc4 - 4f64.ln()).abs() <= 1e-9
        && li_self.abs() <= 1e-12
        && (shifted - base).abs() <= 1e-10
        && defaults_ok;
    (
        ok,
        format!(
            "L_C(B=1)={lc1}, |L_C(uniform,B=4)-ln4|={:.1e}, L_I(R=I)={li_self:.1e}, shift diff {:.1e}, defaults echoed tau={} alpha={} beta={}",
            (lc4 - 4f64.ln()).abs(),
            (shifted - base).abs(),
            meta.tau,
            meta.alpha,
            meta.beta
        ),
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

const H: f64 = 1e-5;

fn central_diff(x: &Matrix, f: impl Fn(&Matrix) -> f64) -> Vec<f64> {
    (0..x.as_slice().len())
        .map(|k| {
            let mut p = x.clone();
            p.as_mut_slice()[k] += H;
            let mut m = x.clone();
            m.as_mut_slice()[k] -= H;
            (f(&p) - f(&m)) / (2.0 * H)
        })
        .collect()
}

fn gradient_checks() -> Outcome {
    let mut r = rng(7);
    let mut worst = [0.0f64; 4];
    for _ in 0..20 {
        let b = r.random_range(2..=6);
        let tau = 0.1;
        let s = Matrix::from_fn(b, b, |_, _| r.random_range(-1.0..1.0));
        let (_, g) = contrastive_loss_grad(&BatchSimilarities::new(s.clone(), tau).unwrap());
        let fd = central_diff(&s, |x| {
            contrastive_loss(&BatchSimilarities::new(x.clone(), tau).unwrap())
        });
        worst[0] = worst[0].max(rel_err(g.as_slice(), &fd));

        let (rows, cols) = (r.random_range(2..=5), r.random_range(2..=6));
        let rm = Matrix::from_fn(rows, cols, |_, _| r.random_range(-2.0..2.0));
        let im = Matrix::from_fn(rows, cols, |_, _| r.random_range(-2.0..2.0));
        let lg = banzhaf_interaction_loss_grad(&rm, &im).unwrap();
        let fd_r = central_diff(&rm, |x| banzhaf_interaction_loss_grad(x, &im).unwrap().loss);
        let fd_i = central_diff(&im, |x| banzhaf_interaction_loss_grad(&rm, x).unwrap().loss);
        worst[1] = worst[1]
            .max(rel_err(lg.grad_first.as_slice(), &fd_r))
            .max(rel_err(lg.grad_second.as_slice(), &fd_i));

        let st = Matrix::from_fn(b, b, |_, _| r.random_range(-1.0..1.0));
        let te = Matrix::from_fn(b, b, |_, _| r.random_range(-1.0..1.0));
        let batch = |x: &Matrix| BatchSimilarities::new(x.clone(), tau).unwrap();
        let dg = distillation_loss_grad(&batch(&st), &batch(&te)).unwrap();
        let fd_s = central_diff(&st, |x| {
            distillation_loss_grad(&batch(x), &batch(&te)).unwrap().loss
        });
        let fd_t = central_diff(&te, |x| {
            distillation_loss_grad(&batch(&st), &batch(x)).unwrap().loss
        });
        worst[2] = worst[2]
            .max(rel_err(dg.grad_first.as_slice(), &fd_s))
            .max(rel_err(dg.grad_second.as_slice(), &fd_t));

        let shape = (2, 3);
        let model = SurrogateModel::new(shape, 16, r.random()).unwrap();
        let data: Vec<(Vec<f64>, Vec<f64>)> = (0..4)
            .map(|_| {
                (
                    (0..6).map(|_| r.random_range(-1.0..1.0)).collect(),
                    (0..6).map(|_| r.random_range(-0.5..0.5)).collect(),
                )
            })
            .collect();
        let (_, grad) = model.loss_and_grad(&data);
        let params = model.params();
        let mut probe = model.clone();
        let fd: Vec<f64> = (0..params.len())
            .map(|k| {
                let mut p = params.clone();
                p[k] += H;
                probe.set_params(&p).unwrap();
                let up = probe.mse(&data);
                p[k] -= 2.0 * H;
                probe.set_params(&p).unwrap();
                let down = probe.mse(&data);
                (up - down) / (2.0 * H)
            })
            .collect();
        worst[3] = worst[3].max(rel_err(&grad, &fd));
    }
    (
        worst.iter().all(|&w| w < 1e-4),
        format!(
            "20 instances each, worst relative error L_C {:.1e}, L_I {:.1e}, L_D {:.1e}, surrogate MSE {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn hierarchy_shapes() -> Outcome {
    let mut r = rng(8);
    let pairs: Vec<_> = (0..4)
        .map(|_| paired_tokens(12, 24, 16, 0.3, &mut r).unwrap())
        .collect();
    let cfg = PipelineConfig {
        mc: McConfig::new(64, 0).unwrap(),
        ..PipelineConfig::default()
    };
    let out = run_pipeline(&pairs, &cfg, None).unwrap();
    let shapes_ok = out.pairs.iter().all(|p| {
        p.levels.iter().map(|l| l.shape).collect::<Vec<_>>() == vec![(12, 24), (3, 6), (2, 3)]
    });

    // exact interaction for the action and event levels of the whole batch
    let stacks: Vec<_> = pairs
        .iter()
        .map(|(v, t)| banzhaf_core::hierarchy::build_level_stack(v, t, &cfg.hierarchy).unwrap())
        .collect();
    let start = Instant::now();
    let mut players = Vec::new();
    for stack in &stacks {
        for name in [LevelName::Action, LevelName::Event] {
            let level = stack.level(name);
            let cm = CrossModalGame::from_tokens(&level.visual, &level.textual).unwrap();
            let game = cm.to_game().unwrap();
            players.push(game.n());
            interaction_matrix_exact(&game, &cm.frame_players(), &cm.word_players()).unwrap();
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let counts_ok = players.chunks(2).all(|c| c == [9, 5]) && 9 <= DEFAULT_EXACT_CAP;
    (
        shapes_ok && counts_ok && secs < 1.0,
        format!("level shapes (12x24, 3x6, 2x3): {shapes_ok}, players {:?}, action+event exact for batch of 4 in {secs:.3}s", &players[..2]),
    )
}

fn estimator_speed() -> Outcome {
    let mut r = rng(9);
    let alignments: Vec<_> = (0..1000)
        .map(|_| random_alignment(12, 24, 16, &mut r).unwrap())
        .collect();
    let model = SurrogateModel::new((12, 24), DEFAULT_HIDDEN, 9).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let (surrogate_secs, mc_secs) = pool.install(|| {
        let start = Instant::now();
        let mut sink = 0.0;
        for a in &alignments {
            sink += surrogate_predict(&model, a).unwrap().values.get(0, 0);
        }
        let surrogate_secs = start.elapsed().as_secs_f64();

        let start = Instant::now();
        for (k, a) in alignments.iter().enumerate() {
            let cm = CrossModalGame::uniform(a.clone()).unwrap();
            let game = cm.to_game().unwrap();
            let cfg = McConfig::new(1024, k as u64).unwrap();
            sink += mc_interaction(&game, cm.frame_player(0), cm.word_player(0), &cfg)
                .unwrap()
                .estimate;
        }
        std::hint::black_box(sink);
        (surrogate_secs, start.elapsed().as_secs_f64())
    });
    let ratio = mc_secs / surrogate_secs;
    (
        ratio >= 10.0,
        format!("1000 surrogate predictions {surrogate_secs:.3}s, 1000 MC runs (1024 samples) {mc_secs:.3}s, speedup {ratio:.1}x"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 axiom suite", axiom_suite),
        ("2 exact vs brute force", brute_force_oracle),
        ("3 monte-carlo unbiasedness and convergence", mc_convergence),
        (
            "4 single-modality coalitions score zero",
            single_modality_zero,
        ),
        ("5 clustering recovery", blob_recovery),
        ("6 loss identities and defaults", loss_identities),
        ("7 gradient checks", gradient_checks),
        ("8 hierarchy shape contract", hierarchy_shapes),
        ("9 estimator speed direction", estimator_speed),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(outcome) => outcome,
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failures += 1;
        }
        println!("{} [{name}] {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failures} failed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
