//! Density-peaks clustering with KNN density, token merging and the
//! entity → action → event level stack.
//!
//! Every tie in this module (neighbor distance, density ranking, center
//! ranking, nearest center) is broken toward the lowest index, so clustering
//! is a deterministic function of its input.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cross_modal::{Modality, TokenSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Cluster id of every token, `0..M`.
    pub assignment: Vec<usize>,
    /// Token index of each cluster's center, ascending; cluster `c` is centered on `centers[c]`.
    pub centers: Vec<usize>,
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
}

impl ClusterResult {
    pub fn cluster_count(&self) -> usize {
        self.centers.len()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == cluster)
            .collect()
    }

    fn identity(n: usize, rho: Vec<f64>, delta: Vec<f64>) -> Self {
        ClusterResult {
            assignment: (0..n).collect(),
            centers: (0..n).collect(),
            rho,
            delta,
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn squared_distances(points: &Matrix) -> Matrix {
    let n = points.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = squared_distance(points.row(i), points.row(j));
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

/// `K` used when the caller does not pick one.
pub fn default_neighbors(count: usize) -> usize {
    5.min(count.saturating_sub(1))
}

/// `rho_i = exp(-mean squared distance to the K nearest other points)`.
pub fn local_density(points: &Matrix, k: usize) -> Result<Vec<f64>> {
    let n = points.rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "neighbor count {k} must satisfy 1 <= K < {n}"
        )));
    }
    let d = squared_distances(points);
    Ok(density_from_distances(&d, k))
}

fn density_from_distances(d: &Matrix, k: usize) -> Vec<f64> {
    let n = d.rows();
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| d.get(i, a).total_cmp(&d.get(i, b)).then(a.cmp(&b)));
            let total: f64 = others[..k].iter().map(|&j| d.get(i, j)).sum();
            (-total / k as f64).exp()
        })
        .collect()
}

/// Total density order: higher rho first, then lower index.
fn denser(rho: &[f64], j: usize, i: usize) -> bool {
    match rho[j].total_cmp(&rho[i]) {
        Ordering::Greater => true,
        Ordering::Equal => j < i,
        Ordering::Less => false,
    }
}

/// Squared distance to the nearest denser point; the densest point takes its
/// largest squared distance to any point.
pub fn distance_index(points: &Matrix, rho: &[f64]) -> Result<Vec<f64>> {
    if rho.len() != points.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} densities for {} tokens",
            rho.len(),
            points.rows()
        )));
    }
    let d = squared_distances(points);
    Ok(delta_from_distances(&d, rho))
}

fn delta_from_distances(d: &Matrix, rho: &[f64]) -> Vec<f64> {
    let n = d.rows();
    (0..n)
        .map(|i| {
            let nearest_denser = (0..n)
                .filter(|&j| denser(rho, j, i))
                .map(|j| d.get(i, j))
                .fold(None, |acc: Option<f64>, v| {
                    Some(acc.map_or(v, |a| a.min(v)))
                });
            nearest_denser.unwrap_or_else(|| (0..n).map(|j| d.get(i, j)).fold(0.0, f64::max))
        })
        .collect()
}

/// DPC-KNN: the `m` points with the largest `rho * delta` become centers and
/// every other point joins its Euclidean-nearest center.
pub fn dpc_knn_cluster(points: &Matrix, m: usize, k: usize) -> Result<ClusterResult> {
    let n = points.rows();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {m} must satisfy 1 <= M <= {n}"
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "neighbor count {k} must satisfy 1 <= K < {n}"
        )));
    }
    let d = squared_distances(points);
    let rho = density_from_distances(&d, k);
    let delta = delta_from_distances(&d, &rho);

    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| {
        (rho[b] * delta[b])
            .total_cmp(&(rho[a] * delta[a]))
            .then(a.cmp(&b))
    });
    let mut centers = ranked[..m].to_vec();
    centers.sort_unstable();

    let assignment = (0..n)
        .map(|i| {
            if let Ok(c) = centers.binary_search(&i) {
                return c;
            }
            let mut best = 0;
            for c in 1..m {
                if d.get(i, centers[c]) < d.get(i, centers[best]) {
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok(ClusterResult {
        assignment,
        centers,
        rho,
        delta,
    })
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

/// One token per cluster: the average of its members weighted by the softmax
/// of their merge scores within the cluster. Output pooling weights are uniform.
pub fn merge_tokens(
    tokens: &TokenSet,
    clusters: &ClusterResult,
    merge_scores: &[f64],
) -> Result<TokenSet> {
    let n = tokens.count();
    if merge_scores.len() != n || clusters.assignment.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} tokens, {} merge scores, {} assignments",
            merge_scores.len(),
            clusters.assignment.len()
        )));
    }
    if merge_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("merge score".into()));
    }
    let m = clusters.cluster_count();
    let dim = tokens.dim();
    let mut out = Matrix::zeros(m, dim);
    for c in 0..m {
        let members = clusters.members(c);
        if members.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "cluster {c} has no members"
            )));
        }
        let mut w: Vec<f64> = members.iter().map(|&i| merge_scores[i]).collect();
        softmax_in_place(&mut w);
        let row = out.row_mut(c);
        for (&i, &wi) in members.iter().zip(&w) {
            for (o, x) in row.iter_mut().zip(tokens.token(i)) {
                *o += wi * x;
            }
        }
    }
    TokenSet::uniform(out, tokens.modality())
}

/// Optional linear maps applied to queries, keys and values before attention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projections {
    pub query: Matrix,
    pub key: Matrix,
    pub value: Matrix,
}

fn project(x: &Matrix, w: &Matrix) -> Result<Matrix> {
    if x.cols() != w.rows() {
        return Err(Error::DimensionMismatch(format!(
            "cannot project dim {} through a {}x{} map",
            x.cols(),
            w.rows(),
            w.cols()
        )));
    }
    Ok(Matrix::from_fn(x.rows(), w.cols(), |r, c| {
        (0..x.cols()).map(|k| x.get(r, k) * w.get(k, c)).sum()
    }))
}

/// Scaled dot-product attention with the merged tokens as queries and the
/// original tokens as keys and values.
pub fn attention_readout(
    queries: &TokenSet,
    keys_values: &TokenSet,
    scale: f64,
    projections: Option<&Projections>,
) -> Result<TokenSet> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "attention scale {scale} must be positive"
        )));
    }
    if queries.dim() != keys_values.dim() {
        return Err(Error::DimensionMismatch(format!(
            "queries have dim {}, keys have dim {}",
            queries.dim(),
            keys_values.dim()
        )));
    }
    let (q, k, v) = match projections {
        Some(p) => (
            project(queries.tokens(), &p.query)?,
            project(keys_values.tokens(), &p.key)?,
            project(keys_values.tokens(), &p.value)?,
        ),
        None => (
            queries.tokens().clone(),
            keys_values.tokens().clone(),
            keys_values.tokens().clone(),
        ),
    };
    if q.cols() != k.cols() {
        return Err(Error::DimensionMismatch(
            "projected query and key dims differ".into(),
        ));
    }
    let mut out = Matrix::zeros(q.rows(), v.cols());
    let mut logits = vec![0.0; k.rows()];
    for r in 0..q.rows() {
        for (s, l) in logits.iter_mut().enumerate() {
            *l = q
                .row(r)
                .iter()
                .zip(k.row(s))
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / scale;
        }
        softmax_in_place(&mut logits);
        let row = out.row_mut(r);
        for (s, &p) in logits.iter().enumerate() {
            for (o, x) in row.iter_mut().zip(v.row(s)) {
                *o += p * x;
            }
        }
    }
    TokenSet::uniform(out, queries.modality())
}

/// Moving average over neighboring tokens (kernel 3, edges replicated).
pub fn temporal_smoothing(tokens: &TokenSet) -> Result<TokenSet> {
    let n = tokens.count();
    let t = tokens.tokens();
    let out = Matrix::from_fn(n, tokens.dim(), |i, c| {
        let prev = t.get(i.saturating_sub(1), c);
        let next = t.get((i + 1).min(n - 1), c);
        (prev + t.get(i, c) + next) / 3.0
    });
    TokenSet::new(out, tokens.modality(), Some(tokens.weights().to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelName {
    Entity,
    Action,
    Event,
}

impl LevelName {
    pub const ALL: [LevelName; 3] = [LevelName::Entity, LevelName::Action, LevelName::Event];

    pub fn as_str(self) -> &'static str {
        match self {
            LevelName::Entity => "entity",
            LevelName::Action => "action",
            LevelName::Event => "event",
        }
    }
}

/// Token counts per level, `[entity, action, event]` for each modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub visual: [usize; 3],
    pub textual: [usize; 3],
}

impl Default for LevelCounts {
    fn default() -> Self {
        LevelCounts {
            visual: [12, 3, 2],
            textual: [24, 6, 3],
        }
    }
}

impl LevelCounts {
    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("visual", self.visual), ("textual", self.textual)] {
            if c.contains(&0) || c[1] > c[0] || c[2] > c[1] {
                return Err(Error::InvalidArgument(format!(
                    "{name} level counts {c:?} must be positive and non-increasing"
                )));
            }
        }
        Ok(())
    }

    pub fn level(&self, level: usize) -> (usize, usize) {
        (self.visual[level], self.textual[level])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub counts: LevelCounts,
    /// Fixed KNN size; `None` uses [`default_neighbors`] at every level.
    pub neighbors: Option<usize>,
    pub smoothing: bool,
    /// Attention temperature; `None` uses `sqrt(dim)`.
    pub attention_scale: Option<f64>,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            counts: LevelCounts::default(),
            neighbors: None,
            smoothing: true,
            attention_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub name: LevelName,
    pub visual: TokenSet,
    pub textual: TokenSet,
    /// Clustering of the previous level that produced these tokens; `None` at entity level.
    pub visual_clusters: Option<ClusterResult>,
    pub textual_clusters: Option<ClusterResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStack {
    pub levels: Vec<Level>,
    pub counts: LevelCounts,
}

impl LevelStack {
    pub fn level(&self, name: LevelName) -> &Level {
        &self.levels[name as usize]
    }

    /// Cluster ids each token of `name` is merged into at the next level.
    pub fn next_assignment(&self, name: LevelName, modality: Modality) -> Option<&[usize]> {
        let next = self.levels.get(name as usize + 1)?;
        let clusters = match modality {
            Modality::Visual => next.visual_clusters.as_ref(),
            Modality::Textual => next.textual_clusters.as_ref(),
        };
        clusters.map(|c| c.assignment.as_slice())
    }
}

fn merge_level(
    tokens: &TokenSet,
    target: usize,
    config: &HierarchyConfig,
) -> Result<(TokenSet, ClusterResult)> {
    let n = tokens.count();
    if target == n {
        let clusters = if n == 1 {
            ClusterResult::identity(1, vec![1.0], vec![0.0])
        } else {
            let k = config.neighbors.unwrap_or_else(|| default_neighbors(n));
            dpc_knn_cluster(tokens.tokens(), n, k)?
        };
        let passthrough = TokenSet::uniform(tokens.tokens().clone(), tokens.modality())?;
        return Ok((passthrough, clusters));
    }
    let k = config.neighbors.unwrap_or_else(|| default_neighbors(n));
    let clusters = dpc_knn_cluster(tokens.tokens(), target, k)?;
    let merged = merge_tokens(tokens, &clusters, &vec![0.0; n])?;
    let scale = config
        .attention_scale
        .unwrap_or_else(|| (tokens.dim() as f64).sqrt());
    let out = attention_readout(&merged, tokens, scale, None)?;
    Ok((out, clusters))
}

/// Builds the three semantic levels. The entity level is the (optionally
/// smoothed) input; each later level clusters the previous one, merges every
/// cluster into one query token and reads the originals out through
/// attention. A level whose count equals the previous count is passed through
/// unchanged.
pub fn build_level_stack(
    video: &TokenSet,
    text: &TokenSet,
    config: &HierarchyConfig,
) -> Result<LevelStack> {
    let counts = config.counts;
    counts.validate()?;
    if video.count() != counts.visual[0] || text.count() != counts.textual[0] {
        return Err(Error::InvalidArgument(format!(
            "entity counts ({}, {}) do not match input sizes ({}, {})",
            counts.visual[0],
            counts.textual[0],
            video.count(),
            text.count()
        )));
    }
    if video.dim() != text.dim() {
        return Err(Error::DimensionMismatch(format!(
            "visual tokens have dim {}, textual tokens have dim {}",
            video.dim(),
            text.dim()
        )));
    }
    let (v0, t0) = if config.smoothing {
        (temporal_smoothing(video)?, temporal_smoothing(text)?)
    } else {
        (video.clone(), text.clone())
    };
    let mut levels = vec![Level {
        name: LevelName::Entity,
        visual: v0,
        textual: t0,
        visual_clusters: None,
        textual_clusters: None,
    }];
    for (l, name) in [(1usize, LevelName::Action), (2, LevelName::Event)] {
        let prev = &levels[l - 1];
        let (visual, vc) = merge_level(&prev.visual, counts.visual[l], config)?;
        let (textual, tc) = merge_level(&prev.textual, counts.textual[l], config)?;
        levels.push(Level {
            name,
            visual,
            textual,
            visual_clusters: Some(vc),
            textual_clusters: Some(tc),
        });
    }
    Ok(LevelStack { levels, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn ts(rows: &[&[f64]]) -> TokenSet {
        TokenSet::uniform(pts(rows), Modality::Visual).unwrap()
    }

    #[test]
    fn density_two_points() {
        let d = 1.7f64;
        let rho = local_density(&pts(&[&[0.0], &[d]]), 1).unwrap();
        assert_eq!(rho, vec![(-d * d).exp(); 2]);
    }

    #[test]
    fn density_duplicates_is_one() {
        let rho = local_density(&pts(&[&[2.0, 1.0], &[2.0, 1.0]]), 1).unwrap();
        assert_eq!(rho, vec![1.0, 1.0]);
    }

    #[test]
    fn density_collinear() {
        let rho = local_density(&pts(&[&[0.0], &[1.0], &[10.0]]), 2).unwrap();
        assert_eq!(rho[0], (-50.5f64).exp());
    }

    #[test]
    fn density_rejects_bad_k() {
        let p = pts(&[&[0.0], &[1.0]]);
        assert!(local_density(&p, 0).is_err());
        assert!(local_density(&p, 2).is_err());
    }

    #[test]
    fn distance_index_examples() {
        let p = pts(&[&[0.0], &[0.1], &[5.0]]);
        let rho = local_density(&p, 1).unwrap();
        let delta = distance_index(&p, &rho).unwrap();
        assert!((delta[2] - 24.01).abs() < 1e-12);
        // tokens 0 and 1 tie on density; index 0 ranks first and takes the max
        assert_eq!(rho[0], rho[1]);
        assert_eq!(delta[0], 25.0);
        assert!((delta[1] - 0.01).abs() < 1e-15);
        assert!(distance_index(&p, &rho[..2]).is_err());
    }

    #[test]
    fn distance_index_identical_tokens() {
        let p = pts(&[&[1.0, 1.0][..]; 4]);
        let rho = local_density(&p, 2).unwrap();
        assert_eq!(distance_index(&p, &rho).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn cluster_identity_when_m_equals_n() {
        let p = pts(&[&[0.0], &[3.0], &[7.0], &[8.0]]);
        let c = dpc_knn_cluster(&p, 4, 1).unwrap();
        assert_eq!(c.assignment, vec![0, 1, 2, 3]);
        assert_eq!(c.centers, vec![0, 1, 2, 3]);
    }

    #[test]
    fn cluster_single() {
        let p = pts(&[&[0.0], &[3.0], &[7.0]]);
        let c = dpc_knn_cluster(&p, 1, 2).unwrap();
        assert_eq!(c.assignment, vec![0, 0, 0]);
        assert!(dpc_knn_cluster(&p, 0, 1).is_err());
        assert!(dpc_knn_cluster(&p, 4, 1).is_err());
    }

    #[test]
    fn cluster_two_blobs() {
        let p = pts(&[&[0.0], &[0.1], &[0.2], &[10.0], &[10.1]]);
        let c = dpc_knn_cluster(&p, 2, 1).unwrap();
        assert_eq!(c.assignment[0], c.assignment[1]);
        assert_eq!(c.assignment[1], c.assignment[2]);
        assert_eq!(c.assignment[3], c.assignment[4]);
        assert_ne!(c.assignment[0], c.assignment[3]);
        for (cid, &center) in c.centers.iter().enumerate() {
            assert_eq!(c.assignment[center], cid);
        }
    }

    #[test]
    fn merge_examples() {
        let t = ts(&[&[1.0, 0.0], &[0.0, 1.0], &[2.0, 2.0]]);
        let one = ClusterResult {
            assignment: vec![0, 0, 0],
            centers: vec![0],
            rho: vec![1.0; 3],
            delta: vec![0.0; 3],
        };
        let m = merge_tokens(&t, &one, &[0.0; 3]).unwrap();
        assert!((m.token(0)[0] - 1.0).abs() < 1e-15 && (m.token(0)[1] - 1.0).abs() < 1e-15);

        let pair = ClusterResult {
            assignment: vec![0, 0],
            centers: vec![0],
            rho: vec![1.0; 2],
            delta: vec![0.0; 2],
        };
        let ab = ts(&[&[3.0, 0.0], &[0.0, 3.0]]);
        let m = merge_tokens(&ab, &pair, &[2f64.ln(), 0.0]).unwrap();
        assert!((m.token(0)[0] - 2.0).abs() < 1e-12);
        assert!((m.token(0)[1] - 1.0).abs() < 1e-12);

        let ident = ClusterResult::identity(3, vec![1.0; 3], vec![0.0; 3]);
        let m = merge_tokens(&t, &ident, &[0.3, -1.0, 4.0]).unwrap();
        assert_eq!(m.tokens(), t.tokens());
        assert!(merge_tokens(&t, &ident, &[0.0; 2]).is_err());
    }

    #[test]
    fn attention_examples() {
        let kv = ts(&[&[0.3, -0.7]]);
        let out = attention_readout(&ts(&[&[5.0, 1.0], &[-2.0, 9.0]]), &kv, 1.0, None).unwrap();
        assert_eq!(out.token(0), kv.token(0));
        assert_eq!(out.token(1), kv.token(0));

        let kv = ts(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0]]);
        let out = attention_readout(&ts(&[&[1.0, 0.0, 0.0]]), &kv, 1.7, None).unwrap();
        assert_eq!(out.token(0), &[0.0, 0.5, 1.0]);

        let q = ts(&[&[1.0, 0.2]]);
        let kv = ts(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let scale = 1e-6 * (1.04f64).sqrt();
        let out = attention_readout(&q, &kv, scale, None).unwrap();
        assert!((out.token(0)[0] - 1.0).abs() < 1e-6 && out.token(0)[1].abs() < 1e-6);

        assert!(attention_readout(&q, &kv, 0.0, None).is_err());
        assert!(attention_readout(&ts(&[&[1.0]]), &kv, 1.0, None).is_err());
    }

    #[test]
    fn attention_with_projections() {
        let q = ts(&[&[1.0, 0.0]]);
        let kv = ts(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let swap = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let ident = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let p = Projections {
            query: ident.clone(),
            key: ident,
            value: swap,
        };
        let plain = attention_readout(&q, &kv, 1.0, None).unwrap();
        let proj = attention_readout(&q, &kv, 1.0, Some(&p)).unwrap();
        assert_eq!(plain.token(0)[0], proj.token(0)[1]);
    }

    #[test]
    fn smoothing_replicates_edges() {
        let t = ts(&[&[3.0], &[6.0], &[9.0]]);
        let s = temporal_smoothing(&t).unwrap();
        assert_eq!(s.tokens().as_slice(), &[4.0, 6.0, 8.0]);
    }

    #[test]
    fn counts_validation() {
        assert!(LevelCounts::default().validate().is_ok());
        let bad = LevelCounts {
            visual: [12, 3, 4],
            textual: [24, 6, 3],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn equal_counts_pass_through() {
        let v = ts(&[&[1.0, 0.0], &[0.5, 0.5], &[0.0, 1.0]]);
        let t = TokenSet::uniform(pts(&[&[1.0, 1.0], &[2.0, -1.0]]), Modality::Textual).unwrap();
        let config = HierarchyConfig {
            counts: LevelCounts {
                visual: [3, 3, 3],
                textual: [2, 2, 2],
            },
            smoothing: false,
            ..HierarchyConfig::default()
        };
        let stack = build_level_stack(&v, &t, &config).unwrap();
        for level in &stack.levels {
            assert_eq!(level.visual.tokens(), v.tokens());
            assert_eq!(level.textual.tokens(), t.tokens());
        }
    }

    #[test]
    fn stack_rejects_mismatched_entity_counts() {
        let v = ts(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let t = TokenSet::uniform(pts(&[&[1.0, 1.0]]), Modality::Textual).unwrap();
        let config = HierarchyConfig::default();
        assert!(build_level_stack(&v, &t, &config).is_err());
    }
}
