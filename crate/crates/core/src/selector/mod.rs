//! Representative-sample selection over generated candidates.
//!
//! Sample-based strategies rank candidates by a score (CLIP score, or cosine
//! similarity to a mean feature) and either keep the top `G` or spread `G`
//! picks evenly over the sorted order. Cluster-based strategies partition the
//! pool into `G` clusters and keep the member closest to each cluster mean.
//! Every strategy breaks ties by the lower row index.

pub mod kmeans;
pub mod spectral;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_sim, EmbeddingMatrix, Manifest};
use crate::error::{Error, Result};
use crate::rng;

pub use kmeans::{kmeans, KMeans};
pub use spectral::{spectral_cluster, Spectral};

pub const DEFAULT_G: usize = 20;
pub const DEFAULT_MAX_ITERS: usize = 300;
/// Cluster-member similarities closer than this count as ties.
pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Random,
    SynMax,
    ClipMax,
    InstanceMax,
    ClipUniform,
    InstanceUniform,
    KmeansCluster,
    SpectralCluster,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Random,
        Strategy::SynMax,
        Strategy::ClipMax,
        Strategy::InstanceMax,
        Strategy::ClipUniform,
        Strategy::InstanceUniform,
        Strategy::KmeansCluster,
        Strategy::SpectralCluster,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::SynMax => "syn-max",
            Strategy::ClipMax => "clip-max",
            Strategy::InstanceMax => "instance-max",
            Strategy::ClipUniform => "clip-uniform",
            Strategy::InstanceUniform => "instance-uniform",
            Strategy::KmeansCluster => "kmeans-cluster",
            Strategy::SpectralCluster => "spectral-cluster",
        }
    }

    pub fn is_cluster(self) -> bool {
        matches!(self, Strategy::KmeansCluster | Strategy::SpectralCluster)
    }

    pub fn needs_clip_scores(self) -> bool {
        matches!(self, Strategy::ClipMax | Strategy::ClipUniform)
    }

    pub fn needs_real(self) -> bool {
        matches!(self, Strategy::InstanceMax | Strategy::InstanceUniform)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub strategy: Strategy,
    /// Number of samples kept per category.
    pub g: usize,
    /// Cluster count; defaults to `g` and must equal it for cluster strategies.
    #[serde(default)]
    pub k: Option<usize>,
    /// Spectral kernel width; defaults to the median pairwise distance.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Run seed; supplied by the caller, never read from config files.
    #[serde(skip)]
    pub seed: u64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::SpectralCluster,
            g: DEFAULT_G,
            k: None,
            sigma: None,
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl SelectionConfig {
    pub fn new(strategy: Strategy, g: usize) -> Self {
        Self {
            strategy,
            g,
            ..Self::default()
        }
    }

    pub fn cluster_count(&self) -> usize {
        self.k.unwrap_or(self.g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategy.is_cluster() && self.cluster_count() != self.g {
            return Err(Error::ConfigInvalid(format!(
                "cluster strategies keep one sample per cluster: k ({}) must equal G ({})",
                self.cluster_count(),
                self.g
            )));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::ConfigInvalid(format!("sigma must be positive, got {s}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::ConfigInvalid("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Diagnostics {
    None,
    /// Score of each selected row, in selection order.
    Scores { scores: Vec<f64> },
    Clusters {
        sizes: Vec<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        wcss: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub category: String,
    pub strategy: Strategy,
    pub indices: Vec<usize>,
    pub diagnostics: Diagnostics,
}

/// Wire form: `{category, strategy, indices, image_ids}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub category: String,
    pub strategy: Strategy,
    pub indices: Vec<usize>,
    pub image_ids: Vec<String>,
}

impl SelectionResult {
    pub fn to_record(&self, manifest: &Manifest) -> Result<SelectionRecord> {
        let image_ids = self
            .indices
            .iter()
            .map(|&i| {
                manifest
                    .get(i)
                    .map(|e| e.image_id.clone())
                    .ok_or(Error::IndexOutOfRange {
                        index: i,
                        len: manifest.len(),
                    })
            })
            .collect::<Result<_>>()?;
        Ok(SelectionRecord {
            category: self.category.clone(),
            strategy: self.strategy,
            indices: self.indices.clone(),
            image_ids,
        })
    }
}

fn ensure_pool(pool: usize, requested: usize) -> Result<()> {
    if requested > pool {
        Err(Error::PoolTooSmall { pool, requested })
    } else {
        Ok(())
    }
}

fn ensure_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(row) => Err(Error::NonFiniteValue { row, col: 0 }),
        None => Ok(()),
    }
}

/// Indices of the `g` largest values, ties to the lower index.
pub fn top_g(values: &[f64], g: usize) -> Result<Vec<usize>> {
    ensure_pool(values.len(), g)?;
    ensure_finite(values)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(g);
    Ok(order)
}

/// Spreads `g` picks evenly over the ascending order of `values`: sorted
/// positions `floor(i * (n - 1) / (g - 1))` for `i` in `0..g`.
pub fn uniform_sample_sorted(values: &[f64], g: usize) -> Result<Vec<usize>> {
    let n = values.len();
    ensure_pool(n, g)?;
    ensure_finite(values)?;
    if g < 2 {
        return Err(Error::ConfigInvalid(
            "uniform sampling needs G >= 2 to span the sorted range".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    Ok((0..g).map(|i| order[i * (n - 1) / (g - 1)]).collect())
}

fn scored(category: &str, strategy: Strategy, indices: Vec<usize>, values: &[f64]) -> SelectionResult {
    SelectionResult {
        category: category.to_string(),
        strategy,
        diagnostics: Diagnostics::Scores {
            scores: indices.iter().map(|&i| values[i]).collect(),
        },
        indices,
    }
}

pub fn select_random(category: &str, pool: usize, cfg: &SelectionConfig) -> Result<SelectionResult> {
    ensure_pool(pool, cfg.g)?;
    let mut rng = rng::category_stream(cfg.seed, category);
    Ok(SelectionResult {
        category: category.to_string(),
        strategy: Strategy::Random,
        indices: index::sample(&mut rng, pool, cfg.g).into_vec(),
        diagnostics: Diagnostics::None,
    })
}

/// Cosine similarity of every row to a direction.
pub fn similarity_to(rows: &EmbeddingMatrix, direction: &[f32]) -> Result<Vec<f64>> {
    rows.rows().map(|r| cosine_sim(r, direction)).collect()
}

pub fn select_syn_max(category: &str, generated: &EmbeddingMatrix, cfg: &SelectionConfig) -> Result<SelectionResult> {
    ensure_pool(generated.count(), cfg.g)?;
    let mean = generated.normalized_mean(None)?;
    let sims = similarity_to(generated, &mean)?;
    Ok(scored(category, Strategy::SynMax, top_g(&sims, cfg.g)?, &sims))
}

pub fn select_clip_max(category: &str, scores: &[f64], cfg: &SelectionConfig) -> Result<SelectionResult> {
    Ok(scored(category, Strategy::ClipMax, top_g(scores, cfg.g)?, scores))
}

fn real_similarity(generated: &EmbeddingMatrix, real: &EmbeddingMatrix) -> Result<Vec<f64>> {
    if generated.dim() != real.dim() {
        return Err(Error::DimMismatch {
            left: generated.dim(),
            right: real.dim(),
        });
    }
    let mean = real.normalized_mean(None)?;
    similarity_to(generated, &mean)
}

pub fn select_instance_max(
    category: &str,
    generated: &EmbeddingMatrix,
    real: &EmbeddingMatrix,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    ensure_pool(generated.count(), cfg.g)?;
    let sims = real_similarity(generated, real)?;
    Ok(scored(category, Strategy::InstanceMax, top_g(&sims, cfg.g)?, &sims))
}

pub fn select_clip_uniform(category: &str, scores: &[f64], cfg: &SelectionConfig) -> Result<SelectionResult> {
    Ok(scored(
        category,
        Strategy::ClipUniform,
        uniform_sample_sorted(scores, cfg.g)?,
        scores,
    ))
}

pub fn select_instance_uniform(
    category: &str,
    generated: &EmbeddingMatrix,
    real: &EmbeddingMatrix,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    ensure_pool(generated.count(), cfg.g)?;
    let sims = real_similarity(generated, real)?;
    Ok(scored(
        category,
        Strategy::InstanceUniform,
        uniform_sample_sorted(&sims, cfg.g)?,
        &sims,
    ))
}

/// For each cluster, the member most cosine-similar to the re-normalized
/// cluster mean. Returns one index per cluster, in cluster order.
pub fn select_cluster_nearest(features: &EmbeddingMatrix, assignments: &[usize], k: usize) -> Result<Vec<usize>> {
    if assignments.len() != features.count() {
        return Err(Error::AlignmentMismatch {
            detections: assignments.len(),
            rows: features.count(),
        });
    }
    let mut members = vec![Vec::new(); k];
    for (i, &c) in assignments.iter().enumerate() {
        if c >= k {
            return Err(Error::IndexOutOfRange { index: c, len: k });
        }
        members[c].push(i);
    }
    members
        .iter()
        .enumerate()
        .map(|(c, rows)| {
            if rows.is_empty() {
                return Err(Error::EmptyCluster(c));
            }
            // Unit rows in f64: with two members both are exactly as close
            // to the mean, and f32 norm error must not break that tie.
            let units = rows
                .iter()
                .map(|&i| {
                    let r: Vec<f64> = features.row(i).iter().map(|&x| x as f64).collect();
                    let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n == 0.0 {
                        return Err(Error::ZeroNormRow(i));
                    }
                    Ok(r.into_iter().map(|x| x / n).collect::<Vec<f64>>())
                })
                .collect::<Result<Vec<_>>>()?;
            let mut mean = vec![0.0; features.dim()];
            for u in &units {
                mean.iter_mut().zip(u).for_each(|(m, x)| *m += x);
            }
            let mn = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
            if mn == 0.0 {
                // members cancel out; every member is equally near
                return Ok(rows[0]);
            }
            let mut best = rows[0];
            let mut best_sim = f64::NEG_INFINITY;
            for (&i, u) in rows.iter().zip(&units) {
                let s = u.iter().zip(&mean).map(|(a, b)| a * b).sum::<f64>() / mn;
                if s > best_sim + TIE_EPS {
                    best = i;
                    best_sim = s;
                }
            }
            Ok(best)
        })
        .collect()
}

fn cluster_sizes(assignments: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &c in assignments {
        sizes[c] += 1;
    }
    sizes
}

pub fn select_kmeans_cluster(category: &str, generated: &EmbeddingMatrix, cfg: &SelectionConfig) -> Result<SelectionResult> {
    cfg.validate()?;
    let k = cfg.cluster_count();
    ensure_pool(generated.count(), k)?;
    let seed = rng::derive_seed(cfg.seed, category.as_bytes());
    let km = kmeans(generated, k, seed, cfg.max_iters)?;
    Ok(SelectionResult {
        category: category.to_string(),
        strategy: Strategy::KmeansCluster,
        indices: select_cluster_nearest(generated, &km.assignments, k)?,
        diagnostics: Diagnostics::Clusters {
            sizes: cluster_sizes(&km.assignments, k),
            wcss: Some(km.wcss()),
            sigma: None,
        },
    })
}

pub fn select_spectral_cluster(category: &str, generated: &EmbeddingMatrix, cfg: &SelectionConfig) -> Result<SelectionResult> {
    cfg.validate()?;
    let k = cfg.cluster_count();
    ensure_pool(generated.count(), k)?;
    let seed = rng::derive_seed(cfg.seed, category.as_bytes());
    let sp = spectral_cluster(generated, k, cfg.sigma, seed, cfg.max_iters)?;
    Ok(SelectionResult {
        category: category.to_string(),
        strategy: Strategy::SpectralCluster,
        indices: select_cluster_nearest(generated, &sp.assignments, k)?,
        diagnostics: Diagnostics::Clusters {
            sizes: cluster_sizes(&sp.assignments, k),
            wcss: None,
            sigma: Some(sp.sigma),
        },
    })
}

/// Everything a strategy may consume for one category.
#[derive(Debug, Clone, Copy)]
pub struct SelectionInputs<'a> {
    pub category: &'a str,
    /// L2-normalized generated-candidate embeddings.
    pub generated: &'a EmbeddingMatrix,
    /// L2-normalized real few-shot embeddings (instance strategies).
    pub real: Option<&'a EmbeddingMatrix>,
    /// One CLIP score per candidate (clip strategies).
    pub clip_scores: Option<&'a [f64]>,
}

pub fn select(inputs: SelectionInputs<'_>, cfg: &SelectionConfig) -> Result<SelectionResult> {
    cfg.validate()?;
    let SelectionInputs {
        category,
        generated,
        real,
        clip_scores,
    } = inputs;
    let need_scores = || {
        clip_scores.ok_or_else(|| {
            Error::ConfigInvalid(format!("strategy {} needs CLIP scores", cfg.strategy))
        })
    };
    let need_real = || {
        real.ok_or_else(|| {
            Error::ConfigInvalid(format!("strategy {} needs real embeddings", cfg.strategy))
        })
    };
    if let Some(s) = clip_scores {
        if s.len() != generated.count() {
            return Err(Error::AlignmentMismatch {
                detections: s.len(),
                rows: generated.count(),
            });
        }
    }
    match cfg.strategy {
        Strategy::Random => select_random(category, generated.count(), cfg),
        Strategy::SynMax => select_syn_max(category, generated, cfg),
        Strategy::ClipMax => select_clip_max(category, need_scores()?, cfg),
        Strategy::InstanceMax => select_instance_max(category, generated, need_real()?, cfg),
        Strategy::ClipUniform => select_clip_uniform(category, need_scores()?, cfg),
        Strategy::InstanceUniform => select_instance_uniform(category, generated, need_real()?, cfg),
        Strategy::KmeansCluster => select_kmeans_cluster(category, generated, cfg),
        Strategy::SpectralCluster => select_spectral_cluster(category, generated, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[[f32; 2]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap().l2_normalize().unwrap()
    }

    fn cfg(strategy: Strategy, g: usize) -> SelectionConfig {
        SelectionConfig::new(strategy, g)
    }

    #[test]
    fn random_exhausts_and_repeats() {
        let all = select_random("bird", 20, &cfg(Strategy::Random, 20)).unwrap();
        let mut sorted = all.indices.clone();
        sorted.sort();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());

        let c = SelectionConfig {
            seed: 7,
            ..cfg(Strategy::Random, 20)
        };
        assert_eq!(
            select_random("bird", 200, &c).unwrap(),
            select_random("bird", 200, &c).unwrap()
        );
        assert!(matches!(
            select_random("bird", 10, &c),
            Err(Error::PoolTooSmall { pool: 10, requested: 20 })
        ));
    }

    #[test]
    fn syn_max_examples() {
        let g = m(&[[1., 0.], [1., 0.], [0., 1.]]);
        assert_eq!(select_syn_max("c", &g, &cfg(Strategy::SynMax, 2)).unwrap().indices, vec![0, 1]);
        let mut all = select_syn_max("c", &g, &cfg(Strategy::SynMax, 3)).unwrap().indices;
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
        let same = m(&[[0.3, 0.4]; 4]);
        assert_eq!(select_syn_max("c", &same, &cfg(Strategy::SynMax, 2)).unwrap().indices, vec![0, 1]);
    }

    #[test]
    fn clip_max_examples() {
        let c2 = cfg(Strategy::ClipMax, 2);
        assert_eq!(select_clip_max("c", &[0.9, 0.1, 0.5], &c2).unwrap().indices, vec![0, 2]);
        assert_eq!(
            select_clip_max("c", &[0.4; 5], &cfg(Strategy::ClipMax, 3)).unwrap().indices,
            vec![0, 1, 2]
        );
        assert!(matches!(
            select_clip_max("c", &[0.1, f64::NAN], &c2),
            Err(Error::NonFiniteValue { row: 1, .. })
        ));
    }

    #[test]
    fn instance_max_examples() {
        let real = m(&[[1., 0.]]);
        let gen = m(&[[1., 0.], [0., 1.], [0.7, 0.7]]);
        let r = select_instance_max("c", &gen, &real, &cfg(Strategy::InstanceMax, 2)).unwrap();
        assert_eq!(r.indices, vec![0, 2]);

        let real3 = EmbeddingMatrix::from_rows(&[[1f32, 0., 0.]]).unwrap();
        assert!(matches!(
            select_instance_max("c", &gen, &real3, &cfg(Strategy::InstanceMax, 2)),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn uniform_examples() {
        assert_eq!(uniform_sample_sorted(&[10., 20., 30., 40., 50.], 3).unwrap(), vec![0, 2, 4]);
        assert_eq!(uniform_sample_sorted(&[3., 1., 2.], 3).unwrap(), vec![1, 2, 0]);
        assert_eq!(uniform_sample_sorted(&[5., 9., 1., 7.], 2).unwrap(), vec![2, 1]);
        assert!(matches!(
            uniform_sample_sorted(&[1., 2.], 3),
            Err(Error::PoolTooSmall { .. })
        ));
    }

    #[test]
    fn cluster_nearest_examples() {
        // cluster 0 = {0, 1, 3}: row 1 sits between the other two
        let f = m(&[[1., 0.], [0.9, 0.3], [0., 1.], [0.6, 0.6]]);
        assert_eq!(select_cluster_nearest(&f, &[0, 0, 1, 0], 2).unwrap(), vec![1, 2]);

        // two unit rows are equidistant from their mean: lower index wins
        let pair = m(&[[0., 1.], [1., 0.], [0.9, 0.1]]);
        assert_eq!(select_cluster_nearest(&pair, &[1, 0, 0], 2).unwrap(), vec![1, 0]);
        assert_eq!(select_cluster_nearest(&pair, &[0, 1, 1], 2).unwrap(), vec![0, 1]);

        let dup = m(&[[1., 1.], [1., 1.]]);
        assert_eq!(select_cluster_nearest(&dup, &[0, 0], 1).unwrap(), vec![0]);
        assert!(matches!(
            select_cluster_nearest(&dup, &[0, 0], 2),
            Err(Error::EmptyCluster(1))
        ));
    }

    #[test]
    fn cluster_strategies_require_k_equal_g() {
        let c = SelectionConfig {
            k: Some(3),
            ..cfg(Strategy::KmeansCluster, 2)
        };
        assert!(matches!(c.validate(), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn strategy_names_parse() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("Spectral_cluster".parse::<Strategy>().unwrap(), Strategy::SpectralCluster);
    }

    mod props {
        use crate::embedding::EmbeddingMatrix;
        use crate::error::Error;
        use crate::selector::{
            select, top_g, uniform_sample_sorted, SelectionConfig, SelectionInputs, Strategy as Strat,
        };
        use proptest::prelude::*;

        fn pool() -> impl Strategy<Value = (EmbeddingMatrix, Vec<f64>, usize)> {
            (3usize..12).prop_flat_map(|n| {
                (
                    proptest::collection::vec(0.1f32..1.0, n * 3),
                    proptest::collection::vec(-1f64..1.0, n),
                    2usize..=n,
                )
                    .prop_map(move |(d, s, g)| {
                        let m = EmbeddingMatrix::new(n, 3, d).unwrap().l2_normalize().unwrap();
                        (m, s, g)
                    })
            })
        }

        proptest! {
            #[test]
            fn every_strategy_returns_g_distinct_indices((gen, scores, g) in pool(), seed in 0u64..1000) {
                let real = gen.select_rows(&[0]).unwrap();
                for strategy in Strat::ALL {
                    let c = SelectionConfig { seed, ..SelectionConfig::new(strategy, g) };
                    let inputs = SelectionInputs {
                        category: "cat",
                        generated: &gen,
                        real: Some(&real),
                        clip_scores: Some(&scores),
                    };
                    let r = match select(inputs, &c) {
                        Ok(r) => r,
                        // coincident random points can legitimately defeat the kernel default
                        Err(Error::ConfigInvalid(_)) | Err(Error::DegenerateAffinity(_)) => continue,
                        Err(e) => return Err(TestCaseError::fail(format!("{strategy}: {e}"))),
                    };
                    prop_assert_eq!(r.indices.len(), g);
                    let mut s = r.indices.clone();
                    s.sort();
                    s.dedup();
                    prop_assert_eq!(s.len(), g);
                    prop_assert!(r.indices.iter().all(|&i| i < gen.count()));
                    prop_assert_eq!(&select(inputs, &c).unwrap(), &r);
                }
            }

            #[test]
            fn argsort_invariance_under_positive_scaling(
                scores in proptest::collection::vec(-5f64..5.0, 2..15),
                k in 0.01f64..50.0,
                g_frac in 0.0f64..1.0,
            ) {
                let n = scores.len();
                let g = 2 + ((n - 2) as f64 * g_frac) as usize;
                let scaled: Vec<f64> = scores.iter().map(|s| s * k).collect();
                prop_assert_eq!(top_g(&scores, g).unwrap(), top_g(&scaled, g).unwrap());
                prop_assert_eq!(
                    uniform_sample_sorted(&scores, g).unwrap(),
                    uniform_sample_sorted(&scaled, g).unwrap()
                );
            }

            #[test]
            fn uniform_steps_are_floor_or_ceil(n in 2usize..60, g_frac in 0.0f64..1.0) {
                let g = 2 + ((n - 2) as f64 * g_frac) as usize;
                let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
                let picked = uniform_sample_sorted(&values, g).unwrap();
                let step = (n - 1) as f64 / (g - 1) as f64;
                for w in picked.windows(2) {
                    let diff = w[1] - w[0];
                    prop_assert!(diff == step.floor() as usize || diff == step.ceil() as usize);
                }
                prop_assert_eq!(picked[0], 0);
                prop_assert_eq!(*picked.last().unwrap(), n - 1);
            }
        }
    }
}
