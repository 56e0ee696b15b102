//! Rankings, Spearman correlation and the random-subset experiment.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::measures::{measure_values, Component, Measure, ScoreVector};
use crate::{Error, Result};

/// Shapes in ascending order of score with tie-averaged 1-based ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// `(id, score, rank)` ascending by score, ties ordered by id.
    entries: Vec<(String, f64, f64)>,
    ranks: BTreeMap<String, f64>,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.0.as_str())
    }

    pub fn entries(&self) -> &[(String, f64, f64)] {
        &self.entries
    }

    pub fn rank_of(&self, id: &str) -> Option<f64> {
        self.ranks.get(id).copied()
    }
}

/// 1-based ranks in input order; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn rank(scores: &[(String, f64)]) -> Result<Ranking> {
    let mut seen = HashSet::new();
    for (id, v) in scores {
        if !v.is_finite() {
            return Err(Error::Ranking(format!("score of `{id}` is not finite")));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::Ranking(format!("duplicate id `{id}`")));
        }
    }
    let values: Vec<f64> = scores.iter().map(|s| s.1).collect();
    let ranks = average_ranks(&values);
    let mut entries: Vec<_> = scores.iter().zip(&ranks).map(|((id, v), &r)| (id.clone(), *v, r)).collect();
    entries.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let ranks = entries.iter().map(|e| (e.0.clone(), e.2)).collect();
    Ok(Ranking { entries, ranks })
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation on raw values (ties averaged).
pub fn spearman_values(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(&average_ranks(a), &average_ranks(b))
}

pub fn spearman(r1: &Ranking, r2: &Ranking) -> Result<f64> {
    if r1.len() < 2 {
        return Err(Error::Ranking(format!("need at least 2 shapes, got {}", r1.len())));
    }
    if r1.len() != r2.len() {
        return Err(Error::Ranking(format!("rankings have {} and {} shapes", r1.len(), r2.len())));
    }
    let mut a = Vec::with_capacity(r1.len());
    let mut b = Vec::with_capacity(r1.len());
    for (id, rank) in &r1.ranks {
        let other = r2
            .rank_of(id)
            .ok_or_else(|| Error::Ranking(format!("`{id}` missing from second ranking")))?;
        a.push(*rank);
        b.push(other);
    }
    pearson(&a, &b).ok_or_else(|| Error::Ranking("correlation undefined: all ranks tied".into()))
}

/// Mean pairwise Spearman correlations over random subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetMatrix {
    pub measures: Vec<Measure>,
    /// Symmetric; the diagonal is 1.
    pub mean: Vec<Vec<f64>>,
    /// Trials in which the pair's correlation was defined (no all-tied side).
    pub defined: Vec<Vec<usize>>,
    pub trials: usize,
    pub k: usize,
    pub seed: u64,
}

impl SubsetMatrix {
    pub fn get(&self, a: Measure, b: Measure) -> Option<f64> {
        let i = self.measures.iter().position(|&m| m == a)?;
        let j = self.measures.iter().position(|&m| m == b)?;
        Some(self.mean[i][j])
    }

    /// Square CSV with a header row and one labeled row per measure.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("measure");
        for m in &self.measures {
            write!(out, ",{m}").unwrap();
        }
        out.push('\n');
        for (m, row) in self.measures.iter().zip(&self.mean) {
            out.push_str(m.name());
            for v in row {
                if v.is_nan() {
                    out.push(',');
                } else {
                    write!(out, ",{v:.6}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Samples `k` shapes without replacement per trial (trial `t` seeded with
/// `seed + t`), ranks them by every measure and averages pairwise Spearman
/// correlations. `combined` and `combined_eq` are computed from
/// `components`; the equalized form over each subset.
pub fn subset_experiment(
    corpus: &[ScoreVector],
    measures: &[Measure],
    components: &[Component],
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<SubsetMatrix> {
    if k < 2 {
        return Err(Error::Parameter(format!("subset size must be ≥ 2, got {k}")));
    }
    if corpus.len() < k {
        return Err(Error::Parameter(format!(
            "subset size {k} exceeds corpus size {}",
            corpus.len()
        )));
    }
    if trials == 0 {
        return Err(Error::Parameter("need at least one trial".into()));
    }
    let n = measures.len();
    let mut sum = vec![vec![0.0; n]; n];
    let mut defined = vec![vec![0usize; n]; n];
    let full: Vec<Option<Vec<f64>>> = measures
        .iter()
        .map(|&m| match m {
            Measure::CombinedEq => Ok(None),
            _ => measure_values(corpus, m, components).map(Some),
        })
        .collect::<Result<_>>()?;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
        let picked = sample(&mut rng, corpus.len(), k).into_vec();
        let mut ranks = Vec::with_capacity(n);
        for (&m, f) in measures.iter().zip(&full) {
            let vals = match f {
                Some(v) => picked.iter().map(|&i| v[i]).collect(),
                None => {
                    let sub: Vec<ScoreVector> = picked.iter().map(|&i| corpus[i].clone()).collect();
                    measure_values(&sub, m, components)?
                }
            };
            ranks.push(average_ranks(&vals));
        }
        for i in 0..n {
            for j in i..n {
                if let Some(r) = pearson(&ranks[i], &ranks[j]) {
                    sum[i][j] += r;
                    defined[i][j] += 1;
                }
            }
        }
    }
    let mut mean = vec![vec![f64::NAN; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = if defined[i][j] > 0 {
                sum[i][j] / defined[i][j] as f64
            } else {
                f64::NAN
            };
            mean[i][j] = v;
            mean[j][i] = v;
            defined[j][i] = defined[i][j];
        }
    }
    Ok(SubsetMatrix {
        measures: measures.to_vec(),
        mean,
        defined,
        trials,
        k,
        seed,
    })
}

/// Shape ids in human-judged order, least complex first.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRanking {
    pub ids: Vec<String>,
}

impl ReferenceRanking {
    /// One id per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let ids: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect();
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::Ranking(format!("reference lists `{dup}` twice")));
        }
        Ok(ReferenceRanking { ids })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Checks the reference names exactly the scored ids, reporting the
    /// first reference id that has no score, then the first unreferenced score.
    pub fn validate(&self, scores: &[ScoreVector]) -> Result<()> {
        let scored: HashSet<&str> = scores.iter().map(|s| s.id.as_str()).collect();
        if let Some(missing) = self.ids.iter().find(|id| !scored.contains(id.as_str())) {
            return Err(Error::Ranking(format!("reference id `{missing}` not found in scores")));
        }
        let referenced: HashSet<&str> = self.ids.iter().map(String::as_str).collect();
        if let Some(extra) = scores.iter().find(|s| !referenced.contains(s.id.as_str())) {
            return Err(Error::Ranking(format!("scored id `{}` missing from reference", extra.id)));
        }
        Ok(())
    }

    pub fn ranking(&self) -> Ranking {
        let scores: Vec<(String, f64)> = self.ids.iter().enumerate().map(|(i, id)| (id.clone(), i as f64)).collect();
        rank(&scores).expect("reference ids are unique")
    }
}

/// Least-squares line `y = slope·x + intercept`.
pub fn ols(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::Parameter("trendline needs at least 2 points".into()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("trendline undefined: all x equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureComparison {
    pub measure: Measure,
    pub spearman: f64,
    /// `(reference rank, measure rank)` per shape, in reference order.
    pub pairs: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
}

pub fn compare_to_reference(
    scores: &[ScoreVector],
    measures: &[Measure],
    components: &[Component],
    reference: &ReferenceRanking,
) -> Result<Vec<MeasureComparison>> {
    reference.validate(scores)?;
    let human = reference.ranking();
    let mut out = Vec::with_capacity(measures.len());
    for &m in measures {
        let vals = measure_values(scores, m, components)?;
        let pairs: Vec<(String, f64)> = scores.iter().map(|s| s.id.clone()).zip(vals).collect();
        let r = rank(&pairs)?;
        let rho = spearman(&human, &r)?;
        let points: Vec<(f64, f64)> = reference
            .ids
            .iter()
            .map(|id| (human.rank_of(id).unwrap(), r.rank_of(id).unwrap()))
            .collect();
        let (slope, intercept) = ols(&points)?;
        out.push(MeasureComparison {
            measure: m,
            spearman: rho,
            pairs: points,
            slope,
            intercept,
        });
    }
    Ok(out)
}
