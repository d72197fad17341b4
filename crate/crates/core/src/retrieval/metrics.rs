use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::{Qrels, RunResult};

/// Mean of a per-query metric and how many queries it covers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub mean: f64,
    pub evaluated: usize,
    /// Queries without relevance judgments.
    pub skipped: usize,
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Parameter("metric cutoff k must be >= 1".into()));
    }
    Ok(())
}

fn average(run: &RunResult, qrels: &Qrels, mut per_query: impl FnMut(usize) -> Option<f64>) -> MetricScore {
    let mut sum = 0.0;
    let mut evaluated = 0;
    for q in 0..run.rankings.len() {
        if qrels.relevant(q).is_none() {
            continue;
        }
        if let Some(v) = per_query(q) {
            sum += v;
            evaluated += 1;
        }
    }
    MetricScore {
        mean: if evaluated > 0 { sum / evaluated as f64 } else { 0.0 },
        evaluated,
        skipped: run.rankings.len() - evaluated,
    }
}

/// Fraction of each query's relevant documents found in its top `k`.
pub fn recall_at_k(run: &RunResult, qrels: &Qrels, k: usize) -> Result<MetricScore> {
    check_k(k)?;
    Ok(average(run, qrels, |q| {
        let rel = qrels.relevant(q)?;
        let hit = run.ranked_docs(q).take(k).filter(|d| rel.contains_key(d)).count();
        Some(hit as f64 / rel.len() as f64)
    }))
}

/// Graded nDCG with `gain / log2(rank + 1)` discounting.
pub fn ndcg_at_k(run: &RunResult, qrels: &Qrels, k: usize) -> Result<MetricScore> {
    check_k(k)?;
    Ok(average(run, qrels, |q| {
        let rel = qrels.relevant(q)?;
        let dcg: f64 = run
            .ranked_docs(q)
            .take(k)
            .enumerate()
            .map(|(r, d)| qrels.grade(q, d) as f64 / discount(r))
            .sum();
        let mut ideal: Vec<u32> = rel.values().copied().collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let idcg: f64 = ideal.iter().take(k).enumerate().map(|(r, &g)| g as f64 / discount(r)).sum();
        Some(dcg / idcg)
    }))
}

/// `log2(rank + 1)` for a zero-based position.
#[inline]
fn discount(pos: usize) -> f64 {
    ((pos + 2) as f64).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(lists: &[&[usize]]) -> RunResult {
        RunResult::new(lists.iter().map(|l| l.iter().map(|&d| (d, 0.0)).collect()).collect())
    }

    #[test]
    fn recall_cases() {
        let mut q = Qrels::default();
        q.insert(0, 3, 1);
        q.insert(0, 9, 1);
        let r = run(&[&[3, 1, 2, 4, 5, 9]]);
        assert_eq!(recall_at_k(&r, &q, 5).unwrap().mean, 0.5);
        assert_eq!(recall_at_k(&r, &q, 6).unwrap().mean, 1.0);
        assert_eq!(recall_at_k(&run(&[&[0, 1]]), &q, 2).unwrap().mean, 0.0);
    }

    #[test]
    fn single_relevant_at_rank_two() {
        let mut q = Qrels::default();
        q.insert(0, 7, 1);
        let v = ndcg_at_k(&run(&[&[1, 7, 2]]), &q, 10).unwrap().mean;
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert!((v - 0.6309).abs() < 1e-4);
    }

    #[test]
    fn unjudged_queries_are_skipped() {
        let mut q = Qrels::default();
        q.insert(1, 0, 2);
        let s = ndcg_at_k(&run(&[&[0], &[0]]), &q, 3).unwrap();
        assert_eq!((s.mean, s.evaluated, s.skipped), (1.0, 1, 1));
        assert!(recall_at_k(&run(&[&[0]]), &q, 0).is_err());
    }
}
