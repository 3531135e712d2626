#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub k: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Knn {
    /// Fraction of the `k` nearest training rows labeled malignant;
    /// equal distances resolve to the lower training index.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        d.select_nth_unstable_by(k - 1, cmp);
        d[..k].iter().filter(|&&(_, i)| self.labels[i] == 1).count() as f64 / k as f64
    }
}
