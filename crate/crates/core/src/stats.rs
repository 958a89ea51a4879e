//! Small numeric helpers shared across modules.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divides by `n`).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn trend_slope(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let xm = (n - 1) as f64 / 2.0;
    let ym = mean(ys);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        num += dx * (y - ym);
        den += dx * dx;
    }
    num / den
}

/// Average ranks (1-based), ties share the mean of their positions.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with tie-averaged ranks. `None` when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let mx = mean(&rx);
    let my = mean(&ry);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// One-sided p-value for H1: rho > 0, using the t approximation with n - 2 dof.
pub fn spearman_p_increasing(rho: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    if rho >= 1.0 {
        return 0.0;
    }
    let dof = (n - 2) as f64;
    let t = rho * (dof / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof).expect("dof > 0");
    1.0 - dist.cdf(t)
}

/// First and second raw moments of a group of equally long streams, each taken
/// relative to a fixed reference offset so that long accumulations stay well
/// conditioned. Cross products are stored as a packed upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    dim: usize,
    n: f64,
    sums: Vec<f64>,
    cross: Vec<f64>,
}

fn tri_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

impl Moments {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            n: 0.0,
            sums: vec![0.0; dim],
            cross: vec![0.0; tri_len(dim)],
        }
    }

    /// Panics if the streams differ in length or `refs` has the wrong length.
    pub fn from_streams(streams: &[&[f64]], refs: &[f64]) -> Self {
        let dim = streams.len();
        assert_eq!(refs.len(), dim);
        let len = streams.first().map_or(0, |s| s.len());
        assert!(streams.iter().all(|s| s.len() == len), "streams differ in length");
        let shifted: Vec<Vec<f64>> = streams
            .iter()
            .zip(refs)
            .map(|(s, r)| s.iter().map(|x| x - r).collect())
            .collect();
        let mut m = Self::zeros(dim);
        m.n = len as f64;
        let mut k = 0;
        for a in 0..dim {
            m.sums[a] = shifted[a].iter().sum();
            for b in a..dim {
                m.cross[k] = dot(&shifted[a], &shifted[b]);
                k += 1;
            }
        }
        m
    }

    #[inline]
    fn idx(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        a * (2 * self.dim - a - 1) / 2 + b
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> f64 {
        self.n
    }

    pub fn sum(&self, a: usize) -> f64 {
        self.sums[a]
    }

    pub fn cross(&self, a: usize, b: usize) -> f64 {
        self.cross[self.idx(a, b)]
    }

    pub fn add_assign(&mut self, other: &Moments) {
        assert_eq!(self.dim, other.dim);
        self.n += other.n;
        for (x, y) in self.sums.iter_mut().zip(&other.sums) {
            *x += y;
        }
        for (x, y) in self.cross.iter_mut().zip(&other.cross) {
            *x += y;
        }
    }

    /// Moments restricted to the listed stream positions, in the given order.
    pub fn select(&self, idx: &[usize]) -> Moments {
        let mut m = Moments::zeros(idx.len());
        m.add_selected(self, idx);
        m
    }

    /// Accumulate the selected positions of `other` into `self` (whose dim equals `idx.len()`).
    pub fn add_selected(&mut self, other: &Moments, idx: &[usize]) {
        assert_eq!(self.dim, idx.len());
        self.n += other.n;
        let mut k = 0;
        for (p, &a) in idx.iter().enumerate() {
            self.sums[p] += other.sums[a];
            for &b in &idx[p..] {
                self.cross[k] += other.cross(a, b);
                k += 1;
            }
        }
    }

    /// Embed `self` (over positions `idx`) into a zero-filled moment set of size `dim`.
    pub fn embed(&self, idx: &[usize], dim: usize) -> Moments {
        assert_eq!(self.dim, idx.len());
        let mut m = Moments::zeros(dim);
        m.n = self.n;
        for (p, &a) in idx.iter().enumerate() {
            m.sums[a] = self.sums[p];
            for (q, &b) in idx.iter().enumerate().skip(p) {
                let k = m.idx(a, b);
                m.cross[k] = self.cross(p, q);
            }
        }
        m
    }

    /// Centered co-moment `sum((x_a - mean_a)(x_b - mean_b))`.
    pub fn centered(&self, a: usize, b: usize) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        self.cross(a, b) - self.sums[a] * self.sums[b] / self.n
    }

    pub fn pearson(&self, a: usize, b: usize) -> Option<f64> {
        let saa = self.centered(a, a);
        let sbb = self.centered(b, b);
        if !(saa > 0.0 && sbb > 0.0) {
            return None;
        }
        Some((self.centered(a, b) / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_perfect_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 4.0, 9.0, 16.0, 100.0];
        assert_eq!(spearman(&x, &y), Some(1.0));
        assert!(spearman_p_increasing(0.9, 5) < 0.05);
        assert!(spearman_p_increasing(0.5, 5) > 0.05);
        assert_eq!(spearman(&x, &[3.0; 5]), None);
    }

    #[test]
    fn moments_match_direct_pearson() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 9.0];
        let m = Moments::from_streams(&[&x, &y], &[100.0, -3.0]);
        let r = m.pearson(0, 1).unwrap();
        // deviations products sum 11.5, sxx 5, syy 26.75
        let expected = 11.5 / (5.0f64 * 26.75f64).sqrt();
        assert!((r - expected).abs() < 1e-12, "{r} vs {expected}");
    }

    #[test]
    fn packed_select_matches_full() {
        let a = [1.0, 5.0, 2.0, 7.0];
        let b = [0.5, 0.1, 3.0, 2.0];
        let c = [9.0, 1.0, 4.0, 4.5];
        let full = Moments::from_streams(&[&a, &b, &c], &[0.0; 3]);
        let sel = full.select(&[2, 0]);
        let direct = Moments::from_streams(&[&c, &a], &[0.0; 2]);
        assert_eq!(sel, direct);
        assert_eq!(full.cross(2, 1), full.cross(1, 2));
        assert!((full.cross(1, 2) - dot(&b, &c)).abs() < 1e-12);
    }

    #[test]
    fn trend_slope_of_line() {
        assert!((trend_slope(&[1.0, 3.0, 5.0, 7.0]) - 2.0).abs() < 1e-12);
    }
}
