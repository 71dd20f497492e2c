//! Descriptive statistics and small linear-algebra helpers shared by the
//! test harnesses and the F-test.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked and inherent f64 methods win
use num_traits::Float;

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Lag-one sample autocorrelation.
pub fn autocorrelation_lag1(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / denom
}

/// Kendall's tau (tau-b) in O(n log n) via Knight's merge-sort algorithm.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        xs[a]
            .partial_cmp(&xs[b])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(ys[a].partial_cmp(&ys[b]).unwrap_or(core::cmp::Ordering::Equal))
    });
    let pairs = (n as u64) * (n as u64 - 1) / 2;

    // ties in x, and joint ties
    let mut ties_x = 0u64;
    let mut ties_xy = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        let run = (j - i) as u64;
        ties_x += run * (run - 1) / 2;
        let mut k = i;
        while k < j {
            let mut l = k + 1;
            while l < j && ys[idx[l]] == ys[idx[k]] {
                l += 1;
            }
            let r = (l - k) as u64;
            ties_xy += r * (r - 1) / 2;
            k = l;
        }
        i = j;
    }

    let mut seq: Vec<f64> = idx.iter().map(|&k| ys[k]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut seq, &mut buf);

    let mut ties_y = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && seq[j] == seq[i] {
            j += 1;
        }
        let run = (j - i) as u64;
        ties_y += run * (run - 1) / 2;
        i = j;
    }
    let concordant_minus_discordant =
        pairs as f64 - (ties_x + ties_y) as f64 + ties_xy as f64 - 2.0 * swaps as f64;
    let denom = ((pairs - ties_x) as f64 * (pairs - ties_y) as f64).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        concordant_minus_discordant / denom
    }
}

fn merge_count(seq: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = seq.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(left, bl) + merge_count(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if seq[j] < seq[i] {
            buf[k] = seq[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = seq[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = seq[i];
        i += 1;
        k += 1;
    }
    while j < n {
        buf[k] = seq[j];
        j += 1;
        k += 1;
    }
    seq.copy_from_slice(&buf[..n]);
    swaps
}

/// Kolmogorov-Smirnov distance of a sample against Uniform(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut s: Vec<f64> = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &u)| {
            let lo = u - i as f64 / n;
            let hi = (i as f64 + 1.0) / n - u;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    b.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Ordinary least squares of `y` on the columns of `design` (row-major,
/// `k` regressors per row). Returns the coefficients and the residual sum of
/// squares. Solved by Householder QR.
pub fn least_squares(design: &[f64], k: usize, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    if design.len() != n * k || n < k {
        return Err(Error::domain("least squares: design shape does not match response"));
    }
    // column-major copy
    let mut a: Vec<f64> = vec![0.0; n * k];
    for r in 0..n {
        for c in 0..k {
            a[c * n + r] = design[r * k + c];
        }
    }
    let mut b = y.to_vec();
    let mut diag = vec![0.0; k];
    let col_norms: Vec<f64> = (0..k)
        .map(|c| a[c * n..(c + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    for c in 0..k {
        let col = &mut a[c * n..(c + 1) * n];
        let norm = col[c..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * col_norms[c] || col_norms[c] == 0.0 {
            return Err(Error::numeric("least squares: collinear regressors"));
        }
        let alpha = if col[c] > 0.0 { -norm } else { norm };
        col[c] -= alpha;
        let vnorm2: f64 = col[c..].iter().map(|v| v * v).sum();
        diag[c] = alpha;
        let v: Vec<f64> = col[c..].to_vec();
        for c2 in (c + 1)..k {
            let other = &mut a[c2 * n..(c2 + 1) * n];
            let dot: f64 = v.iter().zip(&other[c..]).map(|(p, q)| p * q).sum();
            let f = 2.0 * dot / vnorm2;
            for (o, vi) in other[c..].iter_mut().zip(&v) {
                *o -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&b[c..]).map(|(p, q)| p * q).sum();
        let f = 2.0 * dot / vnorm2;
        for (o, vi) in b[c..].iter_mut().zip(&v) {
            *o -= f * vi;
        }
    }
    let mut coef = vec![0.0; k];
    for c in (0..k).rev() {
        let mut s = b[c];
        for c2 in (c + 1)..k {
            s -= a[c2 * n + c] * coef[c2];
        }
        coef[c] = s / diag[c];
    }
    let rss = b[k..].iter().map(|v| v * v).sum();
    Ok((coef, rss))
}
