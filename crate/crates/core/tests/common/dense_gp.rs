//! Dense Gauss-Jordan reference for the GP posterior, written from the
//! kernel definition without the library's factorizations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vispro::nsgpr::{GprDataset, GprModel, KernelParams, LengthModel, LengthScaleField};

pub type Mat = Vec<Vec<f64>>;

// Gauss-Jordan with partial pivoting; returns (inverse, log|det|).
pub fn invert(a: &Mat) -> (Mat, f64) {
    let n = a.len();
    let mut m: Mat = a.to_vec();
    let mut inv: Mat = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    let mut log_det = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        inv.swap(c, p);
        let d = m[c][c];
        log_det += d.abs().ln();
        for j in 0..n {
            m[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                for j in 0..n {
                    m[r][j] -= f * m[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    (inv, log_det)
}

pub fn matvec(a: &Mat, v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Kernel written out from its definition, independent of the library.
pub fn oracle_kernel(xi: f64, xj: f64, li: f64, lj: f64, sigma0: f64, sigmaf: f64) -> f64 {
    let avg = (li * li + lj * lj) / 2.0;
    let pre = (li * lj).sqrt() / avg.sqrt();
    sigma0 * sigma0 + xi * xj + sigmaf * sigmaf * pre * (-(xi - xj).powi(2) / avg).exp()
}

pub struct Problem {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lengths: Vec<f64>,
    pub params: KernelParams,
}

pub fn problem(m: usize, seed: u64, sigmae: f64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..m).map(|i| (i as f64 + rng.random_range(0.1..0.9)) / m as f64).collect();
    x.sort_by(f64::total_cmp);
    let y = x
        .iter()
        .map(|&v| 1.0 - 0.8 * v + 0.3 * (7.0 * v).sin() + rng.random_range(-0.05..0.05))
        .collect();
    let support = vec![0.0, 0.4, 0.8, 1.2];
    let logs: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..-0.5)).collect();
    let field = LengthScaleField::new(support, logs, 0.5, 1.0).unwrap();
    let lengths = x.iter().map(|&v| field.length_at(v)).collect();
    let params = KernelParams {
        sigma0: rng.random_range(0.2..1.0),
        sigmaf: rng.random_range(0.2..1.0),
        sigmae,
        lengths: LengthModel::Local(field),
    };
    Problem { x, y, lengths, params }
}

pub struct Dense {
    pub beta: [f64; 3],
    pub kinv: Mat,
    pub resid: Vec<f64>,
    pub log_det: f64,
}

pub fn dense(p: &Problem) -> Dense {
    let m = p.x.len();
    let k: Mat = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    oracle_kernel(p.x[i], p.x[j], p.lengths[i], p.lengths[j], p.params.sigma0, p.params.sigmaf)
                        + if i == j { p.params.sigmae.powi(2) } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let (kinv, log_det) = invert(&k);
    let h: Vec<[f64; 3]> = p.x.iter().map(|&v| [1.0, v, v * v]).collect();
    let cols: Vec<Vec<f64>> = (0..3).map(|c| h.iter().map(|r| r[c]).collect()).collect();
    let kinv_cols: Vec<Vec<f64>> = cols.iter().map(|c| matvec(&kinv, c)).collect();
    let a: Mat = (0..3).map(|i| (0..3).map(|j| dot(&cols[i], &kinv_cols[j])).collect()).collect();
    let b: Vec<f64> = (0..3).map(|i| dot(&kinv_cols[i], &p.y)).collect();
    let beta_v = matvec(&invert(&a).0, &b);
    let beta = [beta_v[0], beta_v[1], beta_v[2]];
    let resid = p
        .x
        .iter()
        .zip(&p.y)
        .map(|(&v, &y)| y - beta[0] - beta[1] * v - beta[2] * v * v)
        .collect();
    Dense {
        beta,
        kinv,
        resid,
        log_det,
    }
}

pub fn dense_posterior(p: &Problem, d: &Dense, xs: f64) -> (f64, f64) {
    let LengthModel::Local(field) = &p.params.lengths else { unreachable!() };
    let ls = field.length_at(xs);
    let kstar: Vec<f64> = (0..p.x.len())
        .map(|i| oracle_kernel(xs, p.x[i], ls, p.lengths[i], p.params.sigma0, p.params.sigmaf))
        .collect();
    let mean = d.beta[0] + d.beta[1] * xs + d.beta[2] * xs * xs + dot(&kstar, &matvec(&d.kinv, &d.resid));
    let var = oracle_kernel(xs, xs, ls, ls, p.params.sigma0, p.params.sigmaf) - dot(&kstar, &matvec(&d.kinv, &kstar));
    (mean, var.max(0.0).sqrt())
}

pub fn model(p: &Problem) -> GprModel {
    GprModel::condition(GprDataset::from_normalized(p.x.clone(), p.y.clone()).unwrap(), p.params.clone()).unwrap()
}
