#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use zeno::scenario::{Model, Scenario};
use zeno::C64;

pub fn model(text: &str) -> Model {
    Scenario::from_toml(text).expect("parses").build().expect("validates")
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

/// exp(-i t h) by scaling and squaring a truncated Taylor series. Shares no
/// code with the library's eigendecomposition route.
pub fn taylor_expm(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let n = h.nrows();
    let a = h * C64::new(0.0, -t);
    let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let squarings = norm.log2().ceil().max(0.0) as i32 + 1;
    let a = a / C64::new(2f64.powi(squarings), 0.0);
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Hermitian matrix from `2 d^2` numbers (diagonal real parts and upper
/// triangle are used).
pub fn hermitian_from(d: usize, xs: &[f64]) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = c(xs[2 * (i * d + i)], 0.0);
        for j in i + 1..d {
            let z = c(xs[2 * (i * d + j)], xs[2 * (i * d + j) + 1]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

pub fn vec_dist(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    (a - b).norm()
}
