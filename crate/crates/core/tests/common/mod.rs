//! Brute-force reference implementations, written straight from the
//! definitional formulas and sharing no code with the library.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relstab::{validate_dataset, AnnotationSet, LabelSchema, RawRecord};

pub const CATS: [&str; 4] = ["c0", "c1", "c2", "c3"];

/// Items as rows, annotators as columns; `None` is a missing label.
pub type Grid = Vec<Vec<Option<usize>>>;

pub fn set_from_grid(grid: &Grid, k: usize) -> AnnotationSet {
    let schema = LabelSchema::nominal("t", &CATS[..k]).unwrap();
    let mut records = Vec::new();
    for (i, row) in grid.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let Some(c) = cell {
                records.push(RawRecord::new(
                    "t",
                    &format!("i{i}"),
                    &format!("a{j}"),
                    1,
                    CATS[*c],
                ));
            }
        }
    }
    validate_dataset(records, &schema).unwrap()
}

/// Every complete grid of `items` x `annotators` over `k` categories.
pub fn all_grids(items: usize, annotators: usize, k: usize) -> Vec<Grid> {
    let cells = items * annotators;
    (0..k.pow(cells as u32))
        .map(|mut code| {
            let mut g = vec![vec![None; annotators]; items];
            for cell in 0..cells {
                g[cell / annotators][cell % annotators] = Some(code % k);
                code /= k;
            }
            g
        })
        .collect()
}

/// A grid with missing cells; every item keeps at least one label.
pub fn random_sparse_grid(rng: &mut ChaCha8Rng) -> (Grid, usize) {
    let items = rng.random_range(2..=8);
    let annotators = rng.random_range(2..=6);
    let k = rng.random_range(2..=4);
    let missing = rng.random_range(0.0..0.6);
    let grid = (0..items)
        .map(|_| {
            let mut row: Vec<Option<usize>> = (0..annotators)
                .map(|_| (!rng.random_bool(missing)).then(|| rng.random_range(0..k)))
                .collect();
            if row.iter().all(Option::is_none) {
                let j = rng.random_range(0..annotators);
                row[j] = Some(rng.random_range(0..k));
            }
            row
        })
        .collect();
    (grid, k)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cohen's kappa from the explicit k x k joint table.
pub fn oracle_cohen(a: &[usize], b: &[usize], k: usize) -> Option<f64> {
    let n = a.len() as f64;
    let mut joint = vec![vec![0.0; k]; k];
    for (&x, &y) in a.iter().zip(b) {
        joint[x][y] += 1.0;
    }
    let po: f64 = (0..k).map(|c| joint[c][c]).sum::<f64>() / n;
    let mut pe = 0.0;
    for (c, row) in joint.iter().enumerate() {
        let row: f64 = row.iter().sum();
        let col: f64 = (0..k).map(|r| joint[r][c]).sum();
        pe += (row / n) * (col / n);
    }
    if (1.0 - pe).abs() < 1e-15 {
        return (po == 1.0).then_some(1.0);
    }
    Some((po - pe) / (1.0 - pe))
}

/// Fleiss' kappa on items that all carry `n` labels.
pub fn oracle_fleiss(rows: &[Vec<usize>], k: usize) -> Option<f64> {
    let n = rows[0].len() as f64;
    let big_n = rows.len() as f64;
    let mut p_i_sum = 0.0;
    let mut p_j = vec![0.0; k];
    for row in rows {
        let mut agreeing_ordered_pairs = 0.0;
        for (x, &l) in row.iter().enumerate() {
            for (y, &m) in row.iter().enumerate() {
                if x != y && l == m {
                    agreeing_ordered_pairs += 1.0;
                }
            }
            p_j[l] += 1.0 / (big_n * n);
        }
        p_i_sum += agreeing_ordered_pairs / (n * (n - 1.0));
    }
    let p_bar = p_i_sum / big_n;
    let pe: f64 = p_j.iter().map(|p| p * p).sum();
    if (1.0 - pe).abs() < 1e-15 {
        return Some(1.0);
    }
    Some((p_bar - pe) / (1.0 - pe))
}

/// Nominal alpha from pairwise disagreements: within-unit ordered pairs
/// weighted by `1/(m-1)` against all ordered pairs of pairable values.
pub fn oracle_alpha_nominal(units: &[Vec<usize>]) -> Option<f64> {
    let pairable: Vec<&Vec<usize>> = units.iter().filter(|u| u.len() >= 2).collect();
    let values: Vec<usize> = pairable.iter().flat_map(|u| u.iter().copied()).collect();
    let n = values.len() as f64;
    if n < 2.0 {
        return None;
    }
    let mut d_o = 0.0;
    for u in &pairable {
        let m = u.len() as f64;
        for (x, a) in u.iter().enumerate() {
            for (y, b) in u.iter().enumerate() {
                if x != y && a != b {
                    d_o += 1.0 / (m - 1.0);
                }
            }
        }
    }
    d_o /= n;
    let mut d_e = 0.0;
    for (x, a) in values.iter().enumerate() {
        for (y, b) in values.iter().enumerate() {
            if x != y && a != b {
                d_e += 1.0;
            }
        }
    }
    d_e /= n * (n - 1.0);
    if d_e == 0.0 {
        return (d_o == 0.0).then_some(1.0);
    }
    Some(1.0 - d_o / d_e)
}

pub fn units_of(grid: &Grid) -> Vec<Vec<usize>> {
    grid.iter()
        .map(|r| r.iter().flatten().copied().collect())
        .collect()
}

pub fn column(grid: &Grid, j: usize) -> Vec<usize> {
    grid.iter().map(|r| r[j].unwrap()).collect()
}

/// Pearson correlation of the two indicator variables behind a 2x2 table.
pub fn pearson_of_table(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (count, x, y) in [(a, 0.0, 0.0), (b, 0.0, 1.0), (c, 1.0, 0.0), (d, 1.0, 1.0)] {
        for _ in 0..count {
            xs.push(x);
            ys.push(y);
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
