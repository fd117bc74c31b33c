mod common;

use rand::Rng;
use synthscore::metrics::five_number;
use synthscore::{kendall_tau, mean_absolute_error, pearson};

/// O(n²) τ-b straight from the pair counts.
fn kendall_brute(pairs: &[(f64, f64)]) -> Option<f64> {
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let dx = pairs[i].0 - pairs[j].0;
            let dy = pairs[i].1 - pairs[j].1;
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            if dx == 0.0 {
                tie_x += 1;
            } else if dy == 0.0 {
                tie_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let base = (concordant + discordant) as f64;
    let denom = ((base + tie_x as f64) * (base + tie_y as f64)).sqrt();
    (denom > 0.0).then(|| (concordant - discordant) as f64 / denom)
}

/// Two-pass textbook Pearson.
fn pearson_two_pass(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Scores on a coarse grid so ties are common; labels on {0, .25, .., 1}.
fn tied_pairs(rng: &mut impl Rng, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| (rng.gen_range(0..8) as f64 / 7.0, rng.gen_range(0..5) as f64 / 4.0))
        .collect()
}

fn continuous_pairs(rng: &mut impl Rng, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let x: f64 = rng.gen();
            (x, 0.5 * x + 0.5 * rng.gen::<f64>())
        })
        .collect()
}

#[test]
fn kendall_matches_brute_force_with_ties() {
    let mut rng = common::rng(11);
    for _ in 0..100 {
        let n = rng.gen_range(2..=50);
        let pairs = tied_pairs(&mut rng, n);
        let fast = kendall_tau(&pairs).unwrap();
        let slow = kendall_brute(&pairs);
        match (fast, slow) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12, "{a} vs {b} on {pairs:?}"),
            (None, None) => {}
            other => panic!("definedness differs: {other:?} on {pairs:?}"),
        }
    }
}

#[test]
fn kendall_is_invariant_under_monotone_transforms() {
    let mut rng = common::rng(12);
    for _ in 0..50 {
        let pairs = continuous_pairs(&mut rng, 40);
        let warped: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x.powi(3) + 2.0, y.exp())).collect();
        let a = kendall_tau(&pairs).unwrap().unwrap();
        let b = kendall_tau(&warped).unwrap().unwrap();
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn kendall_extremes_and_undefined() {
    let up: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, i as f64)).collect();
    let down: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, -(i as f64))).collect();
    assert_eq!(kendall_tau(&up).unwrap(), Some(1.0));
    assert_eq!(kendall_tau(&down).unwrap(), Some(-1.0));
    let flat: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.5)).collect();
    assert_eq!(kendall_tau(&flat).unwrap(), None);
}

#[test]
fn pearson_matches_two_pass_oracle() {
    let mut rng = common::rng(13);
    for _ in 0..100 {
        let n = rng.gen_range(2..=60);
        let pairs = if rng.gen_bool(0.5) { tied_pairs(&mut rng, n) } else { continuous_pairs(&mut rng, n) };
        let fast = pearson(&pairs).unwrap();
        match (fast, pearson_two_pass(&pairs)) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12, "{a} vs {b}"),
            (None, None) => {}
            other => panic!("definedness differs: {other:?}"),
        }
    }
}

#[test]
fn pearson_symmetric_and_affine_invariant() {
    let mut rng = common::rng(14);
    for _ in 0..50 {
        let pairs = continuous_pairs(&mut rng, 30);
        let swapped: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (y, x)).collect();
        let scaled: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (3.0 * x - 1.0, 0.25 * y + 7.0)).collect();
        let flipped: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (-2.0 * x, y)).collect();
        let r = pearson(&pairs).unwrap().unwrap();
        assert!((r - pearson(&swapped).unwrap().unwrap()).abs() <= 1e-12);
        assert!((r - pearson(&scaled).unwrap().unwrap()).abs() <= 1e-12);
        assert!((r + pearson(&flipped).unwrap().unwrap()).abs() <= 1e-12);
        assert!((-1.0..=1.0).contains(&r));
    }
}

#[test]
fn mae_properties() {
    let mut rng = common::rng(15);
    for _ in 0..50 {
        let pairs = continuous_pairs(&mut rng, 25);
        let m = mean_absolute_error(&pairs).unwrap();
        assert!(m >= 0.0);
        let swapped: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (y, x)).collect();
        assert_eq!(m, mean_absolute_error(&swapped).unwrap());
        let shifted: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x + 0.5, y + 0.5)).collect();
        assert!((m - mean_absolute_error(&shifted).unwrap()).abs() <= 1e-12);
        let same: Vec<(f64, f64)> = pairs.iter().map(|&(x, _)| (x, x)).collect();
        assert_eq!(mean_absolute_error(&same).unwrap(), 0.0);
    }
    assert!(mean_absolute_error::<f64>(&[]).is_err());
}

#[test]
fn worked_metric_values() {
    let pairs: [(f64, f64); 4] = [(0.1, 0.0), (0.4, 0.25), (0.35, 0.5), (0.8, 1.0)];
    // concordant 5, discordant 1, no ties
    let tau = kendall_tau(&pairs).unwrap().unwrap();
    assert!((tau - 4.0 / 6.0).abs() < 1e-15);
    let mae = mean_absolute_error(&pairs).unwrap();
    assert!((mae - (0.1 + 0.15 + 0.15 + 0.2) / 4.0).abs() < 1e-15);
}

#[test]
fn five_number_ordering() {
    let mut rng = common::rng(16);
    for _ in 0..50 {
        let n = rng.gen_range(1..40);
        let v: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let s = five_number(&v).unwrap();
        assert_eq!(s.n, n);
        assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
        assert_eq!(s.min, v.iter().cloned().fold(f64::INFINITY, f64::min));
        assert_eq!(s.max, v.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    assert!(five_number::<f64>(&[]).is_none());
}
