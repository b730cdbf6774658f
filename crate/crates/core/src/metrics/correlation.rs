use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("{} sample(s), need at least 2", x.len())));
    }
    if let Some(v) = x.iter().chain(y).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("correlation input {v}")));
    }
    Ok(())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

fn check_spread(x: &[f64], y: &[f64]) -> Result<()> {
    match (is_constant(x), is_constant(y)) {
        (true, true) => Err(Error::UndefinedCorrelation("both inputs are constant".into())),
        (true, false) => Err(Error::UndefinedCorrelation("first input is constant".into())),
        (false, true) => Err(Error::UndefinedCorrelation("second input is constant".into())),
        _ => Ok(()),
    }
}

/// 1-based ranks; tied values share the mean of the positions they occupy.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    doubled_ranks(v).into_iter().map(|r| r as f64 / 2.0).collect()
}

/// Twice the average rank, which is always an integer.
fn doubled_ranks(v: &[f64]) -> Vec<i64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j+1 share rank (i+j+2)/2
        for &k in &order[i..=j] {
            out[k] = (i + j + 2) as i64;
        }
        i = j + 1;
    }
    out
}

/// Spearman correlation: Pearson correlation of average ranks.
///
/// Ranks are centred as integers (`2r - (n+1)`), so the sums are exact and the
/// result is one correctly rounded division whenever the product of the two
/// rank variances is exactly representable.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    check_spread(x, y)?;
    let n1 = x.len() as i64 + 1;
    let rx = doubled_ranks(x);
    let ry = doubled_ranks(y);
    let (mut sxy, mut sxx, mut syy) = (0i128, 0i128, 0i128);
    for (&a, &b) in rx.iter().zip(&ry) {
        let (a, b) = ((a - n1) as i128, (b - n1) as i128);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    let denom = ((sxx as f64) * (syy as f64)).sqrt();
    Ok((sxy as f64 / denom).clamp(-1.0, 1.0))
}

/// Pearson linear correlation.
pub fn plcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    check_spread(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (a - mx, b - my);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance after centring".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Rank by counting: r_i = #{x_j < x_i} + (#{x_j = x_i} + 1) / 2.
    fn oracle_ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let less = v.iter().filter(|&&b| b < a).count() as f64;
                let eq = v.iter().filter(|&&b| b == a).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect()
    }

    fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|a| a * a).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn simple_cases() {
        assert_eq!(srcc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(srcc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((plcc(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((plcc(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn tied_example() {
        let x = [1.0, 2.0, 2.0, 4.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(average_ranks(&x), vec![1.0, 2.5, 2.5, 4.0]);
        // ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4): cov 4.5/4, var 4.5/4 and 5/4
        let expect = 4.5 / (4.5f64 * 5.0).sqrt();
        assert!((srcc(&x, &y).unwrap() - expect).abs() < 1e-15);
        assert!((srcc(&x, &y).unwrap() - oracle_pearson(&oracle_ranks(&x), &y)).abs() < 1e-15);
    }

    #[test]
    fn undefined_and_mismatched() {
        assert!(matches!(srcc(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(srcc(&[1.0, 2.0], &[2.0, 2.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(plcc(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(srcc(&[1.0], &[1.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(plcc(&[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch { .. })));
        assert!(srcc(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn random_pair_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
        assert!((plcc(&x, &y).unwrap() - oracle_pearson(&x, &y)).abs() < 1e-12);
    }

    fn vector(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2..=max_len).prop_flat_map(|n| {
            (
                prop::collection::vec((-4i32..=4).prop_map(|v| v as f64 * 0.5), n),
                prop::collection::vec(-1e3f64..1e3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn monotone_invariance((x, y) in vector(20)) {
            prop_assume!(!is_constant(&x) && !is_constant(&y));
            let base = srcc(&x, &y).unwrap();
            let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let cube: Vec<f64> = y.iter().map(|v| v * v * v).collect();
            let aff: Vec<f64> = x.iter().map(|v| 3.0 * v - 7.0).collect();
            prop_assert_eq!(srcc(&ex, &y).unwrap(), base);
            prop_assert_eq!(srcc(&x, &cube).unwrap(), base);
            prop_assert_eq!(srcc(&aff, &y).unwrap(), base);
            prop_assert_eq!(srcc(&y, &x).unwrap(), base);
        }

        #[test]
        fn pearson_affine_and_sign((x, y) in vector(20)) {
            prop_assume!(!is_constant(&x) && !is_constant(&y));
            let base = plcc(&x, &y).unwrap();
            let aff: Vec<f64> = y.iter().map(|v| 0.25 * v + 11.0).collect();
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((plcc(&x, &aff).unwrap() - base).abs() < 1e-12);
            prop_assert!((plcc(&neg, &y).unwrap() + base).abs() < 1e-12);
            prop_assert!((plcc(&y, &x).unwrap() - base).abs() < 1e-15);
        }
    }
}
