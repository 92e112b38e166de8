use crate::error::{Error, Result};

/// Numerically stable softmax over one logit vector. Subtracts the max
/// before exponentiating, so large logits cannot overflow.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Argument("softmax of empty logits".into()));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("softmax requires finite logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Stable log-softmax: x_i - max - ln(sum exp(x - max)). Never returns a
/// positive value.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Argument("log_softmax of empty logits".into()));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("log_softmax requires finite logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    Ok(logits.iter().map(|&x| x - max - log_sum).collect())
}

/// Negative log-likelihood of a sequence given per-token target
/// log-probabilities: -sum(log p). Inputs must be non-positive.
pub fn nll_loss(target_logprobs: &[f64]) -> Result<f64> {
    if target_logprobs.is_empty() {
        return Err(Error::Argument("nll of empty sequence".into()));
    }
    if let Some(bad) = target_logprobs.iter().find(|&&lp| lp > 0.0 || lp.is_nan()) {
        return Err(Error::Argument(format!(
            "log-probabilities must be non-positive, got {bad}"
        )));
    }
    Ok(-target_logprobs.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_log_counts_recovers_proportions() {
        let logits = [1.0f64.ln(), 2.0f64.ln(), 3.0f64.ln()];
        let p = softmax(&logits).unwrap();
        let expect = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        for (got, want) in p.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn softmax_sums_to_one_even_for_huge_logits() {
        let logits = [1000.0, 999.0, 998.0, -1000.0];
        let p = softmax(&logits).unwrap();
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x.is_finite() && x >= 0.0));
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(&[0.1, -0.4, 2.0]).unwrap();
        let b = softmax(&[100.1, 99.6, 102.0]).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn log_softmax_matches_log_of_softmax() {
        let logits = [0.3, -1.2, 0.9, 4.0];
        let lp = log_softmax(&logits).unwrap();
        let p = softmax(&logits).unwrap();
        for (l, q) in lp.iter().zip(p.iter()) {
            assert!((l - q.ln()).abs() < 1e-12);
        }
        assert!(lp.iter().all(|&l| l <= 0.0));
    }

    #[test]
    fn nll_of_uniform_seven_way_guess_is_ln_seven() {
        let loss = nll_loss(&[-(7.0f64.ln())]).unwrap();
        assert!((loss - 7.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nll_sums_over_tokens() {
        let loss = nll_loss(&[-(7.0f64.ln()), -(8.0f64.ln())]).unwrap();
        assert!((loss - 56.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nll_rejects_positive_logprobs() {
        assert!(nll_loss(&[0.5]).is_err());
        assert!(nll_loss(&[]).is_err());
        assert!(nll_loss(&[0.0]).is_ok());
    }

    #[test]
    fn empty_and_nonfinite_logits_are_rejected() {
        assert!(softmax(&[]).is_err());
        assert!(softmax(&[1.0, f64::NAN]).is_err());
        assert!(softmax(&[1.0, f64::INFINITY]).is_err());
        assert!(log_softmax(&[]).is_err());
    }
}
