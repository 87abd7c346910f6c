//! DB correctness of passive, averaged and combined active/passive bounds.

use super::AnalysisError;
use crate::scalar::Scalar;

fn miss<S: Scalar>(n: u32, pr: S) -> S {
    S::lit(2.0).powf(S::lit(n as f64) * (pr - S::one()))
}

/// 1 − 2^{n(Pr−1)}.
pub fn dbc<S: Scalar>(n: u32, pr_ch: S) -> S {
    S::one() - miss(n, pr_ch)
}

/// (N − Σ 2^{n_i(Pr_i−1)}) / N.
pub fn dbc_avg<S: Scalar>(n: &[u32], pr_ch: &[S]) -> Result<S, AnalysisError> {
    if n.len() != pr_ch.len() {
        return Err(AnalysisError::LengthMismatch(n.len(), pr_ch.len()));
    }
    let big_n = S::lit(n.len() as f64);
    let total = n.iter().zip(pr_ch).fold(S::zero(), |acc, (&k, &p)| acc + miss(k, p));
    Ok((big_n - total) / big_n)
}

/// 1 − 2^{−n_a} · Σ 2^{n_p(i)(Pr_i−1)} / N.
pub fn dbc_ap<S: Scalar>(n_a: u32, n_p: &[u32], pr_ch: &[S]) -> Result<S, AnalysisError> {
    if n_p.len() != pr_ch.len() {
        return Err(AnalysisError::LengthMismatch(n_p.len(), pr_ch.len()));
    }
    let big_n = S::lit(n_p.len() as f64);
    let total = n_p.iter().zip(pr_ch).fold(S::zero(), |acc, (&k, &p)| acc + miss(k, p));
    Ok(S::one() - S::lit(2.0).powi(-(n_a as i32)) * total / big_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_verifier() {
        assert_eq!(dbc(10, 1.0f64), 0.0);
        assert_eq!(dbc(10, 0.0f64), 1.0 - 1.0 / 1024.0);
        assert_eq!(dbc(10, 0.5f64), 0.96875);
        assert_eq!(dbc(10, 0.5f32), 0.96875);
    }

    #[test]
    fn lists_must_match() {
        assert_eq!(dbc_avg(&[10, 10], &[0.5f64]), Err(AnalysisError::LengthMismatch(2, 1)));
        assert_eq!(dbc_ap(2, &[4], &[0.5f64, 0.5]), Err(AnalysisError::LengthMismatch(1, 2)));
    }

    #[test]
    fn combined_reference_point() {
        let v = dbc_ap(2, &[4; 10], &[0.5f64; 10]).unwrap();
        assert_eq!(v, 0.9375);
        assert_eq!(dbc_ap(3, &[7, 2], &[1.0f64, 1.0]).unwrap(), 1.0 - 0.125);
    }
}
