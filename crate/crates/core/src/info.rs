/// Shannon entropy in nats of the distribution proportional to `weights`.
/// Zero weights are skipped; an all-zero input has entropy 0.
pub fn shannon_entropy<I>(weights: I) -> f64
where
    I: IntoIterator<Item = f64> + Clone,
{
    let total: f64 = weights.clone().into_iter().sum();
    if total.is_nan() || total <= 0.0 {
        return 0.0;
    }
    let h: f64 = weights
        .into_iter()
        .filter(|&w| w > 0.0)
        .map(|w| {
            let p = w / total;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_entropies() {
        assert_eq!(shannon_entropy([5.0]), 0.0);
        assert_eq!(shannon_entropy([0.0, 0.0]), 0.0);
        assert!((shannon_entropy([10.0, 10.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((shannon_entropy([10.0, 10.0, 20.0]) - 1.5 * 2f64.ln()).abs() < 1e-15);
        assert!((shannon_entropy([1.0, 1.0, 1.0, 1.0, 0.0]) - 4f64.ln()).abs() < 1e-15);
    }
}
