use super::rng::SeededRng;
use super::tensor::NumericsError;

/// Exact categorical draw via the Gumbel-max trick: the argmax of
/// `ln p_j + g_j` with independent standard Gumbel noise is distributed as
/// Cat(p). Zero entries are treated as ln p = −∞ and never selected.
pub fn gumbel_categorical(p: &[f64], rng: &mut SeededRng) -> Result<usize, NumericsError> {
    if p.is_empty() {
        return Err(NumericsError::DegenerateDistribution("empty vector"));
    }
    if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(NumericsError::DegenerateDistribution(
            "negative or non-finite mass",
        ));
    }
    let mut best: Option<(usize, f64)> = None;
    for (j, &pj) in p.iter().enumerate() {
        // Gumbel noise is drawn for every slot so the consumed draw count
        // does not depend on the support.
        let g = rng.gumbel();
        if pj <= 0.0 {
            continue;
        }
        let key = pj.ln() + g;
        match best {
            Some((_, b)) if key <= b => {}
            _ => best = Some((j, key)),
        }
    }
    best.map(|(j, _)| j)
        .ok_or(NumericsError::DegenerateDistribution("all-zero mass"))
}
