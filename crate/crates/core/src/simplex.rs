//! Euclidean projection onto the probability simplex.

/// Projects `v` onto `{p ≥ 0, Σp = 1}`.
///
/// Finds the threshold `τ` with `Σ max(v_k − τ, 0) = 1` by scanning the sorted
/// entries for the linear piece that contains the root, then clips. The sort is
/// stable so ties resolve identically on every run.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    project_to_simplex_into(v, &mut out);
    out
}

/// In-place variant of [`project_to_simplex`]; `out` must have `v.len()` entries.
pub fn project_to_simplex_into(v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(v.len(), out.len());
    match v.len() {
        0 => return,
        1 => {
            out[0] = 1.0;
            return;
        }
        _ => {}
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (idx, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (idx + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - tau).max(0.0);
    }
}

/// `(I − 11ᵀ/m) g`: removes the mean so the step stays on the simplex's hyperplane.
pub fn riemannian_project(g: &[f64]) -> Vec<f64> {
    if g.is_empty() {
        return Vec::new();
    }
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    g.iter().map(|x| x - mean).collect()
}
